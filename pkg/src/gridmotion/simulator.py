"""Synthetic two-frame scenes with static background and rigidly moving objects.

Conventions: ``camera_motion`` maps matched-frame camera coordinates into the
reference frame, so a static point satisfies ``x_re = camera_motion(x_ma)``.
Object motion acts on reference-frame coordinates,
``x_moved = object_motion(x_re)``, and the matched observation is
``x_ma = camera_motion^-1(x_moved)``. Under the ground-truth pose an object
point therefore has raw residual ``x_re - x_moved``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import SE3, Matches

MAX_RESAMPLE_ROUNDS = 200


@dataclass(frozen=True)
class Intrinsics:
    fx: float = 525.0
    fy: float = 525.0
    cx: float = 319.5
    cy: float = 239.5
    width: int = 640
    height: int = 480

    def project(self, X):
        X = np.asarray(X, dtype=float).reshape(-1, 3)
        return np.column_stack([self.fx * X[:, 0] / X[:, 2] + self.cx,
                                self.fy * X[:, 1] / X[:, 2] + self.cy])

    def backproject(self, uv, z):
        uv = np.asarray(uv, dtype=float).reshape(-1, 2)
        z = np.asarray(z, dtype=float).reshape(-1)
        return np.column_stack([(uv[:, 0] - self.cx) * z / self.fx,
                                (uv[:, 1] - self.cy) * z / self.fy, z])

    def inside(self, uv):
        uv = np.asarray(uv).reshape(-1, 2)
        return (uv[:, 0] >= 0) & (uv[:, 0] < self.width) & (uv[:, 1] >= 0) & (uv[:, 1] < self.height)


@dataclass(frozen=True)
class ObjectSpec:
    n_points: int = 300
    center: tuple = (0.3, 0.0, 3.0)
    extent: float = 0.6
    motion: SE3 = field(default_factory=lambda: SE3.from_rotvec([0.0, 0.0, 0.0], [0.3, 0.0, 0.0], degrees=True))

    def __post_init__(self):
        if self.extent <= 0:
            raise ValueError("object extent must be positive")
        if self.n_points < 0:
            raise ValueError("n_points must be >= 0")
        if self.center[2] <= 0:
            raise ValueError("object center must lie in front of the camera")


def _default_camera_motion():
    return SE3.from_rotvec([0.0, 1.0, 0.0], [0.05, 0.0, 0.1], degrees=True)


@dataclass(frozen=True)
class SceneConfig:
    intrinsics: Intrinsics = Intrinsics()
    n_static: int = 2000
    z_min: float = 2.0
    z_max: float = 8.0
    camera_motion: SE3 = field(default_factory=_default_camera_motion)
    objects: tuple = (ObjectSpec(),)
    pixel_noise_sigma: float = 0.5
    depth_noise_sigma: float = 0.01
    false_match_rate: float = 0.0
    seed: int = 0
    occlusion: bool = True

    def __post_init__(self):
        object.__setattr__(self, "objects", tuple(self.objects))
        if not 0 < self.z_min <= self.z_max:
            raise ValueError("static depth range must be positive and ordered")
        if self.pixel_noise_sigma < 0 or self.depth_noise_sigma < 0:
            raise ValueError("noise levels must be non-negative")
        if not 0.0 <= self.false_match_rate < 1.0:
            raise ValueError("false_match_rate must lie in [0, 1)")
        if self.n_static < 0:
            raise ValueError("n_static must be >= 0")

    @property
    def n_points(self) -> int:
        return self.n_static + sum(o.n_points for o in self.objects)


@dataclass(frozen=True)
class GroundTruth:
    pose: SE3
    dynamic_ids: frozenset
    object_members: tuple
    false_match_ids: frozenset = frozenset()


def _visible(cfg: SceneConfig, X_re, X_ma):
    K = cfg.intrinsics
    ok = (X_re[:, 2] > 0) & (X_ma[:, 2] > 0)
    ok[ok] &= K.inside(K.project(X_re[ok])) & K.inside(K.project(X_ma[ok]))
    return ok


def _silhouettes(cfg: SceneConfig):
    """Per object and frame: (convex hull of the projected box, nearest depth)."""
    from scipy.spatial import Delaunay

    K = cfg.intrinsics
    cam_inv = cfg.camera_motion.inverse()
    corners = np.array([[sx, sy, sz] for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)]) / 2.0
    out = []
    for spec in cfg.objects:
        if spec.n_points == 0:
            continue
        box = np.asarray(spec.center, dtype=float) + spec.extent * corners
        for X in (box, cam_inv.apply(spec.motion.apply(box))):
            if np.any(X[:, 2] <= 0):
                continue
            out.append((Delaunay(K.project(X)), X[:, 2].min(), X is box))
    return out


def _occluded(cfg: SceneConfig, X_re, X_ma, silhouettes):
    K = cfg.intrinsics
    hidden = np.zeros(len(X_re), dtype=bool)
    for hull, z_near, is_ref in silhouettes:
        X = X_re if is_ref else X_ma
        behind = X[:, 2] > z_near
        if np.any(behind):
            hidden[behind] |= hull.find_simplex(K.project(X[behind])) >= 0
    return hidden


def _sample(cfg: SceneConfig, n, draw, rng, what, silhouettes=()):
    """Draw n reference points whose observations stay in both images
    and, for background points, are not hidden behind a moving object."""
    cam_inv = cfg.camera_motion.inverse()
    X_re = np.zeros((n, 3))
    X_moved = np.zeros((n, 3))
    todo = np.arange(n)
    for _ in range(MAX_RESAMPLE_ROUNDS):
        if len(todo) == 0:
            break
        pts, moved = draw(len(todo), rng)
        X_ma = cam_inv.apply(moved)
        ok = _visible(cfg, pts, X_ma)
        if silhouettes:
            ok &= ~_occluded(cfg, pts, X_ma, silhouettes)
        X_re[todo[ok]] = pts[ok]
        X_moved[todo[ok]] = moved[ok]
        todo = todo[~ok]
    if len(todo):
        raise ValueError(f"could not place {len(todo)} {what} points in view of both frames")
    return X_re, X_moved


def _observe(cfg: SceneConfig, X, rng):
    """Pixel and 3D observation of camera-frame points, with noise."""
    K = cfg.intrinsics
    uv = K.project(X)
    if cfg.pixel_noise_sigma == 0 and cfg.depth_noise_sigma == 0:
        return uv, X.copy()
    uv = uv + rng.normal(0.0, cfg.pixel_noise_sigma, uv.shape) if cfg.pixel_noise_sigma else uv
    z = X[:, 2] * (1.0 + rng.normal(0.0, cfg.depth_noise_sigma, len(X))) if cfg.depth_noise_sigma else X[:, 2]
    z = np.maximum(z, 1e-3)
    # keep noisy pixels on the sensor
    uv[:, 0] = np.clip(uv[:, 0], 0.0, np.nextafter(K.width, 0))
    uv[:, 1] = np.clip(uv[:, 1], 0.0, np.nextafter(K.height, 0))
    return uv, K.backproject(uv, z)


def generate(cfg: SceneConfig):
    """Build correspondences and ground truth; bit-reproducible for a fixed seed.

    Ids run 0..n_static-1 for background points, then object by object.
    """
    ss = np.random.SeedSequence(cfg.seed)
    s_static, s_objects, s_noise, s_false = ss.spawn(4)
    K = cfg.intrinsics

    def draw_static(k, rng):
        uv = np.column_stack([rng.uniform(0, K.width, k), rng.uniform(0, K.height, k)])
        pts = K.backproject(uv, rng.uniform(cfg.z_min, cfg.z_max, k))
        return pts, pts

    chunks = [_sample(cfg, cfg.n_static, draw_static, np.random.default_rng(s_static), "static",
                      _silhouettes(cfg) if cfg.occlusion else ())]
    members = []
    start = cfg.n_static
    for spec, s_obj in zip(cfg.objects, s_objects.spawn(len(cfg.objects))):
        c = np.asarray(spec.center, dtype=float)

        def draw_obj(k, rng, c=c, spec=spec):
            pts = c + rng.uniform(-spec.extent / 2, spec.extent / 2, (k, 3))
            return pts, spec.motion.apply(pts)

        chunks.append(_sample(cfg, spec.n_points, draw_obj, np.random.default_rng(s_obj), "object"))
        members.append(frozenset(range(start, start + spec.n_points)))
        start += spec.n_points

    X_re = np.concatenate([c[0] for c in chunks])
    X_ma = cfg.camera_motion.inverse().apply(np.concatenate([c[1] for c in chunks]))
    noise = np.random.default_rng(s_noise)
    px_re, x_re = _observe(cfg, X_re, noise)
    px_ma, x_ma = _observe(cfg, X_ma, noise)
    ids = np.arange(len(X_re))
    matches = Matches(ids, px_re, px_ma, x_re, x_ma)

    dynamic = frozenset().union(*members) if members else frozenset()
    corrupted = frozenset()
    if cfg.false_match_rate > 0:
        matches, bad = inject_false_matches(matches, cfg.false_match_rate,
                                            int(s_false.generate_state(1)[0]))
        corrupted = frozenset(int(i) for i in bad)
    return matches, GroundTruth(cfg.camera_motion, dynamic, tuple(members), corrupted)


def inject_false_matches(matches: Matches, rate: float, seed=None):
    """Give ``round(rate * N)`` correspondences the matched side of another one.

    The chosen set is rotated by one place, so every chosen id ends up with
    a partner's matched pixel and 3D point. Returns (matches, corrupted ids).
    """
    if not 0.0 <= rate < 1.0:
        raise ValueError("rate must lie in [0, 1)")
    n = len(matches)
    k = int(round(rate * n))
    if k == 0:
        return matches, np.zeros(0, dtype=np.int64)
    rng = np.random.default_rng(seed)
    chosen = np.sort(rng.choice(n, size=k, replace=False))
    if k == 1:
        others = np.setdiff1d(np.arange(n), chosen)
        source = rng.choice(others, size=1)
    else:
        source = np.roll(chosen, 1)
    px_ma = matches.px_ma.copy()
    x_ma = matches.x_ma.copy()
    px_ma[chosen] = matches.px_ma[source]
    x_ma[chosen] = matches.x_ma[source]
    out = Matches(matches.ids, matches.px_re, px_ma, matches.x_re, x_ma)
    return out, matches.ids[chosen]
