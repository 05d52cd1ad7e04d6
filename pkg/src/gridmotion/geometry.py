"""Rigid transforms, 3D residuals and motion-pattern quantization."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

ORTHO_TOL = 1e-9


@dataclass(frozen=True)
class SE3:
    """Rigid transform ``p -> rotation @ p + translation``."""

    rotation: np.ndarray
    translation: np.ndarray
    # exact rotation parameters the pose was built from, e.g. ("quat", (x, y, z, w));
    # lets text formats re-emit them verbatim instead of a lossy matrix conversion
    source: tuple | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        R = np.array(self.rotation, dtype=float).reshape(3, 3)
        t = np.array(self.translation, dtype=float).reshape(3)
        if not (np.all(np.isfinite(R)) and np.all(np.isfinite(t))):
            raise ValueError("SE3 entries must be finite")
        if not np.allclose(R @ R.T, np.eye(3), atol=ORTHO_TOL) or abs(np.linalg.det(R) - 1.0) > ORTHO_TOL:
            raise ValueError("rotation must be orthonormal with det +1")
        R.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "SE3":
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_matrix(cls, T) -> "SE3":
        T = np.asarray(T, dtype=float)
        return cls(T[:3, :3], T[:3, 3])

    @classmethod
    def from_rotvec(cls, rotvec, translation=(0.0, 0.0, 0.0), degrees: bool = False) -> "SE3":
        from scipy.spatial.transform import Rotation

        rv = np.asarray(rotvec, dtype=float).reshape(3)
        R = Rotation.from_rotvec(rv, degrees=degrees).as_matrix()
        kind = "rotvec_deg" if degrees else "rotvec"
        return cls(_orthonormalize(R), translation, (kind, tuple(float(v) for v in rv)))

    @classmethod
    def from_quat(cls, quat, translation=(0.0, 0.0, 0.0)) -> "SE3":
        """From a unit quaternion in (x, y, z, w) order."""
        from scipy.spatial.transform import Rotation

        q = np.asarray(quat, dtype=float).reshape(4)
        R = Rotation.from_quat(q).as_matrix()
        return cls(_orthonormalize(R), translation, ("quat", tuple(float(v) for v in q)))

    def matrix(self) -> np.ndarray:
        T = np.eye(4)
        T[:3, :3] = self.rotation
        T[:3, 3] = self.translation
        return T

    def compose(self, other: "SE3") -> "SE3":
        """``self * other``: apply ``other`` first."""
        return SE3(_orthonormalize(self.rotation @ other.rotation),
                   self.rotation @ other.translation + self.translation)

    def __matmul__(self, other: "SE3") -> "SE3":
        return self.compose(other)

    def inverse(self) -> "SE3":
        Rt = self.rotation.T
        return SE3(Rt, -Rt @ self.translation)

    def apply(self, points) -> np.ndarray:
        """Transform an (N, 3) or (3,) array of points."""
        points = np.asarray(points, dtype=float)
        return points @ self.rotation.T + self.translation

    def rotation_angle(self) -> float:
        """Rotation angle in radians."""
        c = (np.trace(self.rotation) - 1.0) / 2.0
        return float(np.arccos(np.clip(c, -1.0, 1.0)))

    def __eq__(self, other):
        if not isinstance(other, SE3):
            return NotImplemented
        return bool(np.array_equal(self.rotation, other.rotation)
                    and np.array_equal(self.translation, other.translation))

    def __hash__(self):
        return hash((self.rotation.tobytes(), self.translation.tobytes()))


def _orthonormalize(R):
    # projects onto SO(3); removes drift accumulated by repeated products
    U, _, Vt = np.linalg.svd(R)
    D = np.diag([1.0, 1.0, np.sign(np.linalg.det(U @ Vt))])
    return U @ D @ Vt


def transform_point(pose: SE3, p) -> np.ndarray:
    return pose.apply(p)


@dataclass(frozen=True)
class Correspondence:
    id: int
    px_re: tuple
    px_ma: tuple
    x_re: tuple
    x_ma: tuple


class Matches:
    """Column store of correspondences.

    ``px_re``/``px_ma`` are (N, 2) pixel coordinates (u, v); ``x_re``/``x_ma``
    are (N, 3) camera-frame points of the reference and matched frame.
    """

    def __init__(self, ids, px_re, px_ma, x_re, x_ma):
        self.ids = np.asarray(ids, dtype=np.int64).reshape(-1)
        n = len(self.ids)
        self.px_re = np.asarray(px_re, dtype=float).reshape(n, 2)
        self.px_ma = np.asarray(px_ma, dtype=float).reshape(n, 2)
        self.x_re = np.asarray(x_re, dtype=float).reshape(n, 3)
        self.x_ma = np.asarray(x_ma, dtype=float).reshape(n, 3)
        if len(np.unique(self.ids)) != n:
            raise ValueError("correspondence ids must be unique")
        if n and (np.any(self.x_re[:, 2] <= 0) or np.any(self.x_ma[:, 2] <= 0)):
            raise ValueError("3D points must lie in front of the camera (z > 0)")

    @classmethod
    def empty(cls) -> "Matches":
        return cls(np.zeros(0), np.zeros((0, 2)), np.zeros((0, 2)), np.zeros((0, 3)), np.zeros((0, 3)))

    @classmethod
    def from_records(cls, records: Iterable[Correspondence]) -> "Matches":
        records = list(records)
        if not records:
            return cls.empty()
        return cls([r.id for r in records], [r.px_re for r in records], [r.px_ma for r in records],
                   [r.x_re for r in records], [r.x_ma for r in records])

    def records(self) -> list[Correspondence]:
        return [Correspondence(int(self.ids[i]), tuple(self.px_re[i]), tuple(self.px_ma[i]),
                               tuple(self.x_re[i]), tuple(self.x_ma[i])) for i in range(len(self))]

    def subset(self, index) -> "Matches":
        return Matches(self.ids[index], self.px_re[index], self.px_ma[index],
                       self.x_re[index], self.x_ma[index])

    def __len__(self):
        return len(self.ids)

    def __getitem__(self, i) -> Correspondence:
        return Correspondence(int(self.ids[i]), tuple(self.px_re[i]), tuple(self.px_ma[i]),
                              tuple(self.x_re[i]), tuple(self.x_ma[i]))

    def __eq__(self, other):
        if not isinstance(other, Matches):
            return NotImplemented
        return all(np.array_equal(getattr(self, k), getattr(other, k))
                   for k in ("ids", "px_re", "px_ma", "x_re", "x_ma"))


def as_matches(matches) -> Matches:
    if isinstance(matches, Matches):
        return matches
    return Matches.from_records(matches)


@dataclass(frozen=True)
class Residual:
    raw: np.ndarray
    normalized: np.ndarray


@dataclass(frozen=True, order=True)
class MotionBin:
    iz: int
    ix: int

    @property
    def is_static(self) -> bool:
        return self.iz == 0 and self.ix == 0

    def __neg__(self):
        return MotionBin(-self.iz, -self.ix)

    def __repr__(self):
        return f"MotionBin({self.iz}, {self.ix})"


STATIC = MotionBin(0, 0)


def residual(c: Correspondence, pose: SE3, alpha: float = 1.0) -> Residual:
    """Residual of one correspondence under ``pose`` (maps matched frame into reference frame)."""
    raw, normalized = residuals(np.asarray(c.x_re, float)[None], np.asarray(c.x_ma, float)[None], pose, alpha)
    return Residual(raw[0], normalized[0])


def residuals(x_re, x_ma, pose: SE3, alpha: float = 1.0):
    """Vectorized residuals: returns (raw, normalized), both (N, 3).

    The raw difference is damped by the distance of the matched-frame point,
    since triangulated depth uncertainty grows with range.
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    x_re = np.asarray(x_re, dtype=float).reshape(-1, 3)
    x_ma = np.asarray(x_ma, dtype=float).reshape(-1, 3)
    dist = np.linalg.norm(x_ma, axis=1)
    if np.any(dist == 0):
        raise ValueError("matched point at the camera center has no defined residual")
    raw = x_re - pose.apply(x_ma)
    normalized = raw * (alpha / dist)[:, None]
    return raw, normalized


def round_half_away(x):
    x = np.asarray(x, dtype=float)
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def quantize_array(normalized, e_int_z: float, e_int_x: float, bins_per_axis: int):
    """Quantize (N, 3) normalized residuals into (iz, ix) integer arrays."""
    _check_bins(e_int_z, e_int_x, bins_per_axis)
    B = (bins_per_axis - 1) // 2
    normalized = np.asarray(normalized, dtype=float).reshape(-1, 3)
    iz = np.clip(round_half_away(normalized[:, 2] / e_int_z), -B, B).astype(np.int64)
    ix = np.clip(round_half_away(normalized[:, 0] / e_int_x), -B, B).astype(np.int64)
    return iz, ix


def quantize(r: Residual, e_int_z: float = 0.05, e_int_x: float = 0.05, bins_per_axis: int = 5) -> MotionBin:
    iz, ix = quantize_array(np.asarray(r.normalized)[None], e_int_z, e_int_x, bins_per_axis)
    return MotionBin(int(iz[0]), int(ix[0]))


def _check_bins(e_int_z, e_int_x, bins_per_axis):
    if e_int_z <= 0 or e_int_x <= 0:
        raise ValueError("residual intervals must be positive")
    if bins_per_axis < 3 or bins_per_axis % 2 == 0:
        raise ValueError("bins_per_axis must be odd and >= 3")


def bin_index(iz, ix, bins_per_axis: int):
    """Flat histogram index of a bin; row-major over (iz, ix)."""
    B = (bins_per_axis - 1) // 2
    return (np.asarray(iz) + B) * bins_per_axis + (np.asarray(ix) + B)


def bin_from_index(k: int, bins_per_axis: int) -> MotionBin:
    B = (bins_per_axis - 1) // 2
    return MotionBin(int(k) // bins_per_axis - B, int(k) % bins_per_axis - B)


def all_bins(bins_per_axis: int) -> Sequence[MotionBin]:
    return [bin_from_index(k, bins_per_axis) for k in range(bins_per_axis * bins_per_axis)]
