"""Text formats: matches and labels (CSV), trajectories (TUM), key = value configs.

Every file starts with the version line ``# gridmotion-format v1``. Floats are
written with ``repr`` so write -> read -> write is byte-identical.
"""
from __future__ import annotations

import os
import tempfile
from dataclasses import asdict, fields

import numpy as np
from scipy.spatial.transform import Rotation

from .clustering import Label, LabelMap
from .geometry import SE3, Matches, MotionBin
from .grid import GridConfig, Verdict
from .pipeline import PipelineConfig
from .pose_eval import RansacParams, Trajectory
from .simulator import GroundTruth, Intrinsics, ObjectSpec, SceneConfig
from .stats import StatModel

FORMAT_HEADER = "# gridmotion-format v1"
MATCH_FIELDS = ("id", "u_re", "v_re", "u_ma", "v_ma",
                "xre_x", "xre_y", "xre_z", "xma_x", "xma_y", "xma_z")
LABEL_FIELDS = ("id", "label", "cluster_id", "bin_z", "bin_x")


class ParseError(ValueError):
    def __init__(self, path, line: int, reason: str):
        super().__init__(f"{path}:{line}: {reason}")
        self.path = str(path)
        self.line = line
        self.reason = reason


def atomic_write(path, text: str):
    """Write via a temp file in the target directory, then rename."""
    path = os.fspath(path)
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="\n") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _f(x) -> str:
    return repr(float(x))


def _lines(path):
    with open(path, "r", newline="") as f:
        for n, raw in enumerate(f, start=1):
            yield n, raw.rstrip("\r\n")


# -- matches ---------------------------------------------------------------

def format_matches(matches: Matches) -> str:
    out = [FORMAT_HEADER, ",".join(MATCH_FIELDS)]
    for i in range(len(matches)):
        vals = [str(int(matches.ids[i]))]
        vals += [_f(v) for v in matches.px_re[i]] + [_f(v) for v in matches.px_ma[i]]
        vals += [_f(v) for v in matches.x_re[i]] + [_f(v) for v in matches.x_ma[i]]
        out.append(",".join(vals))
    return "\n".join(out) + "\n"


def write_matches(path, matches: Matches):
    atomic_write(path, format_matches(matches))


def read_matches(path) -> Matches:
    """Read a matches file. A file with only the header yields an empty set."""
    rows, ids = [], []
    header_seen = False
    for n, line in _lines(path):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split(",")
        if not header_seen:
            if tuple(p.strip() for p in parts) != MATCH_FIELDS:
                raise ParseError(path, n, "expected header " + ",".join(MATCH_FIELDS))
            header_seen = True
            continue
        if len(parts) != len(MATCH_FIELDS):
            raise ParseError(path, n, f"expected {len(MATCH_FIELDS)} fields, got {len(parts)}")
        try:
            ids.append(int(parts[0]))
            vals = [float(p) for p in parts[1:]]
        except ValueError as e:
            raise ParseError(path, n, f"bad number: {e}") from None
        if not all(np.isfinite(vals)):
            raise ParseError(path, n, "non-finite value")
        if vals[6] <= 0 or vals[9] <= 0:
            raise ParseError(path, n, "3D point behind the camera (z <= 0)")
        rows.append(vals)
    if not header_seen:
        raise ParseError(path, 1, "missing header")
    if not rows:
        return Matches.empty()
    a = np.array(rows)
    if len(set(ids)) != len(ids):
        raise ParseError(path, 0, "duplicate correspondence ids")
    return Matches(ids, a[:, 0:2], a[:, 2:4], a[:, 4:7], a[:, 7:10])


# -- labels ----------------------------------------------------------------

def format_labels(labels) -> str:
    out = [FORMAT_HEADER, ",".join(LABEL_FIELDS)]
    for i in sorted(labels):
        lab = labels[i]
        if lab.verdict is Verdict.DYNAMIC:
            out.append(f"{int(i)},D,{lab.cluster_id},{lab.bin.iz},{lab.bin.ix}")
        else:
            out.append(f"{int(i)},{lab.verdict.value},,,")
    return "\n".join(out) + "\n"


def write_labels(path, labels):
    atomic_write(path, format_labels(labels))


def read_labels(path) -> LabelMap:
    labels = LabelMap()
    header_seen = False
    for n, line in _lines(path):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split(",")
        if not header_seen:
            if tuple(parts) != LABEL_FIELDS:
                raise ParseError(path, n, "expected header " + ",".join(LABEL_FIELDS))
            header_seen = True
            continue
        if len(parts) != len(LABEL_FIELDS):
            raise ParseError(path, n, f"expected {len(LABEL_FIELDS)} fields, got {len(parts)}")
        try:
            i = int(parts[0])
            verdict = Verdict(parts[1])
        except ValueError as e:
            raise ParseError(path, n, str(e)) from None
        if i in labels:
            raise ParseError(path, n, f"duplicate id {i}")
        if verdict is Verdict.DYNAMIC:
            try:
                labels[i] = Label(verdict, int(parts[2]), MotionBin(int(parts[3]), int(parts[4])))
            except ValueError:
                raise ParseError(path, n, "dynamic label needs cluster_id, bin_z, bin_x") from None
        else:
            if any(parts[2:]):
                raise ParseError(path, n, "cluster fields must be empty for S/U labels")
            labels[i] = Label(verdict)
    if not header_seen:
        raise ParseError(path, 1, "missing header")
    return labels


# -- trajectories (TUM: timestamp tx ty tz qx qy qz qw) ----------------------

def pose_to_tum(pose: SE3):
    if pose.source and pose.source[0] == "quat":
        q = list(pose.source[1])
    else:
        q = Rotation.from_matrix(pose.rotation).as_quat()
        if q[3] < 0:
            q = -q
    return list(pose.translation) + list(q)


def pose_from_tum(vals) -> SE3:
    return SE3.from_quat(vals[3:7], vals[:3])


def _rotvec_deg(pose: SE3):
    if pose.source and pose.source[0] == "rotvec_deg":
        return list(pose.source[1])
    return list(Rotation.from_matrix(pose.rotation).as_rotvec(degrees=True))


def format_trajectory(traj: Trajectory) -> str:
    out = [FORMAT_HEADER, "# timestamp tx ty tz qx qy qz qw"]
    for ts, pose in zip(traj.timestamps, traj.poses):
        out.append(" ".join(_f(v) for v in [ts] + pose_to_tum(pose)))
    return "\n".join(out) + "\n"


def write_trajectory(path, traj: Trajectory):
    atomic_write(path, format_trajectory(traj))


def read_trajectory(path) -> Trajectory:
    ts, poses = [], []
    for n, line in _lines(path):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 8:
            raise ParseError(path, n, f"expected 8 fields, got {len(parts)}")
        try:
            vals = [float(p) for p in parts]
        except ValueError as e:
            raise ParseError(path, n, f"bad number: {e}") from None
        q = np.asarray(vals[4:8])
        if not np.isclose(np.linalg.norm(q), 1.0, atol=1e-6):
            raise ParseError(path, n, "quaternion is not unit length")
        ts.append(vals[0])
        poses.append(pose_from_tum(vals[1:]))
    try:
        return Trajectory(ts, poses)
    except ValueError as e:
        raise ParseError(path, 0, str(e)) from None


# -- key = value configs ---------------------------------------------------

def parse_kv(path) -> dict:
    """Returns key -> (value string, line number)."""
    out = {}
    for n, line in _lines(path):
        s = line.split("#", 1)[0].strip()
        if not s:
            continue
        if "=" not in s:
            raise ParseError(path, n, "expected 'key = value'")
        key, value = (p.strip() for p in s.split("=", 1))
        if not key:
            raise ParseError(path, n, "empty key")
        if key in out:
            raise ParseError(path, n, f"duplicate key {key!r}")
        out[key] = (value, n)
    return out


def _vec(s, k=3):
    vals = [float(v) for v in s.replace(",", " ").split()]
    if len(vals) != k:
        raise ValueError(f"expected {k} numbers")
    return vals


def _bool(s):
    low = s.lower()
    if low in ("true", "yes", "1"):
        return True
    if low in ("false", "no", "0"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _typed(cls, name, value):
    typ = {f.name: f.type for f in fields(cls)}[name]
    if typ in ("int", int):
        return int(value)
    return float(value)


def _fmt_value(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, (list, tuple, np.ndarray)):
        return ", ".join(_f(x) for x in v)
    return _f(v)


def _format_kv(items) -> str:
    return "\n".join([FORMAT_HEADER] + [f"{k} = {_fmt_value(v)}" for k, v in items]) + "\n"


def config_items(cfg: PipelineConfig):
    items = [(f"grid.{k}", v) for k, v in asdict(cfg.grid).items()]
    if cfg.model is not None:
        items += [(f"model.{k}", v) for k, v in asdict(cfg.model).items()]
    items += [(f"ransac.{k}", v) for k, v in asdict(cfg.ransac).items()]
    items.append(("min_cluster_features", cfg.min_cluster_features))
    return items


def write_config(path, cfg: PipelineConfig):
    atomic_write(path, _format_kv(config_items(cfg)))


def read_config(path) -> PipelineConfig:
    """Pipeline config; unknown keys are rejected. Without model.* keys the
    statistics model defaults to a uniform prior over grid cells."""
    kv = parse_kv(path)
    groups = {"grid": (GridConfig, {}), "model": (StatModel, {}), "ransac": (RansacParams, {})}
    top = {}
    for key, (value, n) in kv.items():
        try:
            if key == "min_cluster_features":
                top[key] = int(value)
                continue
            prefix, _, name = key.partition(".")
            if prefix not in groups or name not in {f.name for f in fields(groups[prefix][0])}:
                raise ParseError(path, n, f"unknown key {key!r}")
            cls, dest = groups[prefix]
            dest[name] = _typed(cls, name, value)
        except ValueError as e:
            if isinstance(e, ParseError):
                raise
            raise ParseError(path, n, f"bad value for {key!r}: {e}") from None
    try:
        grid = GridConfig(**groups["grid"][1])
        model = StatModel(**groups["model"][1]) if groups["model"][1] else None
        ransac = RansacParams(**groups["ransac"][1])
        return PipelineConfig(grid, model, ransac, **top)
    except (ValueError, TypeError) as e:
        raise ParseError(path, 0, f"invalid configuration: {e}") from None


# -- scene configs ---------------------------------------------------------

def scene_items(cfg: SceneConfig):
    items = [(f"intrinsics.{k}", v) for k, v in asdict(cfg.intrinsics).items()]
    items += [("n_static", cfg.n_static), ("z_min", cfg.z_min), ("z_max", cfg.z_max),
              ("camera.translation", list(cfg.camera_motion.translation)),
              ("camera.rotvec_deg", _rotvec_deg(cfg.camera_motion)),
              ("pixel_noise_sigma", cfg.pixel_noise_sigma), ("depth_noise_sigma", cfg.depth_noise_sigma),
              ("false_match_rate", cfg.false_match_rate), ("seed", cfg.seed), ("occlusion", cfg.occlusion)]
    for k, o in enumerate(cfg.objects):
        items += [(f"object.{k}.n_points", o.n_points), (f"object.{k}.center", list(o.center)),
                  (f"object.{k}.extent", o.extent),
                  (f"object.{k}.translation", list(o.motion.translation)),
                  (f"object.{k}.rotvec_deg", _rotvec_deg(o.motion))]
    return items


def write_scene_config(path, cfg: SceneConfig):
    atomic_write(path, _format_kv(scene_items(cfg)))


_SCENE_SCALARS = {"n_static": int, "z_min": float, "z_max": float, "pixel_noise_sigma": float,
                  "depth_noise_sigma": float, "false_match_rate": float, "seed": int, "occlusion": _bool}
_OBJECT_KEYS = {"n_points", "center", "extent", "translation", "rotvec_deg"}


def read_scene_config(path) -> SceneConfig:
    """Scene file; keys omitted fall back to SceneConfig defaults. Declaring any
    ``object.K.*`` key replaces the default object list."""
    kv = parse_kv(path)
    base = SceneConfig()
    intr = {}
    top = {}
    cam_t = list(base.camera_motion.translation)
    cam_r = _rotvec_deg(base.camera_motion)
    objs = {}
    for key, (value, n) in kv.items():
        try:
            parts = key.split(".")
            if key in _SCENE_SCALARS:
                top[key] = _SCENE_SCALARS[key](value)
            elif parts[0] == "intrinsics" and len(parts) == 2 and parts[1] in asdict(base.intrinsics):
                intr[parts[1]] = _typed(Intrinsics, parts[1], value)
            elif key == "camera.translation":
                cam_t = _vec(value)
            elif key == "camera.rotvec_deg":
                cam_r = _vec(value)
            elif parts[0] == "object" and len(parts) == 3 and parts[2] in _OBJECT_KEYS:
                idx = int(parts[1])
                if idx < 0:
                    raise ValueError("object index must be >= 0")
                objs.setdefault(idx, {})[parts[2]] = (value, n)
            else:
                raise ParseError(path, n, f"unknown key {key!r}")
        except ParseError:
            raise
        except ValueError as e:
            raise ParseError(path, n, f"bad value for {key!r}: {e}") from None

    objects = base.objects
    if objs:
        if sorted(objs) != list(range(len(objs))):
            raise ParseError(path, 0, "object indices must be contiguous from 0")
        objects = []
        for idx in sorted(objs):
            d = objs[idx]
            dflt = ObjectSpec()
            try:
                t = _vec(d["translation"][0]) if "translation" in d else list(dflt.motion.translation)
                r = _vec(d["rotvec_deg"][0]) if "rotvec_deg" in d else [0.0, 0.0, 0.0]
                objects.append(ObjectSpec(
                    n_points=int(d["n_points"][0]) if "n_points" in d else dflt.n_points,
                    center=tuple(_vec(d["center"][0])) if "center" in d else dflt.center,
                    extent=float(d["extent"][0]) if "extent" in d else dflt.extent,
                    motion=SE3.from_rotvec(r, t, degrees=True)))
            except ValueError as e:
                line = min(v[1] for v in d.values())
                raise ParseError(path, line, f"object {idx}: {e}") from None
    try:
        return SceneConfig(intrinsics=Intrinsics(**intr), camera_motion=SE3.from_rotvec(cam_r, cam_t, degrees=True),
                           objects=tuple(objects), **top)
    except ValueError as e:
        raise ParseError(path, 0, f"invalid scene: {e}") from None


# -- ground truth ----------------------------------------------------------

def format_ground_truth(gt: GroundTruth) -> str:
    lines = [FORMAT_HEADER,
             "pose = " + " ".join(_f(v) for v in pose_to_tum(gt.pose)),
             "dynamic_ids = " + " ".join(str(i) for i in sorted(gt.dynamic_ids)),
             "false_match_ids = " + " ".join(str(i) for i in sorted(gt.false_match_ids))]
    for k, mem in enumerate(gt.object_members):
        lines.append(f"object.{k}.ids = " + " ".join(str(i) for i in sorted(mem)))
    return "\n".join(lines) + "\n"


def write_ground_truth(path, gt: GroundTruth):
    atomic_write(path, format_ground_truth(gt))


def read_ground_truth(path) -> GroundTruth:
    kv = parse_kv(path)
    try:
        pose = pose_from_tum([float(v) for v in kv["pose"][0].split()])
        dyn = frozenset(int(v) for v in kv["dynamic_ids"][0].split())
        false = frozenset(int(v) for v in kv.get("false_match_ids", ("", 0))[0].split())
    except KeyError as e:
        raise ParseError(path, 0, f"missing key {e}") from None
    except ValueError as e:
        raise ParseError(path, 0, str(e)) from None
    members = []
    k = 0
    while f"object.{k}.ids" in kv:
        members.append(frozenset(int(v) for v in kv[f"object.{k}.ids"][0].split()))
        k += 1
    return GroundTruth(pose, dyn, tuple(members), false)
