"""Rigid pose estimation from 3D-3D correspondences and trajectory/label metrics."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import SE3, as_matches
from .grid import Verdict


class DegenerateConfiguration(ValueError):
    pass


class PoseEstimationError(RuntimeError):
    pass


def rigid_align(src, dst) -> SE3:
    """Least-squares rigid transform with ``dst ~ R @ src + t`` (Kabsch, reflection guarded)."""
    src = np.asarray(src, dtype=float).reshape(-1, 3)
    dst = np.asarray(dst, dtype=float).reshape(-1, 3)
    if src.shape != dst.shape:
        raise ValueError("src and dst must have the same shape")
    R, t = _kabsch(src, dst)
    return SE3(R, t)


def _kabsch(src, dst):
    if len(src) < 3:
        raise DegenerateConfiguration(f"need at least 3 points, got {len(src)}")
    mu_s = src.mean(axis=0)
    mu_d = dst.mean(axis=0)
    A = src - mu_s
    B = dst - mu_d
    sv = np.linalg.svd(A, compute_uv=False)
    if sv[0] == 0 or sv[1] <= 1e-9 * sv[0]:
        raise DegenerateConfiguration("points are collinear or coincident")
    U, _, Vt = np.linalg.svd(A.T @ B)
    d = np.sign(np.linalg.det(Vt.T @ U.T))
    R = Vt.T @ np.diag([1.0, 1.0, d]) @ U.T
    return R, mu_d - R @ mu_s


@dataclass(frozen=True)
class RansacParams:
    iterations: int = 200
    inlier_threshold: float = 0.05
    seed: int = 0


def estimate_pose(matches, ransac: RansacParams = RansacParams()):
    """Consensus pose mapping matched-frame points onto reference-frame points.

    Returns (pose, inlier mask). Hypotheses come from random 3-point samples;
    the largest consensus (earliest on ties) is refit on its inliers.
    """
    m = as_matches(matches)
    n = len(m)
    if n < 3:
        raise PoseEstimationError(f"need at least 3 matches, got {n}")
    rng = np.random.default_rng(ransac.seed)
    best_count, best_mask = -1, None
    for _ in range(ransac.iterations):
        sample = rng.choice(n, size=3, replace=False)
        try:
            R, t = _kabsch(m.x_ma[sample], m.x_re[sample])
        except DegenerateConfiguration:
            continue
        d = m.x_re - (m.x_ma @ R.T + t)
        mask = np.einsum("ij,ij->i", d, d) < ransac.inlier_threshold ** 2
        count = int(mask.sum())
        if count > best_count:
            best_count, best_mask = count, mask
    if best_mask is None or best_count < 3:
        raise PoseEstimationError("consensus below 3 inliers")
    try:
        pose = rigid_align(m.x_ma[best_mask], m.x_re[best_mask])
    except DegenerateConfiguration as e:
        raise PoseEstimationError(f"degenerate consensus set: {e}") from e
    return pose, best_mask


def refine_pose(matches, labels) -> SE3:
    """Rigid alignment restricted to Static-labeled correspondences."""
    m = as_matches(matches)
    keep = np.array([labels[int(i)].verdict is Verdict.STATIC for i in m.ids], dtype=bool)
    if keep.sum() < 3:
        raise PoseEstimationError(f"need at least 3 static matches, got {int(keep.sum())}")
    try:
        return rigid_align(m.x_ma[keep], m.x_re[keep])
    except DegenerateConfiguration as e:
        raise PoseEstimationError(f"degenerate static set: {e}") from e


@dataclass(frozen=True)
class Trajectory:
    timestamps: np.ndarray
    poses: tuple

    def __post_init__(self):
        ts = np.asarray(self.timestamps, dtype=float).reshape(-1)
        if len(ts) != len(self.poses):
            raise ValueError("timestamps and poses differ in length")
        if np.any(np.diff(ts) <= 0):
            raise ValueError("timestamps must be strictly increasing")
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "poses", tuple(self.poses))

    def __len__(self):
        return len(self.poses)

    def positions(self) -> np.ndarray:
        return np.array([p.translation for p in self.poses]).reshape(-1, 3)

    @classmethod
    def from_relative(cls, timestamps, steps, start: SE3 | None = None) -> "Trajectory":
        """Chain relative motions: pose[k+1] = pose[k] * steps[k]."""
        pose = start or SE3.identity()
        poses = [pose]
        for s in steps:
            pose = pose @ s
            poses.append(pose)
        return cls(timestamps, poses)


@dataclass(frozen=True)
class TrajectoryMetrics:
    rmse: float
    mae: float  # median absolute error
    count: int = 0


def error_stats(errors) -> TrajectoryMetrics:
    e = np.abs(np.asarray(errors, dtype=float))
    if len(e) == 0:
        raise ValueError("no errors to summarize")
    return TrajectoryMetrics(float(np.sqrt(np.mean(e ** 2))), float(np.median(e)), len(e))


def associate(est: Trajectory, gt: Trajectory, max_dt: float = 0.02):
    """Greedy nearest-timestamp association; returns index pairs (i_est, i_gt)."""
    pairs = []
    used = set()
    for i, t in enumerate(est.timestamps):
        j = int(np.argmin(np.abs(gt.timestamps - t)))
        if abs(gt.timestamps[j] - t) <= max_dt and j not in used:
            used.add(j)
            pairs.append((i, j))
    return pairs


def ate(est: Trajectory, gt: Trajectory, max_dt: float = 0.02) -> TrajectoryMetrics:
    """Translational error after rigidly aligning estimated positions to ground truth."""
    pairs = associate(est, gt, max_dt)
    if len(pairs) < 2:
        raise ValueError(f"need at least 2 associated poses, got {len(pairs)}")
    P = est.positions()[[i for i, _ in pairs]]
    Q = gt.positions()[[j for _, j in pairs]]
    if len(pairs) >= 3:
        try:
            align = rigid_align(P, Q)
        except DegenerateConfiguration:
            align = _align_translation(P, Q)
    else:
        align = _align_translation(P, Q)
    return error_stats(np.linalg.norm(Q - align.apply(P), axis=1))


def _align_translation(P, Q):
    # collinear positions leave rotation about the line free; centroids still match
    return SE3(np.eye(3), Q.mean(axis=0) - P.mean(axis=0))


def rpe(est: Trajectory, gt: Trajectory, delta: int = 1, max_dt: float = 0.02):
    """Relative pose error over stride ``delta``; returns (translational m, rotational deg)."""
    if delta < 1:
        raise ValueError("delta must be >= 1")
    pairs = associate(est, gt, max_dt)
    if len(pairs) < delta + 1:
        raise ValueError(f"need at least {delta + 1} associated poses, got {len(pairs)}")
    trans, rot = [], []
    for k in range(len(pairs) - delta):
        (i0, j0), (i1, j1) = pairs[k], pairs[k + delta]
        d_est = est.poses[i0].inverse() @ est.poses[i1]
        d_gt = gt.poses[j0].inverse() @ gt.poses[j1]
        err = d_gt.inverse() @ d_est
        trans.append(np.linalg.norm(err.translation))
        rot.append(np.degrees(err.rotation_angle()))
    return error_stats(trans), error_stats(rot)


def pose_error(est: SE3, gt: SE3):
    """(translation error in m, rotation error in degrees) between two poses."""
    err = gt.inverse() @ est
    return float(np.linalg.norm(err.translation)), float(np.degrees(err.rotation_angle()))


@dataclass(frozen=True)
class ClassificationMetrics:
    precision: float
    recall: float
    f1: float
    tp: int
    fp: int
    fn: int
    tn: int


def classification_metrics(labels, gt_dynamic) -> ClassificationMetrics:
    """Dynamic is the positive class; Unknown counts as negative. Empty predictions give precision 0."""
    gt = {int(i) for i in gt_dynamic}
    universe = set(labels)
    missing = gt - universe
    if missing:
        raise ValueError(f"ground-truth ids without labels: {sorted(missing)[:5]}")
    pred = {i for i, lab in labels.items() if lab.verdict is Verdict.DYNAMIC}
    tp = len(pred & gt)
    fp = len(pred - gt)
    fn = len(gt - pred)
    tn = len(universe) - tp - fp - fn
    precision = tp / (tp + fp) if pred else 0.0
    recall = tp / (tp + fn) if gt else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision > 0 and recall > 0 else 0.0
    return ClassificationMetrics(precision, recall, f1, tp, fp, fn, tn)
