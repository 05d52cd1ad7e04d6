"""Grid assignment of motion patterns with quadtree refinement and shifted passes."""
from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .geometry import (SE3, STATIC, MotionBin, as_matches, bin_from_index, bin_index,
                       quantize_array, residuals)
from .stats import StatModel, support_threshold

PASS_SHIFTS = ((0, 0), (1, 0), (0, 1), (1, 1))  # (x, vertical) half-cell shift flags


@dataclass(frozen=True)
class GridConfig:
    image_width: int = 640
    image_height: int = 480
    gx: int = 20
    gy: int = 15
    bins_per_axis: int = 5
    e_int_z: float = 0.05
    e_int_x: float = 0.05
    alpha: float = 1.0
    p_min: float = 0.7
    n_min: int = 8
    max_quad_depth: int = 2
    k_sigma: float = 3.0
    static_margin: float = 1.5

    def __post_init__(self):
        if self.image_width <= 0 or self.image_height <= 0:
            raise ValueError("image size must be positive")
        if self.gx < 1 or self.gy < 1:
            raise ValueError("grid needs at least one cell")
        if not 0.0 < self.p_min <= 1.0:
            raise ValueError("p_min must lie in (0, 1]")
        if self.n_min < 1:
            raise ValueError("n_min must be >= 1")
        if self.max_quad_depth < 0:
            raise ValueError("max_quad_depth must be >= 0")
        if self.bins_per_axis < 3 or self.bins_per_axis % 2 == 0:
            raise ValueError("bins_per_axis must be odd and >= 3")
        if self.e_int_z <= 0 or self.e_int_x <= 0 or self.alpha <= 0:
            raise ValueError("e_int_z, e_int_x and alpha must be positive")
        if self.k_sigma < 0 or self.static_margin < 0:
            raise ValueError("k_sigma and static_margin must be non-negative")


@dataclass(frozen=True)
class GridGeometry:
    """Cell layout of one pass. Shifted passes gain one truncated row/column."""

    width: float
    height: float
    cell_w: float
    cell_h: float
    shift_x: float = 0.0
    shift_y: float = 0.0

    @classmethod
    def for_pass(cls, cfg: GridConfig, pass_id: int = 0) -> "GridGeometry":
        fx, fy = PASS_SHIFTS[pass_id]
        cw = cfg.image_width / cfg.gx
        ch = cfg.image_height / cfg.gy
        return cls(cfg.image_width, cfg.image_height, cw, ch, fx * cw / 2, fy * ch / 2)

    @property
    def ncols(self) -> int:
        return int(math.ceil((self.width + self.shift_x) / self.cell_w - 1e-9))

    @property
    def nrows(self) -> int:
        return int(math.ceil((self.height + self.shift_y) / self.cell_h - 1e-9))

    @property
    def ncells(self) -> int:
        return self.ncols * self.nrows

    def cell_index(self, uv) -> np.ndarray:
        uv = np.asarray(uv, dtype=float).reshape(-1, 2)
        col = np.floor((uv[:, 0] + self.shift_x) / self.cell_w).astype(np.int64)
        row = np.floor((uv[:, 1] + self.shift_y) / self.cell_h).astype(np.int64)
        col = np.clip(col, 0, self.ncols - 1)
        row = np.clip(row, 0, self.nrows - 1)
        return row * self.ncols + col

    def row_col(self, cell_id: int):
        return divmod(int(cell_id), self.ncols)

    def cell_rect(self, cell_id: int):
        """Pixel bounds (x0, y0, x1, y1), truncated at the image border."""
        row, col = self.row_col(cell_id)
        x0 = max(0.0, col * self.cell_w - self.shift_x)
        x1 = min(self.width, (col + 1) * self.cell_w - self.shift_x)
        y0 = max(0.0, row * self.cell_h - self.shift_y)
        y1 = min(self.height, (row + 1) * self.cell_h - self.shift_y)
        return (x0, y0, x1, y1)

    def neighbors(self, cell_id: int):
        row, col = self.row_col(cell_id)
        out = []
        for dr in (-1, 0, 1):
            for dc in (-1, 0, 1):
                if dr == 0 and dc == 0:
                    continue
                r, c = row + dr, col + dc
                if 0 <= r < self.nrows and 0 <= c < self.ncols:
                    out.append(r * self.ncols + c)
        return out


def in_bounds(px, cfg: GridConfig) -> np.ndarray:
    px = np.asarray(px, dtype=float).reshape(-1, 2)
    return ((px[:, 0] >= 0) & (px[:, 0] < cfg.image_width)
            & (px[:, 1] >= 0) & (px[:, 1] < cfg.image_height))


def motion_bins(matches, pose0: SE3, cfg: GridConfig) -> np.ndarray:
    """Flat motion-bin index of every correspondence."""
    m = as_matches(matches)
    if len(m) == 0:
        return np.zeros(0, dtype=np.int64)
    _, normalized = residuals(m.x_re, m.x_ma, pose0, cfg.alpha)
    iz, ix = quantize_array(normalized, cfg.e_int_z, cfg.e_int_x, cfg.bins_per_axis)
    return bin_index(iz, ix, cfg.bins_per_axis)


class GridTensor:
    """Per-cell motion-bin histograms plus the member lists behind every count.

    ``cell_of`` and ``bin_of`` are indexed by position in the match set;
    rejected (out-of-image) matches carry cell -1.
    """

    def __init__(self, geometry: GridGeometry, bins_per_axis: int, ids, cell_of, bin_of):
        self.geometry = geometry
        self.bins_per_axis = bins_per_axis
        self.ids = np.asarray(ids, dtype=np.int64)
        self.cell_of = np.asarray(cell_of, dtype=np.int64)
        self.bin_of = np.asarray(bin_of, dtype=np.int64)
        nb2 = bins_per_axis * bins_per_axis
        ok = self.cell_of >= 0
        flat = self.cell_of[ok] * nb2 + self.bin_of[ok]
        self.counts = np.bincount(flat, minlength=geometry.ncells * nb2).reshape(geometry.ncells, nb2)
        positions = np.flatnonzero(ok)
        order = np.argsort(self.cell_of[ok], kind="stable")
        self._sorted = positions[order]
        self._starts = np.searchsorted(self.cell_of[ok][order], np.arange(geometry.ncells + 1))

    @property
    def rejected(self) -> np.ndarray:
        return self.ids[self.cell_of < 0]

    @property
    def ncells(self) -> int:
        return self.geometry.ncells

    def cell_members(self, cell_id: int) -> np.ndarray:
        """Match positions assigned to a cell, in input order."""
        return self._sorted[self._starts[cell_id]:self._starts[cell_id + 1]]

    def members(self, cell_id: int, b: MotionBin) -> np.ndarray:
        """Correspondence ids in one (cell, bin) entry."""
        pos = self.cell_members(cell_id)
        k = bin_index(b.iz, b.ix, self.bins_per_axis)
        return self.ids[pos[self.bin_of[pos] == k]]

    def histogram(self, cell_id: int) -> dict:
        row = self.counts[cell_id]
        return {bin_from_index(k, self.bins_per_axis): int(c) for k, c in enumerate(row) if c}


def assign(matches, pose0: SE3, cfg: GridConfig, geometry: GridGeometry | None = None,
           bins: np.ndarray | None = None) -> GridTensor:
    """Push every correspondence into the histogram of the cell holding its matched-frame pixel."""
    m = as_matches(matches)
    geometry = geometry or GridGeometry.for_pass(cfg, 0)
    if bins is None:
        bins = motion_bins(m, pose0, cfg)
    cell_of = np.full(len(m), -1, dtype=np.int64)
    ok = in_bounds(m.px_ma, cfg)
    if np.any(ok):
        cell_of[ok] = geometry.cell_index(m.px_ma[ok])
    return GridTensor(geometry, cfg.bins_per_axis, m.ids, cell_of, bins)


@dataclass(frozen=True)
class CellStats:
    cell_id: int
    n: int
    s_max1: tuple
    s_max2: tuple
    static_count: int = 0


@functools.lru_cache(maxsize=None)
def _tie_priority(bins_per_axis: int) -> np.ndarray:
    # static first, then lexicographically larger (iz, ix)
    nb2 = bins_per_axis * bins_per_axis
    static_k = int(bin_index(0, 0, bins_per_axis))
    rest = [k for k in range(nb2 - 1, -1, -1) if k != static_k]
    return np.array([static_k] + rest, dtype=np.int64)


def stats_from_counts(counts, bins_per_axis: int, cell_id: int = 0) -> CellStats:
    counts = np.asarray(counts)
    prio = _tie_priority(bins_per_axis)
    order = prio[np.argsort(-counts[prio], kind="stable")]
    k1, k2 = int(order[0]), int(order[1])
    return CellStats(
        cell_id=cell_id,
        n=int(counts.sum()),
        s_max1=(bin_from_index(k1, bins_per_axis), int(counts[k1])),
        s_max2=(bin_from_index(k2, bins_per_axis), int(counts[k2])),
        static_count=int(counts[bin_index(0, 0, bins_per_axis)]),
    )


def cell_stats(t: GridTensor, cell_id: int) -> CellStats:
    return stats_from_counts(t.counts[cell_id], t.bins_per_axis, cell_id)


class Verdict(enum.Enum):
    STATIC = "S"
    DYNAMIC = "D"
    UNKNOWN = "U"


@dataclass(frozen=True)
class CellDecision:
    cell_id: int
    verdict: Verdict
    bin: MotionBin | None
    support: int
    n: int
    static_count: int = 0
    pass_id: int = 0
    quad_path: str = ""
    rect: tuple | None = None
    members: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64),
                                compare=False, repr=False)
    support_members: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64),
                                        compare=False, repr=False)

    @property
    def ratio(self) -> float:
        return self.support / self.n if self.n else 0.0


def classify_cell(s: CellStats, model: StatModel, cfg: GridConfig) -> CellDecision:
    (b1, c1) = s.s_max1
    if s.n < cfg.n_min:
        return CellDecision(s.cell_id, Verdict.UNKNOWN, None, c1, s.n, s.static_count)
    if b1 == STATIC:
        return CellDecision(s.cell_id, Verdict.STATIC, STATIC, c1, s.n, s.static_count)
    tau = support_threshold(model, s.n, cfg.k_sigma)
    if c1 > tau and c1 >= cfg.static_margin * s.static_count:
        return CellDecision(s.cell_id, Verdict.DYNAMIC, b1, c1, s.n, s.static_count)
    # dynamic winner without significance: static wins, support is the static count
    return CellDecision(s.cell_id, Verdict.STATIC, STATIC, s.static_count, s.n, s.static_count)


@dataclass
class QuadNode:
    rect: tuple
    depth: int
    members: np.ndarray
    children: list = field(default_factory=list)
    path: str = ""

    def split(self, px) -> list:
        x0, y0, x1, y1 = self.rect
        mx, my = (x0 + x1) / 2.0, (y0 + y1) / 2.0
        uv = np.asarray(px)[self.members]
        right = uv[:, 0] >= mx
        lower = uv[:, 1] >= my
        quads = [((x0, y0, mx, my), ~right & ~lower), ((mx, y0, x1, my), right & ~lower),
                 ((x0, my, mx, y1), ~right & lower), ((mx, my, x1, y1), right & lower)]
        self.children = [QuadNode(r, self.depth + 1, self.members[sel], [], self.path + str(q))
                         for q, (r, sel) in enumerate(quads)]
        return self.children


def subdivide(node: QuadNode, matches, pose0: SE3, cfg: GridConfig, model: StatModel, *,
              bins: np.ndarray | None = None, cell_id: int = 0, pass_id: int = 0) -> list:
    """Classify a node, splitting it into quads while its winning pattern lacks consensus.

    ``node.members`` are positions into ``matches``; returned decisions carry
    those positions in ``members``.
    """
    if node.depth > cfg.max_quad_depth:
        raise ValueError("node deeper than max_quad_depth")
    m = as_matches(matches)
    if bins is None:
        bins = motion_bins(m, pose0, cfg)
    nb2 = cfg.bins_per_axis * cfg.bins_per_axis
    return _subdivide(node, m.px_ma, bins, nb2, cfg, model, cell_id, pass_id)


def _subdivide(node, px, bins, nb2, cfg, model, cell_id, pass_id):
    counts = np.bincount(bins[node.members], minlength=nb2)
    s = stats_from_counts(counts, cfg.bins_per_axis, cell_id)
    if (s.s_max1[1] < cfg.p_min * s.n and s.n > cfg.n_min and node.depth < cfg.max_quad_depth):
        out = []
        for child in node.split(px):
            out.extend(_subdivide(child, px, bins, nb2, cfg, model, cell_id, pass_id))
        return out
    d = classify_cell(s, model, cfg)
    winners = node.members
    if d.bin is not None:
        winners = node.members[_agrees(bins[node.members], d.bin, cfg.bins_per_axis)]
    return [replace(d, pass_id=pass_id, quad_path=node.path, rect=node.rect,
                    members=node.members, support_members=winners)]


def _agrees(flat_bins, b: MotionBin, bins_per_axis: int) -> np.ndarray:
    """Members backing a decision: the static bin itself, or any non-static
    bin within one step (Chebyshev) of a dynamic pattern."""
    B = (bins_per_axis - 1) // 2
    iz = flat_bins // bins_per_axis - B
    ix = flat_bins % bins_per_axis - B
    if b.is_static:
        return (iz == 0) & (ix == 0)
    near = (np.abs(iz - b.iz) <= 1) & (np.abs(ix - b.ix) <= 1)
    return near & ~((iz == 0) & (ix == 0))


def run_pass(matches, pose0: SE3, cfg: GridConfig, model: StatModel, pass_id: int = 0,
             bins: np.ndarray | None = None):
    """One grid pass; returns (tensor, decisions). Every cell yields at least one decision."""
    m = as_matches(matches)
    if bins is None:
        bins = motion_bins(m, pose0, cfg)
    geometry = GridGeometry.for_pass(cfg, pass_id)
    tensor = assign(m, pose0, cfg, geometry, bins)
    nb2 = cfg.bins_per_axis * cfg.bins_per_axis
    decisions = []
    for c in range(geometry.ncells):
        node = QuadNode(geometry.cell_rect(c), 0, tensor.cell_members(c))
        decisions.extend(_subdivide(node, m.px_ma, bins, nb2, cfg, model, c, pass_id))
    return tensor, decisions


def run_passes(matches, pose0: SE3, cfg: GridConfig, model: StatModel, bins: np.ndarray | None = None):
    """Unshifted, x-shifted, vertically shifted and doubly shifted passes."""
    m = as_matches(matches)
    if bins is None:
        bins = motion_bins(m, pose0, cfg)
    return [(p, run_pass(m, pose0, cfg, model, p, bins)[1]) for p in range(len(PASS_SHIFTS))]
