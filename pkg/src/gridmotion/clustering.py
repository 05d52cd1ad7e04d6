"""Merging of dynamic cells into motion clusters, small-cluster removal,
duplicate suppression and per-correspondence labels."""
from __future__ import annotations

from collections import defaultdict, deque
from dataclasses import dataclass, field
from types import MappingProxyType

import numpy as np

from .geometry import MotionBin
from .grid import CellDecision, GridGeometry, Verdict


@dataclass(frozen=True)
class ClusterInfo:
    """A set of cells sharing one motion bin.

    ``cell_support`` / ``cell_members`` map a cell key to the supporting count
    and correspondence ids that cell contributes.
    """

    id: int
    motion_bin: MotionBin
    cell_support: MappingProxyType
    cell_members: MappingProxyType

    @classmethod
    def build(cls, id, motion_bin, cell_support, cell_members):
        return cls(id, motion_bin,
                   MappingProxyType(dict(sorted(cell_support.items()))),
                   MappingProxyType({k: frozenset(v) for k, v in sorted(cell_members.items())}))

    @property
    def cells(self) -> frozenset:
        return frozenset(self.cell_support)

    @property
    def members(self) -> frozenset:
        out = set()
        for v in self.cell_members.values():
            out |= v
        return frozenset(out)

    @property
    def support(self) -> int:
        return int(sum(self.cell_support.values()))

    def key(self):
        return (self.id, self.motion_bin, dict(self.cell_support), dict(self.cell_members))

    def __eq__(self, other):
        if not isinstance(other, ClusterInfo):
            return NotImplemented
        return self.key() == other.key()

    def __hash__(self):
        return hash((self.id, self.motion_bin, self.cells))


@dataclass(frozen=True)
class ClusterMap:
    clusters: tuple = ()
    geometry: GridGeometry | None = None

    def cell_to_clusters(self) -> dict:
        out = defaultdict(list)
        for c in self.clusters:
            for cell in c.cells:
                out[cell].append(c.id)
        return dict(out)

    def by_id(self) -> dict:
        return {c.id: c for c in self.clusters}

    def partition(self) -> set:
        """Cluster cell sets, ignoring ids; handy for comparisons."""
        return {(c.motion_bin, c.cells) for c in self.clusters}

    def __len__(self):
        return len(self.clusters)


def _dynamic_entries(decisions, ids):
    """(cell, bin) -> [support, member ids] over dynamic leaf decisions."""
    entries = {}
    for d in decisions:
        if d.verdict is not Verdict.DYNAMIC:
            continue
        key = (d.cell_id, d.bin)
        sup, mem = entries.setdefault(key, [0, set()])
        entries[key][0] = sup + d.support
        mem.update(int(i) for i in (ids[d.support_members] if ids is not None else d.support_members))
    return entries


def merge_clusters(decisions, geometry: GridGeometry, ids=None) -> ClusterMap:
    """Connected components of same-bin dynamic cells under 8-adjacency.

    Per bin, cells are visited in decreasing support and each unvisited one
    seeds a breadth-first merge of its same-bin neighbours. ``ids`` maps the
    match positions stored in decisions to correspondence ids.
    """
    if ids is not None:
        ids = np.asarray(ids)
    entries = _dynamic_entries(decisions, ids)
    by_bin = defaultdict(dict)
    for (cell, b), (sup, mem) in entries.items():
        by_bin[b][cell] = (sup, mem)

    clusters = []
    for b in sorted(by_bin):
        cells = by_bin[b]
        seeds = sorted(cells, key=lambda c: (-cells[c][0], c))
        seen = set()
        for seed in seeds:
            if seed in seen:
                continue
            comp = []
            queue = deque([seed])
            seen.add(seed)
            while queue:
                c = queue.popleft()
                comp.append(c)
                for nb in geometry.neighbors(c):
                    if nb in cells and nb not in seen:
                        seen.add(nb)
                        queue.append(nb)
            clusters.append(ClusterInfo.build(len(clusters), b,
                                              {c: cells[c][0] for c in comp},
                                              {c: cells[c][1] for c in comp}))
    return ClusterMap(tuple(clusters), geometry)


def eliminate_small(cm: ClusterMap, min_cluster_features: int = 10) -> ClusterMap:
    """Drop clusters with fewer than ``min_cluster_features`` members."""
    kept = tuple(c for c in cm.clusters if len(c.members) >= min_cluster_features)
    return ClusterMap(kept, cm.geometry)


def _components(cells, neighbors):
    remaining = set(cells)
    comps = []
    for start in sorted(cells):
        if start not in remaining:
            continue
        comp, queue = [], deque([start])
        remaining.discard(start)
        while queue:
            c = queue.popleft()
            comp.append(c)
            for nb in neighbors(c):
                if nb in remaining:
                    remaining.discard(nb)
                    queue.append(nb)
        comps.append(sorted(comp))
    return comps


def suppress_duplicates(cm: ClusterMap) -> ClusterMap:
    """Non-maximum suppression over contested cells.

    Clusters claim cells in order of decreasing support (lower id first on
    ties); a cell already claimed is lost by every later cluster. A cluster
    fragmented by its losses is split into connected pieces, the piece holding
    its lowest cell keeping the original id.
    """
    if not cm.clusters:
        return cm
    claimed = set()
    survivors = []
    next_id = max(c.id for c in cm.clusters) + 1
    for c in sorted(cm.clusters, key=lambda c: (-c.support, c.id)):
        keep = [cell for cell in c.cells if cell not in claimed]
        claimed.update(keep)
        if not keep:
            continue
        if len(keep) == len(c.cell_support):
            survivors.append(c)
            continue
        if cm.geometry is not None:
            pieces = _components(keep, cm.geometry.neighbors)
        else:
            pieces = [sorted(keep)]
        for i, piece in enumerate(pieces):
            cid = c.id if i == 0 else next_id
            if i:
                next_id += 1
            survivors.append(ClusterInfo.build(cid, c.motion_bin,
                                               {k: c.cell_support[k] for k in piece},
                                               {k: c.cell_members[k] for k in piece}))
    survivors.sort(key=lambda c: c.id)
    return ClusterMap(tuple(survivors), cm.geometry)


@dataclass(frozen=True)
class Label:
    verdict: Verdict
    cluster_id: int | None = None
    bin: MotionBin | None = None
    pass_id: int | None = None
    cell_id: int | None = None
    quad_path: str = ""
    ratio: float = field(default=0.0, compare=False)

    @property
    def code(self) -> str:
        return self.verdict.value


class LabelMap(dict):
    """Correspondence id -> Label."""

    def ids_with(self, verdict: Verdict) -> set:
        return {i for i, lab in self.items() if lab.verdict is verdict}

    @property
    def dynamic_ids(self) -> set:
        return self.ids_with(Verdict.DYNAMIC)

    def counts(self) -> dict:
        out = {v.value: 0 for v in Verdict}
        for lab in self.values():
            out[lab.verdict.value] += 1
        return out


def label_matches(cm: ClusterMap, decisions, matches) -> LabelMap:
    """One label per correspondence.

    Members of surviving clusters are Dynamic, members of Unknown leaves (and
    matches no decision covers, e.g. out-of-image) are Unknown, the rest Static.
    """
    ids = np.asarray(matches.ids if hasattr(matches, "ids") else [m.id for m in matches], dtype=np.int64)
    cluster_of = np.full(len(ids), -1, dtype=np.int64)
    if cm.clusters and len(ids):
        sorter = np.argsort(ids)
        for c in cm.clusters:
            mem = np.fromiter(c.members, dtype=np.int64, count=len(c.members))
            cluster_of[sorter[np.searchsorted(ids, mem, sorter=sorter)]] = c.id
    clusters = cm.by_id()
    labels = LabelMap()
    for d in decisions:
        if len(d.members) == 0:
            continue
        if d.verdict is Verdict.UNKNOWN:
            base = Label(Verdict.UNKNOWN, None, None, d.pass_id, d.cell_id, d.quad_path)
        else:
            base = Label(Verdict.STATIC, None, None, d.pass_id, d.cell_id, d.quad_path, d.ratio)
        owners = cluster_of[d.members]
        member_ids = ids[d.members].tolist()
        labels.update(zip(member_ids, [base] * len(member_ids)))
        for cid in np.unique(owners[owners >= 0]).tolist():
            c = clusters[cid]
            lab = Label(Verdict.DYNAMIC, cid, c.motion_bin, d.pass_id, d.cell_id, d.quad_path, d.ratio)
            hit = ids[d.members[owners == cid]].tolist()
            labels.update(zip(hit, [lab] * len(hit)))
    for i in ids.tolist():
        if i not in labels:
            labels[i] = Label(Verdict.UNKNOWN)
    return labels


def cluster_pass(decisions, geometry: GridGeometry, matches, min_cluster_features: int = 10):
    """Merge, eliminate and suppress for one pass; returns (ClusterMap, LabelMap)."""
    cm = merge_clusters(decisions, geometry, matches.ids)
    cm = eliminate_small(cm, min_cluster_features)
    cm = suppress_duplicates(cm)
    cm = eliminate_small(cm, min_cluster_features)
    return cm, label_matches(cm, decisions, matches)


def _fusion_key(lab: Label):
    # best support ratio first; Static wins ties; lower pass id last resort
    return (-lab.ratio, 0 if lab.verdict is Verdict.STATIC else 1, lab.pass_id)


def fuse_passes(per_pass, min_cluster_features: int = 10):
    """Combine per-pass results into one ClusterMap and LabelMap.

    ``per_pass`` is a sequence of (pass_id, ClusterMap, LabelMap). Each match
    takes its label from the non-Unknown pass whose containing leaf has the
    highest winning-support ratio. Pass clusters of one bin that share members
    are joined, and the joined clusters are filtered by size again.
    """
    per_pass = list(per_pass)
    if not per_pass:
        return ClusterMap(), LabelMap()
    all_ids = sorted(per_pass[0][2])

    fused = LabelMap()
    for i in all_ids:
        cands = [lm[i] for _, _, lm in per_pass if lm[i].verdict is not Verdict.UNKNOWN]
        fused[i] = min(cands, key=_fusion_key) if cands else per_pass[0][2][i]

    # union-find over (pass, cluster id)
    parent = {}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    owner = {}
    bins = {}
    for p, cm, _ in per_pass:
        for c in cm.clusters:
            key = (p, c.id)
            parent[key] = key
            bins[key] = c.motion_bin
            for i in c.members:
                prev = owner.get((i, c.motion_bin))
                if prev is None:
                    owner[(i, c.motion_bin)] = key
                else:
                    a, b = find(prev), find(key)
                    if a != b:
                        parent[max(a, b)] = min(a, b)

    groups = defaultdict(lambda: (defaultdict(int), defaultdict(set)))
    for i in all_ids:
        lab = fused[i]
        if lab.verdict is not Verdict.DYNAMIC:
            continue
        root = find((lab.pass_id, lab.cluster_id))
        sup, mem = groups[root]
        cell = (lab.pass_id, lab.cell_id)
        sup[cell] += 1
        mem[cell].add(i)

    clusters = []
    new_id = {}
    for root in sorted(groups):
        sup, mem = groups[root]
        new_id[root] = len(clusters)
        clusters.append(ClusterInfo.build(len(clusters), bins[root], sup, mem))
    cm = eliminate_small(ClusterMap(tuple(clusters)), min_cluster_features)
    alive = {c.id for c in cm.clusters}

    out = LabelMap()
    for i in all_ids:
        lab = fused[i]
        if lab.verdict is Verdict.DYNAMIC:
            cid = new_id[find((lab.pass_id, lab.cluster_id))]
            if cid in alive:
                lab = Label(Verdict.DYNAMIC, cid, lab.bin, lab.pass_id, lab.cell_id, lab.quad_path, lab.ratio)
            else:
                lab = Label(Verdict.STATIC, None, None, lab.pass_id, lab.cell_id, lab.quad_path, lab.ratio)
        out[i] = lab
    return cm, out
