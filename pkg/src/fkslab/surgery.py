"""Lexicographically minimal paths, overlap points and the connecting surgery on slabs.

A gluing instance fixes base regions D within D' and sets A0 (in D'), A1, A2,
B1, B2 (in D).  The events are

* ``A``: a cluster of the fattened D' meets A0-bar and contains a path inside
  D-bar from A1-bar to A2-bar;
* ``B``: B1-bar is joined to B2-bar inside D-bar;
* ``X``: a path inside D-bar from B1-bar to B2-bar lies in a D'-bar cluster
  meeting A0-bar;
* ``Y = (A and B) minus X`` and its parts ``Y1``, ``Y2`` where the A-cluster
  misses B1-bar (resp. B2-bar).

The connecting surgery rewires the box of radius one around an overlap point
so that the minimal B1-B2 path gets attached to A0 while its minimality is
preserved outside the box.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from . import _kernels as K
from .geometry import RectRegion, SlabGraph, base_ball, build_slab, FiberGraph, BaseWindow
from .measure_oracle import Event, ExactOracle, ModelParams, oracle_for
from .stats import EstimateRecord, binomial_estimate, estimate, Z95

Point = tuple[int, int]


class SurgeryFailure(RuntimeError):
    """No admissible local rewiring exists; carries the local configuration."""

    def __init__(self, message: str, local: dict | None = None):
        super().__init__(message)
        self.local = local or {}


class InstanceError(ValueError):
    """A gluing instance is malformed or its topological condition cannot be certified."""


# --------------------------------------------------------------------------
# orderings


@dataclass(frozen=True)
class EdgeOrdering:
    """Total order of the oriented edges: ``rank_fwd[e]`` for eu->ev, ``rank_bwd[e]`` for ev->eu."""

    rank_fwd: np.ndarray
    rank_bwd: np.ndarray

    @classmethod
    def identity(cls, n_edges: int) -> EdgeOrdering:
        r = np.arange(n_edges, dtype=np.int64)
        return cls(2 * r, 2 * r + 1)

    @classmethod
    def random(cls, n_edges: int, rng: np.random.Generator) -> EdgeOrdering:
        perm = rng.permutation(2 * n_edges).astype(np.int64)
        return cls(perm[:n_edges].copy(), perm[n_edges:].copy())

    def rank(self, graph: SlabGraph, u: int, v: int) -> int:
        e = graph.edge_id(u, v)
        return int(self.rank_fwd[e] if graph.eu[e] == u else self.rank_bwd[e])

    def path_key(self, graph: SlabGraph, path) -> tuple[int, ...]:
        return tuple(self.rank(graph, path[k], path[k + 1]) for k in range(len(path) - 1))


def lex_less(a: tuple, b: tuple) -> bool:
    """Lexicographic comparison where a proper prefix is smaller (Python's tuple order)."""
    return a < b


# --------------------------------------------------------------------------
# instances


@dataclass
class GluingInstance:
    graph: SlabGraph
    D: frozenset
    Dp: frozenset
    A0: frozenset
    A1: frozenset
    A2: frozenset
    B1: frozenset
    B2: frozenset
    certificate: str = ""
    masks: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        win = set(self.graph.base.points())
        for name in ("D", "Dp", "A0", "A1", "A2", "B1", "B2"):
            pts = frozenset(tuple(p) for p in getattr(self, name))
            if not pts:
                raise InstanceError(f"{name} is empty")
            if not pts <= win:
                raise InstanceError(f"{name} leaves the window")
            setattr(self, name, pts)
        if not self.D <= self.Dp:
            raise InstanceError("D must be contained in D'")
        if not self.A0 <= self.Dp:
            raise InstanceError("A0 must lie in D'")
        for name in ("A1", "A2", "B1", "B2"):
            if not getattr(self, name) <= self.D:
                raise InstanceError(f"{name} must lie in D")
        g = self.graph
        for name in ("D", "Dp", "A0", "A1", "A2", "B1", "B2"):
            self.masks[name] = g.mask_of(getattr(self, name))
        if not self.certificate:
            self.certificate = certify_topological_condition(self)

    @classmethod
    def standard(cls, n: int, fiber: FiberGraph, margin: int = 2) -> GluingInstance:
        """D = [0,n]^2 inside D' = [0,2n]x[0,n]; A's are the left/right sides of D
        (A0 the right side of D'), B's the bottom/top of D."""
        if n < 1:
            raise InstanceError("n must be >= 1")
        base = BaseWindow(-margin, 2 * n + margin, -margin, n + margin)
        graph = build_slab(base, fiber)
        D = RectRegion(0, n, 0, n)
        Dp = RectRegion(0, 2 * n, 0, n)
        return cls(graph, D.points(), Dp.points(), Dp.side("right"), D.side("left"),
                   D.side("right"), D.side("bottom"), D.side("top"))

    def sides(self, which: int) -> tuple[np.ndarray, np.ndarray]:
        """(start, end) vertex masks of the minimal path for ``which`` in {1, 2}."""
        if which == 1:
            return self.masks["B1"], self.masks["B2"]
        if which == 2:
            return self.masks["B2"], self.masks["B1"]
        raise ValueError("which must be 1 or 2")


def _is_rectangle(pts: frozenset) -> RectRegion | None:
    xs = [p[0] for p in pts]
    ys = [p[1] for p in pts]
    a, b, c, d = min(xs), max(xs), min(ys), max(ys)
    if a == b or c == d:
        return None
    r = RectRegion(a, b, c, d)
    return r if set(r.points()) == set(pts) else None


def certify_topological_condition(inst: GluingInstance, path_cap: int = 200_000) -> str:
    """Every A1-A2 path in D meets every B1-B2 path in D.

    Rectangles with A's and B's on opposite pairs of sides are accepted by
    planarity; otherwise every minimal B1-B2 path is enumerated and checked to
    separate A1 from A2 in D.
    """
    r = _is_rectangle(inst.D)
    if r is not None:
        L, R, Bo, T = (set(r.side(s)) for s in ("left", "right", "bottom", "top"))
        pairs = [(L, R, Bo, T), (Bo, T, L, R)]
        for a1, a2, b1, b2 in pairs:
            if ((inst.A1 <= a1 and inst.A2 <= a2) or (inst.A1 <= a2 and inst.A2 <= a1)) and \
               ((inst.B1 == b1 and inst.B2 == b2) or (inst.B1 == b2 and inst.B2 == b1)):
                return "rectangle"
    D = inst.D
    nbrs = {p: [q for q in ((p[0] + 1, p[1]), (p[0] - 1, p[1]), (p[0], p[1] + 1),
                            (p[0], p[1] - 1)) if q in D] for p in D}
    count = 0

    def separates(path_set):
        start = [a for a in inst.A1 if a not in path_set]
        seen = set(start)
        stack = list(start)
        while stack:
            u = stack.pop()
            if u in inst.A2:
                return False
            for w in nbrs[u]:
                if w not in seen and w not in path_set:
                    seen.add(w)
                    stack.append(w)
        return True

    for b in sorted(inst.B1):
        stack = [(b, (b,))]
        while stack:
            u, path = stack.pop()
            if u in inst.B2:
                count += 1
                if count > path_cap:
                    raise InstanceError("topological condition could not be certified (path cap)")
                if not separates(set(path)):
                    raise InstanceError(f"base path {path} from B1 to B2 misses every A1-A2 path")
                continue
            for w in nbrs[u]:
                if w not in path and (w not in inst.B1):
                    stack.append((w, path + (w,)))
    return f"scan:{count}"


# --------------------------------------------------------------------------
# events


def _labels(graph: SlabGraph, omega, mask) -> np.ndarray:
    return K.region_labels(graph.n_vertices, graph.eu, graph.ev,
                           np.ascontiguousarray(omega, dtype=np.uint8), mask)


@dataclass(frozen=True)
class GlueStatus:
    A: bool
    B: bool
    X: bool
    Y1: bool
    Y2: bool

    @property
    def Y(self) -> bool:
        return self.A and self.B and not self.X


def glue_status(inst: GluingInstance, omega) -> GlueStatus:
    g, m = inst.graph, inst.masks
    labD = _labels(g, omega, m["D"])
    labDp = _labels(g, omega, m["Dp"])
    return GlueStatus(*(bool(x) for x in K.glue_flags(labD, labDp, m["D"], m["Dp"], m["A0"],
                                                       m["A1"], m["A2"], m["B1"], m["B2"])))


GLUE_EVENTS = ("A", "B", "X", "Y1", "Y2")


def glue_events(inst: GluingInstance) -> dict[str, Event]:
    """The gluing events as oracle events (batch evaluated)."""
    g, m = inst.graph, inst.masks
    eD = g.edges_within(m["D"])
    eDp = g.edges_within(m["Dp"])
    cache = {}

    def flags(b):
        key = b.start
        if key not in cache:
            cache.clear()
            cache[key] = K.glue_flags_batch(b.labels(eD), b.labels(eDp), m["D"], m["Dp"],
                                            m["A0"], m["A1"], m["A2"], m["B1"], m["B2"])
        return cache[key]

    mono = {"A": "increasing", "B": "increasing", "X": "increasing"}
    return {name: Event(lambda b, k=k: flags(b)[:, k], name, mono.get(name))
            for k, name in enumerate(GLUE_EVENTS)}


# --------------------------------------------------------------------------
# minimal paths


def lex_min_open_path(graph: SlabGraph, omega, ordering: EdgeOrdering, D, B1, B2):
    """Least open self-avoiding path (vertex list) inside D-bar from B1-bar to B2-bar, or None.

    ``D``, ``B1``, ``B2`` are vertex masks or base point collections.
    """
    dm, s, t = (_as_mask(graph, x) for x in (D, B1, B2))
    indptr, nbr, nbr_edge = graph.adjacency(False)
    path = K.lexmin_path(indptr, nbr, nbr_edge, np.ascontiguousarray(omega, dtype=np.uint8),
                         graph.eu, ordering.rank_fwd, ordering.rank_bwd, dm, s & dm, t & dm)
    return [int(v) for v in path] if len(path) else None


def _as_mask(graph: SlabGraph, x) -> np.ndarray:
    if isinstance(x, np.ndarray) and x.dtype == np.bool_:
        return x
    return graph.mask_of(x)


def enumerate_open_paths(graph: SlabGraph, omega, D, B1, B2, limit: int = 1_000_000):
    """Every open self-avoiding path in D-bar starting in B1-bar and stopping at its first B2-bar visit."""
    dm, s, t = (_as_mask(graph, x) for x in (D, B1, B2))
    indptr, nbr, nbr_edge = graph.adjacency(False)
    out = []
    for b in np.flatnonzero(s & dm):
        b = int(b)
        if t[b]:
            out.append([b])
            continue
        stack = [[b]]
        while stack:
            path = stack.pop()
            u = path[-1]
            for k in range(indptr[u], indptr[u + 1]):
                e, w = int(nbr_edge[k]), int(nbr[k])
                if not omega[e] or not dm[w] or w in path:
                    continue
                np_ = path + [w]
                if t[w]:
                    out.append(np_)
                    if len(out) > limit:
                        raise RuntimeError("too many open paths to enumerate")
                else:
                    stack.append(np_)
    return out


def brute_force_lex_min(graph: SlabGraph, omega, ordering: EdgeOrdering, D, B1, B2):
    """Minimum over the exhaustive path enumeration (an independent check of the greedy)."""
    paths = enumerate_open_paths(graph, omega, D, B1, B2)
    if not paths:
        return None
    best = min(paths, key=lambda p: (ordering.path_key(graph, p), p[0]))
    return best


def minimal_path(inst: GluingInstance, omega, ordering: EdgeOrdering, which: int = 1):
    s, t = inst.sides(which)
    return lex_min_open_path(inst.graph, omega, ordering, inst.masks["D"], s, t)


# --------------------------------------------------------------------------
# overlap, almost-overlap and good points


def _column(graph: SlabGraph, z) -> np.ndarray:
    return graph.column(z)


def _box1(graph: SlabGraph, z) -> list[Point]:
    return base_ball(z, 1, graph.base)


def qualifying_clusters(inst: GluingInstance, omega, which: int) -> np.ndarray:
    """Mask of vertices in D-bar clusters that cross A1-A2, miss the start side and reach A0 in D'-bar."""
    g, m = inst.graph, inst.masks
    start, _ = inst.sides(which)
    labD = _labels(g, omega, m["D"])
    labDp = _labels(g, omega, m["Dp"])
    a0lab = set(labDp[m["A0"] & m["Dp"]].tolist())
    inside = m["D"]
    ids = labD[inside]
    lab_in = lambda mask: set(labD[mask & inside].tolist())
    ok = lab_in(m["A1"]) & lab_in(m["A2"])
    ok -= lab_in(start)
    ok = {r for r in ok if labDp[r] in a0lab}  # the label is a vertex of the cluster
    out = np.zeros(g.n_vertices, dtype=np.bool_)
    if ok:
        out[inside] = np.isin(ids, list(ok))
    return out


def overlap_points(inst: GluingInstance, omega, which: int = 1,
                   ordering: EdgeOrdering | None = None, gamma=None) -> set[Point]:
    """Base points whose column meets both the minimal path and a qualifying cluster."""
    g = inst.graph
    if gamma is None:
        ordering = ordering or EdgeOrdering.identity(g.n_edges)
        gamma = minimal_path(inst, omega, ordering, which)
    if gamma is None:
        raise ValueError("configuration is not in B: the minimal path does not exist")
    qual = qualifying_clusters(inst, omega, which)
    gpts = {g.base_point(v) for v in gamma}
    return {z for z in gpts if qual[_column(g, z)].any()}


def _a0_reach_without_column(inst: GluingInstance, omega, z) -> np.ndarray:
    """Vertices joined to A0-bar by an open path whose vertices other than the first avoid z-bar.

    The admissible region is D'-bar with the column of z removed; a vertex of
    the column qualifies when it lies in A0-bar itself or has an open edge to
    a qualifying vertex outside the column.
    """
    g, m = inst.graph, inst.masks
    col = np.zeros(g.n_vertices, dtype=np.bool_)
    col[_column(g, z)] = True
    allowed = m["Dp"] & ~col
    indptr, nbr, nbr_edge = g.adjacency(False)
    w = np.ascontiguousarray(omega, dtype=np.uint8)
    reach = K.reach_set(indptr, nbr, nbr_edge, w, allowed, m["A0"])
    for v in np.flatnonzero(col):
        if not m["Dp"][v]:
            continue
        if m["A0"][v]:
            reach[v] = True
            continue
        for k in range(indptr[v], indptr[v + 1]):
            if w[nbr_edge[k]] and reach[nbr[k]] and not col[nbr[k]]:
                reach[v] = True
                break
    return reach


def _start_reach_in_D(inst: GluingInstance, omega, which: int) -> np.ndarray:
    g, m = inst.graph, inst.masks
    start, _ = inst.sides(which)
    indptr, nbr, nbr_edge = g.adjacency(False)
    return K.reach_set(indptr, nbr, nbr_edge, np.ascontiguousarray(omega, dtype=np.uint8),
                       m["D"], start)


@dataclass(frozen=True)
class AlmostWitness:
    z2: Point   # the nearby base point z'
    s: int      # fiber level of gamma on the column of z
    s2: int     # fiber level s' of the nearby vertex


def almost_overlap_witnesses(inst: GluingInstance, omega, which: int, gamma) -> dict:
    """For every almost-overlap point z, all (z', s, s') satisfying the four conditions."""
    g = inst.graph
    ns = g.fiber_size
    gset = set(gamma)
    reachB = _start_reach_in_D(inst, omega, which)
    out: dict[Point, list[AlmostWitness]] = {}
    for z in sorted({g.base_point(v) for v in gamma}):
        levels_on = [s for s in range(ns) if g.vertex(z, s) in gset]
        levels_off = [s for s in range(ns) if g.vertex(z, s) not in gset]
        if not levels_off:
            continue
        reachA = _a0_reach_without_column(inst, omega, z)
        wits = []
        for z2 in _box1(g, z):
            for s2 in levels_off:
                v = g.vertex(z2, s2)
                if not reachA[v] or reachB[v]:
                    continue
                for s in levels_on:
                    wits.append(AlmostWitness(z2, s, s2))
        if wits:
            out[z] = wits
    return out


def almost_overlap_points(inst: GluingInstance, omega, which: int, gamma) -> set[Point]:
    return set(almost_overlap_witnesses(inst, omega, which, gamma))


def _is_good(inst: GluingInstance, w: AlmostWitness, z, gamma, pos, ordering) -> bool:
    g = inst.graph
    geo = g.fiber.geodesic(w.s, w.s2)
    for t in geo[1:-1]:
        if g.vertex(z, t) in pos:
            return False
    j = pos[g.vertex(z, w.s)]
    if j == len(gamma) - 1:
        return True  # terminal vertex: no outgoing path edge to compare with
    here = gamma[j]
    step = g.vertex(z, geo[1])
    return ordering.rank(g, here, gamma[j + 1]) <= ordering.rank(g, here, step)


def good_almost_overlap_points(inst: GluingInstance, omega, which: int, gamma,
                               ordering: EdgeOrdering, witnesses: dict | None = None) -> set[Point]:
    """Almost-overlap points with a witness whose fiber segment avoids gamma and whose first
    fiber step is ranked after gamma's outgoing edge."""
    if witnesses is None:
        witnesses = almost_overlap_witnesses(inst, omega, which, gamma)
    pos = {v: k for k, v in enumerate(gamma)}
    return {z for z, ws in witnesses.items()
            if any(_is_good(inst, w, z, gamma, pos, ordering) for w in ws)}


@dataclass
class OverlapScan:
    gamma: list
    W: set
    U: set
    V: set


def scan(inst: GluingInstance, omega, ordering: EdgeOrdering, which: int = 1) -> OverlapScan:
    gamma = minimal_path(inst, omega, ordering, which)
    if gamma is None:
        raise ValueError("configuration is not in B: the minimal path does not exist")
    W = overlap_points(inst, omega, which, gamma=gamma)
    wit = almost_overlap_witnesses(inst, omega, which, gamma)
    V = good_almost_overlap_points(inst, omega, which, gamma, ordering, wit)
    return OverlapScan(gamma, W, set(wit), V)


# --------------------------------------------------------------------------
# connecting surgery


@dataclass
class SurgeryResult:
    sigma: np.ndarray
    z: Point
    gamma: list
    i: int
    j: int
    g: list
    h: list
    t: int
    a0: int
    a1: int | None
    expected: list          # gamma[:i] + g + gamma[j+1:]
    radius: int = 1         # radius of the rewired box
    on_column: bool = True  # h branches off g inside the column of z

    def changed_edges(self, omega) -> np.ndarray:
        return np.flatnonzero(np.asarray(omega, dtype=np.uint8) != self.sigma)


def _box_mask(graph: SlabGraph, z, radius: int) -> np.ndarray:
    return graph.mask_of(base_ball(z, radius, graph.base))


def _attachment_candidates(inst, omega, which, box, col, gamma, i, j):
    """(a0, a1) pairs: a0 on the box boundary linked to A0 from outside the box."""
    g, m = inst.graph, inst.masks
    indptr, nbr, nbr_edge = g.adjacency(False)
    w = np.ascontiguousarray(omega, dtype=np.uint8)
    start, _ = inst.sides(which)
    outside_A0 = K.reach_set(indptr, nbr, nbr_edge, w, m["Dp"] & ~box, m["A0"])
    outside_B = K.reach_set(indptr, nbr, nbr_edge, w, m["D"] & ~box, start)
    gset = set(gamma)
    cands = []
    for a0 in np.flatnonzero(box & ~col & m["Dp"]):
        a0 = int(a0)
        if start[a0] or a0 in gset:
            continue
        if m["A0"][a0]:
            cands.append((a0, None))
            continue
        for k in range(indptr[a0], indptr[a0 + 1]):
            a1 = int(nbr[k])
            if not w[nbr_edge[k]] or box[a1] or not outside_A0[a1]:
                continue
            if m["D"][a1] and outside_B[a1]:
                continue
            cands.append((a0, a1))
            break
    return cands


def _simple_paths(nb, src, dst, allowed, length):
    """Self-avoiding paths with exactly ``length`` edges from src to dst through ``allowed``."""
    out = []
    stack = [(src, [src])]
    while stack:
        u, path = stack.pop()
        if len(path) - 1 == length:
            if u == dst:
                out.append(path)
            continue
        for w in sorted(nb[u], reverse=True):
            if w in path or (w != dst and not allowed(w)):
                continue
            if w == dst and len(path) != length:
                continue
            stack.append((w, path + [w]))
    return out


def _find_h(nb, gt, first_ok, a0, allowed):
    """Shortest path from gt to a0 with an admissible first step; vertices other than gt via ``allowed``."""
    from collections import deque
    starts = [w for w in sorted(nb[gt]) if first_ok(w) and (w == a0 or allowed(w))]
    prev = {w: gt for w in starts}
    dq = deque(starts)
    while dq:
        u = dq.popleft()
        if u == a0:
            path = [u]
            while path[-1] != gt:
                path.append(prev[path[-1]])
            return path[::-1]
        for w in sorted(nb[u]):
            if w not in prev and w != gt and (w == a0 or allowed(w)):
                prev[w] = u
                dq.append(w)
    return None


# (box radius, h must branch off inside the column of z), in the order tried
SURGERY_TIERS = ((1, True), (2, True), (1, False), (2, False))


def connecting_surgery(inst: GluingInstance, omega, ordering: EdgeOrdering,
                       which: int = 1, z=None, max_len: int = 10) -> SurgeryResult:
    """Rewire the box around an overlap point so the minimal path reaches A0.

    Requires omega in Y (the part whose crossing cluster misses the start side).
    Overlap points are tried in increasing (x, y) order (or only ``z`` when
    given).  The box of radius one is tried first; when the ordering leaves no
    admissible (g, h) pair there, the box of radius two is rewired instead,
    which keeps every change within edges touching the radius-two box.  As a
    last resort h may branch off g away from the column of z: the result is
    still in X with the same minimal path, only the point z can no longer be
    read off sigma.
    """
    g, m = inst.graph, inst.masks
    omega = np.ascontiguousarray(omega, dtype=np.uint8)
    st = glue_status(inst, omega)
    if not (st.Y1 if which == 1 else st.Y2):
        raise ValueError(f"configuration is not in Y{which}")
    gamma = minimal_path(inst, omega, ordering, which)
    W = sorted(overlap_points(inst, omega, which, gamma=gamma))
    if not W:
        raise SurgeryFailure("no overlap point although omega is in Y", {"gamma": gamma})
    if z is not None:
        if tuple(z) not in W:
            raise ValueError(f"{z} is not an overlap point")
        W = [tuple(z)]
    for radius, on_column in SURGERY_TIERS:
        for zz in W:
            res = _surgery_at(inst, omega, ordering, which, gamma, zz, radius, on_column,
                              max_len)
            if res is not None:
                return res
    raise SurgeryFailure("no admissible (g, h) pair around any overlap point",
                         {"gamma": gamma, "overlap_points": W, "omega": omega})


def _surgery_at(inst, omega, ordering, which, gamma, z, radius, on_column, max_len):
    g, m = inst.graph, inst.masks
    indptr, nbr, _ = g.adjacency(False)
    start, end = inst.sides(which)
    both = start | end
    n = len(gamma) - 1
    box = _box_mask(g, z, radius)
    col = np.zeros(g.n_vertices, dtype=np.bool_)
    col[_column(g, z)] = True
    inside = [k for k, v in enumerate(gamma) if box[v]]
    i, j = inside[0], inside[-1]
    if i == j:
        return None
    gi, gj = gamma[i], gamma[j]
    cands = _attachment_candidates(inst, omega, which, box, col, gamma, i, j)
    if not cands:
        return None
    # a path restarting at gamma_i would compete with the whole of chi
    r_first = ordering.rank(g, gamma[0], gamma[1]) if (i > 0 and start[gi]) else None
    verts = [int(v) for v in np.flatnonzero(box)]
    nb = {v: [int(w) for w in nbr[indptr[v]:indptr[v + 1]] if box[w]] for v in verts}
    g_ok = lambda v: bool(m["D"][v]) and not both[v]
    touch = box[g.eu] | box[g.ev]
    for k in range(1, min(len(verts), max_len + 1)):
        for gp in _simple_paths(nb, gi, gj, g_ok, k):
            if r_first is not None and ordering.rank(g, gp[0], gp[1]) < r_first:
                continue
            gset = set(gp)
            # attach h at an interior vertex of g on the column, or at the
            # terminal vertex when the minimal path ends inside the box there
            spots = [t for t in range(1, k) if col[gp[t]] or not on_column]
            if j == n and (col[gp[k]] or not on_column):
                spots.append(k)
            for t in spots:
                gt = gp[t]
                r_next = ordering.rank(g, gt, gp[t + 1]) if t < k else -1
                first_ok = lambda w: (w not in gset and bool(m["Dp"][w])
                                      and ordering.rank(g, gt, w) > r_next)
                h_ok = lambda w: (w not in gset and bool(m["Dp"][w]) and not start[w])
                for a0, a1 in cands:
                    if a0 in gset:
                        continue
                    hp = _find_h(nb, gt, first_ok, a0, h_ok)
                    if hp is None:
                        continue
                    sigma = omega.copy()
                    sigma[touch] = 0
                    keep = [(gp[q], gp[q + 1]) for q in range(k)]
                    keep += [(hp[q], hp[q + 1]) for q in range(len(hp) - 1)]
                    if i > 0:
                        keep.append((gamma[i - 1], gi))
                    if j < n:
                        keep.append((gj, gamma[j + 1]))
                    if a1 is not None:
                        keep.append((a0, a1))
                    for u, v in keep:
                        sigma[g.edge_id(u, v)] = 1
                    expected = gamma[:i] + gp + gamma[j + 1:]
                    # when gamma leaves the box between i and j, the freed vertices
                    # can seed a smaller path; such rewirings are rejected here
                    if minimal_path(inst, sigma, ordering, which) != expected:
                        continue
                    if not glue_status(inst, sigma).X:
                        continue
                    return SurgeryResult(sigma, z, gamma, i, j, gp, hp, t, a0, a1, expected,
                                         radius, on_column)
    return None


@dataclass
class SurgeryCheck:
    in_X: bool
    identity: bool
    local: bool

    @property
    def ok(self) -> bool:
        return self.in_X and self.identity and self.local


def check_surgery(inst: GluingInstance, omega, res: SurgeryResult,
                  ordering: EdgeOrdering, which: int = 1) -> SurgeryCheck:
    """Independent verification: sigma in X, minimal path of sigma equals the concatenation,
    and every changed edge has an endpoint in the box of radius two."""
    g = inst.graph
    in_X = glue_status(inst, res.sigma).X
    path = minimal_path(inst, res.sigma, ordering, which)
    identity = path == res.expected
    box2 = _box_mask(g, res.z, 2)
    ch = res.changed_edges(omega)
    local = bool(np.all(box2[g.eu[ch]] | box2[g.ev[ch]]))
    return SurgeryCheck(bool(in_X), bool(identity), local)


# --------------------------------------------------------------------------
# ordering lemma


@dataclass
class OrderingTrial:
    orderings: int
    eligible: int       # orderings with |U| >= min_u
    good: int           # eligible orderings with |V| >= |U|/4

    @property
    def frequency(self) -> float:
        return self.good / self.eligible if self.eligible else math.nan

    @property
    def stderr(self) -> float:
        f = self.frequency
        return math.sqrt(f * (1 - f) / self.eligible) if self.eligible else math.nan


def ordering_trial(inst: GluingInstance, omega, n_orderings: int, rng: np.random.Generator,
                   which: int = 1, min_u: int = 4) -> OrderingTrial:
    """Frequency of |V| >= |U|/4 over uniformly random orderings with |U| >= min_u.

    Sampling orderings unconditionally mixes the conditional laws given the
    minimal path; each of those satisfies the quarter bound, so the mixture does too.
    """
    E = inst.graph.n_edges
    eligible = good = 0
    for _ in range(n_orderings):
        o = EdgeOrdering.random(E, rng)
        gamma = minimal_path(inst, omega, o, which)
        wit = almost_overlap_witnesses(inst, omega, which, gamma)
        if len(wit) < min_u:
            continue
        eligible += 1
        V = good_almost_overlap_points(inst, omega, which, gamma, o, wit)
        if 4 * len(V) >= len(wit):
            good += 1
    return OrderingTrial(n_orderings, eligible, good)


# --------------------------------------------------------------------------
# gluing constant


@dataclass
class GluingEstimate:
    X: EstimateRecord
    A: EstimateRecord
    B: EstimateRecord
    c_hat: float
    c_lo: float
    c_hi: float
    c_se: float
    beta_hat: float
    log: list = field(default_factory=list)


def _ratio(X: float, A: float, B: float, sX: float, sA: float, sB: float, cov=None):
    """X/(A B) with a delta-method standard error using (X, A, B) covariances when given."""
    if A <= 0 or B <= 0:
        return math.nan, 0.0, math.inf, math.inf
    c = X / (A * B)
    grad = np.array([1 / (A * B), -X / (A * A * B), -X / (A * B * B)])
    if cov is None:
        cov = np.diag([sX ** 2, sA ** 2, sB ** 2])
    se = math.sqrt(max(float(grad @ cov @ grad), 0.0))
    return c, max(0.0, c - Z95 * se), c + Z95 * se, se


def beta_from(X: float, A: float, B: float) -> float:
    """Largest beta with X >= A B - (1 - A)^beta; +inf when X >= A B, nan when A is 0 or 1."""
    gap = A * B - X
    if gap <= 0:
        return math.inf
    if not 0 < 1 - A < 1:
        return math.nan
    return math.log(gap) / math.log(1 - A)


def gluing_estimate(inst: GluingInstance, params: ModelParams, samples: int, seed: int = 0,
                    sampler: str = "auto", burn_in: int = 200, thin: int = 1,
                    keep_log: bool = False) -> GluingEstimate:
    """Monte Carlo estimate of P(X), P(A), P(B), the ratio X/(A B) and beta."""
    from .dynamics import ChainState, advance, resolve_sampler
    state = ChainState.new(inst.graph, params, seed)
    s = resolve_sampler(sampler, params.q)
    rows = np.zeros((samples, 3))
    log = []
    if params.q == 1:
        rng = state.rng
        pe = state.p_edge
        for k in range(samples):
            w = (rng.random(inst.graph.n_edges) < pe).astype(np.uint8)
            st = glue_status(inst, w)
            rows[k] = (st.X, st.A, st.B)
            if keep_log:
                log.append((k, int(st.A), int(st.B), int(st.X), int(st.Y1), int(st.Y2)))
    else:
        advance(state, s, burn_in)
        for k in range(samples):
            advance(state, s, thin)
            st = glue_status(inst, state.omega)
            rows[k] = (st.X, st.A, st.B)
            if keep_log:
                log.append((k, int(st.A), int(st.B), int(st.X), int(st.Y1), int(st.Y2)))
    if params.q == 1:
        recs = [binomial_estimate(nm, int(rows[:, c].sum()), samples)
                for c, nm in enumerate(("X", "A", "B"))]
        cov = np.cov(rows.T) / samples if samples > 1 else None
    else:
        recs = [estimate(nm, rows[:, c], True) for c, nm in enumerate(("X", "A", "B"))]
        taus = np.array([max(r.tau_int, 1.0) for r in recs])
        cov = np.cov(rows.T) / samples * np.sqrt(np.outer(taus, taus)) if samples > 1 else None
    X, A, B = recs
    if cov is not None:
        cov = np.nan_to_num(cov)
    c, lo, hi, se = _ratio(X.mean, A.mean, B.mean, X.stderr, A.stderr, B.stderr, cov)
    return GluingEstimate(X, A, B, c, lo, hi, se, beta_from(X.mean, A.mean, B.mean), log)


def exact_gluing(inst: GluingInstance, params: ModelParams) -> dict:
    """Exact P(A), P(B), P(X), P(Y1), P(Y2) and the ratio by enumeration."""
    orc = oracle_for(inst.graph, params.boundary)
    ev = glue_events(inst)
    probs = {k: orc.probability(e, params) for k, e in ev.items()}
    probs["ratio"] = probs["X"] / (probs["A"] * probs["B"]) if probs["A"] * probs["B"] > 0 \
        else math.nan
    return probs
