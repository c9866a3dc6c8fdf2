"""Cluster labelling, crossing events and strongly separated crossings on slabs."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .geometry import Graph, RectRegion, SlabGraph
from .measure_oracle import Event, connection


def _vertex_mask(graph: Graph, vertices) -> np.ndarray:
    m = np.zeros(graph.n_vertices, dtype=np.bool_)
    if vertices is None:
        m[:] = True
    elif isinstance(vertices, np.ndarray) and vertices.dtype == np.bool_:
        m[:] = vertices
    else:
        m[np.fromiter(vertices, dtype=np.int64)] = True
    return m


def _omega(graph: Graph, omega) -> np.ndarray:
    w = np.ascontiguousarray(omega, dtype=np.uint8)
    if w.shape != (graph.n_edges,):
        raise ValueError("configuration is not sized to the graph")
    return w


@dataclass
class ClusterLabeling:
    """Per-vertex cluster ids (-1 outside the region) with base bounding boxes.

    ``bbox[r] = (xmin, xmax, ymin, ymax)`` is filled for slab graphs only.
    """

    labels: np.ndarray
    count: int
    bbox: dict

    def same(self, u: int, v: int) -> bool:
        return self.labels[u] >= 0 and self.labels[u] == self.labels[v]

    def members(self, r: int) -> np.ndarray:
        return np.flatnonzero(self.labels == r)

    def cluster_ids(self) -> np.ndarray:
        lab = self.labels
        return np.unique(lab[lab >= 0])


def components(graph: Graph, omega, region=None) -> ClusterLabeling:
    """Clusters of the open edges with both endpoints in ``region`` (default: whole graph)."""
    w = _omega(graph, omega)
    vmask = _vertex_mask(graph, region)
    lab = K.region_labels(graph.n_vertices, graph.eu, graph.ev, w, vmask)
    ids = np.unique(lab[lab >= 0])
    bbox = {}
    if isinstance(graph, SlabGraph) and len(ids):
        inside = lab >= 0
        x, y, l = graph.vertex_x[inside], graph.vertex_y[inside], lab[inside]
        for r in ids:
            sel = l == r
            bbox[int(r)] = (int(x[sel].min()), int(x[sel].max()),
                            int(y[sel].min()), int(y[sel].max()))
    return ClusterLabeling(lab, len(ids), bbox)


def connected_in(graph: Graph, omega, D, A, B) -> bool:
    """Is there an open path with all its vertices in D from a vertex of A to a vertex of B?

    A and B are intersected with D first, so a shared vertex counts only when
    it lies in D.
    """
    w = _omega(graph, omega)
    return bool(K.region_joined(graph.n_vertices, graph.eu, graph.ev, w,
                                _vertex_mask(graph, D), _vertex_mask(graph, A),
                                _vertex_mask(graph, B)))


def _direction(direction: str) -> str:
    if direction in ("h", "horizontal"):
        return "horizontal"
    if direction in ("v", "vertical"):
        return "vertical"
    raise ValueError(f"direction must be horizontal or vertical, got {direction!r}")


class CrossingProbe:
    """Precomputed masks for repeated crossing queries of one rectangle."""

    def __init__(self, graph: SlabGraph, rect: RectRegion, direction: str):
        self.graph = graph
        self.rect = rect
        self.direction = _direction(direction)
        win = graph.base
        if not (win.x0 <= rect.a and rect.b <= win.x1 and win.y0 <= rect.c and rect.d <= win.y1):
            raise ValueError(f"{rect} does not fit inside the window {win}")
        s1, s2 = rect.crossing_sides(self.direction)
        self.region = rect.vertex_mask(graph)
        self.side1 = rect.side_mask(graph, s1)
        self.side2 = rect.side_mask(graph, s2)

    def __call__(self, omega, graph=None) -> bool:
        g = self.graph
        return bool(K.region_joined(g.n_vertices, g.eu, g.ev, omega, self.region,
                                    self.side1, self.side2))

    def event(self) -> Event:
        return connection(self.graph, self.side1, self.side2, within=self.region,
                          name=f"C_{self.direction[0]}[{self.rect.a},{self.rect.b}]x"
                               f"[{self.rect.c},{self.rect.d}]")


def has_crossing(graph: SlabGraph, omega, rect: RectRegion, direction: str) -> bool:
    """Fattened opposite sides of ``rect`` joined by an open path inside the fattened rect."""
    return CrossingProbe(graph, rect, direction)(_omega(graph, omega))


def crossing_event(graph: SlabGraph, rect: RectRegion, direction: str) -> Event:
    """The crossing as an oracle event."""
    return CrossingProbe(graph, rect, direction).event()


# --------------------------------------------------------------------------
# strong separation


@dataclass
class SeparationReport:
    K: int
    witnesses: list[int]
    hamming_lb: int

    @classmethod
    def from_count(cls, k: int, witnesses) -> SeparationReport:
        return cls(k, list(witnesses), max(k - 1, 0))


class SeparationProbe:
    """Strongly separated vertical crossings of one fattened rectangle."""

    def __init__(self, graph: SlabGraph, rect: RectRegion):
        self.graph = graph
        self.rect = rect
        self.region = rect.vertex_mask(graph)
        self.bottom = rect.side_mask(graph, "bottom")
        self.top = rect.side_mask(graph, "top")
        ns = graph.fiber_size
        self.base_id = np.arange(graph.n_vertices, dtype=np.int64) // ns
        self.n_base = graph.base.n_points
        self.vx = np.ascontiguousarray(graph.vertex_x, dtype=np.int64)
        self.vy = np.ascontiguousarray(graph.vertex_y, dtype=np.int64)

    def __call__(self, omega) -> SeparationReport:
        g = self.graph
        w = _omega(g, omega)
        lab = K.region_labels(g.n_vertices, g.eu, g.ev, w, self.region)
        wit = np.empty(g.n_vertices, dtype=np.int64)
        k = K.separation_greedy(lab, self.region, self.bottom, self.top, self.base_id,
                                self.n_base, self.vx, self.vy, wit)
        return SeparationReport.from_count(int(k), [int(x) for x in wit[:k]])

    def count_all(self) -> np.ndarray:
        """Greedy K for every configuration of the graph (small graphs only)."""
        g = self.graph
        if g.n_edges > 24:
            raise ValueError("exhaustive separation counts are capped at 24 edges")
        return K.enum_separation(g.n_vertices, g.eu, g.ev, self.region, self.bottom, self.top,
                                 self.base_id, self.n_base, self.vx, self.vy, 1 << g.n_edges)


def strongly_separated_crossings(graph: SlabGraph, omega, rect: RectRegion) -> SeparationReport:
    """Greedy left-to-right family of strongly separated vertical crossings of ``rect``.

    Witnesses are cluster labels of omega restricted to the fattened rect.
    ``hamming_lb = max(K - 1, 0)`` bounds from below the number of flips needed
    to create a horizontal crossing.
    """
    return SeparationProbe(graph, rect)(omega)


def fattened_projection(graph: SlabGraph, vertices) -> np.ndarray:
    """Mask of every vertex sharing a base point with one of ``vertices``."""
    ns = graph.fiber_size
    pts = np.unique(np.asarray(list(vertices), dtype=np.int64) // ns)
    mask = np.zeros(graph.n_vertices, dtype=np.bool_)
    for s in range(ns):
        mask[pts * ns + s] = True
    return mask


def strongly_separated(graph: SlabGraph, omega, region, sets) -> bool:
    """Direct check of the definition: fattened copies of ``sets`` lie in distinct clusters of omega|region."""
    lab = components(graph, omega, region).labels
    region_mask = _vertex_mask(graph, region)
    seen: list[set] = []
    for s in sets:
        fm = fattened_projection(graph, s) & region_mask
        labs = set(int(x) for x in lab[fm] if x >= 0)
        if any(labs & t for t in seen):
            return False
        seen.append(labs)
    return True


def projection_touches(graph: SlabGraph, vertices, rect: RectRegion, direction: str) -> bool:
    """Does the base projection of ``vertices`` meet both crossing sides of ``rect``?"""
    s1, s2 = rect.crossing_sides(_direction(direction))
    pts = {graph.base_point(int(v)) for v in vertices}
    return bool(pts & set(rect.side(s1))) and bool(pts & set(rect.side(s2)))
