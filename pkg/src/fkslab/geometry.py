"""Slab graphs G x S over finite windows of Z^2, long-range graphs, rectangles and boxes.

Vertices of a :class:`SlabGraph` are indexed as
``((x - x0) * height + (y - y0)) * |S| + s`` so that the fiber copies of one base
point are contiguous.  Edge ids follow the lexicographic order of
``(base point, direction, fiber index)`` with direction ``+x < +y < fiber``.
"""

from __future__ import annotations

import hashlib
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

BASE_X, BASE_Y, FIBER = 0, 1, 2
Point = tuple[int, int]


class GeometryError(ValueError):
    """Raised for malformed graphs, windows, couplings or regions."""


# --------------------------------------------------------------------------
# generic graph


class Graph:
    """Finite simple graph with a flat edge index and an optional boundary set.

    The boundary vertices are the ones merged into a single ghost component
    under wired boundary conditions.
    """

    def __init__(self, n_vertices: int, edges, boundary=(), name: str = "graph"):
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        if n_vertices < 1:
            raise GeometryError("a graph needs at least one vertex")
        if len(edges):
            if edges.min() < 0 or edges.max() >= n_vertices:
                raise GeometryError("edge endpoint out of range")
            if np.any(edges[:, 0] == edges[:, 1]):
                raise GeometryError("self-loops are not allowed")
            canon = np.sort(edges, axis=1)
            if len(np.unique(canon, axis=0)) != len(canon):
                raise GeometryError("duplicate edges are not allowed")
        self.n_vertices = int(n_vertices)
        self.edges = edges
        self.boundary = np.unique(np.asarray(boundary, dtype=np.int64))
        self.name = name

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @cached_property
    def eu(self) -> np.ndarray:
        return np.ascontiguousarray(self.edges[:, 0])

    @cached_property
    def ev(self) -> np.ndarray:
        return np.ascontiguousarray(self.edges[:, 1])

    @cached_property
    def boundary_mask(self) -> np.ndarray:
        mask = np.zeros(self.n_vertices, dtype=np.bool_)
        mask[self.boundary] = True
        return mask

    def adjacency(self, wired: bool = False):
        """CSR adjacency ``(indptr, neighbours, edge_ids)``.

        With ``wired=True`` an extra ghost vertex ``n_vertices`` is appended and
        joined to every boundary vertex through edge id ``-1`` (always open).
        """
        key = bool(wired)
        cache = self.__dict__.setdefault("_adj_cache", {})
        if key not in cache:
            cache[key] = _build_csr(self.n_vertices, self.edges,
                                    self.boundary if wired else None)
        return cache[key]

    def edges_within(self, vertex_mask: np.ndarray) -> np.ndarray:
        """Boolean mask of edges with both endpoints in ``vertex_mask``."""
        return vertex_mask[self.eu] & vertex_mask[self.ev]

    @cached_property
    def graph_hash(self) -> str:
        h = hashlib.sha256()
        h.update(np.int64(self.n_vertices).tobytes())
        h.update(np.ascontiguousarray(self.edges, dtype=np.int64).tobytes())
        h.update(b"|")
        h.update(np.ascontiguousarray(self.boundary, dtype=np.int64).tobytes())
        return h.hexdigest()

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.name!r}, V={self.n_vertices}, E={self.n_edges})"


def _build_csr(n, edges, boundary):
    n_ext = n + (1 if boundary is not None else 0)
    src = [edges[:, 0], edges[:, 1]]
    dst = [edges[:, 1], edges[:, 0]]
    eid = [np.arange(len(edges)), np.arange(len(edges))]
    if boundary is not None and len(boundary):
        ghost = np.full(len(boundary), n, dtype=np.int64)
        src += [boundary, ghost]
        dst += [ghost, boundary]
        eid += [np.full(len(boundary), -1), np.full(len(boundary), -1)]
    src = np.concatenate(src).astype(np.int64)
    dst = np.concatenate(dst).astype(np.int64)
    eid = np.concatenate(eid).astype(np.int64)
    order = np.argsort(src, kind="stable")
    counts = np.bincount(src, minlength=n_ext)
    indptr = np.zeros(n_ext + 1, dtype=np.int64)
    np.cumsum(counts, out=indptr[1:])
    return indptr, np.ascontiguousarray(dst[order]), np.ascontiguousarray(eid[order])


def is_connected(n: int, edges: Sequence[tuple[int, int]]) -> bool:
    return len(connected_components(n, edges)) == 1


def connected_components(n: int, edges: Sequence[tuple[int, int]]) -> list[list[int]]:
    adj: list[list[int]] = [[] for _ in range(n)]
    for u, v in edges:
        adj[u].append(v)
        adj[v].append(u)
    seen = [False] * n
    comps = []
    for s in range(n):
        if seen[s]:
            continue
        comp, stack = [], [s]
        seen[s] = True
        while stack:
            u = stack.pop()
            comp.append(u)
            for w in adj[u]:
                if not seen[w]:
                    seen[w] = True
                    stack.append(w)
        comps.append(sorted(comp))
    return comps


# --------------------------------------------------------------------------
# fiber


@dataclass(frozen=True)
class FiberGraph:
    """The finite connected graph S attached to every base point."""

    vertex_count: int
    edges: tuple[tuple[int, int], ...] = ()
    name: str = ""

    def __post_init__(self):
        if self.vertex_count < 1:
            raise GeometryError("fiber needs at least one vertex")
        canon = []
        for u, v in self.edges:
            if not (0 <= u < self.vertex_count and 0 <= v < self.vertex_count):
                raise GeometryError(f"fiber edge ({u}, {v}) out of range")
            if u == v:
                raise GeometryError("fiber self-loop")
            canon.append((min(u, v), max(u, v)))
        if len(set(canon)) != len(canon):
            raise GeometryError("duplicate fiber edge")
        object.__setattr__(self, "edges", tuple(canon))
        comps = connected_components(self.vertex_count, canon)
        if len(comps) > 1:
            raise GeometryError(f"fiber graph is disconnected; components: {comps}")
        if not self.name:
            object.__setattr__(self, "name", f"S{self.vertex_count}e{len(canon)}")

    @classmethod
    def trivial(cls) -> FiberGraph:
        return cls(1, (), "trivial")

    @classmethod
    def path(cls, k: int) -> FiberGraph:
        """{0, ..., k-1} with nearest-neighbour edges; ``path(2)`` is K2."""
        return cls(k, tuple((i, i + 1) for i in range(k - 1)), "K2" if k == 2 else f"P{k}")

    @classmethod
    def complete(cls, k: int) -> FiberGraph:
        return cls(k, tuple((i, j) for i in range(k) for j in range(i + 1, k)), f"K{k}")

    @classmethod
    def from_text(cls, text: str, name: str = "") -> FiberGraph:
        """Parse the edge-list format: vertex count on the first line, then ``u v`` pairs."""
        lines = [ln.split("#", 1)[0].strip() for ln in text.splitlines()]
        lines = [ln for ln in lines if ln]
        if not lines:
            raise GeometryError("empty fiber description")
        try:
            n = int(lines[0])
            edges = tuple(tuple(int(t) for t in ln.split()) for ln in lines[1:])
        except ValueError as exc:
            raise GeometryError(f"malformed fiber edge list: {exc}") from None
        if any(len(e) != 2 for e in edges):
            raise GeometryError("each fiber edge line must hold exactly two integers")
        return cls(n, edges, name)

    @classmethod
    def load(cls, path) -> FiberGraph:
        with open(path) as fh:
            return cls.from_text(fh.read(), name=str(path))

    def to_text(self) -> str:
        return "\n".join([str(self.vertex_count)] + [f"{u} {v}" for u, v in self.edges]) + "\n"

    @cached_property
    def neighbours(self) -> tuple[tuple[int, ...], ...]:
        adj: list[list[int]] = [[] for _ in range(self.vertex_count)]
        for u, v in self.edges:
            adj[u].append(v)
            adj[v].append(u)
        return tuple(tuple(sorted(a)) for a in adj)

    @cached_property
    def _bfs_parents(self) -> tuple[tuple[int, ...], ...]:
        # parent[t][x] = predecessor of x on the BFS tree rooted at t
        parents = []
        for root in range(self.vertex_count):
            par = [-1] * self.vertex_count
            par[root] = root
            queue = deque([root])
            while queue:
                u = queue.popleft()
                for w in self.neighbours[u]:
                    if par[w] < 0:
                        par[w] = u
                        queue.append(w)
            parents.append(tuple(par))
        return tuple(parents)

    def geodesic(self, s: int, t: int) -> tuple[int, ...]:
        """The fixed geodesic [s, t]: BFS tree rooted at ``t``, lowest-index ties."""
        par = self._bfs_parents[t]
        out = [s]
        while out[-1] != t:
            out.append(par[out[-1]])
        return tuple(out)


def builtin_fiber(name: str) -> FiberGraph:
    name = name.strip()
    if name in ("trivial", "1", "S1"):
        return FiberGraph.trivial()
    if name.upper().startswith("K") and name[1:].isdigit():
        k = int(name[1:])
        return FiberGraph.path(2) if k == 2 else FiberGraph.complete(k)
    if name.upper().startswith("P") and name[1:].isdigit():
        return FiberGraph.path(int(name[1:]))
    raise GeometryError(f"unknown builtin fiber {name!r} (use trivial, K<k> or P<k>)")


# --------------------------------------------------------------------------
# base


@dataclass(frozen=True)
class BaseWindow:
    """The finite window ``[x0, x1] x [y0, y1]`` of Z^2 (inclusive bounds)."""

    x0: int
    x1: int
    y0: int
    y1: int

    def __post_init__(self):
        if self.x1 < self.x0 or self.y1 < self.y0:
            raise GeometryError(f"empty base window {self}")

    @classmethod
    def square(cls, radius: int) -> BaseWindow:
        return cls(-radius, radius, -radius, radius)

    @property
    def width(self) -> int:
        return self.x1 - self.x0 + 1

    @property
    def height(self) -> int:
        return self.y1 - self.y0 + 1

    @property
    def n_points(self) -> int:
        return self.width * self.height

    def __contains__(self, g) -> bool:
        x, y = g
        return self.x0 <= x <= self.x1 and self.y0 <= y <= self.y1

    def points(self) -> list[Point]:
        return [(x, y) for x in range(self.x0, self.x1 + 1) for y in range(self.y0, self.y1 + 1)]

    def edges(self) -> list[tuple[Point, Point]]:
        out = []
        for x, y in self.points():
            if x < self.x1:
                out.append(((x, y), (x + 1, y)))
            if y < self.y1:
                out.append(((x, y), (x, y + 1)))
        return out

    def index(self, g) -> int:
        return (g[0] - self.x0) * self.height + (g[1] - self.y0)

    def outer_ring(self) -> list[Point]:
        return [g for g in self.points()
                if g[0] in (self.x0, self.x1) or g[1] in (self.y0, self.y1)]


def l1(g, h) -> int:
    return abs(g[0] - h[0]) + abs(g[1] - h[1])


def base_ball(g, radius: int, window: BaseWindow | None = None) -> list[Point]:
    """B_R(g): points at l1 (= Z^2 graph) distance <= R, clipped to ``window``."""
    out = []
    for dx in range(-radius, radius + 1):
        r = radius - abs(dx)
        for dy in range(-r, r + 1):
            p = (g[0] + dx, g[1] + dy)
            if window is None or p in window:
                out.append(p)
    return out


def base_sphere(g, radius: int, window: BaseWindow | None = None) -> list[Point]:
    return [p for p in base_ball(g, radius, window) if l1(p, g) == radius]


def fatten(A: Iterable[Point], fiber: FiberGraph) -> set[tuple[Point, int]]:
    """The fattened set A x V_S."""
    return {(tuple(a), s) for a in A for s in range(fiber.vertex_count)}


# --------------------------------------------------------------------------
# slab


class SlabGraph(Graph):
    """The product of a base window of Z^2 with a fiber graph S.

    ``boundary`` is the fattened outer ring of the window, used for wired
    boundary conditions.
    """

    def __init__(self, base: BaseWindow, fiber: FiberGraph):
        self.base = base
        self.fiber = fiber
        ns, H = fiber.vertex_count, base.height
        npts = base.n_points
        xs = np.repeat(np.arange(base.x0, base.x1 + 1), H)
        ys = np.tile(np.arange(base.y0, base.y1 + 1), base.width)
        pid = np.arange(npts)

        fe = np.asarray(fiber.edges, dtype=np.int64).reshape(-1, 2)
        has_x = xs < base.x1
        has_y = ys < base.y1
        # per base point: [+x edges for each s] [+y edges for each s] [fiber edges]
        nx_ = np.where(has_x, ns, 0)
        ny_ = np.where(has_y, ns, 0)
        nf_ = np.full(npts, len(fe))
        per_point = nx_ + ny_ + nf_
        total = int(per_point.sum())
        start = np.zeros(npts + 1, dtype=np.int64)
        np.cumsum(per_point, out=start[1:])

        edges = np.empty((total, 2), dtype=np.int64)
        kind = np.empty(total, dtype=np.int8)
        fidx = np.empty(total, dtype=np.int64)
        s_ar = np.arange(ns)

        px = pid[has_x]
        ids = (start[px][:, None] + s_ar[None, :]).ravel()
        edges[ids, 0] = (px[:, None] * ns + s_ar[None, :]).ravel()
        edges[ids, 1] = ((px + H)[:, None] * ns + s_ar[None, :]).ravel()
        kind[ids] = BASE_X
        fidx[ids] = np.tile(s_ar, len(px))

        py = pid[has_y]
        ids = (start[py][:, None] + nx_[py][:, None] + s_ar[None, :]).ravel()
        edges[ids, 0] = (py[:, None] * ns + s_ar[None, :]).ravel()
        edges[ids, 1] = ((py + 1)[:, None] * ns + s_ar[None, :]).ravel()
        kind[ids] = BASE_Y
        fidx[ids] = np.tile(s_ar, len(py))

        if len(fe):
            k_ar = np.arange(len(fe))
            ids = (start[pid][:, None] + nx_[:, None] + ny_[:, None] + k_ar[None, :]).ravel()
            edges[ids, 0] = (pid[:, None] * ns + fe[None, :, 0]).ravel()
            edges[ids, 1] = (pid[:, None] * ns + fe[None, :, 1]).ravel()
            kind[ids] = FIBER
            fidx[ids] = np.tile(k_ar, npts)

        ring = ((xs == base.x0) | (xs == base.x1) | (ys == base.y0) | (ys == base.y1))
        boundary = (pid[ring][:, None] * ns + s_ar[None, :]).ravel()

        self.edge_kind = kind
        self.edge_fiber_index = fidx
        self._xs = xs
        self._ys = ys
        name = f"slab[{base.x0}..{base.x1}]x[{base.y0}..{base.y1}]x{fiber.name}"
        super().__init__(npts * ns, edges, boundary, name)

    # ----- index maps
    @property
    def fiber_size(self) -> int:
        return self.fiber.vertex_count

    def vertex(self, g, s: int) -> int:
        if g not in self.base:
            raise GeometryError(f"base point {g} outside the window")
        return self.base.index(g) * self.fiber_size + s

    def coords(self, v: int) -> tuple[Point, int]:
        pid, s = divmod(int(v), self.fiber_size)
        return (int(self._xs[pid]), int(self._ys[pid])), s

    def base_point(self, v: int) -> Point:
        return self.coords(v)[0]

    @cached_property
    def vertex_x(self) -> np.ndarray:
        return np.repeat(self._xs, self.fiber_size)

    @cached_property
    def vertex_y(self) -> np.ndarray:
        return np.repeat(self._ys, self.fiber_size)

    @cached_property
    def vertex_s(self) -> np.ndarray:
        return np.tile(np.arange(self.fiber_size), self.base.n_points)

    def edge_id(self, a: int, b: int) -> int:
        """Edge id of the edge joining vertex ids ``a`` and ``b``."""
        table = self.__dict__.get("_edge_lookup")
        if table is None:
            table = {(int(u), int(v)): i for i, (u, v) in enumerate(self.edges)}
            table.update({(v, u): i for (u, v), i in list(table.items())})
            self._edge_lookup = table
        try:
            return table[(int(a), int(b))]
        except KeyError:
            raise GeometryError(f"vertices {a} and {b} are not adjacent") from None

    # ----- sets
    def fatten_ids(self, A: Iterable[Point]) -> np.ndarray:
        pts = [tuple(a) for a in A]
        for a in pts:
            if a not in self.base:
                raise GeometryError(f"base point {a} outside the window")
        if not pts:
            return np.zeros(0, dtype=np.int64)
        pid = np.array([self.base.index(a) for a in pts], dtype=np.int64)
        ns = self.fiber_size
        return np.unique((pid[:, None] * ns + np.arange(ns)[None, :]).ravel())

    def column(self, g) -> np.ndarray:
        return self.fatten_ids([g])

    def base_mask(self, *, xr=None, yr=None) -> np.ndarray:
        """Vertex mask of the fattened base rectangle ``xr x yr`` (inclusive)."""
        x, y = self.vertex_x, self.vertex_y
        m = np.ones(self.n_vertices, dtype=np.bool_)
        if xr is not None:
            m &= (x >= xr[0]) & (x <= xr[1])
        if yr is not None:
            m &= (y >= yr[0]) & (y <= yr[1])
        return m

    def mask_of(self, A: Iterable[Point]) -> np.ndarray:
        m = np.zeros(self.n_vertices, dtype=np.bool_)
        m[self.fatten_ids(A)] = True
        return m

    def box(self, z, radius: int):
        """Box of size R around ``z`` (a slab vertex id, a (point, s) pair or a base point).

        Returns ``(Lambda_R(z), boundary)`` as sorted vertex-id arrays.
        """
        return box(self, z, radius)

    def project_edges(self) -> set[tuple[Point, Point]]:
        out = set()
        for u, v in self.edges:
            a, b = self.base_point(u), self.base_point(v)
            if a != b:
                out.add((min(a, b), max(a, b)))
        return out


def build_slab(base: BaseWindow, fiber: FiberGraph) -> SlabGraph:
    """Construct the slab window ``base x fiber`` (the fiber must be connected)."""
    if not isinstance(fiber, FiberGraph):
        raise GeometryError("fiber must be a FiberGraph")
    return SlabGraph(base, fiber)


def _base_of(graph: SlabGraph, z) -> Point:
    if isinstance(z, (int, np.integer)):
        return graph.base_point(int(z))
    z = tuple(z)
    if len(z) == 2 and isinstance(z[0], tuple):
        return tuple(z[0])
    return (int(z[0]), int(z[1]))


def box(graph: SlabGraph, z, radius: int):
    if radius < 0:
        raise GeometryError("box radius must be non-negative")
    g = _base_of(graph, z)
    ball = graph.fatten_ids(base_ball(g, radius, graph.base))
    sphere = graph.fatten_ids(base_sphere(g, radius, graph.base))
    return ball, sphere


# --------------------------------------------------------------------------
# rectangles


@dataclass(frozen=True)
class RectRegion:
    """Integer rectangle [a, b] x [c, d] of the base; fattened by the fiber when used on a slab."""

    a: int
    b: int
    c: int
    d: int
    fattened: bool = True

    def __post_init__(self):
        if not (self.a < self.b and self.c < self.d):
            raise GeometryError(f"rectangle needs a<b and c<d, got {self}")

    @classmethod
    def of_size(cls, width: int, height: int) -> RectRegion:
        """The rectangle [0, width] x [0, height] used by C_h(width, height)."""
        return cls(0, width, 0, height)

    @property
    def width(self) -> int:
        return self.b - self.a

    @property
    def height(self) -> int:
        return self.d - self.c

    def window(self, margin: int = 0) -> BaseWindow:
        return BaseWindow(self.a - margin, self.b + margin, self.c - margin, self.d + margin)

    def contains(self, g) -> bool:
        return self.a <= g[0] <= self.b and self.c <= g[1] <= self.d

    def points(self) -> list[Point]:
        return [(x, y) for x in range(self.a, self.b + 1) for y in range(self.c, self.d + 1)]

    def side(self, which: str) -> list[Point]:
        if which == "left":
            return [(self.a, y) for y in range(self.c, self.d + 1)]
        if which == "right":
            return [(self.b, y) for y in range(self.c, self.d + 1)]
        if which == "bottom":
            return [(x, self.c) for x in range(self.a, self.b + 1)]
        if which == "top":
            return [(x, self.d) for x in range(self.a, self.b + 1)]
        raise GeometryError(f"unknown side {which!r}")

    def crossing_sides(self, direction: str) -> tuple[str, str]:
        if direction in ("h", "horizontal"):
            return "left", "right"
        if direction in ("v", "vertical"):
            return "bottom", "top"
        raise GeometryError(f"unknown direction {direction!r}")

    def hard_direction(self) -> str:
        """Crossing across the long side; ties resolve to horizontal."""
        return "horizontal" if self.width >= self.height else "vertical"

    def easy_direction(self) -> str:
        return "vertical" if self.width >= self.height else "horizontal"

    # slab helpers
    def vertex_mask(self, graph: SlabGraph) -> np.ndarray:
        return graph.base_mask(xr=(self.a, self.b), yr=(self.c, self.d))

    def side_mask(self, graph: SlabGraph, which: str) -> np.ndarray:
        m = self.vertex_mask(graph)
        x, y = graph.vertex_x, graph.vertex_y
        if which == "left":
            return m & (x == self.a)
        if which == "right":
            return m & (x == self.b)
        if which == "bottom":
            return m & (y == self.c)
        if which == "top":
            return m & (y == self.d)
        raise GeometryError(f"unknown side {which!r}")


# --------------------------------------------------------------------------
# long range


@dataclass(frozen=True)
class CouplingJ:
    """Translation-invariant coupling J(x, y) = table[y - x], zero beyond l1 distance M."""

    table: dict = field(default_factory=dict)
    cutoff: int = 1

    def __post_init__(self):
        if self.cutoff < 1:
            raise GeometryError("coupling cutoff M must be >= 1")
        tab = {}
        for (dx, dy), val in dict(self.table).items():
            val = float(val)
            if val < 0:
                raise GeometryError(f"negative coupling at {(dx, dy)}")
            if val == 0:
                continue
            if (dx, dy) == (0, 0):
                raise GeometryError("self-coupling J(x, x) is not allowed")
            if abs(dx) + abs(dy) > self.cutoff:
                raise GeometryError(
                    f"J{(dx, dy)} = {val} is non-zero beyond the cutoff M={self.cutoff}")
            tab[(int(dx), int(dy))] = val
        for (dx, dy), val in tab.items():
            for img in ((-dx, -dy), (-dx, dy), (-dy, dx)):
                if not np.isclose(tab.get(img, 0.0), val, rtol=1e-12, atol=0.0):
                    raise GeometryError(
                        f"coupling is not symmetric: J{(dx, dy)}={val} but J{img}="
                        f"{tab.get(img, 0.0)}")
        object.__setattr__(self, "table", tab)

    @classmethod
    def nearest_neighbour(cls, value: float = 1.0) -> CouplingJ:
        return cls({(1, 0): value, (-1, 0): value, (0, 1): value, (0, -1): value}, 1)

    @classmethod
    def radial(cls, values: dict[int, float]) -> CouplingJ:
        """J depending only on the l1 distance: ``values[r]`` for 1 <= r <= M."""
        M = max(values)
        tab = {}
        for dx in range(-M, M + 1):
            for dy in range(-M, M + 1):
                r = abs(dx) + abs(dy)
                if 1 <= r <= M and values.get(r, 0.0):
                    tab[(dx, dy)] = values[r]
        return cls(tab, M)

    def __call__(self, g, h) -> float:
        return self.table.get((h[0] - g[0], h[1] - g[1]), 0.0)


class WeightedGraph(Graph):
    """Base window with an edge for every pair at positive coupling."""

    def __init__(self, base: BaseWindow, coupling: CouplingJ):
        self.base = base
        self.coupling = coupling
        pts = base.points()
        edges, vals = [], []
        for i, g in enumerate(pts):
            for j in range(i + 1, len(pts)):
                J = coupling(g, pts[j])
                if J > 0:
                    edges.append((i, j))
                    vals.append(J)
        self.couplings = np.asarray(vals, dtype=float)
        ring = [base.index(g) for g in base.outer_ring()]
        super().__init__(len(pts), np.asarray(edges, dtype=np.int64).reshape(-1, 2), ring,
                         f"longrange[{base.x0}..{base.x1}]x[{base.y0}..{base.y1}]M{coupling.cutoff}")

    def vertex(self, g) -> int:
        return self.base.index(g)

    def edge_probabilities(self, beta: float) -> np.ndarray:
        """Per-edge p_e = 1 - exp(-beta J_e), the product-form edge weights of the measure."""
        return -np.expm1(-beta * self.couplings)


def build_long_range(base: BaseWindow, coupling: CouplingJ) -> WeightedGraph:
    if not isinstance(coupling, CouplingJ):
        raise GeometryError("coupling must be a CouplingJ")
    return WeightedGraph(base, coupling)


# --------------------------------------------------------------------------
# builtin tiny graphs (small enough for exact enumeration)


def _plain(n: int, edges, boundary, name: str) -> Graph:
    return Graph(n, edges, boundary, name)


def builtin_graphs() -> dict[str, Graph]:
    """A fixed suite of small graphs, keyed by name, all with at most 12 edges."""
    out: dict[str, Graph] = {}

    def add(g: Graph, name: str):
        g.name = name
        out[name] = g

    add(build_slab(BaseWindow(0, 1, 0, 0), FiberGraph.trivial()), "edge")
    add(build_slab(BaseWindow(0, 2, 0, 0), FiberGraph.trivial()), "path3")
    add(_plain(3, [(0, 1), (1, 2), (0, 2)], (0,), "triangle"), "triangle")
    add(build_slab(BaseWindow(0, 1, 0, 1), FiberGraph.trivial()), "square")
    add(_plain(4, [(0, 1), (1, 2), (2, 3), (0, 3), (0, 2)], (0, 2), "diamond"), "diamond")
    add(_plain(4, [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)], (0,), "K4"), "K4")
    add(build_slab(BaseWindow(0, 2, 0, 1), FiberGraph.trivial()), "grid3x2")
    add(build_slab(BaseWindow(0, 2, 0, 0), FiberGraph.path(2)), "ladder3")
    add(build_slab(BaseWindow(0, 1, 0, 0), FiberGraph.complete(3)), "prism")
    add(build_slab(BaseWindow(0, 1, 0, 1), FiberGraph.path(2)), "cube2x2_K2")
    add(build_slab(BaseWindow(0, 2, 0, 2), FiberGraph.trivial()), "grid3x3")
    add(build_long_range(BaseWindow(0, 1, 0, 1), CouplingJ.radial({1: 1.0, 2: 0.5})),
        "longrange2x2")
    return out


def builtin_graph(name: str) -> Graph:
    graphs = builtin_graphs()
    if name not in graphs:
        raise GeometryError(f"unknown builtin graph {name!r}; choose from {sorted(graphs)}")
    return graphs[name]
