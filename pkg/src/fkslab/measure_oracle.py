"""Exact random-cluster and Potts quantities on tiny graphs by full enumeration.

Configuration ``c`` in ``range(2**E)`` is the edge configuration whose edge
``e`` is open iff bit ``e`` of ``c`` is set.  Everything here is brute force on
purpose: these functions are the ground truth the samplers are tested against.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np
from numba import njit

from . import _kernels as K
from .geometry import Graph, WeightedGraph

DEFAULT_EDGE_CAP = 24
HAMMING_EDGE_CAP = 22
DEFAULT_STATE_CAP = 2 ** 20
CHUNK = 1 << 15


class EnumerationCapError(RuntimeError):
    """Requested enumeration exceeds the configured size cap."""


# --------------------------------------------------------------------------
# parameters


@dataclass(frozen=True)
class ModelParams:
    """Edge weight ``p`` (scalar or per-edge), cluster weight ``q`` and boundary condition."""

    p: float | np.ndarray
    q: float
    boundary: str = "free"

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float)
        if np.any(~np.isfinite(p)) or np.any(p < 0) or np.any(p > 1):
            raise ValueError(f"p must lie in [0, 1], got {self.p}")
        if not (np.isfinite(self.q) and self.q >= 1):
            raise ValueError(f"q must be >= 1, got {self.q}")
        if self.boundary not in ("free", "wired"):
            raise ValueError(f"boundary must be 'free' or 'wired', got {self.boundary!r}")
        if p.ndim == 0:
            object.__setattr__(self, "p", float(p))
        else:
            object.__setattr__(self, "p", p.copy())

    @classmethod
    def long_range(cls, graph: WeightedGraph, beta: float, q: float,
                   boundary: str = "free") -> ModelParams:
        """Per-edge p_e = 1 - exp(-beta J_e) equivalent to the product (e^{beta J}-1) weights."""
        if beta < 0:
            raise ValueError("beta must be non-negative")
        return cls(graph.edge_probabilities(beta), q, boundary)

    @property
    def wired(self) -> bool:
        return self.boundary == "wired"

    @property
    def is_uniform(self) -> bool:
        return np.ndim(self.p) == 0

    def p_edges(self, graph: Graph) -> np.ndarray:
        if self.is_uniform:
            return np.full(graph.n_edges, float(self.p))
        pe = np.asarray(self.p, dtype=float)
        if pe.shape != (graph.n_edges,):
            raise ValueError(f"per-edge p has shape {pe.shape}, graph has {graph.n_edges} edges")
        return pe

    def with_p(self, p) -> ModelParams:
        return ModelParams(p, self.q, self.boundary)

    def describe(self) -> str:
        p = f"{self.p:g}" if self.is_uniform else "per-edge"
        return f"p={p} q={self.q:g} bc={self.boundary}"


def es_p_of_beta(beta: float, q: float) -> float:
    """Edge weight of the Edwards-Sokal coupling at inverse temperature ``beta``."""
    if q <= 1:
        raise ValueError("the Potts coupling needs q > 1")
    if beta < 0:
        raise ValueError("beta must be non-negative")
    return -math.expm1(-q * beta / (q - 1))


# --------------------------------------------------------------------------
# single configurations


def _as_bits(graph: Graph, omega) -> np.ndarray:
    bits = np.asarray(omega).astype(np.uint8).ravel()
    if bits.shape != (graph.n_edges,):
        raise ValueError(f"configuration has {bits.size} entries, graph has {graph.n_edges} edges")
    return bits


def cluster_count(graph: Graph, omega, boundary: str = "free") -> int:
    """k(omega): number of clusters, isolated vertices included.

    Under ``boundary='wired'`` all of ``graph.boundary`` counts as one cluster.
    """
    bits = _as_bits(graph, omega)
    return int(K.count_clusters(graph.n_vertices, graph.eu, graph.ev, bits,
                                graph.boundary_mask, boundary == "wired"))


def config_weight(graph: Graph, omega, params: ModelParams) -> float:
    """Unnormalised weight p^o (1-p)^c q^k, with per-edge p when given."""
    bits = _as_bits(graph, omega).astype(bool)
    pe = params.p_edges(graph)
    k = cluster_count(graph, bits, params.boundary)
    return float(np.prod(np.where(bits, pe, 1.0 - pe)) * params.q ** k)


def long_range_weight(graph: WeightedGraph, omega, beta: float, q: float,
                      boundary: str = "free") -> float:
    """Unnormalised long-range weight prod_e (e^{beta J_e} - 1)^{omega(e)} q^k."""
    bits = _as_bits(graph, omega).astype(bool)
    k = cluster_count(graph, bits, boundary)
    return float(np.prod(np.expm1(beta * graph.couplings[bits])) * q ** k)


# --------------------------------------------------------------------------
# batches and events


class ConfigBatch:
    """A contiguous range of enumerated configurations, with cached labellings."""

    def __init__(self, graph: Graph, start: int, count: int):
        self.graph = graph
        self.start = start
        self.indices = np.arange(start, start + count, dtype=np.int64)
        self._bits = None
        self._labels: dict = {}

    def __len__(self):
        return len(self.indices)

    @property
    def bits(self) -> np.ndarray:
        if self._bits is None:
            shifts = np.arange(self.graph.n_edges, dtype=np.int64)
            self._bits = ((self.indices[:, None] >> shifts[None, :]) & 1).astype(np.uint8)
        return self._bits

    def labels(self, edge_mask=None) -> np.ndarray:
        """(N, V) component labels using only the edges selected by ``edge_mask``."""
        E = self.graph.n_edges
        if edge_mask is None:
            active = (1 << E) - 1
        else:
            em = np.asarray(edge_mask, dtype=bool)
            active = int(sum(1 << int(e) for e in np.flatnonzero(em)))
        if active not in self._labels:
            self._labels[active] = K.enum_labels(self.graph.n_vertices, self.graph.eu,
                                                 self.graph.ev, self.start, len(self),
                                                 np.int64(active))
        return self._labels[active]


class Event:
    """A set of edge configurations, evaluated on batches.

    ``monotone`` records a claimed direction ('increasing' / 'decreasing'); the
    inequality checks verify such claims by a single-bit-flip scan.
    """

    def __init__(self, fn: Callable[[ConfigBatch], np.ndarray], name: str = "event",
                 monotone: str | None = None):
        self._fn = fn
        self.name = name
        self.monotone = monotone

    def __call__(self, batch: ConfigBatch) -> np.ndarray:
        return np.asarray(self._fn(batch), dtype=bool)

    def __and__(self, other):
        mono = self.monotone if self.monotone == other.monotone else None
        return Event(lambda b: self(b) & other(b), f"({self.name} & {other.name})", mono)

    def __or__(self, other):
        mono = self.monotone if self.monotone == other.monotone else None
        return Event(lambda b: self(b) | other(b), f"({self.name} | {other.name})", mono)

    def __invert__(self):
        flip = {"increasing": "decreasing", "decreasing": "increasing"}.get(self.monotone)
        return Event(lambda b: ~self(b), f"not {self.name}", flip)

    def __repr__(self):
        return f"Event({self.name!r})"

    @classmethod
    def from_predicate(cls, fn: Callable[[np.ndarray], bool], name: str = "predicate",
                       monotone: str | None = None) -> Event:
        """Wrap a per-configuration predicate ``fn(omega_bits) -> bool``."""
        def run(batch):
            return np.fromiter((bool(fn(row)) for row in batch.bits.astype(bool)),
                               dtype=bool, count=len(batch))
        return cls(run, name, monotone)

    @classmethod
    def from_table(cls, table, name: str = "table", monotone: str | None = None) -> Event:
        tab = np.asarray(table, dtype=bool)
        return cls(lambda b: tab[b.indices], name, monotone)


def always() -> Event:
    return Event(lambda b: np.ones(len(b), dtype=bool), "always", "increasing")


def edge_open(e: int) -> Event:
    return Event(lambda b: ((b.indices >> e) & 1).astype(bool), f"open[{e}]", "increasing")


def all_open(edges: Iterable[int]) -> Event:
    mask = int(sum(1 << int(e) for e in edges))
    return Event(lambda b: (b.indices & mask) == mask, f"all_open{sorted(edges)}", "increasing")


def any_open(edges: Iterable[int]) -> Event:
    mask = int(sum(1 << int(e) for e in edges))
    return Event(lambda b: (b.indices & mask) != 0, f"any_open{sorted(edges)}", "increasing")


def open_count_at_least(edges: Iterable[int], k: int) -> Event:
    edges = [int(e) for e in edges]

    def run(b):
        cnt = np.zeros(len(b), dtype=np.int64)
        for e in edges:
            cnt += (b.indices >> e) & 1
        return cnt >= k
    return Event(run, f"open_count{edges}>={k}", "increasing")


def _mask(n: int, vertices) -> np.ndarray:
    m = np.zeros(n, dtype=np.bool_)
    if isinstance(vertices, np.ndarray) and vertices.dtype == np.bool_:
        m[:] = vertices
    else:
        idx = np.asarray(list(vertices) if not isinstance(vertices, np.ndarray) else vertices,
                         dtype=np.int64)
        m[idx] = True
    return m


def connection(graph: Graph, A, B, within=None, name: str | None = None) -> Event:
    """A <-> B by an open path whose vertices all lie in ``within`` (default: everything)."""
    n = graph.n_vertices
    dmask = np.ones(n, dtype=np.bool_) if within is None else _mask(n, within)
    amask = _mask(n, A) & dmask
    bmask = _mask(n, B) & dmask
    edge_mask = None if within is None else graph.edges_within(dmask)

    def run(b):
        return K.sets_joined(b.labels(edge_mask), amask, bmask)
    return Event(run, name or "connection", "increasing")


def two_point(graph: Graph, x: int, y: int) -> Event:
    return connection(graph, [x], [y], name=f"{x}<->{y}")


# --------------------------------------------------------------------------
# enumeration engine


class ExactOracle:
    """Full enumeration over {0,1}^E for one graph and boundary condition.

    The cluster count of every configuration is computed once and cached, so
    several parameter values and events can be evaluated cheaply.
    """

    def __init__(self, graph: Graph, boundary: str = "free", cap: int = DEFAULT_EDGE_CAP):
        if graph.n_edges > cap:
            raise EnumerationCapError(
                f"{graph.n_edges} edges exceed the enumeration cap of {cap}")
        if graph.n_edges > 62:
            raise EnumerationCapError("configuration indices must fit in 63 bits")
        self.graph = graph
        self.boundary = boundary
        self.n_configs = 1 << graph.n_edges
        self.k = K.enum_cluster_counts(graph.n_vertices, graph.eu, graph.ev, 0,
                                       self.n_configs, graph.boundary_mask,
                                       boundary == "wired").astype(np.int16)
        self.open_count = _popcounts(graph.n_edges)

    def batches(self, chunk: int = CHUNK):
        for start in range(0, self.n_configs, chunk):
            yield ConfigBatch(self.graph, start, min(chunk, self.n_configs - start))

    def weights(self, params: ModelParams) -> np.ndarray:
        """Unnormalised weights of all configurations, indexed by configuration."""
        if params.boundary != self.boundary:
            raise ValueError("params.boundary does not match the oracle's boundary condition")
        q = float(params.q)
        qk = np.power(q, self.k.astype(float))
        if params.is_uniform:
            p = float(params.p)
            o = self.open_count.astype(float)
            base = np.power(p, o) * np.power(1.0 - p, self.graph.n_edges - o)
        else:
            pe = params.p_edges(self.graph)
            base = np.ones(self.n_configs)
            idx = np.arange(self.n_configs, dtype=np.int64)
            for e in range(self.graph.n_edges):
                base *= np.where((idx >> e) & 1, pe[e], 1.0 - pe[e])
        return base * qk

    def partition_function(self, params: ModelParams) -> float:
        return math.fsum(self.weights(params))

    def table(self, event) -> np.ndarray:
        """Membership of every configuration in ``event``."""
        if isinstance(event, np.ndarray):
            if event.shape != (self.n_configs,):
                raise ValueError("membership table has the wrong length")
            return event.astype(bool)
        ev = as_event(event)
        out = np.empty(self.n_configs, dtype=bool)
        for b in self.batches():
            out[b.start:b.start + len(b)] = ev(b)
        return out

    def probability(self, event, params: ModelParams) -> float:
        w = self.weights(params)
        tab = self.table(event)
        return math.fsum(w[tab]) / math.fsum(w)

    def distribution(self, params: ModelParams) -> np.ndarray:
        w = self.weights(params)
        return w / math.fsum(w)

    def single_edge_conditionals(self, params: ModelParams) -> np.ndarray:
        """phi(omega(e)=1 | rest) for every (configuration with e closed, e): shape (2^E/2 * E,)."""
        w = self.weights(params)
        idx = np.arange(self.n_configs, dtype=np.int64)
        out = []
        for e in range(self.graph.n_edges):
            closed = idx[((idx >> e) & 1) == 0]
            a, b = w[closed | (1 << e)], w[closed]
            tot = a + b
            out.append(np.divide(a, tot, out=np.full_like(a, np.nan), where=tot > 0))
        return np.concatenate(out) if out else np.zeros(0)


@njit(cache=True)
def _popcount_table(n_bits):
    N = 1 << n_bits
    out = np.zeros(N, dtype=np.int8)
    for c in range(1, N):
        out[c] = out[c >> 1] + (c & 1)
    return out


def _popcounts(n_bits: int) -> np.ndarray:
    return _popcount_table(n_bits)


def as_event(event) -> Event:
    if isinstance(event, Event):
        return event
    if callable(event):
        return Event.from_predicate(event)
    raise TypeError(f"cannot interpret {event!r} as an event")


_ORACLES: dict = {}


def oracle_for(graph: Graph, boundary: str = "free", cap: int = DEFAULT_EDGE_CAP) -> ExactOracle:
    """Cached :class:`ExactOracle` per (graph, boundary)."""
    if graph.n_edges > cap:
        raise EnumerationCapError(f"{graph.n_edges} edges exceed the enumeration cap of {cap}")
    key = (graph.graph_hash, boundary)
    if key not in _ORACLES:
        if len(_ORACLES) > 16:
            _ORACLES.clear()
        _ORACLES[key] = ExactOracle(graph, boundary, cap=max(cap, graph.n_edges))
    return _ORACLES[key]


def partition_function(graph: Graph, params: ModelParams, cap: int = DEFAULT_EDGE_CAP) -> float:
    """Z = sum of config_weight over all 2^E configurations."""
    return oracle_for(graph, params.boundary, cap).partition_function(params)


def exact_event_probability(graph: Graph, params: ModelParams, event,
                            cap: int = DEFAULT_EDGE_CAP) -> float:
    return oracle_for(graph, params.boundary, cap).probability(event, params)


def exact_expectation(graph: Graph, params: ModelParams, values: np.ndarray,
                      cap: int = DEFAULT_EDGE_CAP) -> float:
    """Expectation of a function given as a table over configuration indices."""
    dist = oracle_for(graph, params.boundary, cap).distribution(params)
    return float(np.dot(dist, values))


# --------------------------------------------------------------------------
# Potts


def potts_dot(a, b, q: int):
    """Scalar product of the simplex vectors labelled by colours a and b."""
    return np.where(np.asarray(a) == np.asarray(b), 1.0, -1.0 / (q - 1))


def exact_potts_two_point(graph: Graph, q: int, beta: float, x: int, y: int,
                          couplings=None, cap: int = DEFAULT_STATE_CAP) -> float:
    """E[sigma_x . sigma_y] under exp(-beta H), H = -sum_edges J_e sigma_u . sigma_v."""
    if int(q) != q or q < 2:
        raise ValueError("the Potts model needs an integer q >= 2")
    q = int(q)
    n = graph.n_vertices
    if q ** n > cap:
        raise EnumerationCapError(f"{q}^{n} spin states exceed the cap of {cap}")
    if x == y:
        return 1.0
    J = np.ones(graph.n_edges) if couplings is None else np.asarray(couplings, dtype=float)
    num = []
    den = []
    total = q ** n
    powers = q ** np.arange(n, dtype=np.int64)
    # energies are bounded by sum |J|, shift before exponentiating
    shift = beta * float(np.abs(J).sum())
    for start in range(0, total, CHUNK):
        idx = np.arange(start, min(start + CHUNK, total), dtype=np.int64)
        spins = (idx[:, None] // powers[None, :]) % q
        dots = potts_dot(spins[:, graph.eu], spins[:, graph.ev], q)
        logw = beta * (dots @ J) - shift
        w = np.exp(logw)
        num.append(w * potts_dot(spins[:, x], spins[:, y], q))
        den.append(w)
    return math.fsum(np.concatenate(num)) / math.fsum(np.concatenate(den))


# --------------------------------------------------------------------------
# Hamming distances


def hamming_table(member: np.ndarray, n_bits: int) -> np.ndarray:
    """H_A(omega) for every configuration; ``n_bits + 1`` when A is empty."""
    if n_bits > HAMMING_EDGE_CAP:
        raise EnumerationCapError(f"Hamming tables are capped at {HAMMING_EDGE_CAP} edges")
    member = np.ascontiguousarray(member, dtype=np.bool_)
    if member.shape != (1 << n_bits,):
        raise ValueError("membership table has the wrong length")
    return K.hamming_to_set(member, n_bits)


def brute_force_hamming(member: np.ndarray, n_bits: int) -> np.ndarray:
    """Literal minimum of popcount(omega xor omega') over all omega' in A (tiny n only)."""
    if n_bits > 14:
        raise EnumerationCapError("literal brute force is limited to 14 edges")
    targets = np.flatnonzero(member)
    out = np.full(1 << n_bits, n_bits + 1, dtype=np.int64)
    if len(targets) == 0:
        return out
    pc = _popcounts(n_bits).astype(np.int64)
    for c in range(1 << n_bits):
        out[c] = pc[c ^ targets].min()
    return out


def monotonicity(member: np.ndarray, n_bits: int) -> str | None:
    """'increasing', 'decreasing', 'constant' or None, from a single-bit-flip scan."""
    member = np.asarray(member, dtype=bool)
    idx = np.arange(1 << n_bits, dtype=np.int64)
    up = down = True
    for e in range(n_bits):
        low = idx[((idx >> e) & 1) == 0]
        a, b = member[low], member[low | (1 << e)]
        up &= not np.any(a & ~b)
        down &= not np.any(b & ~a)
    if up and down:
        return "constant"
    return "increasing" if up else "decreasing" if down else None


# --------------------------------------------------------------------------
# monotone event families


@njit(cache=True)
def _extend_monotone(prev, half_bits):
    n = prev.shape[0]
    cnt = 0
    for i in range(n):
        for j in range(n):
            if prev[j] & ~prev[i] == 0:
                cnt += 1
    out = np.empty(cnt, dtype=np.uint64)
    k = 0
    for i in range(n):          # f1 = prev[i] (top variable set)
        for j in range(n):      # f0 = prev[j] (top variable clear), f0 <= f1
            if prev[j] & ~prev[i] == 0:
                out[k] = prev[j] | (prev[i] << np.uint64(half_bits))
                k += 1
    return out


def all_increasing_tables(n_bits: int) -> np.ndarray:
    """Truth tables (bit c = membership of configuration c) of every up-set of {0,1}^n.

    Their number is the Dedekind number M(n): 2, 3, 6, 20, 168, 7581, 7828354.
    """
    if not 0 <= n_bits <= 6:
        raise EnumerationCapError("monotone families are enumerated for at most 6 edges")
    tabs = np.array([0, 1], dtype=np.uint64)
    for m in range(1, n_bits + 1):
        tabs = _extend_monotone(tabs, np.uint64(1 << (m - 1)))
    return np.sort(tabs)


def table_to_member(table: int, n_bits: int) -> np.ndarray:
    c = np.arange(1 << n_bits, dtype=np.uint64)
    return ((np.uint64(table) >> c) & np.uint64(1)).astype(bool)


# --------------------------------------------------------------------------
# inequality suite


REL_TOL = 1e-12


@dataclass
class CheckRow:
    check_name: str
    graph_id: str
    lhs: float
    rhs: float
    margin: float
    passed: bool
    detail: str = ""

    def csv_fields(self):
        return [self.check_name, self.graph_id, repr(self.lhs), repr(self.rhs),
                repr(self.margin), "1" if self.passed else "0"]


@dataclass
class InequalityReport:
    rows: list[CheckRow] = field(default_factory=list)
    events_checked: int = 0

    @property
    def violations(self) -> list[CheckRow]:
        return [r for r in self.rows if not r.passed]

    @property
    def ok(self) -> bool:
        return not self.violations

    def extend(self, other: InequalityReport):
        self.rows.extend(other.rows)
        self.events_checked += other.events_checked

    CSV_HEADER = ("check_name", "graph_id", "lhs", "rhs", "margin", "pass")


def _geq(lhs: float, rhs: float) -> tuple[float, bool]:
    """Margin of ``lhs >= rhs`` relative to the larger magnitude."""
    scale = max(abs(lhs), abs(rhs), 1e-300)
    margin = (lhs - rhs) / scale
    return margin, margin >= -REL_TOL


def bernoulli_constant(p: float, p2: float, q: float) -> float:
    """C = q^2 (1-p) / ((p'-p)(p' + q(1-p)))."""
    return q * q * (1 - p) / ((p2 - p) * (p2 + q * (1 - p)))


def _check_params(p, p2, q):
    if not (0 < p < p2 < 1):
        raise ValueError("need 0 < p < p' < 1")
    if q < 1:
        raise ValueError("need q >= 1")


def verify_inequalities(graph: Graph, p: float, p2: float, q: float,
                        events: Sequence, ks: Sequence[int] = (0, 1, 2),
                        boundary: str = "free", graph_id: str | None = None,
                        cap: int = HAMMING_EDGE_CAP) -> InequalityReport:
    """Exact check of the Hamming-distance, change-of-p and finite-energy inequalities.

    ``events`` holds :class:`Event` objects or membership tables.  Increasing
    events get the increasing-event checks, decreasing ones the decreasing
    analogue; a claimed monotonicity that fails the flip scan is reported as a
    failed ``monotone_claim`` row rather than trusted.
    """
    _check_params(p, p2, q)
    gid = graph_id or graph.name
    orc = oracle_for(graph, boundary, cap)
    E = graph.n_edges
    d1 = orc.distribution(ModelParams(p, q, boundary))
    d2 = orc.distribution(ModelParams(p2, q, boundary))
    C = bernoulli_constant(p, p2, q)
    rep = InequalityReport()
    rep.rows.extend(finite_energy_rows(orc, (p, p2), q, gid))
    for i, ev in enumerate(events):
        name = getattr(ev, "name", f"event{i}")
        claim = getattr(ev, "monotone", None)
        member = orc.table(ev)
        kind = monotonicity(member, E)
        if claim is not None and kind not in (claim, "constant"):
            rep.rows.append(CheckRow("monotone_claim", gid, 0.0, 0.0, -1.0, False,
                                     f"{name} claimed {claim}, scan says {kind}"))
            continue
        if not member.any() or kind is None:
            continue
        rep.events_checked += 1
        H = hamming_table(member, E).astype(float)
        a1, a2 = math.fsum(d1[member]), math.fsum(d2[member])
        if kind in ("increasing", "constant"):
            rhs = a1 * math.exp(4 * (p2 - p) * float(d2 @ H))
            m, ok = _geq(a2, rhs)
            rep.rows.append(CheckRow("hamming_increasing", gid, a2, rhs, m, ok, name))
            m, ok = _geq(a2, a1)
            rep.rows.append(CheckRow("monotone_in_p", gid, a2, a1, m, ok, name))
            for k in ks:
                lhs = math.fsum(d1[H <= k])
                rhs = C ** k * a2
                m, ok = _geq(rhs, lhs)
                rep.rows.append(CheckRow(f"hamming_ball_k{k}", gid, lhs, rhs, m, ok, name))
        if kind in ("decreasing", "constant"):
            rhs = a1 * math.exp(-4 * (p2 - p) * float(d1 @ H))
            m, ok = _geq(rhs, a2)
            rep.rows.append(CheckRow("hamming_decreasing", gid, a2, rhs, m, ok, name))
    return rep


def finite_energy_rows(orc: ExactOracle, ps: Iterable[float], q: float, gid: str):
    rows = []
    for p in ps:
        cond = orc.single_edge_conditionals(ModelParams(p, q, orc.boundary))
        cond = cond[np.isfinite(cond)]
        lo_bound = p / (p + q * (1 - p))
        lo, hi = float(cond.min()), float(cond.max())
        m1, ok1 = _geq(lo, lo_bound)
        m2, ok2 = _geq(p, hi)
        rows.append(CheckRow("finite_energy_lower", gid, lo, lo_bound, m1, ok1, f"p={p:g}"))
        rows.append(CheckRow("finite_energy_upper", gid, hi, p, m2, ok2, f"p={p:g}"))
    return rows


@njit(cache=True)
def _family_kernel(tables, n_bits, d1, d2, p, p2, C, ks, decreasing, out_margin, out_lhs,
                   out_rhs, out_bad):
    """Worst relative margins over a family of monotone events given as truth tables.

    Check slots: 0 hamming inequality, 1 monotone in p, 2.. Hamming ball for ks.
    """
    N = 1 << n_bits
    full = np.uint64(0xFFFFFFFFFFFFFFFF) if N == 64 else np.uint64((1 << N) - 1)
    member = np.zeros(N, dtype=np.bool_)
    nchk = out_margin.shape[0]
    for t in range(tables.shape[0]):
        tab = tables[t]
        if decreasing:
            tab = ~tab & full
        if tab == 0:
            continue
        for c in range(N):
            member[c] = (tab >> np.uint64(c)) & np.uint64(1)
        H = K.hamming_to_set(member, n_bits)
        a1 = 0.0
        a2 = 0.0
        h1 = 0.0
        h2 = 0.0
        for c in range(N):
            if member[c]:
                a1 += d1[c]
                a2 += d2[c]
            h1 += d1[c] * H[c]
            h2 += d2[c] * H[c]
        for slot in range(nchk):
            if slot == 0:
                if decreasing:
                    lhs = a1 * np.exp(-4.0 * (p2 - p) * h1)
                    rhs = a2
                else:
                    lhs = a2
                    rhs = a1 * np.exp(4.0 * (p2 - p) * h2)
            elif slot == 1:
                if decreasing:
                    lhs = a1
                    rhs = a2
                else:
                    lhs = a2
                    rhs = a1
            else:
                if decreasing:
                    continue
                k = ks[slot - 2]
                ball = 0.0
                for c in range(N):
                    if H[c] <= k:
                        ball += d1[c]
                lhs = C ** k * a2
                rhs = ball
            scale = max(abs(lhs), abs(rhs), 1e-300)
            m = (lhs - rhs) / scale
            if m < out_margin[slot]:
                out_margin[slot] = m
                out_lhs[slot] = lhs
                out_rhs[slot] = rhs
            if m < -1e-12:
                out_bad[slot] += 1


def verify_monotone_family(graph: Graph, p: float, p2: float, q: float,
                           ks: Sequence[int] = (0, 1, 2), boundary: str = "free",
                           graph_id: str | None = None,
                           tables: np.ndarray | None = None) -> InequalityReport:
    """Run the inequality checks over *every* increasing and decreasing event of a graph.

    Reports one row per check with the worst margin over the family.  Limited
    to 6 edges (7 828 354 up-sets).
    """
    _check_params(p, p2, q)
    gid = graph_id or graph.name
    E = graph.n_edges
    if tables is None:
        tables = all_increasing_tables(E)
    orc = oracle_for(graph, boundary)
    d1 = orc.distribution(ModelParams(p, q, boundary))
    d2 = orc.distribution(ModelParams(p2, q, boundary))
    C = bernoulli_constant(p, p2, q)
    ks_arr = np.asarray(ks, dtype=np.int64)
    rep = InequalityReport()
    rep.rows.extend(finite_energy_rows(orc, (p, p2), q, gid))
    names_inc = ["hamming_increasing", "monotone_in_p"] + [f"hamming_ball_k{k}" for k in ks]
    names_dec = ["hamming_decreasing", "monotone_in_p_decreasing"]
    for decreasing, names in ((False, names_inc), (True, names_dec)):
        n = len(names_inc)
        marg = np.full(n, np.inf)
        lhs = np.zeros(n)
        rhs = np.zeros(n)
        bad = np.zeros(n, dtype=np.int64)
        _family_kernel(tables, E, d1, d2, p, p2, C, ks_arr, decreasing, marg, lhs, rhs, bad)
        for slot, nm in enumerate(names):
            rep.rows.append(CheckRow(nm, gid, float(lhs[slot]), float(rhs[slot]),
                                     float(marg[slot]), bool(bad[slot] == 0),
                                     f"{len(tables)} events, {int(bad[slot])} violations, "
                                     f"q={q:g}"))
    full = np.uint64((1 << (1 << E)) - 1) if E < 6 else np.uint64(0xFFFFFFFFFFFFFFFF)
    rep.events_checked = int(np.count_nonzero(tables)) + int(np.count_nonzero(tables != full))
    return rep


# --------------------------------------------------------------------------
# builtin verification suite


def standard_events(graph: Graph) -> list[Event]:
    """A handful of increasing events every graph supports: single edges, all/any of the
    first edges, and the two-point connection between the first and last vertex."""
    E = graph.n_edges
    evs = [edge_open(0), all_open(range(min(E, 2))), any_open(range(min(E, 3))),
           open_count_at_least(range(E), max(1, E // 2))]
    if graph.n_vertices > 1:
        evs.append(two_point(graph, 0, graph.n_vertices - 1))
    return evs


def verify_builtin_suite(families: bool = True, potts: bool = True) -> InequalityReport:
    """Exact checks on the builtin tiny graphs.

    * edge marginals equals p at q = 1 (product measure);
    * the Edwards-Sokal identity between two-point functions (graphs up to 10 edges);
    * finite energy and the Hamming / change-of-p inequalities on standard events;
    * with ``families``, the inequalities over every monotone event of the 4-edge
      and 6-edge graphs.
    """
    from .geometry import builtin_graphs
    rep = InequalityReport()
    graphs = builtin_graphs()
    for name, g in graphs.items():
        if isinstance(g, WeightedGraph):
            mp = ModelParams.long_range(g, 0.7, 1.0)
            orc = oracle_for(g)
            for e in range(g.n_edges):
                got = orc.probability(edge_open(e), mp)
                rep.rows.append(CheckRow("product_marginal", name, got, float(mp.p[e]),
                                         -abs(got - mp.p[e]), abs(got - mp.p[e]) <= 1e-12,
                                         f"edge {e}"))
            continue
        orc = oracle_for(g)
        for e in range(g.n_edges):
            got = orc.probability(edge_open(e), ModelParams(0.3, 1.0))
            rep.rows.append(CheckRow("product_marginal", name, got, 0.3, -abs(got - 0.3),
                                     abs(got - 0.3) <= 1e-12, f"edge {e}"))
        if potts and g.n_edges <= 10 and g.n_vertices > 1:
            x, y = 0, g.n_vertices - 1
            for q in (2, 3):
                for beta in (0.2, 1.0):
                    fk = orc.probability(two_point(g, x, y),
                                         ModelParams(es_p_of_beta(beta, q), float(q)))
                    sp = exact_potts_two_point(g, q, beta, x, y)
                    rep.rows.append(CheckRow("edwards_sokal", name, fk, sp, -abs(fk - sp),
                                             abs(fk - sp) <= 1e-10, f"q={q} beta={beta:g}"))
        if g.n_edges <= 12:
            for q in (1.5, 2.0):
                rep.extend(verify_inequalities(g, 0.3, 0.5, q, standard_events(g),
                                               graph_id=f"{name}/q={q:g}"))
    if families:
        for name in ("square", "K4"):
            g = graphs[name]
            tables = all_increasing_tables(g.n_edges)
            for q in (1.5, 2.0):
                rep.extend(verify_monotone_family(g, 0.3, 0.5, q, graph_id=f"{name}/all/q={q:g}",
                                                  tables=tables))
    return rep
