"""Markov chains targeting the random-cluster measure.

Two samplers are provided:

* single-edge heat-bath, valid for every real q >= 1;
* Swendsen-Wang through the Edwards-Sokal coupling, for integer q >= 2.

At q = 1 the measure is a product measure and ``independent`` draws exact
fresh samples; ``auto`` picks it there.

All randomness comes from a numpy ``Generator`` seeded by ``(seed, chain_index)``;
the compiled kernels only consume uniforms drawn here, so a chain is a pure
function of its specification.
"""

from __future__ import annotations

import json
import logging
import math
import os
import struct
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import _kernels as K
from .geometry import Graph
from .measure_oracle import ModelParams
from .stats import EstimateRecord, estimate

log = logging.getLogger(__name__)

SAMPLERS = ("auto", "heat-bath", "swendsen-wang", "independent")
RECORD_LIMIT = 62


class ChainError(RuntimeError):
    """A chain could not be advanced or an observable failed."""


# --------------------------------------------------------------------------
# conditionals


def conditional_open_prob(connected_without_e: bool, p_e: float, q: float) -> float:
    """Probability that edge e is open given the rest of the configuration."""
    if connected_without_e:
        return p_e
    return p_e / (p_e + q * (1.0 - p_e))


def finite_energy_band(p: float, q: float) -> tuple[float, float]:
    return p / (p + q * (1.0 - p)), p


def _check_band(p_edge: np.ndarray, q: float):
    """Both conditional branches must lie in the finite-energy band for every edge."""
    for pe in np.unique(p_edge):
        lo, hi = finite_energy_band(pe, q)
        for c in (True, False):
            v = conditional_open_prob(c, pe, q)
            if not (lo - 1e-15 <= v <= hi + 1e-15):
                raise AssertionError(f"conditional {v} outside [{lo}, {hi}] for p_e={pe}")


def rng_for(seed: int, chain_index: int = 0) -> np.random.Generator:
    """Independent stream per (master seed, chain index)."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(chain_index),))
    return np.random.Generator(np.random.PCG64(ss))


# --------------------------------------------------------------------------
# state


@dataclass
class ChainState:
    graph: Graph
    params: ModelParams
    omega: np.ndarray
    rng: np.random.Generator
    sweeps: int = 0
    seed: int = 0
    chain_index: int = 0
    stats: np.ndarray = field(default_factory=lambda: np.zeros(2, dtype=np.int64))

    def __post_init__(self):
        self.omega = np.ascontiguousarray(self.omega, dtype=np.uint8)
        if self.omega.shape != (self.graph.n_edges,):
            raise ValueError("omega is not sized to the graph")
        self.p_edge = np.ascontiguousarray(self.params.p_edges(self.graph), dtype=float)
        _check_band(self.p_edge, float(self.params.q))
        wired = self.params.wired
        self._adj = self.graph.adjacency(wired=wired)
        n_ext = self.graph.n_vertices + (1 if wired else 0)
        self._markA = np.zeros(n_ext, dtype=np.int64)
        self._markB = np.zeros(n_ext, dtype=np.int64)
        self._qa = np.empty(n_ext, dtype=np.int64)
        self._qb = np.empty(n_ext, dtype=np.int64)
        self._token = 0

    @classmethod
    def new(cls, graph: Graph, params: ModelParams, seed: int = 0, chain_index: int = 0,
            start: str = "closed") -> ChainState:
        if start == "closed":
            omega = np.zeros(graph.n_edges, dtype=np.uint8)
        elif start == "open":
            omega = np.ones(graph.n_edges, dtype=np.uint8)
        else:
            raise ValueError("start must be 'closed' or 'open'")
        return cls(graph, params, omega, rng_for(seed, chain_index), 0, seed, chain_index)

    def config_index(self) -> int:
        if self.graph.n_edges > RECORD_LIMIT:
            raise ValueError("configuration indices need at most 62 edges")
        return int(K.config_index(self.omega))

    @property
    def connectivity_queries(self) -> int:
        return int(self.stats[0])


# --------------------------------------------------------------------------
# updates


def heat_bath_sweep(state: ChainState) -> ChainState:
    """Resample every edge once, in edge-id order, from its exact conditional."""
    u = state.rng.random(state.graph.n_edges)
    indptr, nbr, nbr_edge = state._adj
    state._token = K.heat_bath_sweep(indptr, nbr, nbr_edge, state.graph.eu, state.graph.ev,
                                     state.omega, state.p_edge, float(state.params.q), u,
                                     state._markA, state._markB, state._qa, state._qb,
                                     state._token, state.stats)
    state.sweeps += 1
    return state


def heat_bath_sweeps(state: ChainState, n: int, record: bool = False,
                     block: int = 4096) -> np.ndarray | None:
    """``n`` heat-bath sweeps in compiled blocks; optionally the configuration index after each.

    Uses the same uniform stream as ``n`` calls of :func:`heat_bath_sweep`.
    """
    m = state.graph.n_edges
    if record and m > RECORD_LIMIT:
        raise ValueError("recording configuration indices needs at most 62 edges")
    out = np.empty(n if record else 0, dtype=np.int64)
    indptr, nbr, nbr_edge = state._adj
    rows = max(1, min(block, (1 << 22) // max(m, 1)))
    done = 0
    while done < n:
        k = min(rows, n - done)
        u = state.rng.random((k, m))
        rec = out[done:done + k] if record else out
        state._token = K.heat_bath_run(indptr, nbr, nbr_edge, state.graph.eu, state.graph.ev,
                                       state.omega, state.p_edge, float(state.params.q), u,
                                       state._markA, state._markB, state._qa, state._qb,
                                       state._token, state.stats, rec)
        done += k
    state.sweeps += n
    return out if record else None


def _integer_q(q: float) -> int:
    if q != int(q) or q < 2:
        raise ValueError(f"Swendsen-Wang needs an integer q >= 2, got {q}; use heat-bath")
    return int(q)


def swendsen_wang_step(state: ChainState, q: int | None = None) -> ChainState:
    """One Edwards-Sokal step: colour clusters uniformly, keep concordant edges w.p. p_e."""
    qi = _integer_q(state.params.q if q is None else q)
    if qi != state.params.q:
        raise ValueError("q passed to swendsen_wang_step differs from the chain's q")
    g = state.graph
    colors = state.rng.integers(0, qi, size=g.n_vertices)
    u = state.rng.random(g.n_edges)
    K.swendsen_wang_step(g.n_vertices, g.eu, g.ev, state.omega, state.p_edge,
                         g.boundary_mask, state.params.wired, colors, u)
    state.sweeps += 1
    return state


def resolve_sampler(sampler: str, q: float) -> str:
    if sampler not in SAMPLERS:
        raise ValueError(f"unknown sampler {sampler!r}; choose from {SAMPLERS}")
    if sampler == "auto":
        if q == 1:
            return "independent"
        return "swendsen-wang" if (q == int(q) and q >= 2) else "heat-bath"
    if sampler == "swendsen-wang":
        _integer_q(q)
    if sampler == "independent" and q != 1:
        raise ValueError("independent sampling is exact only at q = 1")
    return sampler


def independent_draw(state: ChainState) -> ChainState:
    """Replace the state by a fresh product-measure sample (q = 1 only)."""
    if state.params.q != 1:
        raise ValueError("independent sampling is exact only at q = 1")
    np.less(state.rng.random(state.graph.n_edges), state.p_edge, out=state.omega,
            casting="unsafe")
    state.sweeps += 1
    return state


def advance(state: ChainState, sampler: str, n: int = 1) -> ChainState:
    s = resolve_sampler(sampler, state.params.q)
    if s == "heat-bath":
        heat_bath_sweeps(state, n)
    elif s == "independent":
        for _ in range(n):
            independent_draw(state)
    else:
        for _ in range(n):
            swendsen_wang_step(state)
    return state


# --------------------------------------------------------------------------
# running chains


@dataclass(frozen=True)
class ChainSpec:
    graph: Graph
    params: ModelParams
    burn_in: int | str = 1000
    sweeps: int = 10_000
    thin: int = 1
    seed: int = 0
    chain_index: int = 0
    sampler: str = "auto"
    start: str = "closed"

    def __post_init__(self):
        if self.burn_in != "auto" and (not isinstance(self.burn_in, int) or self.burn_in < 0):
            raise ValueError("burn_in must be a non-negative integer or 'auto'")
        if self.thin < 1:
            raise ValueError("thinning must be >= 1")
        if self.sweeps < 1:
            raise ValueError("need at least one measurement sweep")
        resolve_sampler(self.sampler, self.params.q)


@dataclass
class Observable:
    """A named statistic of the current state (``fn(omega, graph) -> float``)."""

    name: str
    fn: Callable[[np.ndarray, Graph], float]
    indicator: bool = True


def _as_observable(o, i) -> Observable:
    if isinstance(o, Observable):
        return o
    if callable(o):
        return Observable(getattr(o, "__name__", f"obs{i}"), o, indicator=None)
    raise TypeError(f"observable {o!r} is not callable")


def _measure(obs: Observable, state: ChainState) -> float:
    try:
        return float(obs.fn(state.omega, state.graph))
    except Exception as exc:
        raise ChainError(f"observable {obs.name!r} failed at sweep {state.sweeps} "
                         f"(seed={state.seed}, chain={state.chain_index}): {exc}") from exc


def burn_in(state: ChainState, spec: ChainSpec, monitor: Observable | None) -> int:
    """Discard sweeps; with ``'auto'``, keep going until the two halves of a window agree."""
    sampler = spec.sampler
    if spec.burn_in != "auto":
        advance(state, sampler, spec.burn_in)
        return spec.burn_in
    window = 1000
    advance(state, sampler, window)
    total = window
    if monitor is None:
        return total
    for _ in range(12):
        vals = np.empty(window)
        for i in range(window):
            advance(state, sampler, 1)
            vals[i] = _measure(monitor, state)
        total += window
        a, b = vals[: window // 2], vals[window // 2:]
        se = math.sqrt((a.var() + b.var()) / (window // 2) + 1e-300)
        if abs(a.mean() - b.mean()) < 2 * se or se < 1e-12:
            break
        window *= 2
    log.debug("auto burn-in used %d sweeps", total)
    return total


def run_chain(spec: ChainSpec, observables: Sequence) -> list[EstimateRecord]:
    """Burn in, then record every observable each ``thin`` sweeps; one record per observable."""
    obs = [_as_observable(o, i) for i, o in enumerate(observables)]
    state = ChainState.new(spec.graph, spec.params, spec.seed, spec.chain_index, spec.start)
    burn_in(state, spec, obs[0] if obs else None)
    n = spec.sweeps // spec.thin
    values = np.empty((len(obs), n))
    for i in range(n):
        advance(state, spec.sampler, spec.thin)
        for j, o in enumerate(obs):
            values[j, i] = _measure(o, state)
    return [estimate(o.name, values[j], o.indicator) for j, o in enumerate(obs)]


def sample_indices(spec: ChainSpec) -> np.ndarray:
    """Configuration indices after each measurement sweep (graphs with <= 62 edges).

    Any event probability is then a table lookup, which lets one chain serve
    many events at once.
    """
    state = ChainState.new(spec.graph, spec.params, spec.seed, spec.chain_index, spec.start)
    if spec.burn_in == "auto":
        raise ValueError("sample_indices needs a fixed burn-in")
    sampler = resolve_sampler(spec.sampler, spec.params.q)
    advance(state, sampler, spec.burn_in)
    n = spec.sweeps // spec.thin
    if sampler == "heat-bath" and spec.thin == 1:
        return heat_bath_sweeps(state, n, record=True)
    out = np.empty(n, dtype=np.int64)
    for i in range(n):
        advance(state, sampler, spec.thin)
        out[i] = state.config_index()
    return out


def estimate_from_indices(name: str, indices: np.ndarray, table: np.ndarray) -> EstimateRecord:
    return estimate(name, table[indices].astype(float), indicator=True)


# --------------------------------------------------------------------------
# checkpoints

MAGIC = b"FKSLABCK"
CHECKPOINT_VERSION = 1


def save_checkpoint(state: ChainState, path) -> None:
    """Versioned binary: magic, version, JSON header, packed edge bits.  Written atomically."""
    header = {
        "graph_hash": state.graph.graph_hash,
        "n_edges": state.graph.n_edges,
        "sweeps": state.sweeps,
        "seed": state.seed,
        "chain_index": state.chain_index,
        "q": float(state.params.q),
        "boundary": state.params.boundary,
        "rng": state.rng.bit_generator.state,
        "stats": [int(x) for x in state.stats],
    }
    hb = json.dumps(header, sort_keys=True).encode()
    body = np.packbits(state.omega.astype(np.uint8)).tobytes()
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<HI", CHECKPOINT_VERSION, len(hb)))
        fh.write(hb)
        fh.write(body)
    os.replace(tmp, path)


def load_checkpoint(path, graph: Graph, params: ModelParams) -> ChainState:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:8] != MAGIC:
        raise ChainError(f"{path} is not a chain checkpoint")
    version, hlen = struct.unpack("<HI", blob[8:14])
    if version != CHECKPOINT_VERSION:
        raise ChainError(f"unsupported checkpoint version {version}")
    header = json.loads(blob[14:14 + hlen])
    if header["graph_hash"] != graph.graph_hash:
        raise ChainError("checkpoint was written for a different graph (hash mismatch)")
    bits = np.unpackbits(np.frombuffer(blob[14 + hlen:], dtype=np.uint8))[: graph.n_edges]
    rng = np.random.Generator(np.random.PCG64())
    rng.bit_generator.state = header["rng"]
    st = ChainState(graph, params, bits.astype(np.uint8), rng, header["sweeps"],
                    header["seed"], header["chain_index"])
    st.stats[:] = header["stats"]
    return st
