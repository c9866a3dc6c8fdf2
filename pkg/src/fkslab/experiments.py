"""Estimator pipelines: crossing curves, critical-point scans, decay rates,
convergence speed of crossing probabilities, Potts two-point functions and
Hamming profiles.

Every estimate is an :class:`ExperimentRecord`, one CSV row each.  Random
streams are derived from the master seed and a stable key of the job (for
example ``("crossing", n, p)``), so adding a grid point never changes the
numbers of the others.
"""

from __future__ import annotations

import hashlib
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Iterable, Sequence

import numpy as np

from . import _kernels as K
from .connectivity import CrossingProbe, SeparationProbe
from .dynamics import ChainState, advance, resolve_sampler
from .geometry import BaseWindow, FiberGraph, Graph, RectRegion, SlabGraph, build_slab
from .measure_oracle import ModelParams, es_p_of_beta, hamming_table, oracle_for
from .stats import Z95, EstimateRecord, binomial_estimate, estimate

log = logging.getLogger(__name__)

CSV_FIELDS = ("experiment", "q", "p", "beta", "n", "fiber_id", "bc", "direction", "event",
              "hits", "samples", "mean", "ci_lo", "ci_hi", "seed")

DEFAULT_BURN_IN = {"independent": 0, "heat-bath": 500, "swendsen-wang": 100}


@dataclass
class ExperimentRecord:
    experiment: str
    q: float
    p: float
    beta: float
    n: int
    fiber_id: str
    bc: str
    direction: str
    event: str
    hits: float
    samples: int
    mean: float
    ci_lo: float
    ci_hi: float
    seed: int
    stderr: float = math.nan
    ess: float = math.nan

    def row(self) -> list[str]:
        out = []
        for name in CSV_FIELDS:
            v = getattr(self, name)
            if isinstance(v, float):
                out.append("" if math.isnan(v) else repr(float(v)))
            else:
                out.append(str(v))
        return out

    @property
    def half_width(self) -> float:
        return 0.5 * (self.ci_hi - self.ci_lo)


def job_key(*parts) -> int:
    """Stable 63-bit stream index for a job description."""
    h = hashlib.blake2b(repr(parts).encode(), digest_size=8).digest()
    return int.from_bytes(h, "little") >> 1


# --------------------------------------------------------------------------
# sampling an observable along one chain


def _burn(sampler: str, burn_in: int | None) -> int:
    return DEFAULT_BURN_IN[sampler] if burn_in is None else int(burn_in)


def sample_observable(graph: Graph, params: ModelParams, fn: Callable[[np.ndarray], float],
                      samples: int, seed: int, key: int, sampler: str = "auto",
                      burn_in: int | None = None, thin: int = 1,
                      state: ChainState | None = None) -> tuple[np.ndarray, ChainState]:
    """``samples`` values of ``fn(omega)`` taken every ``thin`` sweeps after burn-in.

    Passing back the returned state continues the same chain without a new burn-in.
    """
    s = resolve_sampler(sampler, params.q)
    if state is None:
        state = ChainState.new(graph, params, seed, key)
        advance(state, s, _burn(s, burn_in))
    out = np.empty(samples)
    for i in range(samples):
        advance(state, s, thin)
        out[i] = fn(state.omega)
    return out, state


def _summarise(values: np.ndarray, sampler: str, indicator: bool, name: str) -> EstimateRecord:
    if sampler == "independent" and indicator:
        return binomial_estimate(name, int(values.sum()), len(values))
    if sampler == "independent":
        rec = estimate(name, values, indicator=False)
        # draws are independent: no autocorrelation correction
        se = float(values.std()) / math.sqrt(len(values)) if len(values) > 1 else 0.0
        return EstimateRecord(name, rec.mean, se, rec.mean - Z95 * se, rec.mean + Z95 * se,
                              len(values), float(len(values)), 1.0, False)
    return estimate(name, values, indicator=indicator)


def estimate_event(graph: Graph, params: ModelParams, fn, samples: int, seed: int, key: int,
                   sampler: str = "auto", burn_in: int | None = None, thin: int = 1,
                   target_half_width: float | None = None, max_samples: int | None = None,
                   name: str = "event", indicator: bool = True) -> EstimateRecord:
    """Estimate E[fn] along one chain, doubling the sample size until the 95%
    half-width is below ``target_half_width`` (or ``max_samples`` is reached)."""
    s = resolve_sampler(sampler, params.q)
    vals, state = sample_observable(graph, params, fn, samples, seed, key, s, burn_in, thin)
    rec = _summarise(vals, s, indicator, name)
    if target_half_width is not None:
        cap = max_samples or 16 * samples
        while 0.5 * (rec.ci_hi - rec.ci_lo) > target_half_width and len(vals) < cap:
            more, state = sample_observable(graph, params, fn, min(len(vals), cap - len(vals)),
                                            seed, key, s, burn_in, thin, state)
            vals = np.concatenate([vals, more])
            rec = _summarise(vals, s, indicator, name)
    return rec


def _record(experiment, params: ModelParams, n, fiber_id, direction, event, rec: EstimateRecord,
            seed, beta=math.nan, indicator=True) -> ExperimentRecord:
    hits = int(round(rec.mean * rec.n_samples)) if indicator else rec.mean * rec.n_samples
    return ExperimentRecord(experiment, float(params.q), float(params.p) if params.is_uniform
                            else math.nan, beta, int(n), fiber_id, params.boundary, direction,
                            event, hits, rec.n_samples, rec.mean, rec.ci_lo, rec.ci_hi, int(seed),
                            rec.stderr, rec.ess)


def _map(fn, jobs: list, workers: int):
    if workers <= 1 or len(jobs) <= 1:
        return [fn(*j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, *zip(*jobs)))


# --------------------------------------------------------------------------
# crossing curves


@lru_cache(maxsize=64)
def rectangle_graph(width: int, height: int, fiber: FiberGraph, margin: int = 0) -> SlabGraph:
    """Slab over the window of [0,width] x [0,height] enlarged by ``margin``."""
    return build_slab(RectRegion.of_size(width, height).window(margin), fiber)


@lru_cache(maxsize=64)
def _probe(width, height, fiber, margin, direction) -> CrossingProbe:
    g = rectangle_graph(width, height, fiber, margin)
    return CrossingProbe(g, RectRegion.of_size(width, height), direction)


def crossing_estimate(width: int, height: int, direction: str, params: ModelParams,
                      fiber: FiberGraph, samples: int, seed: int, key: int,
                      sampler: str = "auto", burn_in: int | None = None, thin: int = 1,
                      margin: int = 0, target_half_width: float | None = None,
                      max_samples: int | None = None) -> EstimateRecord:
    probe = _probe(width, height, fiber, margin, direction)
    d = "h" if probe.direction == "horizontal" else "v"
    return estimate_event(probe.graph, params, probe, samples, seed, key, sampler, burn_in, thin,
                          target_half_width, max_samples, name=f"C_{d}({width},{height})")


@dataclass
class CrossingCurveSpec:
    q: float
    fiber: FiberGraph
    ns: Sequence[int]
    ps: Sequence[float]
    boundary: str = "free"
    aspect: tuple[int, int] = (2, 1)
    direction: str = "horizontal"
    samples: int = 10_000
    seed: int = 0
    sampler: str = "auto"
    burn_in: int | None = None
    thin: int = 1
    margin: int = 0
    target_half_width: float | None = None
    max_samples: int | None = None

    def __post_init__(self):
        if list(self.ps) != sorted(self.ps):
            raise ValueError("the p grid must be sorted")
        if any(n < 1 for n in self.ns):
            raise ValueError("n values must be positive")
        if self.aspect == (2, 1) and any(n % 2 for n in self.ns):
            raise ValueError("n values must be even for the 2:1 aspect")
        if self.samples < 1:
            raise ValueError("samples must be positive")
        ModelParams(0.5, self.q, self.boundary)

    def size(self, n: int) -> tuple[int, int]:
        a, b = self.aspect
        return a * n // b, n


def _crossing_job(spec: CrossingCurveSpec, n: int, p: float) -> ExperimentRecord:
    w, h = spec.size(n)
    params = ModelParams(p, spec.q, spec.boundary)
    key = job_key("crossing", spec.direction, w, h, float(p), spec.boundary)
    try:
        rec = crossing_estimate(w, h, spec.direction, params, spec.fiber, spec.samples, spec.seed,
                                key, spec.sampler, spec.burn_in, spec.thin, spec.margin,
                                spec.target_half_width, spec.max_samples)
    except Exception as exc:
        raise RuntimeError(f"crossing estimate failed at n={n}, p={p}: {exc}") from exc
    return _record("crossing", params, n, spec.fiber.name, spec.direction, rec.name, rec, spec.seed)


def crossing_curve(spec: CrossingCurveSpec, workers: int = 1) -> list[ExperimentRecord]:
    """Estimated crossing probability of the (aspect*n) x n rectangle for every (n, p)."""
    jobs = [(spec, n, p) for n in spec.ns for p in spec.ps]
    return _map(_crossing_job, jobs, workers)


def monotone_within_bands(records: Sequence[ExperimentRecord], z: float = 3.0) -> bool:
    """Along each n, consecutive estimates never decrease by more than z joint standard errors."""
    by_n: dict = {}
    for r in records:
        by_n.setdefault((r.n, r.event), []).append(r)
    for rs in by_n.values():
        rs = sorted(rs, key=lambda r: r.p)
        for a, b in zip(rs, rs[1:]):
            sa = a.stderr if np.isfinite(a.stderr) else a.half_width / Z95
            sb = b.stderr if np.isfinite(b.stderr) else b.half_width / Z95
            if b.mean < a.mean - z * math.hypot(sa, sb) - 1e-12:
                return False
    return True


# --------------------------------------------------------------------------
# critical point scan


@dataclass
class ScanPoint:
    n: int
    bc: str
    p_half: float
    evaluations: list = field(default_factory=list)   # (p, mean, ci_lo, ci_hi)
    widened: int = 0


@dataclass
class ScanResult:
    q: float
    fiber_id: str
    points: list
    per_n: dict            # n -> combined half-point
    p_hat: float
    spread: float
    ci_lo: float
    ci_hi: float

    def records(self, seed: int) -> list[ExperimentRecord]:
        out = []
        for pt in self.points:
            for p, mean, lo, hi, samples in pt.evaluations:
                out.append(ExperimentRecord("scan-pc", self.q, p, math.nan, pt.n, self.fiber_id,
                                            pt.bc, "horizontal", f"C_h({pt.n + 1},{pt.n})",
                                            int(round(mean * samples)), samples, mean, lo, hi,
                                            seed))
        return out


def _bisect(f, lo: float, hi: float, tol: float, level: float = 0.5, floor=1e-3,
            ceil=1 - 1e-3):
    """Noisy bisection of ``f(p) = level``; the bracket widens when its ends do not straddle."""
    evals = []
    widened = 0

    def ev(p):
        m, clo, chi, n = f(p)
        evals.append((p, m, clo, chi, n))
        return m

    flo, fhi = ev(lo), ev(hi)
    while not (flo <= level <= fhi):
        if (lo <= floor and flo > level) or (hi >= ceil and fhi < level):
            raise RuntimeError(f"no crossing of level {level} in [{floor}, {ceil}]")
        width = hi - lo
        if flo > level:
            lo = max(floor, lo - width)
            flo = ev(lo)
        if fhi < level:
            hi = min(ceil, hi + width)
            fhi = ev(hi)
        widened += 1
        log.info("bisection bracket widened to [%g, %g]", lo, hi)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if ev(mid) < level:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi), evals, widened


def _scan_bcs(q: float, bc: str) -> tuple[str, ...]:
    if bc == "auto":
        return ("free",) if q == 1 else ("free", "wired")
    if bc == "both":
        return ("free", "wired")
    return (bc,)


def scan_pc(q: float, fiber: FiberGraph, ns: Sequence[int], tolerance: float = 0.004,
            samples: int = 4000, seed: int = 0, bc: str = "auto", bracket=(0.05, 0.95),
            sampler: str = "auto", burn_in: int | None = None, thin: int = 1,
            window: float = 0.08) -> ScanResult:
    """Finite-size critical point from the half-point of the square-ish crossing C_h(n+1, n).

    For q > 1 the half-points under free and wired boundary conditions bracket
    the self-dual point from both sides and their midpoint is used.  The
    estimate is the value at the largest n; its error bar is the spread over n
    (at least the bisection tolerance).
    """
    ns = list(ns)
    if ns != sorted(ns) or len(set(ns)) != len(ns):
        raise ValueError("n list must be strictly increasing")
    points = []
    per_n = {}
    guess = {b: None for b in _scan_bcs(q, bc)}
    for n in ns:
        halves = []
        for b in _scan_bcs(q, bc):

            def f(p, b=b, n=n):
                params = ModelParams(p, q, b)
                key = job_key("scan", n, b, round(p, 12))
                r = crossing_estimate(n + 1, n, "horizontal", params, fiber, samples, seed, key,
                                      sampler, burn_in, thin)
                return r.mean, r.ci_lo, r.ci_hi, r.n_samples

            lo, hi = bracket
            if guess[b] is not None:
                lo, hi = max(bracket[0], guess[b] - window), min(bracket[1], guess[b] + window)
            ph, evals, widened = _bisect(f, lo, hi, tolerance)
            guess[b] = ph
            points.append(ScanPoint(n, b, ph, evals, widened))
            halves.append(ph)
        per_n[n] = float(np.mean(halves))
    vals = list(per_n.values())
    p_hat = vals[-1]
    spread = max(vals) - min(vals) if len(vals) > 1 else 0.0
    hw = max(spread, tolerance)
    return ScanResult(q, fiber.name, points, per_n, p_hat, spread, p_hat - hw, p_hat + hw)


# --------------------------------------------------------------------------
# origin-to-boundary connections and decay


@lru_cache(maxsize=16)
def _ball_setup(N: int, fiber: FiberGraph):
    g = build_slab(BaseWindow.square(N), fiber)
    src = np.ascontiguousarray(g.column((0, 0)), dtype=np.int64)
    vx = np.ascontiguousarray(g.vertex_x, dtype=np.int64)
    vy = np.ascontiguousarray(g.vertex_y, dtype=np.int64)
    return g, src, vx, vy


def origin_radius_samples(p: float, q: float, fiber: FiberGraph, N: int, samples: int,
                          seed: int, bc: str = "wired", sampler: str = "auto",
                          burn_in: int | None = None, thin: int = 1) -> np.ndarray:
    """l1 radius of the cluster of the fattened origin in the window [-N, N]^2, per sample."""
    g, src, vx, vy = _ball_setup(N, fiber)
    indptr, nbr, nbr_edge = g.adjacency(False)

    def radius(w):
        return K.cluster_radius(indptr, nbr, nbr_edge, w, src, vx, vy, 0, 0, g.n_vertices)

    params = ModelParams(p, q, bc)
    vals, _ = sample_observable(g, params, radius, samples, seed,
                                job_key("radius", N, float(p), bc), sampler, burn_in, thin)
    return vals


def origin_to_boundary(p: float, q: float, fiber: FiberGraph, ns: Sequence[int], samples: int,
                       seed: int = 0, bc: str = "wired", sampler: str = "auto",
                       burn_in: int | None = None, thin: int = 1,
                       N: int | None = None) -> list[ExperimentRecord]:
    """phi(fattened origin <-> boundary of the l1 ball of radius n) for every n, from one chain
    in the window [-N, N]^2 (N = max n by default)."""
    N = N or max(ns)
    if max(ns) > N:
        raise ValueError("every n must fit inside the window")
    s = resolve_sampler(sampler, q)
    if p == 0:
        r = np.zeros(samples)
    else:
        r = origin_radius_samples(p, q, fiber, N, samples, seed, bc, s, burn_in, thin)
    params = ModelParams(p, q, bc)
    out = []
    for n in ns:
        rec = _summarise((r >= n).astype(float), s, True, f"0<->dB({n})")
        out.append(_record("decay", params, n, fiber.name, "", rec.name, rec, seed))
    return out


def _conditioned_radii(g, src, vx, vy, params: ModelParams, level: int, omega0: np.ndarray,
                       samples: int, burn_in: int, thin: int, rng: np.random.Generator,
                       next_level: int | None):
    """Radii from the heat-bath chain conditioned on the source cluster reaching ``level``.

    Also returns the last sampled configuration that reaches ``next_level``
    (a valid start for the following stage), or None.
    """
    indptr, nbr, nbr_edge = g.adjacency(params.wired)
    n_ext = g.n_vertices + (1 if params.wired else 0)
    markA = np.zeros(n_ext, dtype=np.int64)
    markB = np.zeros(n_ext, dtype=np.int64)
    qa = np.empty(n_ext, dtype=np.int64)
    qb = np.empty(n_ext, dtype=np.int64)
    p_edge = np.ascontiguousarray(params.p_edges(g), dtype=float)
    omega = omega0.copy()
    q = float(params.q)
    token = 0

    def run(sweeps):
        nonlocal token
        radii = np.empty(sweeps, dtype=np.int64)
        token = K.conditioned_heat_bath_run(indptr, nbr, nbr_edge, g.eu, g.ev, omega, p_edge, q,
                                            rng.random((sweeps, g.n_edges)), markA, markB, qa,
                                            qb, token, src, vx, vy, 0, 0, level, radii)
        return radii

    if burn_in:
        run(burn_in)
    out = np.empty(samples)
    carry = None
    for i in range(samples):
        out[i] = run(thin)[-1]
        if next_level is not None and out[i] >= next_level:
            carry = omega.copy()
    return out, carry


def origin_to_boundary_split(p: float, q: float, fiber: FiberGraph, ns: Sequence[int],
                             samples: int, seed: int = 0, bc: str = "wired",
                             sampler: str = "auto", burn_in: int | None = None, thin: int = 1,
                             level_step: int = 8, stage_burn_in: int = 200,
                             N: int | None = None) -> list[ExperimentRecord]:
    """phi(fattened origin <-> dB_n) by multilevel splitting.

    Stage 0 is the ordinary chain.  Stage j samples the measure conditioned on
    the origin cluster reaching l1 distance ``j * level_step`` (heat bath with
    refused updates), and the estimate at n is the product of the stage-to-stage
    passage fractions times the conditional fraction at n.  Relative variances
    of the factors add; the interval is exp(+-1.96 * sqrt(total)) around the mean.
    """
    N = N or max(ns)
    if max(ns) > N:
        raise ValueError("every n must fit inside the window")
    if level_step < 1:
        raise ValueError("level_step must be >= 1")
    s = resolve_sampler(sampler, q)
    params = ModelParams(p, q, bc)
    if p == 0:
        return origin_to_boundary(p, q, fiber, ns, samples, seed, bc, s, burn_in, thin, N)
    g, src, vx, vy = _ball_setup(N, fiber)
    top = max(ns)
    levels = list(range(0, top, level_step))
    indptr, nbr, nbr_edge = g.adjacency(False)

    # stage 0: unconditioned chain, remembering a configuration that passes level 1
    state = ChainState.new(g, params, seed, job_key("split", N, float(p), bc, 0))
    advance(state, s, _burn(s, burn_in))
    radii = [np.empty(samples)]
    carry = None
    nxt = levels[1] if len(levels) > 1 else None
    for i in range(samples):
        advance(state, s, thin)
        radii[0][i] = K.cluster_radius(indptr, nbr, nbr_edge, state.omega, src, vx, vy, 0, 0,
                                       g.n_vertices)
        if nxt is not None and radii[0][i] >= nxt:
            carry = state.omega.copy()
    for j in range(1, len(levels)):
        if carry is None:
            log.info("splitting stage %d starts from the all-open configuration", j)
            carry = np.ones(g.n_edges, dtype=np.uint8)
        rng = np.random.default_rng([seed, job_key("split", N, float(p), bc, j)])
        nxt = levels[j + 1] if j + 1 < len(levels) else None
        r, carry = _conditioned_radii(g, src, vx, vy, params, levels[j], carry, samples,
                                      stage_burn_in, thin, rng, nxt)
        radii.append(r)

    # passage factors between consecutive levels
    log_pass = [0.0]
    relvar = [0.0]
    for j in range(len(levels) - 1):
        rec = estimate("pass", (radii[j] >= levels[j + 1]).astype(float), indicator=True)
        if rec.mean == 0:
            log_pass.append(-math.inf)
            relvar.append(math.inf)
        else:
            log_pass.append(log_pass[-1] + math.log(rec.mean))
            relvar.append(relvar[-1] + (rec.stderr / rec.mean) ** 2)
    out = []
    for n in ns:
        j = max(i for i, L in enumerate(levels) if L <= n) if n > 0 else 0
        ind = (radii[j] >= n).astype(float)
        rec = estimate(f"0<->dB({n})", ind, indicator=True)
        hits = int(ind.sum())
        if rec.mean == 0 or not math.isfinite(log_pass[j]):
            mean = lo = hi = 0.0
            hits = 0
        else:
            mean = math.exp(log_pass[j]) * rec.mean
            rv = relvar[j] + (rec.stderr / rec.mean) ** 2
            w = math.exp(Z95 * math.sqrt(rv))
            lo, hi = mean / w, min(mean * w, 1.0)
        out.append(ExperimentRecord("decay", float(q), float(p), math.nan, int(n), fiber.name,
                                    params.boundary, "", f"0<->dB({n})", hits, samples, mean, lo,
                                    hi, int(seed), mean * math.sqrt(relvar[j] + (
                                        (rec.stderr / rec.mean) ** 2 if rec.mean else 0.0)),
                                    rec.ess))
    return out


@dataclass
class DecayFit:
    p: float
    q: float
    slope: float          # c(p): fitted rate of -log phi(0 <-> dB_n) versus n
    intercept: float
    r2: float
    points: list
    used: list
    truncated: list

    @property
    def rate(self) -> float:
        return self.slope


def fit_decay(points: Sequence[ExperimentRecord]) -> tuple[float, float, float, list, list]:
    used = [r for r in points if r.hits > 0]
    truncated = [r.n for r in points if r.hits == 0]
    if len(used) < 2:
        return math.inf, math.nan, math.nan, used, truncated
    x = np.array([r.n for r in used], dtype=float)
    y = -np.log(np.array([r.mean for r in used]))
    A = np.vstack([x, np.ones_like(x)]).T
    (slope, icpt), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - (slope * x + icpt)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1 - float((resid ** 2).sum()) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(icpt), r2, used, truncated


def decay_rate(p: float, q: float, fiber: FiberGraph, ns: Sequence[int], samples: int,
               seed: int = 0, bc: str = "wired", sampler: str = "auto",
               burn_in: int | None = None, thin: int = 1, p_c: float | None = None,
               margin: float = 0.0, method: str = "splitting",
               level_step: int = 8) -> DecayFit:
    """Least-squares slope of -log phi(0 <-> dB_n) against n.

    ``method="splitting"`` (default) reaches probabilities far below 1/samples;
    ``"direct"`` counts hits along one chain.  ``p = 0`` gives the +inf sentinel.
    Sizes with no hit are dropped and listed in ``truncated``.  When ``p_c`` is
    given, ``p`` must lie at least ``margin`` below it.
    """
    if p_c is not None and p > p_c - margin:
        raise ValueError(f"p={p} is not below the critical estimate {p_c} by {margin}")
    if method == "splitting":
        pts = origin_to_boundary_split(p, q, fiber, ns, samples, seed, bc, sampler, burn_in,
                                       thin, level_step)
    elif method == "direct":
        pts = origin_to_boundary(p, q, fiber, ns, samples, seed, bc, sampler, burn_in, thin)
    else:
        raise ValueError("method must be 'splitting' or 'direct'")
    if p == 0:
        return DecayFit(p, q, math.inf, math.nan, math.nan, pts, [], list(ns))
    slope, icpt, r2, used, trunc = fit_decay(pts)
    if trunc:
        log.warning("decay fit at p=%g dropped sizes without hits: %s", p, trunc)
    return DecayFit(p, q, slope, icpt, r2, pts, [r.n for r in used], trunc)


# --------------------------------------------------------------------------
# speed of convergence of crossing probabilities


@dataclass
class SharpRow:
    p: float
    n: int
    record: ExperimentRecord
    threshold: float
    satisfied: bool        # point estimate above 1 - n^-delta
    within_error: bool     # the 95% interval reaches the threshold


@dataclass
class SharpnessTable:
    delta: float
    rows: list
    verdict: dict          # p -> every tested n within error

    def row(self, p, n) -> SharpRow:
        for r in self.rows:
            if r.p == p and r.n == n:
                return r
        raise KeyError((p, n))


def sharp_convergence_check(ps: Sequence[float], q: float, fiber: FiberGraph, delta: float,
                            ns: Sequence[int], samples: int = 10_000, seed: int = 0,
                            bc: str = "free", sampler: str = "auto", burn_in: int | None = None,
                            thin: int = 1, p_c: float | None = None, margin: float = 0.0,
                            workers: int = 1) -> SharpnessTable:
    """Does phi(C_h(2n, n)) reach 1 - n^-delta at every tested n?"""
    if p_c is not None and any(p <= p_c + margin for p in ps):
        raise ValueError(f"every p must exceed the critical estimate {p_c} by {margin}")
    spec = CrossingCurveSpec(q, fiber, list(ns), sorted(ps), bc, (2, 1), "horizontal", samples,
                             seed, sampler, burn_in, thin)
    recs = crossing_curve(spec, workers)
    rows = []
    for r in recs:
        thr = 1 - r.n ** (-delta)
        rows.append(SharpRow(r.p, r.n, r, thr, r.mean >= thr, r.ci_hi >= thr))
    verdict = {p: all(x.within_error for x in rows if x.p == p) for p in spec.ps}
    return SharpnessTable(delta, rows, verdict)


@dataclass
class SharpnessReport:
    scan: ScanResult
    decay: list            # DecayFit per subcritical p
    floor: list            # origin-to-boundary records per supercritical p
    convergence: SharpnessTable | None


def sharpness_report(q: float, fiber: FiberGraph, scan_ns: Sequence[int], ns: Sequence[int],
                     offset: float = 0.1, samples: int = 4000, seed: int = 0, delta: float = 1.0,
                     scan: ScanResult | None = None, convergence: bool = True) -> SharpnessReport:
    """The two regimes around the scanned critical point: decay below, a floor above."""
    scan = scan or scan_pc(q, fiber, scan_ns, samples=samples, seed=seed)
    lo, hi = scan.p_hat - offset, scan.p_hat + offset
    dec = [decay_rate(lo, q, fiber, ns, samples, seed)]
    flo = [origin_to_boundary(hi, q, fiber, ns, samples, seed)]
    conv = None
    if convergence:
        conv = sharp_convergence_check([hi], q, fiber, delta, [n for n in ns if n % 2 == 0],
                                       samples, seed)
    return SharpnessReport(scan, dec, flo, conv)


# --------------------------------------------------------------------------
# Potts two-point function through the coupling


def potts_two_point_mc(beta: float, q: int, graph: Graph, x: int, y: int, samples: int,
                       seed: int = 0, sampler: str = "auto", burn_in: int | None = None,
                       thin: int = 1, boundary: str = "free") -> ExperimentRecord:
    """phi_{p(beta)}(x <-> y), which equals the Potts correlation E[sigma_x . sigma_y]."""
    if int(q) != q or q < 2:
        raise ValueError("the Potts model needs an integer q >= 2")
    p = es_p_of_beta(beta, q)
    params = ModelParams(p, float(q), boundary)
    name = f"{x}<->{y}"
    fid = getattr(getattr(graph, "fiber", None), "name", graph.name)
    if x == y:
        rec = EstimateRecord(name, 1.0, 0.0, 1.0, 1.0, samples, float(samples), 1.0, True)
    else:
        xm = np.zeros(graph.n_vertices, dtype=np.bool_)
        ym = np.zeros(graph.n_vertices, dtype=np.bool_)
        xm[x] = True
        ym[y] = True
        allv = np.ones(graph.n_vertices, dtype=np.bool_)

        def joined(w):
            return K.region_joined(graph.n_vertices, graph.eu, graph.ev, w, allv, xm, ym)

        rec = estimate_event(graph, params, joined, samples, seed, job_key("potts", x, y, beta),
                             sampler, burn_in, thin, name=name)
    return _record("potts", params, 0, fid, "", name, rec, seed, beta=float(beta))


# --------------------------------------------------------------------------
# Hamming profile


def hamming_profile(p: float, q: float, fiber: FiberGraph, rects: Sequence[RectRegion],
                    samples: int, seed: int = 0, bc: str = "free", sampler: str = "auto",
                    burn_in: int | None = None, thin: int = 1) -> list[ExperimentRecord]:
    """Mean of K - 1 (strongly separated vertical crossings) per rectangle: a lower bound
    on the expected number of flips needed to cross horizontally."""
    out = []
    params = ModelParams(p, q, bc)
    for r in rects:
        g = build_slab(r.window(0), fiber)
        probe = SeparationProbe(g, r)
        fn = lambda w, probe=probe: probe(w).hamming_lb
        rec = estimate_event(g, params, fn, samples, seed,
                             job_key("hamming", r.a, r.b, r.c, r.d, float(p)), sampler, burn_in,
                             thin, name=f"K-1[{r.a},{r.b}]x[{r.c},{r.d}]", indicator=False)
        if rec.stderr == 0:
            rec.ci_lo = rec.ci_hi = rec.mean
        out.append(_record("hamming", params, r.width, fiber.name, "horizontal", rec.name, rec,
                           seed, indicator=False))
    return out


def exact_hamming_expectations(rect: RectRegion, fiber: FiberGraph,
                               params: ModelParams) -> tuple[float, float]:
    """(E[K - 1], E[H_{C_h}]) by enumeration on the slab over ``rect``."""
    g = build_slab(rect.window(0), fiber)
    orc = oracle_for(g, params.boundary, cap=22)
    dist = orc.distribution(params)
    member = orc.table(CrossingProbe(g, rect, "horizontal").event())
    H = hamming_table(member, g.n_edges).astype(float)
    Kc = SeparationProbe(g, rect).count_all().astype(float)
    lb = np.maximum(Kc - 1, 0)
    return math.fsum(dist * lb), math.fsum(dist * H)
