"""Estimators shared by the samplers and experiments."""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict

import numpy as np

Z95 = 1.959963984540054


def wilson_interval(mean: float, n: float, z: float = Z95) -> tuple[float, float]:
    """Wilson score interval for a proportion ``mean`` observed over ``n`` effective trials."""
    if n <= 0:
        return 0.0, 1.0
    denom = 1 + z * z / n
    centre = (mean + z * z / (2 * n)) / denom
    half = z * math.sqrt(max(mean * (1 - mean), 0.0) / n + z * z / (4 * n * n)) / denom
    lo, hi = max(0.0, centre - half), min(1.0, centre + half)
    if mean in (0.0, 1.0) and n > 0:
        # keep the observed endpoint inside the interval exactly
        lo, hi = (0.0, hi) if mean == 0.0 else (lo, 1.0)
    return lo, hi


def autocorrelation_time(x: np.ndarray, c: float = 5.0) -> float:
    """Integrated autocorrelation time with Sokal's automatic window (tau = 1 for white noise)."""
    x = np.asarray(x, dtype=float)
    n = len(x)
    if n < 4:
        return 1.0
    y = x - x.mean()
    var = float(np.dot(y, y)) / n
    if var <= 0:
        return 1.0
    size = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(y, size)
    acf = np.fft.irfft(f * np.conj(f), size)[:n] / (n * var)
    tau = 1.0
    for w in range(1, n):
        tau += 2 * acf[w]
        if w >= c * tau:
            break
    return max(tau, 1.0)


@dataclass
class EstimateRecord:
    name: str
    mean: float
    stderr: float
    ci_lo: float
    ci_hi: float
    n_samples: int
    ess: float
    tau_int: float
    indicator: bool = True

    def as_dict(self):
        return asdict(self)

    def z_score(self, exact: float) -> float:
        """(mean - exact) / stderr; 0 when both the error and the discrepancy vanish."""
        diff = self.mean - exact
        if self.stderr == 0:
            return 0.0 if abs(diff) < 1e-12 else math.copysign(math.inf, diff)
        return diff / self.stderr


def estimate(name: str, values, indicator: bool | None = None) -> EstimateRecord:
    """Mean with an autocorrelation-aware standard error and a 95% interval."""
    x = np.asarray(values, dtype=float)
    n = len(x)
    if n == 0:
        raise ValueError(f"no samples recorded for {name}")
    if indicator is None:
        indicator = bool(np.all((x == 0) | (x == 1)))
    mean = float(x.mean())
    tau = autocorrelation_time(x)
    ess = n / tau
    var = float(x.var())
    se = math.sqrt(var / ess) if var > 0 else 0.0
    if indicator:
        lo, hi = wilson_interval(mean, ess)
        if var == 0:
            lo = hi = mean
    else:
        lo, hi = mean - Z95 * se, mean + Z95 * se
    return EstimateRecord(name, mean, se, lo, hi, n, ess, tau, indicator)


def merge(records: list[EstimateRecord]) -> EstimateRecord:
    """Pool independent estimates of the same quantity (sample-size weighted)."""
    if not records:
        raise ValueError("nothing to merge")
    N = sum(r.n_samples for r in records)
    mean = sum(r.n_samples * r.mean for r in records) / N
    se = math.sqrt(sum((r.n_samples / N) ** 2 * r.stderr ** 2 for r in records))
    ess = sum(r.ess for r in records)
    ind = all(r.indicator for r in records)
    if ind:
        lo, hi = wilson_interval(mean, ess)
        if se == 0:
            lo = hi = mean
    else:
        lo, hi = mean - Z95 * se, mean + Z95 * se
    return EstimateRecord(records[0].name, mean, se, lo, hi, N, ess, N / ess if ess else 1.0, ind)


def binomial_estimate(name: str, hits: int, n: int) -> EstimateRecord:
    """Estimate from independent Bernoulli trials."""
    mean = hits / n
    se = math.sqrt(mean * (1 - mean) / n)
    lo, hi = wilson_interval(mean, n)
    return EstimateRecord(name, mean, se, lo, hi, n, float(n), 1.0, True)
