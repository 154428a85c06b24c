"""Ensemble statistics: unbiased cumulant estimators (k-statistics), ratio
propagation, nonparametric bootstrap, and an associative shard accumulator.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import DegenerateRatioError, InsufficientSamplesError, InvalidParameterError


@dataclass(frozen=True)
class EnsembleSummary:
    observable: str
    count: int
    kappa1: float
    kappa2: float
    kappa3: float
    se_kappa1: float
    se_kappa2: float
    se_kappa3: float
    config_fingerprint: str = ""


def cumulants(samples: Sequence[float]) -> tuple[float, float, float]:
    """First three cumulants via k-statistics.

    k1 = mean, k2 = n/(n-1) m2, k3 = n^2/((n-1)(n-2)) m3 with m_p the central
    sample moments. Sums use math.fsum, so the result is exactly rounded and
    bit-identical under any permutation of the samples.
    """
    x = np.asarray(samples, dtype=np.float64).ravel()
    n = x.size
    if n < 3:
        raise InsufficientSamplesError(f"cumulants need at least 3 samples, got {n}")
    mean = math.fsum(x) / n
    d = x - mean
    m2 = math.fsum(d * d) / n
    m3 = math.fsum(d * d * d) / n
    k2 = m2 * n / (n - 1)
    k3 = m3 * n * n / ((n - 1) * (n - 2))
    return mean, k2, k3


def _cumulants_fast(x: np.ndarray) -> tuple[float, float, float]:
    """numpy-summed k-statistics; used inside bootstrap loops."""
    n = x.size
    mean = float(x.mean())
    d = x - mean
    m2 = float((d * d).mean())
    m3 = float((d * d * d).mean())
    return mean, m2 * n / (n - 1), m3 * n * n / ((n - 1) * (n - 2))


class CumulantAccumulator:
    """Streaming central-moment sums; merge is associative and commutative."""

    def __init__(self) -> None:
        self.n = 0
        self.mean = 0.0
        self.m2 = 0.0  # sum of (x - mean)^2
        self.m3 = 0.0  # sum of (x - mean)^3

    def update(self, samples: Sequence[float]) -> None:
        x = np.asarray(samples, dtype=np.float64).ravel()
        if x.size == 0:
            return
        other = CumulantAccumulator()
        other.n = int(x.size)
        other.mean = float(x.mean())
        d = x - other.mean
        other.m2 = float(np.sum(d * d))
        other.m3 = float(np.sum(d * d * d))
        self.merge(other)

    def merge(self, other: "CumulantAccumulator") -> None:
        if other.n == 0:
            return
        if self.n == 0:
            self.n, self.mean, self.m2, self.m3 = other.n, other.mean, other.m2, other.m3
            return
        na, nb = self.n, other.n
        n = na + nb
        delta = other.mean - self.mean
        self.m3 = (self.m3 + other.m3
                   + delta ** 3 * na * nb * (na - nb) / (n * n)
                   + 3.0 * delta * (na * other.m2 - nb * self.m2) / n)
        self.m2 = self.m2 + other.m2 + delta * delta * na * nb / n
        self.mean = self.mean + delta * nb / n
        self.n = n

    def cumulants(self) -> tuple[float, float, float]:
        n = self.n
        if n < 3:
            raise InsufficientSamplesError(f"cumulants need at least 3 samples, got {n}")
        return self.mean, self.m2 / (n - 1), self.m3 * n / ((n - 1) * (n - 2))


def cumulant_ratios(summary: EnsembleSummary) -> tuple[tuple[float, float], tuple[float, float]]:
    """(kappa2/kappa1, kappa3/kappa1) with first-order propagated standard
    errors (covariances between estimators are neglected)."""
    if summary.kappa1 == 0.0:
        raise DegenerateRatioError("kappa1 is zero; cumulant ratios are undefined")
    k1 = summary.kappa1

    def ratio(kq: float, se_q: float) -> tuple[float, float]:
        r = kq / k1
        if kq == 0.0:
            se = se_q / abs(k1)
        else:
            se = abs(r) * math.hypot(se_q / kq, summary.se_kappa1 / k1)
        return r, se

    return ratio(summary.kappa2, summary.se_kappa2), ratio(summary.kappa3, summary.se_kappa3)


@dataclass(frozen=True)
class BootstrapResult:
    point: float
    se: float
    ci95: tuple[float, float]


def bootstrap(samples: Sequence[float], statistic: Callable[[np.ndarray], float],
              n_resamples: int = 1000, rng: np.random.Generator | None = None) -> BootstrapResult:
    """Nonparametric bootstrap with percentile CI; deterministic given rng."""
    x = np.asarray(samples, dtype=np.float64).ravel()
    if x.size == 0:
        raise InsufficientSamplesError("bootstrap needs a non-empty sample")
    if n_resamples < 100:
        raise InvalidParameterError(f"n_resamples must be >= 100, got {n_resamples}")
    if rng is None:
        rng = np.random.default_rng(0)
    point = float(statistic(x))
    stats = np.empty(n_resamples)
    n = x.size
    for i in range(n_resamples):
        idx = rng.integers(0, n, n)
        stats[i] = statistic(x[idx])
    se = float(np.std(stats, ddof=1)) if n_resamples > 1 else 0.0
    lo, hi = np.percentile(stats, [2.5, 97.5])
    return BootstrapResult(point=point, se=se, ci95=(float(lo), float(hi)))


def summarize(samples: Sequence[float], observable: str, config_fingerprint: str = "",
              n_resamples: int = 1000, seed: int = 0) -> EnsembleSummary:
    """Cumulants of an ensemble with bootstrap standard errors."""
    x = np.asarray(samples, dtype=np.float64).ravel()
    k1, k2, k3 = cumulants(x)
    rng = make_bootstrap_rng(seed, observable)
    ses = []
    for pick in (0, 1, 2):
        res = bootstrap(x, lambda y, p=pick: _cumulants_fast(y)[p], n_resamples=n_resamples, rng=rng)
        ses.append(res.se)
    return EnsembleSummary(
        observable=observable, count=int(x.size),
        kappa1=k1, kappa2=k2, kappa3=k3,
        se_kappa1=ses[0], se_kappa2=ses[1], se_kappa3=ses[2],
        config_fingerprint=config_fingerprint,
    )


def make_bootstrap_rng(seed: int, observable: str) -> np.random.Generator:
    """Bootstrap stream decoupled from trajectory streams and stable per observable."""
    tag = [ord(ch) for ch in f"bootstrap:{observable}"]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy=seed, spawn_key=tuple(tag))))
