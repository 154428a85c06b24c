"""Scaling analysis: log-space fits, correlation-length extraction, scaling
collapse scoring, and the freeze-out / threshold predictor for general
critical exponents.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import (
    InsufficientDataError,
    InsufficientOverlapError,
    InvalidParameterError,
)
from .observables import CorrelationProfile

MODEL_POWER_LAW = "power_law"
MODEL_EXPONENTIAL = "exponential"


@dataclass(frozen=True)
class FitResult:
    model: str
    exponent_or_rate: float
    prefactor: float
    r_squared: float
    window: tuple[float, float]
    n_points: int
    degenerate: bool = False

    @property
    def exponent(self) -> float:
        return self.exponent_or_rate

    @property
    def rate(self) -> float:
        return self.exponent_or_rate


def _windowed(x: np.ndarray, y: np.ndarray, window: tuple[float, float] | None) -> tuple[np.ndarray, np.ndarray, tuple[float, float]]:
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.shape != y.shape:
        raise InvalidParameterError(f"x and y must have equal length, got {x.size} and {y.size}")
    if window is None:
        sel = np.ones_like(x, dtype=bool)
    else:
        lo, hi = window
        if not lo < hi:
            raise InvalidParameterError(f"degenerate window {window}")
        sel = (x >= lo) & (x <= hi)
    xs, ys = x[sel], y[sel]
    if xs.size < 3:
        raise InsufficientDataError(f"need at least 3 points in the fit window, got {xs.size}")
    win = (float(xs.min()), float(xs.max()))
    return xs, ys, win


def _line_fit(u: np.ndarray, w: np.ndarray) -> tuple[float, float, float, bool]:
    """OLS slope/intercept of w on u plus R^2; degenerate if w has no variance."""
    ssw = float(np.sum((w - w.mean()) ** 2))
    if ssw == 0.0:
        return 0.0, float(w.mean()), 0.0, True
    slope, intercept = np.polyfit(u, w, 1)
    resid = w - (slope * u + intercept)
    r2 = 1.0 - float(np.sum(resid ** 2)) / ssw
    return float(slope), float(intercept), r2, False


def fit_power_law(x: Sequence[float], y: Sequence[float],
                  window: tuple[float, float] | None = None) -> FitResult:
    """Least squares on (ln x, ln y); exponent = slope, prefactor = exp(intercept)."""
    xs, ys, win = _windowed(x, y, window)
    if np.any(xs <= 0) or np.any(ys <= 0):
        raise InvalidParameterError("power-law fit needs strictly positive x and y")
    slope, intercept, r2, degenerate = _line_fit(np.log(xs), np.log(ys))
    return FitResult(MODEL_POWER_LAW, slope, float(np.exp(intercept)), r2, win, xs.size, degenerate)


def fit_exponential(x: Sequence[float], y: Sequence[float],
                    window: tuple[float, float] | None = None) -> FitResult:
    """Least squares on (x, ln y); rate = slope (negative for decay)."""
    xs, ys, win = _windowed(x, y, window)
    if np.any(ys <= 0):
        raise InvalidParameterError("exponential fit needs strictly positive y")
    slope, intercept, r2, degenerate = _line_fit(xs, np.log(ys))
    return FitResult(MODEL_EXPONENTIAL, slope, float(np.exp(intercept)), r2, win, xs.size, degenerate)


def default_correlation_window(profile: CorrelationProfile, interaction_range: int,
                               noise_factor: float = 5.0) -> tuple[float, float]:
    """Start past d = 2r (short-range transients), stop where G drops below
    noise_factor times its standard error."""
    d = profile.distances
    g = profile.g_values
    err = profile.g_errors
    start = 2 * interaction_range + 1
    ok = (d >= start) & (g > noise_factor * np.where(np.isfinite(err), err, np.inf))
    idx = np.nonzero(ok)[0]
    if idx.size == 0:
        raise InsufficientDataError("correlation fit window is empty after the noise cut")
    # contiguous run from the first accepted distance
    stop = idx[0]
    while stop + 1 in set(idx):
        stop += 1
    hi = int(d[stop])
    if hi < start + 2:
        raise InsufficientDataError(
            f"correlation fit window [{start}, {hi}] has fewer than 3 distances"
        )
    return float(start), float(hi)


def fit_correlation_length(profile: CorrelationProfile,
                           d_window: tuple[float, float] | None = None,
                           interaction_range: int | None = None) -> tuple[float, float]:
    """Exponential fit G(d) ~ exp(-d/xi) over the window; returns (xi, R^2)."""
    if d_window is None:
        if interaction_range is None:
            raise InvalidParameterError("give either d_window or interaction_range for the default window")
        d_window = default_correlation_window(profile, interaction_range)
    sel = (profile.distances >= d_window[0]) & (profile.distances <= d_window[1])
    d = profile.distances[sel].astype(np.float64)
    g = profile.g_values[sel]
    if d.size < 3:
        raise InsufficientDataError(f"need at least 3 distances in {d_window}, got {d.size}")
    if np.any(g <= 0):
        raise InsufficientDataError("G(d) must be positive over the fit window")
    fit = fit_exponential(d, g)
    if fit.rate >= 0:
        raise InsufficientDataError("G(d) does not decay over the fit window")
    return -1.0 / fit.rate, fit.r_squared


Curve = tuple[np.ndarray, np.ndarray, object]


def collapse_score(curves: Sequence[Curve],
                   x_rescale: Callable[[np.ndarray, object], np.ndarray] | None = None,
                   y_rescale: Callable[[np.ndarray, object], np.ndarray] | None = None) -> float:
    """Mean squared inter-curve deviation over shared rescaled-x support,
    normalized by the mean squared signal; 0 means perfect collapse.

    Curves are compared pairwise on the union of their sample points inside
    each pair's overlap, so chains of partially overlapping curves are scored
    even when no single interval is common to all of them. The score is
    invariant under relabeling and reordering of the curves.
    """
    if len(curves) < 2:
        raise InvalidParameterError("collapse_score needs at least 2 curves")
    rescaled = []
    for x, y, label in curves:
        xr = np.asarray(x, dtype=np.float64)
        yr = np.asarray(y, dtype=np.float64)
        if x_rescale is not None:
            xr = np.asarray(x_rescale(xr, label), dtype=np.float64)
        if y_rescale is not None:
            yr = np.asarray(y_rescale(yr, label), dtype=np.float64)
        order = np.argsort(xr)
        rescaled.append((xr[order], yr[order]))

    dev_sum = 0.0
    sig_sum = 0.0
    n_pairs = 0
    for a in range(len(rescaled)):
        xa, ya = rescaled[a]
        for b_ in range(a + 1, len(rescaled)):
            xb, yb = rescaled[b_]
            lo = max(xa[0], xb[0])
            hi = min(xa[-1], xb[-1])
            if hi <= lo:
                continue
            grid = np.union1d(xa[(xa >= lo) & (xa <= hi)], xb[(xb >= lo) & (xb <= hi)])
            if grid.size < 2:
                continue
            ia = np.interp(grid, xa, ya)
            ib = np.interp(grid, xb, yb)
            dev_sum += float(np.sum((ia - ib) ** 2)) / 2.0
            sig_sum += float(np.sum(((ia + ib) / 2.0) ** 2))
            n_pairs += 1
    if n_pairs == 0:
        raise InsufficientOverlapError("no pair of curves overlaps after rescaling")
    if sig_sum == 0.0:
        return 0.0 if dev_sum == 0.0 else float("inf")
    return dev_sum / sig_sum


@dataclass(frozen=True)
class KzPrediction:
    """Freeze-out scales and regime thresholds for exponents (z nu, nu)."""

    z_nu: float
    nu: float
    t_hat: float
    xi_hat: float
    tau_fast: float
    tau_ad: float
    breakdown_ratio: float
    tau0: float
    xi0: float
    n1_tau_exponent: float
    n1_r_exponent: float


def kz_predict(z_nu: float, nu: float, r: int, n: int, tau_q: float,
               tau0: float = 1.0, xi0: float = 1.0) -> KzPrediction:
    """Kibble-Zurek scale calculator for a ring with interaction range r.

    The control parameter ramps as ~ r t / tau_q, the equilibrium correlation
    length carries the range as xi0 r^(nu+1); the O(2) presets are
    (z_nu, nu) = (1, 1/2) overdamped and (1/2, 1/2) underdamped.
    """
    if z_nu <= 0 or nu <= 0 or tau0 <= 0 or xi0 <= 0:
        raise InvalidParameterError("z_nu, nu, tau0, xi0 must all be positive")
    if r < 1 or n < 3 or tau_q <= 0:
        raise InvalidParameterError("need r >= 1, n >= 3, tau_q > 0")
    a = z_nu / (z_nu + 1.0)
    t_hat = tau0 ** (1.0 / (z_nu + 1.0)) * (tau_q / r) ** a
    xi_hat = xi0 * r ** (nu + 1.0) * (tau_q / (tau0 * r)) ** (nu / (z_nu + 1.0))
    tau_fast = tau0 ** ((z_nu + 1.0) / z_nu) * r ** (-z_nu)
    r_exp_ad = -(z_nu * (nu + 1.0) + 1.0) / nu
    tau_ad = tau0 * (n / xi0) ** ((z_nu + 1.0) / nu) * r ** r_exp_ad
    breakdown_ratio = tau0 ** (-nu / (z_nu * (z_nu + 1.0))) / xi0
    return KzPrediction(
        z_nu=z_nu, nu=nu, t_hat=t_hat, xi_hat=xi_hat,
        tau_fast=tau_fast, tau_ad=tau_ad, breakdown_ratio=breakdown_ratio,
        tau0=tau0, xi0=xi0,
        n1_tau_exponent=-nu / (z_nu + 1.0),
        n1_r_exponent=-(z_nu * (nu + 1.0) + 1.0) / (z_nu + 1.0),
    )


def kz_fit_mask(tau_qs: np.ndarray, n1_means: np.ndarray, n_sites: int,
                tau_fast: float | None = None, fast_margin: float = 3.0,
                adiabatic_kinks: float = 3.0) -> np.ndarray:
    """Points usable for a KZ exponent fit: excludes fast-quench points
    (tau_q < fast_margin * tau_fast) and adiabatic ones (n1 < adiabatic_kinks/N)."""
    tau_qs = np.asarray(tau_qs, dtype=np.float64)
    n1_means = np.asarray(n1_means, dtype=np.float64)
    mask = n1_means >= adiabatic_kinks / n_sites
    if tau_fast is not None:
        mask &= tau_qs >= fast_margin * tau_fast
    return mask
