"""Time-dependent rotor Hamiltonian: schedule, energy, gradient, and the
instantaneous uniform-angle minimum energy.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError, UnsupportedConfigurationError
from .graph import CirculantGraph, neighbor_sums, quadratic_form


@dataclass(frozen=True)
class AnnealSchedule:
    """Linear ramp J(t) = j0 t/tau_q, h(t) = h0 (1 - t/tau_q) on [0, tau_q].

    With the default binding h0 = 2 r j0 the paramagnetic and ferromagnetic
    terms cross at t_c = tau_q/2 for every interaction range.
    """

    j0: float
    h0: float
    tau_q: float

    def __post_init__(self) -> None:
        if self.j0 <= 0 or self.h0 <= 0 or self.tau_q <= 0:
            raise InvalidParameterError(
                f"j0, h0, tau_q must all be positive, got ({self.j0}, {self.h0}, {self.tau_q})"
            )

    @classmethod
    def for_graph(cls, g: CirculantGraph, tau_q: float, j0: float = 1.0) -> "AnnealSchedule":
        """Default binding h0 = 2 r j0."""
        return cls(j0=j0, h0=2.0 * g.interaction_range * j0, tau_q=tau_q)

    def has_default_field(self, g: CirculantGraph) -> bool:
        return self.h0 == 2.0 * g.interaction_range * self.j0

    def couplings(self, t: float) -> tuple[float, float]:
        if not 0.0 <= t <= self.tau_q:
            raise InvalidParameterError(f"t = {t} outside the schedule interval [0, {self.tau_q}]")
        x = t / self.tau_q
        return self.j0 * x, self.h0 * (1.0 - x)

    @property
    def t_critical(self) -> float:
        """Time where h(t) = 2 r J(t) under the default binding."""
        return 0.5 * self.tau_q


@dataclass(frozen=True)
class FrozenSchedule:
    """Constant couplings over a horizon; used for equilibrium and oracle runs."""

    j: float
    h: float
    tau_q: float

    def __post_init__(self) -> None:
        if self.j < 0 or self.h < 0 or self.tau_q <= 0:
            raise InvalidParameterError(
                f"frozen couplings must be >= 0 with a positive horizon, got ({self.j}, {self.h}, {self.tau_q})"
            )

    def couplings(self, t: float) -> tuple[float, float]:
        if not 0.0 <= t <= self.tau_q:
            raise InvalidParameterError(f"t = {t} outside the horizon [0, {self.tau_q}]")
        return self.j, self.h


@dataclass(frozen=True)
class PhysicalParams:
    """Mass, damping and bath temperature (k_B = 1)."""

    mass: float = 1.0
    damping: float = 1.0
    temperature: float = 0.001

    def __post_init__(self) -> None:
        if self.mass <= 0:
            raise InvalidParameterError(f"mass must be positive, got {self.mass}")
        if self.damping < 0:
            raise InvalidParameterError(f"damping must be >= 0, got {self.damping}")
        if self.temperature < 0:
            raise InvalidParameterError(f"temperature must be >= 0, got {self.temperature}")

    @property
    def sigma(self) -> float:
        """Fluctuation-dissipation noise amplitude sqrt(2 m gamma T)."""
        return float(np.sqrt(2.0 * self.mass * self.damping * self.temperature))


@dataclass
class RotorState:
    """Angles and angular velocities of the N rotors at time t.

    Angles are never wrapped; observables only see them through sin/cos.
    """

    angles: np.ndarray
    velocities: np.ndarray
    time: float = 0.0

    def __post_init__(self) -> None:
        self.angles = np.asarray(self.angles, dtype=np.float64)
        self.velocities = np.asarray(self.velocities, dtype=np.float64)
        if self.angles.shape != self.velocities.shape or self.angles.ndim != 1:
            raise InvalidParameterError(
                f"angles and velocities must be 1-D of equal length, got "
                f"{self.angles.shape} and {self.velocities.shape}"
            )

    @property
    def n(self) -> int:
        return self.angles.shape[0]


def schedule_at(s, t: float) -> tuple[float, float]:
    """Couplings (J(t), h(t)) at time t."""
    return s.couplings(t)


def control_parameter(s, g: CirculantGraph, t: float) -> float:
    """epsilon(t) = h(t) - 2 r J(t); vanishes at the critical point and is
    positive in the paramagnetic phase."""
    j, h = s.couplings(t)
    return h - 2.0 * g.interaction_range * j


def hamiltonian(g: CirculantGraph, s, state: RotorState) -> float:
    """H = -(J/2) sum_ij A_ij sin(th_i) sin(th_j) - h sum_i cos(th_i)."""
    j, h = s.couplings(state.time)
    sin_th = np.sin(state.angles)
    return -0.5 * j * quadratic_form(g, sin_th, sin_th) - h * float(np.sum(np.cos(state.angles)))


def gradient_arrays(j: float, h: float, sin_th: np.ndarray, cos_th: np.ndarray,
                    neighbor_sin: np.ndarray, out: np.ndarray) -> np.ndarray:
    """dH/dth_i = -J cos(th_i) * sum_j A_ij sin(th_j) + h sin(th_i).

    All inputs are precomputed arrays (any matching shape); used both by the
    public gradient and by the integrator kernel.
    """
    np.multiply(cos_th, neighbor_sin, out=out)
    out *= -j
    if h != 0.0:
        out += h * sin_th
    return out


def gradient(g: CirculantGraph, s, state: RotorState, out: np.ndarray | None = None) -> np.ndarray:
    """Energy gradient with respect to every angle, written into ``out``."""
    if out is None:
        out = np.empty_like(state.angles)
    elif out.shape != state.angles.shape:
        raise InvalidParameterError(f"out must have shape {state.angles.shape}, got {out.shape}")
    j, h = s.couplings(state.time)
    sin_th = np.sin(state.angles)
    cos_th = np.cos(state.angles)
    ns = neighbor_sums(g, sin_th)
    return gradient_arrays(j, h, sin_th, cos_th, ns, out)


def e_min_couplings(g: CirculantGraph, j: float, h: float) -> float:
    """Minimum of H over translation-invariant states at couplings (J, h).

    By translational invariance the minimizer has all angles equal, so the
    problem is scalar: theta* = 0 while h >= 2 J r, else cos(theta*) = h/(2 J r).
    Exact for any J, h >= 0.
    """
    if j < 0 or h < 0:
        raise UnsupportedConfigurationError(
            f"uniform-angle minimum assumes ferromagnetic couplings J, h >= 0, got ({j}, {h})"
        )
    n, r = g.n_vertices, g.interaction_range
    if h >= 2.0 * j * r:
        return -h * n
    return -n * (j * r + h * h / (4.0 * j * r))


def e_min(g: CirculantGraph, s, t: float) -> float:
    """Closed-form instantaneous minimum energy E_min(t)."""
    j, h = s.couplings(t)
    return e_min_couplings(g, j, h)


_INVPHI = (np.sqrt(5.0) - 1.0) / 2.0


def e_min_numeric(g: CirculantGraph, s, t: float, xatol: float = 1e-10) -> float:
    """Golden-section minimization of the single-angle energy over [0, pi].

    Independent of the closed form; kept as an oracle and as a fallback for
    couplings outside its domain.
    """
    j, h = s.couplings(t)
    n, r = g.n_vertices, g.interaction_range

    def f(theta: float) -> float:
        st = np.sin(theta)
        return -j * n * r * st * st - h * n * np.cos(theta)

    a, b = 0.0, float(np.pi)
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > xatol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = f(d)
    theta_best = 0.5 * (a + b)
    return float(min(f(theta_best), f(0.0), f(np.pi)))
