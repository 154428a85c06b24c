"""Stochastic time evolution of rotor states.

The second-order Langevin equation m th'' = -gamma th' - dH/dth + xi is
rewritten as a first-order system in (th, v) with additive noise on the
velocity block. Production scheme is the explicit order-2.0 weak scheme
specialized to additive diagonal noise (Euler predictor, trapezoidal drift
corrector reusing the same Wiener increment); Euler-Maruyama is kept as a
cross-validation reference.

Reproducibility contract: trajectory i is a pure function of (graph,
schedule, params, IntegrationConfig with seed_i). Noise consumption order is
fixed: 2N standard normals for the thermal initial condition, then N per
time-grid step.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import IntegrationFailureError, InvalidParameterError
from .graph import CirculantGraph, NeighborWindow
from .model import PhysicalParams, RotorState, e_min_couplings, gradient_arrays
from .observables import (
    CorrelationAccumulator,
    TrajectoryRecord,
    graph_defect_density_rows,
    kink_count_rows,
    magnetization_rows,
)

SCHEME_WEAK2 = "weak2"
SCHEME_EULER_MARUYAMA = "euler_maruyama"
SCHEMES = (SCHEME_WEAK2, SCHEME_EULER_MARUYAMA)

RNG_ALGORITHM = (
    "numpy PCG64; seed_i = SeedSequence(base_seed, spawn_key=(i,)).generate_state(1)[0]; "
    "Gaussian variates via Generator.standard_normal (ziggurat)"
)

NOISE_BLOCK_STEPS = 64  # steps of pregenerated noise per trajectory; value cannot affect results


@dataclass(frozen=True)
class NoiseModel:
    """Additive noise amplitude on the velocity equation."""

    sigma: float

    def __post_init__(self) -> None:
        if self.sigma < 0:
            raise InvalidParameterError(f"sigma must be >= 0, got {self.sigma}")

    @classmethod
    def from_params(cls, p: PhysicalParams) -> "NoiseModel":
        return cls(sigma=float(np.sqrt(2.0 * p.mass * p.damping * p.temperature)))


@dataclass(frozen=True)
class IntegrationConfig:
    dt: float
    scheme: str = SCHEME_WEAK2
    sample_times: tuple[float, ...] = ()
    seed: int = 0

    def __post_init__(self) -> None:
        if self.dt <= 0:
            raise InvalidParameterError(f"dt must be positive, got {self.dt}")
        if self.scheme not in SCHEMES:
            raise InvalidParameterError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        st = self.sample_times
        if any(st[i] >= st[i + 1] for i in range(len(st) - 1)):
            raise InvalidParameterError("sample_times must be strictly increasing")


def default_dt(gamma: float, tau_q: float) -> float:
    """0.01 * min(1, 1/gamma), clamped to at most tau_q/1000."""
    base = 0.01 * min(1.0, 1.0 / gamma) if gamma > 0 else 0.01
    return min(base, tau_q / 1000.0)


def derive_trajectory_seed(base_seed: int, index: int) -> int:
    """Stable 64-bit per-trajectory seed; documented in every run manifest."""
    return int(np.random.SeedSequence(entropy=base_seed, spawn_key=(index,)).generate_state(1, np.uint64)[0])


def make_generator(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def build_time_grid(tau_q: float, dt: float, sample_times: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    """Uniform dt grid merged with the requested sample instants.

    Returns (times, sample_mask); times[0] = 0 and times[-1] = tau_q, which is
    always flagged as a sample. Steps are shortened where a sample instant
    falls between uniform points, so sampling never interpolates.
    """
    if dt > tau_q:
        raise InvalidParameterError(f"dt = {dt} exceeds tau_q = {tau_q}")
    for t in sample_times:
        if not 0.0 <= t <= tau_q:
            raise InvalidParameterError(f"sample time {t} outside [0, {tau_q}]")
    n_full = int(np.floor(tau_q / dt + 1e-9))
    uniform = np.arange(n_full + 1, dtype=np.float64) * dt
    samples = np.concatenate([np.asarray(sample_times, dtype=np.float64), [tau_q]])
    pts = np.concatenate([uniform, samples])
    flags = np.concatenate([np.zeros(len(uniform), bool), np.ones(len(samples), bool)])
    order = np.argsort(pts, kind="stable")
    pts, flags = pts[order], flags[order]

    tol = max(1e-9 * dt, 1e-12 * tau_q)
    times: list[float] = []
    mask: list[bool] = []
    for p, f in zip(pts, flags):
        if times and p - times[-1] <= tol:
            # merge: a sample instant wins the representative value
            if f and not mask[-1]:
                times[-1] = p
            mask[-1] = mask[-1] or f
        else:
            times.append(float(p))
            mask.append(bool(f))
    times_arr = np.asarray(times)
    times_arr[-1] = tau_q
    return times_arr, np.asarray(mask)


# ---------------------------------------------------------------------------
# Vectorized sincos. np.sin/np.cos on this class of builds run at libm scalar
# speed and dominate the step cost; a Horner evaluation of the standard
# double-precision minimax polynomials (Cephes sin/cos coefficients) over the
# quadrant-reduced argument is ~3x faster and, being plain IEEE arithmetic,
# also bit-stable across libm versions. Accuracy is ~1 ulp for |x| within a
# few thousand radians, far inside the unwrapped-angle range reached here.
# ---------------------------------------------------------------------------

_SINCOF = (1.58962301576546568060e-10, -2.50507477628578072866e-8,
           2.75573136213857245213e-6, -1.98412698295895385996e-4,
           8.33333333332211858878e-3, -1.66666666666666307295e-1)
_COSCOF = (-1.13585365213876817300e-11, 2.08757008419747316778e-9,
           -2.75573141792967388112e-7, 2.48015872888517179954e-5,
           -1.38888888888730564116e-3, 4.16666666666665929218e-2)
_PIO2_HI = 1.5707963267948966
_PIO2_LO = 6.123233995736766e-17
_TWO_OVER_PI = 0.6366197723675814


class _SinCosWorkspace:
    """Preallocated buffers for one (batch, N) fast sincos evaluation."""

    def __init__(self, shape: tuple[int, ...]):
        self.q = np.empty(shape)
        self.r = np.empty(shape)
        self.z = np.empty(shape)
        self.ps = np.empty(shape)
        self.pc = np.empty(shape)
        self.a = np.empty(shape)
        self.b = np.empty(shape)
        self.mask = np.empty(shape, dtype=bool)


def _fast_sincos(x: np.ndarray, sin_out: np.ndarray, cos_out: np.ndarray,
                 ws: _SinCosWorkspace) -> None:
    q, r, z, ps, pc = ws.q, ws.r, ws.z, ws.ps, ws.pc
    # quadrant reduction: x = q * pi/2 + r, |r| <= pi/4
    np.multiply(x, _TWO_OVER_PI, out=q)
    np.rint(q, out=q)
    np.multiply(q, _PIO2_HI, out=r)
    np.subtract(x, r, out=r)
    np.multiply(q, _PIO2_LO, out=z)
    r -= z
    np.multiply(r, r, out=z)
    # sin(r) = r + r z P(z), cos(r) = 1 - z/2 + z^2 Q(z)
    ps.fill(_SINCOF[0])
    for c in _SINCOF[1:]:
        ps *= z
        ps += c
    ps *= z
    ps *= r
    ps += r
    pc.fill(_COSCOF[0])
    for c in _COSCOF[1:]:
        pc *= z
        pc += c
    pc *= z
    pc *= z
    z *= 0.5
    pc -= z
    pc += 1.0
    # angle addition with (cos, sin) of q pi/2: a = cos in {-1, 0, 1},
    # b = sin in {-1, 0, 1}, from the integer-valued q mod 4
    np.multiply(q, 0.25, out=ws.a)
    np.floor(ws.a, out=ws.a)
    ws.a *= -4.0
    ws.a += q                       # a = q mod 4 in {0, 1, 2, 3}
    np.equal(ws.a, 0.0, out=ws.mask)
    np.multiply(ws.mask, 1.0, out=ws.b)
    np.equal(ws.a, 2.0, out=ws.mask)
    np.subtract(ws.b, ws.mask, out=ws.b)
    np.equal(ws.a, 1.0, out=ws.mask)
    np.multiply(ws.mask, 1.0, out=q)          # reuse q for sin(q pi/2)
    np.equal(ws.a, 3.0, out=ws.mask)
    np.subtract(q, ws.mask, out=q)
    # sin x = sin r cos(q pi/2) + cos r sin(q pi/2); cos x likewise
    np.multiply(ps, ws.b, out=sin_out)
    np.multiply(pc, q, out=ws.a)
    sin_out += ws.a
    np.multiply(pc, ws.b, out=cos_out)
    np.multiply(ps, q, out=ws.a)
    cos_out -= ws.a


# ---------------------------------------------------------------------------
# Generic one-step schemes (additive diagonal noise). These are the scheme
# definitions; the rotor kernel below is a buffer-fused specialization and is
# tested against them step for step.
# ---------------------------------------------------------------------------

def euler_maruyama_step(y: np.ndarray, t: float, h: float,
                        drift: Callable[[float, np.ndarray], np.ndarray],
                        noise_diag: np.ndarray | float, dw: np.ndarray) -> np.ndarray:
    """One explicit Euler-Maruyama step of dY = f(t, Y) dt + B dW."""
    return y + drift(t, y) * h + noise_diag * dw


def weak2_step(y: np.ndarray, t: float, h: float,
               drift: Callable[[float, np.ndarray], np.ndarray],
               noise_diag: np.ndarray | float, dw: np.ndarray) -> np.ndarray:
    """One step of the explicit order-2.0 weak scheme for additive noise.

    With state-independent B the supporting-value noise terms of the general
    scheme cancel, leaving the Euler predictor and a trapezoidal drift
    corrector that reuses the same increment. The drift is re-evaluated at
    t + h, which is required to keep weak order 2 for non-autonomous drift.
    """
    f0 = drift(t, y)
    y_pred = y + f0 * h + noise_diag * dw
    f1 = drift(t + h, y_pred)
    return y + 0.5 * (f0 + f1) * h + noise_diag * dw


class RotorKernel:
    """Buffer-fused batched stepper for the rotor system.

    Operates in place on (batch, N) angle/velocity arrays. One instance per
    worker; instances share nothing but the immutable problem definition.
    """

    def __init__(self, g: CirculantGraph, schedule, params: PhysicalParams,
                 scheme: str, batch: int):
        if scheme not in SCHEMES:
            raise InvalidParameterError(f"unknown scheme {scheme!r}")
        self.g = g
        self.schedule = schedule
        self.params = params
        self.scheme = scheme
        n = g.n_vertices
        shape = (batch, n)
        self.window = NeighborWindow(g, (batch,))
        self._s = np.empty(shape)
        self._c = np.empty(shape)
        self._ns = np.empty(shape)
        self._grad = np.empty(shape)
        self._fv0 = np.empty(shape)
        self._thp = np.empty(shape)
        self._vp = np.empty(shape)
        self._tmp = np.empty(shape)
        self._trig = _SinCosWorkspace(shape)
        self._som = NoiseModel.from_params(params).sigma / params.mass

    def _drift_v(self, j: float, h_field: float, th_like: np.ndarray, v_like: np.ndarray,
                 out: np.ndarray) -> np.ndarray:
        """out = (-gamma * v - dH/dth(th)) / m, trig evaluated once.

        Same arithmetic as gradient_arrays, fused: out = (J c ns - h s - gamma v)/m.
        """
        p = self.params
        _fast_sincos(th_like, self._s, self._c, self._trig)
        self.window.apply(self._s, self._ns)
        grad = self._grad
        np.multiply(self._c, self._ns, out=grad)
        grad *= j / p.mass
        np.multiply(v_like, -p.damping / p.mass, out=out)
        out += grad
        if h_field != 0.0:
            np.multiply(self._s, h_field / p.mass, out=grad)
            out -= grad
        return out

    def step_into(self, th: np.ndarray, v: np.ndarray, t: float, h: float,
                  dw_std: np.ndarray) -> None:
        """Advance (th, v) in place from t to t + h; dw_std are standard normals.

        Overflow is not an error here: non-finite rows are detected and
        reported by the caller as integration failures.
        """
        with np.errstate(over="ignore", invalid="ignore"):
            self._step_into(th, v, t, h, dw_std)

    def _step_into(self, th: np.ndarray, v: np.ndarray, t: float, h: float,
                   dw_std: np.ndarray) -> None:
        j0, h0 = self.schedule.couplings(t)
        som_h = self._som * np.sqrt(h)
        tmp = self._tmp
        if self.scheme == SCHEME_EULER_MARUYAMA:
            self._drift_v(j0, h0, th, v, out=self._fv0)
            np.multiply(v, h, out=tmp)
            th += tmp
            np.multiply(self._fv0, h, out=tmp)
            v += tmp
            if som_h != 0.0:
                np.multiply(dw_std, som_h, out=tmp)
                v += tmp
            return

        j1, h1 = self.schedule.couplings(t + h)
        fv0, thp, vp = self._fv0, self._thp, self._vp
        self._drift_v(j0, h0, th, v, out=fv0)
        # predictor (Euler)
        np.multiply(v, h, out=thp)
        thp += th
        np.multiply(fv0, h, out=vp)
        vp += v
        if som_h != 0.0:
            np.multiply(dw_std, som_h, out=tmp)
            vp += tmp
        # corrector: trapezoidal drift with schedule re-evaluated at t + h
        fv1 = self._drift_v(j1, h1, thp, vp, out=self._ns)
        np.add(v, vp, out=tmp)
        tmp *= 0.5 * h
        th += tmp
        np.add(fv0, fv1, out=tmp)
        tmp *= 0.5 * h
        v += tmp
        if som_h != 0.0:
            np.multiply(dw_std, som_h, out=tmp)
            v += tmp


def _initial_sigmas(schedule, params: PhysicalParams) -> tuple[float, float]:
    _, h0 = schedule.couplings(0.0)
    if h0 <= 0:
        raise InvalidParameterError("thermal initialization needs a confining field h(0) > 0")
    return float(np.sqrt(params.temperature / h0)), float(np.sqrt(params.temperature / params.mass))


def thermal_init(g: CirculantGraph, schedule, params: PhysicalParams,
                 rng: np.random.Generator) -> RotorState:
    """Equilibrium start in the initial quadratic well: angles ~ N(0, T/h0),
    velocities ~ N(0, T/m); angles are drawn before velocities."""
    sig_th, sig_v = _initial_sigmas(schedule, params)
    angles = sig_th * rng.standard_normal(g.n_vertices)
    velocities = sig_v * rng.standard_normal(g.n_vertices)
    return RotorState(angles=angles, velocities=velocities, time=0.0)


def step(state: RotorState, g: CirculantGraph, schedule, params: PhysicalParams,
         cfg: IntegrationConfig, rng: np.random.Generator) -> RotorState:
    """Advance a single state by one step of the configured scheme.

    The final step is shortened to land exactly on tau_q.
    """
    tau_q = schedule.tau_q
    if state.time + cfg.dt > tau_q + 0.5 * cfg.dt:
        raise InvalidParameterError(
            f"step from t = {state.time} would overshoot tau_q = {tau_q} by more than dt/2"
        )
    h = min(cfg.dt, tau_q - state.time)
    th = state.angles[None, :].copy()
    v = state.velocities[None, :].copy()
    kernel = RotorKernel(g, schedule, params, cfg.scheme, batch=1)
    dw = rng.standard_normal(g.n_vertices)[None, :]
    kernel.step_into(th, v, state.time, h, dw)
    bad = ~(np.isfinite(th[0]) & np.isfinite(v[0]))
    if bad.any():
        site = int(np.argmax(bad))
        raise IntegrationFailureError(
            f"non-finite state at site {site} after one step from t = {state.time}",
            step_index=0, site_index=site, seed=cfg.seed,
        )
    return RotorState(angles=th[0], velocities=v[0], time=state.time + h)


@dataclass
class BatchResult:
    """Per-trajectory outcomes of one batched run; arrays indexed by row."""

    seeds: np.ndarray
    n1: np.ndarray
    n2: np.ndarray
    rho_e: np.ndarray
    mz: np.ndarray
    failed: np.ndarray
    fail_step: np.ndarray
    fail_site: np.ndarray
    series_times: np.ndarray | None = None
    series_rho_e: np.ndarray | None = None
    series_mz: np.ndarray | None = None
    corr_accums: list[CorrelationAccumulator] = field(default_factory=list)


def run_batch(g: CirculantGraph, schedule, params: PhysicalParams, cfg: IntegrationConfig,
              seeds: Sequence[int], record_series: bool = False,
              correlator_times: Sequence[float] = (),
              d_max: int | None = None) -> BatchResult:
    """Evolve one batch of trajectories from t = 0 to tau_q.

    Rows are independent: every operation is elementwise or row-local, so each
    trajectory's output depends only on its own seed and the shared config.
    Non-finite rows are recorded (first failing step and site) and carried as
    NaN without disturbing the others.
    """
    n = g.n_vertices
    b = len(seeds)
    tau_q = schedule.tau_q
    sample_set = tuple(sorted(set(map(float, cfg.sample_times)) | set(map(float, correlator_times))))
    times, sample_mask = build_time_grid(tau_q, cfg.dt, sample_set)
    n_steps = len(times) - 1
    sample_idx = np.nonzero(sample_mask)[0]
    corr_grid_idx = []
    for t_corr in correlator_times:
        k = int(np.argmin(np.abs(times - t_corr)))
        corr_grid_idx.append(k)

    gens = [make_generator(s) for s in seeds]
    sig_th, sig_v = _initial_sigmas(schedule, params)
    th = np.empty((b, n))
    v = np.empty((b, n))
    for row, gen in enumerate(gens):
        th[row] = sig_th * gen.standard_normal(n)
        v[row] = sig_v * gen.standard_normal(n)

    kernel = RotorKernel(g, schedule, params, cfg.scheme, batch=b)
    window = NeighborWindow(g, (b,))
    ns_buf = np.empty((b, n))
    alive = np.ones(b, dtype=bool)
    fail_step = np.full(b, -1, dtype=np.int64)
    fail_site = np.full(b, -1, dtype=np.int64)

    corr_accums = [CorrelationAccumulator(n, d_max=d_max) for _ in correlator_times]
    n_samples = len(sample_idx)
    s_rho = np.full((b, n_samples), np.nan) if record_series else None
    s_mz = np.full((b, n_samples), np.nan) if record_series else None
    finals = {k: np.full(b, np.nan) for k in ("n1", "n2", "rho_e", "mz")}

    sample_pos = {int(k): i for i, k in enumerate(sample_idx)}

    def record(grid_k: int) -> None:
        t_now = times[grid_k]
        j, h_field = schedule.couplings(t_now)
        sin_th = np.sin(th)
        signs = np.where(sin_th < 0.0, -1.0, 1.0)
        n1 = kink_count_rows(signs) / n
        n2 = graph_defect_density_rows(g, signs, window, ns_buf)
        window.apply(sin_th, ns_buf)
        quad = np.einsum("ij,ij->i", sin_th, ns_buf)
        energy = -0.5 * j * quad - h_field * np.sum(np.cos(th), axis=1)
        rho_e = (energy - e_min_couplings(g, j, h_field)) / (n * g.interaction_range)
        mz = magnetization_rows(sin_th)
        pos = sample_pos.get(grid_k)
        if record_series and pos is not None:
            s_rho[:, pos] = rho_e
            s_mz[:, pos] = mz
        if grid_k == n_steps:
            finals["n1"][:], finals["n2"][:] = n1, n2
            finals["rho_e"][:], finals["mz"][:] = rho_e, mz
        for ci, k_corr in enumerate(corr_grid_idx):
            if k_corr == grid_k and alive.any():
                corr_accums[ci].add_rows(sin_th[alive])

    if sample_mask[0] or 0 in corr_grid_idx:
        record(0)

    noise = np.empty((b, min(NOISE_BLOCK_STEPS, max(n_steps, 1)), n))
    for k0 in range(0, n_steps, NOISE_BLOCK_STEPS):
        k1 = min(k0 + NOISE_BLOCK_STEPS, n_steps)
        cnt = k1 - k0
        for row, gen in enumerate(gens):
            gen.standard_normal((cnt, n), out=noise[row, :cnt])
        for k in range(k0, k1):
            h = times[k + 1] - times[k]
            kernel.step_into(th, v, times[k], h, noise[:, k - k0, :])
            ok = np.isfinite(th).all(axis=1) & np.isfinite(v).all(axis=1)
            newly_dead = alive & ~ok
            if newly_dead.any():
                for row in np.nonzero(newly_dead)[0]:
                    bad = ~(np.isfinite(th[row]) & np.isfinite(v[row]))
                    fail_step[row] = k
                    fail_site[row] = int(np.argmax(bad))
                alive &= ok
            if sample_mask[k + 1] or (k + 1) in corr_grid_idx:
                record(k + 1)

    for key in finals:
        finals[key][~alive] = np.nan
    return BatchResult(
        seeds=np.asarray(seeds, dtype=np.uint64),
        n1=finals["n1"], n2=finals["n2"], rho_e=finals["rho_e"], mz=finals["mz"],
        failed=~alive, fail_step=fail_step, fail_site=fail_site,
        series_times=times[sample_idx] if record_series else None,
        series_rho_e=s_rho, series_mz=s_mz,
        corr_accums=corr_accums,
    )


def run_trajectory(g: CirculantGraph, schedule, params: PhysicalParams,
                   cfg: IntegrationConfig, record_series: bool = False) -> TrajectoryRecord:
    """Run one trajectory seeded by cfg.seed; deterministic in all arguments."""
    res = run_batch(g, schedule, params, cfg, seeds=[cfg.seed], record_series=record_series)
    if res.failed[0]:
        raise IntegrationFailureError(
            f"trajectory with seed {cfg.seed} went non-finite at step {int(res.fail_step[0])}, "
            f"site {int(res.fail_site[0])}",
            step_index=int(res.fail_step[0]), site_index=int(res.fail_site[0]), seed=cfg.seed,
        )
    return TrajectoryRecord(
        seed=cfg.seed,
        n1_final=float(res.n1[0]), n2_final=float(res.n2[0]),
        rho_e_final=float(res.rho_e[0]), mz_final=float(res.mz[0]),
        series_times=res.series_times,
        series_rho_e=res.series_rho_e[0] if record_series else None,
        series_mz=res.series_mz[0] if record_series else None,
    )
