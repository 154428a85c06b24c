"""Hamiltonian, schedule, gradient and minimum-energy checks."""
import numpy as np
import pytest

from rotoranneal import (
    AnnealSchedule,
    FrozenSchedule,
    PhysicalParams,
    RotorState,
    control_parameter,
    e_min,
    e_min_numeric,
    gradient,
    hamiltonian,
    new_circulant,
    schedule_at,
)
from rotoranneal.errors import InvalidParameterError, UnsupportedConfigurationError
from rotoranneal.model import e_min_couplings

from test_graph import dense_adjacency


def dense_hamiltonian(g, s, state):
    a = dense_adjacency(g.n_vertices, g.interaction_range)
    j, h = s.couplings(state.time)
    sin_th = np.sin(state.angles)
    return -0.5 * j * sin_th @ a @ sin_th - h * np.sum(np.cos(state.angles))


def test_schedule_boundaries():
    s = AnnealSchedule(j0=1.0, h0=6.0, tau_q=8.0)
    assert schedule_at(s, 0.0) == (0.0, 6.0)
    assert schedule_at(s, 8.0) == (1.0, 0.0)
    with pytest.raises(InvalidParameterError):
        schedule_at(s, -0.1)
    with pytest.raises(InvalidParameterError):
        schedule_at(s, 8.1)


def test_schedule_critical_point():
    g = new_circulant(20, 3)
    s = AnnealSchedule.for_graph(g, tau_q=10.0)
    j, h = schedule_at(s, 5.0)
    assert (j, h) == (0.5, 3.0)
    assert control_parameter(s, g, 5.0) == pytest.approx(0.0)
    assert s.t_critical == 5.0


def test_control_parameter_values():
    g = new_circulant(20, 3)
    s = AnnealSchedule.for_graph(g, tau_q=10.0)
    assert control_parameter(s, g, 0.0) == pytest.approx(6.0)
    assert control_parameter(s, g, 7.5) == pytest.approx(-3.0)


def test_parameter_validation():
    with pytest.raises(InvalidParameterError):
        AnnealSchedule(j0=0.0, h0=1.0, tau_q=1.0)
    with pytest.raises(InvalidParameterError):
        PhysicalParams(mass=0.0)
    with pytest.raises(InvalidParameterError):
        PhysicalParams(temperature=-1.0)
    assert PhysicalParams(mass=2.0, damping=3.0, temperature=0.5).sigma == pytest.approx(np.sqrt(6.0))


def test_hamiltonian_ground_states():
    g = new_circulant(16, 2)
    s = AnnealSchedule.for_graph(g, tau_q=4.0)
    n, r = 16, 2
    para = RotorState(np.zeros(n), np.zeros(n), time=0.0)
    assert hamiltonian(g, s, para) == pytest.approx(-s.h0 * n)
    ferro = RotorState(np.full(n, np.pi / 2), np.zeros(n), time=4.0)
    assert hamiltonian(g, s, ferro) == pytest.approx(-s.j0 * n * r)


def test_hamiltonian_matches_dense_oracle():
    g = new_circulant(4, 1)
    s = AnnealSchedule.for_graph(g, tau_q=2.0)
    alt = RotorState(np.array([np.pi / 2, -np.pi / 2, np.pi / 2, -np.pi / 2]), np.zeros(4), time=1.0)
    assert hamiltonian(g, s, alt) == pytest.approx(dense_hamiltonian(g, s, alt))
    rng = np.random.default_rng(5)
    for _ in range(10):
        st = RotorState(rng.uniform(-4, 4, 12), np.zeros(12), time=rng.uniform(0, 2))
        g12 = new_circulant(12, 3)
        s12 = AnnealSchedule.for_graph(g12, tau_q=2.0)
        assert hamiltonian(g12, s12, st) == pytest.approx(dense_hamiltonian(g12, s12, st), rel=1e-12)


def test_gradient_stationary_points():
    g = new_circulant(10, 2)
    s = AnnealSchedule.for_graph(g, tau_q=3.0)
    flat = RotorState(np.zeros(10), np.zeros(10), time=1.3)
    assert np.allclose(gradient(g, s, flat), 0.0)
    ferro = RotorState(np.full(10, np.pi / 2), np.zeros(10), time=3.0)
    assert np.allclose(gradient(g, s, ferro), 0.0)


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(42)
    g = new_circulant(12, 3)
    s = AnnealSchedule.for_graph(g, tau_q=5.0)
    for _ in range(5):
        angles = rng.uniform(-np.pi, np.pi, 12)
        state = RotorState(angles, np.zeros(12), time=rng.uniform(0, 5))
        grad = gradient(g, s, state)
        eps = 1e-6
        for i in range(12):
            up = RotorState(angles.copy(), np.zeros(12), time=state.time)
            dn = RotorState(angles.copy(), np.zeros(12), time=state.time)
            up.angles[i] += eps
            dn.angles[i] -= eps
            fd = (hamiltonian(g, s, up) - hamiltonian(g, s, dn)) / (2 * eps)
            assert grad[i] == pytest.approx(fd, abs=1e-6)


def test_e_min_examples():
    g = new_circulant(25, 4)
    tau = 12.0
    s = AnnealSchedule.for_graph(g, tau_q=tau)
    n, r = 25, 4
    assert e_min(g, s, 0.0) == pytest.approx(-2.0 * r * n)
    assert e_min(g, s, tau) == pytest.approx(-r * n)
    assert e_min(g, s, 0.75 * tau) == pytest.approx(-(5.0 / 6.0) * r * n)
    # paramagnetic branch: linear in (1 - t/tau)
    assert e_min(g, s, 0.25 * tau) == pytest.approx(-2.0 * r * n * 0.75)


def test_e_min_branch_continuity_and_derivative():
    g = new_circulant(31, 2)
    tau = 7.0
    s = AnnealSchedule.for_graph(g, tau_q=tau)
    n, r = 31, 2
    tc = tau / 2
    assert abs(e_min(g, s, tc) - (-r * n)) < 1e-9 * r * n
    eps = 1e-7 * tau
    d_minus = (e_min(g, s, tc) - e_min(g, s, tc - eps)) / eps
    d_plus = (e_min(g, s, tc + eps) - e_min(g, s, tc)) / eps
    expected = 2.0 * r * n / tau
    assert d_minus == pytest.approx(expected, rel=1e-6)
    assert d_plus == pytest.approx(expected, rel=1e-6)
    assert abs(d_plus - d_minus) < 1e-5 * expected


def test_e_min_numeric_agreement_sweep():
    g = new_circulant(19, 3)
    s = AnnealSchedule.for_graph(g, tau_q=9.0)
    for t in np.linspace(0.0, 9.0, 100):
        closed = e_min(g, s, t)
        numeric = e_min_numeric(g, s, t)
        assert abs(closed - numeric) < 1e-8 * abs(closed)


def test_e_min_numeric_boundaries():
    g = new_circulant(11, 1)
    s = AnnealSchedule.for_graph(g, tau_q=3.0)
    assert e_min_numeric(g, s, 0.0) == pytest.approx(-s.h0 * 11)
    assert e_min_numeric(g, s, 3.0) == pytest.approx(-s.j0 * 11 * 1)


def test_e_min_non_default_constants_still_exact():
    # general closed form covers any positive couplings; oracle cross-check
    g = new_circulant(13, 2)
    s = AnnealSchedule(j0=0.7, h0=1.9, tau_q=4.0)
    for t in np.linspace(0.0, 4.0, 37):
        assert e_min(g, s, t) == pytest.approx(e_min_numeric(g, s, t), abs=1e-8 * 13 * 2)


def test_e_min_rejects_negative_couplings():
    g = new_circulant(9, 1)
    with pytest.raises(UnsupportedConfigurationError):
        e_min_couplings(g, -0.5, 1.0)


def test_e_min_lower_bounds_hamiltonian():
    rng = np.random.default_rng(9)
    g = new_circulant(14, 3)
    s = AnnealSchedule.for_graph(g, tau_q=6.0)
    for _ in range(1000):
        t = rng.uniform(0, 6.0)
        state = RotorState(rng.uniform(-np.pi, np.pi, 14), np.zeros(14), time=t)
        h_val = hamiltonian(g, s, state)
        lo = e_min(g, s, t)
        assert h_val >= lo - 1e-9 * abs(lo)


def test_hamiltonian_scales_linearly_in_n():
    # translation-invariant states at fixed r
    r, tau = 3, 5.0
    for theta in (0.3, 1.2):
        vals = []
        for n in (20, 40, 80):
            g = new_circulant(n, r)
            s = AnnealSchedule.for_graph(g, tau_q=tau)
            state = RotorState(np.full(n, theta), np.zeros(n), time=2.0)
            vals.append(hamiltonian(g, s, state) / n)
        assert vals[0] == pytest.approx(vals[1], rel=1e-12)
        assert vals[1] == pytest.approx(vals[2], rel=1e-12)


def test_frozen_schedule():
    s = FrozenSchedule(j=0.4, h=1.1, tau_q=10.0)
    assert s.couplings(0.0) == (0.4, 1.1)
    assert s.couplings(7.3) == (0.4, 1.1)
    with pytest.raises(InvalidParameterError):
        s.couplings(11.0)
    with pytest.raises(InvalidParameterError):
        FrozenSchedule(j=-0.1, h=1.0, tau_q=1.0)
