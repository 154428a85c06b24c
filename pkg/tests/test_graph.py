"""Topology and window-sum checks against a dense adjacency oracle."""
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rotoranneal import connectance, neighbor_sums, new_circulant, quadratic_form
from rotoranneal.errors import InvalidParameterError
from rotoranneal.graph import NeighborWindow


def dense_adjacency(n: int, r: int) -> np.ndarray:
    """O(N^2) oracle; exists only in tests."""
    a = np.zeros((n, n))
    for i in range(n):
        for m in range(1, r + 1):
            a[i, (i + m) % n] = 1.0
            a[i, (i - m) % n] = 1.0
    return a


graph_params = st.integers(3, 64).flatmap(
    lambda n: st.tuples(st.just(n), st.integers(1, (n - 1) // 2))
)


def test_construction_examples():
    g = new_circulant(10, 1)
    assert connectance(g) == pytest.approx(2.0 / 9.0)
    g = new_circulant(11, 5)
    assert connectance(g) == 1.0
    with pytest.raises(InvalidParameterError, match="floor"):
        new_circulant(10, 5)
    with pytest.raises(InvalidParameterError):
        new_circulant(2, 1)


def test_connectance_values():
    assert connectance(new_circulant(401, 30)) == pytest.approx(0.15)
    assert connectance(new_circulant(3, 1)) == 1.0
    assert connectance(new_circulant(201, 100)) == 1.0


def test_neighbor_sums_examples():
    g = new_circulant(5, 2)
    assert np.allclose(neighbor_sums(g, np.ones(5)), 4.0)
    g = new_circulant(4, 1)
    assert np.allclose(neighbor_sums(g, [1.0, 2.0, 3.0, 4.0]), [6.0, 4.0, 6.0, 4.0])
    g = new_circulant(6, 2)
    assert np.allclose(neighbor_sums(g, [1, 0, 0, 0, 0, 0]), [0, 1, 1, 0, 1, 1])


def test_neighbor_sums_length_mismatch():
    g = new_circulant(6, 2)
    with pytest.raises(InvalidParameterError, match="length"):
        neighbor_sums(g, np.ones(5))
    with pytest.raises(InvalidParameterError):
        quadratic_form(g, np.ones(6), np.ones(5))


@settings(max_examples=80, deadline=None)
@given(graph_params, st.integers(0, 2 ** 31 - 1))
def test_oracle_equivalence(params, seed):
    n, r = params
    g = new_circulant(n, r)
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(n)
    y = rng.standard_normal(n)
    a = dense_adjacency(n, r)
    ns = neighbor_sums(g, y)
    dense_ns = a @ y
    scale = max(1.0, np.abs(dense_ns).max())
    assert np.abs(ns - dense_ns).max() < 1e-12 * scale
    qf = quadratic_form(g, x, y)
    dense_qf = float(x @ a @ y)
    assert abs(qf - dense_qf) < 1e-12 * max(1.0, abs(dense_qf))


@settings(max_examples=40, deadline=None)
@given(graph_params)
def test_regularity(params):
    n, r = params
    g = new_circulant(n, r)
    assert np.all(neighbor_sums(g, np.ones(n)) == 2.0 * r)


@settings(max_examples=40, deadline=None)
@given(graph_params, st.integers(0, 2 ** 31 - 1))
def test_quadratic_form_symmetry(params, seed):
    n, r = params
    g = new_circulant(n, r)
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(n)
    y = rng.standard_normal(n)
    qxy = quadratic_form(g, x, y)
    qyx = quadratic_form(g, y, x)
    assert abs(qxy - qyx) <= 1e-13 * max(1.0, abs(qxy), abs(qyx))


def test_quadratic_form_examples():
    n, r = 12, 3
    g = new_circulant(n, r)
    assert quadratic_form(g, np.ones(n), np.ones(n)) == pytest.approx(2 * n * r)
    n = 10
    g = new_circulant(n, 1)
    alt = np.array([(-1.0) ** i for i in range(n)])
    assert quadratic_form(g, alt, alt) == pytest.approx(-2 * n)
    e0 = np.zeros(n); e0[0] = 1.0
    e1 = np.zeros(n); e1[1] = 1.0
    assert quadratic_form(g, e0, e1) == pytest.approx(1.0)


def test_window_drift_vs_fresh_recompute():
    # after a full pass, every window must match a from-scratch evaluation
    n, r = 512, 40
    g = new_circulant(n, r)
    rng = np.random.default_rng(3)
    vals = rng.standard_normal(n) * 100.0
    ns = neighbor_sums(g, vals)
    fresh = np.array([
        sum(vals[(i + m) % n] + vals[(i - m) % n] for m in range(1, r + 1))
        for i in range(n)
    ])
    assert np.abs(ns - fresh).max() < 1e-10 * r * np.abs(vals).max()


def test_batched_rows_match_single():
    g = new_circulant(17, 4)
    rng = np.random.default_rng(11)
    batch = rng.standard_normal((5, 17))
    stacked = neighbor_sums(g, batch)
    for row in range(5):
        assert np.array_equal(stacked[row], neighbor_sums(g, batch[row]))


def test_scratch_reuse_matches_fresh():
    g = new_circulant(23, 5)
    rng = np.random.default_rng(7)
    scratch = NeighborWindow(g, (3,))
    out = np.empty((3, 23))
    for _ in range(4):
        vals = rng.standard_normal((3, 23))
        scratch.apply(vals, out)
        assert np.array_equal(out, neighbor_sums(g, vals))
