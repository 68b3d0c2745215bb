import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from excitrans.dynamics import (WINDOW, WINDOW_FORMULA, Structure, build_hamiltonian,
                                efficiency, eigendecompose, max_ipr, trajectory,
                                transfer_probability, OccupationTrajectory)
from excitrans.errors import CoincidentSitesError

from conftest import expm_taylor, random_structure

CORNERS = Structure(0, [[0, 0, 0], [1, 1, 1]])


def naive_hamiltonian(coords):
    n = len(coords)
    h = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            if i != j:
                h[i][j] = 1.0 / np.linalg.norm(np.subtract(coords[i], coords[j])) ** 3
    return h


def test_window_values():
    assert WINDOW_FORMULA == pytest.approx(3.26484, abs=1e-5)
    assert WINDOW == pytest.approx(WINDOW_FORMULA / 4)


def test_corner_pair_coupling():
    h = build_hamiltonian(CORNERS)
    assert h[0, 1] == pytest.approx(1 / (3 * np.sqrt(3)), rel=1e-14)
    assert h[0, 1] == pytest.approx(0.19245, abs=1e-5)


def test_half_distance_coupling():
    h = build_hamiltonian(Structure(0, [[0, 0, 0], [0.5, 0, 0]]))
    assert h[0, 1] == 8.0


def test_hamiltonian_matches_double_loop(rng):
    s = random_structure(rng, 6)
    h = build_hamiltonian(s)
    np.testing.assert_allclose(h, naive_hamiltonian(s.coords), rtol=1e-14, atol=0)
    assert np.array_equal(h, h.T)
    assert np.all(np.diag(h) == 0)


def test_coincident_sites_rejected():
    with pytest.raises(CoincidentSitesError):
        Structure(0, [[0, 0, 0], [0.5, 0.5, 0.5], [0.5, 0.5, 0.5 + 1e-10], [1, 1, 1]])


def test_two_by_two_eigensystem():
    v = 0.7
    e = eigendecompose(np.array([[0.0, v], [v, 0.0]]))
    np.testing.assert_allclose(e.eigenvalues, [-v, v], atol=1e-15)
    lo = e.eigenvectors[:, 0] * np.sign(e.eigenvectors[0, 0])
    hi = e.eigenvectors[:, 1] * np.sign(e.eigenvectors[0, 1])
    np.testing.assert_allclose(lo, np.array([1, -1]) / np.sqrt(2), atol=1e-15)
    np.testing.assert_allclose(hi, np.array([1, 1]) / np.sqrt(2), atol=1e-15)


@pytest.mark.parametrize("seed", range(5))
def test_eight_site_reconstruction(seed):
    s = random_structure(np.random.default_rng(seed), 8)
    h = build_hamiltonian(s)
    e = eigendecompose(h)
    v, w = e.eigenvectors, e.eigenvalues
    assert np.abs(v @ np.diag(w) @ v.T - h).max() < 1e-10
    assert np.abs(v.T @ v - np.eye(8)).max() < 1e-10
    assert abs(w.sum()) < 1e-10
    assert np.all(np.diff(w) >= 0)
    np.testing.assert_allclose(w, np.linalg.eigvalsh(h), atol=1e-10)


def test_eigensolver_large_dynamic_range():
    # a pair at 1e-3 gives couplings ~1e9 next to O(1) entries
    s = Structure(0, [[0, 0, 0], [0.5, 0.5, 0.5], [0.5, 0.5, 0.501], [1, 1, 1]])
    h = build_hamiltonian(s)
    e = eigendecompose(h)
    v, w = e.eigenvectors, e.eigenvalues
    assert np.abs(v @ np.diag(w) @ v.T - h).max() < 1e-10 * np.abs(h).max()
    assert np.abs(v.T @ v - np.eye(4)).max() < 1e-10


def test_transfer_zero_at_t0(rng):
    e = eigendecompose(build_hamiltonian(random_structure(rng, 5)))
    assert transfer_probability(e, 0.0) == pytest.approx(0.0, abs=1e-28)


def test_two_site_rabi():
    e = eigendecompose(build_hamiltonian(CORNERS))
    t = np.linspace(0, 20, 101)
    np.testing.assert_allclose(transfer_probability(e, t), np.sin(t / (3 * np.sqrt(3))) ** 2,
                               atol=1e-14)


@pytest.mark.parametrize("n", range(4, 9))
def test_transfer_matches_series_exponential(n):
    rng = np.random.default_rng(100 + n)
    for k in range(20):
        s = random_structure(rng, n)
        h = build_hamiltonian(s)
        e = eigendecompose(h)
        t = rng.uniform(0, WINDOW_FORMULA)
        u = expm_taylor(-1j * h * t)
        assert transfer_probability(e, t) == pytest.approx(abs(u[n - 1, 0]) ** 2, abs=1e-8)
        # reciprocity in/out
        assert transfer_probability(e, t) == pytest.approx(
            transfer_probability(e, t, src=n - 1, dst=0), abs=1e-14)


def test_corner_pair_efficiency_formula_window():
    r = efficiency(CORNERS, window=WINDOW_FORMULA)
    assert r.efficiency == pytest.approx(np.sin(np.pi / 5) ** 2, abs=1e-12)
    assert r.t_star == WINDOW_FORMULA


def test_corner_pair_efficiency_default_window():
    r = efficiency(CORNERS)
    assert r.efficiency == pytest.approx(np.sin(np.pi / 20) ** 2, abs=1e-12)
    assert r.t_star == WINDOW
    assert r.window == WINDOW


def test_efficiency_interior_maximum_refined(rng):
    # compare the refined optimum with a very fine brute-force grid
    for n in (4, 6):
        s = random_structure(rng, n)
        e = eigendecompose(build_hamiltonian(s))
        t = np.linspace(0, WINDOW, 400_001)
        p = transfer_probability(e, t)
        r = efficiency(s)
        assert r.efficiency >= p.max() - 1e-12
        assert r.efficiency == pytest.approx(p.max(), abs=1e-9)
        assert 0 <= r.t_star <= WINDOW


def test_efficiency_permutation_invariant(rng):
    s = random_structure(rng, 7)
    perm = [0, 3, 5, 1, 2, 4, 6]
    a = efficiency(s).efficiency
    b = efficiency(s.with_coords(s.coords[perm])).efficiency
    assert a == pytest.approx(b, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(3, 8),
       c=st.floats(0.3, 3.0))
def test_scale_covariance(seed, n, c):
    s = random_structure(np.random.default_rng(seed), n)
    h = build_hamiltonian(s)
    hc = build_hamiltonian(s.with_coords(s.coords * c))
    np.testing.assert_allclose(hc, h / c**3, rtol=1e-12)
    a = efficiency(s, window=WINDOW)
    b = efficiency(s.with_coords(s.coords * c), window=WINDOW * c**3)
    assert a.efficiency == pytest.approx(b.efficiency, abs=1e-9)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 8))
def test_unitarity_and_ipr_bounds(seed, n):
    s = random_structure(np.random.default_rng(seed), n)
    tr = trajectory(s, 257)
    np.testing.assert_allclose(tr.occupations.sum(axis=1), 1.0, atol=1e-9)
    assert np.all(tr.ipr >= 1 - 1e-12) and np.all(tr.ipr <= n + 1e-12)
    assert tr.ipr[0] == 1.0
    assert 1 <= max_ipr(tr) <= n + 1e-12
    eps = efficiency(s).efficiency
    assert 0 <= eps <= 1


def test_trajectory_initial_state(rng):
    tr = trajectory(random_structure(rng, 5), 10)
    np.testing.assert_array_equal(tr.occupations[0], [1, 0, 0, 0, 0])
    assert tr.times[0] == 0 and tr.times[-1] == WINDOW


def test_uniform_occupation_ipr():
    n = 6
    tr = OccupationTrajectory(np.array([0.0, 1.0]), np.full((2, n), 1.0 / n))
    np.testing.assert_allclose(tr.ipr, n)
    assert max_ipr(tr) == pytest.approx(n)


def test_max_ipr_constant_trajectory():
    q = np.tile([0.5, 0.25, 0.25], (5, 1))
    tr = OccupationTrajectory(np.linspace(0, 1, 5), q)
    assert max_ipr(tr) == pytest.approx(1 / (0.25 + 0.0625 * 2))


def test_trajectory_rejects_single_sample(rng):
    with pytest.raises(ValueError):
        trajectory(random_structure(rng, 4), 1)
