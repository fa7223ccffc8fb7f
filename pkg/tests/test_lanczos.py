import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qwanneal.lanczos import lowest_eigenpair


def random_symmetric(n, seed):
    a = np.random.default_rng(seed).standard_normal((n, n))
    return (a + a.T) / 2


@settings(max_examples=25, deadline=None)
@given(n=st.integers(2, 60), seed=st.integers(0, 10_000))
def test_matches_dense_eigh(n, seed):
    A = random_symmetric(n, seed)
    v0 = np.random.default_rng(seed + 1).standard_normal(n)
    res = lowest_eigenpair(lambda x: A @ x, v0, tol=1e-12, max_matvecs=2000)
    w, v = np.linalg.eigh(A)
    assert res.converged
    assert res.value == pytest.approx(w[0], abs=1e-9)
    assert abs(abs(res.vector @ v[:, 0]) - 1) < 1e-6 or w[1] - w[0] < 1e-6
    assert np.linalg.norm(A @ res.vector - res.value * res.vector) <= 1e-9 * max(1, abs(res.value))


def test_keeps_input_shape():
    A = random_symmetric(12, 0)
    res = lowest_eigenpair(lambda x: (A @ x.ravel()).reshape(x.shape), np.ones((3, 2, 2)))
    assert res.vector.shape == (3, 2, 2)


def test_deflation_gives_second_eigenpair():
    A = random_symmetric(30, 3)
    w, v = np.linalg.eigh(A)
    res = lowest_eigenpair(lambda x: A @ x, np.ones(30), deflate=[v[:, 0]], tol=1e-12, max_matvecs=3000)
    assert res.value == pytest.approx(w[1], abs=1e-9)
    assert abs(res.vector @ v[:, 0]) < 1e-8


def test_seed_inside_deflated_space_falls_back_to_random_start():
    A = np.diag([0.0, 1.0, 2.0, 3.0])
    e0 = np.array([1.0, 0, 0, 0])
    res = lowest_eigenpair(lambda x: A @ x, e0.copy(), deflate=[e0], tol=1e-12)
    assert res.value == pytest.approx(1.0)


def test_exact_eigenvector_seed_converges_immediately():
    A = np.diag([-2.0, 1.0, 5.0])
    res = lowest_eigenpair(lambda x: A @ x, np.array([1.0, 0.0, 0.0]))
    assert res.matvecs == 1
    assert res.value == -2.0 and res.converged


def test_budget_exhaustion_reports_unconverged():
    # clustered spectrum: the lowest two are 1e-9 apart, out of reach of 3 matvecs
    w = np.concatenate([[0.0, 1e-9], np.linspace(1, 2, 198)])
    res = lowest_eigenpair(lambda x: w * x, np.ones(200), tol=1e-14, max_matvecs=3, krylov_dim=3)
    assert not res.converged
    assert res.matvecs == 3
    assert res.residual > 0


def test_one_dimensional_problem():
    res = lowest_eigenpair(lambda x: 4.0 * x, np.array([2.0]))
    assert res.value == 4.0 and res.converged
