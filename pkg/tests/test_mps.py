import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qwanneal.mps import (
    MatrixProductState,
    TruncationPolicy,
    add,
    apply_sz,
    entropy,
    flipped,
    overlap,
    product_state_x,
    split_theta,
    truncation_rank,
)


def random_state(n, m, seed):
    return MatrixProductState.random(n, m, np.random.default_rng(seed))


def dense_entropy(vec, n, bond):
    mat = vec.reshape(2 ** (bond + 1), 2 ** (n - bond - 1))
    s = np.linalg.svd(mat / np.linalg.norm(vec), compute_uv=False)
    p = s[s > 1e-15] ** 2
    return float(-np.sum(p * np.log(p)))


def test_product_x_amplitudes_uniform():
    psi = product_state_x(6)
    assert np.allclose(psi.to_dense(), 2**-3)
    assert psi.max_bond == 1
    assert np.allclose(psi.entropies(), 0.0)


def test_basis_state_and_amplitude():
    config = [1, -1, -1, 1]
    psi = MatrixProductState.basis_state(config)
    vec = psi.to_dense()
    index = int("".join("0" if s > 0 else "1" for s in config), 2)
    assert vec[index] == 1.0 and np.count_nonzero(vec) == 1
    assert psi.amplitude(config) == 1.0
    assert psi.amplitude([1, 1, 1, 1]) == 0.0
    assert np.allclose(psi.expect_sz_all(), config)


@settings(max_examples=30, deadline=None)
@given(n=st.integers(2, 7), m=st.integers(1, 6), seed=st.integers(0, 10_000), center=st.integers(0, 6))
def test_canonical_form_invariants(n, m, seed, center):
    center = min(center, n - 1)
    psi = random_state(n, m, seed)
    before = psi.to_dense()
    psi.canonicalize(center)
    after = psi.to_dense()
    # state unchanged up to normalisation, norm is one
    assert np.allclose(after, before / np.linalg.norm(before))
    assert psi.norm() == pytest.approx(1.0, abs=1e-12)
    for k, t in enumerate(psi.tensors):
        ml, d, mr = t.shape
        if k < center:
            mat = t.reshape(ml * d, mr)
            assert np.allclose(mat.T @ mat, np.eye(mr), atol=1e-12)
        elif k > center:
            mat = t.reshape(ml, d * mr)
            assert np.allclose(mat @ mat.T, np.eye(ml), atol=1e-12)


@settings(max_examples=20, deadline=None)
@given(n=st.integers(2, 7), seed=st.integers(0, 10_000), target=st.integers(0, 6))
def test_move_center_preserves_state(n, seed, target):
    psi = random_state(n, 4, seed)
    ref = psi.to_dense()
    psi.move_center(min(target, n - 1))
    assert np.allclose(psi.to_dense(), ref)


@settings(max_examples=20, deadline=None)
@given(n=st.integers(2, 7), seed=st.integers(0, 10_000))
def test_entropies_match_dense(n, seed):
    psi = random_state(n, 3, seed)
    vec = psi.to_dense()
    ent = psi.entropies()
    assert np.allclose(ent, [dense_entropy(vec, n, b) for b in range(n - 1)], atol=1e-10)
    assert psi.max_entropy() == pytest.approx(ent.max())
    assert np.allclose(psi.to_dense(), vec)


def test_bell_pair_entropy_is_ln2():
    bell = MatrixProductState([np.array([[[1.0, 0.0], [0.0, 1.0]]]).reshape(1, 2, 2), np.eye(2).reshape(2, 2, 1) / np.sqrt(2)])
    assert bell.bond_entropy(0) == pytest.approx(np.log(2))
    assert entropy(np.array([1.0])) == 0.0


@settings(max_examples=20, deadline=None)
@given(n=st.integers(1, 7), seed=st.integers(0, 10_000))
def test_expect_sz_matches_dense(n, seed):
    psi = random_state(n, 4, seed)
    vec = psi.to_dense()
    p = vec**2 / np.sum(vec**2)
    configs = np.array(list(itertools.product([1, -1], repeat=n)))
    assert np.allclose(psi.expect_sz_all(), configs.T @ p, atol=1e-12)
    assert psi.expect_sz(n // 2) == pytest.approx(float(configs[:, n // 2] @ p))


def test_amplitudes_match_dense():
    psi = random_state(5, 4, 3)
    vec = psi.to_dense()
    for idx, config in enumerate(itertools.product([1, -1], repeat=5)):
        assert psi.amplitude(config) == pytest.approx(vec[idx], abs=1e-14)


def test_flip_sz_add_overlap():
    psi = random_state(5, 3, 1)
    vec = psi.to_dense()
    assert np.allclose(flipped(psi).to_dense(), vec[::-1])
    sz0 = np.repeat([1.0, -1.0], 16)
    assert np.allclose(apply_sz(psi, 0).to_dense(), sz0 * vec)
    other = random_state(5, 2, 2)
    assert np.allclose(add(psi, other).to_dense(), vec + other.to_dense())
    assert overlap(psi, other) == pytest.approx(float(vec @ other.to_dense()))
    single = MatrixProductState.product([[0.6, 0.8]])
    assert np.allclose(add(single, single).to_dense(), [1.2, 1.6])


def test_truncation_rank_rules():
    s = np.sqrt(np.array([0.5, 0.3, 0.15, 0.05]))
    assert truncation_rank(s, TruncationPolicy(eta=0.06, m_min=1)) == (3, pytest.approx(0.05))
    assert truncation_rank(s, TruncationPolicy(eta=0.0, m_min=1))[0] == 4
    assert truncation_rank(s, TruncationPolicy(eta=0.9, m_min=1))[0] == 1
    assert truncation_rank(s, TruncationPolicy(eta=0.9, m_min=2))[0] == 2
    assert truncation_rank(s, TruncationPolicy(eta=0.0, m_min=1, m_max=2))[0] == 2
    # a degenerate pair is never split
    d = np.sqrt(np.array([0.4, 0.3, 0.3]))
    assert truncation_rank(d, TruncationPolicy(eta=0.35, m_min=1))[0] == 3


def test_policy_validation():
    for kwargs in [dict(eta=1.0), dict(eta=-1e-3), dict(m_min=0), dict(m_min=5, m_max=4)]:
        with pytest.raises(ValueError):
            TruncationPolicy(**kwargs)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000), e1=st.integers(1, 8), e2=st.integers(1, 8))
def test_truncation_monotone_in_eta(seed, e1, e2):
    """Looser eta never keeps more states, and discards at least as much weight."""
    theta = np.random.default_rng(seed).standard_normal((4, 2, 2, 4))
    lo, hi = sorted([10.0**-e1, 10.0**-e2])
    A1, B1, s1, d1 = split_theta(theta, TruncationPolicy(eta=lo, m_min=1), "right")
    A2, B2, s2, d2 = split_theta(theta, TruncationPolicy(eta=hi, m_min=1), "right")
    assert len(s2) <= len(s1)
    assert d2 >= d1 - 1e-15
    assert d1 <= lo and d2 <= hi


def test_split_theta_reconstructs_untruncated():
    theta = np.random.default_rng(0).standard_normal((3, 2, 2, 2))
    theta /= np.linalg.norm(theta)
    for absorb in ("left", "right"):
        A, B, s, d = split_theta(theta, TruncationPolicy(eta=0.0, m_min=1), absorb)
        assert d == pytest.approx(0.0, abs=1e-15)
        assert np.allclose(np.tensordot(A, B, axes=(2, 0)), theta)


def test_truncate_bond_keeps_norm():
    psi = random_state(6, 6, 4)
    psi.move_center(3)
    psi, discarded, kept = psi.truncate_bond(2, TruncationPolicy(eta=1e-2, m_min=1))
    assert kept <= 6
    assert discarded <= 1e-2
    assert psi.norm() == pytest.approx(1.0)
    with pytest.raises(ValueError):
        psi.truncate_bond(0, TruncationPolicy())


def test_checkpoint_round_trip(tmp_path):
    psi = random_state(5, 3, 9)
    path = tmp_path / "state.npz"
    psi.save(path)
    back = MatrixProductState.load(path)
    assert back.center == psi.center
    assert all(np.array_equal(a, b) for a, b in zip(back.tensors, psi.tensors))


def test_shape_validation():
    with pytest.raises(ValueError):
        MatrixProductState([np.ones((1, 3, 1))])
    with pytest.raises(ValueError):
        MatrixProductState([np.ones((1, 2, 2)), np.ones((3, 2, 1))])
    with pytest.raises(ValueError):
        MatrixProductState([np.ones((2, 2, 1))])
