import itertools
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ladder_exact import ladder_ground_energy
from qwanneal import dense
from qwanneal.baselines import (
    ROBUST_STA,
    WEAK_STA,
    OracleError,
    StaParams,
    brute_force,
    is_local_minimum,
    metropolis_samples,
    quench,
    robust_sta,
    sample_local_minima,
    sta,
)
from qwanneal.instance import Chain, Ladder, RandomRegular, classical_energy, from_couplings, generate


def test_ferromagnetic_chain_has_two_minima():
    inst = from_couplings(5, [(i, i + 1, 1.0) for i in range(4)])
    e, winners = brute_force(inst)
    assert e == -4.0
    assert sorted(w.tolist() for w in winners) == [[-1] * 5, [1] * 5]


def test_frustrated_triangle_degeneracy():
    inst = from_couplings(3, [(0, 1, -1.0), (1, 2, -1.0), (0, 2, -1.0)])
    e, winners = brute_force(inst)
    assert e == -1.0
    assert len(winners) == 6


def test_fields_break_the_flip_pairing():
    inst = from_couplings(2, [(0, 1, 1.0)], fields=[0.1, 0.0])
    e, winners = brute_force(inst)
    assert e == pytest.approx(-1.1)
    assert [w.tolist() for w in winners] == [[1, 1]]


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10_000), with_fields=st.booleans())
def test_enumeration_matches_direct_scan(seed, with_fields):
    inst = generate(RandomRegular(10, 3), seed)
    if with_fields:
        inst = inst.with_fields(np.random.default_rng(seed).uniform(-0.3, 0.3, 10))
    energies = classical_energy(inst, dense.all_configs(10))
    e, winners = brute_force(inst)
    assert e == pytest.approx(energies.min())
    assert len(winners) == int(np.sum(energies <= energies.min() + 1e-9))


def test_enumeration_crosses_chunk_boundary():
    inst = generate(Ladder(10, 2), 3)
    e, winners = brute_force(inst)
    e_sta, _ = robust_sta(inst)
    assert e_sta >= e - 1e-12
    assert all(classical_energy(inst, w) == pytest.approx(e) for w in winners)


def test_enumeration_cap():
    with pytest.raises(OracleError):
        brute_force(generate(Chain(30), 0))


def test_sta_params_validation_and_counts():
    for kwargs in [dict(beta0=0.0), dict(beta0=5.0, beta_max=1.0), dict(r=1.0), dict(steps_per_beta=0)]:
        with pytest.raises(ValueError):
            StaParams(**kwargs)
    p = StaParams(beta0=1.0, beta_max=8.0, r=2.0, steps_per_beta=3)
    assert p.n_temperatures == 3 and p.total_steps == 9


def test_sta_is_deterministic_and_consistent():
    inst = generate(Ladder(12, 2), 1)
    a = sta(inst, WEAK_STA)
    b = sta(inst, WEAK_STA)
    assert a[0] == b[0] and np.array_equal(a[1], b[1])
    assert a[0] == pytest.approx(classical_energy(inst, a[1]))


@pytest.mark.parametrize("seed", range(5))
def test_robust_sta_finds_small_minima(seed):
    inst = generate(Ladder(8, 2), seed)
    assert robust_sta(inst, ROBUST_STA, restarts=2)[0] == pytest.approx(brute_force(inst)[0])


def test_quench_reaches_local_minimum():
    inst = generate(RandomRegular(20, 3), 2)
    rng = np.random.default_rng(0)
    for _ in range(10):
        start = rng.choice([-1, 1], size=20)
        end = quench(inst, start)
        assert is_local_minimum(inst, end)
        assert classical_energy(inst, end) <= classical_energy(inst, start)


def test_sampled_local_minima():
    inst = generate(Ladder(10, 2), 4)
    minima = sample_local_minima(inst, n_runs=10)
    energies = [e for e, _ in minima]
    assert energies == sorted(energies)
    assert len({tuple(c) for _, c in minima}) == len(minima)
    for e, c in minima:
        assert is_local_minimum(inst, c) and c[0] == 1
        assert e == pytest.approx(classical_energy(inst, c))


def test_metropolis_detailed_balance():
    inst = from_couplings(3, [(0, 1, 0.8), (1, 2, -0.5), (0, 2, 0.3)], fields=[0.2, 0.0, -0.1])
    beta = 0.7
    samples = metropolis_samples(inst, beta, 1_000_000, seed=3)
    configs = np.array(list(itertools.product([1, -1], repeat=3)))
    weights = np.exp(-beta * classical_energy(inst, configs))
    expected = weights / weights.sum()
    index = ((1 - samples) // 2) @ np.array([4, 2, 1])
    observed = np.bincount(index, minlength=8) / len(samples)
    assert np.allclose(observed, expected, rtol=0.01)


@pytest.mark.parametrize("length,width", [(6, 2), (10, 2), (4, 4), (5, 3)])
def test_ladder_transfer_oracle_matches_enumeration(length, width):
    for seed in range(3):
        inst = generate(Ladder(length, width), seed)
        assert ladder_ground_energy(inst, length, width) == pytest.approx(brute_force(inst)[0], abs=1e-12)


def test_ferromagnetic_chain_has_one_local_minimum_class():
    inst = from_couplings(10, [(i, i + 1, 1.0) for i in range(9)])
    assert sta(inst, WEAK_STA)[0] == -9.0
    minima = sample_local_minima(inst, n_runs=10)
    assert len(minima) == 1 and minima[0][0] == -9.0


def test_robust_preset_reaches_enumeration_minimum_every_seed():
    inst = generate(Ladder(10, 2), 6)
    e0 = brute_force(inst)[0]
    assert all(sta(inst, replace(ROBUST_STA, seed=s))[0] == pytest.approx(e0, abs=1e-9) for s in range(20))


def test_weak_preset_finds_many_minima_on_ladder40():
    inst = generate(Ladder(40, 2), 0)
    assert 5 <= len(sample_local_minima(inst, WEAK_STA, 20)) <= 20
