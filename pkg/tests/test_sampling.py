import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pbnsim import _kernels as K
from pbnsim.rng import Xoshiro256, seed_state
from pbnsim.sampling import (alias_distribution, alias_next, build_alias, build_perturbation_plan, draw,
                             perturbation_probs)


def masked_bit_law(k, k_last, p):
    """Exact joint law of the k_last masked bits from one table draw."""
    plan_table = build_alias(perturbation_probs(k, p))
    law = alias_distribution(plan_table)
    mask = (1 << k_last) - 1
    joint = np.zeros(1 << k_last)
    for c, q in enumerate(law):
        joint[c & mask] += q
    return joint


def test_size_one_table():
    t = build_alias([1.0])
    assert t.size == 1
    assert alias_next(t, 0.999, 0.999) == 0
    assert draw(t, None) == 0


def test_half_half():
    t = build_alias([0.5, 0.5])
    assert np.allclose(alias_distribution(t), [0.5, 0.5], atol=1e-15)
    assert alias_next(t, 0.1, 0.0) == 0


def test_three_way_exact():
    t = build_alias([0.2, 0.3, 0.5])
    assert np.max(np.abs(alias_distribution(t) - [0.2, 0.3, 0.5])) <= 1e-12
    # frozen construction: cells 0 and 1 borrow from 2, cell 2 is full
    assert np.allclose(t.prob, [0.6, 0.9, 1.0])
    assert t.alias.tolist() == [2, 2, 2]


def test_rejects_bad_input():
    with pytest.raises(ValueError):
        build_alias([])
    with pytest.raises(ValueError):
        build_alias([0.5, 0.4])
    with pytest.raises(ValueError):
        build_alias([1.5, -0.5])


def test_empirical_frequencies():
    probs = np.array([0.1, 0.2, 0.3, 0.4])
    t = build_alias(probs)
    rng = Xoshiro256(1)
    n = 200_000
    counts = np.bincount([draw(t, rng) for _ in range(n)], minlength=4)
    sigma = np.sqrt(n * probs * (1 - probs))
    assert np.all(np.abs(counts - n * probs) <= 4 * sigma)


def test_kernel_pick_matches_python():
    t = build_alias([0.05, 0.15, 0.3, 0.5])
    rs = seed_state(9)
    py = Xoshiro256(9)
    for _ in range(2000):
        assert K.alias_pick(t.prob, t.alias, 0, 4, rs) == draw(t, py)


def test_numba_build_matches():
    rng = np.random.default_rng(0)
    for size in (1, 2, 7, 64):
        probs = rng.dirichlet(np.ones(size))
        prob, alias = K.build_alias_arrays(probs)
        t = build_alias(probs)
        assert np.array_equal(prob, t.prob) and np.array_equal(alias, t.alias)


def test_plan_ten_nodes():
    plan = build_perturbation_plan(10, 4, 0.01)
    assert (plan.g, plan.k, plan.k_last, plan.mask) == (3, 4, 2, 0b11)


def test_plan_single_group():
    plan = build_perturbation_plan(4, 16, 0.01)
    assert (plan.g, plan.k, plan.k_last, plan.mask) == (1, 4, 4, 0b1111)


def test_uniform_table_at_half():
    assert np.allclose(perturbation_probs(2, 0.5), [0.25] * 4)


def test_plan_limits():
    with pytest.raises(ValueError):
        build_perturbation_plan(10, 25, 0.1)
    with pytest.raises(ValueError):
        build_perturbation_plan(10, 0, 0.1)
    with pytest.raises(ValueError):
        build_perturbation_plan(0, 4, 0.1)


@pytest.mark.parametrize("p", [0.1, 0.25, 0.5])
def test_masked_bits_iid(p):
    for k in range(1, 7):
        for k_last in range(1, k + 1):
            joint = masked_bit_law(k, k_last, p)
            for c in range(1 << k_last):
                ones = bin(c).count("1")
                assert abs(joint[c] - p ** ones * (1 - p) ** (k_last - ones)) <= 1e-12


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(0.0, 1.0), min_size=1, max_size=64).filter(lambda w: sum(w) > 1e-6))
def test_alias_reproduces_distribution(weights):
    probs = np.array(weights) / np.sum(weights)
    t = build_alias(probs)
    assert np.all((t.alias >= 0) & (t.alias < t.size))
    assert np.all((t.prob >= 0) & (t.prob <= 1.0 + 1e-12))
    assert np.max(np.abs(alias_distribution(t) - probs)) <= 1e-12


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 12), st.integers(1, 60))
def test_plan_invariants(k_max, n):
    plan = build_perturbation_plan(n, k_max, 0.05)
    assert 1 <= plan.k_last <= plan.k <= k_max
    assert (plan.g - 1) * plan.k + plan.k_last == n
    assert plan.mask == (1 << plan.k_last) - 1
