import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from darsim.stats import (
    DegenerateInputError,
    bootstrap_cohens_d_paired,
    paired_cohens_d,
    permutation_ttest_paired,
)


def exact_sign_flip_p(d):
    """Full enumeration of the sign-flip null (without add-one smoothing)."""
    obs = abs(d.mean())
    flips = np.array(list(itertools.product([-1.0, 1.0], repeat=d.size)))
    null = np.abs((flips * d).mean(axis=1))
    return float(np.mean(null >= obs - 1e-12))


def test_identical_groups_are_not_significant():
    x = np.random.default_rng(0).normal(size=30)
    res = permutation_ttest_paired(x, x.copy(), n_reshuffles=2000)
    assert res.observed_stat == 0
    assert res.p_value >= 0.99


def test_large_shift_is_significant():
    rng = np.random.default_rng(1)
    c = rng.normal(size=20)
    res = permutation_ttest_paired(c, c + 10 + rng.normal(size=20), n_reshuffles=2000)
    assert res.p_value <= 0.01
    assert res.p_value == pytest.approx(1 / 2001)


def test_permutation_matches_exact_enumeration():
    rng = np.random.default_rng(2)
    c = rng.normal(size=10)
    t = c + 0.6 + rng.normal(size=10)
    exact = exact_sign_flip_p(t - c)
    res = permutation_ttest_paired(c, t, n_reshuffles=40000, seed=3)
    assert res.p_value == pytest.approx(exact, abs=0.01)


def test_permutation_is_deterministic():
    rng = np.random.default_rng(4)
    c, t = rng.normal(size=15), rng.normal(size=15)
    assert permutation_ttest_paired(c, t, 999, seed=7) == permutation_ttest_paired(c, t, 999, seed=7)


def test_permutation_sign_symmetry():
    rng = np.random.default_rng(5)
    c, t = rng.normal(size=12), rng.normal(size=12)
    a = permutation_ttest_paired(c, t, 3000, seed=1)
    b = permutation_ttest_paired(t, c, 3000, seed=1)
    assert a.p_value == b.p_value
    assert a.observed_stat == pytest.approx(-b.observed_stat)


def test_input_validation():
    with pytest.raises(ValueError):
        permutation_ttest_paired([1, 2, 3], [1, 2])
    with pytest.raises(ValueError):
        permutation_ttest_paired([1, 2, np.nan], [1, 2, 3])
    with pytest.raises(ValueError):
        bootstrap_cohens_d_paired([1, 2], [1, 2])


def test_cohens_d_definition():
    d = np.array([1.0, 2.0, 3.0, 4.0])
    assert paired_cohens_d(d) == pytest.approx(2.5 / np.std(d, ddof=1))


def test_identical_inputs_give_zero_effect():
    x = np.arange(10.0)
    eff = bootstrap_cohens_d_paired(x, x)
    assert (eff.cohens_d, eff.ci_low, eff.ci_high) == (0.0, 0.0, 0.0)


def test_constant_shift_is_degenerate():
    x = np.arange(10.0)
    with pytest.raises(DegenerateInputError):
        bootstrap_cohens_d_paired(x, x + 1)


def test_bootstrap_interval_brackets_point_and_is_deterministic():
    rng = np.random.default_rng(6)
    c = rng.normal(size=25)
    t = c + 0.8 + rng.normal(size=25)
    eff = bootstrap_cohens_d_paired(c, t, n_bootstrap=2000, seed=2)
    assert eff.ci_low <= eff.cohens_d <= eff.ci_high
    assert eff.cohens_d == pytest.approx(paired_cohens_d(t - c))
    assert eff == bootstrap_cohens_d_paired(c, t, n_bootstrap=2000, seed=2)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=3, max_size=12), st.integers(0, 2**16))
def test_p_value_lies_in_unit_interval(diffs, seed):
    d = np.asarray(diffs)
    res = permutation_ttest_paired(np.zeros_like(d), d, 200, seed=seed)
    assert 1 / 201 <= res.p_value <= 1.0
