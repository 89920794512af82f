"""Paired resampling statistics: sign-flip permutation test and BCa Cohen's d."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats as sps


class DegenerateInputError(ValueError):
    """Input has no variability to work with."""


@dataclass(frozen=True)
class PermutationResult:
    observed_stat: float
    p_value: float
    n_reshuffles: int


@dataclass(frozen=True)
class EffectSize:
    cohens_d: float
    ci_low: float
    ci_high: float
    n_bootstrap: int


def _paired(control, test, min_n):
    c = np.asarray(control, dtype=float)
    t = np.asarray(test, dtype=float)
    if c.ndim != 1 or c.shape != t.shape:
        raise ValueError(f"control and test must be 1-D and equal length, got {c.shape} and {t.shape}")
    if c.size < min_n:
        raise ValueError(f"need at least {min_n} pairs, got {c.size}")
    if not (np.all(np.isfinite(c)) and np.all(np.isfinite(t))):
        raise ValueError("inputs must be finite")
    return t - c


def permutation_ttest_paired(control, test, n_reshuffles: int = 5000, seed=0) -> PermutationResult:
    """Two-sided paired permutation test on the mean difference.

    Each reshuffle swaps the control/test labels of every pair with
    probability 1/2, i.e. flips the sign of its difference. The p-value
    uses add-one smoothing: ``(1 + #extreme) / (1 + n_reshuffles)``.
    """
    d = _paired(control, test, 2)
    if n_reshuffles < 1:
        raise ValueError("n_reshuffles must be >= 1")
    observed = float(d.mean())
    rng = np.random.default_rng(seed)
    extreme = 0
    tol = 1e-12 * max(1.0, float(np.abs(d).max()))
    for start in range(0, n_reshuffles, 1000):
        k = min(1000, n_reshuffles - start)
        signs = rng.choice(np.array([-1.0, 1.0]), size=(k, d.size))
        null = np.abs((signs * d).mean(axis=1))
        extreme += int(np.count_nonzero(null >= abs(observed) - tol))
    return PermutationResult(
        observed_stat=observed,
        p_value=(1 + extreme) / (1 + n_reshuffles),
        n_reshuffles=n_reshuffles,
    )


def paired_cohens_d(diff, axis=-1):
    return np.mean(diff, axis=axis) / np.std(diff, axis=axis, ddof=1)


def bootstrap_cohens_d_paired(control, test, n_bootstrap: int = 5000, seed=0, confidence: float = 0.95) -> EffectSize:
    """Paired Cohen's d, mean(test - control) / SD(test - control), with a BCa interval.

    Pairs are resampled with replacement. All-zero differences give d = 0
    with a zero-width interval; constant non-zero differences have no
    defined d and raise :class:`DegenerateInputError`.
    """
    d = _paired(control, test, 3)
    if np.all(d == 0):
        return EffectSize(0.0, 0.0, 0.0, n_bootstrap)
    if np.ptp(d) == 0:
        raise DegenerateInputError("differences have zero variance; Cohen's d is undefined")
    point = float(paired_cohens_d(d))
    res = sps.bootstrap(
        (d,),
        paired_cohens_d,
        n_resamples=n_bootstrap,
        confidence_level=confidence,
        method="BCa",
        vectorized=True,
        random_state=np.random.default_rng(seed),
    )
    lo, hi = float(res.confidence_interval.low), float(res.confidence_interval.high)
    return EffectSize(cohens_d=point, ci_low=lo, ci_high=hi, n_bootstrap=n_bootstrap)
