"""QUEST adaptive staircase on a linear contrast grid.

The psychometric function is the Watson-Pelli Weibull,

    p(correct | x, T) = gamma + (1 - gamma - delta) * (1 - exp(-10**(beta * (x - T + eps))))

evaluated in linear contrast units. ``eps`` shifts the curve so that
``p(correct | T, T) == criterion``, which makes ``T`` the contrast at the
requested accuracy (50% by default).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np


class QuestError(ValueError):
    pass


@dataclass(frozen=True)
class QuestParams:
    beta: float = 3.0
    delta: float = 0.01
    gamma: float = 0.25
    grain: float = 0.001
    range: float = 1.0
    t_guess: float = 0.5
    prior_sd: float = 0.3
    criterion: float = 0.5
    estimator: str = "mean"

    def __post_init__(self):
        if not 0 < self.gamma < self.criterion < 1:
            raise QuestError("need 0 < gamma < criterion < 1")
        if not 0 <= self.delta < 1 - self.gamma:
            raise QuestError("delta must lie in [0, 1 - gamma)")
        if self.criterion >= 1 - self.delta:
            raise QuestError("criterion must be below the lapse ceiling 1 - delta")
        if not (self.grain > 0 and self.range > 0 and self.beta > 0):
            raise QuestError("grain, range and beta must be positive")
        if not self.prior_sd > 0:
            raise QuestError("prior_sd must be positive")
        if self.estimator not in ("mean", "mode", "median"):
            raise QuestError(f"unknown estimator {self.estimator!r}")

    @property
    def threshold_offset(self) -> float:
        """The ``eps`` that pins p(correct) at x == T to ``criterion``."""
        frac = (self.criterion - self.gamma) / (1.0 - self.gamma - self.delta)
        return math.log10(-math.log(1.0 - frac)) / self.beta

    def p_correct(self, x, threshold):
        z = self.beta * (np.asarray(x) - np.asarray(threshold) + self.threshold_offset)
        return self.gamma + (1.0 - self.gamma - self.delta) * -np.expm1(-np.power(10.0, z))


@dataclass
class QuestState:
    params: QuestParams
    grid: np.ndarray = field(repr=False)
    log_posterior: np.ndarray = field(repr=False)
    history: List[Tuple[float, bool]] = field(default_factory=list)

    def posterior(self) -> np.ndarray:
        lp = self.log_posterior - self.log_posterior.max()
        p = np.exp(lp)
        return p / p.sum()

    def mode(self) -> float:
        return float(self.grid[np.argmax(self.log_posterior)])

    def mean(self) -> float:
        return float(np.dot(self.grid, self.posterior()))

    def median(self) -> float:
        cdf = np.cumsum(self.posterior())
        return float(self.grid[np.searchsorted(cdf, 0.5)])

    def sd(self) -> float:
        p = self.posterior()
        m = np.dot(self.grid, p)
        return float(np.sqrt(np.dot((self.grid - m) ** 2, p)))

    def copy(self) -> "QuestState":
        return QuestState(self.params, self.grid, self.log_posterior.copy(), list(self.history))


def make_grid(params: QuestParams) -> np.ndarray:
    n = int(round(params.range / params.grain)) + 1
    return np.linspace(0.0, params.range, n)


def quest_init(params: QuestParams = QuestParams()) -> QuestState:
    grid = make_grid(params)
    log_prior = -0.5 * ((grid - params.t_guess) / params.prior_sd) ** 2
    return QuestState(params, grid, log_prior)


def snap(state: QuestState, x: float) -> float:
    x = min(max(x, float(state.grid[0])), float(state.grid[-1]))
    return float(state.grid[int(round((x - state.grid[0]) / state.params.grain))])


def quest_recommend(state: QuestState) -> float:
    return snap(state, state.mean())


def quest_update(state: QuestState, intensity: float, correct: bool) -> QuestState:
    """Multiply in the likelihood of one response; mutates and returns ``state``."""
    if not 0.0 <= intensity <= state.params.range:
        raise QuestError(f"intensity {intensity} outside [0, {state.params.range}]")
    p = state.params.p_correct(intensity, state.grid)
    like = p if correct else 1.0 - p
    with np.errstate(divide="ignore"):
        state.log_posterior = state.log_posterior + np.log(like)
    if not np.isfinite(state.log_posterior.max()):
        raise QuestError("posterior is no longer normalizable")
    state.history.append((float(intensity), bool(correct)))
    return state


def quest_estimate(state: QuestState) -> float:
    if not state.history:
        raise QuestError("no trials recorded")
    return {"mean": state.mean, "mode": state.mode, "median": state.median}[state.params.estimator]()
