"""Simulated 4-AFC contrast detection with interleaved QUEST staircases.

Two observers answer the trials. The ``weibull`` observer ignores the
carrier entirely and serves as a control. The ``resonator`` observer feeds
each of its channels through a threshold element driven by the carrier.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .quest import QuestParams, quest_estimate, quest_init, quest_recommend, quest_update
from .resonator import LowPassConfig, ThresholdElementConfig, predicted_level, run_pipeline
from .signals import CarrierSpec, SignalError, constant, generate_carrier

TRIAL_CSV_HEADER = (
    "session",
    "block",
    "condition",
    "trial",
    "intensity",
    "target_quadrant",
    "response",
    "correct",
)


@dataclass(frozen=True)
class ObserverModel:
    """Synthetic observer.

    ``weibull``: p(correct) = gamma + (1 - gamma - delta)(1 - exp(-(c/alpha)**beta))
    with ``alpha`` chosen so that p(true_threshold) = criterion.

    ``resonator``: the contrast becomes a signal ``contrast_gain * c`` on the
    target channel. Every channel adds the carrier and passes through the
    threshold element; its decision variable is the predicted smoothed
    level plus Gaussian noise and the largest one wins.
    """

    kind: str = "resonator"
    true_threshold: float = 0.3
    beta: float = 3.0
    gamma: float = 0.25
    delta: float = 0.01
    criterion: float = 0.5
    element: ThresholdElementConfig = field(
        default_factory=lambda: ThresholdElementConfig("comparator", u_th=0.5, u_h=1.0)
    )
    carrier_kind: str = "triangle"
    f_t: float = 80.0
    contrast_gain: Optional[float] = None
    internal_noise_sd: float = 0.2
    n_channels: int = 4
    lowpass_periods: int = 4

    def __post_init__(self):
        if self.kind not in ("weibull", "resonator"):
            raise SignalError(f"unknown observer kind {self.kind!r}")
        if self.kind == "weibull" and not 0 < self.true_threshold < 1:
            raise SignalError("true_threshold must lie in (0, 1)")
        if not self.internal_noise_sd > 0:
            raise SignalError("internal_noise_sd must be positive")
        if self.contrast_gain is not None and not self.contrast_gain > 0:
            raise SignalError("contrast_gain must be positive")
        if self.n_channels < 2:
            raise SignalError("need at least 2 channels")

    @property
    def gain(self) -> float:
        # default: half contrast alone just reaches threshold
        return self.contrast_gain if self.contrast_gain is not None else self.element.u_th / 0.5

    @property
    def weibull_scale(self) -> float:
        frac = (self.criterion - self.gamma) / (1.0 - self.gamma - self.delta)
        return self.true_threshold / (-math.log(1.0 - frac)) ** (1.0 / self.beta)

    def p_correct(self, contrast: float) -> float:
        c = max(contrast, 0.0)
        return self.gamma + (1.0 - self.gamma - self.delta) * -math.expm1(-((c / self.weibull_scale) ** self.beta))

    def channel_levels(self, contrast: float, carrier_amplitude: float) -> Tuple[float, float]:
        """Predicted (target, distractor) smoothed levels."""
        lvl = lambda u: predicted_level(self.element, self.carrier_kind, u, carrier_amplitude, self.f_t)
        return lvl(self.gain * contrast), lvl(0.0)


def observer_respond(observer: ObserverModel, contrast: float, carrier_amplitude: float, rng, target: Optional[int] = None):
    """Simulate one trial; returns ``(target, chosen, correct)``."""
    if not 0.0 <= contrast <= 1.0:
        raise SignalError(f"contrast {contrast} outside [0, 1]")
    n = observer.n_channels
    if target is None:
        target = int(rng.integers(n))
    if observer.kind == "weibull":
        if rng.random() < observer.p_correct(contrast):
            chosen = target
        else:
            chosen = int((target + 1 + rng.integers(n - 1)) % n)
    else:
        hit, miss = observer.channel_levels(contrast, carrier_amplitude)
        dv = miss + observer.internal_noise_sd * rng.standard_normal(n)
        dv[target] += hit - miss
        chosen = int(np.argmax(dv))
    return target, chosen, chosen == target


def validate_closed_form(observer: ObserverModel, n_trials: int = 100, seed=0, samples_per_period: int = 2048):
    """Cross-check predicted channel levels against full trace simulation.

    Draws random (contrast, carrier amplitude) pairs, simulates a constant
    input plus carrier through the threshold element and moving average,
    and returns the largest deviation from the predicted level as a
    fraction of the element's full-scale output.
    """
    if observer.kind != "resonator" or observer.carrier_kind == "gaussian_noise":
        raise SignalError("validation needs a resonator observer with a periodic carrier")
    rng = np.random.default_rng(seed)
    el = observer.element
    full_scale = el.u_h if el.kind == "comparator" else observer.f_t * el.tau * el.u_lcd
    rate = samples_per_period * observer.f_t
    duration = 3 * observer.lowpass_periods / observer.f_t
    lpf = LowPassConfig(carrier_periods=observer.lowpass_periods, f_t=observer.f_t)
    worst = 0.0
    for _ in range(n_trials):
        contrast = float(rng.uniform(0, 1))
        amp = float(rng.uniform(0, 3 * el.u_th))
        u = observer.gain * contrast
        carrier = generate_carrier(CarrierSpec(observer.carrier_kind, amp, f_t=observer.f_t), duration, rate)
        run = run_pipeline(constant(u, duration, rate), carrier, el, lpf)
        w = run.window_samples
        # skip the first period too: an LCD cannot fire on its first sample
        sim = float(run.smoothed_output.samples[w + samples_per_period:-w].mean())
        pred = predicted_level(el, observer.carrier_kind, u, amp, observer.f_t)
        worst = max(worst, abs(sim - pred) / full_scale)
    return worst


@dataclass(frozen=True)
class SessionDesign:
    conditions: Tuple[float, ...] = (0.0, 0.375, 0.5, 0.75)
    trials_per_condition: int = 40
    blocks: int = 2

    def __post_init__(self):
        if sum(1 for c in self.conditions if c == 0) != 1:
            raise SignalError("design needs exactly one zero-amplitude baseline condition")
        if any(c < 0 for c in self.conditions):
            raise SignalError("carrier amplitudes must be >= 0")
        if self.trials_per_condition < 1 or self.blocks < 1:
            raise SignalError("trials_per_condition and blocks must be >= 1")

    @classmethod
    def from_unit(cls, unit: float, ratios=(0.75, 1.0, 1.5), **kw) -> "SessionDesign":
        return cls(conditions=(0.0,) + tuple(r * unit for r in ratios), **kw)

    @property
    def baseline_index(self) -> int:
        return self.conditions.index(0.0)


@dataclass(frozen=True)
class Trial:
    session: int
    block: int
    condition: int
    trial: int
    intensity: float
    target_quadrant: int
    response: int
    correct: bool

    def row(self) -> dict:
        return {
            "session": self.session,
            "block": self.block,
            "condition": self.condition,
            "trial": self.trial,
            "intensity": self.intensity,
            "target_quadrant": self.target_quadrant,
            "response": self.response,
            "correct": int(self.correct),
        }


@dataclass(frozen=True)
class SessionResult:
    conditions: Tuple[float, ...]
    vct: np.ndarray = field(repr=False)  # shape (n_conditions, n_blocks)
    modulation: np.ndarray = field(repr=False)  # percent, per condition
    trials: Tuple[Trial, ...] = field(repr=False)

    def summary(self) -> dict:
        return {
            "conditions": list(self.conditions),
            "vct": self.vct.tolist(),
            "vct_mean": self.vct.mean(axis=1).tolist(),
            "modulation_percent": self.modulation.tolist(),
        }


def session_rng(seed, index: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), int(index)])


def run_session(
    design: SessionDesign,
    observer: ObserverModel,
    quest_params: QuestParams = QuestParams(),
    seed=0,
    session_index: int = 0,
) -> SessionResult:
    """One interleaved session: a fresh staircase per (condition, block)."""
    rng = session_rng(seed, session_index)
    n_cond = len(design.conditions)
    vct = np.empty((n_cond, design.blocks))
    trials: List[Trial] = []
    for block in range(design.blocks):
        states = [quest_init(quest_params) for _ in range(n_cond)]
        order = np.repeat(np.arange(n_cond), design.trials_per_condition)
        rng.shuffle(order)
        for k, cond in enumerate(order):
            cond = int(cond)
            x = quest_recommend(states[cond])
            target, chosen, ok = observer_respond(observer, x, design.conditions[cond], rng)
            quest_update(states[cond], x, ok)
            trials.append(Trial(session_index, block, cond, k, x, target, chosen, ok))
        for cond in range(n_cond):
            vct[cond, block] = quest_estimate(states[cond])
    base = vct[design.baseline_index]
    modulation = (100.0 * (vct - base) / base).mean(axis=1)
    modulation[design.baseline_index] = 0.0
    return SessionResult(tuple(design.conditions), vct, modulation, tuple(trials))


def _session_task(args):
    design, observer, params, seed, idx = args
    return run_session(design, observer, params, seed, idx)


def run_sessions(
    design: SessionDesign,
    observer: ObserverModel,
    quest_params: QuestParams = QuestParams(),
    n_sessions: int = 1,
    seed=0,
    workers: int = 1,
) -> List[SessionResult]:
    """Independent sessions, each seeded from ``(seed, session index)``."""
    tasks = [(design, observer, quest_params, seed, i) for i in range(n_sessions)]
    if workers > 1 and n_sessions > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_session_task, tasks))
    return [_session_task(t) for t in tasks]


def _staircase_vct(observer, amplitude, quest_params, trials, blocks, rng):
    vcts = []
    for _ in range(blocks):
        state = quest_init(quest_params)
        for _ in range(trials):
            x = quest_recommend(state)
            _, _, ok = observer_respond(observer, x, amplitude, rng)
            quest_update(state, x, ok)
        vcts.append(quest_estimate(state))
    return float(np.mean(vcts))


def vct_resonance_curve(
    amplitudes: Sequence[float],
    observer: ObserverModel,
    n_sessions: int = 100,
    seed=0,
    quest_params: QuestParams = QuestParams(),
    trials_per_condition: int = 40,
    blocks: int = 2,
) -> List[Tuple[float, float]]:
    """Mean VCT per carrier amplitude over ``n_sessions`` simulated sessions.

    Each (amplitude, session) staircase draws from its own stream keyed by
    ``(seed, session, amplitude index)``, so curves for two observers run
    with the same seed share their random numbers.
    """
    amps = [float(a) for a in amplitudes]
    if not amps:
        raise SignalError("empty amplitude grid")
    curve = []
    for j, amp in enumerate(amps):
        vcts = [
            _staircase_vct(
                observer, amp, quest_params, trials_per_condition, blocks,
                np.random.default_rng([int(seed), s, j]),
            )
            for s in range(n_sessions)
        ]
        curve.append((amp, float(np.mean(vcts))))
    return curve


def with_noise(observer: ObserverModel, sd: float) -> ObserverModel:
    return replace(observer, internal_noise_sd=sd)
