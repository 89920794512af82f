"""Threshold elements, the moving-average low-pass stage and closed-form levels.

Two memory-free threshold elements are modelled:

* ``lcd`` (level crossing detector) emits a rectangular spike of height
  ``u_lcd`` and duration ``tau`` at every upward crossing of ``u_th``.
* ``comparator`` outputs ``u_h`` while the input is above ``u_th``, else 0.

The smoothing stage is a centered rectangular moving average. When its
window spans a whole number of carrier periods the carrier is removed
exactly, which is what makes the restored signal noise-free.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .signals import SampledSignal, SignalError, mix

ELEMENT_KINDS = ("lcd", "comparator")

REGION_A = "A_no_output"
REGION_B = "B_signal_restored"
REGION_C = "C_saturated"

LPF_CUTOFF_FACTOR = 0.443


class RegionError(ValueError):
    """Parameters fall outside the region where a prediction holds."""


@dataclass(frozen=True)
class ThresholdElementConfig:
    kind: str
    u_th: float
    u_lcd: float = 1.0
    tau: float = 1e-3
    u_h: float = 1.0

    def __post_init__(self):
        if self.kind not in ELEMENT_KINDS:
            raise SignalError(f"unknown threshold element {self.kind!r}; expected one of {ELEMENT_KINDS}")
        if self.kind == "lcd":
            if not self.tau > 0:
                raise SignalError("tau must be positive for an LCD")
            if not self.u_lcd > 0:
                raise SignalError("u_lcd must be positive")
        elif not self.u_h > 0:
            raise SignalError("u_h must be positive")

    def check_relation(self, f_t: float, f_c: Optional[float] = None, f_s: Optional[float] = None):
        """Check the ordering f_s < f_c < f_t < 1/tau, raising on violation.

        Only the strict orderings are checked; "much less than" is left to
        the caller. Missing frequencies are skipped.
        """
        chain = [("f_s", f_s), ("f_c", f_c), ("f_t", f_t)]
        if self.kind == "lcd":
            chain.append(("1/tau", 1.0 / self.tau))
        present = [(name, v) for name, v in chain if v is not None]
        for (n1, v1), (n2, v2) in zip(present, present[1:]):
            if not v1 < v2:
                raise SignalError(f"frequency ordering violated: {n1}={v1} is not below {n2}={v2}")


@dataclass(frozen=True)
class LowPassConfig:
    """Moving-average window, either whole carrier periods or seconds."""

    carrier_periods: Optional[int] = None
    f_t: Optional[float] = None
    seconds: Optional[float] = None

    def __post_init__(self):
        if (self.carrier_periods is None) == (self.seconds is None):
            raise SignalError("give exactly one of carrier_periods or seconds")
        if self.carrier_periods is not None:
            if int(self.carrier_periods) != self.carrier_periods or self.carrier_periods < 1:
                raise SignalError("carrier_periods must be a positive integer")
            if not (self.f_t is not None and self.f_t > 0):
                raise SignalError("carrier_periods mode needs the carrier frequency f_t")
        elif not self.seconds > 0:
            raise SignalError("window seconds must be positive")

    @property
    def window_seconds(self) -> float:
        if self.seconds is not None:
            return self.seconds
        return self.carrier_periods / self.f_t

    @property
    def cutoff_hz(self) -> float:
        return LPF_CUTOFF_FACTOR / self.window_seconds

    def window_samples(self, sample_rate_hz: float) -> int:
        return max(1, int(round(self.window_seconds * sample_rate_hz)))


@dataclass(frozen=True)
class RegionLabel:
    label: str
    condition: str

    def __str__(self):
        return self.label


@dataclass(frozen=True)
class ResonatorRun:
    signal: SampledSignal = field(repr=False)
    input: SampledSignal = field(repr=False)
    te_output: SampledSignal = field(repr=False)
    smoothed_output: SampledSignal = field(repr=False)
    crossing_times: np.ndarray = field(repr=False)
    element: ThresholdElementConfig
    lowpass: LowPassConfig

    @property
    def window_samples(self) -> int:
        return self.lowpass.window_samples(self.input.sample_rate_hz)


def spike_samples(cfg: ThresholdElementConfig, sample_rate_hz: float) -> int:
    return int(round(cfg.tau * sample_rate_hz))


def upward_crossings(x: np.ndarray, level: float) -> np.ndarray:
    """Indices n with x[n-1] <= level < x[n]."""
    return np.flatnonzero((x[:-1] <= level) & (x[1:] > level)) + 1


def apply_threshold_element(signal: SampledSignal, cfg: ThresholdElementConfig) -> SampledSignal:
    x = signal.samples
    if cfg.kind == "comparator":
        return signal.with_samples(np.where(x > cfg.u_th, float(cfg.u_h), 0.0))

    width = spike_samples(cfg, signal.sample_rate_hz)
    if width < 2:
        raise SignalError(
            f"tau={cfg.tau} s spans {width} sample(s) at {signal.sample_rate_hz} Hz; at least 2 needed"
        )
    starts = upward_crossings(x, cfg.u_th)
    edges = np.zeros(x.size + 1, dtype=np.int64)
    np.add.at(edges, starts, 1)
    np.add.at(edges, np.minimum(starts + width, x.size), -1)
    active = np.cumsum(edges[:-1]) > 0
    return signal.with_samples(np.where(active, float(cfg.u_lcd), 0.0))


def moving_average(x: np.ndarray, window: int) -> np.ndarray:
    """Centered rectangular moving average; windows shrink at the edges.

    Sample ``i`` averages ``x[i - window//2 : i - window//2 + window]``
    clipped to the trace.
    """
    n = x.size
    if window < 1 or window > n:
        raise SignalError(f"window of {window} samples does not fit a trace of {n}")
    csum = np.concatenate(([0.0], np.cumsum(x, dtype=float)))
    start = np.arange(n) - window // 2
    lo = np.clip(start, 0, n)
    hi = np.clip(start + window, 0, n)
    return (csum[hi] - csum[lo]) / (hi - lo)


def apply_lowpass(signal: SampledSignal, cfg: LowPassConfig) -> SampledSignal:
    window = cfg.window_samples(signal.sample_rate_hz)
    if window > len(signal):
        raise SignalError(
            f"low-pass window ({window} samples) is longer than the trace ({len(signal)} samples)"
        )
    return signal.with_samples(moving_average(signal.samples, window))


def run_pipeline(
    signal: SampledSignal,
    carrier: SampledSignal,
    te: ThresholdElementConfig,
    lpf: LowPassConfig,
) -> ResonatorRun:
    summed = mix(signal, carrier)
    out = apply_threshold_element(summed, te)
    if te.kind == "lcd":
        crossings = upward_crossings(summed.samples, te.u_th) / summed.sample_rate_hz
    else:
        crossings = np.empty(0)
    return ResonatorRun(
        signal=signal,
        input=summed,
        te_output=out,
        smoothed_output=apply_lowpass(out, lpf),
        crossing_times=crossings,
        element=te,
        lowpass=lpf,
    )


def predict_lcd_level(f_t: float, tau: float, u_lcd: float) -> float:
    """Smoothed high level of a periodically triggered LCD: f_t * tau * u_lcd."""
    if not f_t * tau < 1:
        raise SignalError(f"f_t*tau = {f_t * tau} >= 1: spikes overlap permanently")
    return f_t * tau * u_lcd


@dataclass(frozen=True)
class ComparatorPrediction:
    t_h: float
    t_r: float
    level: float


def predict_comparator(u_s: float, u_t: float, u_th: float, u_h: float, f_t: float) -> ComparatorPrediction:
    """Comparator output for a triangle carrier whose minimum is 0.

    ``t_r`` is the rise time from the carrier minimum to the effective
    threshold ``u_th - u_s``, ``t_h`` the time per period spent above it and
    ``level`` the smoothed output ``u_h * t_h * f_t``. Valid when
    ``u_s <= u_th < u_s + u_t``.
    """
    if not u_s <= u_th:
        raise RegionError(f"signal alone is supra-threshold: U_s > U_th ({u_s} > {u_th})")
    if not u_th < u_s + u_t:
        rel = "=" if math.isclose(u_s + u_t, u_th) else "<"
        raise RegionError(f"no threshold crossing: U_s + U_t {rel} U_th ({u_s} + {u_t} vs {u_th})")
    t_r = (u_th - u_s) / (2.0 * u_t * f_t)
    t_h = (u_t - u_th + u_s) / (u_t * f_t)
    level = u_h * (u_t - u_th) / u_t + (u_h / u_t) * u_s
    return ComparatorPrediction(t_h=t_h, t_r=t_r, level=level)


def triangle_slope(f_t: float, u_t: float) -> float:
    return 2.0 * f_t * u_t


def classify_region(kind: str, u_s: float, u_t: float, u_th: float) -> RegionLabel:
    if kind not in ELEMENT_KINDS:
        raise SignalError(f"unknown threshold element {kind!r}")
    total = u_s + u_t
    if total < u_th:
        return RegionLabel(REGION_A, "U_s + U_t < U_th")
    if total == u_th:
        return RegionLabel(REGION_A, "U_s + U_t = U_th")
    if kind == "lcd" and u_th < u_t:
        return RegionLabel(REGION_C, "U_th < U_t")
    if kind == "lcd":
        return RegionLabel(REGION_B, "U_th < U_s + U_t, U_t <= U_th")
    return RegionLabel(REGION_B, "U_th < U_s + U_t")


def fraction_above(carrier_kind: str, u: float, u_t: float, u_th: float, noise_rms: Optional[float] = None) -> float:
    """Fraction of time ``u + carrier(t)`` spends strictly above ``u_th``.

    Periodic carriers span [0, u_t]; for ``gaussian_noise`` ``u_t`` is the
    RMS of a zero-mean carrier.
    """
    gap = u_th - u
    if carrier_kind == "gaussian_noise":
        if u_t == 0:
            return 1.0 if gap < 0 else 0.0
        return 0.5 * math.erfc(gap / (u_t * math.sqrt(2.0)))
    if gap < 0:
        return 1.0
    if gap >= u_t:
        return 0.0
    if carrier_kind in ("triangle", "sawtooth"):
        return (u_t - gap) / u_t
    if carrier_kind == "sine":
        return math.acos(2.0 * gap / u_t - 1.0) / math.pi
    raise SignalError(f"unknown carrier kind {carrier_kind!r}")


def predicted_level(
    cfg: ThresholdElementConfig,
    carrier_kind: str,
    u: float,
    u_t: float,
    f_t: Optional[float] = None,
) -> float:
    """Smoothed steady-state output for a constant input ``u`` plus carrier.

    Region-aware: zero when the sum never reaches threshold. An LCD fires
    once per period only while the input both starts below and reaches above
    threshold, so a constant supra-threshold input gives no spikes.
    """
    if cfg.kind == "comparator":
        return cfg.u_h * fraction_above(carrier_kind, u, u_t, cfg.u_th)
    if carrier_kind == "gaussian_noise":
        raise SignalError("closed-form LCD level is not defined for a noise carrier")
    if f_t is None:
        raise SignalError("LCD level needs the carrier frequency")
    if u <= cfg.u_th < u + u_t:
        return predict_lcd_level(f_t, cfg.tau, cfg.u_lcd)
    return 0.0
