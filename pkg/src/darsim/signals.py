"""Sampled waveforms: sub-threshold binary signals and carrier waves.

Every stage of the simulator passes :class:`SampledSignal` values around.
Periodic carriers (triangle, sawtooth, sine) sit between 0 and their peak
amplitude; the Gaussian carrier is zero-mean and parameterized by its RMS.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

PERIODIC_KINDS = ("triangle", "sawtooth", "sine")
CARRIER_KINDS = PERIODIC_KINDS + ("gaussian_noise",)

DEFAULT_SAMPLES_PER_PERIOD = 256
MIN_SAMPLES_PER_PERIOD = 64


class SignalError(ValueError):
    """Invalid waveform parameters or incompatible traces."""


@dataclass(frozen=True)
class SampledSignal:
    sample_rate_hz: float
    samples: np.ndarray = field(repr=False)

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=float)
        if samples.ndim != 1:
            raise SignalError("samples must be one-dimensional")
        object.__setattr__(self, "samples", samples)
        if not self.sample_rate_hz > 0:
            raise SignalError(f"sample_rate_hz must be positive, got {self.sample_rate_hz}")
        if samples.size == 0:
            raise SignalError("samples must be non-empty")
        if not np.all(np.isfinite(samples)):
            raise SignalError("samples must be finite")

    def __len__(self):
        return self.samples.size

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate_hz

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.samples.size) / self.sample_rate_hz

    def with_samples(self, samples) -> "SampledSignal":
        return SampledSignal(self.sample_rate_hz, samples)


@dataclass(frozen=True)
class BinarySignalSpec:
    """Square-wave (or single-pulse) signal alternating between two levels.

    ``f_s`` is the signal fundamental and ``u_high`` the signal amplitude.
    With ``pulse_width`` set, a single ``u_high`` pulse of that width is
    centered in the trace instead of a periodic square wave.
    """

    f_s: float
    u_high: float
    u_low: float = 0.0
    duty: float = 0.5
    pulse_width: Optional[float] = None

    def __post_init__(self):
        if not self.f_s > 0:
            raise SignalError(f"f_s must be positive, got {self.f_s}")
        if self.u_high < self.u_low:
            raise SignalError("u_high must be >= u_low")
        if not 0 < self.duty < 1:
            raise SignalError(f"duty must lie in (0, 1), got {self.duty}")
        if self.pulse_width is not None and not self.pulse_width > 0:
            raise SignalError("pulse_width must be positive")


@dataclass(frozen=True)
class CarrierSpec:
    """Additive carrier wave.

    For periodic kinds ``amplitude`` is the peak value (the minimum is 0).
    For ``gaussian_noise`` it is the RMS value and ``seed`` fixes the draw.
    ``phase=None`` puts the carrier minimum at t=0.
    """

    kind: str
    amplitude: float
    f_t: Optional[float] = None
    phase: Optional[float] = None
    seed: int = 0

    def __post_init__(self):
        if self.kind not in CARRIER_KINDS:
            raise SignalError(f"unknown carrier kind {self.kind!r}; expected one of {CARRIER_KINDS}")
        if not self.amplitude >= 0:
            raise SignalError(f"amplitude must be >= 0, got {self.amplitude}")
        if self.periodic and not (self.f_t is not None and self.f_t > 0):
            raise SignalError(f"{self.kind} carrier needs a positive f_t")
        if self.seed < 0:
            raise SignalError("seed must be a non-negative integer")

    @property
    def periodic(self) -> bool:
        return self.kind in PERIODIC_KINDS


def _n_samples(duration, sample_rate_hz):
    if not duration > 0:
        raise SignalError(f"duration must be positive, got {duration}")
    if not sample_rate_hz > 0:
        raise SignalError(f"sample_rate_hz must be positive, got {sample_rate_hz}")
    n = int(round(duration * sample_rate_hz))
    if n < 1:
        raise SignalError("duration shorter than one sample")
    return n


def samples_per_period(f_t: float, sample_rate_hz: float) -> int:
    """Integer number of samples in one carrier period; raises if not integral."""
    ratio = sample_rate_hz / f_t
    n = int(round(ratio))
    if n < 1 or abs(ratio - n) > 1e-9 * ratio:
        raise SignalError(
            f"sample rate {sample_rate_hz} Hz is not an integer multiple of f_t={f_t} Hz"
        )
    return n


def default_sample_rate(f_t: float) -> float:
    return DEFAULT_SAMPLES_PER_PERIOD * f_t


def generate_binary(spec: BinarySignalSpec, duration: float, sample_rate_hz: float) -> SampledSignal:
    n = _n_samples(duration, sample_rate_hz)
    if sample_rate_hz < 10 * spec.f_s:
        raise SignalError(
            f"sample rate {sample_rate_hz} Hz is below 10*f_s = {10 * spec.f_s} Hz"
        )
    out = np.full(n, float(spec.u_low))
    if spec.pulse_width is not None:
        width = int(round(spec.pulse_width * sample_rate_hz))
        if width > n:
            raise SignalError("pulse_width longer than the trace")
        start = (n - width) // 2
        out[start:start + width] = spec.u_high
    else:
        # cycle position from exact integer arithmetic where possible
        cycle = np.mod(np.arange(n) * (spec.f_s / sample_rate_hz), 1.0)
        out[cycle < spec.duty - 1e-12] = spec.u_high
    return SampledSignal(sample_rate_hz, out)


def _unit_cycle(kind, frac):
    if kind == "triangle":
        return 1.0 - np.abs(2.0 * frac - 1.0)
    if kind == "sawtooth":
        return frac
    raise AssertionError(kind)


def generate_carrier(
    spec: CarrierSpec, duration: float, sample_rate_hz: Optional[float] = None
) -> SampledSignal:
    """Sample a carrier wave.

    Periodic kinds need ``sample_rate_hz`` to be an integer multiple of
    ``f_t`` with at least 64 samples per period; it defaults to 256 samples
    per period. Each sample is computed from its index modulo the period,
    so the trace repeats exactly.
    """
    if spec.periodic:
        if sample_rate_hz is None:
            sample_rate_hz = default_sample_rate(spec.f_t)
        n = _n_samples(duration, sample_rate_hz)
        period = samples_per_period(spec.f_t, sample_rate_hz)
        if period < MIN_SAMPLES_PER_PERIOD:
            raise SignalError(
                f"{period} samples per carrier period; at least {MIN_SAMPLES_PER_PERIOD} required"
            )
        idx = np.arange(n) % period
        if spec.kind == "sine":
            phase = -math.pi / 2 if spec.phase is None else spec.phase
            values = 0.5 * (1.0 + np.sin(2.0 * np.pi * idx / period + phase))
        else:
            shift = 0.0 if spec.phase is None else spec.phase / (2.0 * math.pi)
            frac = np.mod(idx / period + shift, 1.0)
            values = _unit_cycle(spec.kind, frac)
        return SampledSignal(sample_rate_hz, spec.amplitude * values)

    if sample_rate_hz is None:
        raise SignalError("gaussian_noise carrier needs an explicit sample_rate_hz")
    n = _n_samples(duration, sample_rate_hz)
    rng = np.random.default_rng(spec.seed)
    return SampledSignal(sample_rate_hz, spec.amplitude * rng.standard_normal(n))


def constant(value: float, duration: float, sample_rate_hz: float) -> SampledSignal:
    return SampledSignal(sample_rate_hz, np.full(_n_samples(duration, sample_rate_hz), float(value)))


def mix(a: SampledSignal, b: SampledSignal) -> SampledSignal:
    if a.sample_rate_hz != b.sample_rate_hz:
        raise SignalError(f"sample rates differ: {a.sample_rate_hz} vs {b.sample_rate_hz}")
    if len(a) != len(b):
        raise SignalError(f"lengths differ: {len(a)} vs {len(b)}")
    return SampledSignal(a.sample_rate_hz, a.samples + b.samples)
