"""Transfer-quality metrics and carrier-amplitude sweeps."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .resonator import (
    LowPassConfig,
    RegionLabel,
    ResonatorRun,
    ThresholdElementConfig,
    classify_region,
    run_pipeline,
    spike_samples,
)
from .signals import (
    BinarySignalSpec,
    CarrierSpec,
    SampledSignal,
    SignalError,
    default_sample_rate,
    generate_binary,
    generate_carrier,
)

SNR_CAP_DB = 150.0

# Regions need a bounded carrier; a Gaussian carrier crosses any threshold eventually.
STOCHASTIC_REGION = RegionLabel("stochastic", "unbounded carrier: regions undefined")

SWEEP_CSV_HEADER = (
    "carrier_kind",
    "u_t",
    "region",
    "high_level",
    "low_level",
    "transferred_amplitude",
    "snr_db",
    "gain",
    "r_squared",
)


@dataclass(frozen=True)
class PipelineConfig:
    """Everything needed to synthesize one signal + carrier run."""

    signal: BinarySignalSpec
    carrier: CarrierSpec
    element: ThresholdElementConfig
    lowpass: LowPassConfig
    duration: float
    sample_rate_hz: Optional[float] = None

    def resolved_rate(self) -> float:
        if self.sample_rate_hz is not None:
            return self.sample_rate_hz
        if self.carrier.f_t is not None:
            return default_sample_rate(self.carrier.f_t)
        raise SignalError("sample_rate_hz is required when the carrier has no f_t")

    def run(self) -> ResonatorRun:
        rate = self.resolved_rate()
        signal = generate_binary(self.signal, self.duration, rate)
        carrier = generate_carrier(self.carrier, self.duration, rate)
        return run_pipeline(signal, carrier, self.element, self.lowpass)

    def schedule(self) -> np.ndarray:
        """Boolean mask of samples where the binary signal is scheduled high.

        Unlike thresholding the generated trace, this stays defined when
        ``u_high == u_low``.
        """
        unit = replace(self.signal, u_high=1.0, u_low=0.0)
        return generate_binary(unit, self.duration, self.resolved_rate()).samples > 0.5


# -- level measurement -------------------------------------------------------


def steady_masks(run: ResonatorRun, margin: Optional[int] = None, state: Optional[np.ndarray] = None):
    """Boolean masks of samples whose smoothing window saw a constant signal.

    A sample qualifies when the binary signal is constant for ``margin``
    samples on either side (default: one window plus one spike width) and it
    lies at least one window from both trace edges. ``state`` overrides
    the high/low split inferred from the signal values.
    """
    sig = run.signal.samples
    window = run.window_samples
    if margin is None:
        margin = window + 1
        if run.element.kind == "lcd":
            margin += spike_samples(run.element, run.input.sample_rate_hz)
    if state is not None:
        high = np.asarray(state, dtype=bool)
        if high.shape != sig.shape:
            raise SignalError("state mask and signal differ in length")
    else:
        lo, hi = sig.min(), sig.max()
        high = sig > 0.5 * (lo + hi) if hi > lo else np.zeros(sig.size, bool)
    return _erode(high, margin), _erode(~high, margin)


def _erode(mask: np.ndarray, margin: int) -> np.ndarray:
    """True where ``mask`` holds on every sample within ``margin``; outside the trace counts as False."""
    n = mask.size
    out = np.zeros(n, dtype=bool)
    if n < 2 * margin + 1:
        return out
    csum = np.concatenate(([0], np.cumsum(mask, dtype=np.int64)))
    width = 2 * margin + 1
    full = (csum[width:] - csum[:-width]) == width
    out[margin:n - margin] = full
    return out


def measure_levels(run: ResonatorRun, state: Optional[np.ndarray] = None):
    """Interior mean of the smoothed output during signal-high and signal-low.

    Returns ``(high_level, low_level)``; a level is NaN if the trace has no
    interior stretch of that state.
    """
    high, low = steady_masks(run, state=state)
    y = run.smoothed_output.samples
    hl = float(y[high].mean()) if high.any() else math.nan
    ll = float(y[low].mean()) if low.any() else math.nan
    return hl, ll


def supra_threshold_fraction(run: ResonatorRun) -> float:
    """Fraction of steady signal-high samples where the summed input exceeds threshold."""
    high, _ = steady_masks(run)
    if not high.any():
        raise SignalError("no steady signal-high stretch in the trace")
    return float(np.mean(run.input.samples[high] > run.element.u_th))


# -- linearity ---------------------------------------------------------------


@dataclass(frozen=True)
class LinearityReport:
    gain: float
    intercept: float
    r_squared: float
    max_abs_residual: float
    theoretical_gain: float


def fit_linearity(u_s_grid, levels, u_h: float, u_t: float) -> LinearityReport:
    x = np.asarray(u_s_grid, dtype=float)
    y = np.asarray(levels, dtype=float)
    if x.shape != y.shape:
        raise SignalError("u_s grid and levels differ in length")
    if x.size < 3:
        raise SignalError("need at least 3 grid points for a linearity fit")
    if np.ptp(x) == 0:
        raise SignalError("degenerate u_s grid: all values equal")
    gain, intercept = np.polyfit(x, y, 1)
    resid = y - (gain * x + intercept)
    ss_res = float(np.sum(resid**2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else (1.0 if ss_res == 0 else 0.0)
    return LinearityReport(
        gain=float(gain),
        intercept=float(intercept),
        r_squared=float(min(1.0, max(0.0, r2))),
        max_abs_residual=float(np.max(np.abs(resid))),
        theoretical_gain=u_h / u_t if u_t > 0 else math.inf,
    )


def transfer_curve(base: PipelineConfig, u_s_grid: Sequence[float]) -> np.ndarray:
    """Measured smoothed high level for each signal amplitude in ``u_s_grid``."""
    levels = []
    for u_s in u_s_grid:
        cfg = replace(base, signal=replace(base.signal, u_high=float(u_s)))
        levels.append(measure_levels(cfg.run(), cfg.schedule())[0])
    return np.asarray(levels)


# -- spectral SNR --------------------------------------------------------------


@dataclass(frozen=True)
class SpectralSnr:
    signal_power: float
    noise_power: float
    snr_db: float
    effectively_infinite: bool
    band: str


def snr_db_from_powers(signal_power: float, noise_power: float) -> float:
    """10*log10(S/N) clipped to +/- SNR_CAP_DB (zero noise hits the cap)."""
    if signal_power <= 0:
        return -SNR_CAP_DB
    if noise_power <= 0:
        return SNR_CAP_DB
    return float(np.clip(10.0 * math.log10(signal_power / noise_power), -SNR_CAP_DB, SNR_CAP_DB))


def spectral_powers(
    y: np.ndarray,
    sample_rate_hz: float,
    f_s: float,
    n_harmonics: int,
    f_c_band: float,
    f_t: Optional[float] = None,
    skip: int = 0,
):
    """Signal and in-band noise power from a rectangular-window periodogram.

    The analysed segment starts ``skip`` samples in and spans the largest
    whole number of signal periods that ends ``skip`` samples before the
    trace end. Signal bins are f_s and its next ``n_harmonics`` odd
    harmonics; noise is every other bin in (0, f_c_band] except the carrier
    fundamental.
    """
    period = sample_rate_hz / f_s
    n_period = int(round(period))
    if abs(period - n_period) > 1e-9 * period:
        raise SignalError("sample rate must be an integer multiple of f_s for the periodogram")
    if y.size < 10 * n_period:
        raise SignalError(f"trace holds {y.size / n_period:.2f} signal periods; at least 10 needed")
    n_periods = (y.size - 2 * skip) // n_period
    if n_periods < 1:
        raise SignalError("no whole signal period left after skipping the filter edges")
    seg = y[skip:skip + n_periods * n_period]
    spec = np.abs(np.fft.rfft(seg)) ** 2 / seg.size**2
    freqs = np.arange(spec.size) * (sample_rate_hz / seg.size)

    signal_bins = [(2 * j + 1) * n_periods for j in range(n_harmonics + 1)]
    signal_bins = [b for b in signal_bins if b < spec.size]
    in_band = (freqs > 0) & (freqs <= f_c_band)
    noise_mask = in_band.copy()
    noise_mask[signal_bins] = False
    if f_t is not None:
        noise_mask[np.isclose(freqs, f_t, rtol=0, atol=0.5 * sample_rate_hz / seg.size)] = False
    return float(spec[signal_bins].sum()), float(spec[noise_mask].sum())


def estimate_snr(
    run,
    f_s: float,
    n_harmonics: int = 4,
    f_c_band: Optional[float] = None,
    f_t: Optional[float] = None,
) -> SpectralSnr:
    """Output SNR of a run's smoothed trace, or of a bare :class:`SampledSignal`.

    For a run, ``f_c_band`` defaults to the low-pass cutoff, ``f_t`` to the
    carrier frequency in its low-pass config, and one filter window is
    skipped at each end. A bare trace is analysed whole and needs
    ``f_c_band``.
    """
    if isinstance(run, SampledSignal):
        if f_c_band is None:
            raise SignalError("f_c_band is required for a bare trace")
        trace, band, skip = run, f_c_band, 0
    else:
        trace = run.smoothed_output
        band = run.lowpass.cutoff_hz if f_c_band is None else f_c_band
        skip = run.window_samples
        if f_t is None:
            f_t = run.lowpass.f_t
    s, n = spectral_powers(trace.samples, trace.sample_rate_hz, f_s, n_harmonics, band, f_t=f_t, skip=skip)
    return _snr(s, n, band)


def _snr(s, n, band):
    db = snr_db_from_powers(s, n)
    return SpectralSnr(
        signal_power=s,
        noise_power=n,
        snr_db=db,
        effectively_infinite=db >= SNR_CAP_DB,
        band=f"(0, {band:g}] Hz",
    )


# -- amplitude sweeps ----------------------------------------------------------


@dataclass(frozen=True)
class SweepPoint:
    carrier_kind: str
    u_t: float
    region: RegionLabel
    high_level: float
    low_level: float
    transferred_amplitude: float
    snr: SpectralSnr
    linearity: Optional[LinearityReport] = None

    def row(self) -> dict:
        return {
            "carrier_kind": self.carrier_kind,
            "u_t": self.u_t,
            "region": self.region.label,
            "high_level": self.high_level,
            "low_level": self.low_level,
            "transferred_amplitude": self.transferred_amplitude,
            "snr_db": self.snr.snr_db,
            "gain": None if self.linearity is None else self.linearity.gain,
            "r_squared": None if self.linearity is None else self.linearity.r_squared,
        }


@dataclass(frozen=True)
class _SweepTask:
    base: PipelineConfig
    carrier_kind: str
    u_t: float
    seeds: tuple
    f_s: float
    n_harmonics: int
    snr_band_hz: Optional[float]
    linearity_grid: Optional[tuple] = field(default=None)


def repeat_seed(seeds: Sequence[int], repeat: int) -> int:
    """Noise seed for one repeat, shared by every point of a sweep.

    Sharing the draw across amplitudes (common random numbers) keeps the
    sweep curve smooth; repeats get independent streams.
    """
    ss = np.random.SeedSequence(entropy=[int(s) for s in seeds], spawn_key=(repeat,))
    return int(ss.generate_state(1, dtype=np.uint32)[0])


def _sweep_region(base: PipelineConfig, task: _SweepTask) -> RegionLabel:
    if task.carrier_kind == "gaussian_noise":
        return STOCHASTIC_REGION
    return classify_region(base.element.kind, base.signal.u_high, task.u_t, base.element.u_th)


def _sweep_point(task: _SweepTask) -> SweepPoint:
    base = task.base
    highs, lows, s_pow, n_pow = [], [], [], []
    state = base.schedule()
    for seed in task.seeds:
        carrier = replace(base.carrier, kind=task.carrier_kind, amplitude=task.u_t, seed=seed)
        run = replace(base, carrier=carrier).run()
        hl, ll = measure_levels(run, state)
        highs.append(hl)
        lows.append(ll)
        band = run.lowpass.cutoff_hz if task.snr_band_hz is None else task.snr_band_hz
        s, n = spectral_powers(
            run.smoothed_output.samples,
            run.smoothed_output.sample_rate_hz,
            task.f_s,
            task.n_harmonics,
            band,
            f_t=base.carrier.f_t,
            skip=run.window_samples,
        )
        s_pow.append(s)
        n_pow.append(n)
    band = base.lowpass.cutoff_hz if task.snr_band_hz is None else task.snr_band_hz
    snr = _snr(float(np.mean(s_pow)), float(np.mean(n_pow)), band)
    high, low = float(np.mean(highs)), float(np.mean(lows))

    linearity = None
    if task.linearity_grid is not None and task.u_t > 0:
        carrier = replace(base.carrier, kind=task.carrier_kind, amplitude=task.u_t, seed=task.seeds[0])
        cfg = replace(base, carrier=carrier)
        levels = transfer_curve(cfg, task.linearity_grid)
        linearity = fit_linearity(task.linearity_grid, levels, base.element.u_h, task.u_t)

    return SweepPoint(
        carrier_kind=task.carrier_kind,
        u_t=task.u_t,
        region=_sweep_region(base, task),
        high_level=high,
        low_level=low,
        transferred_amplitude=high - low,
        snr=snr,
        linearity=linearity,
    )


def amplitude_sweep(
    base: PipelineConfig,
    carrier_kind: str,
    u_t_grid: Sequence[float],
    seeds: Sequence[int] = (0,),
    repeats: int = 1,
    n_harmonics: int = 4,
    snr_band_hz: Optional[float] = None,
    linearity_grid: Optional[Sequence[float]] = None,
    workers: int = 1,
) -> list:
    """One :class:`SweepPoint` per carrier amplitude, ordered by amplitude.

    Deterministic carriers are simulated once per point. The noise carrier
    is averaged over ``repeats`` draws (powers are averaged before the dB
    conversion). Points are independent, so ``workers > 1`` runs them in
    separate processes with identical results.
    """
    grid = sorted(float(u) for u in u_t_grid)
    if not grid:
        raise SignalError("empty carrier amplitude grid")
    if repeats < 1:
        raise SignalError("repeats must be >= 1")
    if not seeds:
        raise SignalError("at least one seed is required")
    if carrier_kind == "gaussian_noise":
        run_seeds = tuple(repeat_seed(seeds, r) for r in range(repeats))
    else:
        run_seeds = (int(seeds[0]),)
    lin = None if linearity_grid is None else tuple(float(u) for u in linearity_grid)
    tasks = [
        _SweepTask(base, carrier_kind, u, run_seeds, base.signal.f_s, n_harmonics, snr_band_hz, lin)
        for u in grid
    ]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_sweep_point, tasks))
    return [_sweep_point(t) for t in tasks]


def optimum(points: Sequence[SweepPoint], metric: str = "transferred_amplitude") -> SweepPoint:
    key = (lambda p: p.snr.snr_db) if metric == "snr_db" else (lambda p: getattr(p, metric))
    return max(points, key=key)
