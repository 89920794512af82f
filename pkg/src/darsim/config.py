"""JSON run configuration schemas and their translation to library objects."""

from __future__ import annotations

from typing import List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from .analysis import PipelineConfig
from .psychophysics import ObserverModel, SessionDesign
from .quest import QuestParams
from .resonator import LowPassConfig, ThresholdElementConfig
from .signals import BinarySignalSpec, CarrierSpec


class _Model(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ElementBlock(_Model):
    kind: Literal["lcd", "comparator"]
    u_th: float
    u_lcd: float = 1.0
    tau: float = 1e-3
    u_h: float = 1.0

    def build(self) -> ThresholdElementConfig:
        return ThresholdElementConfig(**self.model_dump())


class SignalBlock(_Model):
    f_s: float = Field(1.0, gt=0)
    u_high: float = 0.2
    u_low: float = 0.0
    duty: float = 0.5
    pulse_width: Optional[float] = None

    def build(self) -> BinarySignalSpec:
        return BinarySignalSpec(**self.model_dump())


class CarrierBlock(_Model):
    kind: Literal["triangle", "sawtooth", "sine", "gaussian_noise"] = "triangle"
    amplitude: float = Field(1.0, ge=0)
    f_t: Optional[float] = 80.0
    phase: Optional[float] = None
    seed: int = Field(0, ge=0)

    def build(self) -> CarrierSpec:
        return CarrierSpec(**self.model_dump())


class LowPassBlock(_Model):
    carrier_periods: Optional[int] = 4
    seconds: Optional[float] = None

    @model_validator(mode="after")
    def _one_mode(self):
        if self.seconds is not None:
            self.carrier_periods = None
        if self.carrier_periods is None and self.seconds is None:
            raise ValueError("lowpass needs carrier_periods or seconds")
        return self

    def build(self, f_t: Optional[float]) -> LowPassConfig:
        if self.seconds is not None:
            return LowPassConfig(seconds=self.seconds)
        return LowPassConfig(carrier_periods=self.carrier_periods, f_t=f_t)


class PipelineBlock(_Model):
    signal: SignalBlock = SignalBlock()
    carrier: CarrierBlock = CarrierBlock()
    element: ElementBlock
    lowpass: LowPassBlock = LowPassBlock()
    duration: float = Field(10.0, gt=0)
    sample_rate_hz: Optional[float] = Field(None, gt=0)
    seed: Optional[int] = Field(None, ge=0)

    def build(self) -> PipelineConfig:
        return PipelineConfig(
            signal=self.signal.build(),
            carrier=self.carrier.build(),
            element=self.element.build(),
            lowpass=self.lowpass.build(self.carrier.f_t),
            duration=self.duration,
            sample_rate_hz=self.sample_rate_hz,
        )


class PredictConfig(_Model):
    kind: Literal["lcd", "comparator"]
    f_t: float = Field(..., gt=0)
    tau: float = 1e-3
    u_lcd: float = 1.0
    u_h: float = 1.0
    u_s: Optional[float] = None
    u_t: Optional[float] = None
    u_th: Optional[float] = None

    @model_validator(mode="after")
    def _comparator_fields(self):
        if self.kind == "comparator" and None in (self.u_s, self.u_t, self.u_th):
            raise ValueError("comparator prediction needs u_s, u_t and u_th")
        return self


class SimulateConfig(PipelineBlock):
    pass


class SweepBlock(_Model):
    carrier_kind: Literal["triangle", "sawtooth", "sine", "gaussian_noise"] = "triangle"
    u_t_grid: List[float] = Field(..., min_length=1)
    seeds: Optional[List[int]] = None
    repeats: int = Field(1, ge=1)
    n_harmonics: int = Field(4, ge=0)
    snr_band_hz: Optional[float] = Field(None, gt=0)
    linearity_u_s_grid: Optional[List[float]] = None


class SweepConfig(PipelineBlock):
    sweep: SweepBlock


class ObserverBlock(_Model):
    kind: Literal["weibull", "resonator"]
    true_threshold: float = 0.3
    beta: float = 3.0
    gamma: float = 0.25
    delta: float = 0.01
    criterion: float = 0.5
    element: ElementBlock = ElementBlock(kind="comparator", u_th=0.5)
    carrier_kind: Literal["triangle", "sawtooth", "sine", "gaussian_noise"] = "triangle"
    f_t: float = 80.0
    contrast_gain: Optional[float] = None
    internal_noise_sd: float = 0.2
    n_channels: int = 4
    lowpass_periods: int = 4

    def build(self) -> ObserverModel:
        d = self.model_dump()
        d["element"] = self.element.build()
        return ObserverModel(**d)


class QuestBlock(_Model):
    beta: float = 3.0
    delta: float = 0.01
    gamma: float = 0.25
    grain: float = 0.001
    range: float = 1.0
    t_guess: float = 0.5
    prior_sd: float = 0.3
    criterion: float = 0.5
    estimator: Literal["mean", "mode", "median"] = "mean"

    def build(self) -> QuestParams:
        return QuestParams(**self.model_dump())


class DesignBlock(_Model):
    conditions: Optional[List[float]] = None
    unit: float = 0.5
    ratios: List[float] = [0.75, 1.0, 1.5]
    trials_per_condition: int = Field(40, ge=1)
    blocks: int = Field(2, ge=1)

    @model_validator(mode="after")
    def _materialize(self):
        if self.conditions is None:
            self.conditions = [0.0] + [r * self.unit for r in self.ratios]
        return self

    def build(self) -> SessionDesign:
        return SessionDesign(tuple(self.conditions), self.trials_per_condition, self.blocks)


class QuestConfig(_Model):
    observer: ObserverBlock
    quest: QuestBlock = QuestBlock()
    design: DesignBlock = DesignBlock()
    n_sessions: int = Field(1, ge=1)
    seed: int = Field(0, ge=0)


class AnalyzeConfig(_Model):
    input: str
    control: str
    test: str
    n_reshuffles: int = Field(5000, ge=1)
    n_bootstrap: int = Field(5000, ge=10)
    seed: int = Field(0, ge=0)
