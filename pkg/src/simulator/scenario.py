# src/simulator/scenario.py
from __future__ import annotations
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Tuple, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from config.settings import SCENARIO_SCHEMA_VERSION
from src.pdw.errors import ConfigError


class PriMode(str, Enum):
    constant = "constant"
    jittered = "jittered"
    staggered = "staggered"
    sliding = "sliding"


class FreqMode(str, Enum):
    fixed = "fixed"
    hopping = "hopping"


Range = Tuple[float, float]
IntRange = Tuple[int, int]


class EmitterSpec(BaseModel):
    """
    Behaviour of one emitter. Times in seconds, frequencies in hertz, angles in
    degrees, amplitude in dB.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    pri_mode: PriMode = PriMode.constant
    pri_base: float = Field(gt=0.0)
    pri_jitter_frac: float = Field(default=0.0, ge=0.0, lt=1.0)
    stagger_pattern: List[float] = Field(default_factory=list)
    pri_slide_frac: float = Field(default=0.0, ge=0.0)
    pri_slide_steps: int = Field(default=1, ge=1)
    toa_offset: float = Field(default=0.0, ge=0.0)

    freq_mode: FreqMode = FreqMode.fixed
    freq_center: float = Field(gt=0.0)
    freq_hop_set: List[float] = Field(default_factory=list)
    freq_noise_std: float = Field(default=0.0, ge=0.0)

    pw: float = Field(gt=0.0)
    pw_jitter_frac: float = Field(default=0.0, ge=0.0, lt=1.0)

    aoa_mean: float = Field(ge=0.0, lt=360.0)
    aoa_std: float = Field(default=0.0, ge=0.0)

    amplitude_mean: float = 0.0
    amplitude_std: float = Field(default=0.0, ge=0.0)

    drop_prob: float = Field(default=0.0, ge=0.0, lt=1.0)

    @model_validator(mode="after")
    def _mode_fields(self):
        if self.pri_mode == PriMode.staggered:
            if not self.stagger_pattern:
                raise ValueError("stagger_pattern must be non-empty when pri_mode is staggered")
            if min(self.stagger_pattern) <= 0:
                raise ValueError("stagger_pattern intervals must be positive")
        if self.freq_mode == FreqMode.hopping:
            if not self.freq_hop_set:
                raise ValueError("freq_hop_set must be non-empty when freq_mode is hopping")
            if min(self.freq_hop_set) <= 0:
                raise ValueError("freq_hop_set frequencies must be positive")
        return self

    def mean_interval(self) -> float:
        if self.pri_mode == PriMode.staggered:
            return sum(self.stagger_pattern) / len(self.stagger_pattern)
        if self.pri_mode == PriMode.sliding:
            return self.pri_base * (1.0 + self.pri_slide_frac / 2.0)
        return self.pri_base

    def min_interval(self) -> float:
        if self.pri_mode == PriMode.staggered:
            return min(self.stagger_pattern)
        if self.pri_mode == PriMode.jittered:
            return self.pri_base * (1.0 - self.pri_jitter_frac)
        return self.pri_base


class ScenarioConfig(BaseModel):
    """Sampling ranges for synthetic scenarios. Every range is [min, max], inclusive."""

    model_config = ConfigDict(extra="forbid")

    schema_version: int = SCENARIO_SCHEMA_VERSION
    n_pulses_per_train: int = Field(default=100, ge=1)
    emitter_count_range: IntRange = (2, 6)
    n_trains: int = Field(default=100, ge=1)
    rng_seed: int = 0
    allow_single_emitter: bool = False
    # emitter e of k draws its centre frequency from the central half of the e-th of k equal slices
    disjoint_freq_bands: bool = False
    max_retries: int = Field(default=20, ge=1)

    pri_mode_weights: Dict[PriMode, float] = Field(
        default_factory=lambda: {m: 0.25 for m in PriMode}
    )
    freq_mode_weights: Dict[FreqMode, float] = Field(
        default_factory=lambda: {FreqMode.fixed: 0.6, FreqMode.hopping: 0.4}
    )

    pri_base_range: Range = (1e-4, 1e-3)
    pri_jitter_frac_range: Range = (0.02, 0.15)
    stagger_levels_range: IntRange = (2, 4)
    stagger_spread_frac_range: Range = (0.1, 0.4)
    pri_slide_frac_range: Range = (0.1, 0.5)
    pri_slide_steps_range: IntRange = (5, 30)

    freq_center_range: Range = (9.0e9, 9.4e9)
    freq_noise_std_range: Range = (0.5e6, 3.0e6)
    hop_count_range: IntRange = (2, 5)
    hop_spread_range: Range = (20e6, 200e6)

    pw_range: Range = (1e-6, 10e-6)
    pw_jitter_frac_range: Range = (0.0, 0.05)

    aoa_range: Range = (0.0, 359.0)
    aoa_std_range: Range = (0.5, 3.0)

    amplitude_mean_range: Range = (-70.0, -40.0)
    amplitude_std_range: Range = (0.5, 3.0)

    drop_prob_range: Range = (0.0, 0.2)

    @field_validator("schema_version")
    @classmethod
    def _schema(cls, v: int) -> int:
        if v != SCENARIO_SCHEMA_VERSION:
            raise ValueError(f"unsupported scenario schema_version {v} (expected {SCENARIO_SCHEMA_VERSION})")
        return v

    @field_validator(
        "emitter_count_range",
        "pri_base_range",
        "pri_jitter_frac_range",
        "stagger_levels_range",
        "stagger_spread_frac_range",
        "pri_slide_frac_range",
        "pri_slide_steps_range",
        "freq_center_range",
        "freq_noise_std_range",
        "hop_count_range",
        "hop_spread_range",
        "pw_range",
        "pw_jitter_frac_range",
        "aoa_range",
        "aoa_std_range",
        "amplitude_mean_range",
        "amplitude_std_range",
        "drop_prob_range",
    )
    @classmethod
    def _non_empty_range(cls, v, info):
        lo, hi = v
        if lo > hi:
            raise ValueError(f"{info.field_name} is empty: min {lo} > max {hi}")
        return v

    @field_validator("pri_mode_weights", "freq_mode_weights")
    @classmethod
    def _weights(cls, v, info):
        if any(w < 0 for w in v.values()) or sum(v.values()) <= 0:
            raise ValueError(f"{info.field_name} must be non-negative with a positive sum")
        return v

    @model_validator(mode="after")
    def _cross_field(self):
        lo, hi = self.emitter_count_range
        floor = 1 if self.allow_single_emitter else 2
        if lo < floor:
            raise ValueError(
                f"emitter_count_range minimum must be >= {floor}"
                + ("" if self.allow_single_emitter else " (single-emitter trains form no triplets)")
            )
        if self.n_pulses_per_train < hi:
            raise ValueError("n_pulses_per_train must be >= the maximum emitter count")
        if self.pri_base_range[0] <= 0 or self.pw_range[0] <= 0 or self.freq_center_range[0] <= 0:
            raise ValueError("PRI, pulse width and frequency ranges must be positive")
        if self.drop_prob_range[1] >= 1.0 or self.drop_prob_range[0] < 0:
            raise ValueError("drop_prob_range must lie in [0, 1)")
        if self.pri_jitter_frac_range[1] >= 1.0 or self.pw_jitter_frac_range[1] >= 1.0:
            raise ValueError("jitter fractions must be < 1")
        if self.stagger_spread_frac_range[1] >= 1.0:
            raise ValueError("stagger_spread_frac_range must be < 1")
        if not (0.0 <= self.aoa_range[0] and self.aoa_range[1] < 360.0):
            raise ValueError("aoa_range must lie in [0, 360)")
        if self.stagger_levels_range[0] < 1 or self.pri_slide_steps_range[0] < 1 or self.hop_count_range[0] < 1:
            raise ValueError("stagger levels, slide steps and hop counts must be >= 1")
        return self


def scenario_from_dict(doc: Dict[str, Any]) -> ScenarioConfig:
    try:
        return ScenarioConfig.model_validate(doc or {})
    except ValidationError as e:
        raise ConfigError(f"invalid scenario config: {e}") from e


def load_scenario(path: Union[str, Path]) -> ScenarioConfig:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"scenario config not found: {p}")
    with p.open("r", encoding="utf-8") as fh:
        doc = yaml.safe_load(fh) or {}
    # a run profile nests the scenario under 'scenario'
    if "scenario" in doc and isinstance(doc["scenario"], dict):
        doc = doc["scenario"]
    return scenario_from_dict(doc)
