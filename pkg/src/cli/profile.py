# src/cli/profile.py
'''
Run profiles (YAML) and the effective configuration of one CLI invocation.

Precedence for every setting: command-line flag > profile > built-in desk default.
'''
from __future__ import annotations
import logging
from pathlib import Path
from typing import Any, Dict, Optional, Sequence, Union

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from config.settings import DESK_PROFILE_PATH, DESK_SPLITS, PROFILE_SCHEMA_VERSION, SPLIT_FILES
from src.clustering.hdbscan import HdbscanConfig, desk_min_cluster_size, hdbscan_config
from src.models.config import model_config_from_dict
from src.pdw.errors import ConfigError, UsageError
from src.pdw.types import PulseTrain
from src.simulator.scenario import ScenarioConfig, scenario_from_dict
from src.training.trainer import TrainConfig, TripletLossConfig

logger = logging.getLogger(__name__)


class RunProfile(BaseModel):
    """One YAML document holding every section a run needs; missing sections fall back to desk defaults."""

    model_config = ConfigDict(extra="forbid")

    schema_version: int = PROFILE_SCHEMA_VERSION
    scenario: Dict[str, Any] = Field(default_factory=dict)
    splits: Dict[str, int] = Field(default_factory=lambda: dict(DESK_SPLITS))
    model: Dict[str, Any] = Field(default_factory=lambda: {"kind": "transformer"})
    train: Dict[str, Any] = Field(default_factory=dict)
    loss: Dict[str, Any] = Field(default_factory=dict)
    clustering: Dict[str, Any] = Field(default_factory=dict)

    @field_validator("schema_version")
    @classmethod
    def _schema(cls, v: int) -> int:
        if v != PROFILE_SCHEMA_VERSION:
            raise ValueError(f"unsupported profile schema_version {v} (expected {PROFILE_SCHEMA_VERSION})")
        return v

    @field_validator("splits")
    @classmethod
    def _splits(cls, v: Dict[str, int]) -> Dict[str, int]:
        unknown = set(v) - set(SPLIT_FILES)
        if unknown:
            raise ValueError(f"unknown splits {sorted(unknown)}; expected {list(SPLIT_FILES)}")
        return {**DESK_SPLITS, **v}


class RunConfig(BaseModel):
    """The resolved inputs and outputs of one subcommand."""

    model_config = ConfigDict(frozen=True)

    command: str
    out: Path
    seed: int = 0
    model: Optional[str] = None
    checkpoint: Optional[Path] = None
    data: Optional[Path] = None
    profile: Optional[Path] = None

    def require(self, *paths: Optional[Path]) -> None:
        for p in paths:
            if p is None or not Path(p).exists():
                raise UsageError(f"{self.command}: path not found: {p}")


def load_profile(path: Optional[Union[str, Path]] = None) -> RunProfile:
    """The profile at `path`, else the shipped desk profile, else built-in defaults."""
    if path is None:
        p = Path(DESK_PROFILE_PATH)
        if not p.exists():
            return RunProfile()
    else:
        p = Path(path)
        if not p.exists():
            raise UsageError(f"profile not found: {p}")
    try:
        doc = yaml.safe_load(p.read_text(encoding="utf-8")) or {}
    except yaml.YAMLError as e:
        raise ConfigError(f"{p}: invalid YAML: {e}") from e
    if not isinstance(doc, dict):
        raise ConfigError(f"{p}: a profile must be a mapping")
    try:
        profile = RunProfile.model_validate(doc)
    except ValidationError as e:
        raise ConfigError(f"invalid profile {p}: {e}") from e
    logger.debug("loaded profile %s", p)
    return profile


def _overrides(**kw: Any) -> Dict[str, Any]:
    return {k: v for k, v in kw.items() if v is not None}


def resolve_scenario(profile: RunProfile, **overrides: Any) -> ScenarioConfig:
    return scenario_from_dict({**profile.scenario, **_overrides(**overrides)})


def resolve_model(profile: RunProfile, model: Optional[str] = None):
    """The profile's model section, unless --model names a different kind (which then takes desk defaults)."""
    doc = dict(profile.model)
    if model is not None and model != doc.get("kind"):
        doc = {"kind": model}
    return model_config_from_dict(doc)


def resolve_train(profile: RunProfile, **overrides: Any) -> TrainConfig:
    try:
        return TrainConfig(**{**profile.train, **_overrides(**overrides)})
    except ValidationError as e:
        raise ConfigError(f"invalid training config: {e}") from e


def resolve_loss(profile: RunProfile, **overrides: Any) -> TripletLossConfig:
    try:
        return TripletLossConfig(**{**profile.loss, **_overrides(**overrides)})
    except ValidationError as e:
        raise ConfigError(f"invalid loss config: {e}") from e


def typical_length(trains: Sequence[PulseTrain]) -> int:
    return int(np.median([len(t) for t in trains])) if trains else 0


def resolve_clustering(profile: RunProfile, trains: Sequence[PulseTrain], **overrides: Any) -> HdbscanConfig:
    """min_cluster_size not given anywhere -> scaled from the dataset's typical train length."""
    doc = {**profile.clustering, **_overrides(**overrides)}
    doc.setdefault("min_cluster_size", desk_min_cluster_size(typical_length(trains)))
    return hdbscan_config(**doc)
