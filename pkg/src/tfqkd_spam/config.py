"""Experiment configuration: a flat JSON document with units in the key names."""

import json
import math
from pathlib import Path
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .errors import ConfigError, InvalidModel
from .measurement import InterferometerModel
from .protocol import Schedule
from .states import STANDARD_PHASES, PhasePlan

SCHEMA_VERSION = 1


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    schema_version: Literal[1] = SCHEMA_VERSION

    alice_labels: list[str] = ["+X", "-X", "+Y", "-Y", "-Z"]
    bob_labels: list[str] = ["+X", "-X", "+Y", "-Y"]
    a1_selection: list[str] = ["+X", "-X", "+Y", "-Z"]
    a2_selection: list[str] = ["+X", "-X", "-Y", "-Z"]
    shots_per_pair: int = Field(1_000_000, ge=1)
    trials: int = Field(10, ge=2)

    nominal_phases_rad: dict[str, float] = Field(default_factory=lambda: dict(STANDARD_PHASES))
    phase_jitter_sigma_rad: float = Field(0.029, ge=0)
    jitter_mode: Literal["common", "independent"] = "common"
    correlated_offsets_rad: dict[str, float] = Field(default_factory=dict)

    visibility: float = Field(0.99, ge=0, le=1)
    mean_photons_per_pulse: float = Field(0.005, gt=0)
    detector_imbalance: float = Field(0.0, gt=-1, lt=1)
    background_rate_per_shot: float = Field(0.0, ge=0)
    measurement_offsets_rad: dict[str, float] = Field(default_factory=dict)

    seed: int = Field(42, ge=0, lt=2**64)
    alpha: float = Field(0.05, gt=0, lt=1)
    bonferroni: bool = False
    resamples: int = Field(1000, ge=100)
    condition_limit: float = Field(1e8, gt=1)
    workers: int = Field(1, ge=1)

    calibration_scan_points: int = Field(32, ge=1)
    calibration_repetitions: int = Field(10, ge=2)
    calibration_shots_per_point: int = Field(2_000_000, ge=1)
    calibration_bob_phases_rad: list[float] = [0.0, math.pi / 2, math.pi, 3 * math.pi / 2]
    drive_to_phase_rad_per_volt: float = Field(math.pi / 4, gt=0)
    calibration_noiseless: bool = False

    out_dir: str = "out"

    @model_validator(mode="after")
    def _check_components(self):
        try:
            self.schedule()
            self.plan()
            self.model()
        except (ValueError, InvalidModel) as exc:
            raise ValueError(str(exc)) from None
        return self

    def schedule(self):
        return Schedule(
            alice_labels=tuple(self.alice_labels),
            bob_labels=tuple(self.bob_labels),
            shots_per_pair=self.shots_per_pair,
            trials=self.trials,
            a1_selection=tuple(self.a1_selection),
            a2_selection=tuple(self.a2_selection),
        )

    def plan(self):
        plan = PhasePlan(
            nominal_phases=dict(self.nominal_phases_rad),
            phase_jitter_sigma=self.phase_jitter_sigma_rad,
            correlated_offsets=dict(self.correlated_offsets_rad),
            jitter_mode=self.jitter_mode,
        )
        unknown = [a for a in self.alice_labels if not plan.is_known(a)]
        if unknown:
            raise ValueError(f"alice_labels without a nominal phase: {unknown}")
        return plan

    def model(self):
        return InterferometerModel(
            visibility=self.visibility,
            mean_photons_per_pulse=self.mean_photons_per_pulse,
            detector_imbalance=self.detector_imbalance,
            background_rate=self.background_rate_per_shot,
            measurement_offsets=dict(self.measurement_offsets_rad),
        )

    def to_json(self):
        return json.dumps(self.model_dump(), indent=2) + "\n"


def _describe(exc):
    lines = []
    for err in exc.errors():
        loc = ".".join(str(p) for p in err["loc"]) or "<root>"
        lines.append(f"field {loc}: {err['msg']}")
    return "; ".join(lines)


def parse_config(text, source="<config>"):
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{source}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{source}: top level must be a JSON object")
    try:
        return ExperimentConfig.model_validate(raw)
    except ValidationError as exc:
        raise ConfigError(f"{source}: {_describe(exc)}") from None


def load_config(path=None):
    """Load and validate a config file; ``None`` gives the defaults."""
    if path is None:
        return ExperimentConfig()
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None
    return parse_config(text, str(path))
