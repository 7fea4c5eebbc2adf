"""Strict JSON run configuration and its conversion to domain objects."""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Literal, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from .learning import LearningConfig
from .metrics import ComplianceRules
from .multipath import MultipathScenario
from .plant import REFERENCE_PLANT, PlantModel
from .waveform import DEFAULT_DURATION, DEFAULT_SAMPLE_RATE, PulseSpec

PRESETS = {"reference_plant": REFERENCE_PLANT}

ALL_COMBINATIONS = (
    ("peak", "mp"),
    ("peak", "mp_bias"),
    ("dme_region", "mp"),
    ("dme_region", "mp_bias"),
)


class ConfigError(ValueError):
    """Raised for unreadable or invalid run configurations."""


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class PulseSection(_Strict):
    kind: Literal["gaussian", "sfol_file", "sfol_surrogate"] = "sfol_surrogate"
    rise_time_us: float = 2.8
    width_us: float = 3.4
    fall_time_us: float = 3.0
    peak_amplitude: float = 1.0
    file_path: str | None = None
    foot_frac: float = 1.0
    upper_frac: float = 0.1
    top_frac: float = 0.2


class GaussianSection(_Strict):
    width_us: float = 3.5
    peak_amplitude: float = 1.0


class SamplingSection(_Strict):
    sample_rate_hz: float = Field(DEFAULT_SAMPLE_RATE, gt=0)
    duration_s: float = Field(DEFAULT_DURATION, gt=0)


class PlantSection(_Strict):
    linear_gain: float = 1.0
    expansion_exponent: float = 1.0
    saturation_level: float | None = None
    fir_taps: tuple[float, ...] = (1.0,)
    noise_std: float = 0.0
    seed: int = 0


class LearningSection(_Strict):
    max_iterations: int = Field(20, ge=1)
    convergence_tol: float = Field(1e-4, gt=0)
    nonlinearity_order: int = Field(2, ge=1)
    memory_depth: int = Field(7, ge=1)
    gain_policy: Literal["first_iteration_only", "every_iteration"] = "first_iteration_only"
    window_frac: float = 0.3
    step_frac: float = 0.05
    rcond: float | None = 1e-3
    clip_negative: bool = True


class MetricsSection(_Strict):
    rise_limit_us: float = 3.0
    width_range_us: tuple[float, float] = (3.0, 4.0)
    fall_limit_us: float = 3.5
    peak_power_w: float | None = 100.0
    prf_hz: float = 700.0
    limits_dbm: dict[str, float] = {"0.8": 13.0, "2.0": -7.0}
    limits_dbc: dict[str, float] = {"0.8": -9.65, "2.0": -29.65}
    resolution_hz: float = 1e3


class MultipathSection(_Strict):
    peak_ratio: float = 0.3
    delay_max_us: float = 6.0
    delay_step_us: float = 0.025
    polarity: Literal["in_phase", "inverted"] = "in_phase"
    threshold_frac: float = 0.5


Combination = tuple[Literal["peak", "dme_region"], Literal["mp", "mp_bias"]]


class RunConfig(_Strict):
    """Top-level run configuration; unknown keys anywhere are rejected."""

    pulse: PulseSection = PulseSection()
    gaussian: GaussianSection = GaussianSection()
    sampling: SamplingSection = SamplingSection()
    plant: Union[Literal["reference_plant"], PlantSection] = "reference_plant"
    learning: LearningSection = LearningSection()
    combinations: tuple[Combination, ...] = ALL_COMBINATIONS
    metrics: MetricsSection = MetricsSection()
    multipath: MultipathSection = MultipathSection()
    output_dir: str = "runs/default"
    seed: int = 0
    workers: int = Field(4, ge=1)

    @field_validator("combinations")
    @classmethod
    def _unique(cls, value):
        if len(set(value)) != len(value):
            raise ValueError("combinations must be unique")
        if not value:
            raise ValueError("at least one combination is required")
        return value

    # Domain conversions.

    def pulse_spec(self) -> PulseSpec:
        return PulseSpec(**self.pulse.model_dump())

    def gaussian_spec(self) -> PulseSpec:
        return PulseSpec(kind="gaussian", **self.gaussian.model_dump())

    def plant_model(self) -> PlantModel:
        if isinstance(self.plant, str):
            params = dict(PRESETS[self.plant])
        else:
            params = self.plant.model_dump()
            if params["saturation_level"] is None:
                params["saturation_level"] = math.inf
        params["seed"] = self.seed
        return PlantModel(**params)

    def learning_config(self, gain_method: str, variant: str) -> LearningConfig:
        return LearningConfig(
            gain_method=gain_method, variant=variant, **self.learning.model_dump()
        )

    def compliance_rules(self) -> ComplianceRules:
        m = self.metrics
        return ComplianceRules(
            rise_limit_us=m.rise_limit_us,
            width_range_us=tuple(m.width_range_us),
            fall_limit_us=m.fall_limit_us,
            peak_power_w=m.peak_power_w,
            prf_hz=m.prf_hz,
            limits_dbm={float(k): v for k, v in m.limits_dbm.items()},
            limits_dbc={float(k): v for k, v in m.limits_dbc.items()},
        )

    def scenario(self) -> MultipathScenario:
        mp = self.multipath
        n = int(round(mp.delay_max_us / mp.delay_step_us))
        grid = np.linspace(0.0, n * mp.delay_step_us * 1e-6, n + 1)
        return MultipathScenario(mp.peak_ratio, grid, mp.polarity, mp.threshold_frac)

    def snapshot(self) -> dict:
        return self.model_dump(mode="json")


def load_config(path: str | Path | None = None, **overrides) -> RunConfig:
    """Read a JSON config; ``None`` gives the defaults. Overrides replace top-level keys.

    Raises:
        ConfigError: On unreadable JSON or schema violations.
    """
    data: dict = {}
    if path is not None:
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"config {path} must hold a JSON object")
    data.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(str(exc)) from exc
