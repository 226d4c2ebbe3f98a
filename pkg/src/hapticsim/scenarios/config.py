"""Scenario configuration and run metrics."""

from __future__ import annotations

import enum
import json
from pathlib import Path
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from ..errors import ScenarioError
from ..events import Condition


class ScenarioKind(str, enum.Enum):
    GRASP_MIN_FORCE = "GraspMinForce"
    SLIDE_REGRASP = "SlideRegrasp"
    PEG_IN_HOLE = "PegInHole"


ALLOWED_CONDITIONS = {
    ScenarioKind.GRASP_MIN_FORCE: (Condition.NO_HAPTIC, Condition.CONTACT_VIBRATION_ONLY, Condition.PRESSURE_ONLY),
    ScenarioKind.SLIDE_REGRASP: (
        Condition.NO_HAPTIC,
        Condition.PRESSURE_ONLY,
        Condition.PRESSURE_AND_VIBRATION,
        Condition.VIBRATION_ONLY,
    ),
    # haptics on or off
    ScenarioKind.PEG_IN_HOLE: (Condition.NO_HAPTIC, Condition.PRESSURE_AND_VIBRATION),
}


# used when a config names no condition
DEFAULT_CONDITIONS = {
    ScenarioKind.GRASP_MIN_FORCE: Condition.PRESSURE_ONLY,
    ScenarioKind.SLIDE_REGRASP: Condition.PRESSURE_AND_VIBRATION,
    ScenarioKind.PEG_IN_HOLE: Condition.PRESSURE_AND_VIBRATION,
}


class SceneParams(BaseModel):
    """The manipulated object: a box of ``size`` (x, y, z) metres."""

    model_config = ConfigDict(extra="forbid")

    size: tuple[float, float, float]
    density: float = 1.0
    mu_static: float
    mu_dynamic: float

    @model_validator(mode="after")
    def _check(self):
        if min(self.size) <= 0 or self.density <= 0:
            raise ValueError("object size and density must be positive")
        if not 0 <= self.mu_dynamic <= self.mu_static:
            raise ValueError("need 0 <= mu_dynamic <= mu_static")
        return self

    @property
    def mass(self) -> float:
        x, y, z = self.size
        return x * y * z * self.density * 1000.0


DEFAULT_SCENES = {
    ScenarioKind.GRASP_MIN_FORCE: SceneParams(size=(0.05, 0.05, 0.05), mu_static=4.0, mu_dynamic=3.0),
    ScenarioKind.SLIDE_REGRASP: SceneParams(size=(0.05, 0.15, 0.05), mu_static=0.15, mu_dynamic=0.10),
    ScenarioKind.PEG_IN_HOLE: SceneParams(size=(0.035, 0.10, 0.035), mu_static=1.0, mu_dynamic=0.8),
}


class ControllerParams(BaseModel):
    """Scripted stand-in for the participant. Forces are per finger (N)."""

    model_config = ConfigDict(extra="forbid")

    reaction_delay: float = Field(0.15, ge=0)
    # grasp staircase
    start_force: float = Field(0.4, gt=0)
    step_ratio: float = Field(0.95, gt=0, lt=1)
    dwell: float = Field(2.0, gt=0)
    hold_drop: float = Field(0.005, gt=0)
    lift_height: float = Field(0.05, ge=0)
    max_levels: int = Field(60, ge=1)
    # optional squeeze pulse (time s, peak N) for exercising the break rule
    squeeze_peak: Optional[float] = None
    squeeze_at: float = 1.0
    # slide and re-grasp
    hold_force: float = Field(20.0, gt=0)
    ramp_rate: float = Field(4.0, gt=0)
    floor_force: float = Field(2.0, ge=0)
    regrasp_force: float = Field(30.0, gt=0)
    fall_limit: float = Field(0.10, gt=0)
    # peg in hole
    grip_force: float = Field(6.0, gt=0)
    lateral_offset: float = 0.0
    correction_time: Optional[float] = None
    excursion: bool = False
    max_lead: float = Field(0.002, gt=0)
    # tracking jitter (m, standard deviation) drawn from the run seed
    tracking_noise: float = Field(0.0, ge=0)


class ScenarioConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    scenario: ScenarioKind
    scene: Optional[SceneParams] = None
    condition: Optional[Condition] = None
    controller: ControllerParams = Field(default_factory=ControllerParams)
    break_force: float = Field(15.0, gt=0)
    seed: int = 0
    dt: float = Field(0.01, gt=0)
    timeout: float = Field(120.0, gt=0)
    render: bool = True
    # constant slip vibration amplitude in place of the speed-scaled one
    slip_fixed_amplitude: Optional[float] = Field(None, ge=0, le=1)

    @field_validator("condition", mode="before")
    @classmethod
    def _condition(cls, v):
        return Condition(v) if isinstance(v, str) else v

    @model_validator(mode="after")
    def _defaults(self):
        if self.scene is None:
            self.scene = DEFAULT_SCENES[self.scenario]
        if self.condition is None:
            self.condition = DEFAULT_CONDITIONS[self.scenario]
        if self.condition not in ALLOWED_CONDITIONS[self.scenario]:
            allowed = ", ".join(c.value for c in ALLOWED_CONDITIONS[self.scenario])
            raise ValueError(f"condition {self.condition.value} not used by {self.scenario.value}; choose {allowed}")
        return self


def load_config(path) -> ScenarioConfig:
    try:
        return ScenarioConfig.model_validate(json.loads(Path(path).read_text()))
    except (json.JSONDecodeError, ValidationError) as exc:
        raise ScenarioError(f"{path}: invalid scenario config: {exc}") from None


class RunMetrics(BaseModel):
    """Summary of one scenario run. Unused fields stay ``None``."""

    scenario: ScenarioKind
    condition: Condition
    seed: int
    success: bool
    duration: float
    steps: int
    break_events: int = 0
    # grasp
    min_grip_force: Optional[float] = None
    min_grip_total_force: Optional[float] = None
    levels: list = Field(default_factory=list)
    # slide
    slip_onset_time: Optional[float] = None
    regrasp_time: Optional[float] = None
    latency: Optional[float] = None
    slip_onset_grip: Optional[float] = None
    fall_distance: Optional[float] = None
    # peg
    completion_time: Optional[float] = None
    resets: int = 0
    out_of_bounds_events: int = 0
    reset_times: list = Field(default_factory=list)
    wall_contact_time: Optional[float] = None
    files: dict = Field(default_factory=dict)
