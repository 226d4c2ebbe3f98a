"""Scripted versions of the grasp, slide and peg-in-hole tasks."""

from .config import ControllerParams, RunMetrics, ScenarioConfig, ScenarioKind, SceneParams, load_config
from .grasp import run_grasp_min_force
from .peg import run_peg_in_hole
from .runner import export_run, render_artifacts, replay_events, run_scenario
from .slide import run_slide_regrasp

__all__ = [
    "ControllerParams",
    "RunMetrics",
    "ScenarioConfig",
    "ScenarioKind",
    "SceneParams",
    "export_run",
    "load_config",
    "render_artifacts",
    "replay_events",
    "run_grasp_min_force",
    "run_peg_in_hole",
    "run_scenario",
    "run_slide_regrasp",
]
