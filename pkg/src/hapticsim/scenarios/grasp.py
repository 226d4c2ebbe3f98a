"""Minimum-grip search: pinch a cube, lift it and lower the grip in 5 %
steps until it no longer holds."""

from __future__ import annotations

import numpy as np

from ..errors import ControllerNeverHeld, Timeout
from ..physics import Box, HalfSpace, Material, RigidBody, World
from .config import RunMetrics, ScenarioConfig
from .pipeline import FingerPlacement, Pipeline, PinchRig

OPEN_GAP = 0.01  # m between fingertip and face before closing
CLOSE_TIME = 0.3
SETTLE_TIME = 0.3
LIFT_SPEED = 0.05  # m/s


def build_world(config: ScenarioConfig) -> tuple[World, RigidBody]:
    scene = config.scene
    half = tuple(0.5 * s for s in scene.size)
    material = Material(scene.mu_static, scene.mu_dynamic, scene.density)
    world = World(bodies=[RigidBody("ground", HalfSpace())], dt=config.dt)
    cube = world.add(RigidBody("object", Box(half), material, position=(0.0, half[1], 0.0)))
    return world, cube


def _placements(config: ScenarioConfig) -> list:
    hx = 0.5 * config.scene.size[0]
    return [FingerPlacement("Thumb", (-1.0, 0.0, 0.0), hx), FingerPlacement("Index", (1.0, 0.0, 0.0), hx)]


class BreakMonitor:
    """Counts rising crossings of the break force and resets the object."""

    def __init__(self, body: RigidBody, threshold: float):
        self.body = body
        self.threshold = threshold
        self.start = (body.position.copy(), body.orientation.copy())
        self.above = False
        self.count = 0

    def update(self, summaries: dict) -> bool:
        above = any(s.total_normal_force > self.threshold for s in summaries.values())
        fired = above and not self.above
        self.above = above
        if fired:
            self.count += 1
            self.body.position = self.start[0].copy()
            self.body.orientation = self.start[1].copy()
            self.body.linear_velocity = np.zeros(3)
            self.body.angular_velocity = np.zeros(3)
        return fired


def run_grasp_min_force(config: ScenarioConfig, realtime: bool = False):
    """Descending-grip staircase. Returns ``(RunMetrics, Artifacts)``."""
    ctl = config.controller
    world, cube = build_world(config)
    rig = PinchRig(_placements(config), k_n=world.gains.k_n)
    rng = np.random.default_rng(config.seed)
    center0 = cube.position.copy()
    open_offsets = {f: -OPEN_GAP for f in rig.fingers}
    pipe = Pipeline(world, rig, rig.pose(0.0, center0, open_offsets), config.condition, config.render, realtime,
                    slip_fixed_amplitude=config.slip_fixed_amplitude)
    breaks = BreakMonitor(cube, config.break_force)
    dt = world.dt

    def advance(center, force: float) -> None:
        c = center + (rng.normal(0.0, ctl.tracking_noise, 3) if ctl.tracking_noise else 0.0)
        off = rig.offset_for_force(force)
        pipe.step(rig.pose(world.time, c, {f: off for f in rig.fingers}))
        breaks.update(pipe.last_summaries)
        if world.time > config.timeout:
            raise Timeout(f"staircase unfinished after {config.timeout:g} s")

    def steps(duration: float) -> int:
        return int(round(duration / dt))

    f0 = ctl.start_force
    n_close = steps(CLOSE_TIME)
    for k in range(n_close):
        u = (k + 1) / n_close
        off = (1 - u) * -OPEN_GAP + u * rig.offset_for_force(f0)
        pipe.step(rig.pose(world.time, center0, {f: off for f in rig.fingers}))
        breaks.update(pipe.last_summaries)
    for _ in range(steps(SETTLE_TIME)):
        advance(center0, f0)
    if ctl.squeeze_peak is not None:
        n_half = steps(0.5)
        for k in range(2 * n_half):
            u = (k + 1) / n_half if k < n_half else (2 * n_half - k - 1) / n_half
            advance(center0, f0 + u * (ctl.squeeze_peak - f0))
        for _ in range(steps(SETTLE_TIME)):
            advance(center0, f0)

    lift = np.array([0.0, ctl.lift_height, 0.0])
    n_lift = max(1, steps(ctl.lift_height / LIFT_SPEED))
    for k in range(n_lift):
        advance(center0 + lift * (k + 1) / n_lift, f0)
    center = center0 + lift
    if cube.position[1] - center0[1] < 0.5 * ctl.lift_height:
        raise ControllerNeverHeld(f"object not lifted at start force {f0:.4g} N")

    levels = []
    n_dwell = steps(ctl.dwell)
    force = f0
    for level in range(ctl.max_levels):
        y0 = float(cube.position[1])
        normals, totals = [], []
        held = True
        for k in range(n_dwell):
            advance(center, force)
            if k >= n_dwell // 2:
                s = pipe.last_summaries["Thumb"]
                normals.append(s.total_normal_force)
                totals.append(s.total_force)
            if y0 - cube.position[1] >= ctl.hold_drop:
                held = False
                break
        levels.append({
            "command": force,
            "thumb_normal": float(np.mean(normals)) if normals else None,
            "thumb_total": float(np.mean(totals)) if totals else None,
            "drop": float(y0 - cube.position[1]),
            "held": held,
        })
        if not held:
            break
        force *= ctl.step_ratio

    held_levels = [lv for lv in levels if lv["held"]]
    if not held_levels:
        raise ControllerNeverHeld(f"object slipped at the first level ({f0:.4g} N)")
    last = held_levels[-1]
    metrics = RunMetrics(
        scenario=config.scenario,
        condition=config.condition,
        seed=config.seed,
        success=True,
        duration=world.time,
        steps=world.step_index,
        break_events=breaks.count,
        min_grip_force=last["thumb_normal"],
        min_grip_total_force=last["thumb_total"],
        levels=levels,
    )
    return metrics, pipe.finish()
