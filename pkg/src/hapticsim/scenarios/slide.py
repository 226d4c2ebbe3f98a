"""Slide and re-grasp: hold a box, relax the grip until it slides, and
re-grasp after a reaction delay once slip is felt."""

from __future__ import annotations

import math

import numpy as np

from ..errors import ControllerNeverHeld, NoSlipOccurred, Timeout
from ..events import EventKind
from ..physics import Box, HalfSpace, Material, RigidBody, World
from .config import RunMetrics, ScenarioConfig
from .pipeline import FingerPlacement, Pipeline, PinchRig

OPEN_GAP = 0.01
CLOSE_TIME = 0.3
LIFT_SPEED = 0.1
LIFT = 0.15
HOLD_TIME = 1.0
AFTER_REGRASP = 1.0
STILL_SPEED = 0.01  # m/s


def build_world(config: ScenarioConfig) -> tuple[World, RigidBody]:
    scene = config.scene
    half = tuple(0.5 * s for s in scene.size)
    material = Material(scene.mu_static, scene.mu_dynamic, scene.density)
    world = World(bodies=[RigidBody("ground", HalfSpace())], dt=config.dt)
    box = world.add(RigidBody("object", Box(half), material, position=(0.0, half[1], 0.0)))
    return world, box


def run_slide_regrasp(config: ScenarioConfig, realtime: bool = False):
    """Returns ``(RunMetrics, Artifacts)``.

    Latency is measured from the first SlipOnset (its physics time, T2) to
    the step at which the controller first commands the re-grasp (T1). The
    controller sees an event at its next update, which happens at the event's
    time stamp, and then waits ``reaction_delay`` rounded up to whole steps.
    """
    ctl = config.controller
    world, box = build_world(config)
    hx = 0.5 * config.scene.size[0]
    rig = PinchRig(
        [FingerPlacement("Thumb", (-1.0, 0.0, 0.0), hx), FingerPlacement("Index", (1.0, 0.0, 0.0), hx)],
        k_n=world.gains.k_n,
    )
    rng = np.random.default_rng(config.seed)
    dt = world.dt
    center0 = box.position.copy()
    pipe = Pipeline(world, rig, rig.pose(0.0, center0, {f: -OPEN_GAP for f in rig.fingers}), config.condition,
                    config.render, realtime, slip_fixed_amplitude=config.slip_fixed_amplitude)

    def advance(center, force: float):
        c = center + (rng.normal(0.0, ctl.tracking_noise, 3) if ctl.tracking_noise else 0.0)
        off = rig.offset_for_force(force)
        return pipe.step(rig.pose(world.time, c, {f: off for f in rig.fingers}))

    def steps(duration: float) -> int:
        return int(round(duration / dt))

    n_close = steps(CLOSE_TIME)
    hold = ctl.hold_force
    for k in range(n_close):
        u = (k + 1) / n_close
        off = (1 - u) * -OPEN_GAP + u * rig.offset_for_force(hold)
        pipe.step(rig.pose(world.time, center0, {f: off for f in rig.fingers}))
    lift = np.array([0.0, LIFT, 0.0])
    n_lift = steps(LIFT / LIFT_SPEED)
    for k in range(n_lift):
        advance(center0 + lift * (k + 1) / n_lift, hold)
    center = center0 + lift
    for _ in range(steps(HOLD_TIME)):
        advance(center, hold)
    if box.position[1] < center0[1] + 0.5 * LIFT:
        raise ControllerNeverHeld(f"object dropped during the lift at {hold:.3g} N per finger")

    # relax the grip until slip is felt, then re-grasp after the delay
    delay_steps = int(math.ceil(ctl.reaction_delay / dt - 1e-9))
    force = hold
    slip_time = None
    slip_grip = None
    slip_y = None
    regrasp_step = None
    regrasp_time = None
    seen_step = None
    n_ramp = steps((hold - ctl.floor_force) / ctl.ramp_rate)
    k = 0
    while True:
        if regrasp_step is None and seen_step is not None and world.step_index >= seen_step + delay_steps:
            regrasp_step = world.step_index
            regrasp_time = world.time
        if regrasp_step is not None:
            force = ctl.regrasp_force
        elif slip_time is None:
            force = max(ctl.floor_force, hold - ctl.ramp_rate * dt * (k + 1))
        events = advance(center, force)
        k += 1
        if slip_time is None and any(e.kind is EventKind.SLIP_ONSET for e in events):
            slip_time = world.time
            slip_y = float(box.position[1])
            s = pipe.last_summaries
            slip_grip = float(np.mean([s[f].total_normal_force for f in rig.fingers]))
            seen_step = world.step_index
        if slip_time is None and k > n_ramp + steps(1.0):
            raise NoSlipOccurred(f"no slip down to {ctl.floor_force:.3g} N per finger")
        if regrasp_step is not None and world.step_index >= regrasp_step + steps(AFTER_REGRASP):
            break
        if world.time > config.timeout:
            raise Timeout(f"re-grasp unfinished after {config.timeout:g} s")

    fall = slip_y - float(box.position[1])
    still = float(np.linalg.norm(box.linear_velocity)) < STILL_SPEED
    success = still and fall < ctl.fall_limit
    metrics = RunMetrics(
        scenario=config.scenario,
        condition=config.condition,
        seed=config.seed,
        success=success,
        duration=world.time,
        steps=world.step_index,
        slip_onset_time=slip_time,
        regrasp_time=regrasp_time,
        latency=None if regrasp_step is None else (regrasp_step - seen_step) * dt,
        slip_onset_grip=slip_grip,
        fall_distance=fall,
    )
    return metrics, pipe.finish()
