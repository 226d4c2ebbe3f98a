"""Peg in hole from below: three fingers lift a peg up through a square hole
in an overhead platform."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import Timeout
from ..physics import Box, HalfSpace, Material, RigidBody, World
from .config import RunMetrics, ScenarioConfig
from .pipeline import FingerPlacement, Pipeline, PinchRig

PLATFORM_BOTTOM = 0.24
PLATFORM_THICKNESS = 0.025
HOLE_WIDTH = 0.0395
PLATFORM_HALF = 0.15
START_X = -0.10
GRASP_BELOW_CENTER = 0.02  # grasp point below the peg's centre (m)
SCENE_BOUNDS = 0.5  # |x|, |z| limit of the scene (m)
FLOOR_LIMIT = -0.1
OPEN_GAP = 0.01
CARRY_HEIGHT = 0.03  # lift above the table before moving sideways
CLEAR_HEIGHT = 0.16  # grasp-centre height that clears a standing peg
FINGER_SPREAD = 0.009  # index and middle either side of the face centre
MOVE_SPEED = 0.1
RISE_SPEED = 0.05


def platform_bodies() -> list:
    """The platform as four slabs around the square hole."""
    h = 0.5 * HOLE_WIDTH
    p = PLATFORM_HALF
    t = 0.5 * PLATFORM_THICKNESS
    y = PLATFORM_BOTTOM + t
    side = 0.5 * (p - h)
    mid = 0.5 * (p + h)
    specs = [
        ("platform.+x", (mid, y, 0.0), (side, t, p)),
        ("platform.-x", (-mid, y, 0.0), (side, t, p)),
        ("platform.+z", (0.0, y, mid), (h, t, side)),
        ("platform.-z", (0.0, y, -mid), (h, t, side)),
    ]
    return [RigidBody(name, Box(half), position=pos, kinematic=True) for name, pos, half in specs]


def build_world(config: ScenarioConfig) -> tuple[World, RigidBody]:
    scene = config.scene
    half = tuple(0.5 * s for s in scene.size)
    material = Material(scene.mu_static, scene.mu_dynamic, scene.density)
    world = World(bodies=[RigidBody("ground", HalfSpace()), *platform_bodies()], dt=config.dt)
    peg = world.add(RigidBody("object", Box(half), material, position=(START_X, half[1], 0.0)))
    return world, peg


@dataclass
class Waypoints:
    """Piecewise-linear script of grasp centre and per-finger offsets."""

    points: list  # (time, centre, offsets)

    def at(self, t: float):
        pts = self.points
        if t <= pts[0][0]:
            return pts[0][1].copy(), dict(pts[0][2])
        for (t0, c0, o0), (t1, c1, o1) in zip(pts, pts[1:]):
            if t <= t1:
                u = (t - t0) / (t1 - t0) if t1 > t0 else 1.0
                return c0 + u * (c1 - c0), {f: o0[f] + u * (o1[f] - o0[f]) for f in o0}
        return pts[-1][1].copy(), dict(pts[-1][2])

    @property
    def end(self) -> float:
        return self.points[-1][0]


class PegScript:
    """Builds the scripted attempts; times are absolute simulation times."""

    def __init__(self, rig: PinchRig, grip: dict, start_center: np.ndarray, peg_height: float):
        self.rig = rig
        self.grip = grip
        self.open = {f: -OPEN_GAP for f in rig.fingers}
        self.start = start_center
        # grasp-centre height at which the peg top is 1.5 cm above the platform
        top_offset = 0.5 * peg_height + GRASP_BELOW_CENTER
        self.final_y = PLATFORM_BOTTOM + PLATFORM_THICKNESS + 0.015 - top_offset

    def _append(self, pts, center, offsets, speed=None, duration=None):
        t0, c0, _ = pts[-1]
        center = np.asarray(center, float)
        if duration is None:
            duration = max(float(np.linalg.norm(center - c0)) / speed, 0.01)
        pts.append((t0 + duration, center, dict(offsets)))

    def _insert(self, pts, x: float):
        _, c, _ = pts[-1]
        self._append(pts, (x, c[1], 0.0), self.grip, speed=MOVE_SPEED)
        self._append(pts, (x, self.final_y, 0.0), self.grip, speed=RISE_SPEED)

    def attempt(self, t: float, lateral_offset: float, excursion: bool = False) -> Waypoints:
        """Grasp the peg at its start pose and carry it up through the hole.

        With ``excursion`` the hand instead carries the peg out of the scene.
        """
        s = self.start
        pts = [(t, s.copy(), self.open)]
        self._append(pts, s, self.grip, duration=0.3)
        self._append(pts, s, self.grip, duration=0.3)
        self._append(pts, s + (0.0, CARRY_HEIGHT, 0.0), self.grip, duration=0.3)
        if excursion:
            self._append(pts, (SCENE_BOUNDS + 0.1, s[1] + CARRY_HEIGHT, 0.0), self.grip, speed=MOVE_SPEED)
        else:
            self._insert(pts, lateral_offset)
        return Waypoints(pts)

    def retry(self, t: float, center: np.ndarray, lateral_offset: float) -> Waypoints:
        """Release, return over the start pose and begin a fresh attempt."""
        pts = [(t, center.copy(), self.grip)]
        self._append(pts, center, self.open, duration=0.3)
        self._append(pts, (center[0], CLEAR_HEIGHT, center[2]), self.open, speed=MOVE_SPEED)
        self._append(pts, (self.start[0], CLEAR_HEIGHT, self.start[2]), self.open, speed=2 * MOVE_SPEED)
        self._append(pts, self.start, self.open, speed=MOVE_SPEED)
        t_next = pts[-1][0]
        rest = self.attempt(t_next, lateral_offset).points
        return Waypoints(pts + rest[1:])

    def correct(self, t: float, center: np.ndarray) -> Waypoints:
        """Back off, re-centre under the hole and rise again."""
        pts = [(t, center.copy(), self.grip)]
        self._append(pts, center - (0.0, 0.03, 0.0), self.grip, duration=0.5)
        self._insert(pts, 0.0)
        return Waypoints(pts)


def peg_inserted(peg: RigidBody) -> bool:
    top = peg.position[1] + peg.shape.half_extents[1]
    h = 0.5 * HOLE_WIDTH
    return bool(
        top > PLATFORM_BOTTOM + PLATFORM_THICKNESS and abs(peg.position[0]) < h and abs(peg.position[2]) < h
    )


def out_of_bounds(peg: RigidBody) -> bool:
    x, y, z = peg.position
    return abs(x) > SCENE_BOUNDS or abs(z) > SCENE_BOUNDS or y < FLOOR_LIMIT


def run_peg_in_hole(config: ScenarioConfig, realtime: bool = False):
    """Returns ``(RunMetrics, Artifacts)``; raises :class:`Timeout`."""
    ctl = config.controller
    world, peg = build_world(config)
    hx = 0.5 * config.scene.size[0]
    rig = PinchRig(
        [
            FingerPlacement("Thumb", (-1.0, 0.0, 0.0), hx),
            FingerPlacement("Index", (1.0, 0.0, 0.0), hx, (0.0, 0.0, FINGER_SPREAD)),
            FingerPlacement("Middle", (1.0, 0.0, 0.0), hx, (0.0, 0.0, -FINGER_SPREAD)),
        ],
        k_n=world.gains.k_n,
    )
    grip = {
        "Thumb": rig.offset_for_force(ctl.grip_force),
        "Index": rig.offset_for_force(0.5 * ctl.grip_force),
        "Middle": rig.offset_for_force(0.5 * ctl.grip_force),
    }
    rng = np.random.default_rng(config.seed)
    start_pos = peg.position.copy()
    start_rot = peg.orientation.copy()
    start_center = start_pos - (0.0, GRASP_BELOW_CENTER, 0.0)
    script = PegScript(rig, grip, start_center, config.scene.size[1])
    plan = script.attempt(0.0, ctl.lateral_offset, excursion=ctl.excursion)
    center, offsets = plan.at(0.0)
    pipe = Pipeline(world, rig, rig.pose(0.0, center, offsets), config.condition, config.render, realtime,
                    slip_fixed_amplitude=config.slip_fixed_amplitude)
    distal = [world.body(pipe.hand.distal(f)) for f in rig.fingers]
    slabs = {b.id for b in world.bodies if b.id.startswith("platform")}

    resets = 0
    reset_times = []
    corrected = False
    wall_time = None
    completion = None
    while completion is None:
        t = world.time
        if t > config.timeout:
            raise Timeout(f"peg not inserted within {config.timeout:g} s ({resets} resets)")
        if ctl.correction_time is not None and not corrected and t >= ctl.correction_time:
            corrected = True
            plan = script.correct(t, center)
        center, offsets = plan.at(t)
        # do not push the hand far ahead of where it actually is
        hand_y = float(np.mean([b.position[1] for b in distal]))
        center = center.copy()
        center[1] = min(center[1], hand_y + ctl.max_lead)
        if ctl.tracking_noise:
            center = center + rng.normal(0.0, ctl.tracking_noise, 3)
        pipe.step(rig.pose(t, center, offsets))
        if wall_time is None and any(("object" in (c.body_a, c.body_b)) and (c.body_a in slabs or c.body_b in slabs)
                                     for c in world.contacts):
            wall_time = world.time
        if out_of_bounds(peg):
            resets += 1
            reset_times.append(world.time)
            peg.position = start_pos.copy()
            peg.orientation = start_rot.copy()
            peg.linear_velocity = np.zeros(3)
            peg.angular_velocity = np.zeros(3)
            plan = script.retry(world.time, center, 0.0 if corrected else ctl.lateral_offset)
            continue
        if peg_inserted(peg):
            completion = world.time

    metrics = RunMetrics(
        scenario=config.scenario,
        condition=config.condition,
        seed=config.seed,
        success=True,
        duration=world.time,
        steps=world.step_index,
        completion_time=completion,
        resets=resets,
        out_of_bounds_events=resets,
        reset_times=reset_times,
        wall_contact_time=wall_time,
    )
    return metrics, pipe.finish()
