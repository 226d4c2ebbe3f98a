"""Lockstep wiring of physics, event extraction, synthesis, link and emulator.

Each simulation step runs, in order: hand coupling and physics, fingertip
summaries, event extraction (stamped with the post-step simulation time),
condition masking, synthesis of the next ``rate * dt`` ticks, delta encoding
into the frame capture. The emulated device is rendered from the capture
once the run ends.
"""

from __future__ import annotations

import time as _time
from dataclasses import dataclass, field

import numpy as np

from ..actuator import DeviceTimeline, emulate_device
from ..events import FINGER_CHANNELS, FingerContactHistory, condition_mask, extract_events
from ..hand import (
    CouplingParams,
    HandGeometry,
    TrackedHandPose,
    build_sim_hand,
    fingertip_contact_summary,
    hand_elements,
    straight_finger_pose,
)
from ..link import Capture, StreamEncoder
from ..physics import World, step
from ..physics.scene import TraceRecorder
from ..synth import SynthConfig, Synthesizer, default_motors


@dataclass(frozen=True)
class FingerPlacement:
    """Where a finger touches a box-shaped object, in the object's frame.

    ``direction`` is the unit outward face normal the fingertip presses on;
    ``half_width`` the distance from the grasp centre to that face;
    ``lateral`` an offset along the face.
    """

    finger: str
    direction: tuple
    half_width: float
    lateral: tuple = (0.0, 0.0, 0.0)


class PinchRig:
    """Builds tracked target poses for straight fingers pinching a box.

    ``offset`` per finger is how far the target sits inside the surface
    (positive squeezes, negative leaves a gap).
    """

    def __init__(self, placements, coupling=CouplingParams(), geometry=HandGeometry(), k_n: float = 1.0e4):
        self.placements = tuple(placements)
        self.coupling = coupling
        self.geometry = geometry
        self.k_n = k_n

    @property
    def fingers(self) -> tuple:
        return tuple(p.finger for p in self.placements)

    def offset_for_force(self, force: float) -> float:
        """Squeeze offset giving roughly ``force`` at the fingertip: the whole
        three-phalanx chain pulls on the tip, plus the contact's own give."""
        return force / (3.0 * self.coupling.k_lin) + force / self.k_n

    def pose(self, t: float, center, offsets: dict) -> TrackedHandPose:
        center = np.asarray(center, float)
        r = self.geometry.radius
        targets = {}
        for p in self.placements:
            d = np.asarray(p.direction, float)
            tip = center + np.asarray(p.lateral, float) + d * (p.half_width + r - offsets[p.finger])
            for phalanx, pq in straight_finger_pose(tip, -d, (0.0, 1.0, 0.0), self.geometry).items():
                targets[(p.finger, phalanx)] = pq
        return TrackedHandPose(t, targets)


@dataclass
class Artifacts:
    """Everything a run produces besides its metrics."""

    physics_trace: str
    events: list
    raw_events: list
    signals: dict
    rate: float
    capture: Capture
    timeline: DeviceTimeline | None
    summaries: list = field(default_factory=list)


class Pipeline:
    def __init__(
        self,
        world: World,
        rig: PinchRig,
        initial_pose: TrackedHandPose,
        condition,
        render: bool = True,
        realtime: bool = False,
        synth_config: SynthConfig | None = None,
        slip_fixed_amplitude: float | None = None,
    ):
        self.world = world
        self.rig = rig
        self.hand = build_sim_hand(world, initial_pose, rig.fingers, rig.coupling, geometry=rig.geometry)
        self.fingers = rig.fingers
        self.condition = condition
        self.render = render
        self.realtime = realtime
        self.history = FingerContactHistory.for_fingers(self.fingers)
        motors = default_motors()
        channels = sorted(FINGER_CHANNELS[f] for f in self.fingers)
        cfg = synth_config or SynthConfig(
            sim_rate=1.0 / world.dt,
            motors={ch: motors[ch] for ch in channels},
            slip_fixed_amplitude=slip_fixed_amplitude,
        )
        self.synth = Synthesizer(cfg)
        self.ticks_per_step = int(round(cfg.rate * world.dt))
        self.encoder = StreamEncoder(rate=cfg.rate)
        self.capture = Capture(cfg.rate, 0)
        self.trace = TraceRecorder()
        self.events: list = []
        self.raw_events: list = []
        self._chunks: list = []
        self.last_summaries: dict = {}
        self._wall_start = _time.perf_counter()
        if render:
            self._render_ticks()

    def _render_ticks(self) -> None:
        k0 = self.synth.tick_index
        block = self.synth.run(self.ticks_per_step)
        self._chunks.append(block)
        channels = self.synth.channels
        for j in range(self.ticks_per_step):
            frame = self.encoder.tick({ch: block[ch][j] for ch in channels})
            if frame:
                self.capture.records.append((k0 + j, frame))

    def step(self, target: TrackedHandPose):
        """Advance one simulation step; returns the unmasked events."""
        world = self.world
        step(world, hand_elements(world, self.hand, target))
        summaries = {f: fingertip_contact_summary(world, self.hand, f) for f in self.fingers}
        self.last_summaries = summaries
        events, self.history = extract_events(self.history, summaries, world.time)
        masked = condition_mask(events, self.condition)
        self.raw_events.extend(events)
        self.events.extend(masked)
        self.trace.record(world)
        if self.render:
            self.synth.push(masked)
            self._render_ticks()
        if self.realtime:
            lag = world.time - (_time.perf_counter() - self._wall_start)
            if lag > 0:
                _time.sleep(lag)
        return events

    def finish(self) -> Artifacts:
        if self.render and self._chunks:
            signals = {ch: np.concatenate([c[ch] for c in self._chunks]) for ch in self.synth.channels}
        else:
            signals = {ch: np.zeros(0) for ch in self.synth.channels}
        self.capture.n_ticks = self.synth.tick_index
        timeline = None
        if self.render:
            timeline = emulate_device(self.capture, self.synth.config.motors)
        return Artifacts(
            physics_trace=self.trace.text(),
            events=self.events,
            raw_events=self.raw_events,
            signals=signals,
            rate=self.synth.config.rate,
            capture=self.capture,
            timeline=timeline,
        )
