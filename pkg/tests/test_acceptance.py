"""Acceptance suite: one test per criterion, each checked at its stated
tolerance and within its runtime budget. The terminal summary prints one
PASS/FAIL line per criterion (see conftest.py)."""

import math
import time

import numpy as np
import pytest

from hapticsim.actuator import (
    MOTOR_612,
    MOTOR_716,
    CapstanParams,
    capstan_tension,
    motor_force,
    string_pull_force,
)
from hapticsim.errors import LinkError, Timeout
from hapticsim.events import (
    Condition,
    EventKind,
    FingerContactHistory,
    condition_mask,
    extract_events,
)
from hapticsim.hand import FingertipSummary, summarize_contacts
from hapticsim.link import (
    FULL_SCALE,
    ChannelShadow,
    StreamEncoder,
    Capture,
    decode_frame,
    encode_frame,
    quantize,
    reconstruct_capture,
)
from hapticsim.physics import Box, FrictionState, HalfSpace, Material, RigidBody, World, friction_update, step
from hapticsim.scenarios import ScenarioConfig, export_run, render_artifacts, run_scenario
from hapticsim.synth import ENVELOPE_FLOOR, SynthConfig, event_tick, force_to_current

G = 9.81
# emulated vibration amplitude (N) treated as "no content above 20 Hz":
# 1/15 of the 0.031 N perception threshold
VIBRATION_FLOOR = 2.0e-3


class Budget:
    def __init__(self, seconds):
        self.seconds = seconds

    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.start
        if exc[0] is None:
            assert self.elapsed < self.seconds, f"took {self.elapsed:.1f} s, budget {self.seconds} s"


def run(render=False, **kw):
    return run_scenario(ScenarioConfig(render=render, **kw))


@pytest.mark.criterion(1, "actuator anchors")
def test_criterion_1_actuator_anchors():
    with Budget(1.0):
        assert motor_force(0.15, MOTOR_612) == pytest.approx(0.260, abs=1e-6)
        assert motor_force(0.04, MOTOR_612) == pytest.approx(0.031, abs=0.002)
        assert motor_force(1.0, MOTOR_716) == pytest.approx(0.540, abs=1e-6)


@pytest.mark.criterion(2, "capstan and pull-force suite")
def test_criterion_2_capstan_suite():
    rng = np.random.default_rng(2)
    with Budget(1.0):
        for t0 in (0.0, 0.37, 1.0, 12.5):
            assert capstan_tension(t0, CapstanParams(0.0, 3.0)) == t0
            assert capstan_tension(t0, CapstanParams(0.7, 0.0)) == t0
        mu = rng.uniform(0.0, 1.0, 10_000)
        th1 = rng.uniform(0.0, 2 * math.pi, 10_000)
        th2 = rng.uniform(0.0, 2 * math.pi, 10_000)
        t0 = rng.uniform(0.01, 10.0, 10_000)
        for m, a, b, t in zip(mu, th1, th2, t0):
            whole = capstan_tension(t, CapstanParams(m, a + b))
            parts = capstan_tension(capstan_tension(t, CapstanParams(m, a)), CapstanParams(m, b))
            assert whole == pytest.approx(parts, rel=1e-12)
        torque = rng.uniform(0.0, 1e-3, 1000)
        radius = rng.uniform(1e-4, 1e-2, 1000)
        for tq, r in zip(torque, radius):
            f = string_pull_force(tq, r)
            assert f == pytest.approx(tq / r, rel=1e-12)
            assert string_pull_force(tq, 2 * r) == pytest.approx(f / 2, rel=1e-12)
            assert string_pull_force(3 * tq, r) == pytest.approx(3 * f, rel=1e-12)


def resting_cube_normal_force():
    ground = RigidBody("ground", HalfSpace(), Material(4.0, 3.0, 1.0))
    world = World(bodies=[ground])
    cube = world.add(RigidBody("cube", Box((0.025,) * 3), Material(4.0, 3.0, 1.0), position=(0, 0.035, 0)))
    totals = []
    for k in range(300):
        step(world)
        if k >= 100:
            totals.append(sum(c.normal_force for c in world.contacts))
    return cube, float(np.mean(totals))


@pytest.mark.criterion(3, "physics equilibrium oracles")
def test_criterion_3_equilibrium_oracles():
    with Budget(30.0):
        cube, mean_n = resting_cube_normal_force()
        assert cube.mass == pytest.approx(0.125)
        assert mean_n == pytest.approx(0.125 * G, rel=0.02)
        assert abs(cube.position[1] - 0.025) < 1e-3

        grasp_oracle = 0.125 * G / (2 * 4.0)
        m, _ = run(scenario="GraspMinForce", condition="PressureOnly")
        ratio = m.min_grip_force / grasp_oracle
        assert 1.0 <= ratio <= 1.5, f"grasp minimum {m.min_grip_force:.4f} N is {ratio:.3f}x the oracle"

        slide_oracle = 0.375 * G / (2 * 0.15)
        m, _ = run(scenario="SlideRegrasp")
        assert m.slip_onset_grip == pytest.approx(slide_oracle, rel=0.15)


def test_oracle_values_frozen():
    # independent arithmetic for the two equilibrium oracles
    assert 0.125 * G / 8 == pytest.approx(0.153281, abs=1e-6)
    assert 0.375 * G / 0.30 == pytest.approx(12.2625, abs=1e-9)


def _fuzz_friction(rng, trials):
    states = (FrictionState.NONE, FrictionState.STATIC, FrictionState.DYNAMIC)
    for _ in range(trials):
        mu_s = rng.uniform(0.0, 5.0)
        mu_d = rng.uniform(0.0, mu_s)
        normal = 0.0 if rng.random() < 0.05 else rng.uniform(0.0, 20.0)
        trial = rng.normal(0.0, rng.uniform(0.01, 30.0), 3)
        scale = 10.0 ** rng.uniform(-6, 1)
        vt = rng.normal(0.0, scale, 3)
        prev = states[rng.integers(3)]
        state, ft = friction_update(normal, trial, prev, mu_s, mu_d, vt)
        mag = float(np.linalg.norm(ft))
        if state is FrictionState.STATIC:
            assert mag <= mu_s * normal + 1e-9
        elif state is FrictionState.DYNAMIC:
            assert math.isclose(mag, mu_d * normal, rel_tol=1e-6, abs_tol=1e-12)
            assert float(ft @ vt) <= 1e-12
        else:
            assert normal <= 0.0 and mag == 0.0


def _state_machine_ramp():
    """Trial force grows 0.01 N per step against N = 1 N, mu_s = 0.5."""
    history = FingerContactHistory.for_fingers(["Index"])
    prev = FrictionState.NONE
    for k in range(1, 100):
        trial = np.array([0.01 * k, 0.0, 0.0])
        state, _ = friction_update(1.0, trial, prev, 0.5, 0.4, np.array([1e-4, 0.0, 0.0]))
        summary = FingertipSummary(True, 1.0, state, 1e-4, 0.0)
        events, history = extract_events(history, {"Index": summary}, k * 0.01)
        slip = any(e.kind is EventKind.SLIP_ONSET for e in events)
        if slip:
            return k, state
        prev = state
    return None, None


def _physics_ramp():
    """Box on a plane pushed by a force growing 2 N/s."""
    mat = Material(0.5, 0.4, 1.0)
    world = World(bodies=[RigidBody("ground", HalfSpace(), mat)])
    world.add(RigidBody("box", Box((0.025,) * 3), mat, position=(0, 0.025, 0)))
    for _ in range(100):
        step(world)
    history = FingerContactHistory({"box": 0})
    first_exceeded = first_slip = None
    for k in range(400):
        step(world, external={"box": (np.array([2.0 * k * world.dt, 0, 0]), np.zeros(3))})
        exceeded = any(np.linalg.norm(c.trial_force) > 0.5 * c.normal_force for c in world.contacts)
        events, history = extract_events(history, {"box": summarize_contacts(world.contacts, "box")}, world.time)
        if first_exceeded is None and exceeded:
            first_exceeded = k
        if first_slip is None and any(e.kind is EventKind.SLIP_ONSET for e in events):
            first_slip = k
        if first_exceeded is not None and first_slip is not None:
            break
    return first_exceeded, first_slip


@pytest.mark.criterion(4, "friction state machine")
def test_criterion_4_friction_state_machine():
    with Budget(10.0):
        _fuzz_friction(np.random.default_rng(4), 100_000)
        # 0.01 k > 0.5 first holds at k = 51
        k, state = _state_machine_ramp()
        assert k == 51 and state is FrictionState.DYNAMIC
        exceeded, slipped = _physics_ramp()
        assert exceeded is not None and slipped == exceeded


@pytest.mark.criterion(5, "pipeline latency")
def test_criterion_5_latency():
    with Budget(60.0):
        for d in (0.0, 0.05, 0.15):
            m, _ = run(scenario="SlideRegrasp", controller={"reaction_delay": d})
            p = m.latency - d
            assert -1e-9 <= p <= 0.02 + 1e-9, f"delay {d}: latency {m.latency}"
            assert m.regrasp_time - m.slip_onset_time == pytest.approx(m.latency, abs=1e-9)


@pytest.mark.criterion(6, "signal and protocol round trips")
def test_criterion_6_round_trips():
    rng = np.random.default_rng(6)
    with Budget(10.0):
        for motor in (MOTOR_612, MOTOR_716):
            grid = np.linspace(motor.i_dead, motor.i_sat, 2001)[1:]
            for i in np.concatenate([grid, rng.uniform(motor.i_dead, motor.i_sat, 2000)]):
                if i > motor.i_dead:
                    assert force_to_current(motor_force(i, motor), motor) == pytest.approx(i, abs=1e-6)

        for _ in range(10_000):
            n = rng.integers(0, 10)
            channels = rng.choice(9, size=n, replace=False)
            updates = {int(ch): float(v) for ch, v in zip(channels, rng.uniform(0, 1, n))}
            frame, _ = encode_frame(updates, ChannelShadow())
            decoded = decode_frame(frame)
            assert decoded.raw == {ch: quantize(v) for ch, v in updates.items()}
            for ch, v in updates.items():
                assert abs(decoded.updates[ch] - v) <= 0.5 / FULL_SCALE + 1e-15

        for _ in range(200):
            n = rng.integers(0, 10)
            channels = rng.choice(9, size=n, replace=False)
            frame, _ = encode_frame({int(c): float(rng.uniform()) for c in channels}, ChannelShadow(seq=int(rng.integers(256))))
            for bit in range(8 * len(frame)):
                bad = bytearray(frame)
                bad[bit // 8] ^= 1 << (bit % 8)
                with pytest.raises(LinkError):
                    decode_frame(bytes(bad))

        _, art = run(render=True, scenario="SlideRegrasp")
        for threshold in (0, 3):
            enc = StreamEncoder(rate=art.rate, shadow=ChannelShadow(threshold=threshold))
            cap = Capture(art.rate, len(art.signals[0]))
            for k in range(cap.n_ticks):
                frame = enc.tick({ch: art.signals[ch][k] for ch in art.signals})
                if frame:
                    cap.records.append((k, frame))
            rec = reconstruct_capture(cap, channels=sorted(art.signals), strict=True)
            bound = (threshold + 0.5) / FULL_SCALE + 1e-12
            for ch in art.signals:
                assert np.max(np.abs(rec[ch] - art.signals[ch])) <= bound


@pytest.mark.criterion(7, "peg-in-hole geometry")
def test_criterion_7_peg_in_hole():
    assert (3.95 - 3.5) / 2 == pytest.approx(0.225)
    with Budget(60.0):
        m, _ = run(scenario="PegInHole")
        assert m.success and m.resets == 0

        # 0.5 cm exceeds the 0.225 cm clearance: no insertion until corrected
        with pytest.raises(Timeout):
            run(scenario="PegInHole", controller={"lateral_offset": 0.005}, timeout=15.0)
        m, art = run(scenario="PegInHole", controller={"lateral_offset": 0.005, "correction_time": 8.0})
        assert m.wall_contact_time is not None and m.wall_contact_time < 8.0
        assert m.success and m.completion_time > 8.0

        m, art = run(scenario="PegInHole", controller={"excursion": True})
        assert m.resets == 1 == m.out_of_bounds_events
        assert m.completion_time > m.reset_times[0]
        times = [float(line.split(",")[1]) for line in art.physics_trace.splitlines()[1:] if ",body," in line]
        steps = np.unique(np.round(np.array(times) / 0.01).astype(int))
        assert np.all(np.diff(steps) == 1) and steps[0] == 1
        assert m.completion_time == pytest.approx(steps[-1] * 0.01)


def _export_twice(tmp_path, name, **kw):
    dirs = []
    for rep in range(2):
        m, art = run(render=True, **kw)
        out = tmp_path / f"{name}-{rep}"
        export_run(m, art, out)
        dirs.append(out)
    names = sorted(p.name for p in dirs[0].iterdir())
    assert names == sorted(p.name for p in dirs[1].iterdir())
    assert len(names) == 6
    for n in names:
        assert (dirs[0] / n).read_bytes() == (dirs[1] / n).read_bytes(), f"{name}: {n} differs"


@pytest.mark.criterion(8, "determinism")
def test_criterion_8_determinism(tmp_path):
    with Budget(120.0):
        _export_twice(tmp_path, "grasp", scenario="GraspMinForce", condition="PressureOnly", seed=8)
        _export_twice(tmp_path, "slide", scenario="SlideRegrasp", seed=8, controller={"tracking_noise": 1e-4})
        _export_twice(tmp_path, "peg", scenario="PegInHole", seed=8)


def active_ticks(events, cfg: SynthConfig, n: int) -> np.ndarray:
    """Ticks at which a transient or the slip vibration can be non-zero."""
    active = np.zeros(n, dtype=bool)
    for e in events:
        k0 = event_tick(e.time, cfg.rate)
        if e.kind is EventKind.CONTACT_ONSET or e.kind is EventKind.SLIP_ONSET:
            amp = min(cfg.k_amp * e.value, 1.0) if e.kind is EventKind.CONTACT_ONSET else cfg.onset_amp
            if amp <= ENVELOPE_FLOOR:
                continue
            end = e.time + cfg.tau * math.log(amp / ENVELOPE_FLOOR)
        elif e.kind is EventKind.SLIP_VELOCITY:
            end = e.time + cfg.slip_hold
        else:
            continue
        active[k0:int(math.ceil(end * cfg.rate)) + 2] = True
    return active


def _check_condition(condition, metrics, art):
    kinds = {e.kind for e in art.events}
    raw = {e.kind for e in art.raw_events}
    signals = np.array([art.signals[ch] for ch in sorted(art.signals)])
    vib = max(float(np.max(v)) for v in art.timeline.vibration_amplitude.values())
    static = max(float(np.max(v)) for v in art.timeline.static_force.values())
    assert art.events == condition_mask(art.raw_events, condition)
    cfg = SynthConfig()
    if condition is Condition.NO_HAPTIC:
        assert art.events == [] and not np.any(signals) and vib == 0.0 and static == 0.0
        return
    if condition is Condition.PRESSURE_ONLY:
        assert kinds == {EventKind.PRESSURE_UPDATE}
        assert static > 0.1
        assert vib <= VIBRATION_FLOOR, f"PressureOnly vibration amplitude {vib:.2e} N"
        return
    if condition in (Condition.CONTACT_VIBRATION_ONLY, Condition.VIBRATION_ONLY):
        allowed = {
            Condition.CONTACT_VIBRATION_ONLY: {EventKind.CONTACT_ONSET, EventKind.CONTACT_RELEASE},
            Condition.VIBRATION_ONLY: {EventKind.CONTACT_ONSET, EventKind.SLIP_ONSET, EventKind.SLIP_VELOCITY},
        }[condition]
        assert EventKind.CONTACT_ONSET in kinds and kinds <= allowed
        # no baseline: the output is exactly zero whenever no vibration is live
        for ch, sig in art.signals.items():
            mine = [e for e in art.events if e.channel == ch]
            quiet = ~active_ticks(mine, cfg, sig.size)
            assert quiet.sum() > 0.5 * sig.size and not np.any(sig[quiet])
        assert vib > 50 * VIBRATION_FLOOR
        return
    assert kinds == raw and EventKind.SLIP_ONSET in kinds
    assert vib > 50 * VIBRATION_FLOOR and static > 0.1


@pytest.mark.criterion(9, "condition masking")
def test_criterion_9_condition_masking():
    with Budget(30.0):
        for condition in ("NoHaptic", "ContactVibrationOnly", "PressureOnly"):
            m, art = run(render=True, scenario="GraspMinForce", condition=condition, controller={"max_levels": 2})
            _check_condition(Condition(condition), m, art)
        for condition in ("NoHaptic", "PressureOnly", "PressureAndVibration", "VibrationOnly"):
            m, art = run(render=True, scenario="SlideRegrasp", condition=condition)
            _check_condition(Condition(condition), m, art)
