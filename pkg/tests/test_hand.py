import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hapticsim.errors import NonMonotonicTimestamps, ParseError
from hapticsim.hand import (
    TRAJECTORY_COLUMNS,
    TRAJECTORY_HEADER,
    BallJoint,
    FingertipSummary,
    SimHand,
    TrackedHandPose,
    apply_coupling,
    build_sim_hand,
    enforce_ball_joints,
    finger_chain_pose,
    hand_elements,
    load_trajectory,
    max_joint_separation,
    parse_trajectory,
    summarize_contacts,
    write_trajectory,
)
from hapticsim.physics import Contact, FrictionState, RigidBody, Sphere, World, step

IDENTITY = (1.0, 0.0, 0.0, 0.0)


def trajectory_text(rows):
    lines = [TRAJECTORY_HEADER, ",".join(TRAJECTORY_COLUMNS)]
    lines += [",".join(str(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


def row(t, x, finger="Index", phalanx="Distal"):
    return (t, finger, phalanx, x, 0.0, 0.0, *IDENTITY)


# --- trajectories ---------------------------------------------------------------


def test_empty_trajectory_is_a_parse_error():
    with pytest.raises(ParseError):
        parse_trajectory("")


def test_interpolates_between_samples():
    traj = parse_trajectory(trajectory_text([row(0.0, 0.0), row(0.1, 0.1)]))
    pose = traj.at(0.05)
    np.testing.assert_allclose(pose.position("Index"), [0.05, 0.0, 0.0], atol=1e-12)


def test_holds_the_nearest_sample_outside_the_range():
    traj = parse_trajectory(trajectory_text([row(0.0, 0.0), row(0.1, 0.1)]))
    np.testing.assert_allclose(traj.at(5.0).position("Index"), [0.1, 0.0, 0.0])
    np.testing.assert_allclose(traj.at(-1.0).position("Index"), [0.0, 0.0, 0.0])


def test_duplicate_timestamp_is_rejected():
    with pytest.raises(NonMonotonicTimestamps):
        parse_trajectory(trajectory_text([row(0.0, 0.0), row(0.0, 0.1)]))


def test_bad_number_reports_line_and_column():
    text = trajectory_text([row(0.0, 0.0), (0.1, "Index", "Distal", "oops", 0, 0, *IDENTITY)])
    with pytest.raises(ParseError) as info:
        parse_trajectory(text)
    assert (info.value.line, info.value.column) == (4, 4)


@pytest.mark.parametrize(
    "text",
    [
        "# wrong header\n",
        TRAJECTORY_HEADER + "\n",
        TRAJECTORY_HEADER + "\ntime,finger\n",
        trajectory_text([(0.0, "Toe", "Distal", 0, 0, 0, *IDENTITY)]),
        trajectory_text([(0.0, "Index", "Tip", 0, 0, 0, *IDENTITY)]),
        trajectory_text([(0.0, "Index", "Distal", 0, 0, 0, 0, 0, 0, 0)]),
        trajectory_text([(0.0, "Index", "Distal", 0, 0)]),
    ],
)
def test_malformed_trajectories(text):
    with pytest.raises(ParseError):
        parse_trajectory(text)


def test_write_then_load(tmp_path):
    poses = [
        TrackedHandPose(t, {("Index", "Distal"): (np.array([t, 0.5, -t]), np.array(IDENTITY))})
        for t in (0.0, 0.01, 0.02)
    ]
    path = tmp_path / "traj.csv"
    write_trajectory(path, poses)
    traj = load_trajectory(path)
    assert traj.times == [0.0, 0.01, 0.02]
    np.testing.assert_array_equal(traj.at(0.02).position("Index"), [0.02, 0.5, -0.02])


def test_missing_middle_phalanx_is_synthesised():
    rows = [row(0.0, 0.0, phalanx="Proximal"), row(0.0, 0.1, phalanx="Distal")]
    pose = parse_trajectory(trajectory_text(rows)).at(0.0)
    np.testing.assert_allclose(pose.position("Index", "Middle"), [0.05, 0.0, 0.0])


# --- coupling -------------------------------------------------------------------


def one_finger(world, angles=(0.0, 0.0, 0.0)):
    pose = TrackedHandPose(0.0, {("Index", k): v for k, v in finger_chain_pose((0, 0.1, 0), (1, 0, 0), (0, 0, 1), angles).items()})
    return build_sim_hand(world, pose), pose


def shifted(pose, offset):
    return TrackedHandPose(pose.timestamp, {k: (p + offset, q) for k, (p, q) in pose.targets.items()})


def test_coupling_at_target_is_zero():
    world = World()
    hand, pose = one_finger(world)
    for force, torque in apply_coupling(world, hand, pose).values():
        np.testing.assert_allclose(force, 0.0, atol=1e-12)
        np.testing.assert_allclose(torque, 0.0, atol=1e-12)


def test_coupling_spring_and_clamp():
    world = World()
    hand, pose = one_finger(world)
    near = apply_coupling(world, hand, shifted(pose, [0.01, 0.0, 0.0]))
    far = apply_coupling(world, hand, shifted(pose, [1.0, 0.0, 0.0]))
    for body_id in hand.bodies.values():
        np.testing.assert_allclose(near[body_id][0], [5.0, 0.0, 0.0], atol=1e-12)
        np.testing.assert_allclose(far[body_id][0], [20.0, 0.0, 0.0], atol=1e-12)


@given(st.tuples(*[st.floats(-2.0, 2.0)] * 3))
def test_coupling_force_never_exceeds_the_clamp(offset):
    world = World()
    hand, pose = one_finger(world)
    for force, _ in apply_coupling(world, hand, shifted(pose, np.array(offset))).values():
        assert np.linalg.norm(force) <= 20.0 + 1e-9


# --- joints ---------------------------------------------------------------------


def _pair(gap):
    a = RigidBody("a", Sphere(0.008), mass=0.008)
    b = RigidBody("b", Sphere(0.008), position=(-gap, 0.0, 0.0), mass=0.008)
    world = World([a, b])
    joint = BallJoint("a", np.zeros(3), "b", np.zeros(3))
    return world, SimHand(("Index",), {}, [joint])


def test_coincident_anchors_carry_no_force():
    world, hand = _pair(0.0)
    ((_, fa, fb),) = enforce_ball_joints(world, hand)
    np.testing.assert_allclose(fa, 0.0)
    np.testing.assert_allclose(fb, 0.0)


def test_separated_anchors_pull_back_together():
    # a's anchor sits 2 mm along +x from b's
    world, hand = _pair(0.002)
    ((_, fa, fb),) = enforce_ball_joints(world, hand)
    np.testing.assert_allclose(fa, [-100.0, 0.0, 0.0])
    np.testing.assert_allclose(fb, [100.0, 0.0, 0.0])


def test_flexing_finger_keeps_its_joints_together():
    world = World()
    hand, _ = one_finger(world)
    worst = 0.0
    for k in range(1000):
        t = (k + 1) * world.dt
        bend = 0.6 * (1.0 - math.cos(math.pi * t))
        target = TrackedHandPose(
            t,
            {("Index", p): v for p, v in finger_chain_pose((0, 0.1, 0), (1, 0, 0), (0, 0, 1), (bend,) * 3).items()},
        )
        step(world, hand_elements(world, hand, target))
        worst = max(worst, max_joint_separation(world, hand))
    assert worst <= 1e-3


def test_released_finger_loses_energy():
    world = World()
    hand, pose = one_finger(world)
    target = shifted(pose, [0.01, -0.01, 0.0])
    energy = []
    for _ in range(300):
        step(world, hand_elements(world, hand, target))
        e = 0.0
        for body_id in hand.bodies.values():
            b = world.body(body_id)
            e += 0.5 * b.mass * float(b.linear_velocity @ b.linear_velocity)
        energy.append(e)
    tail = np.array(energy[50:])
    assert np.all(np.diff(tail) <= 1e-12)


# --- contact summary ------------------------------------------------------------


def contact(normal, state, body="tip", slip=0.0):
    c = Contact(body, "obj", np.zeros(3), np.array([0.0, 1.0, 0.0]), 1e-4, np.array([slip, 0.0, 0.0]))
    c.normal_force = normal
    c.friction_state = state
    return c


def test_free_finger_summary_is_empty():
    assert summarize_contacts([], "tip") == FingertipSummary()


def test_single_static_contact():
    s = summarize_contacts([contact(0.3, FrictionState.STATIC)], "tip")
    assert s.in_contact
    assert s.total_normal_force == pytest.approx(0.3)
    assert s.friction_state is FrictionState.STATIC


def test_dynamic_takes_precedence():
    s = summarize_contacts([contact(0.2, FrictionState.STATIC), contact(0.1, FrictionState.DYNAMIC, slip=0.05)], "tip")
    assert s.friction_state is FrictionState.DYNAMIC
    assert s.total_normal_force == pytest.approx(0.3)
    assert s.slip_speed == pytest.approx(0.05)


def test_other_bodies_contacts_are_ignored():
    s = summarize_contacts([contact(1.0, FrictionState.STATIC, body="other")], "tip")
    assert not s.in_contact


@given(st.lists(st.floats(0.0, 50.0), min_size=1, max_size=6))
def test_normal_forces_add_up(forces):
    contacts = [contact(f, FrictionState.STATIC) for f in forces]
    total = 0.0
    for f in forces:
        total += f
    assert summarize_contacts(contacts, "tip").total_normal_force == total
