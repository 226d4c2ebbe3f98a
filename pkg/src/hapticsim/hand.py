"""Virtual-coupling hand.

Tracked (kinematic) phalanx poses pull simulated phalanx bodies through
spring-dampers; adjacent phalanges of a finger are tied together by stiff
penalty ball joints. Only the distal phalanges are meant to touch things, via
an 8 mm sphere proxy.
"""

from __future__ import annotations

import csv
import math
from bisect import bisect_right
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import NonMonotonicTimestamps, ParseError
from .physics.bodies import (
    Box,
    Material,
    RigidBody,
    Sphere,
    cross,
    quat_conj,
    quat_from_axis_angle,
    quat_from_matrix,
    quat_mul,
    quat_normalize,
    quat_slerp,
    quat_to_matrix,
    quat_to_rotvec,
)
from .physics.collision import FrictionState
from .physics.world import AngularSpring, PointSpring, World

FINGERS = ("Thumb", "Index", "Middle", "Ring", "Pinky")
PHALANGES = ("Proximal", "Middle", "Distal")
TRAJECTORY_HEADER = "# hapticsim trajectory v1"
TRAJECTORY_COLUMNS = ("time_s", "finger", "phalanx", "px", "py", "pz", "qw", "qx", "qy", "qz")

HAND_GROUP = 1
# high-friction skin so the grasped object's coefficients govern the pair
SKIN = Material(mu_static=10.0, mu_dynamic=10.0, density=1.0)


@dataclass(frozen=True)
class CouplingParams:
    k_lin: float = 500.0  # N/m
    c_lin: float = 5.0  # N s/m
    k_ang: float = 0.5  # N m/rad
    c_ang: float = 0.005  # N m s/rad
    max_force: float = 20.0  # N

    def __post_init__(self):
        if min(self.k_lin, self.c_lin, self.k_ang, self.c_ang) < 0:
            raise ValueError("coupling gains must be non-negative")
        if not self.max_force > 0:
            raise ValueError("max_force must be positive")


@dataclass(frozen=True)
class JointParams:
    k: float = 5.0e4  # N/m
    c: float = 5.0  # N s/m


@dataclass(frozen=True)
class HandGeometry:
    lengths: tuple = (0.040, 0.025, 0.020)  # proximal, middle, distal (m)
    masses: tuple = (0.008, 0.008, 0.008)  # kg
    radius: float = 0.008  # collision sphere radius (m)

    def length(self, phalanx: str) -> float:
        return self.lengths[PHALANGES.index(phalanx)]

    def mass(self, phalanx: str) -> float:
        return self.masses[PHALANGES.index(phalanx)]


@dataclass
class TrackedHandPose:
    """Target pose of every tracked phalanx at one instant.

    ``targets`` maps ``(finger, phalanx)`` to ``(position, quaternion)``.
    """

    timestamp: float
    targets: dict = field(default_factory=dict)

    def position(self, finger: str, phalanx: str = "Distal") -> np.ndarray:
        return self.targets[(finger, phalanx)][0]


@dataclass(frozen=True)
class BallJoint:
    body_a: str
    anchor_a: np.ndarray  # body-frame anchor on a
    body_b: str
    anchor_b: np.ndarray


@dataclass
class SimHand:
    fingers: tuple
    bodies: dict  # (finger, phalanx) -> body id
    joints: list
    coupling: CouplingParams = field(default_factory=CouplingParams)
    joint_params: JointParams = field(default_factory=JointParams)
    geometry: HandGeometry = field(default_factory=HandGeometry)

    def distal(self, finger: str) -> str:
        return self.bodies[(finger, "Distal")]


# --- target generation ------------------------------------------------------


def finger_chain_pose(base, direction, bend_axis, angles=(0.0, 0.0, 0.0), geometry=HandGeometry()) -> dict:
    """Phalanx poses of a planar finger chain.

    The proximal phalanx starts at ``base`` pointing along ``direction``; each
    joint angle in ``angles`` rotates the remaining chain about ``bend_axis``.
    Each body's local +x axis runs along its phalanx. Returns
    ``{phalanx: (centre, quaternion)}``.
    """
    direction = np.asarray(direction, float)
    direction = direction / np.linalg.norm(direction)
    bend_axis = np.asarray(bend_axis, float)
    bend_axis = bend_axis / np.linalg.norm(bend_axis)
    side = cross(bend_axis, direction)
    # frame with x along the finger, z along the bend axis
    frame = np.column_stack([direction, side, bend_axis])
    q = quat_from_matrix(frame)
    joint = np.asarray(base, float)
    out = {}
    for phalanx, angle in zip(PHALANGES, angles):
        q = quat_normalize(quat_mul(quat_from_axis_angle(bend_axis, angle), q))
        axis = quat_to_matrix(q)[:, 0]
        length = geometry.length(phalanx)
        out[phalanx] = (joint + 0.5 * length * axis, q)
        joint = joint + length * axis
    return out


def straight_finger_pose(tip, direction, bend_axis=(0.0, 1.0, 0.0), geometry=HandGeometry()) -> dict:
    """Straight finger whose distal body centre sits at ``tip``."""
    direction = np.asarray(direction, float)
    direction = direction / np.linalg.norm(direction)
    total = sum(geometry.lengths[:2]) + 0.5 * geometry.lengths[2]
    base = np.asarray(tip, float) - total * direction
    return finger_chain_pose(base, direction, bend_axis, (0.0, 0.0, 0.0), geometry)


# --- trajectories --------------------------------------------------------------


class Trajectory:
    """Time series of tracked targets with linear interpolation.

    Positions interpolate linearly, orientations by slerp. Outside a
    phalanx's sampled interval (tracking dropout) the nearest sample is held.
    Middle phalanges without samples are synthesised half-way between the
    proximal and distal targets.
    """

    def __init__(self, samples: dict):
        # samples: (finger, phalanx) -> list of (t, pos, quat), strictly increasing t
        self.samples = samples
        self._times = {k: [s[0] for s in v] for k, v in samples.items()}
        times = sorted({t for v in self._times.values() for t in v})
        self.times = times

    @property
    def start(self) -> float:
        return self.times[0]

    @property
    def end(self) -> float:
        return self.times[-1]

    def fingers(self) -> tuple:
        return tuple(f for f in FINGERS if any(k[0] == f for k in self.samples))

    def _interp(self, key, t):
        series = self.samples[key]
        times = self._times[key]
        i = bisect_right(times, t)
        if i == 0:
            return series[0][1].copy(), series[0][2].copy()
        if i == len(series):
            return series[-1][1].copy(), series[-1][2].copy()
        t0, p0, q0 = series[i - 1]
        t1, p1, q1 = series[i]
        u = (t - t0) / (t1 - t0)
        return p0 + u * (p1 - p0), quat_slerp(q0, q1, u)

    def at(self, t: float) -> TrackedHandPose:
        targets = {}
        for key in self.samples:
            targets[key] = self._interp(key, t)
        for finger in self.fingers():
            if (finger, "Middle") not in targets and (finger, "Proximal") in targets and (finger, "Distal") in targets:
                pp, qp = targets[(finger, "Proximal")]
                pd, qd = targets[(finger, "Distal")]
                targets[(finger, "Middle")] = (0.5 * (pp + pd), quat_slerp(qp, qd, 0.5))
        return TrackedHandPose(t, targets)

    def poses(self):
        return [self.at(t) for t in self.times]


def load_trajectory(path) -> Trajectory:
    """Read a trajectory CSV (see ``TRAJECTORY_COLUMNS``)."""
    text = Path(path).read_text()
    return parse_trajectory(text)


def parse_trajectory(text: str) -> Trajectory:
    lines = text.splitlines()
    if not lines or not any(line.strip() for line in lines):
        raise ParseError("empty trajectory file", line=1)
    if lines[0].strip() != TRAJECTORY_HEADER:
        raise ParseError(f"expected version header {TRAJECTORY_HEADER!r}", line=1, column=1)
    reader = csv.reader(lines[1:])
    try:
        columns = next(reader)
    except StopIteration:
        raise ParseError("missing column header", line=2) from None
    if tuple(c.strip() for c in columns) != TRAJECTORY_COLUMNS:
        raise ParseError(f"columns must be {','.join(TRAJECTORY_COLUMNS)}", line=2, column=1)
    samples: dict = {}
    for offset, row in enumerate(reader):
        lineno = offset + 3
        if not row or not "".join(row).strip():
            continue
        if len(row) != len(TRAJECTORY_COLUMNS):
            raise ParseError(f"expected {len(TRAJECTORY_COLUMNS)} fields, got {len(row)}", line=lineno)
        finger, phalanx = row[1].strip(), row[2].strip()
        if finger not in FINGERS:
            raise ParseError(f"unknown finger {finger!r}", line=lineno, column=2)
        if phalanx not in PHALANGES:
            raise ParseError(f"unknown phalanx {phalanx!r}", line=lineno, column=3)
        values = []
        for col in (0, 3, 4, 5, 6, 7, 8, 9):
            try:
                values.append(float(row[col]))
            except ValueError:
                raise ParseError(f"not a number: {row[col]!r}", line=lineno, column=col + 1) from None
        t = values[0]
        pos = np.array(values[1:4])
        quat = np.array(values[4:8])
        norm = float(np.linalg.norm(quat))
        if norm == 0.0 or not math.isfinite(norm):
            raise ParseError("invalid quaternion", line=lineno, column=7)
        series = samples.setdefault((finger, phalanx), [])
        if series and t <= series[-1][0]:
            raise NonMonotonicTimestamps(
                f"line {lineno}: {finger}/{phalanx} time {t} does not follow {series[-1][0]}"
            )
        series.append((t, pos, quat / norm))
    if not samples:
        raise ParseError("trajectory has no samples", line=len(lines))
    return Trajectory(samples)


def write_trajectory(path, poses) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(TRAJECTORY_HEADER + "\n")
        w = csv.writer(fh)
        w.writerow(TRAJECTORY_COLUMNS)
        for pose in poses:
            for (finger, phalanx), (p, q) in pose.targets.items():
                w.writerow([repr(pose.timestamp), finger, phalanx, *(repr(float(x)) for x in p), *(repr(float(x)) for x in q)])


# --- simulated hand --------------------------------------------------------------


def build_sim_hand(
    world: World,
    pose: TrackedHandPose,
    fingers=None,
    coupling: CouplingParams = CouplingParams(),
    joint_params: JointParams = JointParams(),
    geometry: HandGeometry = HandGeometry(),
    prefix: str = "hand",
) -> SimHand:
    """Create phalanx bodies at the poses in ``pose`` and add them to ``world``."""
    if fingers is None:
        fingers = tuple(f for f in FINGERS if (f, "Distal") in pose.targets)
    bodies = {}
    joints = []
    for finger in fingers:
        for phalanx in PHALANGES:
            pos, quat = pose.targets[(finger, phalanx)]
            length = geometry.length(phalanx)
            mass = geometry.mass(phalanx)
            inertia = Box((0.5 * length, geometry.radius, geometry.radius)).inertia(mass)
            body = RigidBody(
                id=f"{prefix}.{finger}.{phalanx}",
                shape=Sphere(geometry.radius),
                material=SKIN,
                position=pos,
                orientation=quat,
                mass=mass,
                inertia=inertia,
                group=HAND_GROUP,
            )
            world.add(body)
            bodies[(finger, phalanx)] = body.id
        for prox, dist in (("Proximal", "Middle"), ("Middle", "Distal")):
            joints.append(
                BallJoint(
                    bodies[(finger, prox)],
                    np.array([0.5 * geometry.length(prox), 0.0, 0.0]),
                    bodies[(finger, dist)],
                    np.array([-0.5 * geometry.length(dist), 0.0, 0.0]),
                )
            )
    return SimHand(tuple(fingers), bodies, joints, coupling, joint_params, geometry)


@dataclass
class _Coupling:
    force: np.ndarray
    torque: np.ndarray
    scale: float  # secant factor when the force clamp is active


def _coupling(body: RigidBody, target, params: CouplingParams) -> _Coupling:
    x_t, q_t = target
    force = params.k_lin * (np.asarray(x_t, float) - body.position) - params.c_lin * body.linear_velocity
    mag = float(np.linalg.norm(force))
    scale = 1.0
    if mag > params.max_force:
        scale = params.max_force / mag
        force = force * scale
    err = quat_to_rotvec(quat_mul(np.asarray(q_t, float), quat_conj(body.orientation)))
    torque = params.k_ang * err - params.c_ang * body.angular_velocity
    return _Coupling(force, torque, scale)


def apply_coupling(world: World, hand: SimHand, target: TrackedHandPose, params: CouplingParams | None = None) -> dict:
    """Coupling wrench ``(force, torque)`` per phalanx body id."""
    params = params or hand.coupling
    out = {}
    for key, body_id in hand.bodies.items():
        c = _coupling(world.body(body_id), target.targets[key], params)
        out[body_id] = (c.force, c.torque)
    return out


def coupling_elements(world: World, hand: SimHand, target: TrackedHandPose, params: CouplingParams | None = None) -> list:
    """The coupling wrenches as implicit force elements for :func:`step`."""
    params = params or hand.coupling
    eye = np.eye(3)
    out = []
    for key, body_id in hand.bodies.items():
        body = world.body(body_id)
        c = _coupling(body, target.targets[key], params)
        out.append(
            PointSpring(body_id, body.position.copy(), c.force, c.scale * params.k_lin * eye, c.scale * params.c_lin * eye)
        )
        out.append(AngularSpring(body_id, c.torque, params.k_ang, params.c_ang))
    return out


def joint_anchors(world: World, joint: BallJoint):
    a = world.body(joint.body_a)
    b = world.body(joint.body_b)
    return a.to_world(joint.anchor_a), b.to_world(joint.anchor_b)


def enforce_ball_joints(world: World, hand: SimHand, params: JointParams | None = None) -> list:
    """Penalty constraint forces keeping joint anchors together.

    Returns ``(joint, force_on_a, force_on_b)`` triples; each force acts at
    its body's anchor so no torque is transmitted about the joint point.
    """
    params = params or hand.joint_params
    out = []
    for j in hand.joints:
        a = world.body(j.body_a)
        b = world.body(j.body_b)
        pa, pb = joint_anchors(world, j)
        f = params.k * (pb - pa) + params.c * (b.point_velocity(pb) - a.point_velocity(pa))
        out.append((j, f, -f))
    return out


def joint_elements(world: World, hand: SimHand, params: JointParams | None = None) -> list:
    params = params or hand.joint_params
    eye = np.eye(3)
    out = []
    for j, f, _ in enforce_ball_joints(world, hand, params):
        pa, pb = joint_anchors(world, j)
        out.append(PointSpring(j.body_a, pa, f, params.k * eye, params.c * eye, j.body_b, pb))
    return out


def max_joint_separation(world: World, hand: SimHand) -> float:
    sep = 0.0
    for j in hand.joints:
        pa, pb = joint_anchors(world, j)
        sep = max(sep, float(np.linalg.norm(pb - pa)))
    return sep


def hand_elements(world: World, hand: SimHand, target: TrackedHandPose) -> list:
    return coupling_elements(world, hand, target) + joint_elements(world, hand)


@dataclass(frozen=True)
class FingertipSummary:
    in_contact: bool = False
    total_normal_force: float = 0.0
    friction_state: FrictionState = FrictionState.NONE
    slip_speed: float = 0.0
    normal_relative_speed: float = 0.0
    # magnitude of the summed contact force vector (normal + tangential)
    total_force: float = 0.0


def summarize_contacts(contacts, body_id: str) -> FingertipSummary:
    """Aggregate the contacts touching ``body_id`` into a fingertip summary."""
    mine = [c for c in contacts if body_id in (c.body_a, c.body_b)]
    if not mine:
        return FingertipSummary()
    total_n = 0.0
    force = np.zeros(3)
    states = set()
    slip = 0.0
    approach = 0.0
    for c in mine:
        total_n += c.normal_force
        sign = 1.0 if c.body_a == body_id else -1.0
        force += sign * c.total_force
        states.add(c.friction_state)
        approach = max(approach, abs(c.separating_speed))
        if c.friction_state is FrictionState.DYNAMIC:
            slip = max(slip, float(np.linalg.norm(c.tangential_velocity)))
    if FrictionState.DYNAMIC in states:
        state = FrictionState.DYNAMIC
    elif FrictionState.STATIC in states:
        state = FrictionState.STATIC
    else:
        state = FrictionState.NONE
    return FingertipSummary(
        in_contact=total_n > 0.0,
        total_normal_force=total_n,
        friction_state=state,
        slip_speed=slip,
        normal_relative_speed=approach,
        total_force=float(np.linalg.norm(force)),
    )


def fingertip_contact_summary(world: World, hand: SimHand, finger: str) -> FingertipSummary:
    if finger not in hand.fingers:
        raise KeyError(f"finger {finger!r} not in hand")
    return summarize_contacts(world.contacts, hand.distal(finger))
