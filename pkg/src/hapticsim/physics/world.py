"""Fixed-timestep world stepping.

Each step gathers every force element acting on the dynamic bodies (gravity,
contacts, caller-supplied couplings and joints), linearises the spring and
damper terms and takes one linearly implicit Euler step::

    (M + dt C + dt^2 K) dv = dt (f + dt K v)

followed by the symplectic position update ``x += v_new dt``. With no spring
elements this reduces to plain semi-implicit Euler. The implicit treatment
is what keeps the declared contact and coupling gains stable at
``dt = 0.01 s`` on gram-scale finger bodies.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import NumericalDivergence
from .bodies import GRAVITY, HalfSpace, RigidBody, cross, integrate_quat, skew
from .collision import Contact, FrictionState, detect_contacts
from .contact import ContactGains, ContactMemory, contact_stiffness, resolve_contact_forces

MAX_SPEED = 1.0e3


@dataclass
class PointSpring:
    """Force element between a point on ``body_a`` and a point on ``body_b``.

    ``force`` is the current force on body a (body b receives the opposite).
    ``stiffness``/``damping`` are 3x3 matrices giving how that force changes
    with the displacement/velocity of b's point relative to a's point. A
    ``body_b`` of ``None`` anchors the far end to a fixed world point.
    """

    body_a: str
    point_a: np.ndarray  # world position of the attachment on a
    force: np.ndarray
    stiffness: np.ndarray
    damping: np.ndarray
    body_b: str | None = None
    point_b: np.ndarray | None = None


@dataclass
class AngularSpring:
    """Torque element on one body with isotropic angular stiffness/damping."""

    body: str
    torque: np.ndarray
    stiffness: float = 0.0
    damping: float = 0.0


@dataclass
class World:
    bodies: list[RigidBody] = field(default_factory=list)
    gravity: np.ndarray = field(default_factory=lambda: np.array(GRAVITY))
    dt: float = 0.01
    step_index: int = 0
    contacts: list[Contact] = field(default_factory=list)
    gains: ContactGains = field(default_factory=ContactGains)
    memory: ContactMemory = field(default_factory=ContactMemory)

    def __post_init__(self):
        self.gravity = np.asarray(self.gravity, dtype=float)
        ids = [b.id for b in self.bodies]
        if len(set(ids)) != len(ids):
            raise ValueError("body ids must be unique")

    @property
    def time(self) -> float:
        return self.step_index * self.dt

    def body(self, body_id: str) -> RigidBody:
        for b in self.bodies:
            if b.id == body_id:
                return b
        raise KeyError(body_id)

    def add(self, body: RigidBody) -> RigidBody:
        if any(b.id == body.id for b in self.bodies):
            raise ValueError(f"duplicate body id {body.id}")
        self.bodies.append(body)
        return body

    def materials(self) -> dict:
        return {b.id: b.material for b in self.bodies}

    def body_map(self) -> dict:
        return {b.id: b for b in self.bodies}


def _point_jacobian(r: np.ndarray) -> np.ndarray:
    # velocity of a point at lever arm r: v + w x r = [I, -[r]x] [v; w]
    j = np.zeros((3, 6))
    j[:, :3] = np.eye(3)
    j[:, 3:] = -skew(r)
    return j


def contact_elements(contacts: list[Contact], bodies: dict, gains: ContactGains) -> list[PointSpring]:
    out = []
    for c in contacts:
        if c.normal_force <= 0.0 and c.friction_state is FrictionState.NONE:
            continue
        k, d = contact_stiffness(c, gains)
        out.append(PointSpring(c.body_a, c.point, c.total_force, k, d, c.body_b, c.point))
    return out


def step(world: World, elements=(), external: dict | None = None) -> World:
    """Advance ``world`` by one ``dt`` in place and return it.

    ``elements`` are extra :class:`PointSpring`/:class:`AngularSpring` force
    elements (couplings, joints). ``external`` maps body id to a constant
    ``(force, torque)`` pair applied for this step.
    """
    dt = world.dt
    bodies = world.body_map()
    contacts = detect_contacts(world)
    history = world.memory.lookup(contacts, bodies)
    resolve_contact_forces(contacts, world.materials(), world.gains, history)

    dyn = [b for b in world.bodies if not b.kinematic]
    index = {b.id: i for i, b in enumerate(dyn)}
    n = 6 * len(dyn)
    a_mat = np.zeros((n, n))
    rhs = np.zeros(n)
    u = np.zeros(n)

    for i, b in enumerate(dyn):
        s = 6 * i
        iw = b.world_inertia()
        a_mat[s:s + 3, s:s + 3] += b.mass * np.eye(3)
        a_mat[s + 3:s + 6, s + 3:s + 6] += iw
        u[s:s + 3] = b.linear_velocity
        u[s + 3:s + 6] = b.angular_velocity
        w = b.angular_velocity
        rhs[s:s + 3] += dt * b.mass * world.gravity
        rhs[s + 3:s + 6] -= dt * cross(w, iw @ w)
    if external:
        for body_id, (force, torque) in external.items():
            if body_id in index:
                s = 6 * index[body_id]
                rhs[s:s + 3] += dt * np.asarray(force, float)
                rhs[s + 3:s + 6] += dt * np.asarray(torque, float)

    springs = contact_elements(contacts, bodies, world.gains)
    springs.extend(e for e in elements if isinstance(e, PointSpring))
    for e in springs:
        a = bodies[e.body_a]
        pb = e.point_a if e.point_b is None else e.point_b
        ja = _point_jacobian(e.point_a - a.position)
        w_rel = -a.point_velocity(e.point_a)
        jb = None
        b = bodies.get(e.body_b) if e.body_b is not None else None
        if b is not None:
            jb = _point_jacobian(pb - b.position)
            w_rel = w_rel + b.point_velocity(pb)
        f_eff = e.force + dt * (e.stiffness @ w_rel)
        x = dt * e.damping + dt * dt * e.stiffness
        ia = index.get(e.body_a)
        ib = index.get(e.body_b) if b is not None else None
        if ia is not None:
            sa = 6 * ia
            rhs[sa:sa + 6] += dt * (ja.T @ f_eff)
            a_mat[sa:sa + 6, sa:sa + 6] += ja.T @ x @ ja
        if ib is not None:
            sb = 6 * ib
            rhs[sb:sb + 6] -= dt * (jb.T @ f_eff)
            a_mat[sb:sb + 6, sb:sb + 6] += jb.T @ x @ jb
            if ia is not None:
                off = ja.T @ x @ jb
                a_mat[sa:sa + 6, sb:sb + 6] -= off
                a_mat[sb:sb + 6, sa:sa + 6] -= off.T
    for e in elements:
        if isinstance(e, AngularSpring) and e.body in index:
            s = 6 * index[e.body] + 3
            body = bodies[e.body]
            a_mat[s:s + 3, s:s + 3] += dt * (e.damping + dt * e.stiffness) * np.eye(3)
            rhs[s:s + 3] += dt * (np.asarray(e.torque, float) - dt * e.stiffness * body.angular_velocity)

    if n:
        du = np.linalg.solve(a_mat, rhs)
        u_new = u + du
    else:
        u_new = u

    # stick-spring bookkeeping uses pre-step lever arms and body-b frames
    locals_b = [bodies[c.body_b].to_local(c.point) for c in contacts]
    arms = [(c.point - bodies[c.body_a].position, c.point - bodies[c.body_b].position) for c in contacts]

    for i, b in enumerate(dyn):
        s = 6 * i
        b.linear_velocity = u_new[s:s + 3].copy()
        b.angular_velocity = u_new[s + 3:s + 6].copy()
        speed = float(np.linalg.norm(b.linear_velocity))
        if not np.isfinite(speed) or speed > MAX_SPEED:
            raise NumericalDivergence(
                f"body {b.id} reached speed {speed:.3g} m/s at step {world.step_index + 1}"
            )
    for b in world.bodies:
        if isinstance(b.shape, HalfSpace):
            continue
        # kinematic bodies simply follow their prescribed velocities
        b.position = b.position + dt * b.linear_velocity
        b.orientation = integrate_quat(b.orientation, b.angular_velocity, dt)

    deltas = []
    for c, (ra, rb) in zip(contacts, arms):
        if c.friction_state is FrictionState.STATIC:
            a, b = bodies[c.body_a], bodies[c.body_b]
            v = (a.linear_velocity + cross(a.angular_velocity, ra)) - (
                b.linear_velocity + cross(b.angular_velocity, rb)
            )
            vt = v - (v @ c.normal) * c.normal
            deltas.append(c.stick_delta + dt * vt)
        elif c.friction_state is FrictionState.DYNAMIC:
            deltas.append(-c.tangential_force / world.gains.k_t)
        else:
            deltas.append(np.zeros(3))
    world.memory.store(contacts, deltas, locals_b)

    world.contacts = contacts
    world.step_index += 1
    return world


def simulate(world: World, steps: int, callback=None) -> World:
    for _ in range(steps):
        step(world)
        if callback is not None:
            callback(world)
    return world
