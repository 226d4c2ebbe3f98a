"""Penalty contact forces and the two-state Coulomb friction model.

Normal force is a spring-damper on penetration depth. Tangential force comes
from a per-contact stick spring (elastic displacement ``delta`` accumulated
while the contact sticks) that saturates into kinetic friction once the trial
force leaves the static cone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .bodies import Material
from .collision import Contact, FrictionState


@dataclass(frozen=True)
class ContactGains:
    k_n: float = 1.0e4  # N/m
    c_n: float = 50.0  # N s/m
    k_t: float = 1.0e4  # stick spring, N/m
    c_t: float = 5.0  # stick damping, N s/m
    v_stick: float = 1.0e-3  # m/s, Dynamic -> Static reattachment speed


def combine_materials(a: Material, b: Material) -> tuple[float, float]:
    """Friction pair coefficients: the less grippy surface wins."""
    return min(a.mu_static, b.mu_static), min(a.mu_dynamic, b.mu_dynamic)


def normal_force(depth: float, separating_speed: float, k_n: float, c_n: float) -> float:
    if depth <= 0.0:
        return 0.0
    return max(0.0, k_n * depth - c_n * separating_speed)


def friction_update(
    normal: float,
    trial,
    prev_state: FrictionState,
    mu_static: float,
    mu_dynamic: float,
    tangential_velocity=None,
    v_stick: float = 1.0e-3,
):
    """One step of the stick/slip state machine.

    Returns ``(state, tangential_force)``. ``trial`` is the force the stick
    spring would apply; ``tangential_velocity`` is the slip velocity of body a
    relative to body b at the contact point.
    """
    trial = np.asarray(trial, dtype=float)
    if normal <= 0.0:
        return FrictionState.NONE, np.zeros_like(trial)
    vt = np.zeros_like(trial) if tangential_velocity is None else np.asarray(tangential_velocity, float)
    slip_speed = float(np.linalg.norm(vt))

    def kinetic():
        if slip_speed > 1e-12:
            direction = -vt / slip_speed
        else:
            t = float(np.linalg.norm(trial))
            direction = trial / t if t > 0.0 else np.zeros_like(trial)
        return FrictionState.DYNAMIC, mu_dynamic * normal * direction

    if prev_state is FrictionState.DYNAMIC and slip_speed >= v_stick:
        return kinetic()
    if float(np.linalg.norm(trial)) <= mu_static * normal:
        return FrictionState.STATIC, trial.copy()
    return kinetic()


@dataclass
class _Memory:
    local_point: np.ndarray  # contact point in body b's frame
    delta: np.ndarray  # stick spring displacement, world frame
    state: FrictionState
    slip_velocity: np.ndarray


@dataclass
class ContactMemory:
    """Per-contact tangential history carried between steps.

    New contacts inherit the record of the nearest previous contact of the
    same body pair (matched in body b's frame) within ``match_radius``.
    """

    match_radius: float = 5.0e-3
    records: dict = field(default_factory=dict)

    def lookup(self, contacts: list[Contact], bodies: dict) -> list[_Memory | None]:
        out: list[_Memory | None] = []
        used: dict = {}
        counts: dict = {}
        for c in contacts:
            counts[(c.body_a, c.body_b)] = counts.get((c.body_a, c.body_b), 0) + 1
        for c in contacts:
            key = (c.body_a, c.body_b)
            prev = self.records.get(key)
            if not prev:
                out.append(None)
                continue
            if len(prev) == 1 and counts[key] == 1:
                # a lone contact (sphere proxies) keeps its history however
                # far the point travels, e.g. while rolling
                out.append(prev[0])
                continue
            local = bodies[c.body_b].to_local(c.point)
            taken = used.setdefault(key, set())
            best, best_d = None, self.match_radius
            for idx, rec in enumerate(prev):
                if idx in taken:
                    continue
                d = float(np.linalg.norm(rec.local_point - local))
                if d <= best_d:
                    best, best_d = idx, d
            if best is None:
                out.append(None)
            else:
                taken.add(best)
                out.append(prev[best])
        return out

    def store(self, contacts: list[Contact], deltas: list[np.ndarray], local_points: list[np.ndarray]) -> None:
        records: dict = {}
        for c, delta, local in zip(contacts, deltas, local_points):
            rec = _Memory(local, delta, c.friction_state, c.tangential_velocity)
            records.setdefault((c.body_a, c.body_b), []).append(rec)
        self.records = records


def _project(delta: np.ndarray, n: np.ndarray) -> np.ndarray:
    """Rotate a stored tangential displacement onto the current tangent plane."""
    mag = float(np.linalg.norm(delta))
    if mag == 0.0:
        return delta
    t = delta - (delta @ n) * n
    tm = float(np.linalg.norm(t))
    return t * (mag / tm) if tm > 1e-15 else np.zeros(3)


def resolve_contact_forces(
    contacts: list[Contact],
    materials: dict,
    gains: ContactGains = ContactGains(),
    history: list | None = None,
) -> list[Contact]:
    """Fill in normal force, tangential force and friction state in place.

    ``materials`` maps body id to :class:`Material`. ``history`` optionally
    gives, per contact, the record inherited from the previous step (see
    :class:`ContactMemory`).
    """
    if history is None:
        history = [None] * len(contacts)
    for c, rec in zip(contacts, history):
        mu_s, mu_d = combine_materials(materials[c.body_a], materials[c.body_b])
        n_force = normal_force(c.depth, c.separating_speed, gains.k_n, gains.c_n)
        vt = c.tangential_velocity
        if rec is None:
            delta = np.zeros(3)
            prev = FrictionState.NONE
        else:
            delta = _project(rec.delta, c.normal)
            prev = rec.state
            # slip velocity reversed during the last step: it crossed zero
            if prev is FrictionState.DYNAMIC and float(vt @ rec.slip_velocity) < 0.0:
                vt = np.zeros(3)
        trial = -gains.k_t * delta - gains.c_t * c.tangential_velocity
        state, ft = friction_update(n_force, trial, prev, mu_s, mu_d, vt, gains.v_stick)
        c.normal_force = n_force
        c.trial_force = trial
        c.friction_state = state
        c.tangential_force = ft
        c.stick_delta = delta
    return contacts


def contact_stiffness(c: Contact, gains: ContactGains):
    """Linearised (K, C) matrices of the force on body a w.r.t. the relative
    motion of b's contact point with respect to a's."""
    nn = np.outer(c.normal, c.normal)
    if c.normal_force > 0.0:
        k = gains.k_n * nn
        d = gains.c_n * nn
    else:
        k = np.zeros((3, 3))
        d = np.zeros((3, 3))
    if c.friction_state is FrictionState.STATIC:
        p = np.eye(3) - nn
        k = k + gains.k_t * p
        d = d + gains.c_t * p
    return k, d


def static_bound_ok(c: Contact, mu_static: float, tol: float = 1e-9) -> bool:
    return float(np.linalg.norm(c.tangential_force)) <= mu_static * c.normal_force + tol


def dynamic_magnitude_ok(c: Contact, mu_dynamic: float, rtol: float = 1e-6) -> bool:
    target = mu_dynamic * c.normal_force
    got = float(np.linalg.norm(c.tangential_force))
    return math.isclose(got, target, rel_tol=rtol, abs_tol=1e-12)
