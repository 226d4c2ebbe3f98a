"""Rigid body state, shapes, materials and the small amount of rotation math
the engine needs.

Quaternions are stored as ``(w, x, y, z)`` numpy arrays. Angular velocity and
torques live in world coordinates; inertia is a diagonal in the body frame.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np

GRAVITY = (0.0, -9.81, 0.0)


def quat_identity() -> np.ndarray:
    return np.array([1.0, 0.0, 0.0, 0.0])


def quat_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array([
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    ])


def quat_conj(q: np.ndarray) -> np.ndarray:
    return np.array([q[0], -q[1], -q[2], -q[3]])


def quat_normalize(q: np.ndarray) -> np.ndarray:
    return q / math.sqrt(float(q @ q))


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def quat_from_axis_angle(axis, angle: float) -> np.ndarray:
    axis = np.asarray(axis, dtype=float)
    n = np.linalg.norm(axis)
    if n == 0.0 or angle == 0.0:
        return quat_identity()
    s = math.sin(0.5 * angle) / n
    return np.array([math.cos(0.5 * angle), axis[0] * s, axis[1] * s, axis[2] * s])


def quat_from_matrix(m: np.ndarray) -> np.ndarray:
    tr = m[0, 0] + m[1, 1] + m[2, 2]
    if tr > 0:
        s = 2.0 * math.sqrt(tr + 1.0)
        q = [0.25 * s, (m[2, 1] - m[1, 2]) / s, (m[0, 2] - m[2, 0]) / s, (m[1, 0] - m[0, 1]) / s]
    elif m[0, 0] > m[1, 1] and m[0, 0] > m[2, 2]:
        s = 2.0 * math.sqrt(1.0 + m[0, 0] - m[1, 1] - m[2, 2])
        q = [(m[2, 1] - m[1, 2]) / s, 0.25 * s, (m[0, 1] + m[1, 0]) / s, (m[0, 2] + m[2, 0]) / s]
    elif m[1, 1] > m[2, 2]:
        s = 2.0 * math.sqrt(1.0 + m[1, 1] - m[0, 0] - m[2, 2])
        q = [(m[0, 2] - m[2, 0]) / s, (m[0, 1] + m[1, 0]) / s, 0.25 * s, (m[1, 2] + m[2, 1]) / s]
    else:
        s = 2.0 * math.sqrt(1.0 + m[2, 2] - m[0, 0] - m[1, 1])
        q = [(m[1, 0] - m[0, 1]) / s, (m[0, 2] + m[2, 0]) / s, (m[1, 2] + m[2, 1]) / s, 0.25 * s]
    q = quat_normalize(np.array(q))
    return q if q[0] >= 0 else -q


def quat_to_rotvec(q: np.ndarray) -> np.ndarray:
    """Axis-angle vector (axis * angle) of ``q``, taking the short way round."""
    if q[0] < 0:
        q = -q
    v = q[1:]
    s = math.sqrt(float(v @ v))
    if s < 1e-12:
        return 2.0 * v
    angle = 2.0 * math.atan2(s, q[0])
    return v * (angle / s)


def quat_slerp(a: np.ndarray, b: np.ndarray, u: float) -> np.ndarray:
    d = float(a @ b)
    if d < 0.0:
        b, d = -b, -d
    if d > 0.9995:
        return quat_normalize(a + u * (b - a))
    theta = math.acos(d)
    s = math.sin(theta)
    return (math.sin((1.0 - u) * theta) * a + math.sin(u * theta) * b) / s


def quat_between(u, v) -> np.ndarray:
    """Shortest rotation taking direction ``u`` onto direction ``v``."""
    u = np.asarray(u, float) / np.linalg.norm(u)
    v = np.asarray(v, float) / np.linalg.norm(v)
    c = float(u @ v)
    if c < -0.999999:
        axis = cross(u, [1.0, 0.0, 0.0])
        if np.linalg.norm(axis) < 1e-6:
            axis = cross(u, [0.0, 1.0, 0.0])
        return quat_from_axis_angle(axis, math.pi)
    w = cross(u, v)
    return quat_normalize(np.array([1.0 + c, w[0], w[1], w[2]]))


def integrate_quat(q: np.ndarray, omega: np.ndarray, dt: float) -> np.ndarray:
    """Advance orientation by the world-frame angular velocity over ``dt``."""
    angle = float(np.linalg.norm(omega)) * dt
    if angle == 0.0:
        return q
    dq = quat_from_axis_angle(omega, angle)
    return quat_normalize(quat_mul(dq, q))


def cross(a, b) -> np.ndarray:
    """3-vector cross product (``np.cross`` is slow on tiny inputs)."""
    return np.array([
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ])


def skew(r) -> np.ndarray:
    return np.array([[0.0, -r[2], r[1]], [r[2], 0.0, -r[0]], [-r[1], r[0], 0.0]])


@dataclass(frozen=True)
class Box:
    half_extents: tuple

    def volume(self) -> float:
        hx, hy, hz = self.half_extents
        return 8.0 * hx * hy * hz

    def inertia(self, mass: float) -> np.ndarray:
        hx, hy, hz = self.half_extents
        return mass / 3.0 * np.array([hy * hy + hz * hz, hx * hx + hz * hz, hx * hx + hy * hy])


@dataclass(frozen=True)
class Sphere:
    radius: float

    def volume(self) -> float:
        return 4.0 / 3.0 * math.pi * self.radius ** 3

    def inertia(self, mass: float) -> np.ndarray:
        return np.full(3, 0.4 * mass * self.radius ** 2)


@dataclass(frozen=True)
class HalfSpace:
    """Solid region ``{x : normal . x <= offset}`` in world coordinates."""

    normal: tuple = (0.0, 1.0, 0.0)
    offset: float = 0.0

    def unit_normal(self) -> np.ndarray:
        n = np.asarray(self.normal, dtype=float)
        return n / np.linalg.norm(n)


Shape = Union[Box, Sphere, HalfSpace]


@dataclass(frozen=True)
class Material:
    """Surface and bulk properties. ``density`` is in g/cm^3."""

    mu_static: float = 0.6
    mu_dynamic: float = 0.5
    density: float = 1.0
    restitution: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.mu_dynamic <= self.mu_static:
            raise ValueError("friction coefficients must satisfy 0 <= mu_dynamic <= mu_static")
        if self.density <= 0:
            raise ValueError("density must be positive")
        if not 0.0 <= self.restitution <= 1.0:
            raise ValueError("restitution must lie in [0, 1]")

    @property
    def density_kg_m3(self) -> float:
        return self.density * 1000.0


@dataclass
class RigidBody:
    id: str
    shape: Shape
    material: Material = field(default_factory=Material)
    position: np.ndarray = field(default_factory=lambda: np.zeros(3))
    orientation: np.ndarray = field(default_factory=quat_identity)
    linear_velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))
    angular_velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))
    mass: float | None = None
    inertia: np.ndarray | None = None
    kinematic: bool = False
    # bodies sharing a non-zero group never collide with each other
    group: int = 0

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float).copy()
        self.orientation = np.asarray(self.orientation, dtype=float).copy()
        self.linear_velocity = np.asarray(self.linear_velocity, dtype=float).copy()
        self.angular_velocity = np.asarray(self.angular_velocity, dtype=float).copy()
        if isinstance(self.shape, HalfSpace):
            self.kinematic = True
        if self.kinematic:
            self.mass = math.inf
            self.inertia = np.full(3, math.inf)
        else:
            if self.mass is None:
                self.mass = self.material.density_kg_m3 * self.shape.volume()
            if self.inertia is None:
                self.inertia = self.shape.inertia(self.mass)
            self.inertia = np.asarray(self.inertia, dtype=float).copy()
            if not self.mass > 0:
                raise ValueError(f"body {self.id}: mass must be positive")
            if np.any(self.inertia <= 0):
                raise ValueError(f"body {self.id}: inertia must be positive")
        n = float(np.linalg.norm(self.orientation))
        if abs(n - 1.0) > 1e-9:
            if n == 0.0:
                raise ValueError(f"body {self.id}: zero quaternion")
            self.orientation = self.orientation / n

    @property
    def rotation(self) -> np.ndarray:
        # cached per orientation array; the integrator always rebinds orientation
        q = self.orientation
        cached = self.__dict__.get("_rot")
        if cached is None or cached[0] is not q:
            cached = (q, quat_to_matrix(q))
            self.__dict__["_rot"] = cached
        return cached[1]

    def world_inertia(self) -> np.ndarray:
        r = self.rotation
        return (r * self.inertia) @ r.T

    def point_velocity(self, p: np.ndarray) -> np.ndarray:
        return self.linear_velocity + cross(self.angular_velocity, p - self.position)

    def to_world(self, local_point) -> np.ndarray:
        return self.position + self.rotation @ np.asarray(local_point, dtype=float)

    def to_local(self, world_point) -> np.ndarray:
        return self.rotation.T @ (np.asarray(world_point, dtype=float) - self.position)

    def copy(self) -> "RigidBody":
        return RigidBody(
            id=self.id,
            shape=self.shape,
            material=self.material,
            position=self.position,
            orientation=self.orientation,
            linear_velocity=self.linear_velocity,
            angular_velocity=self.angular_velocity,
            mass=None if self.kinematic else self.mass,
            inertia=None if self.kinematic else self.inertia,
            kinematic=self.kinematic,
            group=self.group,
        )
