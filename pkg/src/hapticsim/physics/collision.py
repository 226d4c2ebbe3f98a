"""Narrow-phase contact generation.

Supported pairs: sphere/sphere, sphere/box, sphere/half-space, box/box
(separating axis test with a clipped manifold of up to four points) and
box/half-space. Every contact normal points from ``body_b`` toward
``body_a`` and the contact point sits midway between the two surfaces.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from ..errors import UnsupportedShapePair
from .bodies import Box, HalfSpace, RigidBody, Sphere, cross


class FrictionState(enum.Enum):
    NONE = "None"
    STATIC = "Static"
    DYNAMIC = "Dynamic"


@dataclass
class Contact:
    body_a: str
    body_b: str
    point: np.ndarray
    normal: np.ndarray
    depth: float
    relative_velocity: np.ndarray
    normal_force: float = 0.0
    tangential_force: np.ndarray = field(default_factory=lambda: np.zeros(3))
    friction_state: FrictionState = FrictionState.NONE
    # unclamped tangential force proposed by the stick spring this step
    trial_force: np.ndarray = field(default_factory=lambda: np.zeros(3))
    stick_delta: np.ndarray = field(default_factory=lambda: np.zeros(3))

    @property
    def separating_speed(self) -> float:
        return float(self.relative_velocity @ self.normal)

    @property
    def tangential_velocity(self) -> np.ndarray:
        v = self.relative_velocity
        return v - (v @ self.normal) * self.normal

    @property
    def total_force(self) -> np.ndarray:
        """Force exerted on ``body_a`` by ``body_b``."""
        return self.normal_force * self.normal + self.tangential_force


def _make(a: RigidBody, b: RigidBody, point, normal, depth) -> Contact:
    rel = a.point_velocity(point) - b.point_velocity(point)
    return Contact(a.id, b.id, np.asarray(point, float), np.asarray(normal, float), float(depth), rel)


def sphere_halfspace(a: RigidBody, b: RigidBody) -> list[Contact]:
    n = b.shape.unit_normal()
    r = a.shape.radius
    depth = r - (float(n @ a.position) - b.shape.offset)
    if depth <= 0.0:
        return []
    point = a.position - n * (r - 0.5 * depth)
    return [_make(a, b, point, n, depth)]


def box_halfspace(a: RigidBody, b: RigidBody) -> list[Contact]:
    n = b.shape.unit_normal()
    h = np.asarray(a.shape.half_extents, float)
    rot = a.rotation
    out = []
    for sx in (-1.0, 1.0):
        for sy in (-1.0, 1.0):
            for sz in (-1.0, 1.0):
                v = a.position + rot @ (h * (sx, sy, sz))
                depth = b.shape.offset - float(n @ v)
                if depth > 0.0:
                    out.append(_make(a, b, v + 0.5 * depth * n, n, depth))
    return out


def sphere_sphere(a: RigidBody, b: RigidBody) -> list[Contact]:
    d = a.position - b.position
    dist = float(np.linalg.norm(d))
    depth = a.shape.radius + b.shape.radius - dist
    if depth <= 0.0:
        return []
    n = d / dist if dist > 1e-12 else np.array([0.0, 1.0, 0.0])
    point = b.position + n * (b.shape.radius - 0.5 * depth)
    return [_make(a, b, point, n, depth)]


def sphere_box(a: RigidBody, b: RigidBody) -> list[Contact]:
    rot = b.rotation
    h = np.asarray(b.shape.half_extents, float)
    r = a.shape.radius
    local = rot.T @ (a.position - b.position)
    closest = np.clip(local, -h, h)
    diff = local - closest
    dist = float(np.linalg.norm(diff))
    if dist > 1e-12:
        depth = r - dist
        if depth <= 0.0:
            return []
        n_local = diff / dist
        surface = closest
    else:
        # centre inside the box: push out through the nearest face
        gaps = h - np.abs(local)
        axis = int(np.argmin(gaps))
        sign = 1.0 if local[axis] >= 0.0 else -1.0
        n_local = np.zeros(3)
        n_local[axis] = sign
        depth = r + gaps[axis]
        surface = local.copy()
        surface[axis] = sign * h[axis]
    n = rot @ n_local
    # midway between box surface and the deepest sphere point
    point = b.position + rot @ surface - 0.5 * depth * n
    return [_make(a, b, point, n, depth)]


def _clip_polygon(poly: list[np.ndarray], normal: np.ndarray, offset: float) -> list[np.ndarray]:
    """Keep the part of ``poly`` satisfying ``normal . p <= offset``."""
    out = []
    n = len(poly)
    for i in range(n):
        p, q = poly[i], poly[(i + 1) % n]
        dp = float(normal @ p) - offset
        dq = float(normal @ q) - offset
        if dp <= 0.0:
            out.append(p)
        if (dp < 0.0 < dq) or (dq < 0.0 < dp):
            out.append(p + (q - p) * (dp / (dp - dq)))
    return out


def _reduce_manifold(points: list[np.ndarray], depths: list[float], keep: int = 4):
    if len(points) <= keep:
        return points, depths
    chosen = [int(np.argmax(depths))]
    while len(chosen) < keep:
        best, best_d = None, -1.0
        for i, p in enumerate(points):
            if i in chosen:
                continue
            d = min(float(np.linalg.norm(p - points[j])) for j in chosen)
            if d > best_d:
                best, best_d = i, d
        chosen.append(best)
    chosen.sort()
    return [points[i] for i in chosen], [depths[i] for i in chosen]


def _face_vertices(center, rot, h, axis, sign) -> list[np.ndarray]:
    u, v = [k for k in range(3) if k != axis]
    out = []
    for su, sv in ((1, 1), (-1, 1), (-1, -1), (1, -1)):
        local = np.zeros(3)
        local[axis] = sign * h[axis]
        local[u] = su * h[u]
        local[v] = sv * h[v]
        out.append(center + rot @ local)
    return out


def _closest_segment_points(p1, d1, p2, d2):
    """Closest points between lines ``p1 + s d1`` and ``p2 + t d2``."""
    r = p1 - p2
    a = float(d1 @ d1)
    e = float(d2 @ d2)
    b = float(d1 @ d2)
    c = float(d1 @ r)
    f = float(d2 @ r)
    denom = a * e - b * b
    s = (b * f - c * e) / denom if denom > 1e-14 else 0.0
    t = (a * f - b * c) / denom if denom > 1e-14 else f / e
    return p1 + s * d1, p2 + t * d2


def box_box(a: RigidBody, b: RigidBody) -> list[Contact]:
    ra, rb = a.rotation, b.rotation
    ha = np.asarray(a.shape.half_extents, float)
    hb = np.asarray(b.shape.half_extents, float)
    d = b.position - a.position

    best_face = None  # (overlap, axis vector A->B, owner, index)
    best_edge = None
    for owner, rot in (("a", ra), ("b", rb)):
        for i in range(3):
            axis = rot[:, i]
            proj_a = float(np.abs(ra.T @ axis) @ ha)
            proj_b = float(np.abs(rb.T @ axis) @ hb)
            dist = float(d @ axis)
            overlap = proj_a + proj_b - abs(dist)
            if overlap <= 0.0:
                return []
            if best_face is None or overlap < best_face[0]:
                best_face = (overlap, axis if dist >= 0 else -axis, owner, i)
    for i in range(3):
        for j in range(3):
            axis = cross(ra[:, i], rb[:, j])
            n = float(np.linalg.norm(axis))
            if n < 1e-6:
                continue
            axis = axis / n
            proj_a = float(np.abs(ra.T @ axis) @ ha)
            proj_b = float(np.abs(rb.T @ axis) @ hb)
            dist = float(d @ axis)
            overlap = proj_a + proj_b - abs(dist)
            if overlap <= 0.0:
                return []
            if best_edge is None or overlap < best_edge[0]:
                best_edge = (overlap, axis if dist >= 0 else -axis, i, j)

    # favour face contacts; edge-edge only when clearly shallower
    if best_edge is not None and best_edge[0] < 0.95 * best_face[0] - 1e-5:
        overlap, axis, i, j = best_edge
        ca = a.position + ra @ (np.sign(ra.T @ axis + 1e-300) * ha * (np.arange(3) != i))
        cb = b.position + rb @ (-np.sign(rb.T @ axis + 1e-300) * hb * (np.arange(3) != j))
        pa, pb = _closest_segment_points(ca, ra[:, i], cb, rb[:, j])
        return [_make(a, b, 0.5 * (pa + pb), -axis, overlap)]

    overlap, axis, owner, i = best_face
    if owner == "a":
        ref, inc, ref_rot, inc_rot, h_ref, h_inc, ref_n = a, b, ra, rb, ha, hb, axis
    else:
        ref, inc, ref_rot, inc_rot, h_ref, h_inc, ref_n = b, a, rb, ra, hb, ha, -axis
    # incident face: the face of the other box most anti-parallel to ref_n
    dots = inc_rot.T @ ref_n
    k = int(np.argmax(np.abs(dots)))
    inc_sign = -1.0 if dots[k] > 0 else 1.0
    poly = _face_vertices(inc.position, inc_rot, h_inc, k, inc_sign)
    for m in range(3):
        if m == i:
            continue
        side = ref_rot[:, m]
        c = float(side @ ref.position)
        poly = _clip_polygon(poly, side, c + h_ref[m])
        if not poly:
            return []
        poly = _clip_polygon(poly, -side, -c + h_ref[m])
        if not poly:
            return []
    face_offset = float(ref_n @ ref.position) + h_ref[i]
    points, depths = [], []
    for p in poly:
        depth = face_offset - float(ref_n @ p)
        if depth > 0.0:
            points.append(p + 0.5 * depth * ref_n)
            depths.append(depth)
    points, depths = _reduce_manifold(points, depths)
    # normal from b toward a
    n = -axis
    return [_make(a, b, p, n, dep) for p, dep in zip(points, depths)]


def _kind(body: RigidBody) -> str:
    s = body.shape
    if isinstance(s, Sphere):
        return "sphere"
    if isinstance(s, Box):
        return "box"
    if isinstance(s, HalfSpace):
        return "halfspace"
    return type(s).__name__


# (kind of a, kind of b) -> routine; the reversed order is handled by swapping
_PAIRS = {
    ("sphere", "sphere"): sphere_sphere,
    ("sphere", "box"): sphere_box,
    ("sphere", "halfspace"): sphere_halfspace,
    ("box", "box"): box_box,
    ("box", "halfspace"): box_halfspace,
}


def collide(a: RigidBody, b: RigidBody) -> list[Contact]:
    ka, kb = _kind(a), _kind(b)
    if (ka, kb) in _PAIRS:
        return _PAIRS[(ka, kb)](a, b)
    if (kb, ka) in _PAIRS:
        return _PAIRS[(kb, ka)](b, a)
    raise UnsupportedShapePair(f"no collision routine for {ka}/{kb} ({a.id}, {b.id})")


def _bounding_radius(body: RigidBody) -> float:
    s = body.shape
    if isinstance(s, Sphere):
        return s.radius
    if isinstance(s, Box):
        return float(np.linalg.norm(s.half_extents))
    return np.inf


def should_test(a: RigidBody, b: RigidBody) -> bool:
    if a.kinematic and b.kinematic:
        return False
    if a.group and a.group == b.group:
        return False
    return True


def detect_contacts(world) -> list[Contact]:
    """All penetrating contacts in ``world`` (geometry and relative velocity only)."""
    bodies = world.bodies
    contacts: list[Contact] = []
    for i in range(len(bodies)):
        a = bodies[i]
        for j in range(i + 1, len(bodies)):
            b = bodies[j]
            if not should_test(a, b):
                continue
            ra, rb = _bounding_radius(a), _bounding_radius(b)
            if np.isfinite(ra) and np.isfinite(rb):
                if float(np.linalg.norm(a.position - b.position)) > ra + rb:
                    continue
            contacts.extend(collide(a, b))
    return contacts
