"""Scene files and per-step state traces.

A scene is a JSON document::

    {
      "dt": 0.01,
      "gravity": [0, -9.81, 0],
      "bodies": [
        {"id": "ground", "shape": {"type": "halfspace", "normal": [0, 1, 0], "offset": 0}},
        {"id": "cube", "shape": {"type": "box", "half_extents": [0.025, 0.025, 0.025]},
         "position": [0, 0.035, 0], "orientation": [1, 0, 0, 0],
         "material": {"mu_static": 4.0, "mu_dynamic": 3.0, "density": 1.0}}
      ]
    }

Optional body fields: ``linear_velocity``, ``angular_velocity``, ``mass``,
``kinematic``, ``group``. Sphere shapes use ``{"type": "sphere", "radius": r}``.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..errors import SceneError
from .bodies import Box, HalfSpace, Material, RigidBody, Sphere
from .contact import ContactGains
from .world import World

TRACE_COLUMNS = (
    "step_index", "time", "record", "id",
    "px", "py", "pz", "qw", "qx", "qy", "qz",
    "vx", "vy", "vz", "wx", "wy", "wz",
    "normal_force", "tangential_force", "total_force", "friction_state",
)


def _shape(spec: dict):
    kind = spec.get("type")
    if kind == "box":
        return Box(tuple(float(h) for h in spec["half_extents"]))
    if kind == "sphere":
        return Sphere(float(spec["radius"]))
    if kind == "halfspace":
        return HalfSpace(tuple(float(v) for v in spec.get("normal", (0.0, 1.0, 0.0))), float(spec.get("offset", 0.0)))
    raise SceneError(f"unknown shape type {kind!r}")


def body_from_dict(spec: dict) -> RigidBody:
    try:
        material = Material(**spec.get("material", {}))
        return RigidBody(
            id=str(spec["id"]),
            shape=_shape(spec["shape"]),
            material=material,
            position=spec.get("position", (0.0, 0.0, 0.0)),
            orientation=spec.get("orientation", (1.0, 0.0, 0.0, 0.0)),
            linear_velocity=spec.get("linear_velocity", (0.0, 0.0, 0.0)),
            angular_velocity=spec.get("angular_velocity", (0.0, 0.0, 0.0)),
            mass=spec.get("mass"),
            kinematic=bool(spec.get("kinematic", False)),
            group=int(spec.get("group", 0)),
        )
    except SceneError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise SceneError(f"body {spec.get('id', '?')}: {exc}") from None


def world_from_dict(spec: dict) -> World:
    if not isinstance(spec, dict) or "bodies" not in spec:
        raise SceneError("scene needs a 'bodies' list")
    bodies = [body_from_dict(b) for b in spec["bodies"]]
    gains = ContactGains(**spec.get("gains", {}))
    try:
        return World(bodies=bodies, gravity=spec.get("gravity", (0.0, -9.81, 0.0)), dt=float(spec.get("dt", 0.01)), gains=gains)
    except ValueError as exc:
        raise SceneError(str(exc)) from None


def load_scene(path) -> World:
    try:
        spec = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise SceneError(f"{path}: {exc}") from None
    return world_from_dict(spec)


def _shape_dict(shape) -> dict:
    if isinstance(shape, Box):
        return {"type": "box", "half_extents": list(shape.half_extents)}
    if isinstance(shape, Sphere):
        return {"type": "sphere", "radius": shape.radius}
    return {"type": "halfspace", "normal": list(shape.normal), "offset": shape.offset}


def world_to_dict(world: World) -> dict:
    bodies = []
    for b in world.bodies:
        d = {
            "id": b.id,
            "shape": _shape_dict(b.shape),
            "position": b.position.tolist(),
            "orientation": b.orientation.tolist(),
            "linear_velocity": b.linear_velocity.tolist(),
            "angular_velocity": b.angular_velocity.tolist(),
            "material": {
                "mu_static": b.material.mu_static,
                "mu_dynamic": b.material.mu_dynamic,
                "density": b.material.density,
                "restitution": b.material.restitution,
            },
            "kinematic": b.kinematic,
            "group": b.group,
        }
        if not b.kinematic:
            d["mass"] = b.mass
        bodies.append(d)
    return {"dt": world.dt, "gravity": world.gravity.tolist(), "bodies": bodies}


def _f(x: float) -> str:
    return f"{x:.10g}"


class TraceRecorder:
    """Accumulates the long-format state trace, one block of rows per step.

    Body rows carry pose and velocity. Contact rows use ``id = a|b``, put the
    contact point in ``px..pz`` and the relative velocity in ``vx..vz``.
    """

    def __init__(self, include_kinematic: bool = False):
        self.include_kinematic = include_kinematic
        self.lines = [",".join(TRACE_COLUMNS)]

    def record(self, world: World) -> None:
        k = world.step_index
        t = _f(world.time)
        for b in world.bodies:
            if b.kinematic and not self.include_kinematic:
                continue
            vals = [*b.position, *b.orientation, *b.linear_velocity, *b.angular_velocity]
            self.lines.append(f"{k},{t},body,{b.id}," + ",".join(_f(v) for v in vals) + ",,,,")
        for c in world.contacts:
            ft = float(np.linalg.norm(c.tangential_force))
            vals = [*c.point]
            rel = [*c.relative_velocity]
            self.lines.append(
                f"{k},{t},contact,{c.body_a}|{c.body_b},"
                + ",".join(_f(v) for v in vals)
                + ",,,,,"
                + ",".join(_f(v) for v in rel)
                + ",,,,"
                + f"{_f(c.normal_force)},{_f(ft)},{_f(float(np.linalg.norm(c.total_force)))},{c.friction_state.value}"
            )

    def text(self) -> str:
        return "\n".join(self.lines) + "\n"
