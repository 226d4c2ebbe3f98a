from .bodies import Box, HalfSpace, Material, RigidBody, Sphere
from .collision import Contact, FrictionState, detect_contacts
from .contact import ContactGains, friction_update, resolve_contact_forces
from .world import AngularSpring, PointSpring, World, simulate, step

__all__ = [
    "AngularSpring",
    "Box",
    "Contact",
    "ContactGains",
    "FrictionState",
    "HalfSpace",
    "Material",
    "PointSpring",
    "RigidBody",
    "Sphere",
    "World",
    "detect_contacts",
    "friction_update",
    "resolve_contact_forces",
    "simulate",
    "step",
]
