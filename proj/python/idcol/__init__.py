"""Differentiable narrow-phase collision detection on strictly convex
implicit surfaces: minimal scaling factor, witness points, gap, normal,
penalty wrenches, and analytical derivatives of all of them."""

from _idcol import (  # noqa: F401
    ContactKinematics,
    ContactPair,
    IdcolError,
    Pose,
    ShapeSpec,
    Solution,
    Unknowns,
    contact_kinematics,
    contact_wrench,
    gradient_audit,
    kinematics_sensitivity,
    solution_sensitivity,
    solve,
)

__all__ = [
    "ContactKinematics",
    "ContactPair",
    "IdcolError",
    "Pose",
    "ShapeSpec",
    "Solution",
    "Unknowns",
    "contact_kinematics",
    "contact_wrench",
    "gradient_audit",
    "kinematics_sensitivity",
    "solution_sensitivity",
    "solve",
]
