"""Physical parameters of the two-body suspended-belt plant and their JSON form."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

import numpy as np


class PlantError(ValueError):
    """Raised for physically invalid or geometrically infeasible parameters."""


@dataclass(frozen=True)
class PlantParams:
    """Two-body plant: motorised suspension unit (body 1) and the belt (body 2).

    Lengths in metres, masses in kg, inertias in kg m^2, angles in radians.
    ``belt_inertia`` holds the principal moments about the belt centre of mass,
    aligned with the belt axes (x2 towards the buckle, z2 the symmetry axis).
    """

    cable_lengths: tuple[float, float, float] = (1.5, 1.5, 1.5)
    arm_radius: float = 0.32
    belt_radius: float = 0.15
    belt_mass: float = 0.147
    com_offset: float = 0.015
    belt_inertia: tuple[float, float, float] = (0.0015, 0.0018, 0.0033)
    buckle_angle: float = 0.0
    mcsu_inertia_zz: float = 0.01
    gravity: float = 9.81
    # Body 1 is fully prescribed, so these never reach the belt dynamics.
    mcsu_mass: float = 1.0
    # Viscous damping on the belt: CoM translation [N s/m] and rotation
    # relative to body 1 [N m s/rad].
    damping_translational: float = 0.0
    damping_rotational: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "cable_lengths", tuple(float(v) for v in self.cable_lengths))
        object.__setattr__(self, "belt_inertia", tuple(float(v) for v in self.belt_inertia))
        self.validate()

    def validate(self) -> None:
        if len(self.cable_lengths) != 3 or len(self.belt_inertia) != 3:
            raise PlantError("cable_lengths and belt_inertia need exactly three entries")
        positive = {
            "arm_radius": self.arm_radius,
            "belt_radius": self.belt_radius,
            "belt_mass": self.belt_mass,
            "mcsu_inertia_zz": self.mcsu_inertia_zz,
            "mcsu_mass": self.mcsu_mass,
            "gravity": self.gravity,
        }
        for i, v in enumerate(self.cable_lengths):
            positive[f"cable_lengths[{i}]"] = v
        for i, v in enumerate(self.belt_inertia):
            positive[f"belt_inertia[{i}]"] = v
        for name, value in positive.items():
            if not (math.isfinite(value) and value > 0.0):
                raise PlantError(f"{name} must be positive and finite, got {value!r}")
        if not (0.0 <= self.com_offset < self.belt_radius):
            raise PlantError(
                f"com_offset must satisfy 0 <= c2 < r2 ({self.com_offset} vs {self.belt_radius})"
            )
        if self.damping_translational < 0.0 or self.damping_rotational < 0.0:
            raise PlantError("damping coefficients must be nonnegative")
        if not math.isfinite(self.buckle_angle):
            raise PlantError("buckle_angle must be finite")
        gap = self.horizontal_gap()
        short = [l for l in self.cable_lengths if l <= gap]
        if short:
            raise PlantError(
                f"cables too short for a level hang: need length > {gap:.6g} m "
                f"(horizontal arm-to-belt offset), got {short}"
            )

    def horizontal_gap(self) -> float:
        """Horizontal distance between matching anchors in the level hang."""
        return abs(self.arm_radius - self.belt_radius)

    def _anchor_angles(self) -> np.ndarray:
        # x1 and x2 both point at the buckle direction; anchor A sits
        # buckle_angle behind it on both bodies, so cables hang untwisted.
        return 2.0 * np.pi * np.arange(3) / 3.0 - self.buckle_angle

    def arm_points(self) -> np.ndarray:
        """Cable anchors on body 1 in its local frame, rows A, B, C."""
        a = self._anchor_angles()
        return self.arm_radius * np.column_stack([np.cos(a), np.sin(a), np.zeros(3)])

    def belt_points(self) -> np.ndarray:
        """Cable anchors on the belt in its local frame, rows A, B, C."""
        a = self._anchor_angles()
        return self.belt_radius * np.column_stack([np.cos(a), np.sin(a), np.zeros(3)])

    def buckle_point(self) -> np.ndarray:
        return np.array([self.belt_radius, 0.0, 0.0])

    def to_dict(self) -> dict:
        d = asdict(self)
        d["cable_lengths"] = list(self.cable_lengths)
        d["belt_inertia"] = list(self.belt_inertia)
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "PlantParams":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise PlantError(f"unknown plant parameter(s): {sorted(unknown)}")
        return cls(**data)

    def with_(self, **changes) -> "PlantParams":
        return replace(self, **changes)


def load_params(path: str | Path) -> PlantParams:
    with open(path) as fh:
        return PlantParams.from_dict(json.load(fh))


def save_params(params: PlantParams, path: str | Path) -> None:
    Path(path).write_text(json.dumps(params.to_dict(), indent=2) + "\n")


NOMINAL_PLANT = PlantParams()
