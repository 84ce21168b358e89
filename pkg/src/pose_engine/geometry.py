"""Scalar 3D vector type and the camera->engine axis remap.

The engine works in a y-up, right-handed frame: x to the subject's left,
y up, z toward the viewer.  Producers that emit z-up data are converted
exactly once at the ingestion boundary with :func:`remap_axes`; no math
kernel ever remaps internally.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import NonFinite

__all__ = ["Vec3", "remap_axes"]


@dataclass(frozen=True, slots=True)
class Vec3:
    """Immutable 3-vector. Meters in world frames, dimensionless after
    basis normalization."""

    x: float
    y: float
    z: float

    def __add__(self, other: "Vec3") -> "Vec3":
        return Vec3(self.x + other.x, self.y + other.y, self.z + other.z)

    def __sub__(self, other: "Vec3") -> "Vec3":
        return Vec3(self.x - other.x, self.y - other.y, self.z - other.z)

    def __mul__(self, k: float) -> "Vec3":
        return Vec3(self.x * k, self.y * k, self.z * k)

    __rmul__ = __mul__

    def __neg__(self) -> "Vec3":
        return Vec3(-self.x, -self.y, -self.z)

    def dot(self, other: "Vec3") -> float:
        return self.x * other.x + self.y * other.y + self.z * other.z

    def cross(self, other: "Vec3") -> "Vec3":
        return Vec3(
            self.y * other.z - self.z * other.y,
            self.z * other.x - self.x * other.z,
            self.x * other.y - self.y * other.x,
        )

    def norm(self) -> float:
        return math.sqrt(self.dot(self))

    def normalized(self, eps: float = 1e-12) -> "Vec3":
        n = self.norm()
        if n < eps:
            raise ZeroDivisionError("cannot normalize near-zero vector")
        return Vec3(self.x / n, self.y / n, self.z / n)

    def is_finite(self) -> bool:
        return math.isfinite(self.x) and math.isfinite(self.y) and math.isfinite(self.z)

    def require_finite(self) -> "Vec3":
        if not self.is_finite():
            raise NonFinite(f"non-finite vector {self}")
        return self

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.x, self.y, self.z)

    @staticmethod
    def from_iter(values) -> "Vec3":
        x, y, z = values
        return Vec3(float(x), float(y), float(z))


ZERO = Vec3(0.0, 0.0, 0.0)


def remap_axes(p: Vec3) -> Vec3:
    """Swap the second and third components: (x, y, z) -> (x, z, y).

    Converts between the z-up convention of game-engine style producers
    and the engine's y-up frame.  The swap is its own inverse and
    preserves the Euclidean norm.
    """
    p.require_finite()
    return Vec3(p.x, p.z, p.y)
