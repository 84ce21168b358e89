"""Landmark schemes and keypoint frames.

A scheme is the contract between a pose producer and the engine: an
ordered list of landmark ids and canonical names.  Schemes are data,
loaded from YAML files; two ship with the package (a 33-landmark
full-body scheme and a 17-landmark subset).
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from pathlib import Path

import yaml

from .errors import (
    BadConfidence,
    LowConfidence,
    NonFinite,
    ParseError,
    SchemeMismatch,
    UnknownLandmark,
)
from .geometry import Vec3, remap_axes

DEFAULT_CONFIDENCE_THRESHOLD = 0.5


class SpaceTag(enum.Enum):
    """Which coordinate space a frame's points live in."""

    CAMERA2D = "camera2d"
    CAMERA3D = "camera3d"
    WORLD3D = "world3d"


@dataclass(frozen=True, slots=True)
class LandmarkScheme:
    name: str
    landmark_names: tuple[str, ...]

    def __post_init__(self) -> None:
        if len(self.landmark_names) < 1:
            raise ParseError(f"scheme {self.name!r} has no landmarks")
        if len(set(self.landmark_names)) != len(self.landmark_names):
            raise ParseError(f"scheme {self.name!r} has duplicate landmark names")

    @property
    def count(self) -> int:
        return len(self.landmark_names)

    def id_of(self, name: str) -> int:
        try:
            return self.landmark_names.index(name)
        except ValueError:
            raise UnknownLandmark(f"landmark {name!r} not in scheme {self.name!r}") from None

    def name_of(self, landmark_id: int) -> str:
        if not 0 <= landmark_id < self.count:
            raise UnknownLandmark(f"landmark id {landmark_id} not in scheme {self.name!r}")
        return self.landmark_names[landmark_id]


@dataclass(frozen=True, slots=True)
class LandmarkPoint:
    position: Vec3
    confidence: float


@dataclass(frozen=True, slots=True)
class KeypointFrame:
    """One timestamped set of landmark positions with confidences."""

    timestamp_us: int
    sequence: int
    scheme: LandmarkScheme
    points: tuple[LandmarkPoint, ...]
    space: SpaceTag

    def position(self, landmark_id: int) -> Vec3:
        return self.points[landmark_id].position

    def confidence(self, landmark_id: int) -> float:
        return self.points[landmark_id].confidence

    def remapped(self) -> "KeypointFrame":
        """Copy with every point run through the z-up -> y-up axis swap."""
        pts = tuple(LandmarkPoint(remap_axes(p.position), p.confidence) for p in self.points)
        return replace(self, points=pts)


def load_scheme(path: str | Path) -> LandmarkScheme:
    """Load a scheme file: a name plus an ordered id -> name list.

    Ids must be dense in [0, count); gaps or duplicates are rejected.
    """
    try:
        doc = yaml.safe_load(Path(path).read_text())
    except (OSError, yaml.YAMLError) as exc:
        raise ParseError(f"cannot read scheme file {path}: {exc}") from exc
    if not isinstance(doc, dict) or "name" not in doc or "landmarks" not in doc:
        raise ParseError(f"scheme file {path} must define 'name' and 'landmarks'")
    entries = doc["landmarks"]
    if not isinstance(entries, list) or not entries:
        raise ParseError(f"scheme file {path}: 'landmarks' must be a non-empty list")
    by_id: dict[int, str] = {}
    for entry in entries:
        try:
            lid = int(entry["id"])
            name = str(entry["name"])
        except (TypeError, KeyError, ValueError) as exc:
            raise ParseError(f"scheme file {path}: bad landmark entry {entry!r}") from exc
        if lid in by_id:
            raise ParseError(f"scheme file {path}: duplicate landmark id {lid}")
        by_id[lid] = name
    if sorted(by_id) != list(range(len(by_id))):
        raise ParseError(f"scheme file {path}: landmark ids must be dense in [0, count)")
    names = tuple(by_id[i] for i in range(len(by_id)))
    return LandmarkScheme(name=str(doc["name"]), landmark_names=names)


def validate_frame(frame: KeypointFrame, scheme: LandmarkScheme) -> KeypointFrame:
    """Check a frame against a scheme; return it unchanged on success."""
    if frame.scheme.name != scheme.name or len(frame.points) != scheme.count:
        raise SchemeMismatch(
            f"frame has {len(frame.points)} points of scheme {frame.scheme.name!r}, "
            f"expected {scheme.count} of {scheme.name!r}"
        )
    for lid, point in enumerate(frame.points):
        if not point.position.is_finite():
            raise NonFinite(f"landmark {lid} has non-finite position {point.position}")
        if not 0.0 <= point.confidence <= 1.0:
            raise BadConfidence(f"landmark {lid} confidence {point.confidence} outside [0, 1]")
    return frame


def bone_vector(
    frame: KeypointFrame,
    from_id: int,
    to_id: int,
    min_confidence: float = DEFAULT_CONFIDENCE_THRESHOLD,
) -> Vec3:
    """Vector from one landmark to another: position[to] - position[from].

    Both endpoints must meet the confidence threshold.
    """
    count = len(frame.points)
    for lid in (from_id, to_id):
        if not 0 <= lid < count:
            raise UnknownLandmark(f"landmark id {lid} out of range for {count}-point frame")
    cf, ct = frame.confidence(from_id), frame.confidence(to_id)
    if cf < min_confidence or ct < min_confidence:
        raise LowConfidence(
            f"bone {from_id}->{to_id}: confidences ({cf:.3g}, {ct:.3g}) "
            f"below threshold {min_confidence}"
        )
    return frame.position(to_id) - frame.position(from_id)
