"""Basis-vector coordinate conversion between tracked body and rig.

The idea: pick a reference bone on the body (say right shoulder to left
shoulder) as the basis B.  On the horizontal (x, z) plane, rotate the
world so B lands on the +x axis and divide by B's planar length; heights
(y) are divided by the same length.  A joint vector J expressed this way
is dimensionless and independent of where the camera pointed or how large
the subject is.  Reproducing it on the rig applies the inverse transform
with the rig's own basis B'.

Convention, fixed here and tested by the round-trip identity: planar
rotations act on column vectors; normalization rotates by -theta_B,
reproduction rotates by +theta_B'.  theta is the full-quadrant atan2 of
(Bz over Bx), so a subject seen edge-on (Bx == 0) is handled; only a
basis with (numerically) zero planar length is rejected.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import yaml

from .errors import (
    DegenerateBasis,
    EmptyResult,
    LowConfidence,
    ParseError,
    UnknownLandmark,
)
from .geometry import Vec3
from .rig import AvatarRig
from .schemes import DEFAULT_CONFIDENCE_THRESHOLD, KeypointFrame, LandmarkScheme, bone_vector

EPSILON_BASIS = 1e-6  # meters of planar basis length below which a limb is skipped


@dataclass(frozen=True, slots=True)
class BasisFrame:
    """Heading angle and planar scale extracted from a basis vector."""

    theta: float
    scale: float
    source_basis: Vec3


@dataclass(frozen=True, slots=True)
class NormalizedJoint:
    """A joint vector in the basis-aligned, basis-scaled frame."""

    value: Vec3


def rotate_planar(theta: float, x: float, z: float) -> tuple[float, float]:
    """Rotate a column vector in the (x, z) plane by theta."""
    c, s = math.cos(theta), math.sin(theta)
    return (c * x - s * z, s * x + c * z)


def basis_frame(b: Vec3, epsilon: float = EPSILON_BASIS) -> BasisFrame:
    """Extract (theta, scale) from a basis vector.

    theta is the angle of B's planar part (Bx, Bz) against the +x axis;
    scale is its planar length.  Rotating the planar part by -theta yields
    (scale, 0).
    """
    b.require_finite()
    scale = math.hypot(b.x, b.z)
    if scale < epsilon:
        raise DegenerateBasis(
            f"basis {b} has planar norm {scale:.3g} below {epsilon:.3g}"
        )
    theta = math.atan2(b.z, b.x)
    return BasisFrame(theta=theta, scale=scale, source_basis=b)


def normalize_joint(j: Vec3, bf: BasisFrame) -> NormalizedJoint:
    """Express a joint vector in the basis frame.

    Planar part rotated by -theta and divided by the scale; the y part is
    divided by the same scale (heights come out in basis lengths).
    """
    j.require_finite()
    px, pz = rotate_planar(-bf.theta, j.x, j.z)
    inv = 1.0 / bf.scale
    return NormalizedJoint(Vec3(px * inv, j.y * inv, pz * inv))


def denormalize_joint(jn: NormalizedJoint, bf_engine: BasisFrame) -> Vec3:
    """Reproduce a normalized joint vector against the engine-side basis.

    Exact inverse of :func:`normalize_joint` with the same basis.
    """
    v = jn.value
    px, pz = rotate_planar(bf_engine.theta, v.x, v.z)
    s = bf_engine.scale
    return Vec3(px * s, v.y * s, pz * s)


@dataclass(frozen=True, slots=True)
class RetargetEntry:
    """One limb: where its basis and joint vectors come from, and which rig
    chain receives the result."""

    name: str
    basis_source: tuple[int, int]  # landmark ids
    basis_rig: tuple[str, str]  # rig joint names
    joint_source: tuple[int, int]  # landmark ids
    end_effector: str  # rig joint name
    anchor: str  # rig joint name the reproduced vector hangs from


@dataclass(frozen=True)
class RetargetMap:
    scheme_name: str
    rig_name: str
    entries: tuple[RetargetEntry, ...]

    def __post_init__(self) -> None:
        names = [e.name for e in self.entries]
        if len(set(names)) != len(names):
            raise ParseError("duplicate limb name in retarget map")


@dataclass(frozen=True, slots=True)
class LimbTarget:
    """World-space target for one end effector."""

    limb: str
    end_effector: str
    anchor: str
    target: Vec3


@dataclass(frozen=True, slots=True)
class SkippedLimb:
    limb: str
    reason: str


@dataclass(frozen=True, slots=True)
class RetargetResult:
    targets: tuple[LimbTarget, ...]
    skipped: tuple[SkippedLimb, ...]


def load_retarget_map(path: str | Path, scheme: LandmarkScheme, rig: AvatarRig) -> RetargetMap:
    """Load a retarget map and validate every reference against the scheme
    and the rig (including that each anchor is an ancestor of its end
    effector)."""
    try:
        doc = yaml.safe_load(Path(path).read_text())
    except (OSError, yaml.YAMLError) as exc:
        raise ParseError(f"cannot read retarget map {path}: {exc}") from exc
    if not isinstance(doc, dict) or "limbs" not in doc:
        raise ParseError(f"retarget map {path} must define 'limbs'")
    entries: list[RetargetEntry] = []
    for raw in doc["limbs"]:
        where = f"retarget map {path}, limb {raw.get('name', '?')!r}"
        try:
            name = str(raw["name"])
            basis = raw["basis"]
            joint = raw["joint"]
            basis_source = tuple(scheme.id_of(str(n)) for n in basis["source"])
            basis_rig = tuple(str(n) for n in basis["rig"])
            joint_source = tuple(scheme.id_of(str(n)) for n in joint["source"])
            end_effector = str(joint["end_effector"])
            anchor = str(raw.get("anchor") or rig.joint(end_effector).parent)
        except UnknownLandmark:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"{where}: {exc}") from exc
        if len(basis_source) != 2 or len(joint_source) != 2 or len(basis_rig) != 2:
            raise ParseError(f"{where}: basis/joint specs must be pairs")
        for jn in (*basis_rig, end_effector, anchor):
            rig.joint(jn)  # raises MissingJoint on bad references
        rig.path_between(anchor, end_effector)  # raises RigError if not an ancestor
        entries.append(
            RetargetEntry(name, basis_source, basis_rig, joint_source, end_effector, anchor)
        )
    return RetargetMap(
        scheme_name=str(doc.get("scheme", scheme.name)),
        rig_name=str(doc.get("rig", rig.name)),
        entries=tuple(entries),
    )


def retarget_frame(
    frame: KeypointFrame,
    retarget_map: RetargetMap,
    rig_pose: dict[str, Vec3],
    min_confidence: float = DEFAULT_CONFIDENCE_THRESHOLD,
    epsilon: float = EPSILON_BASIS,
) -> RetargetResult:
    """Compute world-space end-effector targets for every limb of the map.

    For each limb: B comes from the tracked frame, B' from the rig's
    current world pose, J from the tracked frame; the target is the rig
    anchor position plus the reproduced joint vector.  Limbs whose
    landmarks are below the confidence threshold or whose basis is
    degenerate are skipped and reported; if nothing survives, EmptyResult
    is raised.
    """
    targets: list[LimbTarget] = []
    skipped: list[SkippedLimb] = []
    for entry in retarget_map.entries:
        try:
            b = bone_vector(frame, *entry.basis_source, min_confidence=min_confidence)
            j = bone_vector(frame, *entry.joint_source, min_confidence=min_confidence)
            bf_body = basis_frame(b, epsilon)
            b_rig = rig_pose[entry.basis_rig[1]] - rig_pose[entry.basis_rig[0]]
            bf_rig = basis_frame(b_rig, epsilon)
        except (LowConfidence, DegenerateBasis) as exc:
            skipped.append(SkippedLimb(entry.name, f"{type(exc).__name__}: {exc}"))
            continue
        reproduced = denormalize_joint(normalize_joint(j, bf_body), bf_rig)
        target = rig_pose[entry.anchor] + reproduced
        targets.append(LimbTarget(entry.name, entry.end_effector, entry.anchor, target))
    if not targets:
        raise EmptyResult(
            "no limb could be retargeted: "
            + "; ".join(f"{s.limb} ({s.reason})" for s in skipped)
        )
    return RetargetResult(targets=tuple(targets), skipped=tuple(skipped))
