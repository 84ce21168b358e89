"""Avatar rigs: joint hierarchy, bone lengths, rest pose, joint limits.

Rotation convention, fixed once for the whole engine: the rotation stored
at a joint orients the bones leading from that joint to its children, and
is expressed relative to the parent-composed frame (so zero rotation
everywhere reproduces the rest pose).  A joint's constraint therefore
limits the bones it drives: an "elbow" hinge bends the forearm.

Rotations are parameterized as rotation vectors (axis * angle, radians)
throughout; magnitude is kept in [0, pi].
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .errors import MissingJoint, ParseError, RigError
from .geometry import Vec3, remap_axes
from .rotations import canonical, quat_from_rotvec, quat_to_rotvec

_UNIT_TOL = 1e-9


@dataclass(frozen=True, slots=True)
class BallConstraint:
    """Allowed bone directions form a cone around cone_axis (parent frame)."""

    cone_axis: Vec3
    half_angle: float

    def __post_init__(self) -> None:
        if abs(self.cone_axis.norm() - 1.0) > 1e-6:
            raise RigError(f"ball cone axis {self.cone_axis} is not unit length")
        if not 0.0 < self.half_angle < math.pi:
            raise RigError(f"ball half angle {self.half_angle} outside (0, pi)")


@dataclass(frozen=True, slots=True)
class HingeConstraint:
    """Rotation restricted to hinge_axis with angle in [min_angle, max_angle]."""

    hinge_axis: Vec3
    min_angle: float
    max_angle: float

    def __post_init__(self) -> None:
        if abs(self.hinge_axis.norm() - 1.0) > 1e-6:
            raise RigError(f"hinge axis {self.hinge_axis} is not unit length")
        if not self.min_angle < self.max_angle:
            raise RigError("hinge range empty")
        if self.min_angle <= -math.pi or self.max_angle > math.pi:
            raise RigError("hinge range must lie within (-pi, pi]")


JointConstraint = BallConstraint | HingeConstraint


@dataclass(frozen=True, slots=True)
class Joint:
    name: str
    parent: str | None
    bone_length: float  # meters; 0.0 for the root
    rest_direction: Vec3  # unit, parent frame; bone from parent to this joint
    constraint: JointConstraint | None = None


@dataclass(frozen=True)
class AvatarRig:
    """Validated joint hierarchy. Joints are stored in file order, which is
    also the wire id order (root first is enforced)."""

    name: str
    joints: tuple[Joint, ...]
    end_effectors: tuple[str, ...] = field(default=())

    def __post_init__(self) -> None:
        names = [j.name for j in self.joints]
        if len(set(names)) != len(names):
            raise RigError("duplicate joint name in rig")
        index = {n: i for i, n in enumerate(names)}
        roots = [j for j in self.joints if j.parent is None]
        if len(roots) != 1:
            raise RigError(f"rig must have exactly one root, found {len(roots)}")
        for i, j in enumerate(self.joints):
            if j.parent is not None:
                if j.parent not in index:
                    raise RigError(f"joint {j.name!r} has unknown parent {j.parent!r}")
                if index[j.parent] >= i:
                    raise RigError(f"joint {j.name!r} must be declared after its parent")
                if j.bone_length <= 0.0:
                    raise RigError(f"joint {j.name!r} bone length must be > 0")
                if abs(j.rest_direction.norm() - 1.0) > 1e-6:
                    raise RigError(f"joint {j.name!r} rest direction is not unit length")
        # cycle check: walk every parent chain, must reach the root
        for j in self.joints:
            seen = set()
            cur: str | None = j.name
            while cur is not None:
                if cur in seen:
                    raise RigError(f"cycle in parent links at joint {cur!r}")
                seen.add(cur)
                cur = self.joints[index[cur]].parent
        for eff in self.end_effectors:
            if eff not in index:
                raise RigError(f"end effector {eff!r} is not a rig joint")
        object.__setattr__(self, "_index", index)
        children: dict[str, list[str]] = {n: [] for n in names}
        for j in self.joints:
            if j.parent is not None:
                children[j.parent].append(j.name)
        object.__setattr__(self, "_children", {k: tuple(v) for k, v in children.items()})

    @property
    def root(self) -> Joint:
        return next(j for j in self.joints if j.parent is None)

    def joint(self, name: str) -> Joint:
        try:
            return self.joints[self._index[name]]
        except KeyError:
            raise MissingJoint(f"joint {name!r} not in rig {self.name!r}") from None

    def index_of(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise MissingJoint(f"joint {name!r} not in rig {self.name!r}") from None

    def children_of(self, name: str) -> tuple[str, ...]:
        return self._children[name]

    def has_joint(self, name: str) -> bool:
        return name in self._index

    @property
    def joint_names(self) -> tuple[str, ...]:
        return tuple(j.name for j in self.joints)

    def path_between(self, anchor: str, end: str) -> tuple[str, ...]:
        """Joint names from anchor to end following parent links upward
        from end; raises if anchor is not an ancestor of end."""
        chain = [end]
        cur = self.joint(end)
        while cur.name != anchor:
            if cur.parent is None:
                raise RigError(f"{anchor!r} is not an ancestor of {end!r}")
            chain.append(cur.parent)
            cur = self.joint(cur.parent)
        chain.reverse()
        return tuple(chain)


def canonical_rotvec(v: Vec3) -> Vec3:
    """Wrap a rotation vector so its magnitude lies in [0, pi]."""
    angle = v.norm()
    if angle <= math.pi:
        return v
    arr = quat_to_rotvec(canonical(quat_from_rotvec(np.array(v.as_tuple()))))
    return Vec3(float(arr[0]), float(arr[1]), float(arr[2]))


@dataclass(frozen=True)
class JointConfiguration:
    """Per-joint rotation state, aligned with the rig's joint order."""

    rig: AvatarRig
    rotations: tuple[Vec3, ...]
    timestamp_us: int = 0
    stale_flag: bool = False

    def __post_init__(self) -> None:
        if len(self.rotations) != len(self.rig.joints):
            raise MissingJoint(
                f"configuration has {len(self.rotations)} rotations for "
                f"{len(self.rig.joints)} joints"
            )
        object.__setattr__(self, "rotations", tuple(canonical_rotvec(r) for r in self.rotations))

    def rotation(self, joint_name: str) -> Vec3:
        return self.rotations[self.rig.index_of(joint_name)]

    def with_rotations(self, updates: dict[str, Vec3]) -> "JointConfiguration":
        rots = list(self.rotations)
        for name, value in updates.items():
            rots[self.rig.index_of(name)] = value
        return JointConfiguration(self.rig, tuple(rots), self.timestamp_us, self.stale_flag)

    def stamped(self, timestamp_us: int, stale_flag: bool | None = None) -> "JointConfiguration":
        flag = self.stale_flag if stale_flag is None else stale_flag
        return JointConfiguration(self.rig, self.rotations, timestamp_us, flag)


def rest_configuration(rig: AvatarRig, timestamp_us: int = 0) -> JointConfiguration:
    zero = Vec3(0.0, 0.0, 0.0)
    return JointConfiguration(rig, tuple(zero for _ in rig.joints), timestamp_us)


def _parse_vec(raw, where: str) -> Vec3:
    if not isinstance(raw, (list, tuple)) or len(raw) != 3:
        raise ParseError(f"{where}: expected a 3-element list, got {raw!r}")
    return Vec3(float(raw[0]), float(raw[1]), float(raw[2]))


def _parse_constraint(raw, where: str) -> JointConstraint | None:
    if raw is None:
        return None
    if not isinstance(raw, dict) or "type" not in raw:
        raise ParseError(f"{where}: constraint must be a mapping with a 'type'")
    kind = raw["type"]
    try:
        if kind == "ball":
            return BallConstraint(
                cone_axis=_parse_vec(raw["axis"], where).normalized(),
                half_angle=float(raw["half_angle"]),
            )
        if kind == "hinge":
            return HingeConstraint(
                hinge_axis=_parse_vec(raw["axis"], where).normalized(),
                min_angle=float(raw["min_angle"]),
                max_angle=float(raw["max_angle"]),
            )
    except (KeyError, ValueError, TypeError) as exc:
        raise ParseError(f"{where}: bad constraint {raw!r}: {exc}") from exc
    raise ParseError(f"{where}: unknown constraint type {kind!r}")


def _remap_constraint(c: JointConstraint | None) -> JointConstraint | None:
    if isinstance(c, BallConstraint):
        return BallConstraint(remap_axes(c.cone_axis), c.half_angle)
    if isinstance(c, HingeConstraint):
        return HingeConstraint(remap_axes(c.hinge_axis), c.min_angle, c.max_angle)
    return None


def load_rig(path: str | Path) -> AvatarRig:
    """Load and validate a rig file.

    Files carry an ``up_axis`` tag (y or z).  Rigs authored z-up are
    converted to the engine's y-up frame here, once, by swapping axes on
    every rest direction and constraint axis.
    """
    try:
        doc = yaml.safe_load(Path(path).read_text())
    except (OSError, yaml.YAMLError) as exc:
        raise ParseError(f"cannot read rig file {path}: {exc}") from exc
    if not isinstance(doc, dict) or "joints" not in doc:
        raise ParseError(f"rig file {path} must define 'joints'")
    up_axis = str(doc.get("up_axis", "y")).lower()
    if up_axis not in ("y", "z"):
        raise ParseError(f"rig file {path}: up_axis must be 'y' or 'z', got {up_axis!r}")
    joints: list[Joint] = []
    for raw in doc["joints"]:
        where = f"rig file {path}, joint {raw.get('name', '?')!r}"
        try:
            name = str(raw["name"])
            parent = raw.get("parent")
            parent = None if parent is None else str(parent)
            if parent is None:
                length = 0.0
                rest = Vec3(0.0, 1.0, 0.0)
            else:
                length = float(raw["length"])
                rest = _parse_vec(raw["rest_direction"], where).normalized()
            constraint = _parse_constraint(raw.get("constraint"), where)
        except (KeyError, ValueError, TypeError) as exc:
            raise ParseError(f"{where}: {exc}") from exc
        if up_axis == "z":
            rest = remap_axes(rest)
            constraint = _remap_constraint(constraint)
        joints.append(Joint(name, parent, length, rest, constraint))
    effectors = tuple(str(e) for e in doc.get("end_effectors", []))
    return AvatarRig(name=str(doc.get("name", Path(path).stem)), joints=tuple(joints),
                     end_effectors=effectors)
