"""Forward kinematics and constrained inverse kinematics.

The solver is an iterative cyclic one: sweep the chain from the end
effector back to the anchor, at each joint rotating the downstream
segment toward the target with a shortest-arc rotation, then projecting
the joint back inside its constraint.  Projection after every update
means any returned configuration satisfies every constraint, converged or
not.  Starting from the caller's current configuration makes the solver
prefer the solution nearest the previous frame, which is the whole
multi-solution disambiguation policy.

Unreachable targets are not an error; the solver returns its best effort
and never returns something worse than the (projected) starting state.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateDirection, MissingJoint, RigError
from .geometry import Vec3
from .rig import AvatarRig, BallConstraint, HingeConstraint, JointConfiguration
from .rotations import (
    IDENTITY,
    canonical,
    quat_about_axis,
    quat_between,
    quat_conj,
    quat_from_rotvec,
    quat_mul,
    quat_rotate,
    quat_to_rotvec,
    rotation_angle,
    twist_angle,
)

_TINY = 1e-12


def _norm3(v: "np.ndarray") -> float:
    return math.sqrt(float(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]))


def _as_array(v: Vec3) -> np.ndarray:
    return np.array([v.x, v.y, v.z])


def _as_vec(a: np.ndarray) -> Vec3:
    return Vec3(float(a[0]), float(a[1]), float(a[2]))


def _check_config(rig: AvatarRig, config: JointConfiguration) -> None:
    if config.rig is not rig and config.rig.joint_names != rig.joint_names:
        raise MissingJoint(
            f"configuration built for rig {config.rig.name!r} does not cover {rig.name!r}"
        )


def _fk_arrays(
    rig: AvatarRig, config: JointConfiguration
) -> tuple[dict[str, np.ndarray], dict[str, np.ndarray]]:
    """World positions and world frame rotations for every joint."""
    positions: dict[str, np.ndarray] = {}
    frames: dict[str, np.ndarray] = {}
    for i, joint in enumerate(rig.joints):
        local = quat_from_rotvec(_as_array(config.rotations[i]))
        if joint.parent is None:
            positions[joint.name] = np.zeros(3)
            frames[joint.name] = local
        else:
            parent_frame = frames[joint.parent]
            offset = quat_rotate(parent_frame, _as_array(joint.rest_direction) * joint.bone_length)
            positions[joint.name] = positions[joint.parent] + offset
            frames[joint.name] = quat_mul(parent_frame, local)
    return positions, frames


def forward_kinematics(rig: AvatarRig, config: JointConfiguration) -> dict[str, Vec3]:
    """World position of every joint; the root sits at the rig origin."""
    _check_config(rig, config)
    positions, _ = _fk_arrays(rig, config)
    return {name: _as_vec(p) for name, p in positions.items()}


def _partial_fk(
    rig: AvatarRig, config: JointConfiguration, joint_name: str
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Walk only the ancestor chain of one joint.

    Returns (position, own world frame, parent world frame); much cheaper
    than a full-rig pass when only one anchor or end effector matters.
    """
    path = rig.path_between(rig.root.name, joint_name)
    pos = np.zeros(3)
    parent_frame = IDENTITY
    frame = IDENTITY
    for name in path:
        joint = rig.joint(name)
        local = quat_from_rotvec(_as_array(config.rotations[rig.index_of(name)]))
        if joint.parent is None:
            parent_frame = IDENTITY
            frame = local
            continue
        parent_frame = frame
        pos = pos + quat_rotate(parent_frame, _as_array(joint.rest_direction) * joint.bone_length)
        frame = quat_mul(parent_frame, local)
    return pos, frame, parent_frame


# --- constraint projection -------------------------------------------------

def clamp_ball(direction: Vec3, c: BallConstraint) -> Vec3:
    """Clamp a unit direction into the constraint cone.

    Directions inside the cone pass through unchanged; outside, the result
    is the unit vector at exactly half_angle from the axis, in the plane
    spanned by axis and direction.  Antiparallel input leaves that plane
    undefined and raises.
    """
    return _as_vec(_clamp_ball(_as_array(direction), _as_array(c.cone_axis), c.half_angle))


def _clamp_ball(direction: np.ndarray, axis: np.ndarray, half_angle: float) -> np.ndarray:
    d = float(np.dot(direction, axis))
    if d >= math.cos(half_angle):
        return direction
    perp = direction - d * axis
    n = _norm3(perp)
    if n < 1e-9:
        raise DegenerateDirection(
            f"direction {direction} antiparallel to cone axis {axis}; clamp plane undefined"
        )
    return axis * math.cos(half_angle) + (perp / n) * math.sin(half_angle)


def clamp_hinge(angle: float, c: HingeConstraint) -> float:
    """Clamp a hinge angle into [min_angle, max_angle]."""
    return min(max(angle, c.min_angle), c.max_angle)


def _primary_child(rig: AvatarRig, joint_name: str, prefer: str | None = None) -> str | None:
    """The child bone a joint's constraint governs: the chain child when
    solving, the first declared child otherwise."""
    children = rig.children_of(joint_name)
    if not children:
        return None
    if prefer is not None and prefer in children:
        return prefer
    return children[0]


def _project_local(
    rig: AvatarRig, joint_name: str, local: np.ndarray, chain_child: str | None
) -> np.ndarray:
    """Project a joint's local rotation inside its constraint.

    Ball joints get their governed bone direction clamped into the cone by
    a minimal pre-rotation; twist about the bone is untouched (the cone
    says nothing about it, and downstream hinges need it to orient their
    bend plane).  Hinge joints keep only the twist about the hinge axis,
    then get range-clamped.
    """
    joint = rig.joint(joint_name)
    c = joint.constraint
    if c is None:
        return local
    if isinstance(c, HingeConstraint):
        axis = _as_array(c.hinge_axis)
        angle = clamp_hinge(twist_angle(local, axis), c)
        return quat_about_axis(axis, angle)
    child = _primary_child(rig, joint_name, chain_child)
    if child is None:
        return local
    ref = _as_array(rig.joint(child).rest_direction)
    pointed = quat_rotate(local, ref)
    try:
        clamped = _clamp_ball(pointed, _as_array(c.cone_axis), c.half_angle)
    except DegenerateDirection:
        # pathological flip: fall back to the cone axis itself
        clamped = _as_array(c.cone_axis)
    if clamped is pointed:
        return local
    return canonical(quat_mul(quat_between(pointed, clamped), local))


def constraint_violations(
    rig: AvatarRig, config: JointConfiguration, tol: float = 1e-6
) -> list[str]:
    """Human-readable list of constraint violations; empty means valid."""
    _check_config(rig, config)
    problems: list[str] = []
    for i, joint in enumerate(rig.joints):
        c = joint.constraint
        if c is None:
            continue
        local = quat_from_rotvec(_as_array(config.rotations[i]))
        if isinstance(c, HingeConstraint):
            axis = _as_array(c.hinge_axis)
            angle = twist_angle(local, axis)
            residual = rotation_angle(
                quat_mul(quat_conj(quat_about_axis(axis, angle)), local)
            )
            if residual > tol:
                problems.append(
                    f"{joint.name}: rotation is not about the hinge axis "
                    f"(off-axis residual {residual:.3g} rad)"
                )
            if not c.min_angle - tol <= angle <= c.max_angle + tol:
                problems.append(
                    f"{joint.name}: hinge angle {angle:.6f} outside "
                    f"[{c.min_angle}, {c.max_angle}]"
                )
        else:
            child = _primary_child(rig, joint.name)
            if child is None:
                continue
            ref = _as_array(rig.joint(child).rest_direction)
            pointed = quat_rotate(local, ref)
            cosang = float(np.dot(pointed, _as_array(c.cone_axis)))
            angle = math.acos(min(1.0, max(-1.0, cosang)))
            if angle > c.half_angle + tol:
                problems.append(
                    f"{joint.name}: bone direction {angle:.6f} rad from cone axis, "
                    f"limit {c.half_angle}"
                )
    return problems


# --- chains and the solver -------------------------------------------------

@dataclass(frozen=True)
class KinematicChain:
    """A contiguous run of rig joints from an anchor down to an end
    effector, with the geometry the solver needs pre-extracted."""

    rig: AvatarRig
    joints: tuple[str, ...]  # anchor .. end effector
    reach: float

    @property
    def anchor(self) -> str:
        return self.joints[0]

    @property
    def end_effector(self) -> str:
        return self.joints[-1]


def chain_between(rig: AvatarRig, anchor: str, end_effector: str) -> KinematicChain:
    path = rig.path_between(anchor, end_effector)
    if len(path) < 2:
        raise RigError(f"chain {anchor!r} -> {end_effector!r} has no bones")
    reach = sum(rig.joint(n).bone_length for n in path[1:])
    return KinematicChain(rig=rig, joints=path, reach=reach)


@dataclass(frozen=True, slots=True)
class IkOptions:
    max_iterations: int = 200
    position_tolerance: float | None = None  # None: 1e-3 x chain reach

    def __post_init__(self) -> None:
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.position_tolerance is not None and self.position_tolerance <= 0.0:
            raise ValueError("position_tolerance must be > 0")

    def tolerance_for(self, chain: KinematicChain) -> float:
        if self.position_tolerance is not None:
            return self.position_tolerance
        return 1e-3 * chain.reach


@dataclass(frozen=True)
class IkResult:
    configuration: JointConfiguration
    final_error: float
    iterations_used: int
    converged: bool


class _ChainState:
    """Mutable positions/frames of one chain during a solve."""

    __slots__ = ("base_pos", "base_rot", "locals", "bone_offsets", "positions", "frames")

    def __init__(
        self,
        base_pos: np.ndarray,
        base_rot: np.ndarray,
        locals_: list[np.ndarray],
        bone_offsets: list[np.ndarray],
    ):
        self.base_pos = base_pos
        self.base_rot = base_rot
        self.locals = locals_  # local quats of joints[0..n-1] (end's own local is irrelevant)
        self.bone_offsets = bone_offsets  # rest_direction * length for joints[1..n]
        self.positions: list[np.ndarray] = [base_pos] * (len(bone_offsets) + 1)
        self.frames: list[np.ndarray] = [IDENTITY] * len(locals_)
        self.refresh(0)

    def refresh(self, from_index: int) -> None:
        """Recompute positions/frames for joints[from_index..]."""
        n = len(self.bone_offsets)
        for i in range(from_index, n):
            parent_frame = self.base_rot if i == 0 else self.frames[i - 1]
            self.frames[i] = quat_mul(parent_frame, self.locals[i])
            self.positions[i + 1] = self.positions[i] + quat_rotate(
                self.frames[i], self.bone_offsets[i]
            )

    def end_position(self) -> np.ndarray:
        return self.positions[-1]


def _optimal_angle_about(
    axis_world: np.ndarray, pivot: np.ndarray, end: np.ndarray, target: np.ndarray
) -> float | None:
    """Rotation angle about an axis line through pivot that brings the end
    point closest to the target; None when either lies on the axis."""
    u = end - pivot
    v = target - pivot
    u_perp = u - np.dot(u, axis_world) * axis_world
    v_perp = v - np.dot(v, axis_world) * axis_world
    if _norm3(u_perp) <= 1e-9 or _norm3(v_perp) <= 1e-9:
        return None
    return math.atan2(
        float(np.dot(np.cross(u_perp, v_perp), axis_world)),
        float(np.dot(u_perp, v_perp)),
    )


def _update_joint(
    rig: AvatarRig,
    names: tuple[str, ...],
    state: _ChainState,
    k: int,
    target: np.ndarray,
) -> None:
    """One greedy update of chain joint k toward the target.

    Hinge joints get the closed-form optimal angle about their axis.
    Other joints get a shortest-arc swing toward the target, a cone clamp,
    and then (for non-terminal joints) the optimal twist about their
    outgoing bone, which orients downstream hinges without moving the
    bone itself.
    """
    pivot = state.positions[k]
    end = state.end_position()
    v = target - pivot
    if _norm3(end - pivot) <= _TINY or _norm3(v) <= _TINY:
        return
    joint = rig.joint(names[k])
    parent_frame = state.base_rot if k == 0 else state.frames[k - 1]
    if isinstance(joint.constraint, HingeConstraint):
        axis_local = _as_array(joint.constraint.hinge_axis)
        axis_world = quat_rotate(parent_frame, axis_local)
        dphi = _optimal_angle_about(axis_world, pivot, end, target)
        if dphi is None:
            return
        phi = clamp_hinge(twist_angle(state.locals[k], axis_local) + dphi, joint.constraint)
        state.locals[k] = quat_about_axis(axis_local, phi)
        state.refresh(k)
        return

    delta = quat_between(end - pivot, v)
    new_local = canonical(
        quat_mul(
            quat_mul(quat_conj(parent_frame), quat_mul(delta, parent_frame)),
            state.locals[k],
        )
    )
    state.locals[k] = _project_local(rig, names[k], new_local, names[k + 1])
    state.refresh(k)
    if k >= len(state.locals) - 1:
        return
    # twist about the outgoing bone: direction (and the cone check) is
    # unaffected, but deeper links swing around it
    bone_dir = quat_rotate(state.locals[k], _as_array(rig.joint(names[k + 1]).rest_direction))
    axis_world = quat_rotate(parent_frame, bone_dir)
    tau = _optimal_angle_about(
        axis_world, state.positions[k + 1], state.end_position(), target
    )
    if tau is None:
        return
    state.locals[k] = canonical(quat_mul(state.locals[k], quat_from_rotvec(
        _as_array(rig.joint(names[k + 1]).rest_direction) * tau)))
    state.refresh(k)


def _polish_dls(
    rig: AvatarRig,
    names: tuple[str, ...],
    state: _ChainState,
    target: np.ndarray,
    tol: float,
) -> None:
    """Damped least-squares refinement of the chain parameters.

    Greedy sweeps converge linearly and crawl near singular geometry
    (straightened chains, cone boundaries); a few Levenberg-Marquardt
    steps on the constraint-reduced parameters (hinge angle scalars,
    rotation vectors elsewhere) finish the job.  Constraints are
    re-projected after every accepted step, so the state never leaves the
    feasible set.
    """
    specs: list[tuple[str, np.ndarray | None]] = []
    for name in names[:-1]:
        c = rig.joint(name).constraint
        if isinstance(c, HingeConstraint):
            specs.append(("hinge", _as_array(c.hinge_axis)))
        else:
            specs.append(("free", None))

    def params_from_state() -> np.ndarray:
        out: list[float] = []
        for k, (kind, axis) in enumerate(specs):
            if kind == "hinge":
                out.append(twist_angle(state.locals[k], axis))
            else:
                out.extend(quat_to_rotvec(state.locals[k]))
        return np.array(out)

    def apply(params: np.ndarray, project: bool) -> None:
        i = 0
        for k, (kind, axis) in enumerate(specs):
            if kind == "hinge":
                angle = params[i]
                i += 1
                c = rig.joint(names[k]).constraint
                if project:
                    angle = clamp_hinge(angle, c)
                state.locals[k] = quat_about_axis(axis, angle)
            else:
                local = quat_from_rotvec(params[i : i + 3])
                i += 3
                if project:
                    local = _project_local(rig, names[k], local, names[k + 1])
                state.locals[k] = local
        state.refresh(0)

    def error_of(params: np.ndarray, project: bool) -> float:
        apply(params, project)
        return _norm3(state.end_position() - target)

    params = params_from_state()
    err = error_of(params, project=True)
    lam = 1e-3
    delta = 1e-6
    for _ in range(12):
        if err <= 0.3 * tol:
            break
        base_end = state.end_position().copy()
        jac = np.empty((3, len(params)))
        for i in range(len(params)):
            probe = params.copy()
            probe[i] += delta
            apply(probe, project=False)
            jac[:, i] = (state.end_position() - base_end) / delta
        residual = base_end - target
        accepted = False
        for _ in range(6):
            lhs = jac.T @ jac + lam * np.eye(len(params))
            step = np.linalg.solve(lhs, -jac.T @ residual)
            new_err = error_of(params + step, project=True)
            if new_err < err:
                params = params_from_state()  # read back the projected state
                err = new_err
                lam = max(lam / 3.0, 1e-9)
                accepted = True
                break
            lam *= 10.0
        if not accepted:
            break
    apply(params, project=True)


def _straighten_interior(rig: AvatarRig, names: tuple[str, ...], state: _ChainState) -> None:
    """Zero every interior joint (projected into its constraint).

    Near full extension greedy descent goes singular and crawls; snapping
    straight and re-aiming from the anchor lands directly on the
    stretched-toward-target solution.
    """
    for k in range(1, len(state.locals)):
        state.locals[k] = _project_local(rig, names[k], IDENTITY.copy(), names[k + 1])
    state.refresh(0)


def _nudge_interior(
    rig: AvatarRig, names: tuple[str, ...], state: _ChainState, magnitude: float
) -> None:
    """Deterministically bend every interior joint to escape a stall."""
    for k in range(1, len(state.locals)):
        joint = rig.joint(names[k])
        c = joint.constraint
        if isinstance(c, HingeConstraint):
            axis_local = _as_array(c.hinge_axis)
            phi = twist_angle(state.locals[k], axis_local)
            step = min(magnitude, 0.45 * (c.max_angle - c.min_angle))
            phi += step if (c.max_angle - phi) >= (phi - c.min_angle) else -step
            state.locals[k] = quat_about_axis(axis_local, clamp_hinge(phi, c))
        else:
            bone = state.bone_offsets[k]
            swing_axis = np.cross(bone, np.array([1.0, 0.0, 0.0]))
            if _norm3(swing_axis) < 1e-6:
                swing_axis = np.cross(bone, np.array([0.0, 1.0, 0.0]))
            nudged = quat_mul(state.locals[k], quat_about_axis(swing_axis, magnitude))
            state.locals[k] = _project_local(rig, names[k], canonical(nudged), names[k + 1])
    state.refresh(0)


def solve_ik(
    chain: KinematicChain,
    target: Vec3,
    opts: IkOptions = IkOptions(),
    initial: JointConfiguration | None = None,
) -> IkResult:
    """Drive the chain's end effector toward a world-space target.

    Returns the best configuration found; ``converged`` reports whether it
    got within tolerance.  ``final_error`` is recomputed with a fresh
    forward-kinematics pass over the returned configuration.
    """
    target.require_finite()
    rig = chain.rig
    if initial is None:
        from .rig import rest_configuration

        initial = rest_configuration(rig)
    _check_config(rig, initial)
    tol = opts.tolerance_for(chain)
    target_arr = _as_array(target)

    base_pos, _, base_rot = _partial_fk(rig, initial, chain.anchor)

    names = chain.joints
    locals_ = [
        quat_from_rotvec(_as_array(initial.rotations[rig.index_of(n)])) for n in names[:-1]
    ]
    bone_offsets = [
        _as_array(rig.joint(n).rest_direction) * rig.joint(n).bone_length for n in names[1:]
    ]

    # Project the starting state; normally a no-op because upstream only
    # ever feeds back configurations this solver produced.
    projected = [
        _project_local(rig, names[i], locals_[i], names[i + 1]) for i in range(len(locals_))
    ]
    start_changed = any(
        rotation_angle(quat_mul(quat_conj(a), b)) > 1e-9 for a, b in zip(locals_, projected)
    )
    state = _ChainState(base_pos, base_rot, projected, bone_offsets)
    err = _norm3(state.end_position() - target_arr)
    if not start_changed and err <= tol:
        return IkResult(initial, err, 0, True)

    best_locals = [q.copy() for q in state.locals]
    best_err = err
    iterations = 0
    escapes = 0
    nudge_magnitudes = (0.3, 0.5, 0.8, 1.3, 2.1, 3.0, 0.15, 0.07)
    forward = False  # sweep direction alternates: end->anchor first
    window = 4  # sweeps between progress checks
    window_best = best_err
    n = len(state.locals)
    # No configuration can get closer than the radial gap to the reachable
    # sphere; once within tolerance of that bound (unreachable target,
    # chain stretched straight at it), more work is pointless.
    radial_gap = max(
        0.0, _norm3(target_arr - base_pos) - chain.reach
    )
    good_enough = max(tol, radial_gap + tol)
    for sweep in range(opts.max_iterations):
        iterations = sweep + 1
        order = range(n) if forward else range(n - 1, -1, -1)
        for k in order:
            _update_joint(rig, names, state, k, target_arr)
        forward = not forward
        err = _norm3(state.end_position() - target_arr)
        if err < best_err:
            best_err = err
            best_locals = [q.copy() for q in state.locals]
        if best_err <= good_enough:
            break
        if (sweep + 1) % window != 0:
            continue
        # Sweeps converge linearly and crawl near singular geometry, so
        # every few sweeps the best state gets a least-squares polish.
        state.locals = [q.copy() for q in best_locals]
        state.refresh(0)
        _polish_dls(rig, names, state, target_arr, tol)
        err = _norm3(state.end_position() - target_arr)
        if err < best_err:
            best_err = err
            best_locals = [q.copy() for q in state.locals]
        if best_err <= good_enough:
            break
        stalled = best_err > window_best - max(1e-12, 0.05 * (window_best - tol))
        window_best = best_err
        if not stalled:
            continue
        # Still stuck: greedy descent locks up when the chain runs
        # collinear to the target ray.  Snap straight (nails full
        # extension), then bend interior joints by escalating amounts, and
        # sweep anchor-first afterwards so the base re-orients before the
        # bent joints get re-optimized.  Best-tracking keeps the returned
        # result monotone.
        if escapes > len(nudge_magnitudes) or n < 2:
            break
        if escapes == 0:
            _straighten_interior(rig, names, state)
        else:
            _nudge_interior(rig, names, state, nudge_magnitudes[escapes - 1])
        escapes += 1
        forward = True

    updates = {
        names[i]: _as_vec(quat_to_rotvec(best_locals[i])) for i in range(len(best_locals))
    }
    result_config = initial.with_rotations(updates)
    end_pos, _, _ = _partial_fk(rig, result_config, chain.end_effector)
    final_error = _norm3(end_pos - target_arr)
    return IkResult(
        configuration=result_config,
        final_error=final_error,
        iterations_used=iterations,
        converged=final_error <= tol,
    )
