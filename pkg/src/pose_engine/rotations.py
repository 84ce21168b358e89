"""Minimal quaternion toolbox used by the kinematics code.

Quaternions are numpy arrays ``[w, x, y, z]`` with unit norm.  Rotation
vectors (axis * angle, radians) are the external parameterization used by
:class:`~pose_engine.rig.JointConfiguration`; everything here converts
between the two and composes rotations without pulling in scipy.
"""
from __future__ import annotations

import math

import numpy as np

IDENTITY = np.array([1.0, 0.0, 0.0, 0.0])

_SMALL = 1e-12


def quat_from_rotvec(v: np.ndarray) -> np.ndarray:
    angle = float(np.linalg.norm(v))
    if angle < _SMALL:
        # first-order expansion keeps tiny rotations exact enough
        q = np.array([1.0, 0.5 * v[0], 0.5 * v[1], 0.5 * v[2]])
        return q / np.linalg.norm(q)
    axis = v / angle
    half = 0.5 * angle
    s = math.sin(half)
    return np.array([math.cos(half), axis[0] * s, axis[1] * s, axis[2] * s])


def quat_to_rotvec(q: np.ndarray) -> np.ndarray:
    q = canonical(q)
    w = min(1.0, max(-1.0, float(q[0])))
    angle = 2.0 * math.acos(w)
    s = math.sqrt(max(0.0, 1.0 - w * w))
    if s < _SMALL:
        return 2.0 * q[1:4]  # small-angle: v ~= 2 * vector part
    return (q[1:4] / s) * angle


def quat_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ]
    )


def quat_conj(q: np.ndarray) -> np.ndarray:
    return np.array([q[0], -q[1], -q[2], -q[3]])


def quat_rotate(q: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Rotate vector v by quaternion q (q v q*)."""
    # scalar arithmetic: np.cross carries ~30x overhead on 3-vectors
    w, x, y, z = q
    vx, vy, vz = v[0], v[1], v[2]
    tx = 2.0 * (y * vz - z * vy)
    ty = 2.0 * (z * vx - x * vz)
    tz = 2.0 * (x * vy - y * vx)
    return np.array(
        [
            vx + w * tx + (y * tz - z * ty),
            vy + w * ty + (z * tx - x * tz),
            vz + w * tz + (x * ty - y * tx),
        ]
    )


def quat_normalize(q: np.ndarray) -> np.ndarray:
    return q / np.linalg.norm(q)


def canonical(q: np.ndarray) -> np.ndarray:
    """Unit quaternion with non-negative w (angle in [0, pi])."""
    q = quat_normalize(q)
    return -q if q[0] < 0.0 else q


def quat_about_axis(axis: np.ndarray, angle: float) -> np.ndarray:
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    half = 0.5 * angle
    s = math.sin(half)
    return np.array([math.cos(half), axis[0] * s, axis[1] * s, axis[2] * s])


def quat_between(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Shortest-arc rotation taking direction a to direction b.

    For antiparallel inputs the rotation plane is ambiguous; an arbitrary
    perpendicular axis is chosen deterministically.
    """
    ax, ay, az = float(a[0]), float(a[1]), float(a[2])
    bx, by, bz = float(b[0]), float(b[1]), float(b[2])
    na = math.sqrt(ax * ax + ay * ay + az * az)
    nb = math.sqrt(bx * bx + by * by + bz * bz)
    if na < _SMALL or nb < _SMALL:
        return IDENTITY.copy()
    ax, ay, az = ax / na, ay / na, az / na
    bx, by, bz = bx / nb, by / nb, bz / nb
    d = ax * bx + ay * by + az * bz
    # Parallel needs no dead zone: [1 + d, a x b] has no cancellation there,
    # so even sub-micro-radian corrections come out exact.  Antiparallel
    # does cancel catastrophically and keeps a guarded branch.
    if d >= 1.0:
        return IDENTITY.copy()
    if d < -1.0 + _SMALL:
        axis = np.array([0.0, -az, ay])  # a x (1,0,0)
        if math.sqrt(az * az + ay * ay) < 1e-6:
            axis = np.array([az, 0.0, -ax])  # a x (0,1,0)
        return quat_about_axis(axis, math.pi)
    cx = ay * bz - az * by
    cy = az * bx - ax * bz
    cz = ax * by - ay * bx
    w = 1.0 + d
    n = math.sqrt(w * w + cx * cx + cy * cy + cz * cz)
    return np.array([w / n, cx / n, cy / n, cz / n])


def twist_angle(q: np.ndarray, axis: np.ndarray) -> float:
    """Signed angle of the twist component of q about a unit axis.

    Swing-twist decomposition: q = swing * twist, twist a rotation about
    ``axis``.  Returns the twist angle in (-pi, pi].
    """
    proj = float(np.dot(q[1:4], axis))
    w = float(q[0])
    if abs(w) < _SMALL and abs(proj) < _SMALL:
        return 0.0  # q is a pure half-turn perpendicular to axis: no twist
    angle = 2.0 * math.atan2(proj, w)
    # wrap into (-pi, pi]
    if angle > math.pi:
        angle -= 2.0 * math.pi
    elif angle <= -math.pi:
        angle += 2.0 * math.pi
    return angle


def rotation_angle(q: np.ndarray) -> float:
    """Total rotation angle of q, in [0, pi]."""
    w = min(1.0, max(-1.0, abs(float(q[0]))))
    return 2.0 * math.acos(w)
