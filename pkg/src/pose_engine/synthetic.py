"""Deterministic synthetic person for benchmarks, tests, and demos.

A fixed-proportion figure stands at the origin (y up, meters) swinging
arms and legs as pure functions of time, covering every landmark of the
33-point scheme.  Same timestamp in, same frame out, always.
"""
from __future__ import annotations

import math

from .geometry import Vec3
from .schemes import KeypointFrame, LandmarkPoint, LandmarkScheme, SpaceTag

_HIP_Y = 0.95
_SHOULDER_Y = 1.45
_HALF_SHOULDER = 0.20
_HALF_HIP = 0.12
_UPPER_ARM = 0.30
_FOREARM = 0.27
_THIGH = 0.44
_SHIN = 0.43
_HEAD_Y = 1.70


def _swing(t_s: float, hz: float, amplitude: float, phase: float = 0.0) -> float:
    return amplitude * math.sin(2.0 * math.pi * hz * t_s + phase)


def synthetic_pose(timestamp_us: int) -> dict[str, Vec3]:
    """World positions for the named landmarks of the 33-point scheme."""
    t = timestamp_us / 1e6
    arm = _swing(t, 0.5, 1.0)  # arm raise angle, radians
    leg = _swing(t, 0.8, 0.45)
    sway = _swing(t, 0.3, 0.04)

    def arm_chain(side: float, phase: float) -> tuple[Vec3, Vec3, Vec3]:
        shoulder = Vec3(side * _HALF_SHOULDER + sway, _SHOULDER_Y, 0.0)
        lift = arm if phase == 0.0 else -arm
        elbow = shoulder + Vec3(
            side * _UPPER_ARM * math.cos(lift), _UPPER_ARM * math.sin(lift) * 0.4,
            _UPPER_ARM * math.sin(lift) * 0.6,
        )
        wrist = elbow + Vec3(
            side * _FOREARM * math.cos(lift * 1.3), _FOREARM * math.sin(lift * 1.3) * 0.5,
            _FOREARM * math.sin(lift * 1.3) * 0.5,
        )
        return shoulder, elbow, wrist

    def leg_chain(side: float, phase: float) -> tuple[Vec3, Vec3, Vec3]:
        hip = Vec3(side * _HALF_HIP + sway, _HIP_Y, 0.0)
        kick = leg if phase == 0.0 else -leg
        knee = hip + Vec3(0.0, -_THIGH * math.cos(kick), _THIGH * math.sin(kick))
        ankle = knee + Vec3(0.0, -_SHIN * math.cos(kick * 0.5), _SHIN * math.sin(kick * 0.5))
        return hip, knee, ankle

    l_sh, l_el, l_wr = arm_chain(+1.0, 0.0)
    r_sh, r_el, r_wr = arm_chain(-1.0, math.pi)
    l_hip, l_kn, l_ank = leg_chain(+1.0, 0.0)
    r_hip, r_kn, r_ank = leg_chain(-1.0, math.pi)

    head = Vec3(sway, _HEAD_Y, 0.0)
    nose = head + Vec3(0.0, 0.0, 0.08)
    pose = {
        "nose": nose,
        "left_eye_inner": nose + Vec3(0.02, 0.03, -0.01),
        "left_eye": nose + Vec3(0.035, 0.03, -0.015),
        "left_eye_outer": nose + Vec3(0.05, 0.03, -0.02),
        "right_eye_inner": nose + Vec3(-0.02, 0.03, -0.01),
        "right_eye": nose + Vec3(-0.035, 0.03, -0.015),
        "right_eye_outer": nose + Vec3(-0.05, 0.03, -0.02),
        "left_ear": head + Vec3(0.08, 0.0, -0.02),
        "right_ear": head + Vec3(-0.08, 0.0, -0.02),
        "mouth_left": nose + Vec3(0.02, -0.04, 0.0),
        "mouth_right": nose + Vec3(-0.02, -0.04, 0.0),
        "left_shoulder": l_sh,
        "right_shoulder": r_sh,
        "left_elbow": l_el,
        "right_elbow": r_el,
        "left_wrist": l_wr,
        "right_wrist": r_wr,
        "left_pinky": l_wr + Vec3(0.02, -0.02, 0.02),
        "right_pinky": r_wr + Vec3(-0.02, -0.02, 0.02),
        "left_index": l_wr + Vec3(0.03, 0.0, 0.03),
        "right_index": r_wr + Vec3(-0.03, 0.0, 0.03),
        "left_thumb": l_wr + Vec3(0.02, 0.02, 0.02),
        "right_thumb": r_wr + Vec3(-0.02, 0.02, 0.02),
        "left_hip": l_hip,
        "right_hip": r_hip,
        "left_knee": l_kn,
        "right_knee": r_kn,
        "left_ankle": l_ank,
        "right_ankle": r_ank,
        "left_heel": l_ank + Vec3(0.0, -0.05, -0.05),
        "right_heel": r_ank + Vec3(0.0, -0.05, -0.05),
        "left_foot_index": l_ank + Vec3(0.0, -0.07, 0.12),
        "right_foot_index": r_ank + Vec3(0.0, -0.07, 0.12),
    }
    return pose


def synthetic_frame(
    scheme: LandmarkScheme, timestamp_us: int, sequence: int
) -> KeypointFrame:
    """A full synthetic frame for any scheme whose landmark names are a
    subset of the 33-point vocabulary."""
    pose = synthetic_pose(timestamp_us)
    points = tuple(LandmarkPoint(pose[name], 1.0) for name in scheme.landmark_names)
    return KeypointFrame(
        timestamp_us=timestamp_us,
        sequence=sequence,
        scheme=scheme,
        points=points,
        space=SpaceTag.WORLD3D,
    )
