/**
 * Deterministic 33-landmark figure, used as the model-free backend for
 * tests, demos, and protocol conformance runs.  Pure function of the
 * timestamp (and an optional scalar "drive" from video content), in the
 * engine world frame: meters, y up, z toward the viewer.
 */
import { LANDMARK_NAMES, Landmark, Pose } from "./landmarks.js";

const HIP_Y = 0.95;
const SHOULDER_Y = 1.45;
const HALF_SHOULDER = 0.2;
const HALF_HIP = 0.12;
const UPPER_ARM = 0.3;
const FOREARM = 0.27;
const THIGH = 0.44;
const SHIN = 0.43;
const HEAD_Y = 1.7;

function point(x: number, y: number, z: number, confidence = 1.0): Landmark {
  return { x, y, z, confidence };
}

function add(a: Landmark, x: number, y: number, z: number): Landmark {
  return point(a.x + x, a.y + y, a.z + z, a.confidence);
}

export function syntheticPose(timestampUs: bigint, drive = 0.0): Pose {
  const t = Number(timestampUs) / 1e6;
  const arm = Math.sin(2 * Math.PI * 0.5 * t) * (1.0 + 0.3 * drive);
  const leg = Math.sin(2 * Math.PI * 0.8 * t) * 0.45;
  const sway = Math.sin(2 * Math.PI * 0.3 * t) * 0.04;

  const armChain = (side: number, phase: number) => {
    const lift = phase === 0 ? arm : -arm;
    const shoulder = point(side * HALF_SHOULDER + sway, SHOULDER_Y, 0);
    const elbow = add(
      shoulder,
      side * UPPER_ARM * Math.cos(lift),
      UPPER_ARM * Math.sin(lift) * 0.4,
      UPPER_ARM * Math.sin(lift) * 0.6,
    );
    const wrist = add(
      elbow,
      side * FOREARM * Math.cos(lift * 1.3),
      FOREARM * Math.sin(lift * 1.3) * 0.5,
      FOREARM * Math.sin(lift * 1.3) * 0.5,
    );
    return { shoulder, elbow, wrist };
  };
  const legChain = (side: number, phase: number) => {
    const kick = phase === 0 ? leg : -leg;
    const hip = point(side * HALF_HIP + sway, HIP_Y, 0);
    const knee = add(hip, 0, -THIGH * Math.cos(kick), THIGH * Math.sin(kick));
    const ankle = add(knee, 0, -SHIN * Math.cos(kick * 0.5), SHIN * Math.sin(kick * 0.5));
    return { hip, knee, ankle };
  };

  const left = armChain(1, 0);
  const right = armChain(-1, Math.PI);
  const lleg = legChain(1, 0);
  const rleg = legChain(-1, Math.PI);
  const head = point(sway, HEAD_Y, 0);
  const nose = add(head, 0, 0, 0.08);

  const byName: Record<string, Landmark> = {
    nose,
    left_eye_inner: add(nose, 0.02, 0.03, -0.01),
    left_eye: add(nose, 0.035, 0.03, -0.015),
    left_eye_outer: add(nose, 0.05, 0.03, -0.02),
    right_eye_inner: add(nose, -0.02, 0.03, -0.01),
    right_eye: add(nose, -0.035, 0.03, -0.015),
    right_eye_outer: add(nose, -0.05, 0.03, -0.02),
    left_ear: add(head, 0.08, 0, -0.02),
    right_ear: add(head, -0.08, 0, -0.02),
    mouth_left: add(nose, 0.02, -0.04, 0),
    mouth_right: add(nose, -0.02, -0.04, 0),
    left_shoulder: left.shoulder,
    right_shoulder: right.shoulder,
    left_elbow: left.elbow,
    right_elbow: right.elbow,
    left_wrist: left.wrist,
    right_wrist: right.wrist,
    left_pinky: add(left.wrist, 0.02, -0.02, 0.02),
    right_pinky: add(right.wrist, -0.02, -0.02, 0.02),
    left_index: add(left.wrist, 0.03, 0, 0.03),
    right_index: add(right.wrist, -0.03, 0, 0.03),
    left_thumb: add(left.wrist, 0.02, 0.02, 0.02),
    right_thumb: add(right.wrist, -0.02, 0.02, 0.02),
    left_hip: lleg.hip,
    right_hip: rleg.hip,
    left_knee: lleg.knee,
    right_knee: rleg.knee,
    left_ankle: lleg.ankle,
    right_ankle: rleg.ankle,
    left_heel: add(lleg.ankle, 0, -0.05, -0.05),
    right_heel: add(rleg.ankle, 0, -0.05, -0.05),
    left_foot_index: add(lleg.ankle, 0, -0.07, 0.12),
    right_foot_index: add(rleg.ankle, 0, -0.07, 0.12),
  };
  return LANDMARK_NAMES.map((name) => byName[name]);
}

/** Pinhole projection of the walker for the 2D (stereo-path) mode. */
export function projectTo2D(pose: Pose): Pose {
  const fx = 800;
  const fy = 800;
  const cx = 320;
  const cy = 240;
  const depthOffset = 3.0; // camera at origin looking +z, subject pushed back
  return pose.map((p) => {
    const z = p.z + depthOffset;
    return point(
      fx * (p.x / z) + cx,
      fy * (-p.y / z) + cy, // image y grows downward
      0,
      p.confidence,
    );
  });
}
