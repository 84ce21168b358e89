/**
 * The 33-landmark full-body scheme, in wire id order.  Must stay in sync
 * with the engine's shipped scheme file; the conformance tests compare
 * counts and ordering across the protocol boundary.
 */
export const LANDMARK_NAMES = [
  "nose",
  "left_eye_inner",
  "left_eye",
  "left_eye_outer",
  "right_eye_inner",
  "right_eye",
  "right_eye_outer",
  "left_ear",
  "right_ear",
  "mouth_left",
  "mouth_right",
  "left_shoulder",
  "right_shoulder",
  "left_elbow",
  "right_elbow",
  "left_wrist",
  "right_wrist",
  "left_pinky",
  "right_pinky",
  "left_index",
  "right_index",
  "left_thumb",
  "right_thumb",
  "left_hip",
  "right_hip",
  "left_knee",
  "right_knee",
  "left_ankle",
  "right_ankle",
  "left_heel",
  "right_heel",
  "left_foot_index",
  "right_foot_index",
] as const;

export const LANDMARK_COUNT = LANDMARK_NAMES.length;

export interface Landmark {
  x: number;
  y: number;
  z: number;
  confidence: number;
}

export type Pose = Landmark[]; // length LANDMARK_COUNT, wire id order
