/**
 * Pose estimation backends.
 *
 * "synthetic" is the model-free deterministic backend used for tests,
 * demos, and protocol conformance.  The mediapipe backend wraps the
 * tasks-vision PoseLandmarker (lite/full/heavy tiers); it is loaded
 * dynamically so the adapter has no hard dependency on the model stack,
 * and it needs network access once to fetch the task file.
 */
import { Pose } from "./landmarks.js";
import { syntheticPose } from "./synthetic.js";

export type ModelTier = "lite" | "full" | "heavy" | "synthetic";

export interface FrameData {
  index: number;
  width: number;
  height: number;
  /** planar 4:2:0 YUV, when the source decodes video */
  yuv?: Buffer;
  /** mean luma 0..1, cheap content signal for the synthetic backend */
  luma?: number;
}

export interface PoseBackend {
  readonly name: string;
  /** null means no person detected; the adapter skips such frames. */
  estimate(frame: FrameData, timestampUs: bigint): Promise<Pose | null>;
  close(): Promise<void>;
}

export class SyntheticBackend implements PoseBackend {
  readonly name = "synthetic";

  async estimate(frame: FrameData, timestampUs: bigint): Promise<Pose | null> {
    return syntheticPose(timestampUs, frame.luma ?? 0);
  }

  async close(): Promise<void> {}
}

const TASK_URLS: Record<string, string> = {
  lite: "https://storage.googleapis.com/mediapipe-models/pose_landmarker/pose_landmarker_lite/float16/latest/pose_landmarker_lite.task",
  full: "https://storage.googleapis.com/mediapipe-models/pose_landmarker/pose_landmarker_full/float16/latest/pose_landmarker_full.task",
  heavy: "https://storage.googleapis.com/mediapipe-models/pose_landmarker/pose_landmarker_heavy/float16/latest/pose_landmarker_heavy.task",
};

/** Planar 4:2:0 YUV to RGBA, for backends that want image pixels. */
export function yuv420ToRgba(yuv: Buffer, width: number, height: number): Uint8ClampedArray {
  const out = new Uint8ClampedArray(width * height * 4);
  const ySize = width * height;
  const cw = width / 2;
  for (let row = 0; row < height; row++) {
    for (let col = 0; col < width; col++) {
      const y = yuv[row * width + col];
      const u = yuv[ySize + (row >> 1) * cw + (col >> 1)] - 128;
      const v = yuv[ySize + ySize / 4 + (row >> 1) * cw + (col >> 1)] - 128;
      const i = (row * width + col) * 4;
      out[i] = y + 1.402 * v;
      out[i + 1] = y - 0.344136 * u - 0.714136 * v;
      out[i + 2] = y + 1.772 * u;
      out[i + 3] = 255;
    }
  }
  return out;
}

/**
 * MediaPipe world landmarks arrive in the image-aligned convention
 * (y down, z toward the camera); the wire carries the engine frame
 * (y up, z toward the viewer).
 */
export function mediapipeWorldToEngine(lm: {
  x: number;
  y: number;
  z: number;
  visibility?: number;
}): { x: number; y: number; z: number; confidence: number } {
  return { x: lm.x, y: -lm.y, z: -lm.z, confidence: lm.visibility ?? 1.0 };
}

class MediaPipeBackend implements PoseBackend {
  readonly name: string;

  private constructor(
    private landmarker: {
      detectForVideo(image: unknown, timestampMs: number): {
        worldLandmarks: Array<Array<{ x: number; y: number; z: number; visibility?: number }>>;
      };
      close(): void;
    },
    tier: string,
  ) {
    this.name = `mediapipe-${tier}`;
  }

  static async create(tier: "lite" | "full" | "heavy"): Promise<MediaPipeBackend> {
    let vision: typeof import("@mediapipe/tasks-vision");
    try {
      // @ts-ignore optional dependency, resolved at runtime only
      vision = await import("@mediapipe/tasks-vision");
    } catch (err) {
      throw new Error(
        "the mediapipe backend needs the optional @mediapipe/tasks-vision " +
          `package (npm install @mediapipe/tasks-vision): ${err}`,
      );
    }
    const fileset = await vision.FilesetResolver.forVisionTasks(
      "https://cdn.jsdelivr.net/npm/@mediapipe/tasks-vision@latest/wasm",
    );
    const landmarker = await vision.PoseLandmarker.createFromOptions(fileset, {
      baseOptions: { modelAssetPath: TASK_URLS[tier] },
      runningMode: "VIDEO",
      numPoses: 1,
    });
    return new MediaPipeBackend(landmarker, tier);
  }

  async estimate(frame: FrameData, timestampUs: bigint): Promise<Pose | null> {
    if (!frame.yuv) return null;
    const rgba = yuv420ToRgba(frame.yuv, frame.width, frame.height);
    const image = { data: rgba, width: frame.width, height: frame.height };
    const result = this.landmarker.detectForVideo(image, Number(timestampUs / 1000n));
    const world = result.worldLandmarks?.[0];
    if (!world || world.length === 0) return null;
    return world.map(mediapipeWorldToEngine);
  }

  async close(): Promise<void> {
    this.landmarker.close();
  }
}

export async function createBackend(tier: ModelTier): Promise<PoseBackend> {
  if (tier === "synthetic") return new SyntheticBackend();
  return MediaPipeBackend.create(tier);
}
