/**
 * The adapter proper: drive a pose backend from a frame source and push
 * every detection onto the engine wire, to a socket or a recorded file.
 *
 * No retargeting and no IK happen here; the adapter only produces
 * protocol-conformant keypoint frames.  Network sends never block the
 * capture loop: frames go through a depth-1 latest-wins buffer mirroring
 * the engine's mailbox semantics, and a lost engine connection triggers
 * reconnection with exponential backoff while capture continues.
 */
import { createWriteStream, WriteStream } from "node:fs";
import net from "node:net";

import { createBackend, FrameData, ModelTier, PoseBackend } from "./backends.js";
import { Pose } from "./landmarks.js";
import { projectTo2D } from "./synthetic.js";
import {
  encodeFrame,
  framed,
  FRAME_KEYPOINTS_2D,
  FRAME_KEYPOINTS_3D,
  WireFrame,
} from "./wire.js";
import { loadY4M, meanLuma } from "./y4m.js";

export interface AdapterConfig {
  model: ModelTier;
  minConfidence: number;
  twoD: boolean;
}

export const DEFAULT_CONFIG: AdapterConfig = {
  model: "full",
  minConfidence: 0.5,
  twoD: false,
};

export class CameraUnavailable extends Error {}

export interface FrameOutput {
  push(frame: Buffer): void;
  close(): Promise<void>;
  readonly drops: number;
}

/** Writes length-prefixed frames to a recorded-stream file. */
export class FileOutput implements FrameOutput {
  readonly drops = 0;
  private stream: WriteStream;

  constructor(path: string) {
    this.stream = createWriteStream(path);
  }

  push(frame: Buffer): void {
    this.stream.write(framed(frame));
  }

  close(): Promise<void> {
    return new Promise((resolve, reject) => {
      this.stream.end((err?: Error) => (err ? reject(err) : resolve()));
    });
  }
}

/**
 * Socket sender with a depth-1 latest-wins buffer and reconnect/backoff.
 * push() never blocks; a frame waiting behind a slow link is replaced by
 * a newer one (counted as a drop).
 */
export class SocketOutput implements FrameOutput {
  drops = 0;
  private slot: Buffer | null = null;
  private socket: net.Socket | null = null;
  private connected = false;
  private writing = false;
  private closing = false;
  private backoffMs = 100;
  private retryTimer: NodeJS.Timeout | null = null;

  constructor(
    private host: string,
    private port: number,
    private log: (msg: string) => void = () => {},
  ) {
    this.connect();
  }

  private connect(): void {
    if (this.closing) return;
    const socket = net.createConnection({ host: this.host, port: this.port });
    socket.on("connect", () => {
      this.connected = true;
      this.backoffMs = 100;
      this.log(`connected to ${this.host}:${this.port}`);
      this.flush();
    });
    const onGone = () => {
      if (this.connected) this.log(`lost ${this.host}:${this.port}; retrying`);
      this.connected = false;
      this.socket = null;
      socket.destroy();
      if (!this.closing && this.retryTimer === null) {
        this.retryTimer = setTimeout(() => {
          this.retryTimer = null;
          this.connect();
        }, this.backoffMs);
        this.backoffMs = Math.min(this.backoffMs * 2, 3000);
      }
    };
    socket.on("error", onGone);
    socket.on("close", onGone);
    this.socket = socket;
  }

  push(frame: Buffer): void {
    if (this.slot !== null) this.drops++;
    this.slot = frame;
    this.flush();
  }

  private flush(): void {
    if (!this.connected || this.writing || this.slot === null || this.socket === null) {
      return;
    }
    const frame = this.slot;
    this.slot = null;
    this.writing = true;
    this.socket.write(framed(frame), () => {
      this.writing = false;
      this.flush();
    });
  }

  close(): Promise<void> {
    this.closing = true;
    if (this.retryTimer !== null) clearTimeout(this.retryTimer);
    return new Promise((resolve) => {
      if (this.socket === null || !this.connected) {
        this.socket?.destroy();
        resolve();
        return;
      }
      // give the last queued write a moment to land
      const sock = this.socket;
      setTimeout(() => {
        sock.end(() => resolve());
      }, 20);
    });
  }
}

function bestConfidence(pose: Pose): number {
  let total = 0;
  for (const p of pose) total += p.confidence;
  return total / pose.length;
}

export function poseToWire(
  pose: Pose,
  timestampUs: bigint,
  sequence: number,
  twoD: boolean,
): WireFrame {
  const points = twoD ? projectTo2D(pose) : pose;
  return {
    frameType: twoD ? FRAME_KEYPOINTS_2D : FRAME_KEYPOINTS_3D,
    timestampUs,
    sequence,
    entries: points.map((p, id) => ({
      id,
      x: p.x,
      y: p.y,
      z: p.z,
      confidence: p.confidence,
    })),
  };
}

export interface EmitStats {
  framesRead: number;
  framesEmitted: number;
  skippedNoDetection: number;
}

/**
 * Run the backend over a recorded video and emit one wire frame per
 * detection.  Timestamps follow the video clock; sequence numbers are the
 * source frame indices, so skipped detections leave visible gaps but the
 * sequence stays strictly increasing.
 */
export async function emitFromVideo(
  path: string,
  config: AdapterConfig,
  output: FrameOutput,
  realtime = false,
): Promise<EmitStats> {
  const video = loadY4M(path);
  const backend = await createBackend(config.model);
  const periodUs = (1_000_000 * video.fpsDen) / video.fpsNum;
  const stats: EmitStats = { framesRead: 0, framesEmitted: 0, skippedNoDetection: 0 };
  try {
    for (let i = 0; i < video.frames.length; i++) {
      stats.framesRead++;
      const timestampUs = BigInt(Math.round(i * periodUs));
      const frame: FrameData = {
        index: i,
        width: video.width,
        height: video.height,
        yuv: video.frames[i],
        luma: meanLuma(video, i),
      };
      const pose = await backend.estimate(frame, timestampUs);
      if (pose === null || bestConfidence(pose) < config.minConfidence) {
        stats.skippedNoDetection++;
        continue;
      }
      output.push(encodeFrame(poseToWire(pose, timestampUs, i, config.twoD)));
      stats.framesEmitted++;
      if (realtime) {
        await new Promise((r) => setTimeout(r, periodUs / 1000));
      }
    }
  } finally {
    await backend.close();
  }
  return stats;
}

export interface LiveSource {
  name: string;
  nextFrame(): Promise<FrameData | null>; // null: source ended
  fps: number;
  close(): Promise<void>;
}

/** Camera capture requires a grabber this runtime does not ship. */
export function openCamera(index: number): LiveSource {
  throw new CameraUnavailable(
    `cannot open camera ${index}: no video capture backend in this runtime; ` +
      "use --source synthetic, or feed recorded video with from-video",
  );
}

export function syntheticLiveSource(fps: number, durationS: number | null): LiveSource {
  let index = 0;
  const total = durationS === null ? null : Math.floor(fps * durationS);
  return {
    name: "synthetic",
    fps,
    async nextFrame(): Promise<FrameData | null> {
      if (total !== null && index >= total) return null;
      return { index: index++, width: 640, height: 480 };
    },
    async close(): Promise<void> {},
  };
}

/**
 * Live capture: frames from a source, detections onto the wire, until the
 * source ends or the caller aborts.  Send failures never stall capture.
 */
export async function captureLoop(
  source: LiveSource,
  config: AdapterConfig,
  output: FrameOutput,
  signal?: AbortSignal,
  backend?: PoseBackend,
): Promise<EmitStats> {
  const model = backend ?? (await createBackend(config.model));
  const periodMs = 1000 / source.fps;
  const stats: EmitStats = { framesRead: 0, framesEmitted: 0, skippedNoDetection: 0 };
  const start = Date.now();
  let sequence = 0;
  try {
    while (!signal?.aborted) {
      const frame = await source.nextFrame();
      if (frame === null) break;
      stats.framesRead++;
      const timestampUs = BigInt(Math.round(frame.index * (1e6 / source.fps)));
      const pose = await model.estimate(frame, timestampUs);
      if (pose === null || bestConfidence(pose) < config.minConfidence) {
        stats.skippedNoDetection++;
      } else {
        output.push(encodeFrame(poseToWire(pose, timestampUs, sequence++, config.twoD)));
        stats.framesEmitted++;
      }
      const due = start + stats.framesRead * periodMs;
      const wait = due - Date.now();
      if (wait > 0) await new Promise((r) => setTimeout(r, wait));
    }
  } finally {
    await model.close();
    await source.close();
  }
  return stats;
}
