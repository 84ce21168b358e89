/**
 * Minimal YUV4MPEG2 reader.  Uncompressed and self-describing, so the
 * sample video needs no codec stack; only 4:2:0 subsampling is handled.
 */
import { readFileSync } from "node:fs";

export interface Y4MVideo {
  width: number;
  height: number;
  fpsNum: number;
  fpsDen: number;
  /** Per-frame planar YUV bytes (Y then U then V). */
  frames: Buffer[];
}

export class BadVideo extends Error {}

export function parseY4M(data: Buffer): Y4MVideo {
  const headerEnd = data.indexOf(0x0a);
  if (headerEnd < 0) throw new BadVideo("missing stream header");
  const header = data.subarray(0, headerEnd).toString("ascii");
  if (!header.startsWith("YUV4MPEG2")) throw new BadVideo("not a YUV4MPEG2 stream");
  let width = 0;
  let height = 0;
  let fpsNum = 30;
  let fpsDen = 1;
  let subsampling = "C420";
  for (const param of header.split(" ").slice(1)) {
    const tag = param[0];
    const value = param.slice(1);
    if (tag === "W") width = parseInt(value, 10);
    else if (tag === "H") height = parseInt(value, 10);
    else if (tag === "F") {
      const [num, den] = value.split(":");
      fpsNum = parseInt(num, 10);
      fpsDen = parseInt(den, 10);
    } else if (tag === "C") subsampling = `C${value}`;
  }
  if (!width || !height) throw new BadVideo(`bad geometry ${width}x${height}`);
  if (!subsampling.startsWith("C420")) {
    throw new BadVideo(`unsupported subsampling ${subsampling}; only 4:2:0`);
  }
  const frameBytes = width * height + 2 * ((width / 2) * (height / 2));
  const frames: Buffer[] = [];
  let offset = headerEnd + 1;
  while (offset < data.length) {
    const markerEnd = data.indexOf(0x0a, offset);
    if (markerEnd < 0) throw new BadVideo("truncated frame marker");
    const marker = data.subarray(offset, markerEnd).toString("ascii");
    if (!marker.startsWith("FRAME")) throw new BadVideo(`bad frame marker ${marker}`);
    const start = markerEnd + 1;
    if (start + frameBytes > data.length) throw new BadVideo("truncated frame data");
    frames.push(data.subarray(start, start + frameBytes));
    offset = start + frameBytes;
  }
  return { width, height, fpsNum, fpsDen, frames };
}

export function loadY4M(path: string): Y4MVideo {
  let data: Buffer;
  try {
    data = readFileSync(path);
  } catch (err) {
    throw new BadVideo(`cannot read ${path}: ${err}`);
  }
  return parseY4M(data);
}

/** Mean luma of a frame, [0, 1]; lets synthetic poses react to content. */
export function meanLuma(video: Y4MVideo, index: number): number {
  const frame = video.frames[index];
  const ySize = video.width * video.height;
  let total = 0;
  for (let i = 0; i < ySize; i++) total += frame[i];
  return total / (ySize * 255);
}
