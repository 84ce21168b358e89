/**
 * Engine wire protocol v1 (little-endian):
 *
 *   header (20 bytes): magic u32 0x504F5345, version u8 = 1, frame_type u8,
 *   count u16, timestamp_us u64, sequence u32
 *   entry (17 bytes):  id u8, x f32, y f32, z f32, confidence f32
 *
 * Sockets and recorded stream files carry each frame behind a u32 length
 * prefix.  Every byte written here must decode in the engine with zero
 * errors; the test suite pins the same hand-derived vectors the engine
 * pins.
 */

export const MAGIC = 0x504f5345;
export const VERSION = 1;
export const HEADER_SIZE = 20;
export const ENTRY_SIZE = 17;

export const FRAME_KEYPOINTS_2D = 0;
export const FRAME_KEYPOINTS_3D = 1;
export const FRAME_JOINT_CONFIG = 2;

export interface WireEntry {
  id: number;
  x: number;
  y: number;
  z: number;
  confidence: number;
}

export interface WireFrame {
  frameType: number;
  timestampUs: bigint;
  sequence: number;
  entries: WireEntry[];
}

export function encodeFrame(frame: WireFrame): Buffer {
  if (frame.entries.length > 0xffff) {
    throw new Error(`too many entries: ${frame.entries.length}`);
  }
  const buf = Buffer.alloc(HEADER_SIZE + ENTRY_SIZE * frame.entries.length);
  buf.writeUInt32LE(MAGIC, 0);
  buf.writeUInt8(VERSION, 4);
  buf.writeUInt8(frame.frameType, 5);
  buf.writeUInt16LE(frame.entries.length, 6);
  buf.writeBigUInt64LE(frame.timestampUs, 8);
  buf.writeUInt32LE(frame.sequence >>> 0, 16);
  let offset = HEADER_SIZE;
  for (const e of frame.entries) {
    if (e.id < 0 || e.id > 255) throw new Error(`entry id ${e.id} out of range`);
    buf.writeUInt8(e.id, offset);
    buf.writeFloatLE(e.x, offset + 1);
    buf.writeFloatLE(e.y, offset + 5);
    buf.writeFloatLE(e.z, offset + 9);
    buf.writeFloatLE(e.confidence, offset + 13);
    offset += ENTRY_SIZE;
  }
  return buf;
}

export class WireError extends Error {}

export function decodeFrame(buf: Buffer): WireFrame {
  if (buf.length < 4) throw new WireError("buffer too short for magic");
  if (buf.readUInt32LE(0) !== MAGIC) {
    throw new WireError(`bad magic 0x${buf.readUInt32LE(0).toString(16)}`);
  }
  if (buf.length < HEADER_SIZE) throw new WireError("buffer too short for header");
  const version = buf.readUInt8(4);
  if (version !== VERSION) throw new WireError(`unsupported version ${version}`);
  const frameType = buf.readUInt8(5);
  const count = buf.readUInt16LE(6);
  const expected = HEADER_SIZE + ENTRY_SIZE * count;
  if (buf.length < expected) throw new WireError("truncated frame");
  if (buf.length !== expected) throw new WireError("count mismatch");
  const timestampUs = buf.readBigUInt64LE(8);
  const sequence = buf.readUInt32LE(16);
  const entries: WireEntry[] = [];
  for (let i = 0; i < count; i++) {
    const off = HEADER_SIZE + i * ENTRY_SIZE;
    entries.push({
      id: buf.readUInt8(off),
      x: buf.readFloatLE(off + 1),
      y: buf.readFloatLE(off + 5),
      z: buf.readFloatLE(off + 9),
      confidence: buf.readFloatLE(off + 13),
    });
  }
  return { frameType, timestampUs, sequence, entries };
}

/** One frame behind its length prefix, the framing sockets and files use. */
export function framed(payload: Buffer): Buffer {
  const head = Buffer.alloc(4);
  head.writeUInt32LE(payload.length, 0);
  return Buffer.concat([head, payload]);
}

/** Incremental parser for a length-prefixed byte stream. */
export class StreamParser {
  private buffer = Buffer.alloc(0);

  push(chunk: Buffer): Buffer[] {
    this.buffer = Buffer.concat([this.buffer, chunk]);
    const out: Buffer[] = [];
    while (this.buffer.length >= 4) {
      const length = this.buffer.readUInt32LE(0);
      if (this.buffer.length < 4 + length) break;
      out.push(this.buffer.subarray(4, 4 + length));
      this.buffer = this.buffer.subarray(4 + length);
    }
    return out;
  }
}
