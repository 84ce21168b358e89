"""Binary frame codec, protocol v1.

Layout (all little-endian):

    header, 20 bytes:
        magic      u32  0x504F5345 (bytes 45 53 4F 50 on the wire)
        version    u8   1
        frame_type u8   0 = keypoints2d, 1 = keypoints3d, 2 = joint_config
        count      u16  number of entries
        timestamp  u64  producer microseconds
        sequence   u32  producer frame counter
    entry, 17 bytes each:
        id         u8
        x, y, z    f32
        confidence f32

For keypoint frames an entry is a landmark position; 2D frames carry
(u, v) in x and y with z = 0.  For joint configurations an entry is a
rotation vector (axis * angle) and the confidence column carries the
freshness flag: 1.0 fresh, 0.0 stale.  Values are stored at f32
precision, so decode(encode(f)) == f holds exactly for frames built
through :func:`WireFrame.create`, which quantizes.

Sockets and recorded stream files carry the identical bytes, each frame
prefixed with a u32 length, so files and sockets are interchangeable.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import BinaryIO, Iterator

import numpy as np

from .errors import (
    BadMagic,
    CountMismatch,
    SchemeMismatch,
    TruncatedFrame,
    UnsupportedVersion,
)
from .geometry import Vec3
from .rig import AvatarRig, JointConfiguration
from .schemes import KeypointFrame, LandmarkPoint, LandmarkScheme, SpaceTag

MAGIC = 0x504F5345
VERSION = 1

FRAME_KEYPOINTS_2D = 0
FRAME_KEYPOINTS_3D = 1
FRAME_JOINT_CONFIG = 2

_HEADER = struct.Struct("<IBBHQI")
_ENTRY = struct.Struct("<Bffff")
HEADER_SIZE = _HEADER.size  # 20
ENTRY_SIZE = _ENTRY.size  # 17

_LENGTH_PREFIX = struct.Struct("<I")


def _f32(x: float) -> float:
    return float(np.float32(x))


@dataclass(frozen=True, slots=True)
class WireEntry:
    entry_id: int
    x: float
    y: float
    z: float
    confidence: float


@dataclass(frozen=True, slots=True)
class WireFrame:
    frame_type: int
    timestamp_us: int
    sequence: int
    entries: tuple[WireEntry, ...]

    @staticmethod
    def create(
        frame_type: int,
        timestamp_us: int,
        sequence: int,
        entries: list[tuple[int, float, float, float, float]],
    ) -> "WireFrame":
        """Build a frame, quantizing values to wire (f32) precision."""
        return WireFrame(
            frame_type=frame_type,
            timestamp_us=timestamp_us,
            sequence=sequence,
            entries=tuple(
                WireEntry(eid, _f32(x), _f32(y), _f32(z), _f32(c))
                for eid, x, y, z, c in entries
            ),
        )


def encode_frame(frame: WireFrame) -> bytes:
    """Serialize one frame. Values must already be f32-representable
    (guaranteed by WireFrame.create and by decode_frame)."""
    if not 0 <= frame.frame_type <= 255:
        raise ValueError(f"frame_type {frame.frame_type} out of range")
    if len(frame.entries) > 0xFFFF:
        raise ValueError(f"too many entries: {len(frame.entries)}")
    parts = [
        _HEADER.pack(
            MAGIC,
            VERSION,
            frame.frame_type,
            len(frame.entries),
            frame.timestamp_us,
            frame.sequence,
        )
    ]
    for e in frame.entries:
        if not 0 <= e.entry_id <= 255:
            raise ValueError(f"entry id {e.entry_id} out of range")
        parts.append(_ENTRY.pack(e.entry_id, e.x, e.y, e.z, e.confidence))
    return b"".join(parts)


def decode_frame(buf: bytes) -> WireFrame:
    """Parse one frame from a complete buffer.

    Magic and version are checked before any payload parsing; a buffer
    whose length disagrees with the declared count is rejected.
    """
    if len(buf) < 4:
        raise TruncatedFrame(f"buffer of {len(buf)} bytes cannot hold the magic")
    (magic,) = struct.unpack_from("<I", buf, 0)
    if magic != MAGIC:
        raise BadMagic(f"bad magic 0x{magic:08X}, expected 0x{MAGIC:08X}")
    if len(buf) < HEADER_SIZE:
        raise TruncatedFrame(f"buffer of {len(buf)} bytes cannot hold the header")
    _, version, frame_type, count, timestamp_us, sequence = _HEADER.unpack_from(buf, 0)
    if version != VERSION:
        raise UnsupportedVersion(f"protocol version {version} not supported (want {VERSION})")
    expected = HEADER_SIZE + ENTRY_SIZE * count
    if len(buf) < expected:
        raise TruncatedFrame(
            f"declared {count} entries need {expected} bytes, buffer has {len(buf)}"
        )
    if len(buf) != expected:
        raise CountMismatch(
            f"declared {count} entries need {expected} bytes, buffer has {len(buf)}"
        )
    entries = tuple(
        WireEntry(*_ENTRY.unpack_from(buf, HEADER_SIZE + i * ENTRY_SIZE)) for i in range(count)
    )
    return WireFrame(frame_type, timestamp_us, sequence, entries)


# --- conversions to engine types --------------------------------------------

def keypoints_to_wire(frame: KeypointFrame) -> WireFrame:
    ftype = FRAME_KEYPOINTS_2D if frame.space == SpaceTag.CAMERA2D else FRAME_KEYPOINTS_3D
    return WireFrame.create(
        ftype,
        frame.timestamp_us,
        frame.sequence,
        [
            (i, p.position.x, p.position.y, p.position.z, p.confidence)
            for i, p in enumerate(frame.points)
        ],
    )


def wire_to_keypoints(wf: WireFrame, scheme: LandmarkScheme) -> KeypointFrame:
    if wf.frame_type not in (FRAME_KEYPOINTS_2D, FRAME_KEYPOINTS_3D):
        raise SchemeMismatch(f"frame type {wf.frame_type} is not a keypoint frame")
    if len(wf.entries) != scheme.count:
        raise SchemeMismatch(
            f"frame carries {len(wf.entries)} landmarks, scheme "
            f"{scheme.name!r} wants {scheme.count}"
        )
    points = [LandmarkPoint(Vec3(0.0, 0.0, 0.0), 0.0)] * scheme.count
    seen: set[int] = set()
    for e in wf.entries:
        if e.entry_id >= scheme.count or e.entry_id in seen:
            raise SchemeMismatch(
                f"landmark id {e.entry_id} invalid or repeated for scheme {scheme.name!r}"
            )
        seen.add(e.entry_id)
        points[e.entry_id] = LandmarkPoint(Vec3(e.x, e.y, e.z), e.confidence)
    space = SpaceTag.CAMERA2D if wf.frame_type == FRAME_KEYPOINTS_2D else SpaceTag.WORLD3D
    return KeypointFrame(
        timestamp_us=wf.timestamp_us,
        sequence=wf.sequence,
        scheme=scheme,
        points=tuple(points),
        space=space,
    )


def joint_config_to_wire(config: JointConfiguration, sequence: int,
                         timestamp_us: int | None = None) -> WireFrame:
    ts = config.timestamp_us if timestamp_us is None else timestamp_us
    conf = 0.0 if config.stale_flag else 1.0
    return WireFrame.create(
        FRAME_JOINT_CONFIG,
        ts,
        sequence,
        [(i, r.x, r.y, r.z, conf) for i, r in enumerate(config.rotations)],
    )


def wire_to_joint_config(wf: WireFrame, rig: AvatarRig) -> JointConfiguration:
    if wf.frame_type != FRAME_JOINT_CONFIG:
        raise SchemeMismatch(f"frame type {wf.frame_type} is not a joint configuration")
    if len(wf.entries) != len(rig.joints):
        raise SchemeMismatch(
            f"frame carries {len(wf.entries)} joints, rig {rig.name!r} has {len(rig.joints)}"
        )
    rotations: list[Vec3] = [Vec3(0.0, 0.0, 0.0)] * len(rig.joints)
    stale = False
    for e in wf.entries:
        if e.entry_id >= len(rig.joints):
            raise SchemeMismatch(f"joint id {e.entry_id} out of range for rig {rig.name!r}")
        rotations[e.entry_id] = Vec3(e.x, e.y, e.z)
        stale = stale or e.confidence < 0.5
    return JointConfiguration(
        rig=rig, rotations=tuple(rotations), timestamp_us=wf.timestamp_us, stale_flag=stale
    )


# --- length-prefixed stream framing ------------------------------------------

MAX_FRAME_BYTES = HEADER_SIZE + ENTRY_SIZE * 0xFFFF


def write_stream_frame(fp: BinaryIO, payload: bytes) -> None:
    fp.write(_LENGTH_PREFIX.pack(len(payload)))
    fp.write(payload)


def read_stream_frame(fp: BinaryIO) -> bytes | None:
    """Read one length-prefixed frame; None on clean end of stream."""
    head = fp.read(4)
    if not head:
        return None
    if len(head) < 4:
        raise TruncatedFrame("stream ended inside a length prefix")
    (length,) = _LENGTH_PREFIX.unpack(head)
    if length > MAX_FRAME_BYTES:
        raise CountMismatch(f"frame length {length} exceeds protocol maximum")
    payload = fp.read(length)
    if len(payload) < length:
        raise TruncatedFrame(f"stream ended inside a frame ({len(payload)}/{length} bytes)")
    return payload


def iter_stream_file(path: str | Path) -> Iterator[WireFrame]:
    """Decode every frame of a recorded stream file, in order."""
    with open(path, "rb") as fp:
        while True:
            payload = read_stream_frame(fp)
            if payload is None:
                return
            yield decode_frame(payload)


def write_stream_file(path: str | Path, frames: list[WireFrame]) -> None:
    with open(path, "wb") as fp:
        for frame in frames:
            write_stream_frame(fp, encode_frame(frame))
