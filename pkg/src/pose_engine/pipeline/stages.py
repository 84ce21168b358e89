"""Pipeline stages: sources, math stages, and sinks.

Every stage exposes one non-blocking ``step(now_us)`` returning whether it
did work; the step-mode runner drives all stages off a virtual clock for
deterministic tests, the threaded runner drives each off the wall clock.
Stages communicate only through depth-1 mailboxes, so a slow or dead
stage never blocks its neighbors.
"""
from __future__ import annotations

import enum
import logging
import socket
from dataclasses import dataclass, replace
from pathlib import Path
from typing import BinaryIO, Callable, Iterator

from ..errors import (
    BindError,
    EmptyResult,
    EngineError,
    SyncWindowExceeded,
)
from ..geometry import Vec3
from ..ik import IkOptions, _partial_fk, chain_between, forward_kinematics, solve_ik
from ..retarget import RetargetMap, retarget_frame
from ..rig import AvatarRig, JointConfiguration, rest_configuration
from ..schemes import KeypointFrame, LandmarkScheme, validate_frame
from ..stereo import CameraPair, lift_frame
from ..synthetic import synthetic_frame
from ..wire import (
    FRAME_JOINT_CONFIG,
    FRAME_KEYPOINTS_2D,
    FRAME_KEYPOINTS_3D,
    WireFrame,
    decode_frame,
    encode_frame,
    iter_stream_file,
    joint_config_to_wire,
    keypoints_to_wire,
    read_stream_frame,
    wire_to_joint_config,
    wire_to_keypoints,
    write_stream_frame,
)
from .mailbox import Mailbox
from .stale import FreshStatus, StalePolicy, apply_stale_policy

log = logging.getLogger("pose_engine.pipeline")


class MsgKind(enum.Enum):
    KEYPOINTS = "keypoints"
    PAIR = "pair"
    CONFIG = "config"


@dataclass(frozen=True)
class FrameMsg:
    kind: MsgKind
    payload: object
    sequence: int
    produced_us: int  # producer timestamp from the wire
    arrival_us: int  # pipeline clock when the source emitted it


class Stage:
    """Base stage; subclasses implement step()."""

    def __init__(self, name: str):
        self.name = name
        self.inbox: Mailbox | None = None
        self.outbox: Mailbox | None = None
        self.done = False

    def start(self, now_us: int) -> None:  # opens files/sockets
        pass

    def step(self, now_us: int) -> bool:
        raise NotImplementedError

    def close(self) -> None:
        pass

    # metrics hooks filled by the runner's harness
    def count_skip(self) -> None:
        pass


# --- decoding ----------------------------------------------------------------

@dataclass(frozen=True)
class FrameDecoder:
    """Wire frame -> engine payload for a configured pipeline."""

    scheme: LandmarkScheme
    rig: AvatarRig
    remap_z_up: bool = False

    def decode(self, wf: WireFrame) -> FrameMsg | None:
        raise NotImplementedError

    def payload_of(self, wf: WireFrame):
        if wf.frame_type in (FRAME_KEYPOINTS_2D, FRAME_KEYPOINTS_3D):
            frame = wire_to_keypoints(wf, self.scheme)
            if self.remap_z_up:
                frame = frame.remapped()
            validate_frame(frame, self.scheme)
            return MsgKind.KEYPOINTS, frame
        if wf.frame_type == FRAME_JOINT_CONFIG:
            return MsgKind.CONFIG, wire_to_joint_config(wf, self.rig)
        raise EngineError(f"unsupported frame type {wf.frame_type}")


# --- sources -----------------------------------------------------------------

class FileReplaySource(Stage):
    """Replays a recorded stream at its recorded cadence (scaled by speed)."""

    def __init__(self, name: str, path: str | Path, decoder: FrameDecoder,
                 speed: float = 1.0):
        super().__init__(name)
        self.path = Path(path)
        self.decoder = decoder
        self.speed = speed
        self._iter: Iterator[WireFrame] | None = None
        self._pending: WireFrame | None = None
        self._first_ts: int | None = None
        self._start_us = 0
        self.last_sequence: int | None = None

    def start(self, now_us: int) -> None:
        self._iter = iter_stream_file(self.path)
        self._start_us = now_us
        self._advance()

    def _advance(self) -> None:
        assert self._iter is not None
        self._pending = next(self._iter, None)
        if self._pending is None:
            self.done = True

    def _due(self) -> int:
        assert self._pending is not None
        if self._first_ts is None:
            return self._start_us
        return self._start_us + int((self._pending.timestamp_us - self._first_ts) / self.speed)

    def step(self, now_us: int) -> bool:
        did = False
        while self._pending is not None and now_us >= self._due():
            wf = self._pending
            if self._first_ts is None:
                self._first_ts = wf.timestamp_us
            self._advance()
            # drop out-of-order frames: timestamps must not go backwards
            if self.last_sequence is not None and wf.sequence <= self.last_sequence:
                self.count_skip()
                continue
            self.last_sequence = wf.sequence
            try:
                kind, payload = self.decoder.payload_of(wf)
            except EngineError as exc:
                log.warning("%s: dropping bad frame: %s", self.name, exc)
                self.count_skip()
                continue
            self.outbox.put(
                FrameMsg(kind, payload, wf.sequence, wf.timestamp_us, now_us)
            )
            did = True
        return did


class SyntheticSource(Stage):
    """Emits the deterministic synthetic person at a fixed rate."""

    def __init__(self, name: str, scheme: LandmarkScheme, fps: float,
                 duration_s: float | None):
        super().__init__(name)
        self.scheme = scheme
        self.period_us = int(round(1e6 / fps))
        self.total = None if duration_s is None else int(fps * duration_s)
        self._n = 0
        self._start_us = 0

    def start(self, now_us: int) -> None:
        self._start_us = now_us

    def step(self, now_us: int) -> bool:
        did = False
        while (self.total is None or self._n < self.total) and (
            now_us >= self._start_us + self._n * self.period_us
        ):
            ts = self._start_us + self._n * self.period_us
            frame = synthetic_frame(self.scheme, ts, self._n)
            self.outbox.put(FrameMsg(MsgKind.KEYPOINTS, frame, self._n, ts, now_us))
            self._n += 1
            did = True
        if self.total is not None and self._n >= self.total:
            self.done = True
        return did


class DualFileSource(Stage):
    """Replays two recorded 2D streams, pairing frames by timestamp."""

    def __init__(self, name: str, path_a: str | Path, path_b: str | Path,
                 decoder: FrameDecoder, sync_window_us: int, speed: float = 1.0):
        super().__init__(name)
        self.paths = (Path(path_a), Path(path_b))
        self.decoder = decoder
        self.sync_window_us = sync_window_us
        self.speed = speed
        self._iters: list[Iterator[WireFrame] | None] = [None, None]
        self._heads: list[WireFrame | None] = [None, None]
        self._first_ts: int | None = None
        self._start_us = 0
        self._seq = 0
        self.skipped = 0

    def start(self, now_us: int) -> None:
        self._start_us = now_us
        self._iters = [iter_stream_file(p) for p in self.paths]
        self._heads = [next(it, None) for it in self._iters]

    def _advance(self, i: int) -> None:
        self._heads[i] = next(self._iters[i], None)

    def step(self, now_us: int) -> bool:
        did = False
        while True:
            a, b = self._heads
            if a is None or b is None:
                self.done = True
                return did
            dt = a.timestamp_us - b.timestamp_us
            if abs(dt) > self.sync_window_us:
                # drop the older view and note it; live cameras drift
                self.skipped += 1
                self.count_skip()
                self._advance(0 if dt < 0 else 1)
                continue
            mean_ts = (a.timestamp_us + b.timestamp_us) // 2
            if self._first_ts is None:
                self._first_ts = mean_ts
            due = self._start_us + int((mean_ts - self._first_ts) / self.speed)
            if now_us < due:
                return did
            try:
                fa = self.decoder.payload_of(a)[1]
                fb = self.decoder.payload_of(b)[1]
            except EngineError as exc:
                log.warning("%s: dropping bad pair: %s", self.name, exc)
                self.count_skip()
                self._advance(0)
                self._advance(1)
                continue
            self.outbox.put(FrameMsg(MsgKind.PAIR, (fa, fb), self._seq, mean_ts, now_us))
            self._seq += 1
            self._advance(0)
            self._advance(1)
            did = True


class _SocketReader:
    """One listening endpoint feeding length-prefixed frames."""

    def __init__(self, host: str, port: int):
        self.host, self.port = host, port
        self.server: socket.socket | None = None
        self.client: socket.socket | None = None
        self.buffer = bytearray()

    def open(self) -> None:
        try:
            server = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
            server.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
            server.bind((self.host, self.port))
            server.listen(1)
            server.setblocking(False)
        except OSError as exc:
            raise BindError(f"cannot listen on {self.host}:{self.port}: {exc}") from exc
        self.server = server

    @property
    def bound_port(self) -> int:
        return self.server.getsockname()[1]

    def pump(self) -> list[bytes]:
        """Accept/read what's available; return complete frame payloads."""
        if self.server is None:
            return []
        if self.client is None:
            try:
                self.client, _ = self.server.accept()
                self.client.setblocking(False)
                self.buffer.clear()
            except BlockingIOError:
                return []
        frames = []
        try:
            while True:
                chunk = self.client.recv(65536)
                if not chunk:  # peer closed; go back to listening
                    self.client.close()
                    self.client = None
                    break
                self.buffer.extend(chunk)
        except BlockingIOError:
            pass
        except OSError:
            if self.client is not None:
                self.client.close()
                self.client = None
        while len(self.buffer) >= 4:
            length = int.from_bytes(self.buffer[:4], "little")
            if len(self.buffer) < 4 + length:
                break
            frames.append(bytes(self.buffer[4 : 4 + length]))
            del self.buffer[: 4 + length]
        return frames

    def close(self) -> None:
        for s in (self.client, self.server):
            if s is not None:
                s.close()
        self.client = self.server = None


class SocketSource(Stage):
    """Listens on host:port for a producer speaking the wire protocol."""

    def __init__(self, name: str, host: str, port: int, decoder: FrameDecoder):
        super().__init__(name)
        self.reader = _SocketReader(host, port)
        self.decoder = decoder
        self.last_sequence: int | None = None

    def start(self, now_us: int) -> None:
        self.reader.open()

    @property
    def bound_port(self) -> int:
        return self.reader.bound_port

    def step(self, now_us: int) -> bool:
        did = False
        for raw in self.reader.pump():
            try:
                wf = decode_frame(raw)
                if self.last_sequence is not None and wf.sequence <= self.last_sequence:
                    self.count_skip()
                    continue
                kind, payload = self.decoder.payload_of(wf)
            except EngineError as exc:
                log.warning("%s: dropping bad frame: %s", self.name, exc)
                self.count_skip()
                continue
            self.last_sequence = wf.sequence
            self.outbox.put(FrameMsg(kind, payload, wf.sequence, wf.timestamp_us, now_us))
            did = True
        return did

    def close(self) -> None:
        self.reader.close()


class DualSocketSource(Stage):
    """Two listening endpoints paired by timestamp within the sync window."""

    def __init__(self, name: str, host: str, ports: tuple[int, int],
                 decoder: FrameDecoder, sync_window_us: int):
        super().__init__(name)
        self.readers = (_SocketReader(host, ports[0]), _SocketReader(host, ports[1]))
        self.decoder = decoder
        self.sync_window_us = sync_window_us
        self._latest: list[WireFrame | None] = [None, None]
        self._seq = 0

    def start(self, now_us: int) -> None:
        for r in self.readers:
            r.open()

    def step(self, now_us: int) -> bool:
        for i, reader in enumerate(self.readers):
            for raw in reader.pump():
                try:
                    self._latest[i] = decode_frame(raw)
                except EngineError:
                    self.count_skip()
        a, b = self._latest
        if a is None or b is None:
            return False
        dt = a.timestamp_us - b.timestamp_us
        if abs(dt) > self.sync_window_us:
            self._latest[0 if dt < 0 else 1] = None
            self.count_skip()
            return False
        try:
            fa = self.decoder.payload_of(a)[1]
            fb = self.decoder.payload_of(b)[1]
        except EngineError as exc:
            log.warning("%s: dropping bad pair: %s", self.name, exc)
            self.count_skip()
            self._latest = [None, None]
            return False
        mean_ts = (a.timestamp_us + b.timestamp_us) // 2
        self.outbox.put(FrameMsg(MsgKind.PAIR, (fa, fb), self._seq, mean_ts, now_us))
        self._seq += 1
        self._latest = [None, None]
        return True

    def close(self) -> None:
        for r in self.readers:
            r.close()


# --- math stages -------------------------------------------------------------

class LiftStage(Stage):
    """Triangulates paired 2D frames into world-frame 3D frames."""

    def __init__(self, name: str, pair: CameraPair, min_confidence: float,
                 sync_window_us: int):
        super().__init__(name)
        self.pair = pair
        self.min_confidence = min_confidence
        self.sync_window_us = sync_window_us

    def step(self, now_us: int) -> bool:
        msg = self.inbox.take()
        if msg is None:
            return False
        fa, fb = msg.payload
        try:
            lifted = lift_frame(fa, fb, self.pair, self.min_confidence, self.sync_window_us)
        except (SyncWindowExceeded, EngineError) as exc:
            log.warning("%s: dropping pair: %s", self.name, exc)
            self.count_skip()
            return True
        self.outbox.put(replace(msg, kind=MsgKind.KEYPOINTS, payload=lifted))
        return True


class RetargetIkStage(Stage):
    """Turns keypoint frames into constrained joint configurations.

    Limbs are solved in anchor order (torso before arms before forearms);
    each chain's target is re-anchored to the freshly solved pose, so a
    forearm hangs off the elbow its own frame produced, not last frame's.
    The previous output seeds each solve, which keeps motion temporally
    coherent and picks the nearest of multiple IK solutions.
    """

    def __init__(self, name: str, rig: AvatarRig, retarget_map: RetargetMap,
                 ik_options: IkOptions, min_confidence: float):
        super().__init__(name)
        self.rig = rig
        self.map = retarget_map
        self.ik_options = ik_options
        self.min_confidence = min_confidence
        self.config = rest_configuration(rig)
        self.chains = {
            entry.name: chain_between(rig, entry.anchor, entry.end_effector)
            for entry in retarget_map.entries
        }
        self.order = sorted(
            retarget_map.entries, key=lambda e: rig.index_of(e.anchor)
        )

    def step(self, now_us: int) -> bool:
        msg = self.inbox.take()
        if msg is None:
            return False
        frame: KeypointFrame = msg.payload
        pose = forward_kinematics(self.rig, self.config)
        try:
            result = retarget_frame(
                frame, self.map, pose, min_confidence=self.min_confidence
            )
        except EmptyResult as exc:
            log.debug("%s: nothing retargetable: %s", self.name, exc)
            self.count_skip()
            return True
        offsets = {
            t.limb: (t, t.target - pose[t.anchor]) for t in result.targets
        }
        config = self.config
        for entry in self.order:
            if entry.name not in offsets:
                continue
            limb_target, offset = offsets[entry.name]
            anchor_pos, _, _ = _partial_fk(self.rig, config, entry.anchor)
            target = Vec3(float(anchor_pos[0]), float(anchor_pos[1]), float(anchor_pos[2])) + offset
            solved = solve_ik(self.chains[entry.name], target, self.ik_options, config)
            config = solved.configuration
        self.config = config.stamped(frame.timestamp_us, stale_flag=False)
        self.outbox.put(replace(msg, kind=MsgKind.CONFIG, payload=self.config))
        return True


class PassthroughStage(Stage):
    """Identity stage: joint-config streams and benchmark plumbing."""

    def step(self, now_us: int) -> bool:
        msg = self.inbox.take()
        if msg is None:
            return False
        self.outbox.put(msg)
        return True


# --- sinks -------------------------------------------------------------------

class OutputWriter:
    def open(self, now_us: int) -> None:
        pass

    def write(self, wf: WireFrame) -> None:
        raise NotImplementedError

    def close(self) -> None:
        pass


class FileWriter(OutputWriter):
    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._fp: BinaryIO | None = None

    def open(self, now_us: int) -> None:
        self._fp = open(self.path, "wb")

    def write(self, wf: WireFrame) -> None:
        write_stream_frame(self._fp, encode_frame(wf))

    def close(self) -> None:
        if self._fp is not None:
            self._fp.close()
            self._fp = None


class CollectWriter(OutputWriter):
    """In-memory writer for tests and the service's one-shot runs."""

    def __init__(self) -> None:
        self.frames: list[WireFrame] = []

    def write(self, wf: WireFrame) -> None:
        self.frames.append(wf)


class NullWriter(OutputWriter):
    def __init__(self) -> None:
        self.count = 0

    def write(self, wf: WireFrame) -> None:
        self.count += 1


class TextWriter(OutputWriter):
    """One line per frame in a stable field order, for plotting."""

    def __init__(self, rig: AvatarRig, stream=None):
        self.rig = rig
        self.stream = stream

    def write(self, wf: WireFrame) -> None:
        import sys

        stream = self.stream or sys.stdout
        fields = [f"seq={wf.sequence}", f"ts_us={wf.timestamp_us}", f"type={wf.frame_type}"]
        if wf.frame_type == FRAME_JOINT_CONFIG:
            fields.append(f"stale={int(wf.entries[0].confidence < 0.5) if wf.entries else 0}")
            for e in wf.entries:
                name = self.rig.joints[e.entry_id].name
                fields.append(f"{name}={e.x:.6f},{e.y:.6f},{e.z:.6f}")
        else:
            for e in wf.entries:
                fields.append(f"p{e.entry_id}={e.x:.6f},{e.y:.6f},{e.z:.6f},{e.confidence:.3f}")
        print(" ".join(fields), file=stream)


class SocketServerWriter(OutputWriter):
    """Listens and broadcasts frames to whoever is connected; drops when
    nobody is."""

    def __init__(self, host: str, port: int):
        self.host, self.port = host, port
        self.server: socket.socket | None = None
        self.clients: list[socket.socket] = []

    def open(self, now_us: int) -> None:
        try:
            server = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
            server.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
            server.bind((self.host, self.port))
            server.listen(4)
            server.setblocking(False)
        except OSError as exc:
            raise BindError(f"cannot listen on {self.host}:{self.port}: {exc}") from exc
        self.server = server

    @property
    def bound_port(self) -> int:
        return self.server.getsockname()[1]

    def write(self, wf: WireFrame) -> None:
        while True:
            try:
                client, _ = self.server.accept()
                client.setblocking(False)
                self.clients.append(client)
            except (BlockingIOError, OSError):
                break
        if not self.clients:
            return
        payload = encode_frame(wf)
        data = len(payload).to_bytes(4, "little") + payload
        dead = []
        for client in self.clients:
            try:
                client.sendall(data)
            except (BlockingIOError, OSError):
                dead.append(client)
        for client in dead:
            client.close()
            self.clients.remove(client)

    def close(self) -> None:
        for c in self.clients:
            c.close()
        if self.server is not None:
            self.server.close()
        self.clients = []
        self.server = None


class SinkStage(Stage):
    """Emits output at its own cadence with the stale-fallback policy
    (paced mode), or forwards exactly what arrives (follow mode)."""

    def __init__(self, name: str, writer: OutputWriter, policy: StalePolicy,
                 period_us: int, mode: str = "paced"):
        super().__init__(name)
        assert mode in ("paced", "follow")
        self.writer = writer
        self.policy = policy
        self.period_us = period_us
        self.mode = mode
        self.last_good: JointConfiguration | None = None
        self.last_take_us: int | None = None
        self.pending_msg: FrameMsg | None = None
        self.has_pending = False
        self.internal_drops = 0  # pending frames superseded before emission
        self._emissions = 0
        self._start_us = 0
        self.stats = None  # SinkStats, attached by the runner
        self.e2e = None  # Histogram, attached by the runner
        self.frames_out = 0
        self.staleness_events = 0
        self._last_status: FreshStatus | None = None

    def start(self, now_us: int) -> None:
        self._start_us = now_us
        self.writer.open(now_us)

    @property
    def pending(self) -> bool:
        return self.has_pending

    def _pump(self, now_us: int) -> bool:
        msg = self.inbox.take()
        if msg is None:
            return False
        if self.has_pending:
            self.internal_drops += 1
        self.last_good = msg.payload
        self.last_take_us = now_us
        self.pending_msg = msg
        self.has_pending = True
        return True

    def _record(self, now_us: int, status: FreshStatus) -> None:
        if self.stats is not None:
            self.stats.record((now_us - self._start_us) / 1000.0, status.value)
        if self._last_status is not None and status != self._last_status and status in (
            FreshStatus.STALE,
            FreshStatus.STARVED,
        ):
            self.staleness_events += 1
        self._last_status = status

    def step(self, now_us: int) -> bool:
        did = self._pump(now_us)
        if self.mode == "follow":
            if self.has_pending:
                msg = self.pending_msg
                if msg.kind == MsgKind.CONFIG:
                    wf = joint_config_to_wire(msg.payload, msg.sequence)
                else:
                    wf = keypoints_to_wire(msg.payload)
                self.writer.write(wf)
                self.frames_out += 1
                if self.e2e is not None:
                    self.e2e.record(now_us - msg.arrival_us)
                self._record(now_us, FreshStatus.FRESH)
                self.has_pending = False
            return did
        due = self._start_us + (self._emissions + 1) * self.period_us
        if now_us < due:
            return did
        self._emissions += 1
        age_ms = (
            float("inf") if self.last_take_us is None
            else (now_us - self.last_take_us) / 1000.0
        )
        if self.last_good is None:
            out, status = self.policy.neutral, FreshStatus.STARVED
        else:
            out, status = apply_stale_policy(self.last_good, age_ms, self.policy)
        ts = out.timestamp_us if status != FreshStatus.STARVED else now_us
        wf = joint_config_to_wire(out, sequence=self._emissions, timestamp_us=ts)
        self.writer.write(wf)
        if status == FreshStatus.FRESH and self.has_pending:
            self.frames_out += 1
            if self.e2e is not None and self.pending_msg is not None:
                self.e2e.record(now_us - self.pending_msg.arrival_us)
            self.has_pending = False
        self._record(now_us, status)
        return True

    def close(self) -> None:
        self.writer.close()
