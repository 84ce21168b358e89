"""Assembles a runnable pipeline from an EngineConfig.

The stage graph is a straight chain chosen by the input form:

    keypoints3d stream:   source -> retarget_ik -> sink
    dual 2d streams:      source -> lift -> retarget_ik -> sink
    joint_config stream:  source -> sink               (transport passthrough)

Socket endpoints only exist in threaded mode; step mode is for
deterministic file-to-file runs and tests.
"""
from __future__ import annotations

from pathlib import Path

from .config import EngineConfig
from .errors import ConfigError
from .ik import IkOptions
from .pipeline.faults import FaultSchedule
from .pipeline.runner import StepRunner, ThreadedRunner
from .pipeline.stages import (
    DualFileSource,
    DualSocketSource,
    FileReplaySource,
    FileWriter,
    FrameDecoder,
    LiftStage,
    NullWriter,
    OutputWriter,
    PassthroughStage,
    RetargetIkStage,
    SinkStage,
    SocketServerWriter,
    SocketSource,
    SyntheticSource,
    TextWriter,
)
from .pipeline.stale import StalePolicy
from .retarget import load_retarget_map
from .rig import load_rig, rest_configuration
from .schemes import load_scheme
from .stereo import load_calibration
from .wire import FRAME_JOINT_CONFIG, FRAME_KEYPOINTS_2D, iter_stream_file


def _first_frame_type(path: str | Path) -> int:
    for wf in iter_stream_file(path):
        return wf.frame_type
    raise ConfigError(f"recorded stream {path} is empty")


def _parse_endpoint(arg: str, default_host: str = "0.0.0.0") -> tuple[str, int]:
    host, sep, port = arg.rpartition(":")
    try:
        return (host or default_host) if sep else default_host, int(port if sep else arg)
    except ValueError:
        raise ConfigError(f"bad socket endpoint {arg!r}") from None


def build_pipeline(config: EngineConfig, writer: OutputWriter | None = None,
                   faults: FaultSchedule | None = None):
    """Build the runner for a config.  A writer passed explicitly (tests,
    service one-shot runs) overrides the config's output spec."""
    scheme = load_scheme(config.scheme)
    rig = load_rig(config.rig)
    retarget_map = load_retarget_map(config.retarget_map, scheme, rig)
    decoder = FrameDecoder(scheme=scheme, rig=rig, remap_z_up=config.input_up_axis == "z")
    sync_window_us = int(config.sync_window_ms * 1000)

    in_kind, in_args = config.input_spec()
    if config.mode == "step" and "socket" in in_kind:
        raise ConfigError("socket inputs require threaded mode")

    input_kind = config.input_kind
    stages = []
    needs_lift = False
    if in_kind in ("file", "dual-file"):
        for p in in_args:
            if not Path(p).exists():
                raise ConfigError(f"input file not found: {p}")
    if in_kind == "file":
        if input_kind == "auto":
            ftype = _first_frame_type(in_args[0])
            input_kind = {
                FRAME_JOINT_CONFIG: "joint_config",
                FRAME_KEYPOINTS_2D: "keypoints2d",
            }.get(ftype, "keypoints3d")
        if input_kind == "keypoints2d":
            raise ConfigError("a single 2d stream cannot be lifted; use dual-file")
        stages.append(FileReplaySource("source", in_args[0], decoder, config.replay_speed))
    elif in_kind == "dual-file":
        if len(in_args) != 2:
            raise ConfigError("dual-file input needs two paths")
        input_kind = "keypoints3d"
        needs_lift = True
        stages.append(
            DualFileSource("source", in_args[0], in_args[1], decoder, sync_window_us,
                           config.replay_speed)
        )
    elif in_kind == "socket":
        host, port = _parse_endpoint(in_args[0])
        if input_kind == "auto":
            input_kind = "keypoints3d"
        stages.append(SocketSource("source", host, port, decoder))
    elif in_kind == "dual-socket":
        if len(in_args) != 2:
            raise ConfigError("dual-socket input needs two ports")
        host_a, port_a = _parse_endpoint(in_args[0])
        _, port_b = _parse_endpoint(in_args[1])
        input_kind = "keypoints3d"
        needs_lift = True
        stages.append(
            DualSocketSource("source", host_a, (port_a, port_b), decoder, sync_window_us)
        )
    elif in_kind == "synthetic":
        fps = float(in_args[0])
        duration = float(in_args[1]) if len(in_args) > 1 else None
        input_kind = "keypoints3d"
        stages.append(SyntheticSource("source", scheme, fps, duration))
    else:
        raise ConfigError(f"unsupported input spec {config.input!r}")

    if needs_lift:
        if config.calibration is None:
            raise ConfigError("dual-camera input requires a calibration file")
        pair = load_calibration(config.calibration)
        stages.append(LiftStage("lift", pair, config.min_confidence, sync_window_us))

    if input_kind == "joint_config" or config.pipeline == "identity":
        stages.append(PassthroughStage("passthrough"))
    else:
        ik_options = IkOptions(
            max_iterations=config.ik.max_iterations,
            position_tolerance=config.ik.tolerance,
        )
        stages.append(
            RetargetIkStage("retarget_ik", rig, retarget_map, ik_options,
                            config.min_confidence)
        )

    if writer is None:
        out_kind, out_args = config.output_spec()
        if out_kind == "file":
            writer = FileWriter(out_args[0])
        elif out_kind == "socket":
            host, port = _parse_endpoint(out_args[0])
            if config.mode == "step":
                raise ConfigError("socket outputs require threaded mode")
            writer = SocketServerWriter(host, port)
        elif out_kind == "stdout":
            writer = TextWriter(rig)
        elif out_kind == "null":
            writer = NullWriter()
        else:
            raise ConfigError(f"unsupported output spec {config.output!r}")

    sink_mode = config.sink_mode
    if sink_mode == "auto":
        passthrough_graph = input_kind == "joint_config" or config.pipeline == "identity"
        sink_mode = "follow" if passthrough_graph else "paced"
    policy = StalePolicy(
        neutral=rest_configuration(rig),
        fresh_ms=config.stale.fresh_ms,
        hold_ms=config.stale.hold_ms,
    )
    stages.append(
        SinkStage("sink", writer, policy, int(round(1e6 / config.output_rate_hz)),
                  mode=sink_mode)
    )

    runner_cls = StepRunner if config.mode == "step" else ThreadedRunner
    return runner_cls(stages, faults=faults, max_duration_ms=config.max_duration_ms)


def run_pipeline(config: EngineConfig, writer: OutputWriter | None = None,
                 faults: FaultSchedule | None = None):
    """Build and run to completion; returns the PipelineResult."""
    return build_pipeline(config, writer=writer, faults=faults).run()
