"""Command-line surface: a thin client over the HTTP control plane.

Without --server every command drives an in-process app instance (so the
pipeline runs inside this process); with --server the same requests hit a
remote daemon started with `pose-engine serve`.  File paths in configs
are resolved by whichever process hosts the engine.

Exit codes: 0 success, 1 usage, 2 configuration, 3 runtime failure.
Set POSE_ENGINE_LOG=debug|info|warning for log verbosity.
"""
from __future__ import annotations

import asyncio
import json
import logging
import os
import socket as socket_mod
import sys
import time

import click
import httpx

import pose_engine

from .config import build_config
from .errors import BindError, ConfigError, EngineError, TruncatedFrame

log = logging.getLogger("pose_engine.cli")


def _request(server: str | None, method: str, path: str, payload: dict | None = None):
    """One HTTP request, embedded or remote; maps HTTP errors to engine
    errors so main() can map them to exit codes."""
    if server:
        with httpx.Client(base_url=server, timeout=None) as client:
            response = client.request(method, path, json=payload)
    else:
        from .service import create_app

        async def go():
            transport = httpx.ASGITransport(app=create_app())
            async with httpx.AsyncClient(
                transport=transport, base_url="http://engine", timeout=None
            ) as client:
                return await client.request(method, path, json=payload)

        response = asyncio.run(go())
    if response.status_code == 422:
        raise ConfigError(_detail(response))
    if response.status_code == 409:
        raise BindError(_detail(response))
    if response.status_code >= 400:
        raise EngineError(f"{response.status_code}: {_detail(response)}")
    return response.json()


def _detail(response) -> str:
    try:
        return str(response.json().get("detail", response.text))
    except Exception:  # noqa: BLE001
        return response.text


def _parse_vec(text: str) -> tuple[float, float, float]:
    parts = text.split(",")
    if len(parts) != 3:
        raise click.UsageError(f"expected x,y,z - got {text!r}")
    return tuple(float(p) for p in parts)


@click.group()
@click.option("--server", default=None, metavar="URL",
              help="Target a running pose-engine serve instance instead of embedding.")
@click.pass_context
def cli(ctx, server):
    """Real-time pose retargeting engine."""
    ctx.obj = server


@cli.command()
@click.option("--config", "config_file", type=click.Path(exists=True), default=None,
              help="YAML config file; flags override its fields.")
@click.option("--input", "input_spec", default=None,
              help="file:PATH | dual-file:A,B | socket:[HOST:]PORT | "
                   "dual-socket:PA,PB | synthetic:FPS[:SECONDS]")
@click.option("--output", "output_spec", default=None,
              help="file:PATH | socket:[HOST:]PORT | stdout | null")
@click.option("--scheme", type=click.Path(), default=None)
@click.option("--rig", type=click.Path(), default=None)
@click.option("--map", "retarget_map", type=click.Path(), default=None)
@click.option("--calibration", type=click.Path(), default=None)
@click.option("--mode", type=click.Choice(["step", "threaded"]), default=None)
@click.option("--input-kind", type=click.Choice(["auto", "keypoints3d", "keypoints2d", "joint_config"]), default=None)
@click.option("--up-axis", type=click.Choice(["y", "z"]), default=None)
@click.option("--sink-mode", type=click.Choice(["auto", "paced", "follow"]), default=None)
@click.option("--min-confidence", type=float, default=None)
@click.option("--sync-window-ms", type=float, default=None)
@click.option("--rate", "output_rate_hz", type=float, default=None, help="Sink output rate (Hz).")
@click.option("--speed", "replay_speed", type=float, default=None)
@click.option("--duration-ms", "max_duration_ms", type=float, default=None)
@click.option("--fresh-ms", type=float, default=None)
@click.option("--hold-ms", type=float, default=None)
@click.option("--ik-max-iterations", type=int, default=None)
@click.option("--ik-tolerance", type=float, default=None)
@click.pass_obj
def run(server, config_file, input_spec, output_spec, scheme, rig, retarget_map,
        calibration, mode, input_kind, up_axis, sink_mode, min_confidence,
        sync_window_ms, output_rate_hz, replay_speed, max_duration_ms,
        fresh_ms, hold_ms, ik_max_iterations, ik_tolerance):
    """Run the pipeline until the source ends (or duration expires)."""
    config = build_config(
        config_file,
        input=input_spec,
        output=output_spec,
        scheme=scheme,
        rig=rig,
        retarget_map=retarget_map,
        calibration=calibration,
        mode=mode,
        input_kind=input_kind,
        input_up_axis=up_axis,
        sink_mode=sink_mode,
        min_confidence=min_confidence,
        sync_window_ms=sync_window_ms,
        output_rate_hz=output_rate_hz,
        replay_speed=replay_speed,
        max_duration_ms=max_duration_ms,
        stale={"fresh_ms": fresh_ms, "hold_ms": hold_ms},
        ik={"max_iterations": ik_max_iterations, "tolerance": ik_tolerance},
    )
    result = _request(server, "POST", "/v1/runs",
                      {"config": json.loads(config.model_dump_json())})
    click.echo(result["report"], err=True)
    if not result["ok"]:
        raise EngineError(f"stages failed: {', '.join(result['failed_stages'])}")


@cli.command()
@click.option("--input", "input_file", type=click.Path(exists=True), required=True,
              help="Recorded stream file to replay.")
@click.option("--target", required=True, metavar="HOST:PORT",
              help="Engine socket input to feed.")
@click.option("--speed", type=float, default=1.0, show_default=True,
              help="Cadence multiplier; 2 plays twice as fast.")
def replay(input_file, target, speed):
    """Replay a recorded stream to a socket at its recorded cadence."""
    if speed <= 0:
        raise click.UsageError("--speed must be positive")
    host, _, port = target.rpartition(":")
    if not host:
        host = "127.0.0.1"
    from .wire import encode_frame, iter_stream_file

    sent = 0
    try:
        with socket_mod.create_connection((host, int(port)), timeout=5.0) as sock:
            start = time.monotonic()
            first_ts = None
            for wf in iter_stream_file(input_file):
                if first_ts is None:
                    first_ts = wf.timestamp_us
                due = (wf.timestamp_us - first_ts) / 1e6 / speed
                delay = due - (time.monotonic() - start)
                if delay > 0:
                    time.sleep(delay)
                payload = encode_frame(wf)
                sock.sendall(len(payload).to_bytes(4, "little") + payload)
                sent += 1
    except OSError as exc:
        raise BindError(f"cannot reach {target}: {exc}") from exc
    except TruncatedFrame:
        click.echo(f"replayed {sent} frames, then hit a corrupt tail", err=True)
        raise
    click.echo(f"replayed {sent} frames to {target}", err=True)


@cli.command()
@click.option("--duration", type=float, default=10.0, show_default=True, help="Seconds.")
@click.option("--rate", type=float, default=60.0, show_default=True, help="Synthetic source rate (Hz).")
@click.option("--full-math", is_flag=True, help="Benchmark the retarget+IK graph instead of identity stages.")
@click.option("--mode", type=click.Choice(["threaded", "step"]), default="threaded", show_default=True)
@click.option("--budget-ms", type=float, default=None,
              help="Warn if end-to-end p99 exceeds this frame budget.")
@click.pass_obj
def bench(server, duration, rate, full_math, mode, budget_ms):
    """Measure pipeline throughput and latency on the synthetic source."""
    if duration == 0:
        click.echo("empty report (duration 0)")
        return
    result = _request(server, "POST", "/v1/bench", {
        "duration_s": duration, "rate_hz": rate, "full_math": full_math, "mode": mode,
    })
    click.echo(result["report"])
    click.echo(f"requested {result['requested_rate_hz']:.1f} Hz, "
               f"achieved {result['achieved_fps']:.1f} fps")
    if budget_ms is not None:
        p99_us = result["metrics"]["end_to_end"]["p99_us"]
        if p99_us > budget_ms * 1000:
            click.echo(f"WARNING: end-to-end p99 {p99_us/1000:.2f} ms exceeds "
                       f"budget {budget_ms:.2f} ms", err=True)


@cli.command()
@click.option("--calibration", type=click.Path(exists=True), required=True)
@click.option("--pixel-a", required=True, metavar="U,V")
@click.option("--pixel-b", required=True, metavar="U,V")
@click.pass_obj
def triangulate(server, calibration, pixel_a, pixel_b):
    """One-shot stereo triangulation of a pixel pair."""
    ua, va = (float(v) for v in pixel_a.split(","))
    ub, vb = (float(v) for v in pixel_b.split(","))
    result = _request(server, "POST", "/v1/math/triangulate", {
        "pixel_a": {"u": ua, "v": va},
        "pixel_b": {"u": ub, "v": vb},
        "calibration_path": os.path.abspath(calibration),
    })
    x, y, z = result["point"]
    click.echo(f"point: ({x:.6f}, {y:.6f}, {z:.6f}) m")
    click.echo(f"reprojection error: {result['reprojection_error_px']:.6f} px")


@cli.command()
@click.option("--basis", required=True, metavar="X,Y,Z", help="Body basis vector B.")
@click.option("--joint", required=True, metavar="X,Y,Z", help="Joint vector J to convert.")
@click.option("--engine-basis", default=None, metavar="X,Y,Z",
              help="Rig-side basis B'; adds the reproduced target vector.")
@click.pass_obj
def retarget(server, basis, joint, engine_basis):
    """One-shot coordinate conversion on explicit vectors."""
    payload = {"basis": _parse_vec(basis), "joint": _parse_vec(joint)}
    if engine_basis is not None:
        payload["engine_basis"] = _parse_vec(engine_basis)
    result = _request(server, "POST", "/v1/math/retarget", payload)
    click.echo(f"theta: {result['theta']:.9f} rad, scale: {result['scale']:.9f}")
    click.echo("normalized: ({:.9f}, {:.9f}, {:.9f})".format(*result["normalized"]))
    if result.get("reproduced") is not None:
        click.echo(f"engine theta: {result['engine_theta']:.9f} rad, "
                   f"scale: {result['engine_scale']:.9f}")
        click.echo("reproduced: ({:.9f}, {:.9f}, {:.9f})".format(*result["reproduced"]))


@cli.command()
@click.option("--out", type=click.Path(), required=True, help="Output recorded-stream file.")
@click.option("--fps", type=float, default=30.0, show_default=True)
@click.option("--duration", type=float, default=5.0, show_default=True, help="Seconds.")
def synth(out, fps, duration):
    """Record a synthetic keypoint stream (drive the engine without a camera)."""
    from . import defaults
    from .schemes import load_scheme
    from .synthetic import synthetic_frame
    from .wire import keypoints_to_wire, write_stream_file

    scheme = load_scheme(defaults.SCHEME_33)
    period = int(round(1e6 / fps))
    frames = [
        keypoints_to_wire(synthetic_frame(scheme, n * period, n))
        for n in range(int(fps * duration))
    ]
    write_stream_file(out, frames)
    click.echo(f"wrote {len(frames)} frames to {out}", err=True)


@cli.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8800, show_default=True)
def serve(host, port):
    """Start the HTTP control plane."""
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(), host=host, port=port, log_level="info")


@cli.command()
@click.pass_obj
def version(server):
    """Print the engine version."""
    click.echo(f"pose-engine {pose_engine.__version__}")
    if server:
        remote = _request(server, "GET", "/version")
        click.echo(f"server: pose-engine {remote['version']}")


def main(argv=None) -> int:
    logging.basicConfig(
        level=os.environ.get("POSE_ENGINE_LOG", "warning").upper(),
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except (click.UsageError, click.Abort) as exc:
        click.echo(f"usage error: {exc}", err=True)
        return 1
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        return 2
    except (BindError, EngineError) as exc:
        click.echo(f"error: {exc}", err=True)
        return 3
    except httpx.HTTPError as exc:
        click.echo(f"server unreachable: {exc}", err=True)
        return 3


if __name__ == "__main__":
    sys.exit(main())
