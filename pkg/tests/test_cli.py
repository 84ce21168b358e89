"""End-to-end CLI behavior through the embedded service."""
import socket
import threading
import time

import pytest

from pose_engine.cli import main
from pose_engine.wire import FRAME_JOINT_CONFIG, iter_stream_file

from .test_pipeline import record_synthetic


def test_version(capsys):
    assert main(["version"]) == 0
    assert "pose-engine" in capsys.readouterr().out


def test_usage_error_exit_code():
    assert main(["retarget", "--basis", "1,2"]) == 1  # malformed vector
    assert main(["no-such-command"]) == 1


def test_missing_rig_file_is_config_error(tmp_path, capsys):
    stream = tmp_path / "in.pose"
    record_synthetic(stream, duration_s=0.2)
    code = main([
        "run", "--input", f"file:{stream}", "--output", "null",
        "--rig", str(tmp_path / "missing_rig.yaml"), "--mode", "step",
    ])
    assert code == 2
    assert "missing_rig.yaml" in capsys.readouterr().err


def test_run_file_to_file(tmp_path, capsys):
    stream = tmp_path / "in.pose"
    n = record_synthetic(stream, fps=30.0, duration_s=1.0)
    out = tmp_path / "out.pose"
    code = main([
        "run", "--input", f"file:{stream}", "--output", f"file:{out}", "--mode", "step",
    ])
    assert code == 0
    assert "pipeline metrics" in capsys.readouterr().err
    frames = list(iter_stream_file(out))
    assert abs(len(frames) - n) <= 2
    assert all(wf.frame_type == FRAME_JOINT_CONFIG for wf in frames)


def test_run_joint_config_passthrough_idempotent(tmp_path):
    stream = tmp_path / "in.pose"
    record_synthetic(stream, fps=30.0, duration_s=0.6)
    out1 = tmp_path / "out1.pose"
    out2 = tmp_path / "out2.pose"
    assert main(["run", "--input", f"file:{stream}", "--output", f"file:{out1}",
                 "--mode", "step"]) == 0
    assert main(["run", "--input", f"file:{out1}", "--output", f"file:{out2}",
                 "--mode", "step"]) == 0
    assert out1.read_bytes() == out2.read_bytes()


def test_run_dual_file_with_calibration(tmp_path):
    # reuse the synthetic stereo scene builder from the pipeline tests
    from .test_pipeline import TestPassthrough

    helper = TestPassthrough()
    out = tmp_path / "out.pose"
    import numpy as np
    import yaml

    from pose_engine import defaults
    from pose_engine.schemes import load_scheme
    from pose_engine.stereo import CameraModel, CameraPair
    from pose_engine.synthetic import synthetic_frame
    from pose_engine.wire import WireFrame, write_stream_file

    calib = {
        "cameras": {
            "a": {"intrinsics": {"fx": 1.0, "fy": 1.0, "cx": 0.0, "cy": 0.0},
                  "rotation": np.eye(3).tolist(), "translation": [0.0, 0.0, 0.0]},
            "b": {"intrinsics": {"fx": 1.0, "fy": 1.0, "cx": 0.0, "cy": 0.0},
                  "rotation": np.eye(3).tolist(), "translation": [-1.0, 0.0, 0.0]},
        }
    }
    calib_path = tmp_path / "calib.yaml"
    calib_path.write_text(yaml.safe_dump(calib))
    pair = CameraPair(
        cam_a=CameraModel(1.0, 1.0, 0.0, 0.0, np.eye(3), np.zeros(3)),
        cam_b=CameraModel(1.0, 1.0, 0.0, 0.0, np.eye(3), np.array([-1.0, 0.0, 0.0])),
    )
    scheme = load_scheme(defaults.SCHEME_33)
    frames_a, frames_b = [], []
    for n in range(20):
        frame = synthetic_frame(scheme, n * 33333, n)
        pix_a, pix_b = [], []
        for i, p in enumerate(frame.points):
            world = np.array(p.position.as_tuple()) + np.array([0.0, 0.0, 3.0])
            ua, va = pair.cam_a.project(world)
            ub, vb = pair.cam_b.project(world)
            pix_a.append((i, ua, va, 0.0, 1.0))
            pix_b.append((i, ub, vb, 0.0, 1.0))
        frames_a.append(WireFrame.create(0, n * 33333, n, pix_a))
        frames_b.append(WireFrame.create(0, n * 33333, n, pix_b))
    pa, pb = tmp_path / "a.pose", tmp_path / "b.pose"
    write_stream_file(pa, frames_a)
    write_stream_file(pb, frames_b)

    code = main([
        "run", "--input", f"dual-file:{pa},{pb}", "--calibration", str(calib_path),
        "--output", f"file:{out}", "--mode", "step",
    ])
    assert code == 0
    assert len(list(iter_stream_file(out))) >= 18


def test_synth_writes_decodable_stream(tmp_path):
    out = tmp_path / "synth.pose"
    assert main(["synth", "--out", str(out), "--fps", "15", "--duration", "1"]) == 0
    frames = list(iter_stream_file(out))
    assert len(frames) == 15
    assert frames[0].frame_type == 1


def test_replay_speed_and_delivery(tmp_path):
    stream = tmp_path / "in.pose"
    n = record_synthetic(stream, fps=20.0, duration_s=1.0)

    received = []
    server = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    server.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
    server.bind(("127.0.0.1", 0))
    server.listen(1)
    port = server.getsockname()[1]

    def collector():
        conn, _ = server.accept()
        buf = bytearray()
        conn.settimeout(5.0)
        try:
            while True:
                chunk = conn.recv(65536)
                if not chunk:
                    break
                buf.extend(chunk)
        except socket.timeout:
            pass
        conn.close()
        while len(buf) >= 4:
            length = int.from_bytes(buf[:4], "little")
            if len(buf) < 4 + length:
                break
            received.append(bytes(buf[4 : 4 + length]))
            del buf[: 4 + length]

    thread = threading.Thread(target=collector)
    thread.start()
    t0 = time.monotonic()
    code = main(["replay", "--input", str(stream), "--target", f"127.0.0.1:{port}",
                 "--speed", "2"])
    elapsed = time.monotonic() - t0
    thread.join(timeout=10)
    server.close()
    assert code == 0
    assert len(received) == n
    # 1 s recording at speed 2 plays in about half a second
    assert elapsed == pytest.approx(0.5, abs=0.3)


def test_triangulate_command(capsys):
    from pose_engine import defaults

    code = main([
        "triangulate", "--calibration", str(defaults.CALIBRATION_SAMPLE),
        "--pixel-a", "320,240", "--pixel-b", "160,240",
    ])
    assert code == 0
    out = capsys.readouterr().out
    assert "point:" in out and "2.0" in out


def test_bench_duration_zero(capsys):
    assert main(["bench", "--duration", "0"]) == 0
    assert "empty report" in capsys.readouterr().out


def test_bench_step_mode(capsys):
    assert main(["bench", "--duration", "1", "--rate", "60", "--mode", "step"]) == 0
    out = capsys.readouterr().out
    assert "achieved" in out
