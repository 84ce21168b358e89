"""Acceptance suite: one test per release criterion, at the stated
tolerances.  Run with `pytest tests/test_acceptance.py -v -s` to see one
pass line per criterion.
"""
import math
import subprocess
import time
from pathlib import Path

import numpy as np
import pytest

from pose_engine import defaults
from pose_engine.config import EngineConfig
from pose_engine.engine import run_pipeline
from pose_engine.errors import WireError
from pose_engine.geometry import Vec3
from pose_engine.ik import (
    IkOptions,
    chain_between,
    constraint_violations,
    forward_kinematics,
    solve_ik,
)
from pose_engine.pipeline import CollectWriter, FaultSchedule, FaultSpec
from pose_engine.retarget import basis_frame, denormalize_joint, normalize_joint, rotate_planar
from pose_engine.rig import (
    AvatarRig,
    BallConstraint,
    HingeConstraint,
    Joint,
    load_rig,
    rest_configuration,
)
from pose_engine.rotations import quat_from_rotvec, twist_angle
from pose_engine.stereo import CameraModel, CameraPair, PixelPoint, triangulate
from pose_engine.wire import (
    decode_frame,
    encode_frame,
    iter_stream_file,
    wire_to_joint_config,
    write_stream_file,
)

from .test_pipeline import record_synthetic, step_config
from .test_wire import random_wire_frame

REPO_ROOT = Path(__file__).resolve().parent.parent

# frozen from tests/oracles/stereo_noise_bound.py
NOISE_ORACLE_MAX_M = 0.050296


def report(n: int, text: str) -> None:
    print(f"\n[PASS] criterion {n}: {text}")


def test_criterion_1_retarget_round_trip():
    rng = np.random.default_rng(1001)
    t0 = time.perf_counter()
    checked = 0
    while checked < 10_000:
        j = Vec3(*rng.normal(scale=3.0, size=3))
        b = Vec3(*rng.normal(scale=3.0, size=3))
        if math.hypot(b.x, b.z) < 1e-3:
            continue
        bf = basis_frame(b)
        back = denormalize_joint(normalize_joint(j, bf), bf)
        assert (back - j).norm() <= 1e-9 * max(1.0, j.norm())
        checked += 1
    elapsed = time.perf_counter() - t0
    assert elapsed < 1.0, f"round trips took {elapsed:.3f} s"
    report(1, f"10,000 round trips exact to 1e-9 in {elapsed:.3f} s")


def test_criterion_2_frame_and_scale_invariance():
    rng = np.random.default_rng(1002)
    checked = 0
    while checked < 10_000:
        j = Vec3(*rng.normal(scale=2.0, size=3))
        b = Vec3(*rng.normal(scale=2.0, size=3))
        if math.hypot(b.x, b.z) < 1e-3:
            continue
        base = normalize_joint(j, basis_frame(b)).value
        phi = rng.uniform(-math.pi, math.pi)
        k = rng.uniform(0.05, 20.0)

        def yrot(v, phi=phi):
            x, z = rotate_planar(phi, v.x, v.z)
            return Vec3(x, v.y, z)

        rotated = normalize_joint(k * yrot(j), basis_frame(k * yrot(b))).value
        assert (rotated - base).norm() <= 1e-9
        checked += 1
    report(2, "normalization invariant under common y-rotation and scaling, 10,000 cases")


def test_criterion_3_basis_anchor():
    bf = basis_frame(Vec3(3.0, 0.0, 4.0))
    assert abs(bf.scale - 5.0) <= 1e-9
    px, pz = rotate_planar(-bf.theta, 3.0, 4.0)
    assert abs(px - 5.0) <= 1e-9
    assert abs(pz) <= 1e-9
    report(3, "basis (3, 0, 4) gives scale 5 and rotates onto the x-axis")


def two_link(mid_constraint=None, base_constraint=None):
    x, y = Vec3(1.0, 0.0, 0.0), Vec3(0.0, 1.0, 0.0)
    return AvatarRig(
        "accept_two_link",
        (
            Joint("base", None, 0.0, y, base_constraint),
            Joint("mid", "base", 1.0, x, mid_constraint),
            Joint("tip", "mid", 1.0, x),
        ),
        end_effectors=("tip",),
    )


def analytic_two_link(tx, tz):
    x, w = tx, -tz
    r2 = x * x + w * w
    cos_b = min(1.0, max(-1.0, (r2 - 2.0) / 2.0))
    out = []
    for b in (math.acos(cos_b), -math.acos(cos_b)):
        a = math.atan2(w, x) - math.atan2(math.sin(b), 1.0 + math.cos(b))
        out.append((a, b))
    return out


def y_angle(config, joint):
    q = quat_from_rotvec(np.array(config.rotation(joint).as_tuple()))
    return twist_angle(q, np.array([0.0, 1.0, 0.0]))


def angle_close(a, b, tol):
    return abs((a - b + math.pi) % (2.0 * math.pi) - math.pi) <= tol


ALL_RETURNED_CONFIGS = []


def test_criterion_4_ik_vs_analytic_oracle():
    t0 = time.perf_counter()
    rig = two_link()
    chain = chain_between(rig, "base", "tip")
    opts = IkOptions(max_iterations=300, position_tolerance=1e-7)
    rng = np.random.default_rng(1004)
    start = rest_configuration(rig).with_rotations({"mid": Vec3(0.0, 0.4, 0.0)})
    for _ in range(1000):
        radius = rng.uniform(0.25 * chain.reach, 0.9 * chain.reach)
        heading = rng.uniform(-math.pi, math.pi)
        target = Vec3(radius * math.cos(heading), 0.0, radius * math.sin(heading))
        result = solve_ik(chain, target, opts, initial=start)
        ALL_RETURNED_CONFIGS.append((rig, result.configuration))
        assert result.final_error <= 1e-3 * chain.reach
        a = y_angle(result.configuration, "base")
        b = y_angle(result.configuration, "mid")
        solutions = analytic_two_link(target.x, target.z)
        assert any(
            angle_close(a, sa, 1e-3) and angle_close(b, sb, 1e-3) for sa, sb in solutions
        ), f"target {target}: got ({a}, {b}), analytic {solutions}"

    # constrained cases: hinge-limited elbow, best effort vs grid search
    hinge = HingeConstraint(Vec3(0.0, 1.0, 0.0), 0.0, math.pi / 3)
    crig = two_link(mid_constraint=hinge)
    cchain = chain_between(crig, "base", "tip")
    a_grid = np.linspace(-math.pi, math.pi, 2001)
    b_grid = np.linspace(0.0, math.pi / 3, 401)
    aa, bb = np.meshgrid(a_grid, b_grid, indexing="ij")
    ex = np.cos(aa) + np.cos(aa + bb)
    ez = -np.sin(aa) - np.sin(aa + bb)
    for _ in range(30):
        radius = rng.uniform(0.3, 1.6)  # many need more flexion than allowed
        heading = rng.uniform(-math.pi, math.pi)
        target = Vec3(radius * math.cos(heading), 0.0, radius * math.sin(heading))
        result = solve_ik(cchain, target, opts, initial=rest_configuration(crig))
        ALL_RETURNED_CONFIGS.append((crig, result.configuration))
        best = float(
            np.sqrt((ex - target.x) ** 2 + (ez - target.z) ** 2).min()
        )
        assert result.final_error <= best * 1.02 + 1e-9, (
            f"target {target}: {result.final_error} vs grid {best}"
        )
    elapsed = time.perf_counter() - t0
    assert elapsed < 10.0, f"ik suite took {elapsed:.2f} s"
    report(4, f"1,000 analytic matches and 30 grid-checked constrained solves in {elapsed:.2f} s")


def test_criterion_5_constraint_satisfaction():
    # every configuration the solver returned anywhere in criterion 4,
    # plus a dedicated constrained sweep, satisfies all joint limits
    assert ALL_RETURNED_CONFIGS, "criterion 4 must run first"
    for rig, config in ALL_RETURNED_CONFIGS:
        assert constraint_violations(rig, config, tol=1e-6) == []
    hinge = HingeConstraint(Vec3(0.0, 1.0, 0.0), 0.0, 2.6)
    ball = BallConstraint(Vec3(1.0, 0.0, 0.0), 2.6)
    rig = two_link(mid_constraint=hinge, base_constraint=ball)
    chain = chain_between(rig, "base", "tip")
    rng = np.random.default_rng(1005)
    config = rest_configuration(rig)
    for _ in range(300):
        target = Vec3(*rng.normal(scale=1.3, size=3))
        result = solve_ik(chain, target, initial=config)
        config = result.configuration
        assert constraint_violations(rig, config, tol=1e-6) == []
    report(5, f"zero violations across {len(ALL_RETURNED_CONFIGS) + 300} returned configurations")


def test_criterion_6_triangulation_exactness():
    def unit_cam(center):
        return CameraModel(
            fx=1.0, fy=1.0, cx=0.0, cy=0.0, rotation=np.eye(3),
            translation=-np.asarray(center, dtype=float),
        )

    pair = CameraPair(cam_a=unit_cam([0, 0, 0]), cam_b=unit_cam([1, 0, 0]))
    rng = np.random.default_rng(1006)
    worst = 0.0
    for _ in range(1000):
        x = np.array([rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5), rng.uniform(2.0, 8.0)])
        pa = PixelPoint(*pair.cam_a.project(x))
        pb = PixelPoint(*pair.cam_b.project(x))
        point, _ = triangulate(pa, pb, pair)
        worst = max(worst, (point - Vec3(*x)).norm())
    assert worst <= 1e-6, f"noise-free error {worst}"

    errors = []
    for _ in range(2000):
        pa = np.array([0.0, 0.0]) + rng.uniform(-1e-3, 1e-3, size=2)
        pb = np.array([-0.2, 0.0]) + rng.uniform(-1e-3, 1e-3, size=2)
        point, _ = triangulate(PixelPoint(*pa), PixelPoint(*pb), pair)
        errors.append((point - Vec3(0.0, 0.0, 5.0)).norm())
    worst_noise = max(errors)
    ratio = worst_noise / NOISE_ORACLE_MAX_M
    assert 0.5 <= ratio <= 2.0, f"noise bound {worst_noise:.4f} vs oracle {NOISE_ORACLE_MAX_M}"
    report(6, f"1,000 exact lifts (max {worst:.2e} m); noise max {worst_noise:.4f} m "
              f"= {ratio:.2f}x oracle")


def test_criterion_7_wire_codec():
    rng = np.random.default_rng(1007)
    for _ in range(10_000):
        frame = random_wire_frame(rng)
        assert decode_frame(encode_frame(frame)) == frame

    from .test_wire import TestLayout

    layout = TestLayout()
    layout.test_hand_derived_vector_empty()
    layout.test_hand_derived_vector_single_entry()
    layout.test_hand_derived_vector_two_entries()

    fuzzed = 0
    for _ in range(500):
        frame = random_wire_frame(rng)
        buf = encode_frame(frame)
        cut = int(rng.integers(0, len(buf))) if len(buf) else 0
        try:
            decode_frame(buf[:cut])
            assert False, "truncation must not decode"
        except WireError:
            fuzzed += 1
        mutated = bytearray(buf)
        pos = int(rng.integers(0, min(len(buf), 20)))
        mutated[pos] ^= 0xFF
        try:
            decode_frame(bytes(mutated))
        except WireError:
            pass
        fuzzed += 1
    report(7, f"10,000 round trips, 3 bit-exact layout vectors, {fuzzed} fuzz cases typed")


def test_criterion_8_pipeline_robustness(tmp_path):
    stream = tmp_path / "in.pose"
    record_synthetic(stream, fps=30.0, duration_s=3.0)

    faults = FaultSchedule((FaultSpec("retarget_ik", "stall", at_ms=1000, duration_ms=500),))
    result = run_pipeline(step_config(input=f"file:{stream}"),
                          writer=CollectWriter(), faults=faults)
    assert result.sink_timeline == ["fresh", "stale", "fresh"]

    kill = FaultSchedule((FaultSpec("retarget_ik", "kill", at_ms=1000),))
    result = run_pipeline(
        step_config(input=f"file:{stream}", max_duration_ms=4000),
        writer=CollectWriter(), faults=kill,
    )
    assert result.sink_timeline == ["fresh", "stale", "starved"]
    transitions = {status: t for t, status in result.metrics.sink.transitions}
    sink_period_ms = 1000.0 / 30.0
    assert transitions["starved"] <= 1000.0 + 1000.0 + 2 * sink_period_ms

    from pose_engine.rig import rest_configuration as rest
    from pose_engine.wire import joint_config_to_wire

    humanoid = load_rig(defaults.RIG_HUMANOID)
    config_stream = tmp_path / "configs.pose"
    write_stream_file(
        config_stream,
        [joint_config_to_wire(rest(humanoid).stamped(n * 33333), sequence=n) for n in range(60)],
    )
    rng = np.random.default_rng(1008)
    stage_sets = {
        str(config_stream): ["source", "passthrough", "sink"],
        str(stream): ["source", "retarget_ik", "sink"],
    }
    for trial in range(100):
        source_file = str(stream) if trial % 10 == 0 else str(config_stream)
        names = stage_sets[source_file]
        schedule = tuple(
            FaultSpec(
                stage=names[rng.integers(0, 3)],
                kind="stall" if rng.uniform() < 0.7 else "kill",
                at_ms=float(rng.uniform(0, 1500)),
                duration_ms=float(rng.uniform(50, 800)),
            )
            for _ in range(rng.integers(1, 4))
        )
        result = run_pipeline(
            step_config(input=f"file:{source_file}", max_duration_ms=3000),
            writer=CollectWriter(), faults=FaultSchedule(schedule),
        )
        for stats in result.metrics.stages.values():
            assert stats.check_conservation(), (trial, stats.to_dict())
    report(8, "exact stall timeline, bounded starvation, 100 fault schedules completed")


def test_criterion_9_end_to_end_replay(tmp_path):
    stream = tmp_path / "in.pose"
    record_synthetic(stream, fps=30.0, duration_s=2.0)
    humanoid = load_rig(defaults.RIG_HUMANOID)
    outputs = []
    for _ in range(2):
        writer = CollectWriter()
        result = run_pipeline(step_config(input=f"file:{stream}"), writer=writer)
        assert result.ok
        outputs.append([encode_frame(wf) for wf in writer.frames])
    assert outputs[0] == outputs[1], "step-mode runs must be byte-identical"
    frames = [decode_frame(b) for b in outputs[0]]
    assert len(frames) >= 55
    seqs = [wf.sequence for wf in frames]
    assert seqs == sorted(seqs) and len(set(seqs)) == len(seqs)
    for wf in frames:
        config = wire_to_joint_config(wf, humanoid)
        assert constraint_violations(humanoid, config, tol=1e-5) == []
    report(9, f"{len(frames)} sequence-monotone constrained frames, byte-identical reruns")


FRONTEND = REPO_ROOT / "frontend"


@pytest.mark.skipif(
    not (FRONTEND / "dist" / "cli.js").exists(),
    reason="capture adapter not built (run npm install && npm run build in frontend/)",
)
def test_criterion_10_adapter_conformance(tmp_path):
    sample = FRONTEND / "assets" / "sample.y4m"
    assert sample.exists(), "sample video missing from frontend/assets"
    out_stream = tmp_path / "adapter.pose"
    subprocess.run(
        [
            "node", str(FRONTEND / "dist" / "cli.js"), "from-video",
            "--input", str(sample), "--out", str(out_stream), "--model", "synthetic",
        ],
        check=True, capture_output=True, text=True, timeout=120,
    )
    frames = list(iter_stream_file(out_stream))  # zero codec errors
    assert len(frames) > 0
    from pose_engine.schemes import load_scheme

    scheme = load_scheme(defaults.SCHEME_33)
    for wf in frames:
        assert wf.frame_type == 1
        assert len(wf.entries) == scheme.count
        assert [e.entry_id for e in wf.entries] == list(range(scheme.count))
    seqs = [wf.sequence for wf in frames]
    assert seqs == sorted(seqs) and len(set(seqs)) == len(seqs)

    writer = CollectWriter()
    result = run_pipeline(step_config(input=f"file:{out_stream}"), writer=writer)
    assert result.ok
    assert len(writer.frames) > 0
    assert all(wf.frame_type == 2 for wf in writer.frames)
    report(10, f"{len(frames)} adapter frames decoded and driven to "
               f"{len(writer.frames)} joint configurations")
