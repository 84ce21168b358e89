"""FastAPI control plane around the engine.

The HTTP layer is for control and one-shot math only; frame data flows
over the binary socket transport or recorded files.  The CLI talks to
this app in-process by default and to a remote instance with --server.
"""
from __future__ import annotations

import threading
import uuid

from fastapi import FastAPI, HTTPException

import pose_engine

from ..config import EngineConfig
from ..engine import build_pipeline
from ..errors import BindError, ConfigError, DegenerateBasis, EngineError
from ..geometry import Vec3
from ..pipeline.runner import ThreadedRunner
from ..pipeline.stages import NullWriter
from ..retarget import basis_frame, denormalize_joint, normalize_joint
from ..stereo import PixelPoint, load_calibration, triangulate
from .models import (
    BenchRequest,
    BenchResponse,
    HealthResponse,
    RetargetMathRequest,
    RetargetMathResponse,
    RunRequest,
    RunResponse,
    SessionInfo,
    SessionRequest,
    TriangulateRequest,
    TriangulateResponse,
)


class Session:
    def __init__(self, config: EngineConfig, runner: ThreadedRunner):
        self.config = config
        self.runner = runner
        self.state = "running"
        self.result = None
        self.thread = threading.Thread(target=self._wait, daemon=True)

    def _wait(self) -> None:
        try:
            self.result = self.runner.wait()
            self.state = "finished" if self.result.ok else "failed"
        except EngineError as exc:
            self.state = f"failed: {exc}"

    def start(self) -> None:
        self.runner.start()
        self.thread.start()

    def stop(self) -> None:
        self.runner.request_stop()
        self.thread.join(timeout=10.0)
        if self.state == "running":
            self.state = "stopped"

    def info(self, session_id: str) -> SessionInfo:
        metrics = (
            self.result.metrics.to_dict() if self.result is not None
            else self.runner.snapshot()
        )
        return SessionInfo(
            session_id=session_id, state=self.state, config=self.config, metrics=metrics
        )


def create_app() -> FastAPI:
    app = FastAPI(title="pose-engine", version=pose_engine.__version__)
    sessions: dict[str, Session] = {}

    @app.get("/healthz", response_model=HealthResponse)
    def healthz():
        return HealthResponse(version=pose_engine.__version__)

    @app.get("/version")
    def version():
        return {"version": pose_engine.__version__}

    @app.post("/v1/math/retarget", response_model=RetargetMathResponse)
    def math_retarget(req: RetargetMathRequest):
        try:
            bf = basis_frame(Vec3(*req.basis))
            normalized = normalize_joint(Vec3(*req.joint), bf)
        except (DegenerateBasis, EngineError) as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        resp = RetargetMathResponse(
            theta=bf.theta, scale=bf.scale, normalized=normalized.value.as_tuple()
        )
        if req.engine_basis is not None:
            try:
                bf_engine = basis_frame(Vec3(*req.engine_basis))
            except (DegenerateBasis, EngineError) as exc:
                raise HTTPException(status_code=422, detail=str(exc)) from exc
            resp.engine_theta = bf_engine.theta
            resp.engine_scale = bf_engine.scale
            resp.reproduced = denormalize_joint(normalized, bf_engine).as_tuple()
        return resp

    @app.post("/v1/math/triangulate", response_model=TriangulateResponse)
    def math_triangulate(req: TriangulateRequest):
        if (req.calibration is None) == (req.calibration_path is None):
            raise HTTPException(
                status_code=422,
                detail="provide exactly one of calibration, calibration_path",
            )
        try:
            pair = load_calibration(req.calibration or req.calibration_path)
            point, err = triangulate(
                PixelPoint(req.pixel_a.u, req.pixel_a.v, req.pixel_a.confidence),
                PixelPoint(req.pixel_b.u, req.pixel_b.v, req.pixel_b.confidence),
                pair,
            )
        except EngineError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        return TriangulateResponse(point=point.as_tuple(), reprojection_error_px=err)

    @app.post("/v1/runs", response_model=RunResponse)
    def run(req: RunRequest):
        try:
            result = build_pipeline(req.config).run()
        except ConfigError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        except BindError as exc:
            raise HTTPException(status_code=409, detail=str(exc)) from exc
        return RunResponse(
            ok=result.ok,
            failed_stages=result.failed_stages,
            metrics=result.metrics.to_dict(),
            report=result.metrics.format_text(),
        )

    @app.post("/v1/sessions", response_model=SessionInfo, status_code=201)
    def create_session(req: SessionRequest):
        config = req.config
        if config.mode != "threaded":
            raise HTTPException(status_code=422, detail="sessions run in threaded mode")
        try:
            runner = build_pipeline(config)
        except ConfigError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        session = Session(config, runner)
        try:
            session.start()
        except BindError as exc:
            raise HTTPException(status_code=409, detail=str(exc)) from exc
        session_id = uuid.uuid4().hex[:12]
        sessions[session_id] = session
        return session.info(session_id)

    @app.get("/v1/sessions")
    def list_sessions():
        return {sid: s.state for sid, s in sessions.items()}

    @app.get("/v1/sessions/{session_id}", response_model=SessionInfo)
    def get_session(session_id: str):
        if session_id not in sessions:
            raise HTTPException(status_code=404, detail=f"no session {session_id}")
        return sessions[session_id].info(session_id)

    @app.delete("/v1/sessions/{session_id}", response_model=SessionInfo)
    def stop_session(session_id: str):
        if session_id not in sessions:
            raise HTTPException(status_code=404, detail=f"no session {session_id}")
        session = sessions[session_id]
        session.stop()
        info = session.info(session_id)
        del sessions[session_id]
        return info

    @app.post("/v1/bench", response_model=BenchResponse)
    def bench(req: BenchRequest):
        if req.duration_s <= 0:
            raise HTTPException(status_code=422, detail="duration must be positive")
        config = EngineConfig(
            input=f"synthetic:{req.rate_hz}:{req.duration_s}",
            output="null",
            mode="step" if req.mode == "step" else "threaded",
            output_rate_hz=req.rate_hz,
            pipeline="auto" if req.full_math else "identity",
        )
        writer = NullWriter()
        result = build_pipeline(config, writer=writer).run()
        wall = result.metrics.wall_time_s or 1e-9
        achieved = result.metrics.sink.emissions / (
            wall if config.mode == "threaded" else req.duration_s
        )
        return BenchResponse(
            requested_rate_hz=req.rate_hz,
            achieved_fps=achieved,
            duration_s=req.duration_s,
            metrics=result.metrics.to_dict(),
            report=result.metrics.format_text(),
        )

    app.state.sessions = sessions
    return app
