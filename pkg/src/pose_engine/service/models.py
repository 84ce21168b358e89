"""Request/response models for the HTTP service."""
from __future__ import annotations

from typing import Optional

from pydantic import BaseModel, Field

from ..config import EngineConfig


class HealthResponse(BaseModel):
    status: str = "ok"
    version: str


class RetargetMathRequest(BaseModel):
    """One-shot coordinate conversion on explicit vectors (debug surface)."""

    basis: tuple[float, float, float]
    joint: tuple[float, float, float]
    engine_basis: Optional[tuple[float, float, float]] = None


class RetargetMathResponse(BaseModel):
    theta: float
    scale: float
    normalized: tuple[float, float, float]
    engine_theta: Optional[float] = None
    engine_scale: Optional[float] = None
    reproduced: Optional[tuple[float, float, float]] = None


class PixelIn(BaseModel):
    u: float
    v: float
    confidence: float = 1.0


class TriangulateRequest(BaseModel):
    pixel_a: PixelIn
    pixel_b: PixelIn
    calibration_path: Optional[str] = None
    calibration: Optional[dict] = None


class TriangulateResponse(BaseModel):
    point: tuple[float, float, float]
    reprojection_error_px: float


class RunRequest(BaseModel):
    """Run a pipeline to completion (file/synthetic inputs)."""

    config: EngineConfig


class RunResponse(BaseModel):
    ok: bool
    failed_stages: list[str]
    metrics: dict
    report: str


class SessionRequest(BaseModel):
    """Start a long-running pipeline session (socket inputs and outputs)."""

    config: EngineConfig


class SessionInfo(BaseModel):
    session_id: str
    state: str  # running | finished | failed | stopped
    config: EngineConfig
    metrics: Optional[dict] = None


class BenchRequest(BaseModel):
    duration_s: float = Field(default=10.0, gt=0.0)
    rate_hz: float = Field(default=60.0, gt=0.0)
    full_math: bool = False
    mode: str = "threaded"


class BenchResponse(BaseModel):
    requested_rate_hz: float
    achieved_fps: float
    duration_s: float
    metrics: dict
    report: str
