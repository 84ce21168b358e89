"""Dual-camera lifting of 2D keypoint frames to 3D world frames.

Calibration (intrinsics plus world->camera extrinsics per camera) is an
input file produced by an offline fiducial step; this module only does
the geometry.  Triangulation is linear least squares on the two
back-projected rays (DLT style), with the mean reprojection residual
reported alongside every point.  Lens distortion is not modeled.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
import yaml

from .errors import (
    DegenerateGeometry,
    DegenerateRays,
    NonOrthonormalRotation,
    ParseError,
    SchemeMismatch,
    SyncWindowExceeded,
)
from .geometry import Vec3
from .schemes import KeypointFrame, LandmarkPoint, SpaceTag

_MIN_BASELINE = 1e-3  # meters
_ORTHO_TOL = 1e-9

DEFAULT_SYNC_WINDOW_US = 20_000


@dataclass(frozen=True, slots=True)
class PixelPoint:
    u: float
    v: float
    confidence: float = 1.0


@dataclass(frozen=True)
class CameraModel:
    fx: float
    fy: float
    cx: float
    cy: float
    rotation: np.ndarray  # 3x3, world -> camera
    translation: np.ndarray  # 3, world -> camera
    image_size: tuple[int, int] = (640, 480)

    def __post_init__(self) -> None:
        if self.fx <= 0 or self.fy <= 0:
            raise ParseError(f"focal lengths must be positive, got ({self.fx}, {self.fy})")
        r = np.asarray(self.rotation, dtype=float)
        if r.shape != (3, 3):
            raise ParseError("rotation must be a 3x3 matrix")
        if not np.allclose(r @ r.T, np.eye(3), atol=1e-6) or abs(np.linalg.det(r) - 1.0) > 1e-6:
            raise NonOrthonormalRotation(
                f"rotation is not orthonormal (RR^T residual "
                f"{np.abs(r @ r.T - np.eye(3)).max():.3g})"
            )
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", np.asarray(self.translation, dtype=float))

    @property
    def center(self) -> np.ndarray:
        """Camera center in world coordinates."""
        return -self.rotation.T @ self.translation

    def project(self, point: np.ndarray) -> tuple[float, float]:
        """World point -> pixel; raises on points at the camera plane."""
        pc = self.rotation @ np.asarray(point, dtype=float) + self.translation
        if abs(pc[2]) < 1e-12:
            raise DegenerateGeometry("point projects onto the camera plane")
        return (
            self.fx * pc[0] / pc[2] + self.cx,
            self.fy * pc[1] / pc[2] + self.cy,
        )

    def ray_direction(self, p: PixelPoint) -> np.ndarray:
        """Unit direction (world frame) of the back-projected pixel ray."""
        d_cam = np.array([(p.u - self.cx) / self.fx, (p.v - self.cy) / self.fy, 1.0])
        d = self.rotation.T @ d_cam
        return d / np.linalg.norm(d)


@dataclass(frozen=True)
class CameraPair:
    cam_a: CameraModel
    cam_b: CameraModel

    def __post_init__(self) -> None:
        if self.baseline < _MIN_BASELINE:
            raise DegenerateGeometry(
                f"camera centers {self.baseline:.3g} m apart; need >= {_MIN_BASELINE}"
            )

    @property
    def baseline(self) -> float:
        return float(np.linalg.norm(self.cam_a.center - self.cam_b.center))

    def swapped(self) -> "CameraPair":
        return CameraPair(cam_a=self.cam_b, cam_b=self.cam_a)


def _parse_camera(raw: dict, where: str) -> CameraModel:
    try:
        intr = raw["intrinsics"]
        size = raw.get("image_size", [640, 480])
        return CameraModel(
            fx=float(intr["fx"]),
            fy=float(intr["fy"]),
            cx=float(intr["cx"]),
            cy=float(intr["cy"]),
            rotation=np.array(raw["rotation"], dtype=float),
            translation=np.array(raw["translation"], dtype=float),
            image_size=(int(size[0]), int(size[1])),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"{where}: bad camera definition: {exc}") from exc


def load_calibration(source: str | Path | dict) -> CameraPair:
    """Build a validated CameraPair from a calibration document.

    Accepts a path to a YAML file or an already-parsed mapping with the
    same structure (see data/calibration/desk_stereo.yaml).
    """
    if isinstance(source, (str, Path)):
        try:
            doc = yaml.safe_load(Path(source).read_text())
        except (OSError, yaml.YAMLError) as exc:
            raise ParseError(f"cannot read calibration file {source}: {exc}") from exc
        where = str(source)
    else:
        doc, where = source, "calibration document"
    if not isinstance(doc, dict) or "cameras" not in doc:
        raise ParseError(f"{where}: missing 'cameras' section")
    cams = doc["cameras"]
    if not isinstance(cams, dict) or set(cams) != {"a", "b"}:
        raise ParseError(f"{where}: 'cameras' must contain exactly 'a' and 'b'")
    return CameraPair(
        cam_a=_parse_camera(cams["a"], f"{where}, camera a"),
        cam_b=_parse_camera(cams["b"], f"{where}, camera b"),
    )


def triangulate(pa: PixelPoint, pb: PixelPoint, pair: CameraPair) -> tuple[Vec3, float]:
    """Intersect the two back-projected rays in the least-squares sense.

    Returns the world point and the mean reprojection residual (pixels)
    over both views.
    """
    da = pair.cam_a.ray_direction(pa)
    db = pair.cam_b.ray_direction(pb)
    if np.linalg.norm(np.cross(da, db)) < 1e-9:
        raise DegenerateRays("back-projected rays are parallel")

    rows = []
    rhs = []
    for cam, pix in ((pair.cam_a, pa), (pair.cam_b, pb)):
        xn = (pix.u - cam.cx) / cam.fx
        yn = (pix.v - cam.cy) / cam.fy
        r, t = cam.rotation, cam.translation
        rows.append(xn * r[2] - r[0])
        rhs.append(t[0] - xn * t[2])
        rows.append(yn * r[2] - r[1])
        rhs.append(t[1] - yn * t[2])
    a = np.vstack(rows)
    b = np.array(rhs)
    point, *_ = np.linalg.lstsq(a, b, rcond=None)

    residuals = []
    for cam, pix in ((pair.cam_a, pa), (pair.cam_b, pb)):
        u, v = cam.project(point)
        residuals.append(math.hypot(u - pix.u, v - pix.v))
    return Vec3(float(point[0]), float(point[1]), float(point[2])), float(np.mean(residuals))


def lift_frame(
    fa: KeypointFrame,
    fb: KeypointFrame,
    pair: CameraPair,
    min_confidence: float = 0.5,
    sync_window_us: int = DEFAULT_SYNC_WINDOW_US,
) -> KeypointFrame:
    """Triangulate every landmark of two synchronized 2D frames.

    Landmarks below the confidence threshold in either view (or with
    degenerate rays) come out with confidence 0; the rest carry the
    minimum of the two input confidences.  The output timestamp is the
    mean of the inputs.
    """
    if fa.scheme.name != fb.scheme.name or len(fa.points) != len(fb.points):
        raise SchemeMismatch(
            f"cannot lift frames of schemes {fa.scheme.name!r} and {fb.scheme.name!r}"
        )
    dt = abs(fa.timestamp_us - fb.timestamp_us)
    if dt > sync_window_us:
        raise SyncWindowExceeded(
            f"views are {dt} us apart; sync window is {sync_window_us} us"
        )
    points: list[LandmarkPoint] = []
    for la, lb in zip(fa.points, fb.points):
        conf = min(la.confidence, lb.confidence)
        if conf < min_confidence:
            points.append(LandmarkPoint(Vec3(0.0, 0.0, 0.0), 0.0))
            continue
        try:
            pos, _ = triangulate(
                PixelPoint(la.position.x, la.position.y, la.confidence),
                PixelPoint(lb.position.x, lb.position.y, lb.confidence),
                pair,
            )
        except DegenerateRays:
            points.append(LandmarkPoint(Vec3(0.0, 0.0, 0.0), 0.0))
            continue
        points.append(LandmarkPoint(pos, conf))
    return replace(
        fa,
        timestamp_us=(fa.timestamp_us + fb.timestamp_us) // 2,
        points=tuple(points),
        space=SpaceTag.WORLD3D,
    )
