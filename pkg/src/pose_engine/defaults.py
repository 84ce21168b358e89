"""Paths to the data files shipped inside the package."""
from __future__ import annotations

from importlib import resources
from pathlib import Path

_DATA = resources.files("pose_engine") / "data"

SCHEME_33 = Path(str(_DATA / "schemes" / "blazepose_33.yaml"))
SCHEME_17 = Path(str(_DATA / "schemes" / "coco_17.yaml"))
RIG_HUMANOID = Path(str(_DATA / "rigs" / "humanoid.yaml"))
MAP_HUMANOID = Path(str(_DATA / "maps" / "humanoid_blazepose.yaml"))
CALIBRATION_SAMPLE = Path(str(_DATA / "calibration" / "desk_stereo.yaml"))
