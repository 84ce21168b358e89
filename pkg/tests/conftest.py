import numpy as np
import pytest

from pose_engine import defaults
from pose_engine.geometry import Vec3
from pose_engine.retarget import load_retarget_map
from pose_engine.rig import load_rig
from pose_engine.schemes import KeypointFrame, LandmarkPoint, SpaceTag, load_scheme


@pytest.fixture(scope="session")
def scheme33():
    return load_scheme(defaults.SCHEME_33)


@pytest.fixture(scope="session")
def scheme17():
    return load_scheme(defaults.SCHEME_17)


@pytest.fixture(scope="session")
def humanoid():
    return load_rig(defaults.RIG_HUMANOID)


@pytest.fixture(scope="session")
def default_map(scheme33, humanoid):
    return load_retarget_map(defaults.MAP_HUMANOID, scheme33, humanoid)


def make_frame(scheme, positions, confidences=None, timestamp_us=0, sequence=0,
               space=SpaceTag.WORLD3D):
    """Build a KeypointFrame from an iterable of (x, y, z)."""
    positions = list(positions)
    if confidences is None:
        confidences = [1.0] * len(positions)
    points = tuple(
        LandmarkPoint(Vec3(*p), c) for p, c in zip(positions, confidences)
    )
    return KeypointFrame(
        timestamp_us=timestamp_us,
        sequence=sequence,
        scheme=scheme,
        points=points,
        space=space,
    )


def rng(seed=0):
    return np.random.default_rng(seed)
