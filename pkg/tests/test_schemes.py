import pytest

from pose_engine.errors import (
    BadConfidence,
    LowConfidence,
    NonFinite,
    ParseError,
    SchemeMismatch,
    UnknownLandmark,
)
from pose_engine.geometry import Vec3
from pose_engine.schemes import bone_vector, load_scheme, validate_frame

from .conftest import make_frame


def test_shipped_schemes(scheme33, scheme17):
    assert scheme33.count == 33
    assert scheme17.count == 17
    assert scheme33.id_of("left_shoulder") == 11
    assert scheme33.name_of(24) == "right_hip"
    assert scheme17.id_of("left_shoulder") == 5


def test_scheme_rejects_sparse_ids(tmp_path):
    bad = tmp_path / "bad.yaml"
    bad.write_text("name: bad\nlandmarks:\n  - {id: 0, name: a}\n  - {id: 2, name: b}\n")
    with pytest.raises(ParseError):
        load_scheme(bad)


def test_scheme_rejects_duplicate_names(tmp_path):
    bad = tmp_path / "bad.yaml"
    bad.write_text("name: bad\nlandmarks:\n  - {id: 0, name: a}\n  - {id: 1, name: a}\n")
    with pytest.raises(ParseError):
        load_scheme(bad)


def test_validate_frame_is_identity_on_valid_input(scheme33):
    frame = make_frame(scheme33, [(0.01 * i, 0.02 * i, 0.03 * i) for i in range(33)])
    assert validate_frame(frame, scheme33) is frame


def test_validate_frame_wrong_count(scheme33, scheme17):
    frame = make_frame(scheme17, [(0.0, 0.0, 0.0)] * 17)
    with pytest.raises(SchemeMismatch):
        validate_frame(frame, scheme33)


def test_validate_frame_bad_confidence(scheme33):
    confs = [1.0] * 33
    confs[4] = 1.5
    frame = make_frame(scheme33, [(0.0, 0.0, 0.0)] * 33, confidences=confs)
    with pytest.raises(BadConfidence):
        validate_frame(frame, scheme33)


def test_validate_frame_non_finite(scheme33):
    positions = [(0.0, 0.0, 0.0)] * 32 + [(float("nan"), 0.0, 0.0)]
    frame = make_frame(scheme33, positions)
    with pytest.raises(NonFinite):
        validate_frame(frame, scheme33)


def test_bone_vector_difference(scheme17):
    positions = [(0.0, 0.0, 0.0)] * 17
    positions[5] = (0.0, 0.0, 0.0)
    positions[7] = (1.0, 2.0, 3.0)
    frame = make_frame(scheme17, positions)
    assert bone_vector(frame, 5, 7) == Vec3(1.0, 2.0, 3.0)
    assert bone_vector(frame, 5, 5) == Vec3(0.0, 0.0, 0.0)


def test_bone_vector_antisymmetric(scheme17):
    positions = [(0.1 * i, -0.2 * i, 0.05 * i) for i in range(17)]
    frame = make_frame(scheme17, positions)
    for a, b in [(0, 5), (3, 11), (8, 16)]:
        assert bone_vector(frame, a, b) == -bone_vector(frame, b, a)


def test_bone_vector_low_confidence(scheme17):
    confs = [1.0] * 17
    confs[7] = 0.1
    frame = make_frame(scheme17, [(0.0, 0.0, 0.0)] * 17, confidences=confs)
    with pytest.raises(LowConfidence):
        bone_vector(frame, 5, 7, min_confidence=0.5)
    # threshold is configurable
    assert bone_vector(frame, 5, 7, min_confidence=0.05) == Vec3(0.0, 0.0, 0.0)


def test_bone_vector_unknown_landmark(scheme17):
    frame = make_frame(scheme17, [(0.0, 0.0, 0.0)] * 17)
    with pytest.raises(UnknownLandmark):
        bone_vector(frame, 0, 99)
