"""Exception hierarchy for the engine.

Every error the engine raises on purpose derives from :class:`EngineError`,
so callers (CLI, service) can map failures to exit codes / HTTP statuses
without enumerating submodules.
"""


class EngineError(Exception):
    """Base class for all engine errors."""


class ConfigError(EngineError):
    """Invalid engine configuration (bad graph, missing file, bad value)."""


# --- frame / scheme validation ---

class SchemeMismatch(EngineError):
    """Frame landmark count or scheme does not match the expected scheme."""


class NonFinite(EngineError):
    """A coordinate is NaN or infinite."""


class BadConfidence(EngineError):
    """A confidence value lies outside [0, 1]."""


class LowConfidence(EngineError):
    """A landmark needed for a computation is below the confidence threshold."""


class UnknownLandmark(EngineError):
    """A landmark id or name is not part of the scheme."""


# --- rig ---

class RigError(EngineError):
    """Rig file violates a structural invariant (cycle, bad length, ...)."""


class MissingJoint(EngineError):
    """A joint configuration does not cover every rig joint."""


# --- retargeting ---

class DegenerateBasis(EngineError):
    """Basis vector has (numerically) no planar component; angle undefined."""


class EmptyResult(EngineError):
    """No limb of a retarget map could be processed for a frame."""


# --- inverse kinematics ---

class DegenerateDirection(EngineError):
    """Direction antiparallel to a cone axis; clamp plane undefined."""


# --- stereo ---

class ParseError(EngineError):
    """Calibration or data file is structurally malformed."""


class DegenerateGeometry(EngineError):
    """Camera pair geometry unusable (e.g. coincident centers)."""


class NonOrthonormalRotation(EngineError):
    """A rotation matrix in a calibration file is not orthonormal."""


class DegenerateRays(EngineError):
    """Back-projected rays are parallel; triangulation undefined."""


class SyncWindowExceeded(EngineError):
    """Two views of a stereo pair are too far apart in time."""


# --- wire protocol ---

class WireError(EngineError):
    """Base class for codec errors."""


class BadMagic(WireError):
    """Buffer does not start with the protocol magic."""


class UnsupportedVersion(WireError):
    """Protocol version not understood by this build."""


class TruncatedFrame(WireError):
    """Buffer ends before the declared payload is complete."""


class CountMismatch(WireError):
    """Declared entry count disagrees with the byte length."""


# --- pipeline ---

class Disconnected(EngineError):
    """The peer side of a mailbox was dropped."""


class BindError(EngineError):
    """A socket endpoint could not be bound or connected."""
