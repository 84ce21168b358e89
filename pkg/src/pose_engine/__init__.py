"""Real-time pose retargeting engine.

Keypoint streams (live socket or recorded file, single-3D or dual-2D) go
in; constrained avatar joint configurations come out.  See the README for
the pipeline layout and the CLI/service surface.
"""

__version__ = "0.1.0"
