from .faults import FaultSchedule, FaultSpec
from .mailbox import Mailbox
from .metrics import Histogram, PipelineMetrics, SinkStats, StageStats
from .runner import PipelineResult, StepRunner, ThreadedRunner
from .stages import (
    CollectWriter,
    DualFileSource,
    DualSocketSource,
    FileReplaySource,
    FileWriter,
    FrameDecoder,
    FrameMsg,
    LiftStage,
    MsgKind,
    NullWriter,
    PassthroughStage,
    RetargetIkStage,
    SinkStage,
    SocketServerWriter,
    SocketSource,
    Stage,
    SyntheticSource,
    TextWriter,
)
from .stale import FreshStatus, StalePolicy, apply_stale_policy

__all__ = [
    "FaultSchedule",
    "FaultSpec",
    "Mailbox",
    "Histogram",
    "PipelineMetrics",
    "SinkStats",
    "StageStats",
    "PipelineResult",
    "StepRunner",
    "ThreadedRunner",
    "CollectWriter",
    "DualFileSource",
    "DualSocketSource",
    "FileReplaySource",
    "FileWriter",
    "FrameDecoder",
    "FrameMsg",
    "LiftStage",
    "MsgKind",
    "NullWriter",
    "PassthroughStage",
    "RetargetIkStage",
    "SinkStage",
    "SocketServerWriter",
    "SocketSource",
    "Stage",
    "SyntheticSource",
    "TextWriter",
    "FreshStatus",
    "StalePolicy",
    "apply_stale_policy",
]
