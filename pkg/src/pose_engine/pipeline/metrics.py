"""Per-stage and end-to-end pipeline metrics.

Accounting convention (what makes frames_out + drops <= frames_in hold):
frames_in counts messages offered to a stage (puts into its inbox, or
reads from the outside world for sources); drops counts inbox overwrites;
frames_out counts messages the stage emitted downstream.  A paced sink
also re-emits stale output on its own clock; those emissions are tracked
separately and do not count as frames_out.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

_BUCKET_BASE = 1.35


class Histogram:
    """Fixed-memory log-bucketed latency histogram (microseconds)."""

    def __init__(self) -> None:
        self.count = 0
        self.total = 0.0
        self.min: float | None = None
        self.max: float | None = None
        self._buckets: dict[int, int] = {}

    def record(self, value_us: float) -> None:
        value_us = max(0.0, float(value_us))
        self.count += 1
        self.total += value_us
        self.min = value_us if self.min is None else min(self.min, value_us)
        self.max = value_us if self.max is None else max(self.max, value_us)
        idx = 0 if value_us < 1.0 else int(math.log(value_us, _BUCKET_BASE)) + 1
        self._buckets[idx] = self._buckets.get(idx, 0) + 1

    def percentile(self, q: float) -> float:
        """Upper edge of the bucket holding the q-th percentile."""
        if self.count == 0:
            return 0.0
        need = q / 100.0 * self.count
        seen = 0
        for idx in sorted(self._buckets):
            seen += self._buckets[idx]
            if seen >= need:
                return _BUCKET_BASE**idx
        return self.max or 0.0

    @property
    def mean(self) -> float:
        return self.total / self.count if self.count else 0.0

    def to_dict(self) -> dict:
        return {
            "count": self.count,
            "min_us": round(self.min or 0.0, 1),
            "mean_us": round(self.mean, 1),
            "p50_us": round(self.percentile(50), 1),
            "p99_us": round(self.percentile(99), 1),
            "max_us": round(self.max or 0.0, 1),
        }


@dataclass
class StageStats:
    name: str
    frames_in: int = 0
    frames_out: int = 0
    drops: int = 0
    skipped: int = 0  # frames consumed but producing no output (policy, not error)
    failed: bool = False
    failure: str | None = None
    processing = None  # Histogram, set in __post_init__

    def __post_init__(self) -> None:
        self.processing = Histogram()

    def check_conservation(self) -> bool:
        return self.frames_out + self.drops <= self.frames_in

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "frames_in": self.frames_in,
            "frames_out": self.frames_out,
            "drops": self.drops,
            "skipped": self.skipped,
            "failed": self.failed,
            "failure": self.failure,
            "processing": self.processing.to_dict(),
        }


@dataclass
class SinkStats:
    emissions: int = 0
    fresh: int = 0
    stale: int = 0
    starved: int = 0
    transitions: list = field(default_factory=list)  # (t_ms, status string)

    def record(self, t_ms: float, status: str) -> None:
        self.emissions += 1
        setattr(self, status, getattr(self, status) + 1)
        if not self.transitions or self.transitions[-1][1] != status:
            self.transitions.append((round(t_ms, 3), status))

    @property
    def timeline(self) -> list:
        return [status for _, status in self.transitions]

    def to_dict(self) -> dict:
        return {
            "emissions": self.emissions,
            "fresh": self.fresh,
            "stale": self.stale,
            "starved": self.starved,
            "transitions": list(self.transitions),
        }


class PipelineMetrics:
    def __init__(self, stage_names: list[str]):
        self.stages = {name: StageStats(name) for name in stage_names}
        self.end_to_end = Histogram()
        self.sink = SinkStats()
        self.staleness_events = 0
        self.wall_time_s = 0.0

    def to_dict(self) -> dict:
        return {
            "stages": [s.to_dict() for s in self.stages.values()],
            "end_to_end": self.end_to_end.to_dict(),
            "sink": self.sink.to_dict(),
            "staleness_events": self.staleness_events,
            "wall_time_s": round(self.wall_time_s, 3),
        }

    def format_text(self) -> str:
        lines = ["pipeline metrics"]
        header = f"{'stage':<14}{'in':>8}{'out':>8}{'drop':>6}{'skip':>6}  {'p50us':>8}{'p99us':>9}  state"
        lines.append(header)
        for s in self.stages.values():
            state = f"FAILED: {s.failure}" if s.failed else "ok"
            lines.append(
                f"{s.name:<14}{s.frames_in:>8}{s.frames_out:>8}{s.drops:>6}{s.skipped:>6}  "
                f"{s.processing.percentile(50):>8.0f}{s.processing.percentile(99):>9.0f}  {state}"
            )
        e2e = self.end_to_end.to_dict()
        sk = self.sink
        lines.append(
            f"end-to-end: p50 {e2e['p50_us']:.0f} us, p99 {e2e['p99_us']:.0f} us "
            f"over {e2e['count']} frames"
        )
        lines.append(
            f"sink: {sk.emissions} emissions ({sk.fresh} fresh, {sk.stale} stale, "
            f"{sk.starved} starved), {self.staleness_events} staleness events"
        )
        lines.append(f"wall time: {self.wall_time_s:.3f} s")
        return "\n".join(lines)
