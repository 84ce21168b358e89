"""Scripted fault injection for pipeline tests.

A schedule is data, so fault runs are reproducible: the step-mode runner
evaluates it against the virtual clock, the threaded runner against wall
time.  Stalls make a stage do nothing for a while (no consume, no emit);
kills make it raise once, after which the harness isolates it for good.
"""
from __future__ import annotations

from dataclasses import dataclass


class InjectedFault(RuntimeError):
    """Raised inside a stage by the harness when a kill fault fires."""


@dataclass(frozen=True)
class FaultSpec:
    stage: str
    kind: str  # "stall" | "kill"
    at_ms: float
    duration_ms: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in ("stall", "kill"):
            raise ValueError(f"unknown fault kind {self.kind!r}")


@dataclass(frozen=True)
class FaultSchedule:
    faults: tuple[FaultSpec, ...] = ()

    def stalled(self, stage: str, t_ms: float) -> bool:
        return any(
            f.stage == stage and f.kind == "stall" and f.at_ms <= t_ms < f.at_ms + f.duration_ms
            for f in self.faults
        )

    def killed(self, stage: str, t_ms: float) -> bool:
        return any(f.stage == stage and f.kind == "kill" and t_ms >= f.at_ms for f in self.faults)
