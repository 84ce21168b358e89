"""Drives a stage list to completion, in deterministic step mode or with
one thread per stage.

Step mode advances a virtual microsecond clock in fixed quanta and steps
every stage in topological order each tick, so a whole run (including
scripted faults) is a pure function of its inputs; that is what the
fault-injection and byte-identity tests rely on.  Threaded mode runs the
same stages against the wall clock.

A stage that raises is isolated: it stops stepping, its failure lands in
the metrics, and everything downstream degrades through the sink's stale
policy instead of deadlocking.
"""
from __future__ import annotations

import threading
import time
from dataclasses import dataclass

from ..errors import ConfigError
from .faults import FaultSchedule, InjectedFault
from .mailbox import Mailbox
from .metrics import PipelineMetrics
from .stages import SinkStage, Stage

STEP_QUANTUM_US = 1000


@dataclass
class PipelineResult:
    metrics: PipelineMetrics
    ok: bool
    failed_stages: list[str]

    @property
    def sink_timeline(self) -> list[str]:
        return self.metrics.sink.timeline


class _Harness:
    """Wraps a stage with fault injection, metrics, and crash isolation."""

    def __init__(self, stage: Stage, stats, faults: FaultSchedule, start_us: int):
        self.stage = stage
        self.stats = stats
        self.faults = faults
        self.start_us = start_us
        stage.count_skip = self._count_skip

    def _count_skip(self) -> None:
        self.stats.skipped += 1

    def step(self, now_us: int) -> bool:
        if self.stats.failed:
            return False
        t_ms = (now_us - self.start_us) / 1000.0
        if self.faults.stalled(self.stage.name, t_ms):
            return False
        t0 = time.perf_counter_ns()
        try:
            if self.faults.killed(self.stage.name, t_ms):
                raise InjectedFault(f"scripted kill at {t_ms:.0f} ms")
            did = self.stage.step(now_us)
        except Exception as exc:  # noqa: BLE001 - isolation is the point
            self.stats.failed = True
            self.stats.failure = f"{type(exc).__name__}: {exc}"
            return False
        if did:
            self.stats.processing.record((time.perf_counter_ns() - t0) / 1000.0)
        return did


def _wire(stages: list[Stage]) -> list[Mailbox]:
    if len(stages) < 2:
        raise ConfigError("a pipeline needs at least a source and a sink")
    names = [s.name for s in stages]
    if len(set(names)) != len(names):
        raise ConfigError(f"duplicate stage names in {names}")
    if not isinstance(stages[-1], SinkStage):
        raise ConfigError("last stage must be the sink")
    mailboxes = []
    for upstream, downstream in zip(stages, stages[1:]):
        mb = Mailbox(name=f"{upstream.name}->{downstream.name}")
        upstream.outbox = mb
        downstream.inbox = mb
        mailboxes.append(mb)
    return mailboxes


class _RunnerBase:
    def __init__(self, stages: list[Stage], faults: FaultSchedule | None = None,
                 max_duration_ms: float | None = None):
        self.stages = stages
        self.mailboxes = _wire(stages)
        self.faults = faults or FaultSchedule()
        self.max_duration_ms = max_duration_ms
        self.metrics = PipelineMetrics([s.name for s in stages])
        self.sink: SinkStage = stages[-1]
        self.sink.stats = self.metrics.sink
        self.sink.e2e = self.metrics.end_to_end
        self.source = stages[0]
        self._harnesses: list[_Harness] = []

    def _make_harnesses(self, start_us: int) -> None:
        self._harnesses = [
            _Harness(s, self.metrics.stages[s.name], self.faults, start_us)
            for s in self.stages
        ]

    def _collect(self) -> PipelineResult:
        for mb, downstream in zip(self.mailboxes, self.stages[1:]):
            self.metrics.stages[downstream.name].frames_in = mb.put_count
            self.metrics.stages[downstream.name].drops = mb.drops
        self.metrics.stages[self.sink.name].drops += self.sink.internal_drops
        for stage in self.stages[:-1]:
            self.metrics.stages[stage.name].frames_out = stage.outbox.put_count
        src = self.metrics.stages[self.source.name]
        src.frames_in = src.frames_out + src.skipped
        sink_stats = self.metrics.stages[self.sink.name]
        sink_stats.frames_out = self.sink.frames_out
        self.metrics.staleness_events = self.sink.staleness_events
        failed = [s.name for s in self.metrics.stages.values() if s.failed]
        return PipelineResult(self.metrics, ok=not failed, failed_stages=failed)

    def _drained(self) -> bool:
        return (
            self.source.done
            and all(mb.peek_empty() for mb in self.mailboxes)
            and not self.sink.pending
        )

    def _close_all(self) -> None:
        for stage in self.stages:
            try:
                stage.close()
            except Exception:  # noqa: BLE001
                pass


class StepRunner(_RunnerBase):
    """Single-threaded deterministic scheduler on a virtual clock."""

    IDLE_TICK_LIMIT = 2000  # source done + nothing moving for 2 s (virtual)

    def run(self) -> PipelineResult:
        t_wall = time.perf_counter()
        now = 0
        self._make_harnesses(now)
        for stage in self.stages:
            stage.start(now)
        idle = 0
        while True:
            any_work = False
            for harness in self._harnesses:
                if harness.step(now):
                    any_work = True
            if self._drained():
                break
            if self.max_duration_ms is not None and now >= self.max_duration_ms * 1000:
                break
            if self.source.done or self.metrics.stages[self.source.name].failed:
                idle = 0 if any_work else idle + 1
                if idle > self.IDLE_TICK_LIMIT:
                    break
            now += STEP_QUANTUM_US
        self._close_all()
        self.metrics.wall_time_s = time.perf_counter() - t_wall
        return self._collect()


class ThreadedRunner(_RunnerBase):
    """One thread per stage against the wall clock."""

    def __init__(self, stages, faults=None, max_duration_ms=None):
        super().__init__(stages, faults, max_duration_ms)
        self._stop = threading.Event()
        self._threads: list[threading.Thread] = []
        self._t0_us = 0
        self._started = False

    def _now_us(self) -> int:
        return time.monotonic_ns() // 1000 - self._t0_us

    def _loop(self, harness: _Harness) -> None:
        while not self._stop.is_set():
            if not harness.step(self._now_us()):
                time.sleep(0.0005)

    def start(self) -> None:
        self._t0_us = time.monotonic_ns() // 1000
        self._make_harnesses(0)
        for stage in self.stages:
            stage.start(0)
        self._threads = [
            threading.Thread(target=self._loop, args=(h,), name=h.stage.name, daemon=True)
            for h in self._harnesses
        ]
        for t in self._threads:
            t.start()
        self._started = True
        self._wall_start = time.perf_counter()

    def request_stop(self) -> None:
        self._stop.set()

    def snapshot(self) -> dict:
        self.metrics.wall_time_s = time.perf_counter() - self._wall_start
        self._collect()
        return self.metrics.to_dict()

    def wait(self, poll_s: float = 0.02) -> PipelineResult:
        try:
            while not self._stop.is_set():
                if self._drained():
                    # let the sink flush its final period before stopping
                    time.sleep(self.sink.period_us / 1e6 + poll_s)
                    if self._drained():
                        break
                if (
                    self.max_duration_ms is not None
                    and self._now_us() >= self.max_duration_ms * 1000
                ):
                    break
                time.sleep(poll_s)
        finally:
            self._stop.set()
            for t in self._threads:
                t.join(timeout=5.0)
            self._close_all()
            self.metrics.wall_time_s = time.perf_counter() - self._wall_start
        return self._collect()

    def run(self) -> PipelineResult:
        self.start()
        return self.wait()
