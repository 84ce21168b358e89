"""Depth-1 latest-value channel between pipeline stages.

A put overwrites any unread message (the overwritten one counts as a
drop), so a slow consumer always sees the newest frame and total in-flight
data is bounded by the number of stages.  Newest-wins is the right call
for live tracking: rendering an old pose late is worse than skipping it.
"""
from __future__ import annotations

import threading
from typing import Any, Generic, TypeVar

from ..errors import Disconnected

T = TypeVar("T")


class Mailbox(Generic[T]):
    def __init__(self, name: str = ""):
        self.name = name
        self._cond = threading.Condition()
        self._slot: tuple[int, T] | None = None
        self._put_count = 0
        self._drops = 0
        self._last_taken = 0
        self._writer_open = True
        self._reader_open = True

    def put(self, msg: T) -> None:
        with self._cond:
            if not self._reader_open:
                raise Disconnected(f"mailbox {self.name!r}: reader side dropped")
            if self._slot is not None:
                self._drops += 1
            self._put_count += 1
            self._slot = (self._put_count, msg)
            self._cond.notify()

    def take(self) -> T | None:
        """Non-blocking: latest message, or None when empty."""
        with self._cond:
            if self._slot is None:
                if not self._writer_open:
                    raise Disconnected(f"mailbox {self.name!r}: writer side dropped")
                return None
            seq, msg = self._slot
            self._slot = None
            assert seq > self._last_taken, "mailbox sequence went backwards"
            self._last_taken = seq
            return msg

    def take_wait(self, timeout_s: float) -> T | None:
        """Blocking take with timeout; None on timeout."""
        deadline = None
        with self._cond:
            while self._slot is None:
                if not self._writer_open:
                    raise Disconnected(f"mailbox {self.name!r}: writer side dropped")
                if not self._cond.wait(timeout=timeout_s):
                    return None
            seq, msg = self._slot
            self._slot = None
            self._last_taken = seq
            return msg

    def peek_empty(self) -> bool:
        with self._cond:
            return self._slot is None

    @property
    def drops(self) -> int:
        with self._cond:
            return self._drops

    @property
    def put_count(self) -> int:
        with self._cond:
            return self._put_count

    def close_writer(self) -> None:
        with self._cond:
            self._writer_open = False
            self._cond.notify_all()

    def close_reader(self) -> None:
        with self._cond:
            self._reader_open = False
