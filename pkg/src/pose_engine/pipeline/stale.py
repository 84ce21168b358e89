"""Stale-result fallback: the sink keeps emitting when upstream lags.

Fresh results pass through; past fresh_ms the last good result is reused
with its stale flag set (the paper-style "use the previous second");
past hold_ms the policy's neutral pose takes over so the avatar relaxes
instead of freezing forever.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

from ..errors import ConfigError
from ..rig import JointConfiguration


class FreshStatus(enum.Enum):
    FRESH = "fresh"
    STALE = "stale"
    STARVED = "starved"


@dataclass(frozen=True)
class StalePolicy:
    neutral: JointConfiguration
    fresh_ms: float = 100.0
    hold_ms: float = 1000.0

    def __post_init__(self) -> None:
        if not 0.0 < self.fresh_ms <= self.hold_ms:
            raise ConfigError(
                f"stale policy needs 0 < fresh_ms <= hold_ms, got "
                f"({self.fresh_ms}, {self.hold_ms})"
            )


def apply_stale_policy(
    last_good: JointConfiguration | None,
    age_ms: float,
    policy: StalePolicy,
) -> tuple[JointConfiguration, FreshStatus]:
    """Pick what the sink should emit given the age of the last result."""
    if age_ms < 0:
        raise ConfigError(f"age_ms must be >= 0, got {age_ms}")
    if last_good is None or age_ms > policy.hold_ms:
        return policy.neutral, FreshStatus.STARVED
    if age_ms <= policy.fresh_ms:
        return last_good.stamped(last_good.timestamp_us, stale_flag=False), FreshStatus.FRESH
    return last_good.stamped(last_good.timestamp_us, stale_flag=True), FreshStatus.STALE
