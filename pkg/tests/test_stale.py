import pytest

from pose_engine.errors import ConfigError
from pose_engine.geometry import Vec3
from pose_engine.pipeline.stale import FreshStatus, StalePolicy, apply_stale_policy
from pose_engine.rig import rest_configuration


@pytest.fixture
def policy(humanoid):
    return StalePolicy(neutral=rest_configuration(humanoid).stamped(0, stale_flag=True))


@pytest.fixture
def good(humanoid):
    return rest_configuration(humanoid).with_rotations(
        {"l_shoulder": Vec3(0.0, 0.5, 0.0)}
    ).stamped(1234)


def test_fresh_window(policy, good):
    out, status = apply_stale_policy(good, 30.0, policy)
    assert status is FreshStatus.FRESH
    assert out.stale_flag is False
    assert out.rotation("l_shoulder") == good.rotation("l_shoulder")


def test_previous_second_fallback(policy, good):
    # default window: results up to one second old are reused, flagged stale
    out, status = apply_stale_policy(good, 600.0, policy)
    assert status is FreshStatus.STALE
    assert out.stale_flag is True
    assert out.rotation("l_shoulder") == good.rotation("l_shoulder")


def test_starved_after_hold(policy, good):
    out, status = apply_stale_policy(good, 1500.0, policy)
    assert status is FreshStatus.STARVED
    assert out is policy.neutral


def test_starved_without_last_good(policy):
    out, status = apply_stale_policy(None, 0.0, policy)
    assert status is FreshStatus.STARVED
    assert out is policy.neutral


def test_boundaries(policy, good):
    assert apply_stale_policy(good, 100.0, policy)[1] is FreshStatus.FRESH
    assert apply_stale_policy(good, 100.001, policy)[1] is FreshStatus.STALE
    assert apply_stale_policy(good, 1000.0, policy)[1] is FreshStatus.STALE
    assert apply_stale_policy(good, 1000.001, policy)[1] is FreshStatus.STARVED


def test_policy_validation(humanoid):
    neutral = rest_configuration(humanoid)
    with pytest.raises(ConfigError):
        StalePolicy(neutral=neutral, fresh_ms=0.0)
    with pytest.raises(ConfigError):
        StalePolicy(neutral=neutral, fresh_ms=200.0, hold_ms=100.0)
    with pytest.raises(ConfigError):
        apply_stale_policy(None, -1.0, StalePolicy(neutral=neutral))
