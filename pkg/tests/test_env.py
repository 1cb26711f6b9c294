from collections import deque

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from aoi_llrl.env import (DeviceState, PendingPacket, Task, advance, aoi_update, cost,
                          queue_update, rollout, rollout_batch, sample_packet, step)
from aoi_llrl.policy import GaussianPolicy


def full_speed(sigma=1e-9):
    # bias far above 1 clips every action to eps_max
    return GaussianPolicy(np.array([0.0, 0.0, 5.0]), sigma)


# sample_packet ---------------------------------------------------------------

def test_lambda_one_always_arrives(rng):
    t = Task(1.0, 2e7, 5e6, 1e-21, 5e6)
    assert all(sample_packet(t, rng)[0] for _ in range(500))


def test_zero_variance_size_is_mean(rng):
    t = Task(1.0, 2e7, 0.0, 1e-21, 5e6)
    assert sample_packet(t, rng) == (True, 2e7)


def test_arrival_rate_monte_carlo():
    t = Task(4.0, 2e7, 5e6, 1e-21, 5e6)
    rng = np.random.default_rng(0)
    hits = [sample_packet(t, rng)[0] for _ in range(100_000)]
    assert abs(np.mean(hits) - 0.25) < 0.01


def test_sizes_truncated_at_one_cycle():
    t = Task(1.0, 1.0, 100.0, 1e-21, 5e6)
    rng = np.random.default_rng(3)
    sizes = [sample_packet(t, rng)[1] for _ in range(2000)]
    assert min(sizes) >= 1.0


# queue_update / aoi_update / cost ------------------------------------------

@pytest.mark.parametrize("args, expected", [
    ((0.0, False, 0.0, 5.0), 0.0),
    ((10.0, True, 7.0, 4.0), 13.0),
    ((3.0, False, 0.0, 9.0), 0.0),
])
def test_queue_update_examples(args, expected):
    assert queue_update(*args) == expected


def test_queue_update_rejects_negative():
    with pytest.raises(ValueError):
        queue_update(-1.0, False, 0.0, 1.0)
    with pytest.raises(ValueError):
        queue_update(1.0, False, 0.0, -1.0)


def test_aoi_update_examples():
    assert aoi_update(4, 0, False, 0) == 5
    assert aoi_update(8, 10, True, 7) == 3
    assert aoi_update(8, 10, True, 9) == 1
    with pytest.raises(ValueError):
        aoi_update(8, 10, True, 10)


def test_cost_examples():
    assert cost(7, 123.0, 1e-21, 1.0) == 7
    assert cost(3, 8e6, 1e-21, 0.0) == pytest.approx(0.512, rel=1e-12)
    assert cost(2, 2e6, 1e-21, 0.5) == pytest.approx(1.004, rel=1e-12)
    with pytest.raises(ValueError):
        cost(1, 1.0, 1e-21, 1.5)


# step ----------------------------------------------------------------------

def test_idle_slots_age_and_keep_backlog(task):
    s = DeviceState(backlog=5.0, queue=deque([PendingPacket(0, 5.0)]))
    for k in range(5):
        s, rec = advance(s, 0.0, False, 0.0, task, 0.5)
        assert s.aoi == k + 1 and s.backlog == 5.0


def test_hand_simulated_packet():
    # size 6 arrives at t=0, 3 cycles a slot -> completes in slot 1, aoi(2) = 2 - 0
    t = Task(1.0, 6.0, 0.0, 1e-21, 3.0)
    s = DeviceState()
    s, r0 = advance(s, 3.0, True, 6.0, t, 0.5)
    assert not r0.completed and s.backlog == 3.0 and s.aoi == 1
    s, r1 = advance(s, 3.0, False, 0.0, t, 0.5)
    assert r1.completed and s.backlog == 0.0 and s.aoi == 2


def test_two_completions_use_latest_arrival():
    t = Task(1.0, 2.0, 0.0, 1e-21, 10.0)
    s = DeviceState()
    s, _ = advance(s, 0.0, True, 2.0, t, 0.5)
    s, _ = advance(s, 0.0, True, 2.0, t, 0.5)
    s, rec = advance(s, 10.0, False, 0.0, t, 0.5)
    assert rec.completed and s.last_completed_arrival == 1 and s.aoi == 3 - 1


def test_step_rejects_out_of_range_eps(task, rng):
    with pytest.raises(ValueError):
        step(DeviceState(), task.eps_max * 1.01, task, rng, 0.5)
    with pytest.raises(ValueError):
        step(DeviceState(), -1.0, task, rng, 0.5)


# rollout ---------------------------------------------------------------------

def test_rollout_length_and_determinism(task):
    pol = GaussianPolicy(np.array([0.1, 0.2, 0.3]), 0.2)
    a = rollout(pol, task, 50, np.random.default_rng(9), 0.5)
    b = rollout(pol, task, 50, np.random.default_rng(9), 0.5)
    assert len(a) == 50
    for name in ("aoi", "backlog", "eps", "reward", "y_raw"):
        assert np.array_equal(getattr(a, name), getattr(b, name))


def test_full_speed_small_packets_drain_every_slot():
    t = Task(1.0, 2e6, 1e4, 1e-21, 5e6)
    tr = rollout(full_speed(), t, 40, np.random.default_rng(0), 0.5)
    assert np.all(tr.next_backlog == 0.0)
    assert np.all(tr.completed)


def test_batch_matches_scalar_reference(task):
    """The vectorised simulator is bit-identical to the FIFO reference for n = 1."""
    pol = GaussianPolicy(np.array([0.3, -0.2, 0.4]), 0.4)
    for seed in range(5):
        ref = rollout(pol, task, 60, np.random.default_rng(seed), 0.5)
        got = rollout_batch(pol, task, 60, 1, np.random.default_rng(seed), 0.5)[0]
        for name in ("aoi", "backlog", "eps", "reward", "completed", "arrived",
                     "arrived_size", "y_raw", "processed"):
            assert np.array_equal(getattr(ref, name), getattr(got, name)), name
        assert ref.final_backlog == got.final_backlog and ref.final_aoi == got.final_aoi


def test_batch_rows_are_independent_devices(task):
    pol = GaussianPolicy(np.array([0.3, -0.2, 0.4]), 0.4)
    b = rollout_batch(pol, task, 30, 64, np.random.default_rng(1), 0.5)
    assert b.reward.shape == (64, 30)
    assert len({tuple(r) for r in b.reward}) > 1


# properties ------------------------------------------------------------------

tasks = st.builds(
    Task,
    lam=st.floats(1.0, 5.0), abar=st.floats(1e5, 5e7), avar=st.floats(0.0, 1e12),
    alpha=st.just(1e-21), eps_max=st.floats(1e6, 8e6))
policies = st.builds(
    lambda a, b, c, s: GaussianPolicy(np.array([a, b, c]), s),
    st.floats(-2, 2), st.floats(-2, 2), st.floats(-1, 2), st.floats(0.05, 1.0))


@settings(max_examples=60, deadline=None)
@given(task=tasks, pol=policies, seed=st.integers(0, 2**32 - 1),
       beta=st.floats(0.0, 1.0))
def test_simulator_invariants(task, pol, seed, beta):
    rng = np.random.default_rng(seed)
    s = DeviceState()
    ever_completed = False
    total_reward, total_cost = 0.0, 0.0
    from aoi_llrl.policy import act, featurize
    for _ in range(40):
        eps, y = act(pol, featurize(s.aoi, s.backlog, task.eps_max), task.eps_max, rng)
        arrived, size = sample_packet(task, rng)
        prev = s
        s, rec = advance(s, eps, arrived, size, task, beta, y)
        ever_completed |= rec.completed
        assert s.backlog >= 0
        assert s.aoi == prev.aoi + 1 or (rec.completed and s.aoi == s.t - s.last_completed_arrival)
        if ever_completed:
            assert s.aoi >= 1
        assert 0.0 <= task.alpha * eps ** 3 <= task.alpha * task.eps_max ** 3
        queued = sum(p.remaining_cycles for p in s.queue)
        assert queued == pytest.approx(s.backlog, rel=1e-9, abs=1e-6)
        assert list(p.arrival_slot for p in s.queue) == sorted(p.arrival_slot for p in s.queue)
        assert rec.reward == -cost(prev.aoi, eps, task.alpha, beta)
        total_reward += rec.reward
        total_cost += cost(prev.aoi, eps, task.alpha, beta)
    assert total_reward == -total_cost
