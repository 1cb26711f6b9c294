"""Discrete-time single-device queue with AoI and energy accounting.

Each slot runs, in order: packet arrival, reward on the pre-action state,
FCFS processing of ``eps`` cycles, backlog clamp, clock advance, AoI update.

Two simulators share that contract.  :func:`step` / :func:`rollout` keep an
explicit FIFO of :class:`PendingPacket` and are the reference.
:func:`rollout_batch` advances ``n`` independent devices with numpy and does
the same floating point operations in the same order, so for ``n == 1`` it is
bit-identical to :func:`rollout` under the same seed.

Random draws per slot are fixed at three (action noise, arrival uniform,
size normal) regardless of the policy, so two policies run on the same seed
see the same arrival process.
"""
from __future__ import annotations

import dataclasses
from collections import deque
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .policy import GaussianPolicy, act, featurize

MIN_PACKET_CYCLES = 1.0


@dataclass(frozen=True)
class Task:
    """Environment tuple: mean inter-arrival slots, packet-size moments, chip constant, CPU cap."""

    lam: float
    abar: float
    avar: float
    alpha: float
    eps_max: float

    def __post_init__(self):
        if not self.lam >= 1:
            raise ValueError(f"lam must be >= 1, got {self.lam}")
        if not self.abar > 0:
            raise ValueError(f"abar must be > 0, got {self.abar}")
        if not self.avar >= 0:
            raise ValueError(f"avar must be >= 0, got {self.avar}")
        if not self.alpha > 0:
            raise ValueError(f"alpha must be > 0, got {self.alpha}")
        if not self.eps_max > 0:
            raise ValueError(f"eps_max must be > 0, got {self.eps_max}")

    @property
    def arrival_prob(self) -> float:
        return 1.0 / self.lam

    def as_tuple(self):
        return (self.lam, self.abar, self.alpha, self.eps_max)


@dataclass(frozen=True)
class PendingPacket:
    arrival_slot: int
    remaining_cycles: float


@dataclass
class DeviceState:
    t: int = 0
    aoi: int = 0
    backlog: float = 0.0
    queue: deque = field(default_factory=deque)
    last_completed_arrival: Optional[int] = None

    def copy(self) -> "DeviceState":
        # packets are never mutated in place, so a shallow queue copy suffices
        return dataclasses.replace(self, queue=deque(self.queue))


class StepRecord(NamedTuple):
    aoi: int
    backlog: float
    action_eps: float
    reward: float
    completed: bool
    arrived: bool
    arrived_size: float
    y_raw: float = float("nan")
    processed: float = float("nan")

    @property
    def obs(self):
        return (self.aoi, self.backlog)


@dataclass
class Trajectory:
    """One device trajectory stored column-wise.

    ``aoi``/``backlog`` are the observed pre-action state of each slot,
    ``processed`` the cycles that actually went into packets (never more than
    ``eps``).  ``final_backlog``/``final_aoi`` are the state after the last slot.
    """

    aoi: np.ndarray
    backlog: np.ndarray
    eps: np.ndarray
    reward: np.ndarray
    completed: np.ndarray
    arrived: np.ndarray
    arrived_size: np.ndarray
    final_backlog: float
    final_aoi: int
    y_raw: Optional[np.ndarray] = None
    processed: Optional[np.ndarray] = None
    task_id_hint: Optional[object] = None

    def __post_init__(self):
        T = len(self.reward)
        if T < 1:
            raise ValueError("trajectory must have at least one step")
        if self.y_raw is None:
            self.y_raw = np.full(T, np.nan)
        if self.processed is None:
            self.processed = np.asarray(self.eps, dtype=float).copy()

    def __len__(self):
        return len(self.reward)

    @property
    def steps(self) -> list[StepRecord]:
        return [
            StepRecord(int(self.aoi[t]), float(self.backlog[t]), float(self.eps[t]),
                       float(self.reward[t]), bool(self.completed[t]), bool(self.arrived[t]),
                       float(self.arrived_size[t]), float(self.y_raw[t]), float(self.processed[t]))
            for t in range(len(self))
        ]

    @property
    def next_backlog(self) -> np.ndarray:
        """Backlog at the start of slot ``t + 1`` for each ``t``."""
        return np.append(self.backlog[1:], self.final_backlog)

    @classmethod
    def from_steps(cls, steps: Sequence[StepRecord], final: DeviceState, task_id_hint=None):
        cols = list(zip(*steps))
        return cls(
            aoi=np.array(cols[0], dtype=np.int64),
            backlog=np.array(cols[1], dtype=float),
            eps=np.array(cols[2], dtype=float),
            reward=np.array(cols[3], dtype=float),
            completed=np.array(cols[4], dtype=bool),
            arrived=np.array(cols[5], dtype=bool),
            arrived_size=np.array(cols[6], dtype=float),
            y_raw=np.array(cols[7], dtype=float),
            processed=np.array(cols[8], dtype=float),
            final_backlog=final.backlog,
            final_aoi=final.aoi,
            task_id_hint=task_id_hint,
        )


@dataclass
class TrajectoryBatch:
    """``n`` equal-length trajectories as ``(n, T)`` arrays."""

    aoi: np.ndarray
    backlog: np.ndarray
    eps: np.ndarray
    reward: np.ndarray
    completed: np.ndarray
    arrived: np.ndarray
    arrived_size: np.ndarray
    y_raw: np.ndarray
    processed: np.ndarray
    final_backlog: np.ndarray
    final_aoi: np.ndarray

    def __len__(self):
        return self.reward.shape[0]

    @property
    def T(self) -> int:
        return self.reward.shape[1]

    def __getitem__(self, i) -> Trajectory:
        return Trajectory(
            aoi=self.aoi[i], backlog=self.backlog[i], eps=self.eps[i], reward=self.reward[i],
            completed=self.completed[i], arrived=self.arrived[i],
            arrived_size=self.arrived_size[i], y_raw=self.y_raw[i],
            processed=self.processed[i], final_backlog=float(self.final_backlog[i]),
            final_aoi=int(self.final_aoi[i]),
        )

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    @property
    def next_backlog(self) -> np.ndarray:
        return np.concatenate([self.backlog[:, 1:], self.final_backlog[:, None]], axis=1)


def as_batch(trajs) -> TrajectoryBatch:
    """Stack a sequence of equal-length trajectories (or pass a batch through)."""
    if isinstance(trajs, TrajectoryBatch):
        return trajs
    if isinstance(trajs, Trajectory):
        trajs = [trajs]
    trajs = list(trajs)
    if not trajs:
        raise ValueError("empty trajectory batch")
    lengths = {len(tr) for tr in trajs}
    if len(lengths) != 1:
        raise ValueError(f"trajectories must share one length, got {sorted(lengths)}")
    names = ["aoi", "backlog", "eps", "reward", "completed", "arrived",
             "arrived_size", "y_raw", "processed"]
    cols = {k: np.stack([getattr(tr, k) for tr in trajs]) for k in names}
    return TrajectoryBatch(
        **cols,
        final_backlog=np.array([tr.final_backlog for tr in trajs], dtype=float),
        final_aoi=np.array([tr.final_aoi for tr in trajs], dtype=np.int64),
    )


def sample_packet(task: Task, rng: np.random.Generator):
    """Bernoulli(1/lam) arrival with a normal size truncated below at one cycle.

    Always consumes one uniform and at least one normal so the stream stays
    aligned whether or not a packet arrives.
    """
    arrived = rng.random() < task.arrival_prob
    sd = np.sqrt(task.avar)
    size = task.abar + sd * rng.standard_normal()
    while size < MIN_PACKET_CYCLES:
        size = task.abar + sd * rng.standard_normal()
    return bool(arrived), (float(size) if arrived else 0.0)


def _sample_packets(task: Task, rng: np.random.Generator, n: int):
    arrived = rng.random(n) < task.arrival_prob
    sd = np.sqrt(task.avar)
    size = task.abar + sd * rng.standard_normal(n)
    bad = np.flatnonzero(size < MIN_PACKET_CYCLES)
    while bad.size:
        size[bad] = task.abar + sd * rng.standard_normal(bad.size)
        bad = bad[size[bad] < MIN_PACKET_CYCLES]
    return arrived, np.where(arrived, size, 0.0)


def queue_update(backlog: float, arrived: bool, size: float, eps: float) -> float:
    """Pending-cycle recursion ``max(backlog + arrived * size - eps, 0)``."""
    if backlog < 0 or eps < 0 or (arrived and size < 0):
        raise ValueError("queue_update inputs must be non-negative")
    inflow = size if arrived else 0.0
    return max(backlog + inflow - eps, 0.0)


def aoi_update(aoi: int, t_next: int, completed: bool, u_latest: int) -> int:
    if not completed:
        return aoi + 1
    if u_latest >= t_next:
        raise ValueError(f"completed packet arrival {u_latest} must precede slot {t_next}")
    return t_next - u_latest


def cost(aoi, eps, alpha: float, beta: float):
    """Weighted AoI plus cubic CPU energy."""
    if not 0.0 <= beta <= 1.0:
        raise ValueError(f"beta must lie in [0, 1], got {beta}")
    return beta * aoi + (1.0 - beta) * alpha * eps ** 3


def advance(state: DeviceState, eps: float, arrived: bool, size: float, task: Task,
            beta: float, y_raw: float = float("nan")):
    """Deterministic part of :func:`step` given an already-sampled arrival."""
    if not 0.0 <= eps <= task.eps_max:
        raise ValueError(f"eps={eps} outside [0, {task.eps_max}]")
    new = state.copy()
    t = state.t
    if arrived:
        new.queue.append(PendingPacket(t, size))
    reward = -cost(state.aoi, eps, task.alpha, beta)

    budget = eps
    completed = False
    u_latest = -1
    while new.queue and budget > 0:
        head = new.queue[0]
        if head.remaining_cycles <= budget:
            budget = budget - head.remaining_cycles
            new.queue.popleft()
            completed = True
            u_latest = head.arrival_slot
        else:
            new.queue[0] = PendingPacket(head.arrival_slot, head.remaining_cycles - budget)
            budget = 0.0

    new.backlog = queue_update(state.backlog, arrived, size, eps)
    new.t = t + 1
    new.aoi = aoi_update(state.aoi, new.t, completed, u_latest)
    if completed:
        new.last_completed_arrival = u_latest
    rec = StepRecord(state.aoi, state.backlog, eps, reward, completed, arrived,
                     size if arrived else 0.0, y_raw, eps - budget)
    return new, rec


def step(state: DeviceState, eps: float, task: Task, rng: np.random.Generator, beta: float):
    """Advance one slot; returns ``(new_state, StepRecord)``."""
    if not 0.0 <= eps <= task.eps_max:
        raise ValueError(f"eps={eps} outside [0, {task.eps_max}]")
    arrived, size = sample_packet(task, rng)
    return advance(state, eps, arrived, size, task, beta)


def rollout(policy: GaussianPolicy, task: Task, T: int, rng: np.random.Generator,
            beta: float, task_id_hint=None) -> Trajectory:
    if T < 1:
        raise ValueError("T must be >= 1")
    state = DeviceState()
    steps = []
    for _ in range(T):
        x = featurize(state.aoi, state.backlog, task.eps_max)
        eps, y_raw = act(policy, x, task.eps_max, rng)
        arrived, size = sample_packet(task, rng)
        state, rec = advance(state, eps, arrived, size, task, beta, y_raw)
        steps.append(rec)
    return Trajectory.from_steps(steps, state, task_id_hint)


def rollout_batch(policy: GaussianPolicy, task: Task, T: int, n: int,
                  rng: np.random.Generator, beta: float) -> TrajectoryBatch:
    """Simulate ``n`` independent devices for ``T`` slots in lockstep."""
    if T < 1 or n < 1:
        raise ValueError("T and n must be >= 1")
    if not 0.0 <= beta <= 1.0:
        raise ValueError(f"beta must lie in [0, 1], got {beta}")
    rows = np.arange(n)
    aoi = np.zeros(n, dtype=np.int64)
    backlog = np.zeros(n)
    # FIFO per device: at most one packet per slot, so T columns suffice
    rem = np.zeros((n, T))
    pk_slot = np.zeros((n, T), dtype=np.int64)
    head = np.zeros(n, dtype=np.int64)
    tail = np.zeros(n, dtype=np.int64)

    out = {k: np.empty((n, T)) for k in ("backlog", "eps", "reward", "arrived_size",
                                         "y_raw", "processed")}
    out_aoi = np.empty((n, T), dtype=np.int64)
    out_completed = np.empty((n, T), dtype=bool)
    out_arrived = np.empty((n, T), dtype=bool)

    for t in range(T):
        x = featurize(aoi, backlog, task.eps_max)
        eps, y_raw = act(policy, x, task.eps_max, rng)
        arrived, size = _sample_packets(task, rng, n)

        arr_rows = rows[arrived]
        rem[arr_rows, tail[arr_rows]] = size[arrived]
        pk_slot[arr_rows, tail[arr_rows]] = t
        tail[arr_rows] += 1

        reward = -cost(aoi, eps, task.alpha, beta)

        budget = eps.copy()
        completed = np.zeros(n, dtype=bool)
        u_latest = np.full(n, -1, dtype=np.int64)
        while True:
            idx = rows[(budget > 0) & (head < tail)]
            if idx.size == 0:
                break
            h = rem[idx, head[idx]]
            r = budget[idx]
            fin = h <= r
            done, part = idx[fin], idx[~fin]
            budget[done] = r[fin] - h[fin]
            rem[done, head[done]] = 0.0
            completed[done] = True
            u_latest[done] = pk_slot[done, head[done]]
            head[done] += 1
            rem[part, head[part]] = h[~fin] - r[~fin]
            budget[part] = 0.0

        out_aoi[:, t] = aoi
        out["backlog"][:, t] = backlog
        out["eps"][:, t] = eps
        out["reward"][:, t] = reward
        out["arrived_size"][:, t] = size
        out["y_raw"][:, t] = y_raw
        out["processed"][:, t] = eps - budget
        out_completed[:, t] = completed
        out_arrived[:, t] = arrived

        backlog = np.maximum(backlog + size - eps, 0.0)
        aoi = np.where(completed, (t + 1) - u_latest, aoi + 1)

    return TrajectoryBatch(
        aoi=out_aoi, completed=out_completed, arrived=out_arrived,
        final_backlog=backlog, final_aoi=aoi, **out,
    )
