"""Task generation and discovery of the task tuple from observed trajectories."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .env import Task, Trajectory, TrajectoryBatch, as_batch

# packets are at least one cycle, so anything below half a cycle is rounding
DETECT_TOL = 0.5


class NoArrivalsError(ValueError):
    """Trajectory shows no packet arrivals; the task cannot be identified."""


@dataclass(frozen=True)
class TaskRanges:
    lam: tuple = (1.0, 5.0)
    abar: tuple = (1e7, 5e7)
    avar: float = 5e6
    alpha: float = 1e-21
    eps_max: tuple = (3e6, 8e6)

    def __post_init__(self):
        for name in ("lam", "abar", "eps_max"):
            lo, hi = getattr(self, name)
            if not (0 < lo <= hi):
                raise ValueError(f"invalid range for {name}: ({lo}, {hi})")
        if self.lam[0] < 1:
            raise ValueError("lam range must start at >= 1")
        if not self.avar >= 0 or not self.alpha > 0:
            raise ValueError("avar must be >= 0 and alpha > 0")


def generate_task(ranges: TaskRanges, rng: np.random.Generator) -> Task:
    lam = rng.uniform(*ranges.lam)
    abar = rng.uniform(*ranges.abar)
    eps_max = rng.uniform(*ranges.eps_max)
    return Task(lam=float(lam), abar=float(abar), avar=ranges.avar,
                alpha=ranges.alpha, eps_max=float(eps_max))


@dataclass(frozen=True)
class TaskEstimate:
    """Task tuple recovered from trajectories.

    ``n_slots``, ``size_sum`` and ``size_sqsum`` are the sufficient statistics,
    kept so estimates from several visits can be pooled with :meth:`merge`.
    """

    lambda_hat: float
    abar_hat: float
    alpha: float
    eps_max: float
    q_count: int
    n_slots: int = 0
    size_sum: float = 0.0
    size_sqsum: float = 0.0

    @classmethod
    def from_counts(cls, n_slots, q_count, size_sum, size_sqsum, alpha, eps_max):
        if q_count == 0:
            return cls(np.nan, np.nan, alpha, eps_max, 0, n_slots, 0.0, 0.0)
        return cls(n_slots / q_count, size_sum / q_count, alpha, eps_max, int(q_count),
                   int(n_slots), float(size_sum), float(size_sqsum))

    @property
    def identified(self) -> bool:
        return self.q_count > 0

    @property
    def avar_hat(self) -> float:
        if self.q_count < 2:
            return 0.0
        mean = self.size_sum / self.q_count
        return max(self.size_sqsum / self.q_count - mean * mean, 0.0)

    def merge(self, other: "TaskEstimate") -> "TaskEstimate":
        return TaskEstimate.from_counts(
            self.n_slots + other.n_slots, self.q_count + other.q_count,
            self.size_sum + other.size_sum, self.size_sqsum + other.size_sqsum,
            self.alpha, self.eps_max)

    def as_task(self) -> Task:
        if not self.identified:
            raise NoArrivalsError("no arrivals observed")
        return Task(lam=max(self.lambda_hat, 1.0), abar=self.abar_hat, avar=self.avar_hat,
                    alpha=self.alpha, eps_max=self.eps_max)

    def as_tuple(self):
        return (self.lambda_hat, self.abar_hat, self.alpha, self.eps_max)


def discover_task(traj, device_alpha: float, device_eps_max: float) -> TaskEstimate:
    """Estimate ``(lambda, abar)`` by locating slots where the backlog grew.

    A slot ``t`` counts as an arrival when ``b[t+1] + spent[t] - b[t]`` is
    positive, and that quantity is the arrived size.  ``spent`` is the cycles
    that went into packets that slot.  A batch of trajectories is pooled
    into a single estimate.

    Raises :class:`NoArrivalsError` when no arrival is detected.
    """
    batch = as_batch(traj)
    inflow = batch.next_backlog + batch.processed - batch.backlog
    hit = inflow > DETECT_TOL
    q = int(hit.sum())
    if q == 0:
        raise NoArrivalsError(
            f"no arrivals in {batch.reward.size} slots; collect a longer trajectory")
    sizes = inflow[hit]
    return TaskEstimate.from_counts(batch.reward.size, q, float(sizes.sum()),
                                    float(np.dot(sizes, sizes)), device_alpha, device_eps_max)


def relative_distance(est, task: Task) -> float:
    """Largest relative gap over ``(lambda, abar, alpha, eps_max)``."""
    a = np.asarray(est.as_tuple() if hasattr(est, "as_tuple") else est, dtype=float)
    b = np.asarray(task.as_tuple(), dtype=float)
    return float(np.max(np.abs(a - b) / np.abs(b)))


def match_task(est: TaskEstimate, registry: Sequence, rel_tol: float = 0.1) -> Optional[object]:
    """Id of the closest registered task within ``rel_tol`` on every field, else ``None``.

    Equal distances go to the smallest task id.
    """
    if not rel_tol > 0:
        raise ValueError("rel_tol must be positive")
    if not est.identified:
        return None
    best = None
    for task_id, task in registry:
        dist = relative_distance(est, task)
        if dist > rel_tol:
            continue
        key = (dist, task_id)
        if best is None or key < best:
            best = key
    return None if best is None else best[1]
