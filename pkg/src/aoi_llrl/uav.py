"""UAV-side lifelong training loop over a fleet of devices."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import ella
from .env import Task, rollout_batch
from .learner import estimate_J, hessian, pg_step, reinforce_gradient, trajectory_return
from .policy import N_FEATURES, GaussianPolicy
from .tasks import NoArrivalsError, TaskRanges, discover_task, generate_task, match_task


@dataclass(frozen=True)
class TrainConfig:
    """Fleet, learner and knowledge-base settings.

    ``sigma`` is wide enough that a near-zero initial policy still finishes
    packets now and then; with narrow exploration the energy term dominates
    the first gradients and the policy slides into the all-idle region, where
    every return in a batch is the same and the gradient vanishes.  For the
    same reason a task only counts as converged after ``min_visits_per_task``
    visits: a flat start would otherwise pass the window test immediately.
    """

    n_devices: int = 3
    n_tasks: int = 10
    n_traj_per_visit: int = 100
    n_eval_traj: int = 100
    T: int = 50
    beta: float = 0.5
    gamma: float = 0.9
    lr: float = 0.1
    clip_norm: float = 1.0
    sigma: float = 0.7
    init_std: float = 0.01
    eta1: float = 0.1
    eta2: float = 0.1
    h: int = 4
    rel_tol: float = 0.1
    conv_window: int = 5
    conv_threshold: float = 0.01
    max_visits_per_task: int = 200
    min_visits_per_task: int = 40
    seed: int = 0
    ranges: TaskRanges = field(default_factory=TaskRanges)

    def __post_init__(self):
        positive_ints = ("n_devices", "n_tasks", "n_traj_per_visit", "n_eval_traj", "T", "h",
                         "max_visits_per_task")
        for name in positive_ints:
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        for name in ("lr", "clip_norm", "sigma", "eta2", "rel_tol", "conv_threshold",
                     "init_std"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.eta1 < 0:
            raise ValueError("eta1 must be non-negative")
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError("beta must lie in [0, 1]")
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError("gamma must lie in (0, 1]")
        if self.min_visits_per_task > self.max_visits_per_task:
            raise ValueError("min_visits_per_task must not exceed max_visits_per_task")
        if self.conv_window < 2:
            raise ValueError("conv_window must be >= 2")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")


@dataclass
class Device:
    """A ground device.  ``current_task`` is simulator ground truth the UAV never reads."""

    id: int
    current_task: Task
    policy: GaussianPolicy
    traj_len: Optional[int] = None

    @property
    def alpha(self) -> float:
        return self.current_task.alpha

    @property
    def eps_max(self) -> float:
        return self.current_task.eps_max


@dataclass(frozen=True)
class VisitReport:
    iteration: int
    device_id: int
    task_id: Optional[int]
    is_new_task: bool
    mean_return_before: float
    mean_return_after: float
    aborted: bool = False


def random_policy(cfg: TrainConfig, rng: np.random.Generator) -> GaussianPolicy:
    return GaussianPolicy(cfg.init_std * rng.standard_normal(N_FEATURES), cfg.sigma)


def visit(kb: ella.KnowledgeBase, device: Device, cfg: TrainConfig, rng: np.random.Generator,
          eval_rng: Optional[np.random.Generator] = None, iteration: int = 0,
          evaluate_after: bool = True):
    """One UAV visit: collect, discover, base-learner step, refit the basis, push the policy.

    Returns ``(kb, device, report)``.  The input knowledge base is never
    mutated, so a solver failure leaves the caller's copy intact.  With
    ``evaluate_after=False`` the report repeats the pre-update return.
    """
    T = device.traj_len or cfg.T
    policy = device.policy
    batch = rollout_batch(policy, device.current_task, T, cfg.n_traj_per_visit, rng, cfg.beta)
    before = float(np.mean(trajectory_return(batch, cfg.gamma)))

    try:
        est = discover_task(batch, device.alpha, device.eps_max)
    except NoArrivalsError:
        longer = dataclasses.replace(device, traj_len=2 * T)
        report = VisitReport(iteration, device.id, None, False, before, before, aborted=True)
        return kb, longer, report

    known = [(tid, rec.task) for tid, rec in kb.registry.items()]
    task_id = match_task(est, known, cfg.rel_tol)
    work = kb
    if task_id is None:
        is_new = True
        task_id = max(kb.registry, default=-1) + 1
        M = kb.M + 1
        visits = 1
    else:
        is_new = False
        old = kb.registry[task_id]
        work = ella.remove_task_contribution(work, old.s, old.gamma_mat, old.alpha_vec)
        M = kb.M
        visits = old.visits + 1
        est = old.estimate.merge(est)

    grad = reinforce_gradient(policy, batch, cfg.gamma, device.eps_max)
    alpha_vec = pg_step(policy, grad, cfg.lr, cfg.clip_norm).theta
    gamma_mat = hessian(batch, policy.sigma, device.eps_max)

    L = ella.reinit_zero_columns(work.L, rng)
    s = ella.lasso_solve(L, alpha_vec, gamma_mat, work.eta1)
    work = ella.add_task_contribution(work.replace(L=L, M=M), s, gamma_mat, alpha_vec)
    L = ella.update_L(work)

    record = ella.TaskRecord(task=est.as_task(), s=s, alpha_vec=alpha_vec, gamma_mat=gamma_mat,
                             device_id=device.id, visits=visits, estimate=est)
    registry = dict(work.registry)
    registry[task_id] = record
    work = work.replace(L=L, registry=registry)

    new_policy = ella.compose_policy(L, s, policy.sigma)
    device = dataclasses.replace(device, policy=new_policy, traj_len=None)
    after = before
    if evaluate_after:
        after = estimate_J(new_policy, device.current_task, cfg.n_eval_traj, cfg.T, cfg.gamma,
                           cfg.beta, rng if eval_rng is None else eval_rng)
    return work, device, VisitReport(iteration, device.id, task_id, is_new, before, after)


def converged(history, window: int, rel_threshold: float) -> bool:
    """Relative range of the last ``window`` returns is within ``rel_threshold``."""
    if window < 2:
        raise ValueError("window must be >= 2")
    if len(history) < window:
        return False
    tail = np.asarray(history[-window:], dtype=float)
    return bool(tail.max() - tail.min() <= rel_threshold * max(1.0, abs(tail.mean())))


def assign_round_robin(n_tasks: int, n_devices: int) -> list[list[int]]:
    return [list(range(dev, n_tasks, n_devices)) for dev in range(n_devices)]


def eval_stream(seed: int, key) -> np.random.Generator:
    """Fixed evaluation stream per key, giving common random numbers across calls."""
    return np.random.default_rng([seed, 0xE7A1, *np.atleast_1d(key).tolist()])


@dataclass
class TrainingResult:
    kb: ella.KnowledgeBase
    log: list
    tasks: list
    histories: list
    task_ids: list

    def __iter__(self):
        return iter((self.kb, self.log))


def train(cfg: TrainConfig, rng: Optional[np.random.Generator] = None) -> TrainingResult:
    """Train a knowledge base on ``cfg.n_tasks`` tasks spread over ``cfg.n_devices`` devices.

    A task becomes active on its device once the previous one has converged
    (or exhausted ``max_visits_per_task``); each iteration visits a uniformly
    random device that still has an active task.  The run is fully determined
    by ``cfg.seed`` unless ``rng`` is supplied.
    """
    root = np.random.SeedSequence(cfg.seed) if rng is None else np.random.SeedSequence(
        int(rng.integers(2**63)))
    task_rng, init_rng, sched_rng, visit_rng = (np.random.default_rng(s) for s in root.spawn(4))

    tasks = [generate_task(cfg.ranges, task_rng) for _ in range(cfg.n_tasks)]
    queues = assign_round_robin(cfg.n_tasks, cfg.n_devices)
    devices = {dev: Device(dev, tasks[q[0]], random_policy(cfg, init_rng))
               for dev, q in enumerate(queues) if q}
    cursor = {dev: 0 for dev in devices}

    kb = ella.KnowledgeBase.empty(d=N_FEATURES, h=cfg.h, eta1=cfg.eta1, eta2=cfg.eta2)
    histories = [[] for _ in tasks]
    attempts = [0] * len(tasks)
    task_ids = [set() for _ in tasks]
    log = []
    iteration = 0
    while True:
        active = sorted(dev for dev in devices if cursor[dev] < len(queues[dev]))
        if not active:
            break
        dev = active[int(sched_rng.integers(len(active)))]
        k = queues[dev][cursor[dev]]
        kb, devices[dev], report = visit(kb, devices[dev], cfg, visit_rng,
                                         eval_rng=eval_stream(cfg.seed, k), iteration=iteration)
        log.append(report)
        iteration += 1
        attempts[k] += 1
        if not report.aborted:
            histories[k].append(report.mean_return_after)
            task_ids[k].add(report.task_id)
        settled = (len(histories[k]) >= cfg.min_visits_per_task
                   and converged(histories[k], cfg.conv_window, cfg.conv_threshold))
        if settled or attempts[k] >= cfg.max_visits_per_task:
            cursor[dev] += 1
            if cursor[dev] < len(queues[dev]):
                nxt = tasks[queues[dev][cursor[dev]]]
                devices[dev] = dataclasses.replace(devices[dev], current_task=nxt, traj_len=None)
    return TrainingResult(kb, log, tasks, histories, [sorted(ids) for ids in task_ids])
