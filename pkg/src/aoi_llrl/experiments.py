"""Head-to-head runs of the lifelong learner against plain policy gradient.

Every evaluation point draws its rollouts from a fixed per-(task, seed)
stream, so the two algorithms and all iterations of one curve are compared
under common random numbers.
"""
from __future__ import annotations

import copy
import dataclasses
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import ella, io
from .env import Task, rollout_batch
from .learner import evaluate, pg_step, reinforce_gradient
from .tasks import NoArrivalsError, TaskRanges, discover_task, generate_task, relative_distance
from .uav import Device, TrainConfig, random_policy, train, visit

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ExperimentConfig:
    train: TrainConfig = field(default_factory=TrainConfig)
    n_test_tasks: int = 20
    n_eval_iterations: int = 100
    seeds: tuple = (0, 1, 2, 3, 4)
    n_seq_tasks: int = 10
    threshold_frac: float = 0.05
    out_dir: Optional[str] = None

    def __post_init__(self):
        if self.n_test_tasks < 1:
            raise ValueError("n_test_tasks must be >= 1")
        if self.n_eval_iterations < 0 or self.n_seq_tasks < 0:
            raise ValueError("iteration and task counts must be non-negative")
        if len(self.seeds) == 0:
            raise ValueError("seeds must be non-empty")
        if not 0 <= self.threshold_frac < 1:
            raise ValueError("threshold_frac must lie in [0, 1)")


@dataclass
class LearningCurve:
    algo: str
    task_id: int
    seed: int
    mean_return: list = field(default_factory=list)
    mean_aoi: list = field(default_factory=list)
    mean_energy: list = field(default_factory=list)

    def __len__(self):
        return len(self.mean_return)

    def record(self, ev) -> None:
        self.mean_return.append(ev.mean_return)
        self.mean_aoi.append(ev.mean_aoi)
        self.mean_energy.append(ev.mean_energy)


def _stream(*key) -> np.random.Generator:
    return np.random.default_rng([int(k) for k in key])


def _eval(policy, task, cfg: TrainConfig, eval_seed):
    rng = _stream(*np.atleast_1d(eval_seed))
    return evaluate(policy, task, cfg.n_eval_traj, cfg.T, cfg.gamma, cfg.beta, rng)


def run_baseline_pg(task: Task, iters: int, cfg: TrainConfig, rng: np.random.Generator,
                    eval_seed=0, algo: str = "pg", task_id: int = 0, seed: int = 0,
                    ) -> LearningCurve:
    """Plain REINFORCE from a random policy; ``iters`` updates, ``iters + 1`` points."""
    if iters < 0:
        raise ValueError("iters must be >= 0")
    policy = random_policy(cfg, rng)
    curve = LearningCurve(algo, task_id, seed)
    curve.record(_eval(policy, task, cfg, eval_seed))
    for _ in range(iters):
        batch = rollout_batch(policy, task, cfg.T, cfg.n_traj_per_visit, rng, cfg.beta)
        grad = reinforce_gradient(policy, batch, cfg.gamma, task.eps_max)
        policy = pg_step(policy, grad, cfg.lr, cfg.clip_norm)
        curve.record(_eval(policy, task, cfg, eval_seed))
    return curve


def transfer_policy(kb: ella.KnowledgeBase, est, sigma: float):
    """Policy of the registered task whose tuple is closest to ``est``."""
    if kb.M == 0 or not kb.registry:
        raise ValueError("knowledge base has no registered tasks")
    tid = min(kb.registry, key=lambda k: (relative_distance(est, kb.registry[k].task), k))
    return ella.compose_policy(kb.L, kb.registry[tid].s, sigma), tid


def run_llrl_on_new_task(kb: ella.KnowledgeBase, task: Task, iters: int, cfg: TrainConfig,
                         rng: np.random.Generator, eval_seed=0, algo: str = "llrl",
                         task_id: int = 0, seed: int = 0, copy_kb: bool = True):
    """Lifelong learner on a fresh task; returns ``(curve, kb_after)``.

    Bootstrap: a probe batch under the same random policy the baseline starts
    from identifies the task tuple; the device is handed the policy of the
    nearest registered task; one visit then fits this task's code and the
    curve starts from ``L s``.  Each further iteration is one visit.
    """
    if kb.M < 1:
        raise ValueError("knowledge base is untrained (M = 0)")
    if iters < 0:
        raise ValueError("iters must be >= 0")
    if copy_kb:
        kb = copy.deepcopy(kb)
    probe_policy = random_policy(cfg, rng)
    T = cfg.T
    while True:
        probe = rollout_batch(probe_policy, task, T, cfg.n_traj_per_visit, rng, cfg.beta)
        try:
            est = discover_task(probe, task.alpha, task.eps_max)
            break
        except NoArrivalsError:
            T *= 2
    policy, _ = transfer_policy(kb, est, cfg.sigma)
    device = Device(id=-1, current_task=task, policy=policy)

    curve = LearningCurve(algo, task_id, seed)
    for i in range(iters + 1):
        kb, device, _ = visit(kb, device, cfg, rng, iteration=i, evaluate_after=False)
        curve.record(_eval(device.policy, task, cfg, eval_seed))
    return curve, kb


def iterations_to_threshold(curve: LearningCurve, threshold: float) -> Optional[int]:
    if len(curve) == 0:
        raise ValueError("empty curve")
    hits = np.flatnonzero(np.asarray(curve.mean_return) >= threshold)
    return int(hits[0]) if hits.size else None


def baseline_threshold(curve: LearningCurve, frac: float = 0.05) -> float:
    """Baseline's final return less ``frac`` of its total range."""
    r = np.asarray(curve.mean_return)
    return float(r[-1] - frac * (r.max() - r.min()))


def jumpstart(llrl: LearningCurve, pg: LearningCurve) -> float:
    j0 = pg.mean_return[0]
    return float((llrl.mean_return[0] - j0) / abs(j0))


def speedup(llrl: LearningCurve, pg: LearningCurve, frac: float = 0.05) -> float:
    """``(iters_pg + 1) / (iters_llrl + 1)``; a never-reached threshold counts as the full curve."""
    thr = baseline_threshold(pg, frac)
    n_pg = iterations_to_threshold(pg, thr)
    n_llrl = iterations_to_threshold(llrl, thr)
    n_pg = len(pg) if n_pg is None else n_pg
    n_llrl = len(llrl) if n_llrl is None else n_llrl
    return (n_pg + 1) / (n_llrl + 1)


@dataclass
class ComparisonReport:
    tasks: list
    jumpstart: list
    speedup: list
    iters_pg: list
    iters_llrl: list
    sequential_gap: list
    sequential_rel_gap: list
    curves: list = field(default_factory=list, repr=False)

    def summary(self) -> dict:
        js = np.asarray(self.jumpstart)
        sp = np.asarray(self.speedup)
        gap = np.asarray(self.sequential_gap)
        return {
            "n_test_tasks": len(self.tasks),
            "mean_jumpstart": float(js.mean()),
            "frac_tasks_jumpstart_ge_5pct": float(np.mean(js >= 0.05)),
            "median_speedup": float(np.median(sp)),
            "best_speedup": float(sp.max()),
            "worst_speedup": float(sp.min()),
            "sequential_gap": gap.tolist(),
            "sequential_rel_gap": list(self.sequential_rel_gap),
            "n_seeds_positive_gap": int(np.sum(gap > 0)),
        }

    def to_dict(self) -> dict:
        return {
            "summary": self.summary(),
            "tasks": [dataclasses.asdict(t) for t in self.tasks],
            "jumpstart": list(self.jumpstart),
            "speedup": list(self.speedup),
            "iters_pg": self.iters_pg,
            "iters_llrl": self.iters_llrl,
            "sequential_gap": list(self.sequential_gap),
            "sequential_rel_gap": list(self.sequential_rel_gap),
        }


def compare_on_task(kb, task, k, seed, cfg: ExperimentConfig):
    tc = cfg.train
    eval_seed = (tc.seed, 2, k, seed)
    pg = run_baseline_pg(task, cfg.n_eval_iterations, tc, _stream(tc.seed, 1, k, seed),
                         eval_seed, "pg", k, seed)
    llrl, _ = run_llrl_on_new_task(kb, task, cfg.n_eval_iterations, tc,
                                   _stream(tc.seed, 1, k, seed), eval_seed, "llrl", k, seed)
    return llrl, pg


def run_sequential(kb, cfg: ExperimentConfig, seed: int):
    """Tasks arrive one after another to a single continuing knowledge base.

    Returns ``(llrl_curves, pg_curves)``; each baseline curve starts afresh.
    """
    tc = cfg.train
    task_rng = _stream(tc.seed, 3, seed)
    tasks = [generate_task(tc.ranges, task_rng) for _ in range(cfg.n_seq_tasks)]
    kb = copy.deepcopy(kb)
    llrl_curves, pg_curves = [], []
    for k, task in enumerate(tasks):
        eval_seed = (tc.seed, 4, k, seed)
        curve, kb = run_llrl_on_new_task(kb, task, cfg.n_eval_iterations, tc,
                                         _stream(tc.seed, 5, k, seed), eval_seed,
                                         "llrl_seq", k, seed, copy_kb=False)
        llrl_curves.append(curve)
        pg_curves.append(run_baseline_pg(task, cfg.n_eval_iterations, tc,
                                         _stream(tc.seed, 5, k, seed), eval_seed,
                                         "pg_seq", k, seed))
    return llrl_curves, pg_curves


def run_comparison(cfg: ExperimentConfig, kb: Optional[ella.KnowledgeBase] = None,
                   ) -> ComparisonReport:
    """Train (unless ``kb`` is given), then run the new-task and sequential comparisons.

    Writes ``curves.csv`` and ``report.json`` to ``cfg.out_dir`` when set.
    """
    tc = cfg.train
    if kb is None:
        kb = train(tc).kb
    test_rng = _stream(tc.seed, 6)
    tasks = [generate_task(tc.ranges, test_rng) for _ in range(cfg.n_test_tasks)]
    curves = []
    js, sp, it_pg, it_llrl = [], [], [], []
    for k, task in enumerate(tasks):
        js_k, sp_k, ip, il = [], [], [], []
        for seed in sorted(cfg.seeds):
            llrl, pg = compare_on_task(kb, task, k, seed, cfg)
            curves += [llrl, pg]
            thr = baseline_threshold(pg, cfg.threshold_frac)
            js_k.append(jumpstart(llrl, pg))
            sp_k.append(speedup(llrl, pg, cfg.threshold_frac))
            ip.append(iterations_to_threshold(pg, thr))
            il.append(iterations_to_threshold(llrl, thr))
        js.append(float(np.mean(js_k)))
        sp.append(float(np.mean(sp_k)))
        it_pg.append(ip)
        it_llrl.append(il)
        log.info("test task %d: jumpstart %.3f speedup %.2f", k, js[-1], sp[-1])

    gaps, rel_gaps = [], []
    for seed in sorted(cfg.seeds):
        llrl_c, pg_c = run_sequential(kb, cfg, seed)
        curves += llrl_c + pg_c
        m_llrl = float(np.mean([c.mean_return for c in llrl_c])) if llrl_c else 0.0
        m_pg = float(np.mean([c.mean_return for c in pg_c])) if pg_c else 0.0
        gaps.append(m_llrl - m_pg)
        rel_gaps.append((m_llrl - m_pg) / abs(m_pg) if m_pg else 0.0)
        log.info("sequential seed %d: gap %.4f", seed, gaps[-1])

    report = ComparisonReport(tasks, js, sp, it_pg, it_llrl, gaps, rel_gaps, curves)
    if cfg.out_dir is not None:
        out = Path(cfg.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        io.write_curves_csv(curves, out / "curves.csv")
        io.write_json(report.to_dict(), out / "report.json")
    return report
