import copy

import numpy as np
import pytest

from aoi_llrl import io
from aoi_llrl.env import Task
from aoi_llrl.experiments import (ExperimentConfig, LearningCurve, baseline_threshold,
                                  iterations_to_threshold, jumpstart, run_baseline_pg,
                                  run_comparison, run_llrl_on_new_task, speedup)
from aoi_llrl.uav import TrainConfig, train

TC = TrainConfig(n_tasks=3, n_devices=2, n_eval_traj=20, max_visits_per_task=8,
                 min_visits_per_task=1, seed=2)
TASK = Task(2.5, 2e7, 5e6, 1e-21, 6e6)


@pytest.fixture(scope="module")
def kb():
    return train(TC).kb


def curve(values):
    n = len(values)
    return LearningCurve("x", 0, 0, list(values), [0.0] * n, [0.0] * n)


def test_iterations_to_threshold():
    c = curve(np.linspace(-10, 0, 21))
    assert iterations_to_threshold(c, -10 + 7 * 0.5) == 7
    assert iterations_to_threshold(c, -100) == 0
    assert iterations_to_threshold(c, 1.0) is None
    with pytest.raises(ValueError):
        iterations_to_threshold(curve([]), 0.0)


def test_metrics():
    pg = curve([-2.0, -1.5, -1.0, -1.0])
    ll = curve([-1.8, -1.0, -1.0, -1.0])
    assert baseline_threshold(pg, 0.05) == -1.0 - 0.05
    assert jumpstart(ll, pg) == pytest.approx(0.1)
    assert speedup(ll, pg) == (2 + 1) / (1 + 1)


def test_baseline_zero_iters_and_determinism():
    c0 = run_baseline_pg(TASK, 0, TC, np.random.default_rng(0))
    assert len(c0) == 1
    a = run_baseline_pg(TASK, 3, TC, np.random.default_rng(4))
    b = run_baseline_pg(TASK, 3, TC, np.random.default_rng(4))
    assert a.mean_return == b.mean_return and len(a) == 4


def test_llrl_requires_trained_kb():
    from aoi_llrl.ella import KnowledgeBase
    with pytest.raises(ValueError):
        run_llrl_on_new_task(KnowledgeBase.empty(), TASK, 2, TC, np.random.default_rng(0))


def test_llrl_isolation_and_length(kb):
    before = copy.deepcopy(kb)
    ll, kb_after = run_llrl_on_new_task(kb, TASK, 3, TC, np.random.default_rng(0))
    pg = run_baseline_pg(TASK, 3, TC, np.random.default_rng(0))
    assert len(ll) == len(pg) == 4
    assert kb_after.M == kb.M + 1
    assert np.array_equal(kb.L, before.L) and kb.registry.keys() == before.registry.keys()


def test_snapshot_gives_same_curve(kb, tmp_path):
    io.save_snapshot(kb, tmp_path / "kb.json")
    loaded = io.load_snapshot(tmp_path / "kb.json")
    a, _ = run_llrl_on_new_task(kb, TASK, 3, TC, np.random.default_rng(5))
    b, _ = run_llrl_on_new_task(loaded, TASK, 3, TC, np.random.default_rng(5))
    assert a.mean_return == b.mean_return


def test_comparison_bookkeeping(kb, tmp_path):
    cfg = ExperimentConfig(train=TC, n_test_tasks=2, n_eval_iterations=2, seeds=(0, 1),
                           n_seq_tasks=2, out_dir=str(tmp_path))
    rep = run_comparison(cfg, kb=kb)
    assert len(rep.jumpstart) == len(rep.speedup) == 2
    pairs = [c for c in rep.curves if c.algo in ("pg", "llrl")]
    assert len(pairs) == 2 * 2 * 2
    assert all(s > 0 for s in rep.speedup)
    rows = io.read_curves_csv(tmp_path / "curves.csv")
    groups = {}
    for r in rows:
        groups.setdefault((r["algo"], r["task_id"], r["seed"]), []).append(int(r["iteration"]))
    assert all(v == list(range(len(v))) for v in groups.values())
    again = run_comparison(cfg, kb=kb)
    assert again.to_dict() == rep.to_dict()


def test_pg_learns_on_frequent_arrivals():
    """With lambda = 1 plain policy gradient should cut AoI on most seeds."""
    task = Task(1.0, 1.5e7, 5e6, 1e-21, 6e6)
    wins = 0
    for seed in range(20):
        c = run_baseline_pg(task, 30, TC, np.random.default_rng(seed), eval_seed=(seed,))
        wins += c.mean_aoi[-1] < c.mean_aoi[0]
    assert wins >= 16
