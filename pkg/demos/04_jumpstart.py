"""A new task: plain policy gradient from scratch vs. starting from the basis.

Both learners see the same evaluation rollouts at every iteration, so the
gap between the curves is the effect of the transferred knowledge.

Run:  python3 demos/04_jumpstart.py      (about a minute)
"""
import numpy as np

from aoi_llrl.env import Task
from aoi_llrl.experiments import ExperimentConfig, compare_on_task, jumpstart, speedup
from aoi_llrl.uav import TrainConfig, train

cfg = ExperimentConfig(train=TrainConfig(seed=0), n_eval_iterations=40)
kb = train(cfg.train).kb

task = Task(lam=2.0, abar=2.5e7, avar=5e6, alpha=1e-21, eps_max=7e6)
for seed in range(3):
    llrl, pg = compare_on_task(kb, task, 0, seed, cfg)
    print(f"seed {seed}: jumpstart {jumpstart(llrl, pg):+.1%}   speedup {speedup(llrl, pg):.2f}")

print("\niteration   pg return   lifelong return")
for i in range(0, len(pg), 5):
    print(f"{i:9d}   {pg.mean_return[i]:9.4f}   {llrl.mean_return[i]:15.4f}")
