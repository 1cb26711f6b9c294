"""What the UAV learns about a device from its trajectories alone.

The arrival rate and mean packet size are hidden; the UAV sees only the
backlog trace and the cycles the device spent.  Longer traces shrink the
error roughly like one over the square root of the number of slots.

Run:  python3 demos/02_task_discovery.py
"""
import numpy as np

from aoi_llrl.env import rollout_batch
from aoi_llrl.policy import GaussianPolicy
from aoi_llrl.tasks import TaskRanges, discover_task, generate_task

rng = np.random.default_rng(1)
pol = GaussianPolicy(np.array([0.0, 0.0, 0.5]), 0.5)

print("slots   median |lambda err|   median |abar err|")
for n_traj in (1, 10, 100):
    lam_err, abar_err = [], []
    for _ in range(50):
        task = generate_task(TaskRanges(), rng)
        b = rollout_batch(pol, task, 50, n_traj, rng, 0.5)
        est = discover_task(b, task.alpha, task.eps_max)
        lam_err.append(abs(est.lambda_hat / task.lam - 1))
        abar_err.append(abs(est.abar_hat / task.abar - 1))
    print(f"{50 * n_traj:5d}   {np.median(lam_err):19.3%}   {np.median(abar_err):17.3%}")
