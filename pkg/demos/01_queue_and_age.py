"""A single device: how CPU effort trades age of information against energy.

Run:  python3 demos/01_queue_and_age.py
"""
import numpy as np

from aoi_llrl.env import Task, rollout_batch
from aoi_llrl.learner import trajectory_return
from aoi_llrl.policy import GaussianPolicy

task = Task(lam=2.0, abar=1.5e7, avar=5e6, alpha=1e-21, eps_max=6e6)
print(task)
print(f"one packet needs {task.abar / task.eps_max:.1f} slots at full speed; "
      f"one arrives every {task.lam:.0f} slots on average\n")

# constant-effort policies: theta = (0, 0, fraction) with almost no noise
for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
    pol = GaussianPolicy(np.array([0.0, 0.0, frac]), 1e-6)
    b = rollout_batch(pol, task, 50, 200, np.random.default_rng(0), beta=0.5)
    energy = task.alpha * b.eps ** 3
    print(f"effort {frac:4.2f}: mean AoI {b.aoi.mean():6.2f}   energy/slot {energy.mean():.4f} J"
          f"   return {trajectory_return(b, 0.9).mean():.4f}")

# a state-dependent policy: work harder when the queue is long
pol = GaussianPolicy(np.array([0.0, 0.3, 0.4]), 0.05)
b = rollout_batch(pol, task, 50, 200, np.random.default_rng(0), beta=0.5)
print(f"\nbacklog-aware   : mean AoI {b.aoi.mean():6.2f}   "
      f"energy/slot {(task.alpha * b.eps ** 3).mean():.4f} J   "
      f"return {trajectory_return(b, 0.9).mean():.4f}")

# the AoI sawtooth of the first device
print("\nAoI over the first 25 slots of one device:")
print(" ".join(str(a) for a in b.aoi[0, :25]))
