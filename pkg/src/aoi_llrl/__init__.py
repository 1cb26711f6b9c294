"""Lifelong policy-gradient learning of AoI/energy tradeoffs on a simulated device fleet."""
from .ella import KnowledgeBase, SolverError, TaskRecord, compose_policy, lasso_solve, update_L
from .env import DeviceState, Task, Trajectory, TrajectoryBatch, rollout, rollout_batch, step
from .experiments import (ComparisonReport, ExperimentConfig, LearningCurve, run_baseline_pg,
                          run_comparison, run_llrl_on_new_task)
from .io import ConfigError, SnapshotError, load_config, load_snapshot, save_snapshot
from .learner import estimate_J, evaluate, hessian, pg_step, reinforce_gradient
from .policy import GaussianPolicy
from .tasks import TaskEstimate, TaskRanges, discover_task, generate_task, match_task
from .uav import Device, TrainConfig, VisitReport, converged, train, visit

__version__ = "0.1.0"
