"""REINFORCE base learner for the linear-Gaussian policy."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .env import Task, as_batch, rollout_batch
from .policy import AOI_REF, GaussianPolicy, act, featurize  # noqa: F401  (re-exported)


@dataclass(frozen=True)
class GradientEstimate:
    grad: np.ndarray
    n_traj: int
    mean_return: float


@dataclass(frozen=True)
class Evaluation:
    mean_return: float
    mean_aoi: float
    mean_energy: float


def _discounts(T: int, gamma: float) -> np.ndarray:
    return gamma ** np.arange(T)


def trajectory_return(traj, gamma: float):
    """Discounted average reward ``(1/T) sum_t gamma^t r_t``.

    Scalar for a single trajectory, one value per row for a batch.
    """
    if not 0 < gamma <= 1:
        raise ValueError("gamma must lie in (0, 1]")
    reward = traj.reward
    T = reward.shape[-1]
    if T < 1:
        raise ValueError("empty trajectory")
    out = reward @ _discounts(T, gamma) / T
    return float(out) if np.ndim(out) == 0 else out


def _features(batch, eps_max):
    return featurize(batch.aoi, batch.backlog, eps_max)


def reinforce_gradient(policy: GaussianPolicy, trajs, gamma: float, eps_max: float,
                       use_baseline: bool = True) -> GradientEstimate:
    """Likelihood-ratio gradient of J, ascending direction.

    ``mean_tau (R(tau) - B) * sum_t sigma^-2 (y_t - theta^T x_t) x_t`` with
    ``B`` the batch-mean return when ``use_baseline``.
    """
    batch = as_batch(trajs)
    if np.any(np.isnan(batch.y_raw)):
        raise ValueError("trajectories must carry the raw Gaussian actions")
    x = _features(batch, eps_max)                       # (n, T, d)
    resid = batch.y_raw - x @ policy.theta              # (n, T)
    score = np.einsum("nt,ntd->nd", resid, x) / policy.sigma ** 2
    ret = trajectory_return(batch, gamma)
    base = ret.mean() if use_baseline else 0.0
    grad = (ret - base) @ score / len(batch)
    return GradientEstimate(grad=grad, n_traj=len(batch), mean_return=float(ret.mean()))


def pg_step(policy: GaussianPolicy, grad: GradientEstimate, lr: float,
            clip_norm: float) -> GaussianPolicy:
    if not lr > 0:
        raise ValueError("lr must be positive")
    if not clip_norm > 0:
        raise ValueError("clip_norm must be positive")
    g = np.asarray(grad.grad if isinstance(grad, GradientEstimate) else grad, dtype=float)
    norm = np.linalg.norm(g)
    if norm > clip_norm:
        g = g * (clip_norm / norm)
    return GaussianPolicy(policy.theta + lr * g, policy.sigma)


def hessian(trajs, sigma: float, eps_max: float) -> np.ndarray:
    """``mean_tau sum_t sigma^-2 x_t x_t^T``."""
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    batch = as_batch(trajs)
    x = _features(batch, eps_max)
    gram = np.einsum("ntd,nte->de", x, x) / len(batch)
    gram = 0.5 * (gram + gram.T)
    return gram / sigma ** 2


def evaluate(policy: GaussianPolicy, task: Task, n_traj: int, T: int, gamma: float,
             beta: float, rng: np.random.Generator) -> Evaluation:
    """Mean discounted return plus per-slot mean AoI and energy over fresh rollouts."""
    if n_traj < 1:
        raise ValueError("n_traj must be >= 1")
    batch = rollout_batch(policy, task, T, n_traj, rng, beta)
    return Evaluation(
        mean_return=float(np.mean(trajectory_return(batch, gamma))),
        mean_aoi=float(batch.aoi.mean()),
        mean_energy=float(np.mean(task.alpha * batch.eps ** 3)),
    )


def estimate_J(policy: GaussianPolicy, task: Task, n_traj: int, T: int, gamma: float,
               beta: float, rng: np.random.Generator) -> float:
    return evaluate(policy, task, n_traj, T, gamma, beta, rng).mean_return
