"""Linear-Gaussian interaction policy over normalized device state."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

AOI_REF = 10.0
N_FEATURES = 3


@dataclass(frozen=True)
class GaussianPolicy:
    """Policy ``y ~ N(theta^T x, sigma^2)``; ``y`` is a fraction of eps_max."""

    theta: np.ndarray = field(default_factory=lambda: np.zeros(N_FEATURES))
    sigma: float = 0.1

    def __post_init__(self):
        theta = np.array(self.theta, dtype=float).reshape(-1)
        if not np.all(np.isfinite(theta)):
            raise ValueError("theta must be finite")
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        object.__setattr__(self, "theta", theta)

    @property
    def dim(self) -> int:
        return self.theta.shape[0]


def featurize(aoi, backlog, eps_max):
    """Map raw ``(aoi, backlog)`` to ``(aoi / AOI_REF, backlog / eps_max, 1)``.

    Works on scalars or arrays of equal shape; the feature axis is last.
    """
    if not eps_max > 0:
        raise ValueError("eps_max must be positive")
    aoi = np.asarray(aoi, dtype=float)
    backlog = np.asarray(backlog, dtype=float)
    if np.any(aoi < 0) or np.any(backlog < 0):
        raise ValueError("aoi and backlog must be non-negative")
    aoi, backlog = np.broadcast_arrays(aoi, backlog)
    return np.stack([aoi / AOI_REF, backlog / eps_max, np.ones_like(aoi)], axis=-1)


def act(policy: GaussianPolicy, feats, eps_max: float, rng: np.random.Generator):
    """Sample an action; returns ``(eps, y_raw)``.

    ``y_raw`` is the unclipped Gaussian sample the gradient needs; ``eps`` is
    ``clip(y_raw, 0, 1) * eps_max``.  ``feats`` may be a single feature vector
    or an ``(n, d)`` batch, in which case one standard normal is drawn per row.
    """
    feats = np.asarray(feats, dtype=float)
    mean = feats @ policy.theta
    if feats.ndim == 1:
        y_raw = float(mean + policy.sigma * rng.standard_normal())
        return float(np.clip(y_raw, 0.0, 1.0) * eps_max), y_raw
    y_raw = mean + policy.sigma * rng.standard_normal(mean.shape[0])
    return np.clip(y_raw, 0.0, 1.0) * eps_max, y_raw
