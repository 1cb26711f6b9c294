"""Shared latent policy basis with sparse per-task codes.

Task ``j`` is summarised by a policy point ``alpha_j`` and curvature
``Gamma_j``; its policy is ``theta_j = L s_j``.  The basis minimises

    (1/M) sum_j ||alpha_j - L s_j||^2_{Gamma_j} + eta2 ||L||_F^2

with the codes held fixed, which is linear in ``vec(L)``.  ``A`` and ``b``
accumulate the per-task normal-equation terms so the basis is refit in closed
form from one task's contribution at a time.

``vec`` is column-major throughout: ``vec(L)[k * d + i] == L[i, k]``, which
gives ``((s s^T) kron Gamma) vec(L) == vec(Gamma L s s^T)``.
"""
from __future__ import annotations

import dataclasses
import itertools
from operator import mul
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg

from .env import Task
from .policy import GaussianPolicy

LASSO_TOL = 1e-10
LASSO_MAX_SWEEPS = 10_000
REINIT_STD = 0.01
ENUMERATE_MAX_H = 6


class SolverError(RuntimeError):
    pass


def vec(M: np.ndarray) -> np.ndarray:
    return np.asarray(M).reshape(-1, order="F")


def mat(v: np.ndarray, d: int, h: int) -> np.ndarray:
    return np.asarray(v).reshape((d, h), order="F")


@dataclass(frozen=True)
class TaskRecord:
    task: Task
    s: np.ndarray
    alpha_vec: np.ndarray
    gamma_mat: np.ndarray
    device_id: object = None
    visits: int = 1
    estimate: Optional[object] = None


@dataclass(frozen=True)
class KnowledgeBase:
    L: np.ndarray
    A: np.ndarray
    b: np.ndarray
    M: int = 0
    registry: dict = field(default_factory=dict)
    eta1: float = 0.1
    eta2: float = 0.1

    @classmethod
    def empty(cls, d: int = 3, h: int = 4, eta1: float = 0.1, eta2: float = 0.1):
        if d < 1 or h < 1:
            raise ValueError("d and h must be positive")
        if not (eta1 >= 0 and eta2 > 0):
            raise ValueError("eta1 must be >= 0 and eta2 > 0")
        dh = d * h
        return cls(L=np.zeros((d, h)), A=np.zeros((dh, dh)), b=np.zeros(dh),
                   M=0, registry={}, eta1=eta1, eta2=eta2)

    @property
    def d(self) -> int:
        return self.L.shape[0]

    @property
    def h(self) -> int:
        return self.L.shape[1]

    def replace(self, **changes) -> "KnowledgeBase":
        return dataclasses.replace(self, **changes)


def _check_task_terms(kb: KnowledgeBase, s, gamma_mat, alpha_vec):
    s = np.asarray(s, dtype=float)
    gamma_mat = np.asarray(gamma_mat, dtype=float)
    alpha_vec = np.asarray(alpha_vec, dtype=float)
    if s.shape != (kb.h,) or alpha_vec.shape != (kb.d,) or gamma_mat.shape != (kb.d, kb.d):
        raise ValueError(
            f"shape mismatch: s{s.shape}, alpha{alpha_vec.shape}, Gamma{gamma_mat.shape} "
            f"for d={kb.d}, h={kb.h}")
    return s, gamma_mat, alpha_vec


def _contribution(s, gamma_mat, alpha_vec):
    dA = np.kron(np.outer(s, s), gamma_mat)
    db = vec(np.outer(gamma_mat @ alpha_vec, s))
    return dA, db


def add_task_contribution(kb: KnowledgeBase, s, gamma_mat, alpha_vec) -> KnowledgeBase:
    """``A += (s s^T) kron Gamma``, ``b += vec(Gamma alpha s^T)``."""
    s, gamma_mat, alpha_vec = _check_task_terms(kb, s, gamma_mat, alpha_vec)
    dA, db = _contribution(s, gamma_mat, alpha_vec)
    return kb.replace(A=kb.A + dA, b=kb.b + db)


def remove_task_contribution(kb: KnowledgeBase, s_old, gamma_old, alpha_old) -> KnowledgeBase:
    s, gamma_mat, alpha_vec = _check_task_terms(kb, s_old, gamma_old, alpha_old)
    dA, db = _contribution(s, gamma_mat, alpha_vec)
    return kb.replace(A=kb.A - dA, b=kb.b - db)


def update_L(kb: KnowledgeBase) -> np.ndarray:
    """Solve ``((1/M) A + eta2 I) vec(L) = (1/M) b`` by Cholesky."""
    if kb.M < 1:
        raise SolverError("cannot update the basis before any task is registered")
    dh = kb.A.shape[0]
    lhs = kb.A / kb.M + kb.eta2 * np.eye(dh)
    lhs = 0.5 * (lhs + lhs.T)
    rhs = kb.b / kb.M
    try:
        factor = scipy.linalg.cho_factor(lhs)
        x = scipy.linalg.cho_solve(factor, rhs)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise SolverError(f"basis system not solvable: {exc}") from exc
    if not np.all(np.isfinite(x)):
        raise SolverError("basis solve produced non-finite entries")
    return mat(x, kb.d, kb.h)


def reinit_zero_columns(L: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    L = np.array(L, dtype=float)
    zero = ~np.any(L != 0, axis=0)
    if zero.any():
        L[:, zero] = REINIT_STD * rng.standard_normal((L.shape[0], int(zero.sum())))
    return L


def lasso_objective(L, alpha_vec, gamma_mat, eta1, s) -> float:
    r = np.asarray(alpha_vec) - np.asarray(L) @ s
    return float(r @ np.asarray(gamma_mat) @ r + eta1 * np.abs(s).sum())


def _kkt_violation(Q, c, eta1, s) -> float:
    """Largest violation of the subgradient optimality conditions."""
    g = 2.0 * (Q @ s - c)
    nz = s != 0
    viol_nz = np.abs(g[nz] + eta1 * np.sign(s[nz]))
    viol_z = np.maximum(np.abs(g[~nz]) - eta1, 0.0)
    return float(max(viol_nz.max(initial=0.0), viol_z.max(initial=0.0)))


def _solve_on_support(Q, c, eta1, sup, sign):
    # Q has rank <= d < h, so the support system can be singular; take the
    # minimum-norm solution and let the sign/KKT checks decide
    sub = np.linalg.lstsq(Q[np.ix_(sup, sup)], c[sup] - 0.5 * eta1 * sign, rcond=None)[0]
    if np.any(np.sign(sub) != sign):
        return None
    out = np.zeros(Q.shape[0])
    out[sup] = sub
    return out


def _polish(Q, c, eta1, s, tol):
    """Exact minimiser on the iterate's support, or on it less one coordinate.

    Returns the first candidate that satisfies the optimality conditions to
    ``tol``, else ``None``.
    """
    sup = np.flatnonzero(s)
    if sup.size == 0:
        return None
    supports = [sup] + [np.delete(sup, i) for i in np.argsort(np.abs(s[sup]))]
    for cand_sup in supports:
        if cand_sup.size == 0:
            continue
        cand = _solve_on_support(Q, c, eta1, cand_sup, np.sign(s[cand_sup]))
        if cand is not None and _kkt_violation(Q, c, eta1, cand) <= tol:
            return cand
    return None


def _enumerate_supports(Q, c, eta1, tol):
    """Exhaustive search over sign patterns; only sensible for small ``h``.

    Among candidates that pass the optimality check the lowest objective wins
    (ties are possible when ``Q`` is singular).
    """
    h = Q.shape[0]
    best, best_obj = None, np.inf
    for pattern in itertools.product((-1.0, 0.0, 1.0), repeat=h):
        sign = np.array(pattern)
        sup = np.flatnonzero(sign)
        if sup.size == 0:
            cand = np.zeros(h)
        else:
            cand = _solve_on_support(Q, c, eta1, sup, sign[sup])
            if cand is None:
                continue
        if _kkt_violation(Q, c, eta1, cand) <= tol:
            obj = cand @ Q @ cand - 2 * c @ cand + eta1 * np.abs(cand).sum()
            if obj < best_obj:
                best, best_obj = cand, obj
    return best


def lasso_solve(L, alpha_vec, gamma_mat, eta1: float, tol: float = LASSO_TOL,
                max_sweeps: int = LASSO_MAX_SWEEPS, polish_every: int = 25) -> np.ndarray:
    """Minimise ``||alpha - L s||^2_Gamma + eta1 ||s||_1`` by cyclic coordinate descent.

    Soft-threshold updates run until no coordinate moves by ``tol`` or
    ``max_sweeps`` is reached.  Every ``polish_every`` sweeps the support
    found so far is solved exactly; a point that passes the optimality check
    ends the iteration early.  For small ``h`` a stalled first check falls
    back to searching all sign patterns, since with ``h > d`` the quadratic
    is singular and coordinate descent can crawl for thousands of sweeps.
    """
    L = np.asarray(L, dtype=float)
    alpha_vec = np.asarray(alpha_vec, dtype=float)
    gamma_mat = np.asarray(gamma_mat, dtype=float)
    d, h = L.shape
    if alpha_vec.shape != (d,) or gamma_mat.shape != (d, d):
        raise ValueError(f"shape mismatch: L{L.shape}, alpha{alpha_vec.shape}, "
                         f"Gamma{gamma_mat.shape}")
    if eta1 < 0:
        raise ValueError("eta1 must be non-negative")
    gamma_mat = 0.5 * (gamma_mat + gamma_mat.T)
    Qa = L.T @ gamma_mat @ L
    Qa = 0.5 * (Qa + Qa.T)
    ca = L.T @ gamma_mat @ alpha_vec
    Q = Qa.tolist()
    c = ca.tolist()
    thresh = 0.5 * eta1
    s = [0.0] * h
    for sweep in range(1, max_sweeps + 1):
        max_change = 0.0
        for k in range(h):
            qk = Q[k]
            qkk = qk[k]
            if qkk <= 0:
                new = 0.0
            else:
                rho = c[k] - sum(map(mul, qk, s)) + qkk * s[k]
                if rho > thresh:
                    new = (rho - thresh) / qkk
                elif rho < -thresh:
                    new = (rho + thresh) / qkk
                else:
                    new = 0.0
            change = abs(new - s[k])
            if change > max_change:
                max_change = change
            s[k] = new
        if max_change < tol:
            break
        if sweep % polish_every == 0:
            s_arr = np.array(s)
            scale = 1.0 + np.abs(ca).max() + np.abs(Qa).max() * np.abs(s_arr).max()
            cand = _polish(Qa, ca, eta1, s_arr, 1e-12 * scale)
            if cand is None and h <= ENUMERATE_MAX_H and sweep == polish_every:
                cand = _enumerate_supports(Qa, ca, eta1, 1e-9 * scale)
            if cand is not None:
                return cand
    return np.array(s)


def compose_policy(L, s, sigma: float) -> GaussianPolicy:
    L = np.asarray(L, dtype=float)
    s = np.asarray(s, dtype=float)
    if s.shape != (L.shape[1],):
        raise ValueError(f"code of shape {s.shape} does not fit basis {L.shape}")
    return GaussianPolicy(L @ s, sigma)
