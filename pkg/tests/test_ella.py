import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from aoi_llrl import ella
from aoi_llrl.ella import (KnowledgeBase, SolverError, add_task_contribution, compose_policy,
                           lasso_objective, lasso_solve, mat, reinit_zero_columns,
                           remove_task_contribution, update_L, vec)
from oracles import basis_gradient, naive_matvec, prox_gradient_lasso


def random_psd(rng, d, scale=1.0):
    B = rng.standard_normal((d, d))
    return scale * (B @ B.T + 0.1 * np.eye(d))


def kkt_ok(L, a, G, eta1, s, tol=1e-6):
    g = 2 * (L.T @ G @ (L @ s - a))
    nz = s != 0
    return (np.all(np.abs(g[nz] + eta1 * np.sign(s[nz])) <= tol)
            and np.all(np.abs(g[~nz]) <= eta1 + tol))


# vec / Kronecker -------------------------------------------------------------

def test_vec_is_column_major():
    L = np.arange(6.0).reshape(2, 3)
    assert np.array_equal(vec(L), [0, 3, 1, 4, 2, 5])
    assert np.array_equal(mat(vec(L), 2, 3), L)


def test_kronecker_identity(rng):
    for _ in range(20):
        d, h = 3, 4
        L, s, G = rng.standard_normal((d, h)), rng.standard_normal(h), random_psd(rng, d)
        lhs = np.kron(np.outer(s, s), G) @ vec(L)
        rhs = vec(G @ L @ np.outer(s, s))
        assert np.abs(lhs - rhs).max() <= 1e-9 * max(1.0, np.abs(rhs).max())


# lasso -----------------------------------------------------------------------

def test_lasso_huge_penalty_is_zero(rng):
    L, a, G = rng.standard_normal((3, 4)), rng.standard_normal(3), random_psd(rng, 3)
    assert np.array_equal(lasso_solve(L, a, G, 1e9), np.zeros(4))


def test_lasso_unregularised_exact_fit(rng):
    L = rng.standard_normal((3, 3)) + 3 * np.eye(3)
    a = rng.standard_normal(3)
    s = lasso_solve(L, a, np.eye(3), 0.0)
    assert np.allclose(s, np.linalg.solve(L, a), atol=1e-8)


def test_lasso_dimension_mismatch(rng):
    with pytest.raises(ValueError):
        lasso_solve(np.zeros((3, 4)), np.zeros(2), np.eye(3), 0.1)
    with pytest.raises(ValueError):
        lasso_solve(np.zeros((3, 4)), np.zeros(3), np.eye(3), -1.0)


def test_lasso_matches_proximal_gradient_oracle():
    rng = np.random.default_rng(7)
    for _ in range(30):
        L, a = rng.standard_normal((3, 4)), rng.standard_normal(3)
        G = random_psd(rng, 3, scale=rng.uniform(0.1, 10))
        eta1 = rng.uniform(0.01, 1.0)
        s = lasso_solve(L, a, G, eta1)
        ref = prox_gradient_lasso(L, a, G, eta1)
        assert lasso_objective(L, a, G, eta1, s) <= lasso_objective(L, a, G, eta1, ref) + 1e-7
        assert kkt_ok(L, a, G, eta1, s)


def test_lasso_ill_conditioned_curvature():
    # curvature in the range seen in training (sigma^-2 x x^T summed over 50 slots)
    rng = np.random.default_rng(11)
    for _ in range(30):
        L = rng.standard_normal((3, 4)) * rng.uniform(0.01, 3)
        a = rng.standard_normal(3)
        G = np.diag(rng.uniform(1, 1e4, 3))
        s = lasso_solve(L, a, G, 0.1)
        Q, c = L.T @ G @ L, L.T @ G @ a
        assert ella._kkt_violation(Q, c, 0.1, s) <= 1e-6 * (1 + np.abs(c).max())


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), eta1=st.floats(0.0, 2.0))
def test_lasso_never_worse_than_zero(seed, eta1):
    rng = np.random.default_rng(seed)
    L, a, G = rng.standard_normal((3, 4)), rng.standard_normal(3), random_psd(rng, 3)
    s = lasso_solve(L, a, G, eta1)
    assert lasso_objective(L, a, G, eta1, s) <= lasso_objective(L, a, G, eta1, np.zeros(4)) + 1e-12
    assert np.count_nonzero(s) <= 4


# A / b accumulation -----------------------------------------------------------

def test_scalar_contribution():
    kb = KnowledgeBase.empty(d=1, h=1)
    kb = add_task_contribution(kb, [2.0], [[3.0]], [5.0])
    assert kb.A[0, 0] == 12.0 and kb.b[0] == 30.0


def test_zero_code_leaves_kb_unchanged(rng):
    kb = KnowledgeBase.empty()
    new = add_task_contribution(kb, np.zeros(4), random_psd(rng, 3), rng.standard_normal(3))
    assert np.array_equal(new.A, kb.A) and np.array_equal(new.b, kb.b)


def test_add_remove_roundtrip(rng):
    kb = KnowledgeBase.empty()
    base = add_task_contribution(kb, rng.standard_normal(4), random_psd(rng, 3),
                                 rng.standard_normal(3))
    s, G, a = rng.standard_normal(4), random_psd(rng, 3), rng.standard_normal(3)
    back = remove_task_contribution(add_task_contribution(base, s, G, a), s, G, a)
    assert np.abs(back.A - base.A).max() <= 1e-12
    assert np.abs(back.b - base.b).max() <= 1e-12
    only = remove_task_contribution(add_task_contribution(kb, s, G, a), s, G, a)
    assert np.abs(only.A).max() <= 1e-12 and np.abs(only.b).max() <= 1e-12


def test_contribution_order_irrelevant(rng):
    kb = KnowledgeBase.empty()
    t1 = (rng.standard_normal(4), random_psd(rng, 3), rng.standard_normal(3))
    t2 = (rng.standard_normal(4), random_psd(rng, 3), rng.standard_normal(3))
    ab = add_task_contribution(add_task_contribution(kb, *t1), *t2)
    ba = add_task_contribution(add_task_contribution(kb, *t2), *t1)
    assert np.allclose(ab.A, ba.A, rtol=0, atol=1e-12)
    La = update_L(ab.replace(M=2))
    Lb = update_L(ba.replace(M=2))
    assert np.abs(La - Lb).max() <= 1e-9
    assert np.array_equal(ab.A, ab.A.T)


def test_shape_errors():
    kb = KnowledgeBase.empty()
    with pytest.raises(ValueError):
        add_task_contribution(kb, np.zeros(3), np.eye(3), np.zeros(3))
    with pytest.raises(ValueError):
        compose_policy(np.zeros((3, 4)), np.zeros(3), 0.1)


# update_L ---------------------------------------------------------------------

def test_update_L_scalar():
    kb = KnowledgeBase(L=np.zeros((1, 1)), A=np.array([[12.0]]), b=np.array([30.0]),
                       M=1, eta2=0.1)
    assert update_L(kb)[0, 0] == pytest.approx(30 / 12.1, rel=1e-14)


def test_update_L_ridge_dominates(rng):
    kb = add_task_contribution(KnowledgeBase.empty(eta2=1e12), rng.standard_normal(4),
                               random_psd(rng, 3), rng.standard_normal(3)).replace(M=1)
    assert np.abs(update_L(kb)).max() < 1e-9


def test_update_L_requires_tasks():
    with pytest.raises(SolverError):
        update_L(KnowledgeBase.empty())


def test_update_L_stationary_point():
    rng = np.random.default_rng(3)
    kb = KnowledgeBase.empty()
    records = []
    for _ in range(5):
        r = (rng.standard_normal(4), random_psd(rng, 3), rng.standard_normal(3))
        records.append(r)
        kb = add_task_contribution(kb, *r)
    kb = kb.replace(M=5)
    L = update_L(kb)
    assert np.linalg.norm(basis_gradient(L, records, 5, kb.eta2)) < 1e-6


# reinit / compose --------------------------------------------------------------

def test_reinit_zero_columns(rng):
    L = rng.standard_normal((3, 4))
    assert np.array_equal(reinit_zero_columns(L, rng), L)
    full = reinit_zero_columns(np.zeros((3, 4)), rng)
    assert np.all(np.any(full != 0, axis=0))
    one = L.copy()
    one[:, 2] = 0.0
    out = reinit_zero_columns(one, rng)
    assert np.array_equal(out[:, [0, 1, 3]], L[:, [0, 1, 3]])
    assert np.any(out[:, 2] != 0) and np.abs(out[:, 2]).max() < 0.1


def test_compose_policy(rng):
    L = rng.standard_normal((3, 4))
    assert np.array_equal(compose_policy(L, np.zeros(4), 0.2).theta, np.zeros(3))
    assert np.array_equal(compose_policy(L, np.eye(4)[1], 0.2).theta, L[:, 1])
    s = rng.standard_normal(4)
    assert np.allclose(compose_policy(L, s, 0.2).theta, naive_matvec(L, s), atol=1e-14)
