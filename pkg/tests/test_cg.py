import math

import numpy as np
import pytest

from supercg.cg import (CDState, PRState, cg_cd_step, cg_pr_step, cg_step, initial_cg_state,
                        iter_cg, iter_s_cg, iter_s_cg_cd, run_cg, run_cg_k, run_repeated_cg_k,
                        run_s_cg, run_s_cg_cd, run_s_cg_k, steepest_descent_step)
from supercg.operators import LinearMap, half_squared_residual
from supercg.solver import DegenerateBetaError, SolverConfig
from supercg.tv import PerturbationSchedule, SmoothingParams


def take(gen, n):
    out = []
    for c in gen:
        out.append(c)
        if len(out) == n:
            break
    gen.close()
    return out


def test_first_step_on_diagonal_system():
    # A = diag(1, 2), y = (1, 2), x0 = 0: p0 = A^T y = (1, 4), delta = 17,
    # A^T A p0 = (1, 16), alpha = 17/65
    A = LinearMap.from_matrix(np.diag([1.0, 2.0]))
    x1 = run_cg_k(A, [1.0, 2.0], [0.0, 0.0], 1)
    np.testing.assert_allclose(x1, [17 / 65, 68 / 65], rtol=1e-15)


def test_cg_reaches_least_squares_solution(dense_map):
    # finite precision: not exact after n = 36 steps, but converged well before 3n
    A, M = dense_map
    y = np.random.default_rng(0).standard_normal(60)
    x = run_cg_k(A, y, np.zeros(36), 100)
    x_ls = np.linalg.lstsq(M, y, rcond=None)[0]
    np.testing.assert_allclose(x, x_ls, atol=1e-10)


def test_cg_directions_are_conjugate_and_gradients_orthogonal(dense_map):
    A, M = dense_map
    y = np.random.default_rng(1).standard_normal(60)
    s = initial_cg_state(A, y, np.zeros(36))
    ps, gs = [s.p], [s.g]
    for _ in range(8):
        s = cg_step(A, s)
        ps.append(s.p)
        gs.append(s.g)
    N = M.T @ M
    for i in range(len(ps)):
        for j in range(i):
            cos_pp = ps[i] @ N @ ps[j] / math.sqrt((ps[i] @ N @ ps[i]) * (ps[j] @ N @ ps[j]))
            cos_gg = gs[i] @ gs[j] / (np.linalg.norm(gs[i]) * np.linalg.norm(gs[j]))
            assert abs(cos_pp) < 1e-8 and abs(cos_gg) < 1e-8


def test_cg_k_counts_steps(dense_map):
    A, M = dense_map
    y = np.random.default_rng(2).standard_normal(60)
    x0 = np.zeros(36)
    s = initial_cg_state(A, y, x0)
    for _ in range(3):
        s = cg_step(A, s)
    np.testing.assert_allclose(run_cg_k(A, y, x0, 3), s.x, rtol=1e-14)
    with pytest.raises(ValueError):
        run_cg_k(A, y, x0, 0)


def test_pr_step_from_unperturbed_point_is_cg_step(dense_map):
    A, _ = dense_map
    y = np.random.default_rng(3).standard_normal(60)
    s0 = initial_cg_state(A, y, np.zeros(36))
    s1 = cg_step(A, s0)
    s2 = cg_step(A, s1)
    prev = PRState(s1.x, s0.p, A.normal(s0.p))
    pr = cg_pr_step(A, y, s1.x, prev)
    np.testing.assert_allclose(pr.x, s2.x, rtol=1e-10, atol=1e-12)


def test_pr_step_identities_from_perturbed_point(dense_map):
    A, _ = dense_map
    rng = np.random.default_rng(4)
    y = rng.standard_normal(60)
    x1, p, h, g, r = steepest_descent_step(A, y, np.zeros(36))
    prev = PRState(x1, p, h, g=g, resid=r)
    x_half = x1 + 0.1 * rng.standard_normal(36)
    nxt = cg_pr_step(A, y, x_half, prev)
    g_new = A.adjoint(A(nxt.x) - y)
    assert abs(g_new @ nxt.p) <= 1e-10 * np.linalg.norm(g_new) * np.linalg.norm(nxt.p) + 1e-12
    conj = nxt.p @ prev.h / math.sqrt((nxt.p @ nxt.h) * (prev.p @ prev.h))
    assert abs(conj) < 1e-12
    assert half_squared_residual(A, nxt.x, y) <= half_squared_residual(A, x_half, y)


def test_cd_step_rejects_ascent_pairing(dense_map):
    A, _ = dense_map
    y = np.ones(60)
    g = A.adjoint(A(np.zeros(36)) - y)
    with pytest.raises(DegenerateBetaError):
        cg_cd_step(A, y, np.zeros(36), CDState(np.zeros(36), g, g))


def test_zero_gamma_superiorized_iterates_match_cg(dense_map):
    A, _ = dense_map
    y = np.random.default_rng(5).standard_normal(60)
    x0 = np.zeros(36)
    sched = PerturbationSchedule(0.0)
    cg = [c.x for c in take(iter_cg(A, y, x0), 11)]
    for gen in (iter_s_cg(A, y, x0, sched, SmoothingParams()),
                iter_s_cg_cd(A, y, x0, sched, SmoothingParams())):
        for c in take(gen, 10):
            want = cg[c.k]
            assert np.linalg.norm(c.iterate - want) <= 1e-8 * np.linalg.norm(want)


def test_runs_stop_at_epsilon(dense_map):
    A, M = dense_map
    rng = np.random.default_rng(6)
    y = M @ rng.standard_normal(36) + 0.1 * rng.standard_normal(60)
    f_ls = 0.5 * np.sum((M @ np.linalg.lstsq(M, y, rcond=None)[0] - y) ** 2)
    cfg = SolverConfig(2.0 * f_ls, max_iter=500)
    sched = PerturbationSchedule(0.5)
    for res in (run_cg(A, y, np.zeros(36), cfg),
                run_repeated_cg_k(A, y, np.zeros(36), cfg),
                run_s_cg(A, y, np.zeros(36), cfg, sched),
                run_s_cg_cd(A, y, np.zeros(36), cfg, sched),
                run_s_cg_k(A, y, np.zeros(36), cfg, sched, SmoothingParams())):
        assert res.converged
        assert res.records[res.stop_index].f <= cfg.epsilon
        assert half_squared_residual(A, res.x, y) == pytest.approx(res.records[res.stop_index].f)


def test_unreachable_epsilon_is_flagged(dense_map):
    A, _ = dense_map
    y = np.random.default_rng(7).standard_normal(60)  # inconsistent: f_ls > 0
    res = run_s_cg(A, y, np.zeros(36), SolverConfig(1e-12, max_iter=20), PerturbationSchedule(0.1))
    assert not res.converged and res.flagged
    assert len(res.records) == 21


def test_s_cg_k_starts_with_the_initial_point(dense_map):
    A, _ = dense_map
    y = np.random.default_rng(8).standard_normal(60)
    res = run_s_cg_k(A, y, np.zeros(36), SolverConfig(1e-12, max_iter=3, K=2),
                     PerturbationSchedule(1.0), SmoothingParams())
    assert [r.k for r in res.records] == [0, 1, 2, 3]
    assert res.records[0].f == pytest.approx(0.5 * float(y @ y))


def test_identity_system_converges_in_one_step():
    A = LinearMap.identity(2)
    s = initial_cg_state(A, [3.0, 4.0], [0.0, 0.0])
    np.testing.assert_array_equal(s.g, [-3.0, -4.0])
    np.testing.assert_array_equal(s.p, [3.0, 4.0])
    assert s.delta == 25.0
    s = cg_step(A, s)
    np.testing.assert_array_equal(s.x, [3.0, 4.0])
    np.testing.assert_array_equal(s.g, [0.0, 0.0])


def test_loose_epsilon_returns_start_without_stepping(dense_map):
    A, M = dense_map
    y = np.random.default_rng(20).standard_normal(60)
    x0 = np.random.default_rng(21).standard_normal(36)
    f0 = half_squared_residual(A, x0, y)
    res = run_cg(A, y, x0, SolverConfig(f0))
    assert res.converged and res.steps == 0
    np.testing.assert_array_equal(res.x, x0)


def test_spd_five_by_five_terminates_within_five_steps():
    rng = np.random.default_rng(22)
    Q, _ = np.linalg.qr(rng.standard_normal((5, 5)))
    M = Q @ np.diag([1.0, 1.5, 2.0, 3.0, 4.0]) @ Q.T
    A = LinearMap.from_matrix(M)
    # a consistent system sits at eps0 = 0; take a tiny positive epsilon
    y = M @ rng.standard_normal(5)
    res = run_cg(A, y, np.zeros(5), SolverConfig(1e-20, max_iter=50))
    assert res.converged and res.steps <= 5


def test_cg_objective_strictly_decreases(dense_map):
    A, M = dense_map
    y = np.random.default_rng(23).standard_normal(60)
    eps0 = 0.5 * np.sum((M @ np.linalg.lstsq(M, y, rcond=None)[0] - y) ** 2)
    res = run_cg(A, y, np.zeros(36), SolverConfig(eps0 * (1 + 1e-6), max_iter=200))
    fs = [r.f for r in res.records]
    assert res.converged and len(fs) > 3
    assert all(b < a for a, b in zip(fs, fs[1:]))


def test_cg_k_with_one_step_is_steepest_descent(dense_map):
    A, M = dense_map
    y = np.random.default_rng(24).standard_normal(60)
    x0 = np.random.default_rng(25).standard_normal(36)
    g = M.T @ (M @ x0 - y)
    want = x0 - (g @ g) / (g @ M.T @ M @ g) * g
    np.testing.assert_allclose(run_cg_k(A, y, x0, 1), want, rtol=1e-12)
    np.testing.assert_allclose(steepest_descent_step(A, y, x0)[0], want, rtol=1e-12)


def test_two_restarts_of_cg_2_differ_from_cg_4(dense_map):
    A, M = dense_map
    y = np.random.default_rng(26).standard_normal(60)
    x0 = np.zeros(36)
    twice = run_cg_k(A, y, run_cg_k(A, y, x0, 2), 2)
    four = run_cg_k(A, y, x0, 4)
    assert np.linalg.norm(twice - four) > 1e-6 * np.linalg.norm(four)
    # restarting discards conjugacy, so it cannot beat the unbroken run
    assert half_squared_residual(A, four, y) < half_squared_residual(A, twice, y)


def test_unperturbed_s_cg_k_is_repeated_cg_k(dense_map):
    A, M = dense_map
    y = np.random.default_rng(27).standard_normal(60)
    x0 = np.zeros(36)
    res = run_s_cg_k(A, y, x0, SolverConfig(1e-12, max_iter=6, K=2), PerturbationSchedule(0.0),
                     SmoothingParams())
    ref = run_repeated_cg_k(A, y, x0, SolverConfig(1e-12, max_iter=6, K=2))
    # candidate k is the (here unperturbed) point built from k - 1 restarts
    assert [r.k for r in res.records] == list(range(7))
    x = x0
    for _ in range(5):
        x = run_cg_k(A, y, x, 2)
    np.testing.assert_allclose(res.x, x, rtol=1e-12)
    np.testing.assert_array_equal(res.x, ref.x)


def test_pr_step_stores_consistent_h(dense_map):
    A, M = dense_map
    y = np.random.default_rng(28).standard_normal(60)
    res = []
    run_s_cg(A, y, np.zeros(36), SolverConfig(1e-12, max_iter=8), PerturbationSchedule(1.0),
             SmoothingParams(), monitor=lambda xh, prev, new: res.append(new))
    assert res
    for s in res:
        h = M.T @ (M @ s.p)
        assert np.linalg.norm(s.h - h) <= 1e-12 * np.linalg.norm(h)


def test_cd_step_zero_gradient_gives_zero_beta():
    A = LinearMap.identity(2)
    y = np.array([3.0, 4.0])
    # prev with g^T p >= 0 would raise if beta were evaluated
    prev = CDState(np.zeros(2), np.array([1.0, 0.0]), np.array([1.0, 0.0]))
    nxt = cg_cd_step(A, y, y, prev)
    np.testing.assert_array_equal(nxt.p, [0.0, 0.0])
    np.testing.assert_array_equal(nxt.x, y)
    np.testing.assert_array_equal(nxt.g, [0.0, 0.0])
