"""Unpreconditioned conjugate-gradient solvers for min f(x) = 0.5 ||A x - y||^2.

``cg_step`` is the classical recursive step (gradient updated as g + alpha h).
``cg_pr_step`` and ``cg_cd_step`` recompute the gradient explicitly at the
point they are handed, which is what lets a perturbation be inserted between
steps; they differ only in the beta rule.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterator

import numpy as np

from .operators import LinearMap
from .solver import (Candidate, DegenerateBetaError, SingularDirectionError, SolverConfig,
                     SolveResult, drive)
from .tv import PerturbationSchedule, SmoothingParams, perturbed


@dataclass(frozen=True)
class CGState:
    x: np.ndarray
    g: np.ndarray
    p: np.ndarray
    delta: float


@dataclass(frozen=True)
class PRState:
    x: np.ndarray
    p: np.ndarray
    h: np.ndarray
    # gradient and residual at the point the step started from
    g: np.ndarray | None = None
    resid: np.ndarray | None = None


@dataclass(frozen=True)
class CDState:
    x: np.ndarray
    p: np.ndarray
    g: np.ndarray
    resid: np.ndarray | None = None


def _vec(x) -> np.ndarray:
    return np.array(x, dtype=np.float64).ravel()


def initial_cg_state(A: LinearMap, y, x0) -> CGState:
    x0 = _vec(x0)
    g = A.adjoint(A(x0) - _vec(y))
    return CGState(x0, g, -g, float(np.dot(g, g)))


def cg_step(A: LinearMap, state: CGState) -> CGState:
    """One recursive CG step; the new gradient is g + alpha h, not recomputed."""
    h = A.normal(state.p)
    php = float(np.dot(state.p, h))
    if php == 0.0:
        raise SingularDirectionError("p^T A^T A p = 0")
    alpha = state.delta / php
    x = state.x + alpha * state.p
    g = state.g + alpha * h
    delta = float(np.dot(g, g))
    beta = delta / state.delta
    return CGState(x, g, -g + beta * state.p, delta)


def _line_step(A: LinearMap, x_half, g, d, p_prev, beta):
    """p' = -d + beta p_prev, then the exact line search along p' from x_half."""
    p = -d if p_prev is None or beta == 0.0 else -d + beta * p_prev
    h = A.normal(p)
    php = float(np.dot(p, h))
    if php == 0.0:
        if not np.any(g):
            return x_half.copy(), p, h
        raise SingularDirectionError("p'^T A^T A p' = 0")
    alpha = -float(np.dot(g, p)) / php
    return x_half + alpha * p, p, h


def cg_pr_step(A: LinearMap, y, x_half, prev: PRState) -> PRState:
    """Perturbation-resilient step: explicit gradient, beta = g'^T h / p^T h."""
    x_half = _vec(x_half)
    r = A(x_half) - _vec(y)
    g = A.adjoint(r)
    pth = float(np.dot(prev.p, prev.h))
    if pth <= 0.0:
        raise SingularDirectionError("previous direction has p^T A^T A p <= 0")
    beta = float(np.dot(g, prev.h)) / pth
    x, p, h = _line_step(A, x_half, g, g, prev.p, beta)
    return PRState(x, p, h, g=g, resid=r)


def cg_cd_step(A: LinearMap, y, x_half, prev: CDState) -> CDState:
    """As :func:`cg_pr_step` with the conjugate-descent rule beta = -||g'||^2 / g^T p."""
    x_half = _vec(x_half)
    r = A(x_half) - _vec(y)
    g = A.adjoint(r)
    gg = float(np.dot(g, g))
    if gg == 0.0:
        beta = 0.0
    else:
        gp = float(np.dot(prev.g, prev.p))
        # the rule needs a descent pairing of the previous gradient and direction
        if gp >= 0.0:
            raise DegenerateBetaError(f"g^T p = {gp} is not negative")
        beta = -gg / gp
    x, p, _ = _line_step(A, x_half, g, g, prev.p, beta)
    return CDState(x, p, g, resid=r)


def steepest_descent_step(A: LinearMap, y, x_half):
    """Exact line search along -g at x_half; the fallback for degenerate directions.

    Returns ``(x', p', h', g', r)``.
    """
    x_half = _vec(x_half)
    r = A(x_half) - _vec(y)
    g = A.adjoint(r)
    x, p, h = _line_step(A, x_half, g, g, None, 0.0)
    return x, p, h, g, r


def run_cg_k(A: LinearMap, y, x0, K: int) -> np.ndarray:
    """Fresh CG start from x0 followed by exactly K steps (fewer only if g reaches 0)."""
    if K < 1:
        raise ValueError("K must be >= 1")
    state = initial_cg_state(A, y, x0)
    for _ in range(K):
        if state.delta == 0.0:
            break
        state = cg_step(A, state)
    return state.x


def iter_cg(A: LinearMap, y, x0, fallbacks=None) -> Iterator[Candidate]:
    state = initial_cg_state(A, y, x0)
    k = 0
    while True:
        yield Candidate(k, state.x)
        if state.delta == 0.0:
            return
        try:
            state = cg_step(A, state)
        except SingularDirectionError:
            if fallbacks is not None:
                fallbacks[0] += 1
            state = cg_step(A, CGState(state.x, state.g, -state.g, state.delta))
        k += 1


def iter_s_cg_k(A: LinearMap, y, x0, K: int, sched: PerturbationSchedule,
                smoothing: SmoothingParams) -> Iterator[Candidate]:
    x = _vec(x0)
    cand = x
    k = 0
    while True:
        yield Candidate(k, cand, iterate=x)
        cand, sched = perturbed(x, sched, smoothing, shape=A.domain_shape)
        x = run_cg_k(A, y, cand, K)
        k += 1


Monitor = Callable[[np.ndarray, object, object], None]


def _warm_start(A: LinearMap, y, x0, d0=None):
    """Unperturbed first step shared by the resilient variants: returns (x1, g0, p0, h0, r0)."""
    x0 = _vec(x0)
    r0 = A(x0) - _vec(y)
    g0 = A.adjoint(r0)
    x1, p0, h0 = _line_step(A, x0, g0, g0 if d0 is None else d0, None, 0.0)
    return x1, g0, p0, h0, r0


def iter_s_cg(A: LinearMap, y, x0, sched: PerturbationSchedule, smoothing: SmoothingParams,
              monitor: Monitor | None = None, fallbacks=None,
              perturb: Callable | None = None) -> Iterator[Candidate]:
    """S-CG; ``perturb(x, k) -> x_half`` replaces the TV perturbation when given."""
    x0 = _vec(x0)
    x1, g0, p0, h0, r0 = _warm_start(A, y, x0)
    state = PRState(x1, p0, h0, g=g0, resid=r0)
    k = 1
    cand, resid = x0, r0
    while True:
        yield Candidate(k, cand, resid=resid, iterate=state.x)
        if perturb is None:
            x_half, sched = perturbed(state.x, sched, smoothing, shape=A.domain_shape)
        else:
            x_half = perturb(state.x, k)
        prev = state
        try:
            state = cg_pr_step(A, y, x_half, prev)
        except SingularDirectionError:
            if fallbacks is not None:
                fallbacks[0] += 1
            x, p, h, g, r = steepest_descent_step(A, y, x_half)
            state = PRState(x, p, h, g=g, resid=r)
        if monitor is not None:
            monitor(x_half, prev, state)
        cand, resid = x_half, state.resid
        k += 1


def iter_s_cg_cd(A: LinearMap, y, x0, sched: PerturbationSchedule, smoothing: SmoothingParams,
                 monitor: Monitor | None = None, fallbacks=None) -> Iterator[Candidate]:
    x0 = _vec(x0)
    x1, g0, p0, _, r0 = _warm_start(A, y, x0)
    state = CDState(x1, p0, g0, resid=r0)
    k = 1
    cand, resid = x0, r0
    while True:
        yield Candidate(k, cand, resid=resid, iterate=state.x)
        x_half, sched = perturbed(state.x, sched, smoothing, shape=A.domain_shape)
        prev = state
        try:
            state = cg_cd_step(A, y, x_half, prev)
        except (SingularDirectionError, DegenerateBetaError):
            if fallbacks is not None:
                fallbacks[0] += 1
            x, p, _, g, r = steepest_descent_step(A, y, x_half)
            state = CDState(x, p, g, resid=r)
        if monitor is not None:
            monitor(x_half, prev, state)
        cand, resid = x_half, state.resid
        k += 1


def run_cg(A: LinearMap, y, x0, cfg: SolverConfig, x_true=None) -> SolveResult:
    fb = [0]
    return drive(iter_cg(A, y, x0, fb), A, y, cfg, x_true=x_true, fallbacks=fb)


def run_repeated_cg_k(A: LinearMap, y, x0, cfg: SolverConfig, x_true=None) -> SolveResult:
    """Restarted CG-K without perturbations (the gamma0 = 0 limit of S-CG-K)."""
    return run_s_cg_k(A, y, x0, cfg, PerturbationSchedule(0.0), SmoothingParams(), x_true)


def run_s_cg_k(A: LinearMap, y, x0, cfg: SolverConfig, sched: PerturbationSchedule,
               smoothing: SmoothingParams = SmoothingParams(), x_true=None,
               track_f_iterate: bool = False) -> SolveResult:
    return drive(iter_s_cg_k(A, y, x0, cfg.K, sched, smoothing), A, y, cfg,
                 x_true=x_true, track_f_iterate=track_f_iterate)


def run_s_cg(A: LinearMap, y, x0, cfg: SolverConfig, sched: PerturbationSchedule,
             smoothing: SmoothingParams = SmoothingParams(), x_true=None,
             monitor: Monitor | None = None, track_f_iterate: bool = False) -> SolveResult:
    fb = [0]
    return drive(iter_s_cg(A, y, x0, sched, smoothing, monitor, fb), A, y, cfg,
                 x_true=x_true, track_f_iterate=track_f_iterate, fallbacks=fb)


def run_s_cg_cd(A: LinearMap, y, x0, cfg: SolverConfig, sched: PerturbationSchedule,
                smoothing: SmoothingParams = SmoothingParams(), x_true=None,
                monitor: Monitor | None = None, track_f_iterate: bool = False) -> SolveResult:
    fb = [0]
    return drive(iter_s_cg_cd(A, y, x0, sched, smoothing, monitor, fb), A, y, cfg,
                 x_true=x_true, track_f_iterate=track_f_iterate, fallbacks=fb)
