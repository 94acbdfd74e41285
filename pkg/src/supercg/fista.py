"""TV-regularized least squares by ISTA/FISTA with an inexact TV proximal step."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .operators import LinearMap, spectral_norm
from .solver import Candidate, SolverConfig, SolveResult, drive
from .tv import differences, differences_adjoint

# Bound on ||D||^2 for 2-D forward differences.
_DIFF_NORM_SQ = 8.0


def _dual_objective(b, alpha, ph, pv) -> float:
    res = b - alpha * differences_adjoint(ph, pv)
    return 0.5 * float(np.sum(res * res))


def _project_unit(ph, pv):
    scale = np.maximum(1.0, np.hypot(ph, pv))
    return ph / scale, pv / scale


def tv_prox(b, alpha: float, inner_iters: int = 20, shape=None, history: list | None = None):
    """argmin_x 0.5||x - b||^2 + alpha TV(x), approximately, by monotone FGP on the dual.

    The dual variable is a field of 2-vectors with pointwise norm <= 1 and
    x = b - alpha D^T p. Each iteration keeps the better of the accelerated
    candidate and the previous dual point, so the dual objective never
    increases; its values are appended to ``history`` when given.
    """
    if alpha < 0:
        raise ValueError("alpha must be nonnegative")
    arr = np.asarray(b, dtype=np.float64)
    flat = arr.ndim == 1
    img = arr.reshape(shape) if shape is not None else (arr if not flat else arr.reshape(1, -1))
    if alpha == 0.0:
        return arr.copy()
    step = 1.0 / (_DIFF_NORM_SQ * alpha)
    ph = np.zeros_like(img)
    pv = np.zeros_like(img)
    rh, rv = ph, pv
    t = 1.0
    obj = _dual_objective(img, alpha, ph, pv)
    if history is not None:
        history.append(obj)
    for _ in range(inner_iters):
        gh, gv = differences(img - alpha * differences_adjoint(rh, rv))
        zh, zv = _project_unit(rh + step * gh, rv + step * gv)
        z_obj = _dual_objective(img, alpha, zh, zv)
        t_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
        if z_obj <= obj:
            nh, nv, obj = zh, zv, z_obj
        else:
            nh, nv = ph, pv
        rh = nh + (t / t_next) * (zh - nh) + ((t - 1.0) / t_next) * (nh - ph)
        rv = nv + (t / t_next) * (zv - nv) + ((t - 1.0) / t_next) * (nv - pv)
        ph, pv, t = nh, nv, t_next
        if history is not None:
            history.append(obj)
    out = img - alpha * differences_adjoint(ph, pv)
    return out.ravel() if flat or shape is not None else out


@dataclass(frozen=True)
class ProxConfig:
    lam: float
    step: float
    inner_iters: int = 20

    def __post_init__(self):
        if self.lam < 0 or self.step <= 0 or self.inner_iters < 1:
            raise ValueError("need lam >= 0, step > 0 and inner_iters >= 1")

    @classmethod
    def for_operator(cls, A: LinearMap, lam: float, inner_iters: int = 20,
                     c: float | None = None) -> "ProxConfig":
        """Step 1/c^2 with c the spectral norm of A."""
        if c is None:
            c, _ = spectral_norm(A)
        return cls(lam, 1.0 / (c * c), inner_iters)


@dataclass(frozen=True)
class FistaState:
    x: np.ndarray
    u: np.ndarray
    t: float
    x_prev: np.ndarray

    @classmethod
    def start(cls, x0) -> "FistaState":
        x0 = np.array(x0, dtype=np.float64).ravel()
        return cls(x0, x0, 1.0, x0)


def _prox_grad(A: LinearMap, y, u, cfg: ProxConfig) -> np.ndarray:
    w = u + cfg.step * A.adjoint(np.asarray(y, dtype=np.float64).ravel() - A(u))
    return tv_prox(w, cfg.lam * cfg.step, cfg.inner_iters, shape=A.domain_shape)


def ista_step(A: LinearMap, y, x, cfg: ProxConfig) -> np.ndarray:
    return _prox_grad(A, y, np.asarray(x, dtype=np.float64).ravel(), cfg)


def fista_step(A: LinearMap, y, state: FistaState, cfg: ProxConfig,
               momentum: bool = True) -> FistaState:
    x = _prox_grad(A, y, state.u, cfg)
    t_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * state.t * state.t))
    if momentum:
        u = x + ((state.t - 1.0) / t_next) * (x - state.x)
    else:
        u = x
    return FistaState(x, u, t_next, state.x)


def iter_fista(A: LinearMap, y, x0, cfg: ProxConfig, momentum: bool = True) -> Iterator[Candidate]:
    state = FistaState.start(x0)
    k = 0
    while True:
        yield Candidate(k, state.x)
        state = fista_step(A, y, state, cfg, momentum)
        k += 1


def run_fista(A: LinearMap, y, x0, cfg: ProxConfig, epsilon: float, max_iter: int = 10_000,
              x_true=None, overrun: float = 0.0) -> SolveResult:
    scfg = SolverConfig(epsilon, max_iter=max_iter, overrun=overrun)
    return drive(iter_fista(A, y, x0, cfg, True), A, y, scfg, x_true=x_true)


def run_ista(A: LinearMap, y, x0, cfg: ProxConfig, epsilon: float, max_iter: int = 10_000,
             x_true=None, overrun: float = 0.0) -> SolveResult:
    scfg = SolverConfig(epsilon, max_iter=max_iter, overrun=overrun)
    return drive(iter_fista(A, y, x0, cfg, False), A, y, scfg, x_true=x_true)
