"""Preconditioned solvers built on a per-projection ramp/Hamming filter, plus FBP.

The preconditioner acts on the sinogram-domain residual r = A x - y:
z = A^T F^-1 C F r, with F the 1-D DFT along each detector row and C the
diagonal of filter gains. States therefore carry r alongside x.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable, Iterator

import numpy as np

from .cg import PRState, _line_step, _vec
from .operators import DimensionError, LinearMap
from .projector import Geometry, Projector, back_project
from .solver import Candidate, SingularDirectionError, SolverConfig, SolveResult, drive
from .tv import PerturbationSchedule, SmoothingParams, perturbed

DEFAULT_MU = 0.01


def filter_factors(n_rays: int, mu: float = DEFAULT_MU) -> np.ndarray:
    """c(w) = (|w| + mu)(0.54 + 0.46 cos w) at the DFT angular frequencies in [-pi, pi]."""
    if mu < 0:
        raise ValueError("mu must be nonnegative")
    w = 2.0 * np.pi * np.fft.fftfreq(n_rays)
    return (np.abs(w) + mu) * (0.54 + 0.46 * np.cos(w))


@dataclass(frozen=True, eq=False)
class Preconditioner:
    mu: float
    filter_gains: np.ndarray
    n_rows: int
    adjoint: Callable[[np.ndarray], np.ndarray]
    geom: Geometry | None = None
    # skip the FFT entirely (unit gains), so z is exactly A^T r
    bypass: bool = False

    @property
    def n_rays(self) -> int:
        return self.filter_gains.size

    @classmethod
    def for_projector(cls, A: Projector, mu: float = DEFAULT_MU) -> "Preconditioner":
        g = A.geometry
        return cls(mu, filter_factors(g.n_rays, mu), g.n_angles, A.adjoint, geom=g)

    @classmethod
    def from_geometry(cls, geom: Geometry, mu: float = DEFAULT_MU) -> "Preconditioner":
        return cls(mu, filter_factors(geom.n_rays, mu), geom.n_angles,
                   lambda s: back_project(geom, s), geom=geom)

    @classmethod
    def identity(cls, A: LinearMap) -> "Preconditioner":
        """Unit gains; reduces every preconditioned method to its plain counterpart."""
        return cls(0.0, np.ones(A.range_dim), 1, A.adjoint, bypass=True)


def filter_rows(gains: np.ndarray, s) -> np.ndarray:
    """Multiply each row's DFT by ``gains`` and transform back (result is real)."""
    n = gains.size
    rows = np.asarray(s, dtype=np.float64).reshape(-1, n)
    half = gains[: n // 2 + 1]
    return np.fft.irfft(np.fft.rfft(rows, axis=1) * half, n=n, axis=1).ravel()


def apply_precond_residual(P: Preconditioner, r) -> np.ndarray:
    r = np.asarray(r, dtype=np.float64).ravel()
    if r.size != P.n_rows * P.n_rays:
        raise DimensionError(f"residual has {r.size} values, preconditioner expects "
                             f"{P.n_rows * P.n_rays}")
    if P.bypass:
        return P.adjoint(r)
    return P.adjoint(filter_rows(P.filter_gains, r))


@dataclass(frozen=True)
class PCGState:
    x: np.ndarray
    g: np.ndarray
    z: np.ndarray
    p: np.ndarray
    delta: float
    r: np.ndarray


def initial_pcg_state(A: LinearMap, y, x0, P: Preconditioner) -> PCGState:
    x0 = _vec(x0)
    r = A(x0) - _vec(y)
    g = A.adjoint(r)
    z = apply_precond_residual(P, r)
    return PCGState(x0, g, z, -z, float(np.dot(g, z)), r)


def pcg_step(A: LinearMap, P: Preconditioner, state: PCGState) -> PCGState:
    Ap = A(state.p)
    h = A.adjoint(Ap)
    php = float(np.dot(state.p, h))
    if php == 0.0:
        raise SingularDirectionError("p^T A^T A p = 0")
    alpha = state.delta / php
    x = state.x + alpha * state.p
    g = state.g + alpha * h
    r = state.r + alpha * Ap
    z = apply_precond_residual(P, r)
    delta = float(np.dot(g, z))
    beta = delta / state.delta
    return PCGState(x, g, z, -z + beta * state.p, delta, r)


def pcg_k(A: LinearMap, y, x0, P: Preconditioner, K: int) -> np.ndarray:
    """Fresh PCG start from x0 followed by exactly K steps (fewer only if delta reaches 0)."""
    if K < 1:
        raise ValueError("K must be >= 1")
    state = initial_pcg_state(A, y, x0, P)
    for _ in range(K):
        if state.delta == 0.0:
            break
        state = pcg_step(A, P, state)
    return state.x


def pcg_pr_step(A: LinearMap, y, P: Preconditioner, x_half, prev: PRState) -> PRState:
    x_half = _vec(x_half)
    r = A(x_half) - _vec(y)
    g = A.adjoint(r)
    z = apply_precond_residual(P, r)
    pth = float(np.dot(prev.p, prev.h))
    if pth <= 0.0:
        raise SingularDirectionError("previous direction has p^T A^T A p <= 0")
    beta = float(np.dot(z, prev.h)) / pth
    x, p, h = _line_step(A, x_half, g, z, prev.p, beta)
    return PRState(x, p, h, g=g, resid=r)


def _precond_descent_step(A: LinearMap, y, P: Preconditioner, x_half) -> PRState:
    x_half = _vec(x_half)
    r = A(x_half) - _vec(y)
    g = A.adjoint(r)
    x, p, h = _line_step(A, x_half, g, apply_precond_residual(P, r), None, 0.0)
    return PRState(x, p, h, g=g, resid=r)


def iter_pcg(A: LinearMap, y, x0, P: Preconditioner) -> Iterator[Candidate]:
    state = initial_pcg_state(A, y, x0, P)
    k = 0
    while True:
        yield Candidate(k, state.x)
        if state.delta == 0.0:
            return
        state = pcg_step(A, P, state)
        k += 1


def iter_s_pcg_k(A: LinearMap, y, x0, P: Preconditioner, K: int, sched: PerturbationSchedule,
                 smoothing: SmoothingParams) -> Iterator[Candidate]:
    x = _vec(x0)
    cand = x
    k = 0
    while True:
        yield Candidate(k, cand, iterate=x)
        cand, sched = perturbed(x, sched, smoothing, shape=A.domain_shape)
        x = pcg_k(A, y, cand, P, K)
        k += 1


def iter_s_pcg(A: LinearMap, y, x0, P: Preconditioner, sched: PerturbationSchedule,
               smoothing: SmoothingParams, monitor=None, fallbacks=None) -> Iterator[Candidate]:
    x0 = _vec(x0)
    state = _precond_descent_step(A, y, P, x0)
    k = 1
    cand, resid = x0, state.resid
    while True:
        yield Candidate(k, cand, resid=resid, iterate=state.x)
        x_half, sched = perturbed(state.x, sched, smoothing, shape=A.domain_shape)
        prev = state
        try:
            state = pcg_pr_step(A, y, P, x_half, prev)
        except SingularDirectionError:
            if fallbacks is not None:
                fallbacks[0] += 1
            state = _precond_descent_step(A, y, P, x_half)
        if monitor is not None:
            monitor(x_half, prev, state)
        cand, resid = x_half, state.resid
        k += 1


def run_pcg(A: LinearMap, y, x0, cfg: SolverConfig, P: Preconditioner, x_true=None) -> SolveResult:
    return drive(iter_pcg(A, y, x0, P), A, y, cfg, x_true=x_true)


def run_s_pcg_k(A: LinearMap, y, x0, cfg: SolverConfig, sched: PerturbationSchedule,
                smoothing: SmoothingParams, P: Preconditioner, x_true=None,
                track_f_iterate: bool = False) -> SolveResult:
    if cfg.K > 5:
        warnings.warn(f"K={cfg.K}: long PCG-K restarts leave little room for perturbations",
                      stacklevel=2)
    return drive(iter_s_pcg_k(A, y, x0, P, cfg.K, sched, smoothing), A, y, cfg,
                 x_true=x_true, track_f_iterate=track_f_iterate)


def run_s_pcg(A: LinearMap, y, x0, cfg: SolverConfig, sched: PerturbationSchedule,
              smoothing: SmoothingParams, P: Preconditioner, x_true=None, monitor=None,
              track_f_iterate: bool = False) -> SolveResult:
    fb = [0]
    return drive(iter_s_pcg(A, y, x0, P, sched, smoothing, monitor, fb), A, y, cfg,
                 x_true=x_true, track_f_iterate=track_f_iterate, fallbacks=fb)


def fbp_reconstruct(geom: Geometry, y, mu: float = 0.0) -> np.ndarray:
    """Filtered backprojection with the ramp/Hamming gains; returns a flat image.

    Rows are zero-padded to at least twice their length before filtering to
    avoid circular wrap-around. With gains in radians per sample and the
    Joseph adjoint (which integrates over the detector in units of the
    spacing), the angular weight pi/n_angles and the ramp's 1/(2 pi) combine
    to 1/(2 n_angles).
    """
    y = np.asarray(y, dtype=np.float64).ravel()
    if y.size != geom.n_data:
        raise DimensionError(f"sinogram has {y.size} values, geometry expects {geom.n_data}")
    n = geom.n_rays
    m = 1 << (2 * n - 1).bit_length()
    padded = np.zeros((geom.n_angles, m))
    padded[:, :n] = y.reshape(geom.n_angles, n)
    q = filter_rows(filter_factors(m, mu), padded).reshape(geom.n_angles, m)[:, :n]
    return back_project(geom, q.ravel()) / (2.0 * geom.n_angles)
