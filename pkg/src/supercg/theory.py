"""Numerical checks of the S-CG termination argument on small dense-checkable instances.

With c = ||A||_2, eta1 = 1/(4c^2) and eta2 the positive root of
(2 + c^2 eta) eta = 1/(32 c^2), a perturbation u_k with ||u_k|| = eta0 ||g_k||,
eta0 <= min(eta1, eta2), must give

    2f(x_{k+1/2}) - 2f(x_{k+1}) >= ||g_k||^2 / (16 c^2)
    2f(x_k)       - 2f(x_{k+1}) >= ||g_k||^2 / (32 c^2)

where g_k is the gradient at the unperturbed iterate x_k.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .cg import PRState, cg_pr_step, run_s_cg, steepest_descent_step
from .operators import LinearMap, SizeGuardError, materialize_dense, spectral_norm
from .projector import Projector, add_noise, make_geometry, make_phantom
from .solver import SingularDirectionError, SolverConfig
from .tv import PerturbationSchedule, SmoothingParams, nonascending_direction

MAX_DENSE_PIXELS = 64 * 64


@dataclass(frozen=True)
class TheoryConstants:
    c: float
    eta1: float
    eta2: float
    eta_l: float
    eps0: float
    theta_hint: float = math.nan


def eta_constants(c: float) -> tuple[float, float, float]:
    """(eta1, eta2, eta_l) for spectral norm c > 0."""
    if not c > 0:
        raise ValueError("c must be positive")
    c2 = c * c
    eta1 = 1.0 / (4.0 * c2)
    eta2 = (math.sqrt(4.0 + 1.0 / 8.0) - 2.0) / (2.0 * c2)
    return eta1, eta2, min(eta1, eta2)


def least_squares_floor(A: LinearMap, y, rcond: float = 1e-10) -> float:
    """min_x f(x) via a dense truncated pseudoinverse solve."""
    if A.domain_dim > MAX_DENSE_PIXELS:
        raise SizeGuardError(f"{A.domain_dim} unknowns exceed the dense limit {MAX_DENSE_PIXELS}")
    M = materialize_dense(A, max_entries=MAX_DENSE_PIXELS * max(A.range_dim, 1))
    y = np.asarray(y, dtype=np.float64).ravel()
    x_ls = np.linalg.lstsq(M, y, rcond=rcond)[0]
    r = M @ x_ls - y
    return 0.5 * float(np.dot(r, r))


def compute_constants(A: LinearMap, y) -> TheoryConstants:
    c, _ = spectral_norm(A)
    eta1, eta2, eta_l = eta_constants(c)
    return TheoryConstants(c, eta1, eta2, eta_l, least_squares_floor(A, y))


@dataclass(frozen=True)
class BoundRow:
    bound: str  # "16" for the intermediate bound, "32" for the overall one
    iteration: int
    lhs: float
    rhs: float
    margin: float
    passed: bool


@dataclass
class InstrumentedReport:
    eta0: float
    constants: TheoryConstants
    premise_holds: bool
    rows: list[BoundRow] = field(default_factory=list)
    perturbation_norms: list[float] = field(default_factory=list)
    gradient_norms: list[float] = field(default_factory=list)
    iterations: int = 0
    terminated: bool = False
    theta_hint: float = math.nan

    @property
    def violations(self) -> list[BoundRow]:
        return [r for r in self.rows if not r.passed]


def _random_unit(n: int, rng: np.random.Generator) -> np.ndarray:
    v = rng.standard_normal(n)
    return v / np.linalg.norm(v)


def run_s_cg_instrumented(A: LinearMap, y, x0, epsilon: float, eta0: float,
                          max_iter: int = 50, constants: TheoryConstants | None = None,
                          smoothing: SmoothingParams = SmoothingParams(),
                          seed: int = 0) -> InstrumentedReport:
    """S-CG with the perturbation u_k = eta0 ||g_k|| v_k, checking both descent bounds.

    v_k is the unit TV-descent direction at x_k, or a seeded random unit vector
    where that direction vanishes. Violations are recorded, never raised.
    """
    if eta0 < 0:
        raise ValueError("eta0 must be nonnegative")
    if constants is None:
        c, _ = spectral_norm(A)
        eta1, eta2, eta_l = eta_constants(c)
        constants = TheoryConstants(c, eta1, eta2, eta_l, math.nan)
    c2 = constants.c ** 2
    rng = np.random.default_rng(seed)
    y = np.asarray(y, dtype=np.float64).ravel()
    report = InstrumentedReport(eta0, constants, premise_holds=eta0 <= constants.eta_l)

    # unperturbed first step
    x0 = np.array(x0, dtype=np.float64).ravel()
    x1, p0, h0, g0, r0 = steepest_descent_step(A, y, x0)
    state = PRState(x1, p0, h0, g=g0, resid=r0)
    f_test = 0.5 * float(np.dot(r0, r0))  # f(x_{1/2}) with x_{1/2} = x0
    theta = math.inf
    k = 1
    while True:
        if f_test <= epsilon:
            report.terminated = True
            break
        if k > max_iter:
            break
        x_k = state.x
        r_k = A(x_k) - y
        g_k = A.adjoint(r_k)
        gnorm = float(np.linalg.norm(g_k))
        theta = min(theta, gnorm)
        v = nonascending_direction(x_k, smoothing, shape=A.domain_shape)
        if not np.any(v):
            v = _random_unit(x_k.size, rng)
        u = eta0 * gnorm * v
        x_half = x_k + u
        try:
            state = cg_pr_step(A, y, x_half, state)
        except SingularDirectionError:
            x, p, h, g, r = steepest_descent_step(A, y, x_half)
            state = PRState(x, p, h, g=g, resid=r)
        # 2f(a) - 2f(b) = -2<b - a, g_a> - ||A(b - a)||^2, free of large cancellations
        g_half = state.g
        d_half = state.x - x_half
        dec_half = -2.0 * float(np.dot(d_half, g_half)) - float(np.sum(A(d_half) ** 2))
        d_full = state.x - x_k
        dec_full = -2.0 * float(np.dot(d_full, g_k)) - float(np.sum(A(d_full) ** 2))
        slack = 1e-9 * gnorm ** 2 / c2
        for tag, lhs, rhs in (("16", dec_half, gnorm ** 2 / (16.0 * c2)),
                              ("32", dec_full, gnorm ** 2 / (32.0 * c2))):
            margin = lhs - rhs
            report.rows.append(BoundRow(tag, k, lhs, rhs, margin, margin >= -slack))
        report.perturbation_norms.append(float(np.linalg.norm(u)))
        report.gradient_norms.append(gnorm)
        f_test = 0.5 * float(np.dot(state.resid, state.resid))  # f(x_{k+1/2})
        k += 1
        report.iterations += 1
    report.theta_hint = theta
    return report


@dataclass(frozen=True)
class TerminationCase:
    epsilon: float
    eps0: float
    expect_termination: bool
    terminated: bool
    f_out: float
    iterations: int

    @property
    def ok(self) -> bool:
        if not self.expect_termination:
            return True
        return self.terminated and self.f_out <= self.epsilon


def check_termination(A: LinearMap, y, x0, epsilon_list, eps0: float | None = None,
                      sched: PerturbationSchedule | None = None, max_iter: int = 2000
                      ) -> list[TerminationCase]:
    """Run S-CG for each epsilon; only epsilon > eps0 is required to terminate."""
    if eps0 is None:
        eps0 = least_squares_floor(A, y)
    sched = sched or PerturbationSchedule(1.0)
    out = []
    for eps in epsilon_list:
        res = run_s_cg(A, y, x0, SolverConfig(eps, max_iter=max_iter), sched)
        rec = res.records[res.stop_index] if res.converged else res.records[-1]
        out.append(TerminationCase(float(eps), eps0, eps > eps0, res.converged, rec.f,
                                   res.iterations))
    return out


@dataclass
class SmallInstance:
    A: Projector
    x_true: np.ndarray
    y: np.ndarray
    sigma2: float


def small_instance(size: int = 16, noise: float = 0.05, seed: int = 7) -> SmallInstance:
    """Phantom CT problem with slightly more data than unknowns, for dense oracles."""
    if size > 64:
        raise SizeGuardError("theory instances are limited to 64x64")
    angles = size + size // 8
    rays = math.ceil(size * math.sqrt(2.0)) + 1
    A = Projector(make_geometry(angles, rays, size, size))
    x = make_phantom(size, size).values
    y, model = add_noise(A(x), noise, seed)
    return SmallInstance(A, x, y, model.sigma2)
