"""Configuration, per-iteration records and the loop driver shared by all solvers.

Each algorithm is written as a generator of :class:`Candidate` values: the
point its stopping test is applied to. The driver owns the test f(x) <= eps,
the iteration cap, optional post-stop continuation and instrumentation, so
every method stops and records by exactly the same rules.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from .operators import LinearMap
from .tv import tv_norm


class SingularDirectionError(ArithmeticError):
    """Raised when a search direction p has p^T A^T A p == 0."""


class DegenerateBetaError(ArithmeticError):
    """Raised when the denominator of a beta rule vanishes."""


@dataclass(frozen=True)
class SolverConfig:
    epsilon: float
    max_iter: int = 10_000
    K: int = 2
    # Fraction of the stopping iteration to keep iterating past the stop (0 = stop).
    overrun: float = 0.0

    def __post_init__(self):
        if not (self.epsilon > 0 and math.isfinite(self.epsilon)):
            raise ValueError("epsilon must be positive and finite")
        if self.max_iter < 1 or self.K < 1:
            raise ValueError("max_iter and K must be >= 1")
        if self.overrun < 0:
            raise ValueError("overrun must be nonnegative")


@dataclass(frozen=True)
class IterationRecord:
    k: int
    wall_time: float
    f: float
    tv: float
    rel_err: float = math.nan
    # f at the unperturbed iterate x_k when the tested point is x_{k-1/2}.
    f_iterate: float = math.nan
    after_stop: bool = False


@dataclass
class Candidate:
    k: int
    x: np.ndarray
    # A x - y at this point, when the algorithm already has it explicitly.
    resid: np.ndarray | None = None
    # The unperturbed iterate paired with x, for superiorized methods.
    iterate: np.ndarray | None = None


@dataclass
class SolveResult:
    x: np.ndarray
    records: list[IterationRecord]
    converged: bool
    stop_index: int | None
    shape: tuple[int, int]
    fallbacks: int = 0
    info: dict = field(default_factory=dict)

    @property
    def flagged(self) -> bool:
        """True when the run ended without meeting the stopping criterion."""
        return not self.converged

    @property
    def iterations(self) -> int:
        """Algorithm counter k of the stopping (or last) record."""
        if not self.records:
            return 0
        idx = self.stop_index if self.stop_index is not None else len(self.records) - 1
        return self.records[idx].k

    @property
    def steps(self) -> int:
        """Number of outer iterations performed before the stop (or cap)."""
        idx = self.stop_index if self.stop_index is not None else len(self.records) - 1
        return idx

    def image(self) -> np.ndarray:
        return self.x.reshape(self.shape)

    def __iter__(self):
        # allows ``x, records = run_x(...)``
        return iter((self.x, self.records))


def rel_error(x: np.ndarray, x_true: np.ndarray | None) -> float:
    if x_true is None:
        return math.nan
    return float(np.linalg.norm(x - x_true) / np.linalg.norm(x_true))


def drive(gen: Iterator[Candidate], A: LinearMap, y: np.ndarray, cfg: SolverConfig,
          x_true=None, track_f_iterate: bool = False, fallbacks=None) -> SolveResult:
    """Run ``gen`` until f(candidate) <= epsilon, the iteration cap, or exhaustion.

    Wall time counts only algorithm work (stepping and the stopping test);
    TV, relative error and ``f_iterate`` are computed off the clock.
    ``fallbacks`` is an optional one-element list the generator increments.
    """
    y = np.asarray(y, dtype=np.float64).ravel()
    shape = A.domain_shape
    xt = None if x_true is None else np.asarray(x_true, dtype=np.float64).ravel()
    records: list[IterationRecord] = []
    stop_index = None
    stop_x = None
    extra_left = 0
    elapsed = 0.0
    last = None
    n = 0
    while True:
        t0 = time.perf_counter()
        try:
            cand = next(gen)
        except StopIteration:
            break
        r = cand.resid if cand.resid is not None else A(cand.x) - y
        f = 0.5 * float(np.dot(r, r))
        elapsed += time.perf_counter() - t0

        f_it = math.nan
        if track_f_iterate and cand.iterate is not None:
            ri = A(cand.iterate) - y
            f_it = 0.5 * float(np.dot(ri, ri))
        records.append(IterationRecord(
            k=cand.k, wall_time=elapsed, f=f, tv=tv_norm(cand.x, shape),
            rel_err=rel_error(cand.x, xt), f_iterate=f_it, after_stop=stop_index is not None))
        last = cand.x
        if stop_index is None:
            if f <= cfg.epsilon:
                stop_index = n
                stop_x = cand.x
                extra_left = math.ceil(cfg.overrun * n) if cfg.overrun > 0 else 0
                if extra_left == 0:
                    break
            elif n >= cfg.max_iter:
                break
        else:
            extra_left -= 1
            if extra_left <= 0:
                break
        n += 1
    gen.close()
    converged = stop_index is not None
    x_out = stop_x if converged else last
    if x_out is None:
        raise RuntimeError("solver produced no iterates")
    return SolveResult(x=np.array(x_out, copy=True), records=records, converged=converged,
                       stop_index=stop_index, shape=shape,
                       fallbacks=0 if fallbacks is None else fallbacks[0])
