"""Total variation and the bounded perturbation step used by superiorized solvers."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np

from .operators import Image


@dataclass(frozen=True)
class SmoothingParams:
    kappa: float = 1e-4

    def __post_init__(self):
        if not self.kappa > 0:
            raise ValueError("kappa must be positive")


@dataclass(frozen=True)
class PerturbationSchedule:
    """Step sizes gamma0 * a**ell; ``ell`` counts every candidate drawn so far."""

    gamma0: float
    a: float = 0.975
    ell: int = 0
    max_attempts: int = 20

    def __post_init__(self):
        if self.gamma0 < 0:
            raise ValueError("gamma0 must be nonnegative")
        if not 0.0 < self.a < 1.0:
            raise ValueError("a must lie in (0, 1)")
        if self.ell < 0 or self.max_attempts < 1:
            raise ValueError("ell must be >= 0 and max_attempts >= 1")

    def gamma(self, ell: int | None = None) -> float:
        return self.gamma0 * self.a ** (self.ell if ell is None else ell)


def _as_2d(x, shape=None) -> np.ndarray:
    if isinstance(x, Image):
        return x.as_array()
    arr = np.asarray(x, dtype=np.float64)
    if shape is not None:
        return arr.reshape(shape)
    if arr.ndim != 2:
        raise ValueError("expected a 2-D image (or pass shape)")
    return arr


def differences(img: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Forward differences; the last column/row difference is zero (Neumann)."""
    dh = np.zeros_like(img)
    dv = np.zeros_like(img)
    dh[:, :-1] = img[:, 1:] - img[:, :-1]
    dv[:-1, :] = img[1:, :] - img[:-1, :]
    return dh, dv


def differences_adjoint(ph: np.ndarray, pv: np.ndarray) -> np.ndarray:
    """Transpose of :func:`differences` applied to the pair (ph, pv)."""
    out = np.zeros_like(ph)
    out[:, :-1] -= ph[:, :-1]
    out[:, 1:] += ph[:, :-1]
    out[:-1, :] -= pv[:-1, :]
    out[1:, :] += pv[:-1, :]
    return out


def tv_norm(x, shape=None) -> float:
    """Isotropic total variation: sum over pixels of sqrt(Dh^2 + Dv^2).

    Summed with math.fsum so the value is independent of summation order.
    """
    dh, dv = differences(_as_2d(x, shape))
    return math.fsum(np.sqrt(dh * dh + dv * dv).ravel())


def smoothed_tv(x, params: SmoothingParams = SmoothingParams(), shape=None) -> float:
    dh, dv = differences(_as_2d(x, shape))
    return float(np.sum(np.sqrt(dh * dh + dv * dv + params.kappa ** 2)))


def tv_smoothed_gradient(x, params: SmoothingParams = SmoothingParams(), shape=None) -> np.ndarray:
    """Gradient of :func:`smoothed_tv`, returned with the layout of ``x``."""
    img = _as_2d(x, shape)
    dh, dv = differences(img)
    w = 1.0 / np.sqrt(dh * dh + dv * dv + params.kappa ** 2)
    grad = differences_adjoint(dh * w, dv * w)
    if isinstance(x, Image) or np.ndim(x) == 1:
        return grad.ravel()
    return grad


def nonascending_direction(x, params: SmoothingParams = SmoothingParams(), shape=None) -> np.ndarray:
    """Unit vector along the negative smoothed-TV gradient, or zero where that gradient vanishes."""
    g = tv_smoothed_gradient(x, params, shape)
    n = float(np.linalg.norm(g))
    if n == 0.0:
        return np.zeros_like(g)
    return -g / n


def perturbed(x, sched: PerturbationSchedule, params: SmoothingParams = SmoothingParams(),
              shape=None):
    """One superiorization step; returns ``(x_new, schedule_after)``.

    Every drawn candidate consumes one value of ell, including the single draw
    made when the direction is zero, so step sizes are never reused. The
    output never has larger TV than ``x``.
    """
    img = _as_2d(x, shape)
    v = nonascending_direction(img, params)
    base = tv_norm(img)
    ell = sched.ell
    out = img
    if not np.any(v):
        ell += 1
    else:
        for _ in range(sched.max_attempts):
            gamma = sched.gamma(ell)
            ell += 1
            cand = img + gamma * v
            if tv_norm(cand) <= base:
                out = cand
                break
    new_sched = dataclasses.replace(sched, ell=ell)
    if isinstance(x, Image):
        return Image.from_array(out, x.pixel_size), new_sched
    if np.ndim(x) == 1:
        return out.ravel().copy(), new_sched
    return out.copy(), new_sched
