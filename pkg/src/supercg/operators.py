"""Matrix-free linear maps and the basic quantities built on them.

Images are flattened row-major, sinograms angle-major. Everything is float64.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np


class DimensionError(ValueError):
    """Raised when vector lengths do not match the operator they are used with."""


class SizeGuardError(RuntimeError):
    """Raised when a dense materialization would be too large."""


def _finite_vector(values, length: int, what: str) -> np.ndarray:
    arr = np.ascontiguousarray(values, dtype=np.float64).ravel()
    if arr.size != length:
        raise DimensionError(f"{what}: expected {length} values, got {arr.size}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{what}: values must be finite")
    return arr


@dataclass
class Image:
    values: np.ndarray
    width: int
    height: int
    pixel_size: float = 1.0

    def __post_init__(self):
        self.values = _finite_vector(self.values, self.width * self.height, "image")

    @classmethod
    def from_array(cls, arr, pixel_size: float = 1.0) -> "Image":
        arr = np.asarray(arr, dtype=np.float64)
        if arr.ndim != 2:
            raise DimensionError("image array must be 2-D")
        return cls(arr.ravel(), width=arr.shape[1], height=arr.shape[0], pixel_size=pixel_size)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)

    def as_array(self) -> np.ndarray:
        return self.values.reshape(self.shape)

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)


@dataclass
class Sinogram:
    values: np.ndarray
    n_angles: int
    n_rays: int

    def __post_init__(self):
        self.values = _finite_vector(self.values, self.n_angles * self.n_rays, "sinogram")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_angles, self.n_rays)

    def as_array(self) -> np.ndarray:
        return self.values.reshape(self.shape)

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)


@dataclass
class LinearMap:
    """A linear map R^domain_dim -> R^range_dim given by a pair of callables.

    ``domain_shape`` is the 2-D layout of domain vectors, used by image-space
    operations such as total variation. It defaults to a single row.
    """

    domain_dim: int
    range_dim: int
    apply: Callable[[np.ndarray], np.ndarray]
    apply_adjoint: Callable[[np.ndarray], np.ndarray]
    domain_shape: tuple[int, int] | None = None
    name: str = field(default="linear map", repr=False)

    def __post_init__(self):
        if self.domain_shape is None:
            self.domain_shape = (1, self.domain_dim)
        if self.domain_shape[0] * self.domain_shape[1] != self.domain_dim:
            raise DimensionError("domain_shape does not match domain_dim")

    def __call__(self, x) -> np.ndarray:
        x = _as_vector(x, self.domain_dim, "domain vector")
        return self.apply(x)

    def adjoint(self, s) -> np.ndarray:
        s = _as_vector(s, self.range_dim, "range vector")
        return self.apply_adjoint(s)

    def normal(self, x) -> np.ndarray:
        """A^T A x."""
        return self.adjoint(self(x))

    @classmethod
    def from_matrix(cls, M, domain_shape=None) -> "LinearMap":
        M = np.array(M, dtype=np.float64, ndmin=2)
        return cls(M.shape[1], M.shape[0], lambda x: M @ x, lambda s: M.T @ s,
                   domain_shape=domain_shape, name="matrix")

    @classmethod
    def identity(cls, n: int) -> "LinearMap":
        return cls(n, n, lambda x: x.copy(), lambda s: s.copy(), name="identity")


def _as_vector(v, length: int, what: str) -> np.ndarray:
    arr = np.asarray(v, dtype=np.float64).ravel()
    if arr.size != length:
        raise DimensionError(f"{what}: expected length {length}, got {arr.size}")
    return arr


def inner_product(u, v) -> float:
    u = np.asarray(u, dtype=np.float64).ravel()
    v = np.asarray(v, dtype=np.float64).ravel()
    if u.size != v.size:
        raise DimensionError(f"inner product of vectors of length {u.size} and {v.size}")
    return float(np.dot(u, v))


def residual(A: LinearMap, x, y) -> np.ndarray:
    """A x - y."""
    return A(x) - _as_vector(y, A.range_dim, "data vector")


def gradient(A: LinearMap, x, y) -> np.ndarray:
    """Gradient of the half squared residual, A^T (A x - y)."""
    return A.adjoint(residual(A, x, y))


def half_squared_residual(A: LinearMap, x, y) -> float:
    r = residual(A, x, y)
    return 0.5 * float(np.dot(r, r))


def spectral_norm(A: LinearMap, max_iters: int = 200, tol: float = 1e-8,
                  seed: int = 42) -> tuple[float, bool]:
    """Largest singular value of A by power iteration on A^T A.

    Returns ``(estimate, converged)``; ``converged`` is False when the relative
    change never dropped below ``tol`` within ``max_iters`` iterations.
    """
    if max_iters < 1:
        raise ValueError("max_iters must be >= 1")
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(A.domain_dim)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(max_iters):
        w = A.normal(v)
        lam_new = float(np.linalg.norm(w))
        if lam_new == 0.0:
            return 0.0, True
        v = w / lam_new
        if abs(lam_new - lam) <= tol * lam_new:
            return float(np.sqrt(lam_new)), True
        lam = lam_new
    return float(np.sqrt(lam)), False


def materialize_dense(A: LinearMap, max_entries: int = 10**6) -> np.ndarray:
    """Dense matrix of A, column j = A e_j. Test oracle only."""
    n = A.domain_dim * A.range_dim
    if n > max_entries:
        raise SizeGuardError(f"dense matrix would have {n} entries (limit {max_entries})")
    M = np.empty((A.range_dim, A.domain_dim))
    e = np.zeros(A.domain_dim)
    for j in range(A.domain_dim):
        e[j] = 1.0
        M[:, j] = A(e)
        e[j] = 0.0
    return M
