"""Parallel-beam geometry, Joseph forward/back projection, phantom and noise.

Coordinates: pixel centres sit at x = j - (W-1)/2 and y = (H-1)/2 - i for
row i, column j (row 0 is the top of the image). A ray at angle theta with
detector coordinate t is the line x cos(theta) + y sin(theta) = t. Rays are
traversed along their dominant axis and interpolated linearly across it, with
zero outside the grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

from .operators import DimensionError, Image, LinearMap, Sinogram


@dataclass(frozen=True)
class Geometry:
    n_angles: int
    n_rays: int
    image_width: int
    image_height: int
    detector_spacing: float
    angles: tuple[float, ...]

    @property
    def image_shape(self) -> tuple[int, int]:
        return (self.image_height, self.image_width)

    @property
    def sino_shape(self) -> tuple[int, int]:
        return (self.n_angles, self.n_rays)

    @property
    def n_pixels(self) -> int:
        return self.image_width * self.image_height

    @property
    def n_data(self) -> int:
        return self.n_angles * self.n_rays


def make_geometry(n_angles: int, n_rays: int, width: int, height: int) -> Geometry:
    """Uniform angles i*pi/n_angles and a centred detector spanning the image diagonal.

    The detector spacing is one pixel unless that would leave the detector
    narrower than the image diagonal, in which case it is widened to cover it.
    """
    for name, v in (("n_angles", n_angles), ("n_rays", n_rays), ("width", width), ("height", height)):
        if int(v) != v or v < 1:
            raise ValueError(f"{name} must be a positive integer, got {v!r}")
    diagonal = math.hypot(width, height)
    spacing = max(1.0, diagonal / n_rays)
    angles = tuple(i * math.pi / n_angles for i in range(n_angles))
    return Geometry(int(n_angles), int(n_rays), int(width), int(height), spacing, angles)


@numba.njit(cache=True, inline="always")
def _span(base, step, n_along, n_across):
    """Indices k in [0, n_along) for which base + k*step lies in (-1, n_across)."""
    if step == 0.0:
        if -1.0 < base < n_across:
            return 0, n_along
        return 0, 0
    k_a = (-1.0 - base) / step
    k_b = (n_across - base) / step
    if k_a > k_b:
        k_a, k_b = k_b, k_a
    lo = max(0, int(math.floor(k_a)))
    hi = min(n_along, int(math.ceil(k_b)) + 1)
    return lo, max(lo, hi)


@numba.njit(cache=True)
def _joseph_forward(img, angles, n_rays, spacing, out):
    H, W = img.shape
    cx = 0.5 * (W - 1)
    cy = 0.5 * (H - 1)
    t0 = 0.5 * (n_rays - 1)
    for a in range(angles.shape[0]):
        c = math.cos(angles[a])
        s = math.sin(angles[a])
        horizontal = abs(s) > abs(c)
        if horizontal:
            # step over columns j, fractional row index fi = base + j*step
            step = c / s
            w = 1.0 / abs(s)
        else:
            # step over rows i, fractional column index fj = base + i*step
            step = s / c
            w = 1.0 / abs(c)
        for r in range(n_rays):
            t = (r - t0) * spacing
            acc = 0.0
            if horizontal:
                base = cy - t / s - cx * step
                lo, hi = _span(base, step, W, H)
                for j in range(lo, hi):
                    fi = base + j * step
                    i0 = int(math.floor(fi))
                    fr = fi - i0
                    if 0 <= i0 < H:
                        acc += (1.0 - fr) * img[i0, j]
                    if -1 <= i0 < H - 1:
                        acc += fr * img[i0 + 1, j]
            else:
                base = t / c - cy * step + cx
                lo, hi = _span(base, step, H, W)
                for i in range(lo, hi):
                    fj = base + i * step
                    j0 = int(math.floor(fj))
                    fr = fj - j0
                    if 0 <= j0 < W:
                        acc += (1.0 - fr) * img[i, j0]
                    if -1 <= j0 < W - 1:
                        acc += fr * img[i, j0 + 1]
            out[a, r] = acc * w


@numba.njit(cache=True)
def _joseph_adjoint(sino, angles, spacing, out):
    H, W = out.shape
    n_rays = sino.shape[1]
    cx = 0.5 * (W - 1)
    cy = 0.5 * (H - 1)
    t0 = 0.5 * (n_rays - 1)
    for a in range(angles.shape[0]):
        c = math.cos(angles[a])
        s = math.sin(angles[a])
        horizontal = abs(s) > abs(c)
        if horizontal:
            step = c / s
            w = 1.0 / abs(s)
        else:
            step = s / c
            w = 1.0 / abs(c)
        for r in range(n_rays):
            t = (r - t0) * spacing
            v = sino[a, r] * w
            if horizontal:
                base = cy - t / s - cx * step
                lo, hi = _span(base, step, W, H)
                for j in range(lo, hi):
                    fi = base + j * step
                    i0 = int(math.floor(fi))
                    fr = fi - i0
                    if 0 <= i0 < H:
                        out[i0, j] += (1.0 - fr) * v
                    if -1 <= i0 < H - 1:
                        out[i0 + 1, j] += fr * v
            else:
                base = t / c - cy * step + cx
                lo, hi = _span(base, step, H, W)
                for i in range(lo, hi):
                    fj = base + i * step
                    j0 = int(math.floor(fj))
                    fr = fj - j0
                    if 0 <= j0 < W:
                        out[i, j0] += (1.0 - fr) * v
                    if -1 <= j0 < W - 1:
                        out[i, j0 + 1] += fr * v


def forward_project(geom: Geometry, x) -> np.ndarray:
    """Sinogram (flattened, angle-major) of the image x."""
    x = np.asarray(x, dtype=np.float64)
    if x.size != geom.n_pixels:
        raise DimensionError(f"image has {x.size} pixels, geometry expects {geom.n_pixels}")
    img = np.ascontiguousarray(x.reshape(geom.image_shape))
    out = np.empty(geom.sino_shape)
    _joseph_forward(img, np.asarray(geom.angles), geom.n_rays, geom.detector_spacing, out)
    return out.ravel()


def back_project(geom: Geometry, s) -> np.ndarray:
    """Exact adjoint of :func:`forward_project`."""
    s = np.asarray(s, dtype=np.float64)
    if s.size != geom.n_data:
        raise DimensionError(f"sinogram has {s.size} values, geometry expects {geom.n_data}")
    sino = np.ascontiguousarray(s.reshape(geom.sino_shape))
    out = np.zeros(geom.image_shape)
    _joseph_adjoint(sino, np.asarray(geom.angles), geom.detector_spacing, out)
    return out.ravel()


class Projector(LinearMap):
    """The system matrix of a :class:`Geometry`, applied matrix-free."""

    def __init__(self, geom: Geometry):
        super().__init__(geom.n_pixels, geom.n_data,
                         lambda x: forward_project(geom, x),
                         lambda s: back_project(geom, s),
                         domain_shape=geom.image_shape, name="joseph projector")
        self.geometry = geom


# Modified Shepp-Logan (Toft): intensity, semi-axis x, semi-axis y, centre x, centre y, angle (deg)
_SHEPP_LOGAN = np.array([
    [1.0, 0.69, 0.92, 0.0, 0.0, 0.0],
    [-0.8, 0.6624, 0.8740, 0.0, -0.0184, 0.0],
    [-0.2, 0.1100, 0.3100, 0.22, 0.0, -18.0],
    [-0.2, 0.1600, 0.4100, -0.22, 0.0, 18.0],
    [0.1, 0.2100, 0.2500, 0.0, 0.35, 0.0],
    [0.1, 0.0460, 0.0460, 0.0, 0.1, 0.0],
    [0.1, 0.0460, 0.0460, 0.0, -0.1, 0.0],
    [0.1, 0.0460, 0.0230, -0.08, -0.605, 0.0],
    [0.1, 0.0230, 0.0230, 0.0, -0.606, 0.0],
    [0.1, 0.0230, 0.0460, 0.06, -0.605, 0.0],
])


def phantom_coordinates(width: int, height: int) -> tuple[np.ndarray, np.ndarray]:
    """Pixel-centre coordinates normalised so the grid spans [-1, 1]."""
    xs = (np.arange(width) - 0.5 * (width - 1)) / (0.5 * width)
    ys = (0.5 * (height - 1) - np.arange(height)) / (0.5 * height)
    return np.meshgrid(xs, ys)


def make_phantom(width: int, height: int) -> Image:
    """Modified Shepp-Logan head phantom sampled at pixel centres, clipped to [0, 1]."""
    if width < 8 or height < 8:
        raise ValueError(f"phantom grid must be at least 8x8, got {width}x{height}")
    X, Y = phantom_coordinates(width, height)
    img = np.zeros((height, width))
    for rho, a, b, x0, y0, phi in _SHEPP_LOGAN:
        th = np.deg2rad(phi)
        dx, dy = X - x0, Y - y0
        u = dx * np.cos(th) + dy * np.sin(th)
        v = -dx * np.sin(th) + dy * np.cos(th)
        img[(u / a) ** 2 + (v / b) ** 2 <= 1.0] += rho
    return Image.from_array(np.clip(img, 0.0, 1.0))


def make_disk(width: int, height: int, radius: float = 0.8, value: float = 1.0) -> Image:
    """Centred uniform disk; radius as a fraction of the half-width."""
    X, Y = phantom_coordinates(width, height)
    return Image.from_array(np.where(X ** 2 + Y ** 2 <= radius ** 2, value, 0.0))


@dataclass(frozen=True)
class NoiseModel:
    level: float
    sigma2: float
    seed: int

    @property
    def sigma(self) -> float:
        return math.sqrt(self.sigma2)


def standard_normal(n: int, seed: int) -> np.ndarray:
    """Box-Muller normals drawn from a Philox (counter-based) uniform stream."""
    rng = np.random.Generator(np.random.Philox(seed))
    m = (n + 1) // 2
    u1 = 1.0 - rng.random(m)  # (0, 1], keeps log finite
    u2 = rng.random(m)
    rad = np.sqrt(-2.0 * np.log(u1))
    z = np.empty(2 * m)
    z[0::2] = rad * np.cos(2.0 * np.pi * u2)
    z[1::2] = rad * np.sin(2.0 * np.pi * u2)
    return z[:n]


def add_noise(y, level: float, seed: int):
    """Add i.i.d. Gaussian noise with sigma = level * rms(y).

    Returns ``(noisy, NoiseModel)``; ``noisy`` has the type of ``y`` when it
    is a :class:`Sinogram`, otherwise it is a flat array.
    """
    if not level > 0:
        raise ValueError("noise level must be positive")
    vals = np.asarray(y, dtype=np.float64).ravel()
    norm = float(np.linalg.norm(vals))
    if norm == 0.0:
        raise ValueError("cannot scale noise to an all-zero sinogram")
    sigma = level * norm / math.sqrt(vals.size)
    noisy = vals + sigma * standard_normal(vals.size, seed)
    model = NoiseModel(level=float(level), sigma2=sigma * sigma, seed=int(seed))
    if isinstance(y, Sinogram):
        return Sinogram(noisy, y.n_angles, y.n_rays), model
    return noisy, model


def snr_db(clean, noisy) -> float:
    clean = np.asarray(clean, dtype=np.float64).ravel()
    noise = np.asarray(noisy, dtype=np.float64).ravel() - clean
    return 20.0 * math.log10(np.linalg.norm(clean) / np.linalg.norm(noise))
