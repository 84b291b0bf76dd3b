"""Periodic-grid fields and Fourier-multiplier operators on the torus [0, 2pi)^2.

Spectral fields are plain complex ``(n, n)`` arrays in numpy FFT ordering,
normalized so that a constant field ``c`` has ``F[0, 0] == c``.  Axis 0 is the
``x1`` direction, axis 1 is ``x2``.  Every operator accepts an optional
:class:`GridSpec`; when omitted, a default grid is inferred from the array
shape.

Conventions shared by all multipliers:

* negative-order multipliers (``Lambda^{-s}``, the Riesz transform, Biot-Savart)
  annihilate the mean mode;
* odd multipliers (``i k``) zero the Nyquist line, which has no Hermitian
  partner;
* ``L^inf`` norms are collocation maxima, i.e. approximations from below.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import NamedTuple

import numpy as np

TWO_PI = 2.0 * np.pi
DEFAULT_DEALIAS = 2.0 / 3.0


@dataclass(frozen=True)
class GridSpec:
    """Square periodic grid with ``n`` points per side on ``[0, 2pi)^2``."""

    n: int
    dealias_fraction: float = DEFAULT_DEALIAS

    length = TWO_PI

    def __post_init__(self):
        n = self.n
        if not isinstance(n, (int, np.integer)) or n < 8 or n & (n - 1):
            raise ValueError(f"grid n must be a power of two >= 8, got {n!r}")
        if not 0.0 < self.dealias_fraction <= 1.0:
            raise ValueError(f"dealias_fraction must lie in (0, 1], got {self.dealias_fraction}")

    @property
    def dx(self) -> float:
        return self.length / self.n

    @property
    def cell_area(self) -> float:
        return self.dx * self.dx

    @property
    def kcut(self) -> float:
        """Largest retained |k_i| after dealiasing."""
        return self.dealias_fraction * self.n / 2

    @cached_property
    def k1(self) -> np.ndarray:
        k = np.fft.fftfreq(self.n, 1.0 / self.n)
        return _frozen(np.broadcast_to(k[:, None], (self.n, self.n)).copy())

    @cached_property
    def k2(self) -> np.ndarray:
        k = np.fft.fftfreq(self.n, 1.0 / self.n)
        return _frozen(np.broadcast_to(k[None, :], (self.n, self.n)).copy())

    @cached_property
    def ksq(self) -> np.ndarray:
        return _frozen(self.k1**2 + self.k2**2)

    @cached_property
    def kabs(self) -> np.ndarray:
        return _frozen(np.sqrt(self.ksq))

    @cached_property
    def nyquist_free(self) -> np.ndarray:
        """Mask that is False on the k1 = -n/2 or k2 = -n/2 lines."""
        h = -(self.n // 2)
        return _frozen((self.k1 != h) & (self.k2 != h))

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        cut = self.kcut
        return _frozen((np.abs(self.k1) <= cut) & (np.abs(self.k2) <= cut))

    @cached_property
    def coords(self) -> tuple[np.ndarray, np.ndarray]:
        x = np.arange(self.n) * self.dx
        x1, x2 = np.meshgrid(x, x, indexing="ij")
        return _frozen(x1), _frozen(x2)

    @cached_property
    def reflect_index(self) -> tuple[np.ndarray, np.ndarray]:
        """Index arrays mapping k to -k (mod n)."""
        i = (-np.arange(self.n)) % self.n
        return _frozen(i[:, None].copy()), _frozen(i[None, :].copy())


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@lru_cache(maxsize=None)
def get_grid(n: int, dealias_fraction: float = DEFAULT_DEALIAS) -> GridSpec:
    return GridSpec(int(n), dealias_fraction)


def grid_of(a: np.ndarray, grid: GridSpec | None = None) -> GridSpec:
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square 2D array, got shape {a.shape}")
    if grid is None:
        return get_grid(a.shape[0])
    if grid.n != a.shape[0]:
        raise ValueError(f"array of size {a.shape[0]} does not live on grid n={grid.n}")
    return grid


class VectorField(NamedTuple):
    """Spectral components (u1, u2) of a planar vector field."""

    u1: np.ndarray
    u2: np.ndarray


# --------------------------------------------------------------------------
# transforms and projections


def transform_forward(f: np.ndarray) -> np.ndarray:
    f = np.asarray(f, dtype=float)
    grid_of(f)
    if not np.all(np.isfinite(f)):
        raise ValueError("field contains non-finite samples")
    return np.fft.fft2(f) / f.size


def hermitian_defect(F: np.ndarray, grid: GridSpec | None = None) -> float:
    """max |F(k) - conj(F(-k))| relative to max |F|; 0 for a zero field."""
    g = grid_of(F, grid)
    scale = np.max(np.abs(F))
    if scale == 0:
        return 0.0
    i1, i2 = g.reflect_index
    return float(np.max(np.abs(F - np.conj(F[i1, i2]))) / scale)


def is_hermitian(F: np.ndarray, tol: float = 1e-10, grid: GridSpec | None = None) -> bool:
    return hermitian_defect(F, grid) <= tol


def hermitian_project(F: np.ndarray, grid: GridSpec | None = None) -> np.ndarray:
    g = grid_of(F, grid)
    i1, i2 = g.reflect_index
    return 0.5 * (F + np.conj(F[i1, i2]))


def transform_inverse(F: np.ndarray, grid: GridSpec | None = None, *, check: bool = True) -> np.ndarray:
    """Real field whose forward transform is ``F``.

    Raises ``ValueError`` for non-Hermitian input unless ``check`` is off, in
    which case the imaginary part is discarded.
    """
    grid_of(F, grid)
    if check and not is_hermitian(F, grid=grid):
        raise ValueError("coefficients are not Hermitian; they do not represent a real field")
    return np.fft.ifft2(F).real * F.size


def dealias(F: np.ndarray, grid: GridSpec | None = None) -> np.ndarray:
    g = grid_of(F, grid)
    return np.where(g.dealias_mask, F, 0.0)


# --------------------------------------------------------------------------
# Fourier multipliers


def multiplier_lambda(F: np.ndarray, alpha: float, grid: GridSpec | None = None) -> np.ndarray:
    """Apply Lambda^alpha = (-Laplacian)^(alpha/2): F(k) -> |k|^alpha F(k)."""
    g = grid_of(F, grid)
    if alpha == 0:
        return F.copy()
    with np.errstate(divide="ignore"):
        m = np.where(g.ksq > 0, g.kabs ** alpha, 0.0)
    return m * F


def riesz1(F: np.ndarray, grid: GridSpec | None = None) -> np.ndarray:
    """R1 = d/dx1 Lambda^{-1}: F(k) -> i k1/|k| F(k)."""
    g = grid_of(F, grid)
    with np.errstate(invalid="ignore", divide="ignore"):
        m = np.where(g.ksq > 0, g.k1 / g.kabs, 0.0)
    m = np.where(g.k1 == -(g.n // 2), 0.0, m)
    return 1j * m * F


def partial_derivative(F: np.ndarray, axis: int, grid: GridSpec | None = None) -> np.ndarray:
    """d/dx_axis for ``axis`` in {1, 2}."""
    g = grid_of(F, grid)
    if axis == 1:
        k = g.k1
    elif axis == 2:
        k = g.k2
    else:
        raise ValueError(f"axis must be 1 or 2, got {axis}")
    k = np.where(k == -(g.n // 2), 0.0, k)
    return 1j * k * F


def gradient(F: np.ndarray, grid: GridSpec | None = None) -> VectorField:
    return VectorField(partial_derivative(F, 1, grid), partial_derivative(F, 2, grid))


def laplacian(F: np.ndarray, grid: GridSpec | None = None) -> np.ndarray:
    g = grid_of(F, grid)
    return -g.ksq * F


def curl(u: VectorField, grid: GridSpec | None = None) -> np.ndarray:
    return partial_derivative(u.u2, 1, grid) - partial_derivative(u.u1, 2, grid)


def divergence(u: VectorField, grid: GridSpec | None = None) -> np.ndarray:
    return partial_derivative(u.u1, 1, grid) + partial_derivative(u.u2, 2, grid)


def is_divergence_free(u: VectorField, tol: float = 1e-12, grid: GridSpec | None = None) -> bool:
    g = grid_of(u.u1, grid)
    scale = max(np.max(np.abs(u.u1)), np.max(np.abs(u.u2)))
    if scale == 0:
        return True
    d = 1j * g.k1 * u.u1 + 1j * g.k2 * u.u2
    d = np.where(g.nyquist_free, d, 0.0)
    return bool(np.max(np.abs(d)) <= tol * scale)


def biot_savart(Omega: np.ndarray, grid: GridSpec | None = None) -> VectorField:
    """Velocity u = grad-perp Delta^{-1} Omega, mean-free and divergence-free."""
    g = grid_of(Omega, grid)
    with np.errstate(divide="ignore", invalid="ignore"):
        psi = np.where(g.ksq > 0, -Omega / np.where(g.ksq > 0, g.ksq, 1.0), 0.0)
    psi = np.where(g.nyquist_free, psi, 0.0)
    return VectorField(-1j * g.k2 * psi, 1j * g.k1 * psi)


def heat_semigroup(F: np.ndarray, t: float, grid: GridSpec | None = None) -> np.ndarray:
    """e^{t Laplacian}: F(k) -> exp(-|k|^2 t) F(k)."""
    if t < 0:
        raise ValueError(f"heat semigroup needs t >= 0, got {t}")
    g = grid_of(F, grid)
    return np.exp(-g.ksq * t) * F


# --------------------------------------------------------------------------
# products


def velocity_physical(u: VectorField, grid: GridSpec | None = None) -> tuple[np.ndarray, np.ndarray]:
    return (transform_inverse(u.u1, grid, check=False),
            transform_inverse(u.u2, grid, check=False))


def advect_physical(u_phys: tuple[np.ndarray, np.ndarray], F: np.ndarray,
                    grid: GridSpec | None = None) -> np.ndarray:
    """Dealiased u.grad f with u already sampled on the grid."""
    g = grid_of(F, grid)
    f1 = transform_inverse(partial_derivative(F, 1, g), g, check=False)
    f2 = transform_inverse(partial_derivative(F, 2, g), g, check=False)
    prod = u_phys[0] * f1 + u_phys[1] * f2
    return dealias(np.fft.fft2(prod) / prod.size, g)


def advect(u: VectorField, F: np.ndarray, grid: GridSpec | None = None) -> np.ndarray:
    """Dealiased spectral representation of u.grad f (pseudo-spectral)."""
    if u.u1.shape != F.shape or u.u2.shape != F.shape:
        raise ValueError(f"grid mismatch: u on {u.u1.shape}, f on {F.shape}")
    g = grid_of(F, grid)
    return advect_physical(velocity_physical(u, g), F, g)


def multiply(F: np.ndarray, G: np.ndarray, grid: GridSpec | None = None) -> np.ndarray:
    """Dealiased product of two spectral fields."""
    if F.shape != G.shape:
        raise ValueError(f"grid mismatch: {F.shape} vs {G.shape}")
    g = grid_of(F, grid)
    prod = transform_inverse(F, g, check=False) * transform_inverse(G, g, check=False)
    return dealias(np.fft.fft2(prod) / prod.size, g)


def resample(F: np.ndarray, m: int) -> np.ndarray:
    """Embed (m > n) or truncate (m < n) spectral coefficients onto an m-grid.

    Modes that do not fit are dropped; the Nyquist line of the source is
    dropped when padding, since it has no unique image.
    """
    n = F.shape[0]
    out = np.zeros((m, m), dtype=complex)
    half = min(n, m) // 2
    ks = np.arange(-half + 1, half)
    src = ks % n
    dst = ks % m
    out[np.ix_(dst, dst)] = F[np.ix_(src, src)]
    return out


# --------------------------------------------------------------------------
# norms


def accurate_sum(a: np.ndarray) -> float:
    """Row-wise pairwise sums reduced with exactly rounded (fsum) accumulation."""
    a = np.asarray(a)
    if a.ndim < 2:
        return math.fsum(a)
    return math.fsum(a.reshape(-1, a.shape[-1]).sum(axis=1))


def lp_norm(f: np.ndarray, p: float) -> float:
    """Discrete L^p norm on the torus; ``p = inf`` gives the collocation max."""
    f = np.asarray(f)
    if np.iscomplexobj(f):
        raise TypeError("lp_norm takes a real (physical-space) field")
    if p == math.inf:
        return float(np.max(np.abs(f))) if f.size else 0.0
    if p < 1:
        raise ValueError(f"p must be >= 1 or inf, got {p}")
    n = f.shape[0]
    area = (TWO_PI / n) ** 2
    a = np.abs(f)
    s = accurate_sum(a * a if p == 2 else a**p)
    return (s * area) ** (1.0 / p)


def vector_lp_norm(components, p: float) -> float:
    """L^p norm of the pointwise Euclidean magnitude of real components."""
    mag = np.sqrt(sum(c * c for c in components))
    return lp_norm(mag, p)


def inner(F: np.ndarray, G: np.ndarray) -> float:
    """L^2 inner product of two real fields from their coefficients (Parseval)."""
    return TWO_PI**2 * accurate_sum((F * np.conj(G)).real)


def l2_norm_spectral(F: np.ndarray) -> float:
    return TWO_PI * math.sqrt(accurate_sum(F.real**2 + F.imag**2))


def sobolev_norm(F: np.ndarray, s: float, grid: GridSpec | None = None) -> float:
    """Inhomogeneous H^s norm: 2pi (sum (1+|k|^2)^s |F(k)|^2)^(1/2)."""
    g = grid_of(F, grid)
    w = (1.0 + g.ksq) ** s
    return TWO_PI * math.sqrt(accurate_sum(w * (F.real**2 + F.imag**2)))


def homogeneous_norm(F: np.ndarray, s: float, grid: GridSpec | None = None) -> float:
    """||Lambda^s f||_{L^2} computed in frequency space."""
    return l2_norm_spectral(multiplier_lambda(F, s, grid))
