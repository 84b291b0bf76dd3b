"""Littlewood-Paley blocks and (space-time) Besov norms on the discrete lattice.

The low-pass profile is the explicit cosine taper

    chi(r) = 1                                  r <= 3/4
    chi(r) = cos^2(pi/2 * (r - 3/4) / (4/3 - 3/4))  3/4 < r <= 4/3
    chi(r) = 0                                  r > 4/3

and the annular profiles are phi_j(xi) = chi(xi / 2^(j+1)) - chi(xi / 2^j),
sampled at the integer lattice |k|.  The decomposition sum_{j=-1}^{j_max}
is exact on the disc |k| <= (3/4) 2^(j_max+1), which contains every
wavenumber of modulus up to the dealiasing cutoff.
"""
from __future__ import annotations

import math

import numpy as np

from .field import GridSpec, get_grid, grid_of, lp_norm

CHI_INNER = 0.75
CHI_OUTER = 4.0 / 3.0


def chi(r):
    r = np.asarray(r, dtype=float)
    taper = np.cos(0.5 * np.pi * (r - CHI_INNER) / (CHI_OUTER - CHI_INNER)) ** 2
    return np.where(r <= CHI_INNER, 1.0, np.where(r <= CHI_OUTER, taper, 0.0))


class DyadicPartition:
    """Profiles chi and phi_0 .. phi_{j_max} resolved on a grid's lattice.

    Immutable after construction; safe to share between threads.
    """

    def __init__(self, grid: GridSpec | int):
        if not isinstance(grid, GridSpec):
            grid = get_grid(grid)
        self.grid = grid
        self.j_max = int(math.floor(math.log2(grid.kcut)))
        r = grid.kabs
        profiles = [chi(r)]
        for j in range(self.j_max + 1):
            profiles.append(chi(r / 2.0 ** (j + 1)) - chi(r / 2.0**j))
        self._profiles = np.stack(profiles)
        self._profiles.setflags(write=False)

    @property
    def chi_profile(self) -> np.ndarray:
        return self._profiles[0]

    def profile(self, j: int) -> np.ndarray:
        self._check(j, -1, self.j_max)
        return self._profiles[j + 1]

    @property
    def indices(self) -> range:
        return range(-1, self.j_max + 1)

    def _check(self, j, lo, hi):
        if not (isinstance(j, (int, np.integer)) and lo <= j <= hi):
            raise ValueError(f"block index {j!r} outside [{lo}, {hi}]")

    def resolved_disc(self) -> np.ndarray:
        """Mask of wavenumbers on which the partition of unity is exact."""
        return self.grid.kabs <= CHI_INNER * 2.0 ** (self.j_max + 1)


def _partition_for(F: np.ndarray, P: DyadicPartition | None) -> DyadicPartition:
    g = grid_of(F)
    if P is None:
        return DyadicPartition(g)
    if P.grid.n != g.n:
        raise ValueError(f"partition built for n={P.grid.n}, field has n={g.n}")
    return P


def block(F: np.ndarray, j: int, P: DyadicPartition | None = None) -> np.ndarray:
    """Delta_j f: chi-block for j = -1, annulus phi_j otherwise."""
    P = _partition_for(F, P)
    return P.profile(j) * F


def blocks(F: np.ndarray, P: DyadicPartition | None = None) -> np.ndarray:
    """All blocks stacked along a leading axis, j = -1 .. j_max."""
    P = _partition_for(F, P)
    return P._profiles * F[None]


def low_pass(F: np.ndarray, j: int, P: DyadicPartition | None = None) -> np.ndarray:
    """S_j f = sum of blocks -1 .. j-1."""
    P = _partition_for(F, P)
    P._check(j, 0, P.j_max + 1)
    return P._profiles[: j + 1].sum(axis=0) * F


def block_norms(F: np.ndarray, p: float, P: DyadicPartition | None = None) -> np.ndarray:
    """||Delta_j f||_{L^p} for j = -1 .. j_max."""
    P = _partition_for(F, P)
    phys = np.fft.ifft2(blocks(F, P), axes=(-2, -1)).real * F.size
    return np.array([lp_norm(b, p) for b in phys])


def _lq(values: np.ndarray, q: float) -> float:
    if q == math.inf:
        return float(np.max(values)) if values.size else 0.0
    return math.fsum(values**q) ** (1.0 / q)


def besov_norm(F: np.ndarray, s: float, p: float, q: float, P: DyadicPartition | None = None) -> float:
    """Inhomogeneous B^s_{p,q} norm, summed over j = -1 .. j_max."""
    _check_exponents(p, q)
    P = _partition_for(F, P)
    weights = 2.0 ** (s * np.arange(-1, P.j_max + 1))
    return _lq(weights * block_norms(F, p, P), q)


def vector_besov_norm(components, s: float, p: float, q: float, P: DyadicPartition | None = None) -> float:
    """Besov norm of a vector field, blocks measured by pointwise magnitude."""
    P = _partition_for(components[0], P)
    physs = [np.fft.ifft2(blocks(C, P), axes=(-2, -1)).real * C.size for C in components]
    mags = np.sqrt(sum(b * b for b in physs))
    norms = np.array([lp_norm(m, p) for m in mags])
    weights = 2.0 ** (s * np.arange(-1, P.j_max + 1))
    return _lq(weights * norms, q)


def _check_exponents(*exps):
    for e in exps:
        if not (e == math.inf or e >= 1):
            raise ValueError(f"Besov exponents must be >= 1 or inf, got {e}")


def trapezoid_weights(times) -> np.ndarray:
    t = np.asarray(times, dtype=float)
    if t.size < 2:
        raise ValueError("time series needs at least two samples")
    h = np.diff(t)
    if np.any(h <= 0):
        raise ValueError("sample times must be strictly increasing")
    w = np.zeros_like(t)
    w[:-1] += 0.5 * h
    w[1:] += 0.5 * h
    return w


def _time_lr(samples: np.ndarray, weights: np.ndarray, r: float) -> np.ndarray:
    """L^r in time along axis 0 with quadrature weights."""
    if r == math.inf:
        return samples.max(axis=0)
    return np.sum(weights.reshape((-1,) + (1,) * (samples.ndim - 1)) * samples**r, axis=0) ** (1.0 / r)


def spacetime_besov(fields, times, r: float, s: float, p: float, q: float,
                    P: DyadicPartition | None = None, flavor: str = "plain") -> float:
    """L^r_T B^s_{p,q} ("plain") or tilde-L^r_T B^s_{p,q} ("tilde") norm.

    Both flavors share the trapezoidal time quadrature on ``times``.
    """
    fields = list(fields)
    if not fields:
        raise ValueError("empty time series")
    if len(fields) != len(times):
        raise ValueError("need one time per field")
    _check_exponents(r, p, q)
    w = trapezoid_weights(times)
    P = _partition_for(fields[0], P)
    scale = 2.0 ** (s * np.arange(-1, P.j_max + 1))
    table = np.array([scale * block_norms(F, p, P) for F in fields])  # (time, j)
    if flavor == "plain":
        per_time = np.array([_lq(row, q) for row in table])
        return float(_time_lr(per_time, w, r))
    if flavor == "tilde":
        return _lq(_time_lr(table, w, r), q)
    raise ValueError(f"unknown flavor {flavor!r}")
