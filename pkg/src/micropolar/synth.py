"""Seeded synthetic fields: power-law random ensembles and initial-data families.

Random coefficients are drawn on a fixed lattice [-kmax, kmax]^2 that does not
depend on the grid size, so the same seed yields the same continuum field on
every grid that resolves it.
"""
from __future__ import annotations

import numpy as np

from .field import GridSpec, dealias, get_grid, hermitian_project, transform_forward


def _embed(coeffs: np.ndarray, kmax: int, grid: GridSpec) -> np.ndarray:
    if 2 * kmax >= grid.n:
        raise ValueError(f"kmax={kmax} not resolvable on n={grid.n}")
    F = np.zeros((grid.n, grid.n), dtype=complex)
    ks = np.arange(-kmax, kmax + 1) % grid.n
    F[np.ix_(ks, ks)] = coeffs
    return F


def random_field(grid: GridSpec | int, rng: np.random.Generator, *, gamma: float = 2.0,
                 kmin: float = 1.0, kmax: int = 8, amplitude: float = 1.0) -> np.ndarray:
    """Hermitian Gaussian field with coefficient modulus ~ |k|^-gamma on kmin <= |k| <= kmax.

    Normalized to root-mean-square ``amplitude`` and dealiased.
    """
    if not isinstance(grid, GridSpec):
        grid = get_grid(grid)
    k = np.arange(-kmax, kmax + 1)
    kk = np.sqrt(k[:, None] ** 2 + k[None, :] ** 2)
    shape = kk.shape
    c = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    band = (kk >= kmin) & (kk <= kmax)
    with np.errstate(divide="ignore"):
        c = np.where(band, c * kk ** (-gamma), 0.0)
    F = dealias(hermitian_project(_embed(c, kmax, grid), grid), grid)
    rms = np.sqrt(np.sum(np.abs(F) ** 2))
    return F * (amplitude / rms) if rms > 0 else F


def flat_spectrum_field(grid: GridSpec | int, rng: np.random.Generator, kmin: float, kmax: float) -> np.ndarray:
    """Unit-modulus coefficients with random phases on kmin <= |k| <= kmax."""
    if not isinstance(grid, GridSpec):
        grid = get_grid(grid)
    phase = np.exp(2j * np.pi * rng.random((grid.n, grid.n)))
    band = (grid.kabs >= kmin) & (grid.kabs <= kmax) & grid.nyquist_free
    F = hermitian_project(np.where(band, phase, 0.0), grid)
    # projection averages conjugate pairs; rescale back to unit modulus
    mod = np.abs(F)
    return np.divide(F, mod, out=np.zeros_like(F), where=mod > 0)


def single_mode(grid: GridSpec | int, k1: int, k2: int, kind: str = "cos") -> np.ndarray:
    if not isinstance(grid, GridSpec):
        grid = get_grid(grid)
    x1, x2 = grid.coords
    arg = k1 * x1 + k2 * x2
    f = np.cos(arg) if kind == "cos" else np.sin(arg)
    return transform_forward(f)


FAMILIES = ("random-bandlimited", "taylor-green", "buoyant-blob", "zero")


def initial_fields(family: str, grid: GridSpec | int, amplitude: float = 1.0, seed: int = 0):
    """Spectral (Omega, omega, theta) for a named initial-data family."""
    if not isinstance(grid, GridSpec):
        grid = get_grid(grid)
    zero = np.zeros((grid.n, grid.n), dtype=complex)
    x1, x2 = grid.coords
    if family == "random-bandlimited":
        rng = np.random.default_rng(seed)
        Omega = random_field(grid, rng, amplitude=amplitude)
        omega = random_field(grid, rng, amplitude=amplitude)
        theta = random_field(grid, rng, amplitude=amplitude)
    elif family == "taylor-green":
        Omega = transform_forward(amplitude * np.cos(x1) * np.cos(x2))
        omega = zero
        theta = transform_forward(0.5 * amplitude * np.sin(x1) * np.sin(x2))
    elif family == "buoyant-blob":
        # periodic bump of width ~0.5 centred at (pi, pi)
        bump = np.exp((np.cos(x1 - np.pi) + np.cos(x2 - np.pi) - 2.0) / 0.25)
        Omega, omega = zero, zero
        theta = transform_forward(amplitude * bump)
    elif family == "zero":
        Omega = omega = theta = zero
    else:
        raise ValueError(f"unknown initial-data family {family!r}; choose from {FAMILIES}")
    fix = lambda F: dealias(hermitian_project(F, grid), grid)  # noqa: E731
    Omega = fix(Omega)
    Omega[0, 0] = 0.0
    return Omega, fix(omega), fix(theta)
