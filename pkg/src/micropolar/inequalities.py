"""Numerical checks of the harmonic-analysis inequalities behind the a priori estimates.

Each ``*_check`` computes the left side and the right side stripped of its
unspecified constant, and reports their ratio.  A 0/0 case is flagged as
degenerate rather than counted as a failure.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import field as fd
from .field import VectorField, grid_of, lp_norm, transform_inverse
from .lp import DyadicPartition, besov_norm, block, vector_besov_norm


@dataclass
class InequalityReport:
    name: str
    lhs: float
    rhs_without_constant: float
    extra: dict = field(default_factory=dict)

    @property
    def degenerate(self) -> bool:
        return self.rhs_without_constant == 0 and self.lhs == 0

    @property
    def ratio(self) -> float | None:
        if self.degenerate:
            return None
        if self.rhs_without_constant == 0:
            return math.inf
        return self.lhs / self.rhs_without_constant


@dataclass
class EnsembleStats:
    name: str
    count: int
    degenerate: int
    min: float
    median: float
    max: float

    @property
    def spread(self) -> float:
        return self.max / self.min if self.min > 0 else math.inf


def summarize(reports, name: str | None = None) -> EnsembleStats:
    reports = list(reports)
    ratios = np.array([r.ratio for r in reports if not r.degenerate], dtype=float)
    label = name or (reports[0].name if reports else "empty")
    if ratios.size == 0:
        return EnsembleStats(label, len(reports), len(reports), math.nan, math.nan, math.nan)
    return EnsembleStats(label, len(reports), len(reports) - ratios.size,
                         float(ratios.min()), float(np.median(ratios)), float(ratios.max()))


def _phys(F):
    return transform_inverse(F, check=False)


def _grad_norm(F, p):
    g = fd.gradient(F)
    return fd.vector_lp_norm((_phys(g.u1), _phys(g.u2)), p)


def _velocity_gradient_norm(u: VectorField, p):
    comps = [_phys(fd.partial_derivative(c, a)) for c in (u.u1, u.u2) for a in (1, 2)]
    return fd.vector_lp_norm(comps, p)


# --------------------------------------------------------------------------
# Bernstein


def bernstein_check(F: np.ndarray, j: int, alpha: float, p: float, q: float,
                    P: DyadicPartition | None = None, tol: float = 1e-12) -> InequalityReport:
    """Upper and lower Bernstein ratios for a field supported in annulus j."""
    P = P or DyadicPartition(grid_of(F))
    if not (2 <= p <= q):
        raise ValueError(f"need 2 <= p <= q, got p={p}, q={q}")
    outside = P.profile(j) == 0
    scale = np.max(np.abs(F))
    if scale > 0 and np.max(np.abs(np.where(outside, F, 0.0))) > tol * scale:
        raise ValueError(f"field is not supported in the level-{j} annulus")
    f = _phys(F)
    lam = _phys(fd.multiplier_lambda(F, 2 * alpha))
    lhs = lp_norm(lam, q)
    inv = (1.0 / p) - (0.0 if q == math.inf else 1.0 / q)
    rhs = 2.0 ** (2 * alpha * j + 2 * j * inv) * lp_norm(f, p)
    low_den = 2.0 ** (2 * alpha * j) * lp_norm(f, q)
    lower = lhs / low_den if low_den > 0 else None
    return InequalityReport("bernstein", lhs, rhs, {"lower_ratio": lower, "j": j, "alpha": alpha, "p": p, "q": q})


# --------------------------------------------------------------------------
# [Lambda^s, f] g


def lambda_commutator(F: np.ndarray, G: np.ndarray, s: float) -> np.ndarray:
    """Dealiased Lambda^s(fg) - f Lambda^s g."""
    if not 0 < s <= 2:
        raise ValueError(f"s must lie in (0, 2], got {s}")
    return fd.multiplier_lambda(fd.multiply(F, G), s) - fd.multiply(F, fd.multiplier_lambda(G, s))


def _recip(e):
    return 0.0 if e == math.inf else 1.0 / e


def lambda_commutator_check(F, G, s, r, p1, q1, p2, q2) -> InequalityReport:
    if not (math.isclose(_recip(r), _recip(p1) + _recip(q1), abs_tol=1e-12)
            and math.isclose(_recip(r), _recip(p2) + _recip(q2), abs_tol=1e-12)):
        raise ValueError(f"exponents violate 1/r = 1/p1 + 1/q1 = 1/p2 + 1/q2: {(r, p1, q1, p2, q2)}")
    lhs = lp_norm(_phys(lambda_commutator(F, G, s)), r)
    rhs = (_grad_norm(F, p1) * lp_norm(_phys(fd.multiplier_lambda(G, s - 1)), q1)
           + lp_norm(_phys(fd.multiplier_lambda(F, s)), p2) * lp_norm(_phys(G), q2))
    return InequalityReport("lambda_commutator", lhs, rhs, {"s": s, "exponents": (r, p1, q1, p2, q2)})


# --------------------------------------------------------------------------
# [R1, u.grad] theta


def riesz_commutator(u: VectorField, theta: np.ndarray, check: bool = True) -> np.ndarray:
    """Dealiased R1(u.grad theta) - u.grad R1 theta."""
    if check and not fd.is_divergence_free(u, tol=1e-10):
        raise ValueError("velocity is not divergence-free")
    return fd.riesz1(fd.advect(u, theta)) - fd.advect(u, fd.riesz1(theta))


def riesz_commutator_check(u: VectorField, theta: np.ndarray, p: float,
                           P: DyadicPartition | None = None, eps: float = 0.5, r: float = 1.0):
    """Reports for both parts of the Riesz-commutator estimate: (L^p form, B^0_{inf,r} form)."""
    if not 1 < p < math.inf:
        raise ValueError(f"p must lie in (1, inf), got {p}")
    P = P or DyadicPartition(grid_of(theta))
    C = riesz_commutator(u, theta)
    th = _phys(theta)
    lhs1 = lp_norm(_phys(C), p)
    rhs1 = _velocity_gradient_norm(u, p) * lp_norm(th, math.inf)
    Omega = _phys(fd.curl(u))
    lhs2 = besov_norm(C, 0.0, math.inf, r, P)
    rhs2 = ((lp_norm(Omega, math.inf) + lp_norm(Omega, p))
            * (besov_norm(theta, eps, math.inf, r, P) + lp_norm(th, p)))
    return (InequalityReport("riesz_commutator_lp", lhs1, rhs1, {"p": p}),
            InequalityReport("riesz_commutator_besov", lhs2, rhs2, {"p": p, "eps": eps, "r": r}))


# --------------------------------------------------------------------------
# [Delta_q, u.grad] theta


def block_commutator(u: VectorField, theta: np.ndarray, q_block: int, P: DyadicPartition | None = None) -> np.ndarray:
    P = P or DyadicPartition(grid_of(theta))
    return block(fd.advect(u, theta), q_block, P) - fd.advect(u, block(theta, q_block, P))


def block_commutator_check(u: VectorField, theta: np.ndarray, q_block: int, p: float,
                           P: DyadicPartition | None = None) -> InequalityReport:
    P = P or DyadicPartition(grid_of(theta))
    if not -1 <= q_block <= P.j_max:
        raise ValueError(f"block index {q_block} outside [-1, {P.j_max}]")
    if not fd.is_divergence_free(u, tol=1e-10):
        raise ValueError("velocity is not divergence-free")
    lhs = lp_norm(_phys(block_commutator(u, theta, q_block, P)), p)
    rhs = _velocity_gradient_norm(u, p) * besov_norm(theta, 0.0, math.inf, math.inf, P)
    return InequalityReport("block_commutator", lhs, rhs, {"q": q_block, "p": p})


# --------------------------------------------------------------------------
# positivity


def positivity_terms(f: np.ndarray, s: float, p: int, *, signed: bool = True,
                     oversample: int = 2) -> tuple[float, float]:
    """Both sides of the positivity inequality; see :func:`positivity_gap`."""
    if not 0 <= s <= 2:
        raise ValueError(f"s must lie in [0, 2], got {s}")
    if p not in (2, 4, 6, 8):
        raise ValueError(f"p must be one of 2, 4, 6, 8, got {p}")
    F = fd.transform_forward(np.asarray(f, dtype=float))
    m = F.shape[0] * oversample
    Fm = fd.resample(F, m)
    fm = transform_inverse(Fm, check=False)
    lam = transform_inverse(fd.multiplier_lambda(Fm, s), check=False)
    area = (fd.TWO_PI / m) ** 2
    first = fd.accurate_sum(np.abs(fm) ** (p - 2) * fm * lam) * area
    if signed:
        g = fm if p == 2 else np.sign(fm) * np.abs(fm) ** (p / 2)
    else:
        g = np.abs(fm) ** (p / 2)
    G = fd.dealias(fd.transform_forward(g))
    second = (2.0 / p) * fd.homogeneous_norm(G, s / 2) ** 2
    return first, second


def positivity_gap(f: np.ndarray, s: float, p: int, *, signed: bool = True, oversample: int = 2) -> float:
    """int |f|^{p-2} f Lambda^s f - (2/p) ||Lambda^{s/2} g||^2 with g = |f|^{p/2}.

    With ``signed`` (default) g = |f|^{p/2 - 1} f, which coincides with f at
    p = 2 and makes that case an identity.  Pointwise powers are taken on a
    grid ``oversample`` times finer and dealiased there.
    """
    first, second = positivity_terms(f, s, p, signed=signed, oversample=oversample)
    return first - second


# --------------------------------------------------------------------------
# logarithmic Sobolev


def log_sobolev_check(F: np.ndarray, s: float, P: DyadicPartition | None = None) -> InequalityReport:
    if not s > 2:
        raise ValueError(f"s must exceed 2, got {s}")
    P = P or DyadicPartition(grid_of(F))
    g = fd.gradient(F)
    comps = (_phys(g.u1), _phys(g.u2))
    lhs = fd.vector_lp_norm(comps, math.inf)
    l2 = fd.vector_lp_norm(comps, 2)
    b = vector_besov_norm((g.u1, g.u2), 0.0, math.inf, math.inf, P)
    rhs = l2 + b * math.log(math.e + fd.homogeneous_norm(F, s))
    return InequalityReport("log_sobolev", lhs, rhs, {"s": s, "grad_l2": l2, "grad_besov": b})


# --------------------------------------------------------------------------
# heat decay


@dataclass
class HeatDecayReport:
    slope: float | None
    bound: float
    times: np.ndarray
    values: np.ndarray
    exact_mode_error: float | None = None


def _derivative_norm(F, s, q):
    if s == 1:
        return _grad_norm(F, q)
    return lp_norm(_phys(fd.multiplier_lambda(F, s)), q)


def heat_decay_check(F: np.ndarray, s: float, p: float, q: float,
                     t_window: tuple[float, float] | None = None, samples: int = 24) -> HeatDecayReport:
    """Log-log slope of ||grad^s e^{t Lap} f||_{L^q} over a diffusive time window.

    ``grad^s`` is the gradient magnitude for s = 1 and Lambda^s otherwise.
    For data on a single wavenumber shell the decay is exactly exponential;
    the report then carries the exact-mode error instead of a slope.
    """
    if not (1 <= p <= q) or s <= 0:
        raise ValueError(f"need s > 0 and 1 <= p <= q, got s={s}, p={p}, q={q}")
    g = grid_of(F)
    if t_window is None:
        t_window = (4.0 / g.n**2, 0.25)
    t0, t1 = t_window
    if not 0 < t0 < t1:
        raise ValueError(f"degenerate time window {t_window}")
    F = F.copy()
    F[0, 0] = 0.0
    times = np.geomspace(t0, t1, samples)
    values = np.array([_derivative_norm(fd.heat_semigroup(F, t), s, q) for t in times])
    bound = -s / 2 - (_recip(p) - _recip(q))
    shells = np.unique(np.round(g.ksq[np.abs(F) > 1e-14 * max(np.max(np.abs(F)), 1e-300)], 9))
    if shells.size == 1:
        base = _derivative_norm(F, s, q)
        expected = np.exp(-shells[0] * times) * base
        err = float(np.max(np.abs(values - expected)) / base) if base > 0 else 0.0
        return HeatDecayReport(None, bound, times, values, err)
    if np.any(values <= 0):
        raise ValueError("derivative norm vanished inside the window")
    slope = float(np.polyfit(np.log(times), np.log(values), 1)[0])
    return HeatDecayReport(slope, bound, times, values)
