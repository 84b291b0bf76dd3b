"""A priori quantities along a trajectory, and checks of their growth patterns."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields

import numpy as np

from . import field as fd
from .field import lp_norm
from .lp import DyadicPartition, besov_norm
from .solver import DEFAULT, Params, State, energy_balance_residual, gamma, gamma_residual


@dataclass(frozen=True)
class DiagnosticsConfig:
    k: float = 0.6  # H^k regularity for theta; needs 1/2 < k <= (r-2)/r
    r: float = 8.0  # L^r exponent for Gamma and omega; needs 4 < r < inf
    hs: float = 3.0  # Sobolev index of the H^s triple
    residuals: bool = True

    def __post_init__(self):
        if not 4 < self.r < math.inf:
            raise ValueError(f"r must lie in (4, inf), got {self.r}")
        if not 0.5 < self.k <= (self.r - 2) / self.r:
            raise ValueError(f"k must lie in (1/2, (r-2)/r] = (0.5, {(self.r - 2) / self.r:g}], got {self.k}")


@dataclass(frozen=True)
class DiagnosticsRecord:
    t: float
    l2_u: float
    l2_omega: float
    l2_theta: float
    lp4_theta: float
    lp8_theta: float
    linf_theta: float
    hk_theta: float
    lr_gamma: float
    lr_omega: float
    linf_Omega: float
    grad_omega_inf: float
    h1dot_theta: float
    hs_u: float
    hs_omega: float
    hs_theta: float
    besov_theta_0_inf_inf: float
    besov_theta_half_inf_1: float
    tail_slope_theta: float
    tail_slope_Omega: float
    energy_residual: float
    gamma_residual: float
    # integrands of the accumulators at time t
    rate_grad_omega_sq: float
    rate_half_theta_sq: float
    rate_k_half_theta_sq: float
    rate_three_half_theta_sq: float
    linf_u: float
    # accumulated time integrals from 0 to t
    int_grad_omega_sq: float
    int_half_theta_sq: float
    int_k_half_theta_sq: float
    int_three_half_theta_sq: float
    int_linf_u: float
    int_linf_Omega: float

    @property
    def energy(self) -> float:
        return self.l2_u**2 + self.l2_omega**2 + self.l2_theta**2

    @property
    def energy_with_dissipation(self) -> float:
        return self.energy + self.int_grad_omega_sq + self.int_half_theta_sq

    def as_row(self) -> list[float]:
        return [getattr(self, f.name) for f in fields(self)]


COLUMNS = tuple(f.name for f in fields(DiagnosticsRecord))

_ACCUMULATED = (
    ("int_grad_omega_sq", "rate_grad_omega_sq"),
    ("int_half_theta_sq", "rate_half_theta_sq"),
    ("int_k_half_theta_sq", "rate_k_half_theta_sq"),
    ("int_three_half_theta_sq", "rate_three_half_theta_sq"),
    ("int_linf_u", "linf_u"),
    ("int_linf_Omega", "linf_Omega"),
)


def spectral_tail_slope(F: np.ndarray) -> float:
    """Least-squares slope of log shell energy vs log |k| over the top resolved octave.

    Shells below a roundoff floor relative to the total energy are ignored;
    returns -inf when fewer than two shells remain (nothing reaches the tail).
    """
    g = fd.grid_of(F)
    kc = math.floor(g.kcut)
    shells = np.rint(g.kabs).astype(int)
    power = np.abs(F) ** 2
    ks = np.arange(max(1, math.ceil(kc / 2)), kc + 1)
    energy = np.array([power[shells == k].sum() for k in ks])
    ok = energy > 1e-24 * power.sum()
    if ok.sum() < 2:
        return -math.inf
    return float(np.polyfit(np.log(ks[ok]), np.log(energy[ok]), 1)[0])


def _phys(F):
    return fd.transform_inverse(F, check=False)


def record(state: State, previous: DiagnosticsRecord | None = None, P: DyadicPartition | None = None,
           params: Params = DEFAULT, config: DiagnosticsConfig = DiagnosticsConfig()) -> DiagnosticsRecord:
    """Norms of the current state; accumulators advanced by the trapezoid rule from ``previous``."""
    g = state.grid
    P = P or DyadicPartition(g)
    u = state.velocity()
    u1, u2 = _phys(u.u1), _phys(u.u2)
    Om, om, th = (_phys(F) for F in (state.Omega, state.omega, state.theta))
    go = fd.gradient(state.omega)
    k = config.k
    values = dict(
        t=state.t,
        l2_u=fd.vector_lp_norm((u1, u2), 2),
        l2_omega=lp_norm(om, 2),
        l2_theta=lp_norm(th, 2),
        lp4_theta=lp_norm(th, 4),
        lp8_theta=lp_norm(th, 8),
        linf_theta=lp_norm(th, math.inf),
        hk_theta=fd.homogeneous_norm(state.theta, k),
        lr_gamma=lp_norm(_phys(gamma(state)), config.r),
        lr_omega=lp_norm(om, config.r),
        linf_Omega=lp_norm(Om, math.inf),
        grad_omega_inf=fd.vector_lp_norm((_phys(go.u1), _phys(go.u2)), math.inf),
        h1dot_theta=fd.homogeneous_norm(state.theta, 1.0),
        hs_u=math.hypot(fd.sobolev_norm(u.u1, config.hs), fd.sobolev_norm(u.u2, config.hs)),
        hs_omega=fd.sobolev_norm(state.omega, config.hs),
        hs_theta=fd.sobolev_norm(state.theta, config.hs),
        besov_theta_0_inf_inf=besov_norm(state.theta, 0.0, math.inf, math.inf, P),
        besov_theta_half_inf_1=besov_norm(state.theta, 0.5, math.inf, 1.0, P),
        tail_slope_theta=spectral_tail_slope(state.theta),
        tail_slope_Omega=spectral_tail_slope(state.Omega),
        energy_residual=energy_balance_residual(state, params) if config.residuals else math.nan,
        gamma_residual=(gamma_residual(state, params)
                        if config.residuals and params.is_standard_normalization else math.nan),
        rate_grad_omega_sq=fd.l2_norm_spectral(go.u1) ** 2 + fd.l2_norm_spectral(go.u2) ** 2,
        rate_half_theta_sq=fd.homogeneous_norm(state.theta, 0.5) ** 2,
        rate_k_half_theta_sq=fd.homogeneous_norm(state.theta, k + 0.5) ** 2,
        rate_three_half_theta_sq=fd.homogeneous_norm(state.theta, 1.5) ** 2,
        linf_u=fd.vector_lp_norm((u1, u2), math.inf),
    )
    for acc, rate in _ACCUMULATED:
        if previous is None:
            values[acc] = 0.0
        else:
            h = state.t - previous.t
            values[acc] = getattr(previous, acc) + 0.5 * h * (getattr(previous, rate) + values[rate])
    return DiagnosticsRecord(**values)


def replay(states, P=None, params: Params = DEFAULT, config: DiagnosticsConfig = DiagnosticsConfig()):
    """Records for a stored sequence of states, accumulated in order."""
    out = []
    prev = None
    for s in states:
        prev = record(s, prev, P, params, config)
        out.append(prev)
    return out


# --------------------------------------------------------------------------
# trajectory-level bounds


@dataclass
class BoundEntry:
    name: str
    constant: float | None
    margins: list
    violated: bool
    degenerate: bool = False

    def to_json(self) -> dict:
        d = asdict(self)
        d["margins"] = [float(m) for m in self.margins]
        return d


def theta_transport_bound(records, tol: float = 1e-6) -> BoundEntry:
    """Margin of ||theta(t)||_inf <= ||theta_0||_inf + int_0^t ||u||_inf."""
    records = list(records)
    base = records[0].linf_theta
    margins = [base + r.int_linf_u - r.linf_theta for r in records]
    scale = max([base] + [r.linf_theta for r in records] + [base + records[-1].int_linf_u])
    violated = scale > 0 and min(margins) < -tol * scale
    return BoundEntry("theta_transport", 1.0, margins, bool(violated))


QUANTITIES = {
    "energy_with_dissipation": lambda r: r.energy_with_dissipation,
    "energy": lambda r: r.energy,
    "linf_theta": lambda r: r.linf_theta,
    "linf_Omega": lambda r: r.linf_Omega,
    "lr_gamma": lambda r: r.lr_gamma,
    "hs_theta": lambda r: r.hs_theta,
}


def exponential_bound_fit(records, quantity="energy_with_dissipation") -> BoundEntry:
    """Smallest c >= 0 with Q(t) <= Q(0) exp(c t) over the series."""
    records = list(records)
    if len(records) < 16:
        raise ValueError(f"need at least 16 samples, got {len(records)}")
    if callable(quantity):
        select, name = quantity, getattr(quantity, "__name__", "custom")
    else:
        select, name = QUANTITIES[quantity], quantity
    t0 = records[0].t
    q = np.array([select(r) for r in records], dtype=float)
    t = np.array([r.t for r in records]) - t0
    if q[0] == 0:
        return BoundEntry(f"exp_fit:{name}", None, [], False, degenerate=True)
    later = t > 0
    rates = np.log(q[later] / q[0]) / t[later]
    c = max(0.0, float(np.max(rates))) if rates.size else 0.0
    margins = q[0] * np.exp(c * t) - q
    return BoundEntry(f"exp_fit:{name}", c, list(margins), False)


def stable_pair(a: float | None, b: float | None, factor: float = 2.0, floor: float = 1e-6) -> bool:
    """True when two fitted constants agree within ``factor`` (or are both below ``floor``)."""
    if a is None or b is None or not (math.isfinite(a) and math.isfinite(b)):
        return False
    hi, lo = max(a, b), min(a, b)
    if hi <= floor:
        return True
    return lo > 0 and hi < factor * lo


def blowup_indicator(records) -> dict:
    """BKM-style monitor: growth of int ||Omega||_inf and spectral tail exponents."""
    records = list(records)
    last = records[-1]
    if len(records) >= 2 and last.t > records[0].t:
        half = records[len(records) // 2]
        span = last.t - half.t
        growth = (last.int_linf_Omega - half.int_linf_Omega) / span if span > 0 else 0.0
    else:
        growth = 0.0
    exhausted = ((last.tail_slope_theta > -2 and last.linf_theta > 0)
                 or (last.tail_slope_Omega > -2 and last.linf_Omega > 0))
    return {
        "t": last.t,
        "int_linf_Omega": last.int_linf_Omega,
        "int_linf_Omega_growth": growth,
        "tail_slope_theta": last.tail_slope_theta,
        "tail_slope_Omega": last.tail_slope_Omega,
        "resolution_exhausted": bool(exhausted),
    }
