"""Time integration of the 2D micropolar Rayleigh-Benard system in vorticity form.

Prognostic variables are the vorticity Omega, the micro-rotation omega and the
temperature theta:

    Omega_t + u.grad Omega = -2chi Lap omega + d1 theta          (- Lambda^{2a} Omega)
    omega_t + u.grad omega = nu Lap omega - 4chi omega + 2chi Omega
    theta_t + u.grad theta = -Lambda^beta theta + u2

with u = grad-perp Lap^{-1} Omega.  The scheme is IF-RK2: all linear terms,
including the Omega/omega/theta cross couplings, are folded into an exact
per-wavenumber 3x3 exponential propagator; advection is handled by a two-stage
explicit Runge-Kutta (Heun) step in the integrating-factor frame.
"""
from __future__ import annotations

import math
from collections import OrderedDict
from dataclasses import dataclass, replace

import numpy as np
from scipy.linalg import expm

from . import field as fd
from .field import GridSpec, grid_of

EPS_VELOCITY = 1e-8


class BlowUpError(RuntimeError):
    """A step produced non-finite values; carries the last finite state."""

    def __init__(self, t: float, last_state: "State"):
        super().__init__(f"non-finite values produced by the step starting at t={t:.6g}")
        self.t = t
        self.last_state = last_state


class CFLError(ValueError):
    pass


@dataclass(frozen=True)
class Params:
    chi: float = 0.5
    nu: float = 1.0
    beta: float = 1.0
    alpha: float = 0.0  # optional Lambda^{2 alpha} u velocity dissipation; 0 disables
    coupling: bool = True  # False drops every linear cross term (decoupled tests)

    def __post_init__(self):
        if not self.chi > 0:
            raise ValueError(f"chi must be > 0, got {self.chi}")
        if not self.nu > 0:
            raise ValueError(f"nu must be > 0, got {self.nu}")
        if not 0 <= self.beta <= 2:
            raise ValueError(f"beta must lie in [0, 2], got {self.beta}")
        if not 0 <= self.alpha <= 2:
            raise ValueError(f"alpha must lie in [0, 2], got {self.alpha}")

    @property
    def is_standard_normalization(self) -> bool:
        return (self.chi == 0.5 and self.nu == 1.0 and self.beta == 1.0
                and self.alpha == 0.0 and self.coupling)


DEFAULT = Params()


@dataclass(frozen=True)
class StepperConfig:
    cfl: float = 0.4
    dt_max: float = 0.01
    scheme: str = "IF-RK2"

    def __post_init__(self):
        if not 0 < self.cfl <= 1:
            raise ValueError(f"cfl must lie in (0, 1], got {self.cfl}")
        if not self.dt_max > 0:
            raise ValueError(f"dt_max must be > 0, got {self.dt_max}")
        if self.scheme != "IF-RK2":
            raise ValueError(f"unsupported scheme {self.scheme!r}")


@dataclass(frozen=True)
class State:
    t: float
    Omega: np.ndarray
    omega: np.ndarray
    theta: np.ndarray

    @property
    def grid(self) -> GridSpec:
        return grid_of(self.Omega)

    def velocity(self) -> fd.VectorField:
        return fd.biot_savart(self.Omega)

    def stack(self) -> np.ndarray:
        return np.stack([self.Omega, self.omega, self.theta])

    @classmethod
    def from_stack(cls, t: float, y: np.ndarray) -> "State":
        return cls(t, y[0], y[1], y[2])

    @classmethod
    def from_physical(cls, t, Omega, omega, theta) -> "State":
        return clean(cls(t, *(fd.transform_forward(f) for f in (Omega, omega, theta))))

    def physical(self):
        return tuple(fd.transform_inverse(F, check=False) for F in (self.Omega, self.omega, self.theta))


def zero_state(n: int) -> State:
    z = np.zeros((n, n), dtype=complex)
    return State(0.0, z, z.copy(), z.copy())


def clean(state: State) -> State:
    """Dealias, Hermitian-project, and pin the vorticity mean to zero."""
    g = state.grid
    y = state.stack()
    y = np.stack([fd.dealias(fd.hermitian_project(F, g), g) for F in y])
    y[0, 0, 0] = 0.0
    return State.from_stack(state.t, y)


# --------------------------------------------------------------------------
# linear part


def _linear_blocks(grid: GridSpec, params: Params):
    """Per-mode entries of the linear operator acting on (Omega, omega, theta)."""
    ksq, kabs = grid.ksq, grid.kabs
    k1 = np.where(grid.nyquist_free, grid.k1, 0.0)
    pos = ksq > 0
    L = np.zeros((3, 3) + ksq.shape, dtype=complex)
    if params.alpha > 0:
        L[0, 0] = -np.where(pos, kabs ** (2 * params.alpha), 0.0)
    L[1, 1] = -(params.nu * ksq + 4 * params.chi)
    L[2, 2] = -(np.where(pos, kabs**params.beta, 0.0) if params.beta > 0 else 1.0)
    if params.coupling:
        L[0, 1] = 2 * params.chi * ksq
        L[0, 2] = 1j * k1
        L[1, 0] = 2 * params.chi
        L[2, 0] = np.where(pos, -1j * k1 / np.where(pos, ksq, 1.0), 0.0)
    return L


def apply_linear(y: np.ndarray, grid: GridSpec, params: Params) -> np.ndarray:
    L = _linear_blocks(grid, params)
    return np.einsum("ab...,b...->a...", L, y)


class Propagator:
    """Cache of exp(L dt) per wavenumber for a fixed grid and parameter set."""

    def __init__(self, grid: GridSpec, params: Params, maxsize: int = 16):
        self.grid = grid
        self.params = params
        self._L = _linear_blocks(grid, params)
        self._mask = grid.dealias_mask
        self._cache: OrderedDict[float, np.ndarray] = OrderedDict()
        self._maxsize = maxsize

    def matrix(self, dt: float) -> np.ndarray:
        E = self._cache.get(dt)
        if E is not None:
            self._cache.move_to_end(dt)
            return E
        n = self.grid.n
        if self.params.coupling:
            E = np.zeros((3, 3, n, n), dtype=complex)
            idx = np.nonzero(self._mask)
            Lm = np.moveaxis(self._L[:, :, idx[0], idx[1]], -1, 0) * dt
            Em = expm(Lm)
            E[:, :, idx[0], idx[1]] = np.moveaxis(Em, 0, -1)
        else:
            E = np.zeros((3, 3, n, n), dtype=complex)
            for a in range(3):
                E[a, a] = np.exp(self._L[a, a] * dt)
        self._cache[dt] = E
        if len(self._cache) > self._maxsize:
            self._cache.popitem(last=False)
        return E

    def apply(self, dt: float, y: np.ndarray) -> np.ndarray:
        E = self.matrix(dt)
        if not self.params.coupling:
            return np.stack([E[a, a] * y[a] for a in range(3)])
        return np.einsum("ab...,b...->a...", E, y)


# --------------------------------------------------------------------------
# tendencies


def nonlinear(y: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Advective tendencies -(u.grad) of each prognostic field."""
    u = fd.biot_savart(y[0], grid)
    up = fd.velocity_physical(u, grid)
    return np.stack([-fd.advect_physical(up, F, grid) for F in y])


def rhs(state: State, params: Params = DEFAULT) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Full tendencies (dOmega, domega, dtheta), dealiased."""
    g = state.grid
    y = state.stack()
    d = nonlinear(y, g) + apply_linear(y, g, params)
    d = np.stack([fd.dealias(D, g) for D in d])
    return d[0], d[1], d[2]


def max_speed(state: State) -> float:
    u1, u2 = fd.velocity_physical(state.velocity())
    return float(np.sqrt(np.max(u1 * u1 + u2 * u2)))


def cfl_limit(state: State, stepper: StepperConfig) -> float:
    return stepper.cfl * state.grid.dx / max(max_speed(state), EPS_VELOCITY)


def step(state: State, params: Params, dt: float, stepper: StepperConfig = StepperConfig(),
         propagator: Propagator | None = None) -> State:
    """One IF-RK2 step.

    Raises ``CFLError`` if ``dt`` exceeds the Courant or ``dt_max`` limits and
    ``BlowUpError`` if the result is not finite.
    """
    if dt <= 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    if dt > stepper.dt_max * (1 + 1e-12):
        raise CFLError(f"dt={dt:.3g} exceeds dt_max={stepper.dt_max:.3g}")
    limit = cfl_limit(state, stepper)
    if dt > limit * (1 + 1e-12):
        raise CFLError(f"dt={dt:.3g} exceeds the CFL limit {limit:.3g} at t={state.t:.6g}")
    g = state.grid
    prop = propagator if propagator is not None else Propagator(g, params)
    y0 = state.stack()
    n0 = nonlinear(y0, g)
    stage = prop.apply(dt, y0 + dt * n0)
    n1 = nonlinear(stage, g)
    y1 = prop.apply(dt, y0 + 0.5 * dt * n0) + 0.5 * dt * n1
    new = clean(State.from_stack(state.t + dt, y1))
    if not np.all(np.isfinite(new.stack())):
        raise BlowUpError(state.t, state)
    return new


def choose_dt(state: State, stepper: StepperConfig) -> float:
    """Largest dt_max / 2^m within the CFL limit.

    The dyadic ladder keeps the number of distinct propagators small.
    """
    limit = cfl_limit(state, stepper)
    dt = stepper.dt_max
    while dt > limit:
        dt *= 0.5
        if dt < 1e-14:
            raise CFLError(f"CFL limit collapsed to {limit:.3g} at t={state.t:.6g}")
    return dt


def integrate(state: State, params: Params, t_end: float, stepper: StepperConfig = StepperConfig(),
              dt: float | None = None):
    """Yield successive states until ``t_end``.

    With ``dt`` given the step is fixed (``t_end`` must be a multiple of it);
    otherwise dt follows :func:`choose_dt` and the last step is shortened to
    land on ``t_end``.
    """
    prop = Propagator(state.grid, params)
    if dt is not None:
        nsteps = round((t_end - state.t) / dt)
        if nsteps < 0 or not math.isclose(state.t + nsteps * dt, t_end, rel_tol=1e-9, abs_tol=1e-12):
            raise ValueError(f"t_end={t_end} is not reachable in steps of {dt}")
        t0 = state.t
        for i in range(nsteps):
            state = step(state, params, dt, stepper, prop)
            state = replace(state, t=t0 + (i + 1) * dt)
            yield state
        return
    while state.t < t_end - 1e-12:
        h = min(choose_dt(state, stepper), t_end - state.t)
        state = step(state, params, h, stepper, prop)
        if t_end - state.t < 1e-12:
            state = replace(state, t=t_end)
        yield state


# --------------------------------------------------------------------------
# structural identities


def gamma(state: State) -> np.ndarray:
    """Combined quantity Omega + R1 theta + omega."""
    return state.Omega + fd.riesz1(state.theta) + state.omega


def _rel(a: np.ndarray, b: np.ndarray) -> float:
    num = fd.l2_norm_spectral(a - b)
    den = max(fd.l2_norm_spectral(a), 1e-300)
    return 0.0 if num == 0 else num / den


def gamma_tendency_direct(state: State) -> np.ndarray:
    """-u.grad Gamma - [R1, u.grad] theta + R1 u2 + Omega - 2 omega."""
    from .inequalities import riesz_commutator

    g = state.grid
    u = state.velocity()
    adv = fd.advect(u, gamma(state))
    comm = riesz_commutator(u, state.theta, check=False)
    out = -adv - comm + fd.riesz1(u.u2) + state.Omega - 2.0 * state.omega
    return fd.dealias(out, g)


def gamma_residual(state: State, params: Params = DEFAULT) -> float:
    """Relative L^2 mismatch between two evaluations of dGamma/dt."""
    if not params.is_standard_normalization:
        raise ValueError("the Gamma evolution identity needs chi=1/2, nu=1, beta=1, no velocity dissipation")
    dO, dw, dth = rhs(state, params)
    r1 = fd.riesz1(dth)
    assembled = dO + r1 + dw
    num = fd.l2_norm_spectral(assembled - gamma_tendency_direct(state))
    # the assembled tendency can cancel to zero; scale by its largest constituent too
    scale = max(fd.l2_norm_spectral(F) for F in (assembled, dO, r1, dw))
    return 0.0 if num == 0 else num / max(scale, 1e-300)


def energy_terms(state: State, params: Params = DEFAULT) -> dict[str, float]:
    """Constituents of the instantaneous L^2 energy balance."""
    u = state.velocity()
    dO, dw, dth = rhs(state, params)
    du = fd.biot_savart(dO)
    chi = params.chi
    curl_omega = fd.VectorField(fd.partial_derivative(state.omega, 2), -fd.partial_derivative(state.omega, 1))
    grad_omega = fd.gradient(state.omega)
    terms = {
        "dt_u": fd.inner(u.u1, du.u1) + fd.inner(u.u2, du.u2),
        "dt_omega": fd.inner(state.omega, dw),
        "dt_theta": fd.inner(state.theta, dth),
        "diss_omega_grad": params.nu * (fd.inner(grad_omega.u1, grad_omega.u1) + fd.inner(grad_omega.u2, grad_omega.u2)),
        "diss_omega": 4 * chi * fd.inner(state.omega, state.omega),
        "diss_theta": fd.homogeneous_norm(state.theta, params.beta / 2) ** 2 if params.beta > 0
        else fd.inner(state.theta, state.theta),
        "diss_u": fd.homogeneous_norm(u.u1, params.alpha) ** 2 + fd.homogeneous_norm(u.u2, params.alpha) ** 2
        if params.alpha > 0 else 0.0,
        "src_curl_omega_u": 2 * chi * (fd.inner(curl_omega.u1, u.u1) + fd.inner(curl_omega.u2, u.u2)),
        "src_theta_u2": fd.inner(state.theta, u.u2),
        "src_curl_u_omega": 2 * chi * fd.inner(state.Omega, state.omega),
        "src_u2_theta": fd.inner(u.u2, state.theta),
    }
    if not params.coupling:
        for key in ("src_curl_omega_u", "src_theta_u2", "src_curl_u_omega", "src_u2_theta"):
            terms[key] = 0.0
    return terms


def energy_balance_residual(state: State, params: Params = DEFAULT) -> float:
    """(LHS - RHS) / scale of the L^2 energy identity, time derivative from rhs()."""
    terms = energy_terms(state, params)
    lhs = math.fsum(v for k, v in terms.items() if k.startswith(("dt_", "diss_")))
    rhs_ = math.fsum(v for k, v in terms.items() if k.startswith("src_"))
    scale = max(abs(v) for v in terms.values())
    if scale == 0:
        return 0.0
    return (lhs - rhs_) / scale


def _mild_weights(a: np.ndarray, h: float):
    """Exact integrals of exp(-a rho) against the linear hat functions on [0, h]."""
    z = a * h
    small = z < 1e-3
    zs = np.where(small, 1.0, z)
    em = np.exp(-zs)
    w_new = np.where(small, h * (0.5 - z / 6 + z * z / 24), h * (zs - 1 + em) / zs**2)
    w_old = np.where(small, h * (0.5 - z / 3 + z * z / 8), h * (1 - em * (1 + zs)) / zs**2)
    return w_old, w_new


def mild_omega_forcing(state: State, params: Params) -> np.ndarray:
    u = state.velocity()
    forcing = -4 * params.chi * state.omega - fd.advect(u, state.omega)
    if params.coupling:
        forcing = forcing + 2 * params.chi * state.Omega
    return forcing


def mild_omega_check(trajectory, params: Params = DEFAULT, min_density: float = 32.0) -> float:
    """Max relative L^2 deviation between the stepper's omega and its Duhamel form.

    The integrand exp((t - tau) nu Lap) F(tau) is integrated exactly in the
    semigroup factor, with F linearly interpolated between snapshots
    (exponential trapezoidal rule).
    """
    states = list(trajectory)
    if len(states) < 2:
        raise ValueError("trajectory needs at least two snapshots")
    times = np.array([s.t for s in states])
    h = np.diff(times)
    if np.any(h <= 0):
        raise ValueError("snapshot times must increase")
    if np.max(h) > 1.0 / min_density * (1 + 1e-9):
        raise ValueError(f"trajectory too sparse: max gap {np.max(h):.3g} > 1/{min_density:g}")
    g = states[0].grid
    a = params.nu * g.ksq
    semigroup = states[0].omega.copy()
    integral = np.zeros_like(semigroup)
    f_prev = mild_omega_forcing(states[0], params)
    worst = 0.0
    for i, s in enumerate(states[1:]):
        decay = np.exp(-a * h[i])
        w_old, w_new = _mild_weights(a, h[i])
        f_next = mild_omega_forcing(s, params)
        integral = decay * integral + w_old * f_prev + w_new * f_next
        semigroup = decay * semigroup
        recon = fd.dealias(semigroup + integral, g)
        num = fd.l2_norm_spectral(recon - s.omega)
        if num > 0:
            worst = max(worst, num / max(fd.l2_norm_spectral(s.omega), 1e-300))
        f_prev = f_next
    return worst
