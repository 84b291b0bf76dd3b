from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from micropolar import field as fd
from micropolar import solver as sv
from micropolar.suite import heat_semigroup_match
from micropolar.synth import random_field

from conftest import smooth


def state_from(n, Omega=None, omega=None, theta=None, t=0.0):
    g = fd.get_grid(n)
    x1, x2 = g.coords
    z = np.zeros((n, n))
    pick = lambda f: z if f is None else f(x1, x2)  # noqa: E731
    return sv.State.from_physical(t, pick(Omega), pick(omega), pick(theta))


def random_state(n, rng, amplitude=1.0):
    return sv.clean(sv.State(0.0, *(random_field(n, rng, amplitude=amplitude) for _ in range(3))))


def phys(F):
    return fd.transform_inverse(F)


# -- parameters and configuration ------------------------------------------------------

@pytest.mark.parametrize("kw", [dict(chi=0), dict(nu=-1), dict(beta=2.5), dict(beta=-0.1), dict(alpha=3)])
def test_params_validation(kw):
    with pytest.raises(ValueError):
        sv.Params(**kw)


def test_stepper_validation():
    for kw in (dict(cfl=0), dict(cfl=1.5), dict(dt_max=0), dict(scheme="RK4")):
        with pytest.raises(ValueError):
            sv.StepperConfig(**kw)


# -- right-hand side on closed-form examples ---------------------------------------------
# a single wavevector is never advected (u is parallel to its level lines), so
# these tendencies are purely linear and can be written down by hand

def test_rhs_vorticity_mode():
    s = state_from(32, Omega=lambda x1, x2: np.cos(x1))
    dO, dw, dth = map(phys, sv.rhs(s))
    x1, _ = fd.get_grid(32).coords
    assert np.max(np.abs(dO)) < 1e-14
    assert np.max(np.abs(dw - np.cos(x1))) < 1e-14  # 2 chi Omega
    assert np.max(np.abs(dth - np.sin(x1))) < 1e-14  # u2 = sin x1


def test_rhs_microrotation_mode():
    s = state_from(32, omega=lambda x1, x2: np.cos(x1))
    dO, dw, dth = map(phys, sv.rhs(s))
    x1, _ = fd.get_grid(32).coords
    assert np.max(np.abs(dO - np.cos(x1))) < 1e-13  # -2 chi Lap omega
    assert np.max(np.abs(dw + 3 * np.cos(x1))) < 1e-13  # nu Lap omega - 4 chi omega
    assert np.max(np.abs(dth)) < 1e-14


@pytest.mark.parametrize("beta", [0.0, 0.5, 1.0, 2.0])
def test_rhs_temperature_mode(beta):
    s = state_from(32, theta=lambda x1, x2: np.sin(2 * x1))
    dO, dw, dth = map(phys, sv.rhs(s, sv.Params(beta=beta)))
    x1, _ = fd.get_grid(32).coords
    assert np.max(np.abs(dO - 2 * np.cos(2 * x1))) < 1e-13  # d1 theta
    assert np.max(np.abs(dth + 2.0**beta * np.sin(2 * x1))) < 1e-13
    assert np.max(np.abs(dw)) < 1e-14


def test_rhs_advection_of_two_modes():
    # Omega = cos x1 gives u = (0, sin x1); theta = cos x2 is advected by u2 d2
    s = state_from(32, Omega=lambda x1, x2: np.cos(x1), theta=lambda x1, x2: np.cos(x2))
    _, _, dth = map(phys, sv.rhs(s, sv.Params(beta=2.0)))
    x1, x2 = fd.get_grid(32).coords
    expected = np.sin(x1) * np.sin(x2) - np.cos(x2) + np.sin(x1)
    assert np.max(np.abs(dth - expected)) < 1e-13


def test_zero_is_fixed_point():
    s = sv.zero_state(32)
    assert all(not np.any(d) for d in sv.rhs(s))
    out = list(sv.integrate(s, sv.DEFAULT, 0.1, dt=0.01))
    assert all(not np.any(o.stack()) for o in out)


def test_vorticity_mean_stays_zero(rng):
    s = random_state(32, rng)
    dO, _, _ = sv.rhs(s)
    assert abs(dO[0, 0]) < 1e-15  # advection is mean-free up to roundoff
    assert sv.step(s, sv.DEFAULT, 1e-3).Omega[0, 0] == 0


# -- time stepping --------------------------------------------------------------------

def test_decoupled_microrotation_decay():
    n = 32
    s = state_from(n, omega=lambda x1, x2: np.cos(x1) * np.cos(3 * x2))
    params = sv.Params(coupling=False)
    *_, last = sv.integrate(s, params, 0.1, dt=1e-3)
    x1, x2 = fd.get_grid(n).coords
    exact = np.exp(-(10 + 2) * 0.1) * np.cos(x1) * np.cos(3 * x2)
    assert np.max(np.abs(phys(last.omega) - exact)) < 1e-6
    assert not np.any(last.Omega) and not np.any(last.theta)


def test_single_wavevector_matches_matrix_exponential():
    # independent oracle: the 3x3 linear system for the k = (2, 1) mode written by hand
    n, chi, nu, beta = 32, 0.5, 1.0, 1.0
    k1, k2 = 2, 1
    ksq = k1 * k1 + k2 * k2
    L = np.array([[0, 2 * chi * ksq, 1j * k1],
                  [2 * chi, -(nu * ksq + 4 * chi), 0],
                  [-1j * k1 / ksq, 0, -np.sqrt(ksq) ** beta]])
    y0 = np.array([0.3, -0.2 + 0.1j, 0.5j])
    F = lambda c: np.zeros((n, n), complex)  # noqa: E731
    fields = [F(0) for _ in range(3)]
    for a in range(3):
        fields[a][k1, k2] = y0[a]
        fields[a][-k1, -k2] = np.conj(y0[a])
    s = sv.State(0.0, *fields)
    *_, last = sv.integrate(s, sv.DEFAULT, 0.5, sv.StepperConfig(dt_max=0.05), dt=0.05)
    exact = expm(L * 0.5) @ y0
    got = np.array([last.Omega[k1, k2], last.omega[k1, k2], last.theta[k1, k2]])
    assert np.max(np.abs(got - exact)) < 1e-13


def test_step_second_order_in_time(rng):
    s = random_state(32, rng, amplitude=0.5)
    st = sv.StepperConfig(cfl=1.0, dt_max=0.1)

    def final(dt):
        *_, last = sv.integrate(s, sv.DEFAULT, 0.2, st, dt=dt)
        return last.stack()

    a, b, c = final(0.02), final(0.01), final(0.005)
    order = np.log2(np.linalg.norm(a - b) / np.linalg.norm(b - c))
    assert 1.8 < order < 2.2


def test_cfl_and_dt_max_enforced(rng):
    s = random_state(32, rng, amplitude=5.0)
    st = sv.StepperConfig(cfl=0.4, dt_max=1.0)
    limit = sv.cfl_limit(s, st)
    with pytest.raises(sv.CFLError):
        sv.step(s, sv.DEFAULT, 1.01 * limit, st)
    with pytest.raises(sv.CFLError):
        sv.step(s, sv.DEFAULT, 0.02, sv.StepperConfig(dt_max=0.01))
    with pytest.raises(ValueError):
        sv.step(s, sv.DEFAULT, 0.0, st)
    dt = sv.choose_dt(s, st)
    assert dt <= limit and dt > limit / 2
    assert np.log2(1.0 / dt) == int(np.log2(1.0 / dt))


def test_blowup_error_carries_last_state():
    s = sv.zero_state(16)
    bad = replace(s, theta=np.full((16, 16), np.nan + 0j))
    with pytest.raises(sv.BlowUpError) as info:
        sv.step(bad, sv.DEFAULT, 0.01)
    assert info.value.last_state is bad and info.value.t == 0.0


def test_integrate_lands_on_t_end(rng):
    s = random_state(32, rng, amplitude=0.5)
    times = [x.t for x in sv.integrate(s, sv.DEFAULT, 0.123)]
    assert times[-1] == 0.123 and np.all(np.diff(times) > 0)
    with pytest.raises(ValueError):
        list(sv.integrate(s, sv.DEFAULT, 0.105, dt=0.01))


def test_determinism(rng):
    s = random_state(32, rng, amplitude=0.5)
    *_, a = sv.integrate(s, sv.DEFAULT, 0.2)
    *_, b = sv.integrate(s, sv.DEFAULT, 0.2)
    assert np.array_equal(a.stack(), b.stack())


def test_propagator_cache():
    prop = sv.Propagator(fd.get_grid(16), sv.DEFAULT, maxsize=2)
    E = prop.matrix(0.01)
    assert prop.matrix(0.01) is E
    prop.matrix(0.02)
    prop.matrix(0.04)
    assert prop.matrix(0.01) is not E
    assert np.allclose(prop.matrix(0.01)[:, :, 0, 0][2, 2], 1.0)  # beta > 0 leaves the theta mean alone


def test_beta_zero_damps_the_mean():
    s = state_from(16, theta=lambda x1, x2: np.ones_like(x1))
    *_, last = sv.integrate(s, sv.Params(beta=0.0), 1.0, sv.StepperConfig(dt_max=0.1), dt=0.1)
    assert last.theta[0, 0].real == pytest.approx(np.exp(-1.0), rel=1e-13)


def test_beta_two_is_the_heat_semigroup():
    assert heat_semigroup_match() < 1e-12


@settings(max_examples=8, deadline=None)
@given(st.integers(0, 10**6), st.floats(0.1, 1.0))
def test_mean_invariants_along_trajectory(seed, amplitude):
    rng = np.random.default_rng(seed)
    s = random_state(32, rng, amplitude=amplitude)
    s = replace(s, omega=s.omega + 0.3, theta=s.theta - 0.2)
    prev = s
    for cur in sv.integrate(s, sv.DEFAULT, 0.3):
        assert cur.Omega[0, 0] == 0
        assert abs(cur.theta[0, 0] - prev.theta[0, 0]) < 1e-12
        assert abs(cur.omega[0, 0].real / (0.3 * np.exp(-2 * cur.t)) - 1) < 1e-8
        u = cur.velocity()
        assert np.max(np.abs(fd.divergence(u))) < 1e-12
        prev = cur


# -- structural identities ------------------------------------------------------------

def test_gamma_residual_random_states(rng):
    for _ in range(10):
        assert sv.gamma_residual(random_state(32, rng)) < 1e-12


def test_gamma_residual_special_states():
    assert sv.gamma_residual(sv.zero_state(16)) == 0.0
    # u = 0: only linear terms, and the combination cancels exactly
    s = state_from(32, omega=lambda x1, x2: np.sin(x2), theta=lambda x1, x2: np.cos(x1 + x2))
    assert sv.gamma_residual(s) < 1e-14
    with pytest.raises(ValueError):
        sv.gamma_residual(s, sv.Params(beta=1.5))


def test_gamma_of_single_modes():
    s = state_from(32, Omega=lambda x1, x2: np.cos(x1), theta=lambda x1, x2: np.sin(x1))
    G = phys(sv.gamma(s))
    x1, _ = fd.get_grid(32).coords
    # R1 sin x1 = d1 Lambda^{-1} sin x1 = cos x1
    assert np.max(np.abs(G - 2 * np.cos(x1))) < 1e-14


@pytest.mark.parametrize("params", [sv.DEFAULT, sv.Params(chi=0.3, nu=2.0, beta=1.5),
                                    sv.Params(beta=0.0), sv.Params(alpha=0.5), sv.Params(coupling=False)])
def test_energy_balance(params, rng):
    for _ in range(3):
        assert abs(sv.energy_balance_residual(random_state(32, rng), params)) < 1e-12


def test_energy_balance_zero_and_terms():
    assert sv.energy_balance_residual(sv.zero_state(16)) == 0.0
    s = state_from(32, theta=lambda x1, x2: np.sin(x1))
    terms = sv.energy_terms(s)
    area = (2 * np.pi) ** 2
    assert terms["diss_theta"] == pytest.approx(area / 2, rel=1e-13)
    assert terms["dt_theta"] == pytest.approx(-area / 2, rel=1e-13)


def test_mild_omega_linear_and_zero():
    s = state_from(32, omega=lambda x1, x2: np.cos(2 * x1) + np.sin(x2))
    # pure diffusion: the damping forcing -4 chi omega is negligible
    params = sv.Params(chi=1e-7, coupling=False)
    traj = [s, *sv.integrate(s, params, 0.5, sv.StepperConfig(dt_max=1 / 32), dt=1 / 32)]
    assert sv.mild_omega_check(traj, params) < 1e-6
    z = sv.zero_state(16)
    assert sv.mild_omega_check([z, *sv.integrate(z, sv.DEFAULT, 0.125, dt=1 / 128)]) == 0.0


def test_mild_omega_quadrature_is_second_order():
    s = state_from(32, omega=lambda x1, x2: np.cos(2 * x1) + np.sin(x2))
    params = sv.Params(coupling=False)
    errs = []
    for h in (1 / 32, 1 / 64, 1 / 128):
        traj = [s, *sv.integrate(s, params, 0.5, sv.StepperConfig(dt_max=h), dt=h)]
        errs.append(sv.mild_omega_check(traj, params))
    assert 3.5 < errs[0] / errs[1] < 4.5 and 3.5 < errs[1] / errs[2] < 4.5


def test_mild_omega_coupled(rng):
    s = random_state(64, rng, amplitude=0.5)
    traj = [s, *sv.integrate(s, sv.DEFAULT, 0.5, dt=1 / 128)]
    assert sv.mild_omega_check(traj) < 1e-4


def test_mild_omega_rejects_bad_sampling():
    z = sv.zero_state(16)
    with pytest.raises(ValueError, match="sparse"):
        sv.mild_omega_check([z, replace(z, t=0.1)])
    with pytest.raises(ValueError):
        sv.mild_omega_check([z])
    with pytest.raises(ValueError):
        sv.mild_omega_check([z, z])


def test_clean_projects(rng):
    F = smooth(16, rng) + 0j
    s = sv.clean(sv.State(0.0, F + 1.0, F, F))
    assert s.Omega[0, 0] == 0
    assert np.all(s.theta[~fd.get_grid(16).dealias_mask] == 0)
