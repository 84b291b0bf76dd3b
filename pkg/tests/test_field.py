import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from micropolar import field as fd
from micropolar.synth import random_field

from conftest import brute_dft, brute_idft, smooth, trig_interpolant


def coords(n):
    return fd.get_grid(n).coords


# -- grid -------------------------------------------------------------------

@pytest.mark.parametrize("n", [4, 12, 0, 100])
def test_grid_rejects_bad_sizes(n):
    with pytest.raises(ValueError):
        fd.GridSpec(n)


def test_grid_rejects_bad_dealias_fraction():
    with pytest.raises(ValueError):
        fd.GridSpec(16, dealias_fraction=0.0)
    with pytest.raises(ValueError):
        fd.GridSpec(16, dealias_fraction=1.5)


def test_grid_wavenumbers_cover_lattice():
    g = fd.get_grid(16)
    assert g.k1.min() == -8 and g.k1.max() == 7
    assert set(np.unique(g.k2)) == set(range(-8, 8))
    assert g.length == 2 * np.pi
    assert g.kcut == pytest.approx(16 / 3)


def test_grid_arrays_are_read_only():
    g = fd.get_grid(16)
    with pytest.raises(ValueError):
        g.ksq[0, 0] = 1.0


# -- transforms ----------------------------------------------------------------

def test_forward_constant():
    F = fd.transform_forward(np.full((16, 16), 3.0))
    assert F[0, 0] == pytest.approx(3.0)
    F[0, 0] = 0
    assert np.max(np.abs(F)) < 1e-15


def test_forward_sine_mode():
    x1, _ = coords(16)
    F = fd.transform_forward(np.sin(x1))
    assert F[1, 0] == pytest.approx(-0.5j)
    assert F[-1, 0] == pytest.approx(0.5j)
    F[1, 0] = F[-1, 0] = 0
    assert np.max(np.abs(F)) < 1e-15


def test_forward_matches_brute_force_dft(rng):
    f = rng.standard_normal((8, 8))
    assert np.max(np.abs(fd.transform_forward(f) - brute_dft(f))) < 1e-12


def test_inverse_matches_brute_force_dft(rng):
    F = fd.hermitian_project(rng.standard_normal((8, 8)) + 1j * rng.standard_normal((8, 8)))
    direct = brute_idft(F)
    assert np.max(np.abs(direct.imag)) < 1e-12
    assert np.max(np.abs(fd.transform_inverse(F) - direct.real)) < 1e-12


def test_inverse_zero_and_cosine():
    assert np.all(fd.transform_inverse(np.zeros((8, 8), complex)) == 0)
    F = np.zeros((16, 16), complex)
    F[1, 0] = F[-1, 0] = 0.5
    x1, _ = coords(16)
    assert np.max(np.abs(fd.transform_inverse(F) - np.cos(x1))) < 1e-14


def test_inverse_rejects_non_hermitian():
    F = np.zeros((8, 8), complex)
    F[1, 0] = 1.0
    with pytest.raises(ValueError):
        fd.transform_inverse(F)
    # explicitly unchecked conversion keeps the real part
    fd.transform_inverse(F, check=False)


def test_forward_rejects_non_finite():
    f = np.zeros((8, 8))
    f[0, 0] = np.nan
    with pytest.raises(ValueError):
        fd.transform_forward(f)


def test_forward_rejects_non_square():
    with pytest.raises(ValueError):
        fd.transform_forward(np.zeros((8, 16)))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1), st.sampled_from([8, 16, 32]))
def test_round_trip(seed, n):
    f = np.random.default_rng(seed).standard_normal((n, n))
    back = fd.transform_inverse(fd.transform_forward(f))
    assert np.max(np.abs(back - f)) <= 1e-12 * np.max(np.abs(f))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_parseval(seed):
    f = np.random.default_rng(seed).standard_normal((16, 16))
    F = fd.transform_forward(f)
    lhs = fd.lp_norm(f, 2) ** 2
    rhs = (2 * np.pi) ** 2 * np.sum(np.abs(F) ** 2)
    assert lhs == pytest.approx(rhs, rel=1e-12)
    assert fd.l2_norm_spectral(F) == pytest.approx(fd.lp_norm(f, 2), rel=1e-12)


def test_hermitian_projection_is_idempotent(rng):
    F = rng.standard_normal((16, 16)) + 1j * rng.standard_normal((16, 16))
    H = fd.hermitian_project(F)
    assert fd.is_hermitian(H)
    assert np.max(np.abs(fd.hermitian_project(H) - H)) < 1e-15
    assert abs(H[0, 0].imag) < 1e-15
    assert fd.hermitian_defect(np.zeros((8, 8))) == 0.0


def test_dealias_zeroes_top_third():
    F = np.ones((16, 16), complex)
    D = fd.dealias(F)
    g = fd.get_grid(16)
    assert np.all(D[np.abs(g.k1) > 16 / 3] == 0)
    assert np.all(D[(np.abs(g.k1) <= 5) & (np.abs(g.k2) <= 5)] == 1)


# -- multipliers -----------------------------------------------------------------

def test_lambda_single_modes():
    x1, x2 = coords(32)
    F = fd.transform_forward(np.sin(x1))
    assert np.max(np.abs(fd.multiplier_lambda(F, 1) - F)) < 1e-15
    G = fd.transform_forward(np.cos(2 * x2))
    out = fd.transform_inverse(fd.multiplier_lambda(G, 0.5))
    assert np.max(np.abs(out - math.sqrt(2) * np.cos(2 * x2))) < 1e-14


def test_lambda_mean_mode_convention():
    c = fd.transform_forward(np.full((16, 16), 2.0))
    assert np.all(fd.multiplier_lambda(c, 1) == 0)
    assert np.all(fd.multiplier_lambda(c, -1) == 0)
    assert fd.multiplier_lambda(c, 0)[0, 0] == 2.0


@settings(max_examples=25, deadline=None)
@given(st.floats(-2, 2), st.floats(-2, 2), st.integers(0, 10**6))
def test_lambda_composition(a, b, seed):
    F = random_field(32, np.random.default_rng(seed))
    lhs = fd.multiplier_lambda(fd.multiplier_lambda(F, a), b)
    rhs = fd.multiplier_lambda(F, a + b) if a + b != 0 else F
    scale = max(np.max(np.abs(rhs)), 1e-300)
    assert np.max(np.abs(lhs - rhs)) <= 1e-12 * scale


def test_riesz_examples():
    x1, x2 = coords(32)
    R = lambda f: fd.transform_inverse(fd.riesz1(fd.transform_forward(f)))  # noqa: E731
    assert np.max(np.abs(R(np.cos(x1)) + np.sin(x1))) < 1e-14
    assert np.max(np.abs(R(np.cos(x2)))) < 1e-14
    assert np.max(np.abs(R(np.sin(x1 + x2)) - np.cos(x1 + x2) / math.sqrt(2))) < 1e-14


def test_riesz_then_lambda_is_d1(rng):
    F = smooth(32, rng)
    lhs = fd.multiplier_lambda(fd.riesz1(F), 1)
    rhs = fd.partial_derivative(F, 1)
    assert np.max(np.abs(lhs - rhs)) < 1e-12 * np.max(np.abs(rhs))


def test_partial_derivative_examples():
    x1, _ = coords(16)
    F = fd.transform_forward(np.sin(x1))
    assert np.max(np.abs(fd.transform_inverse(fd.partial_derivative(F, 1)) - np.cos(x1))) < 1e-14
    c = fd.transform_forward(np.full((16, 16), 5.0))
    assert np.all(fd.partial_derivative(c, 1) == 0) and np.all(fd.partial_derivative(c, 2) == 0)
    with pytest.raises(ValueError):
        fd.partial_derivative(F, 3)


@pytest.mark.parametrize("axis", [1, 2])
def test_partial_derivative_matches_finite_difference(axis):
    # fourth-order centered difference of the trigonometric interpolant, h = 1e-3
    rng = np.random.default_rng(3)
    F = random_field(8, rng, kmax=2)
    h = 1e-3
    x1, x2 = coords(8)
    e1, e2 = (h, 0.0) if axis == 1 else (0.0, h)
    f = lambda s: trig_interpolant(F, x1 + s * e1, x2 + s * e2)  # noqa: E731
    fdiff = (-f(2) + 8 * f(1) - 8 * f(-1) + f(-2)) / (12 * h)
    spectral = fd.transform_inverse(fd.partial_derivative(F, axis))
    assert np.max(np.abs(spectral - fdiff)) < 1e-10


def test_nyquist_line_is_zeroed_by_odd_multipliers():
    F = np.zeros((8, 8), complex)
    F[4, 1] = F[4, -1] = 1.0
    assert np.all(fd.partial_derivative(F, 1)[4] == 0)
    assert np.all(fd.riesz1(F)[4] == 0)


def test_laplacian_gradient_divergence():
    x1, x2 = coords(16)
    F = fd.transform_forward(np.sin(2 * x1) * np.cos(x2))
    lap = fd.transform_inverse(fd.laplacian(F))
    assert np.max(np.abs(lap + 5 * np.sin(2 * x1) * np.cos(x2))) < 1e-13
    div_grad = fd.divergence(fd.gradient(F))
    assert np.max(np.abs(div_grad - fd.laplacian(F))) < 1e-13


# -- Biot-Savart -------------------------------------------------------------------

def test_biot_savart_examples():
    x1, x2 = coords(16)
    u = fd.biot_savart(fd.transform_forward(np.cos(x1)))
    u1, u2 = fd.velocity_physical(u)
    assert np.max(np.abs(u1)) < 1e-15 and np.max(np.abs(u2 - np.sin(x1))) < 1e-14
    u = fd.biot_savart(fd.transform_forward(np.cos(x2)))
    u1, u2 = fd.velocity_physical(u)
    assert np.max(np.abs(u1 + np.sin(x2))) < 1e-14 and np.max(np.abs(u2)) < 1e-15
    z = fd.biot_savart(np.zeros((16, 16), complex))
    assert np.all(z.u1 == 0) and np.all(z.u2 == 0)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6))
def test_biot_savart_invariants(seed):
    Om = random_field(32, np.random.default_rng(seed))
    u = fd.biot_savart(Om)
    assert fd.is_divergence_free(u)
    assert np.max(np.abs(fd.curl(u) - Om)) <= 1e-12 * np.max(np.abs(Om))
    assert u.u1[0, 0] == 0 and u.u2[0, 0] == 0


def test_biot_savart_drops_mean():
    Om = np.zeros((8, 8), complex)
    Om[0, 0] = 1.0
    u = fd.biot_savart(Om)
    assert np.all(u.u1 == 0) and np.all(u.u2 == 0)


# -- heat semigroup ----------------------------------------------------------------

def test_heat_semigroup_examples():
    x1, _ = coords(16)
    F = fd.transform_forward(np.sin(x1))
    assert np.array_equal(fd.heat_semigroup(F, 0.0), F)
    assert np.max(np.abs(fd.heat_semigroup(F, 1.0) - math.exp(-1) * F)) < 1e-16
    c = fd.transform_forward(np.full((16, 16), 4.0))
    assert np.array_equal(fd.heat_semigroup(c, 3.0), c)
    with pytest.raises(ValueError):
        fd.heat_semigroup(F, -0.1)


@settings(max_examples=25, deadline=None)
@given(st.floats(0, 1), st.floats(0, 1))
def test_heat_semigroup_property(t1, t2):
    F = random_field(16, np.random.default_rng(0), kmax=5)
    lhs = fd.heat_semigroup(fd.heat_semigroup(F, t1), t2)
    rhs = fd.heat_semigroup(F, t1 + t2)
    assert np.max(np.abs(lhs - rhs)) <= 1e-12 * np.max(np.abs(F))


# -- advection ---------------------------------------------------------------------

def test_advect_examples():
    n = 16
    x1, _ = coords(n)
    z = np.zeros((n, n), complex)
    F = fd.transform_forward(np.sin(x1))
    assert np.all(fd.advect(fd.VectorField(z, z), F) == 0)
    c = fd.transform_forward(np.full((n, n), 2.0))
    u = fd.biot_savart(random_field(n, np.random.default_rng(1), kmax=4))
    assert np.max(np.abs(fd.advect(u, c))) < 1e-15
    one = fd.transform_forward(np.ones((n, n)))
    out = fd.transform_inverse(fd.advect(fd.VectorField(one, z), F))
    assert np.max(np.abs(out - np.cos(x1))) < 1e-14


def test_advect_grid_mismatch():
    u = fd.VectorField(np.zeros((8, 8), complex), np.zeros((8, 8), complex))
    with pytest.raises(ValueError):
        fd.advect(u, np.zeros((16, 16), complex))


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10**6))
def test_advection_integrates_to_zero(seed):
    rng = np.random.default_rng(seed)
    u = fd.biot_savart(random_field(32, rng))
    F = random_field(32, rng)
    A = fd.advect(u, F)
    scale = fd.vector_lp_norm(fd.velocity_physical(u), 2) * fd.l2_norm_spectral(fd.partial_derivative(F, 1))
    assert abs(A[0, 0].real) * (2 * np.pi) ** 2 <= 1e-10 * max(scale, 1e-300)


def test_multiply_and_resample(rng):
    F, G = smooth(32, rng, kmax=4), smooth(32, rng, kmax=4)
    prod = fd.transform_inverse(F) * fd.transform_inverse(G)
    assert np.max(np.abs(fd.transform_inverse(fd.multiply(F, G)) - prod)) < 1e-13
    up = fd.resample(F, 64)
    back = fd.resample(up, 32)
    assert np.max(np.abs(back - F)) < 1e-16
    assert fd.l2_norm_spectral(up) == pytest.approx(fd.l2_norm_spectral(F), rel=1e-13)


# -- norms ---------------------------------------------------------------------------

def test_lp_norm_examples():
    n = 64
    x1, _ = coords(n)
    assert fd.lp_norm(np.full((n, n), -3.0), 2) == pytest.approx(3 * 2 * np.pi)
    assert abs(fd.lp_norm(np.sin(x1), math.inf) - 1) <= 1e-3
    assert fd.lp_norm(np.sin(x1), 2) == pytest.approx(math.sqrt(2) * np.pi, rel=1e-14)
    with pytest.raises(ValueError):
        fd.lp_norm(np.sin(x1), 0.5)
    with pytest.raises(TypeError):
        fd.lp_norm(np.zeros((8, 8), complex), 2)


def test_lp_norm_monotone_in_p_after_normalization(rng):
    f = fd.transform_inverse(smooth(32, rng))
    # on a probability space the normalized L^p norms increase with p
    vol = (2 * np.pi) ** 2
    vals = [fd.lp_norm(f, p) / vol ** (1 / p) for p in (1, 2, 4, 8)]
    assert all(a <= b * (1 + 1e-12) for a, b in zip(vals, vals[1:]))
    assert vals[-1] <= fd.lp_norm(f, math.inf)


def test_accurate_sum_beats_naive_cancellation():
    # row partials are combined exactly; 1D input is summed exactly
    a = np.array([[1e16], [1.0], [-1e16], [1.0]])
    assert fd.accurate_sum(a) == 2.0
    assert fd.accurate_sum(np.array([1e16, 1.0, -1e16, 1.0])) == 2.0
    assert fd.accurate_sum(np.array([0.1] * 10)) == 1.0


def test_sobolev_norm_matches_direct_sum(rng):
    F = smooth(16, rng, kmax=5)
    g = fd.get_grid(16)
    for s in (0.0, 1.0, 2.5, -1.0):
        direct = 0.0
        for a in range(16):
            for b in range(16):
                direct += (1 + g.k1[a, b] ** 2 + g.k2[a, b] ** 2) ** s * abs(F[a, b]) ** 2
        assert fd.sobolev_norm(F, s) == pytest.approx(2 * np.pi * math.sqrt(direct), rel=1e-13)
    assert fd.sobolev_norm(F, 0) == pytest.approx(fd.l2_norm_spectral(F), rel=1e-14)


def test_homogeneous_norm_and_inner(rng):
    x1, x2 = coords(32)
    F = fd.transform_forward(np.sin(3 * x1))
    assert fd.homogeneous_norm(F, 1) == pytest.approx(3 * math.sqrt(2) * np.pi, rel=1e-13)
    G, H = smooth(32, rng), smooth(32, rng)
    direct = np.sum(fd.transform_inverse(G) * fd.transform_inverse(H)) * (2 * np.pi / 32) ** 2
    assert fd.inner(G, H) == pytest.approx(direct, rel=1e-12)
