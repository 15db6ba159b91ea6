import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kgspde import FrequencyLattice, ModelParams, SpectralField
from kgspde.propagators import (
    LinearSolveSpec,
    cexpm1,
    heat_solve,
    linear_solve_mild,
    linear_solve_sinh,
    mild_coefficients,
    mild_flow,
    nrl_linear_error,
    real_damped_wave_solve,
    sinh_flow,
    sinhc,
    split_low_high,
    url_linear_error,
)
from kgspde.symbols import lambda_pm

from conftest import random_field_coeffs
from oracles import damped_wave_rhs, rk4


def zero_mode(lat, value=1.0):
    return SpectralField.from_modes(lat, {(0, 0): value})


def test_cexpm1_and_sinhc_small_arguments():
    small = np.array([1e-12 + 2e-12j, -3e-9j, 1e-5 - 4e-6j, -2e-4 + 1e-4j])
    series = small + small ** 2 / 2 + small ** 3 / 6 + small ** 4 / 24
    np.testing.assert_allclose(cexpm1(small), series, rtol=1e-14)
    big = np.array([0.3 - 0.2j, 2 + 5j, -7 + 0.1j])
    np.testing.assert_allclose(cexpm1(big), np.exp(big) - 1, rtol=1e-14)
    w = np.array([1e-3, 9.9e-3 + 1e-3j, 1.01e-2, 0.5j])
    np.testing.assert_allclose(sinhc(w), np.sinh(w) / w, rtol=1e-14)
    assert sinhc(0.0) == 1


def test_mild_coefficient_identities(rng):
    lat = FrequencyLattice(4)
    for eps, alpha in [(1.0, 1 + 1j), (0.1, 2 - 1j), (1 / 64, 1 + 3j)]:
        p = ModelParams(eps=eps, alpha=alpha, n_max=4)
        c = mild_coefficients(p, lat)
        phi0, phi1 = random_field_coeffs(lat, rng), random_field_coeffs(lat, rng)
        plus, minus = c.split(phi0, phi1)
        np.testing.assert_allclose(plus + minus, phi0, atol=1e-12)
        np.testing.assert_allclose(c.lam_plus * plus + c.lam_minus * minus, phi1 / eps,
                                   rtol=1e-10, atol=1e-10 * np.abs(phi1 / eps).max())
        floor = math.sqrt(2 * abs(alpha.real * alpha.imag))
        assert np.all(np.abs(c.mult) <= 1 / floor + 1e-15)
    with pytest.raises(ValueError):
        mild_coefficients(ModelParams(alpha=2.0), lat)


def test_mild_split_small_eps_limit():
    lat = FrequencyLattice(3)
    p = ModelParams(eps=1e-4, alpha=1 + 1j, n_max=3)
    phi0 = np.linspace(1, 2, lat.size) + 0.5j
    plus, minus = mild_coefficients(p, lat).split(phi0, np.zeros(lat.size))
    np.testing.assert_allclose(plus, phi0, atol=1e-6)
    assert np.abs(minus).max() < 1e-6


def test_mild_matches_rk4_single_mode():
    lat = FrequencyLattice(1)
    p = ModelParams(eps=1.0, alpha=1 + 1j, n_max=1)
    f = SpectralField.from_modes(lat, {(1, 0): 0.3 - 0.1j})
    phi0 = SpectralField.from_modes(lat, {(1, 0): 1.0 + 0.5j})
    phi1 = SpectralField.from_modes(lat, {(1, 0): -0.2j})
    traj = linear_solve_mild(LinearSolveSpec(p, phi0, phi1, f, 0.1, 10))
    i = lat.index_of((1, 0))
    ref = rk4(damped_wave_rhs(1.0, 1 + 1j, 2.0, 0.3 - 0.1j), [1.0 + 0.5j, -0.2j], 1.0, 1e-4)
    assert abs(traj.psi[-1, 0, i] - ref[0]) < 1e-8
    assert abs(traj.phi[-1, 0, i] - ref[1]) < 1e-8


def test_real_damping_closed_form():
    lat = FrequencyLattice(0)
    p = ModelParams(eps=1.0, alpha=2.0, n_max=0)
    traj = linear_solve_sinh(LinearSolveSpec(p, zero_mode(lat), SpectralField.zeros(lat), None, 0.01, 100))
    lp, lm = lambda_pm(p, (0, 0))
    t = 1.0
    exact = (-lm * np.exp(t * lp) + lp * np.exp(t * lm)) / (lp - lm)
    assert traj.psi[-1, 0, 0] == pytest.approx(exact.real, abs=1e-12)
    assert traj.psi[-1, 0, 0].real == pytest.approx(0.822263, abs=1e-6)


def test_critically_damped_mode():
    lat = FrequencyLattice(0)
    p = ModelParams(eps=1.0, alpha=1.0, n_max=0)
    traj = linear_solve_sinh(LinearSolveSpec(p, zero_mode(lat), SpectralField.zeros(lat), None, 0.125, 8))
    assert traj.psi[-1, 0, 0].real == pytest.approx(2 / math.e, abs=1e-12)
    np.testing.assert_allclose(traj.psi[:, 0, 0].real, np.exp(-traj.times) * (1 + traj.times), atol=1e-12)


def test_initial_velocity_response():
    lat = FrequencyLattice(1)
    alpha = 1 + 2j
    p = ModelParams(eps=1.0, alpha=alpha, n_max=1)
    phi1 = SpectralField.from_modes(lat, {(1, 0): 1.0})
    i = lat.index_of((1, 0))
    r = np.sqrt(alpha ** 2 - 2)
    for t in (0.3, 1.0):
        e, _ = sinh_flow(1.0, alpha, lat, t)
        assert e[i, 0, 1] == pytest.approx(np.exp(-alpha * t) * np.sinh(r * t) / r, abs=1e-13)
    h = 1e-6
    e, _ = mild_flow(p, lat, h)
    assert (e[i, 0, 1] * 1.0) / h == pytest.approx(1.0, abs=1e-5)


@settings(max_examples=30, deadline=None)
@given(j=st.integers(0, 8), a1=st.floats(0.2, 4), a2=st.floats(0.2, 4), sign=st.sampled_from([-1, 1]),
       t=st.floats(1e-3, 2), seed=st.integers(0, 2 ** 31))
def test_mild_and_sinh_agree(j, a1, a2, sign, t, seed):
    lat = FrequencyLattice(6)
    eps = 2.0 ** -j
    alpha = complex(a1, sign * a2)
    em, pm = mild_flow(ModelParams(eps=eps, alpha=alpha, n_max=6), lat, t)
    es, ps = sinh_flow(eps, alpha, lat, t)
    rng = np.random.default_rng(seed)
    x = random_field_coeffs(lat, rng)
    y = random_field_coeffs(lat, rng)
    f = random_field_coeffs(lat, rng)
    out_m = em[:, 0, 0] * x + em[:, 0, 1] * y + pm[:, 0] * f
    out_s = es[:, 0, 0] * x + es[:, 0, 1] * y + ps[:, 0] * f
    scale = max(1.0, np.abs(out_s).max())
    assert np.abs(out_m - out_s).max() < 1e-9 * scale
    assert np.abs(em - es).max() < 1e-9 * max(1.0, np.abs(es).max())


def test_collision_switches_to_sinh_form():
    lat = FrequencyLattice(0)
    alpha = 1 + 1e-14j
    p = ModelParams(eps=1.0, alpha=alpha, n_max=0)
    c = mild_coefficients(p, lat)
    assert c.collision.all()
    em, pm = mild_flow(p, lat, 1.0)
    es, ps = sinh_flow(1.0, alpha, lat, 1.0)
    np.testing.assert_array_equal(em, es)
    assert em[0, 0, 0].real == pytest.approx(2 / math.e, abs=1e-10)


def test_duhamel_residual_is_second_order():
    lat = FrequencyLattice(2)
    eps, alpha = 0.5, 1 + 1j
    p = ModelParams(eps=eps, alpha=alpha, n_max=2, horizon=2.0)
    rng = np.random.default_rng(4)
    phi0 = SpectralField(lat, random_field_coeffs(lat, rng))
    phi1 = SpectralField(lat, random_field_coeffs(lat, rng))
    f = SpectralField(lat, random_field_coeffs(lat, rng))
    res = []
    for dt in (0.01, 0.005):
        u = linear_solve_mild(LinearSolveSpec(p, phi0, phi1, f, dt, int(round(1.0 / dt)))).psi[:, 0]
        utt = (u[2:] - 2 * u[1:-1] + u[:-2]) / dt ** 2
        ut = (u[2:] - u[:-2]) / (2 * dt)
        r = eps ** 2 * utt + 2 * alpha * ut + lat.bracket2 * u[1:-1] - f.coeffs
        res.append(np.abs(r).max())
    assert 3.6 < res[0] / res[1] < 4.4


def test_piecewise_forcing_is_exact_per_step():
    lat = FrequencyLattice(1)
    p = ModelParams(eps=0.7, alpha=2 + 1j, n_max=1)
    rng = np.random.default_rng(6)
    phi0 = SpectralField(lat, random_field_coeffs(lat, rng))
    zero = SpectralField.zeros(lat)
    forcing = np.array([random_field_coeffs(lat, rng) for _ in range(4)])
    traj = linear_solve_mild(LinearSolveSpec(p, phi0, zero, forcing, 0.25, 4))
    i = lat.index_of((1, 0))
    y = np.array([phi0.coeffs[i], 0.0])
    for n in range(4):
        y = rk4(damped_wave_rhs(0.7, 2 + 1j, 2.0, forcing[n, i]), y, 0.25, 1e-4)
    assert abs(traj.psi[-1, 0, i] - y[0]) < 1e-8
    with pytest.raises(ValueError):
        LinearSolveSpec(p, phi0, zero, forcing[:3], 0.25, 4)
    with pytest.raises(ValueError):
        LinearSolveSpec(p, phi0, zero, None, 0.5, 4)


def test_split_low_high():
    lat = FrequencyLattice(6)
    rng = np.random.default_rng(2)
    f = SpectralField(lat, random_field_coeffs(lat, rng))
    low, high = split_low_high(f, 0.1)
    assert np.all(high.coeffs == 0)
    g = SpectralField(lat, np.where(lat.norm2 <= 1, f.coeffs, 0))
    assert np.all(split_low_high(g, 1.0)[1].coeffs == 0)
    low, high = split_low_high(f, 0.4)
    np.testing.assert_allclose((low + high).coeffs, f.coeffs, rtol=0, atol=1e-15)
    assert np.any(high.coeffs != 0)


def test_heat_solve_examples():
    lat = FrequencyLattice(2)
    traj = heat_solve(0.5, zero_mode(lat), None, 0.01, 100)
    assert traj.psi[-1, 0, lat.index_of((0, 0))].real == pytest.approx(math.exp(-1), abs=1e-14)
    f = SpectralField(lat, np.linspace(1, 2, lat.size) * (1 - 1j))
    long = heat_solve(1 + 1j, SpectralField.zeros(lat), f, 1.0, 200)
    np.testing.assert_allclose(long.psi[-1, 0], f.coeffs / lat.bracket2, atol=1e-12)
    with pytest.raises(ValueError):
        heat_solve(-1.0, zero_mode(lat))


def test_heat_semigroup():
    lat = FrequencyLattice(3)
    rng = np.random.default_rng(9)
    v0 = SpectralField(lat, random_field_coeffs(lat, rng))
    f = SpectralField(lat, random_field_coeffs(lat, rng))
    whole = heat_solve(2 + 1j, v0, f, 0.05, 10).psi[-1, 0]
    mid = heat_solve(2 + 1j, v0, f, 0.05, 4).psi[-1, 0]
    rest = heat_solve(2 + 1j, SpectralField(lat, mid), f, 0.05, 6).psi[-1, 0]
    np.testing.assert_allclose(rest, whole, atol=1e-12)


def test_real_damped_wave_is_sinh_solve():
    lat = FrequencyLattice(2)
    rng = np.random.default_rng(10)
    phi0 = SpectralField(lat, random_field_coeffs(lat, rng))
    phi1 = SpectralField(lat, random_field_coeffs(lat, rng))
    a = real_damped_wave_solve(1.5, phi0, phi1, None, 0.02, 50)
    i = lat.index_of((1, 1))
    ref = rk4(damped_wave_rhs(1.0, 1.5, 3.0), [phi0.coeffs[i], phi1.coeffs[i]], 1.0, 1e-4)
    assert abs(a.psi[-1, 0, i] - ref[0]) < 1e-9
    with pytest.raises(ValueError):
        real_damped_wave_solve(0.0, phi0, phi1)


def test_nrl_error_single_mode_scalar_oracle():
    lat = FrequencyLattice(1)
    alpha, eps = 1 + 1j, 0.25
    p = ModelParams(eps=eps, alpha=alpha, n_max=1)
    phi0 = zero_mode(lat)
    spec = LinearSolveSpec(p, phi0, SpectralField.zeros(lat), None, 0.01, 100)
    le = nrl_linear_error(p, spec, 0.0, samples=400)
    lp, lm = lambda_pm(p, (0, 0))
    t = np.linspace(0, 1, 20001)
    u = (-lm * np.exp(t * lp) + lp * np.exp(t * lm)) / (lp - lm)
    v = np.exp(-t / (2 * alpha))
    oracle = np.abs(u - v).max()
    assert le.error == pytest.approx(oracle, rel=1e-3)
    assert le.data_norm == pytest.approx(1.0)


def test_url_error_vanishes_for_identical_equations():
    lat = FrequencyLattice(3)
    rng = np.random.default_rng(12)
    phi0 = SpectralField(lat, random_field_coeffs(lat, rng))
    p = ModelParams(eps=1.0, alpha=1.0, n_max=3)
    spec = LinearSolveSpec(p, phi0, phi0, None, 0.01, 100)
    assert url_linear_error(1.0, 0.0, spec, 0.5).error == 0.0
    assert url_linear_error(1.0, 0.1, spec, 0.5).error > 0
