import math

import numpy as np
import pytest
import scipy.linalg

from kgspde import FrequencyLattice, ModelParams, NoiseStream, PairState, SpectralField
from kgspde.gaussian import (
    GaussianModes,
    TransitionError,
    cgl_lyapunov_residual,
    cgl_modes,
    cgl_ou_exact_step,
    kg_drift,
    lyapunov_residual,
    mode_ou,
    ou_exact_step,
    psd_factor,
    sample_complex_normal,
    sample_mu,
    sample_Z_trajectory,
    stationary_diagonal,
)
from kgspde.propagators import LinearSolveSpec, linear_solve_mild
from kgspde.rng import BLOCK

EPS_GRID = [2.0 ** -j for j in range(7)]
ALPHA_GRID = [1 + 1j, 2 + 1j, 1 + 3j]


def batch_means_se(x: np.ndarray, batches: int = 40) -> tuple:
    b = x[: len(x) // batches * batches].reshape(batches, -1).mean(axis=1)
    return float(b.mean()), float(b.std(ddof=1) / math.sqrt(batches))


def test_complex_normal_moments():
    rng = np.random.default_rng(0)
    z = sample_complex_normal(2.0, rng, 100_000)
    assert abs(np.mean(np.abs(z) ** 2) - 2) < 3 * 2 / math.sqrt(1e5)
    sq = z * z
    se = np.sqrt(np.mean(np.abs(sq) ** 2) / z.size)
    assert abs(sq.mean()) < 3 * se
    assert np.all(sample_complex_normal(0.0, rng, 5) == 0)
    assert sample_complex_normal(0.0, NoiseStream(1)) == 0
    assert isinstance(sample_complex_normal(1.0, NoiseStream(1)), complex)
    with pytest.raises(ValueError):
        sample_complex_normal(-1.0, rng)


def test_sample_mu_mode_laws():
    lat = FrequencyLattice(1)
    st = sample_mu(lat, NoiseStream(3), 100_000)
    z, y = st.psi.coeffs, st.phi.coeffs
    se = 2 / math.sqrt(1e5)
    assert abs(np.mean(np.abs(z[:, lat.index_of((0, 0))]) ** 2) - 2) < 3 * se
    assert abs(np.mean(np.abs(z[:, lat.index_of((1, 0))]) ** 2) - 1) < 3 * se / 2
    assert abs(np.mean(np.abs(y) ** 2) - 2) < 3 * se
    cross = z * np.conj(y)
    assert np.all(np.abs(cross.mean(axis=0)) < 3 * np.sqrt(np.mean(np.abs(cross) ** 2, axis=0) / 1e5))
    # distinct modes are uncorrelated
    c = z[:, 0] * np.conj(z[:, 1])
    assert abs(c.mean()) < 3 * math.sqrt(np.mean(np.abs(c) ** 2) / 1e5)
    single = sample_mu(lat, NoiseStream(3))
    assert single.psi.batch_shape == ()
    np.testing.assert_array_equal(single.psi.coeffs, z[0])


@pytest.mark.parametrize("alpha", ALPHA_GRID)
@pytest.mark.parametrize("eps", EPS_GRID)
def test_lyapunov_certificate(eps, alpha):
    lat = FrequencyLattice(8)
    p = ModelParams(eps=eps, alpha=alpha, n_max=8)
    assert lyapunov_residual(p, lat).max() < 1e-10
    assert cgl_lyapunov_residual(alpha, lat).max() < 1e-12


def test_kronecker_lyapunov_solution_is_diagonal_stationary_law():
    lat = FrequencyLattice(3)
    for eps, alpha in [(1.0, 1 + 1j), (0.25, 2 + 1j), (1.0, 2.0)]:
        s = mode_ou(ModelParams(eps=eps, alpha=alpha, n_max=3), lat).stationary_covariance()
        np.testing.assert_allclose(s, stationary_diagonal(lat), atol=1e-10)


def test_zero_step_is_identity():
    lat = FrequencyLattice(2)
    st = sample_mu(lat, NoiseStream(1), 3)
    modes = mode_ou(ModelParams(n_max=2), lat)
    out = ou_exact_step(st, 0.0, modes, NoiseStream(9))
    np.testing.assert_array_equal(out.psi.coeffs, st.psi.coeffs)
    np.testing.assert_array_equal(out.phi.coeffs, st.phi.coeffs)
    z = st.psi
    np.testing.assert_array_equal(cgl_ou_exact_step(z, 0.0, 1 + 1j, NoiseStream(9)).coeffs, z.coeffs)


@pytest.mark.parametrize("eps,alpha", [(1.0, 1 + 1j), (0.1, 2 + 1j), (1.0, 1.0), (0.5, 3.0)])
def test_chapman_kolmogorov(eps, alpha):
    lat = FrequencyLattice(4)
    modes = mode_ou(ModelParams(eps=eps, alpha=alpha, n_max=4), lat)
    t = 0.37
    full, half = modes.transition(t), modes.transition(t / 2)
    np.testing.assert_allclose(full.E, half.E @ half.E, atol=1e-10)
    eh = np.conj(np.swapaxes(half.E, -1, -2))
    np.testing.assert_allclose(full.Q, half.E @ half.Q @ eh + half.Q, atol=1e-10)
    np.testing.assert_allclose(full.L @ np.conj(np.swapaxes(full.L, -1, -2)), full.Q, atol=1e-10)


def test_closed_form_flow_matches_expm():
    lat = FrequencyLattice(3)
    p = ModelParams(eps=0.3, alpha=1 + 3j, n_max=3)
    modes = mode_ou(p, lat)
    generic = GaussianModes(lat, modes.A, modes.D)
    a, b = modes.transition(0.05), generic.transition(0.05)
    np.testing.assert_allclose(a.E, b.E, atol=1e-12)
    np.testing.assert_allclose(a.Q, b.Q, atol=1e-10)
    np.testing.assert_allclose(a.Phi, b.Phi, atol=1e-12)


def test_transition_covariance_matches_quadrature():
    # Q(t) = int_0^t e^{As} D e^{A*s} ds, by Gauss-Legendre quadrature
    lat = FrequencyLattice(1)
    modes = mode_ou(ModelParams(eps=0.5, alpha=1 + 1j, n_max=1), lat)
    t = 0.8
    nodes, weights = np.polynomial.legendre.leggauss(60)
    s = 0.5 * t * (nodes + 1)
    q = np.zeros_like(modes.A)
    for si, wi in zip(s, weights):
        e = np.array([scipy.linalg.expm(a * si) for a in modes.A])
        q += 0.5 * t * wi * e @ modes.D @ np.conj(np.swapaxes(e, -1, -2))
    np.testing.assert_allclose(modes.transition(t).Q, q, atol=1e-10)


def test_psd_factor_rejects_indefinite():
    with pytest.raises(TransitionError):
        psd_factor(np.array([[[1.0, 0.0], [0.0, -1.0]]]))
    q = np.array([[[2.0, 1.0], [1.0, 2.0]]])
    l = psd_factor(q)
    np.testing.assert_allclose(l @ np.swapaxes(l, -1, -2), q, atol=1e-14)


def test_long_run_stationary_moment():
    lat = FrequencyLattice(0)
    p = ModelParams(eps=1.0, alpha=1 + 1j, n_max=0)
    init = sample_mu(lat, NoiseStream(5), 1)
    traj = sample_Z_trajectory(p, lat, 0.01, 20_000, init, NoiseStream(5))
    z2 = np.abs(traj.psi[1:, 0, 0]) ** 2
    m, se = batch_means_se(z2)
    assert abs(m - 2) < 3 * se


def test_cgl_long_run_stationary_moment():
    lat = FrequencyLattice(1)
    alpha = 2 + 1j
    modes = cgl_modes(alpha, lat)
    tr = modes.transition(0.02)
    stream = NoiseStream(12)
    x = np.zeros((1, lat.size, 1), dtype=complex)
    rec = []
    for j in range(20_000):
        xi = stream.complex_normals(j, 1, lat.size).reshape(1, lat.size, 1)
        x = np.einsum("kij,bkj->bki", tr.E, x) + np.einsum("kij,bkj->bki", tr.L, xi)
        if j >= 500:
            rec.append(np.abs(x[0, :, 0]) ** 2)
    rec = np.array(rec)
    for i in (lat.index_of((0, 0)), lat.index_of((1, 0))):
        m, se = batch_means_se(rec[:, i])
        assert abs(m - 2 / lat.bracket2[i]) < 3 * se


def test_noise_free_path_matches_linear_solver():
    lat = FrequencyLattice(3)
    p = ModelParams(eps=0.5, alpha=1 + 1j, n_max=3, horizon=1.0)
    init = sample_mu(lat, NoiseStream(2))
    traj = sample_Z_trajectory(p, lat, 0.01, 100, init, NoiseStream(2), noise_scale=0.0)
    ref = linear_solve_mild(LinearSolveSpec(p, init.psi, init.phi, None, 0.01, 100))
    np.testing.assert_allclose(traj.psi, ref.psi, atol=1e-9)
    np.testing.assert_allclose(traj.phi, ref.phi, atol=1e-9)


def test_trajectories_are_reproducible_and_batch_invariant():
    lat = FrequencyLattice(2)
    p = ModelParams(n_max=2)
    init = sample_mu(lat, NoiseStream(4), 6)
    a = sample_Z_trajectory(p, lat, 0.05, 20, init, NoiseStream(4))
    b = sample_Z_trajectory(p, lat, 0.05, 20, init, NoiseStream(4))
    assert np.array_equal(a.psi, b.psi)
    tail = PairState(SpectralField(lat, init.psi.coeffs[3:]), SpectralField(lat, init.phi.coeffs[3:]))
    c = sample_Z_trajectory(p, lat, 0.05, 20, tail, NoiseStream(4, trajectory_id=3))
    assert np.array_equal(a.psi[:, 3:], c.psi)


def test_noise_rows_independent_of_batching():
    s = NoiseStream(99)
    full = s.complex_normals(5, 2 * BLOCK + 10, 7)
    part = s.for_trajectory(BLOCK - 3).complex_normals(5, 20, 7)
    assert np.array_equal(full[BLOCK - 3:BLOCK + 17], part)
    assert not np.array_equal(s.complex_normals(6, 4, 7), full[:4])
    assert not np.array_equal(s.complex_normals(5, 4, 7, tag=1), full[:4])
    assert s.complex_normals(0, 0, 3).shape == (0, 3)
    with pytest.raises(ValueError):
        NoiseStream(-1)


def test_transition_law_at_unit_time():
    lat = FrequencyLattice(1)
    p = ModelParams(eps=0.5, alpha=2 + 1j, n_max=1)
    count = 10_000
    x0 = SpectralField(lat, np.full((count, lat.size), 1.0 + 0.5j))
    init = PairState(x0, SpectralField(lat, np.zeros((count, lat.size))))
    traj = sample_Z_trajectory(p, lat, 0.1, 10, init, NoiseStream(21))
    tr = mode_ou(p, lat).transition(1.0)
    mean = tr.E[:, 0, 0] * (1.0 + 0.5j)
    z = traj.psi[-1]
    dev = np.abs(z - mean) ** 2
    se = dev.std(axis=0, ddof=1) / math.sqrt(count)
    assert np.all(np.abs(dev.mean(axis=0) - tr.Q[:, 0, 0].real) < 3 * se)
    assert np.all(np.abs(z.mean(axis=0) - mean) < 3 * np.sqrt(tr.Q[:, 0, 0].real / count))
