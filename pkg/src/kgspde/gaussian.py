"""Complex Gaussians, exact transitions of linear stochastic systems, and the law mu.

Noise convention.  The cylindrical Wiener process has Fourier components
``W_k = beta_{k,R} + i beta_{k,I}`` with independent standard real Brownian
motions, so ``E |dW_k|^2 = 2 dt`` and ``E dW_k^2 = 0``.  A mode driven by
``b dW_k`` therefore has diffusion matrix ``2 b b^*``.  For the Klein-Gordon
pair ``(Z, Y = eps Z_t)`` the noise enters only ``Y`` with ``b = 2 sqrt(Re alpha) / eps``,
giving ``B B^* = diag(0, 8 Re alpha / eps^2)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .lattice import FrequencyLattice, PairState, SpectralField
from .rng import TAG_DYNAMICS, TAG_INITIAL, NoiseStream
from .symbols import ModelParams
from .trajectory import Trajectory


class TransitionError(FloatingPointError):
    """Raised when a transition covariance is not positive semidefinite."""


def sample_complex_normal(r: float, rng, size=None):
    """Draws from ``N_c(0, r)``: ``X + iY`` with independent ``N(0, r/2)`` parts.

    ``rng`` is a numpy ``Generator`` or a ``NoiseStream`` (step 0, initial tag).
    ``r = 0`` returns exact zeros.
    """
    if r < 0:
        raise ValueError(f"variance must be nonnegative, got {r}")
    if isinstance(rng, NoiseStream):
        n = 1 if size is None else int(np.prod(size))
        z = rng.complex_normals(0, 1, n, tag=TAG_INITIAL)[0]
        z = z.reshape(() if size is None else size)
        out = np.sqrt(r) * z
    else:
        parts = rng.standard_normal((2,) if size is None else (2,) + tuple(np.atleast_1d(size)))
        out = np.sqrt(r / 2.0) * (parts[0] + 1j * parts[1])
    if r == 0:
        out = np.zeros_like(out)
    return complex(out) if np.ndim(out) == 0 else out


def _batched_kron_lyapunov(a: np.ndarray, d: np.ndarray) -> np.ndarray:
    """Solve ``A S + S A^* + D = 0`` for each leading index."""
    k, n, _ = a.shape
    eye = np.eye(n)
    op = np.einsum("kij,ab->kiajb", a, eye) + np.einsum("ij,kab->kiajb", eye, a.conj())
    op = op.reshape(k, n * n, n * n)
    s = np.linalg.solve(op, -d.reshape(k, n * n, 1))
    s = s.reshape(k, n, n)
    return 0.5 * (s + np.conj(np.swapaxes(s, -1, -2)))


def psd_factor(q: np.ndarray, what: str = "transition covariance") -> np.ndarray:
    """Hermitian square root ``L`` with ``L L^* = q`` after clipping roundoff negatives."""
    q = 0.5 * (q + np.conj(np.swapaxes(q, -1, -2)))
    w, v = np.linalg.eigh(q)
    scale = np.maximum(np.abs(w).max(axis=-1, keepdims=True), 1e-300)
    if np.any(w < -1e-9 * scale - 1e-14):
        raise TransitionError(f"{what} is not positive semidefinite (min eigenvalue {w.min():.3e})")
    w = np.clip(w, 0.0, None)
    return v * np.sqrt(w)[..., None, :]


@dataclass(frozen=True, eq=False)
class Transition:
    """Exact one-step map ``X -> E X + Phi g + L xi`` for a frozen forcing ``g``."""

    dt: float
    E: np.ndarray
    Phi: np.ndarray
    Q: np.ndarray
    L: np.ndarray


@dataclass(frozen=True, eq=False)
class GaussianModes:
    """Independent per-mode linear systems ``dX = A X dt + dN`` with ``Cov(dN) = D dt``.

    ``A`` and ``D`` have shape ``(K, d, d)``.  ``flow(dt)``, when given, returns
    ``exp(A dt)`` in closed form; otherwise a batched matrix exponential is used.
    """

    lattice: FrequencyLattice
    A: np.ndarray
    D: np.ndarray
    flow: object = None

    @property
    def dim(self) -> int:
        return self.A.shape[-1]

    def stationary_covariance(self) -> np.ndarray:
        return _batched_kron_lyapunov(self.A, self.D)

    def transition(self, dt: float, noise_scale: float = 1.0) -> Transition:
        if dt < 0:
            raise ValueError("dt must be nonnegative")
        k, d, _ = self.A.shape
        if dt == 0:
            e = np.broadcast_to(np.eye(d), (k, d, d)).astype(complex)
        elif self.flow is not None:
            e = np.asarray(self.flow(dt), dtype=complex)
        else:
            e = scipy.linalg.expm(self.A * dt)
        phi = np.linalg.solve(self.A, e - np.eye(d))
        if dt == 0 or noise_scale == 0 or not np.any(self.D):
            q = np.zeros_like(e)
        else:
            s = self.stationary_covariance() * noise_scale ** 2
            q = s - e @ s @ np.conj(np.swapaxes(e, -1, -2))
        return Transition(dt, e, phi, q, psd_factor(q))

    def scaled(self, noise_scale: float) -> "GaussianModes":
        return GaussianModes(self.lattice, self.A, self.D * noise_scale ** 2, self.flow)


def kg_drift(p: ModelParams, lattice: FrequencyLattice, alpha: complex | None = None, eps: float | None = None):
    """Drift matrices ``[[0, 1/eps], [-<k>^2/eps, -2 alpha/eps^2]]`` for ``(Z, eps Z_t)``."""
    eps = p.eps if eps is None else eps
    alpha = p.alpha if alpha is None else complex(alpha)
    k2 = lattice.bracket2
    a = np.zeros((lattice.size, 2, 2), dtype=complex)
    a[:, 0, 1] = 1.0 / eps
    a[:, 1, 0] = -k2 / eps
    a[:, 1, 1] = -2.0 * alpha / eps ** 2
    return a


def kg_noise_vector(alpha: complex, eps: float) -> np.ndarray:
    """Coefficient of ``dW_k`` in ``d(Z, eps Z_t)``."""
    return np.array([0.0, 2.0 * np.sqrt(complex(alpha).real) / eps], dtype=complex)


def cgl_noise_coefficient(alpha: complex) -> complex:
    """Coefficient of ``dW_k`` in ``dZ = -<k>^2/(2 alpha) Z dt + (sqrt(Re alpha)/alpha) dW``."""
    alpha = complex(alpha)
    return np.sqrt(alpha.real) / alpha


def mode_ou(p: ModelParams, lattice: FrequencyLattice) -> GaussianModes:
    """The Klein-Gordon pair ``(Z, Y)`` per mode, with the closed-form cosh / sinh flow."""
    from .propagators import sinh_flow

    b = kg_noise_vector(p.alpha, p.eps)
    d = 2.0 * np.outer(b, b.conj())
    eps, alpha = p.eps, p.alpha
    return GaussianModes(lattice, kg_drift(p, lattice), np.broadcast_to(d, (lattice.size, 2, 2)).copy(),
                         lambda dt: sinh_flow(eps, alpha, lattice, dt)[0])


def cgl_modes(alpha: complex, lattice: FrequencyLattice) -> GaussianModes:
    """Scalar complex OU per mode for the Ginzburg-Landau limit."""
    alpha = complex(alpha)
    a = (-lattice.bracket2 / (2.0 * alpha)).reshape(-1, 1, 1).astype(complex)
    c = cgl_noise_coefficient(alpha)
    d = np.full((lattice.size, 1, 1), 2.0 * abs(c) ** 2, dtype=complex)
    return GaussianModes(lattice, a, d, lambda dt: np.exp(a * dt))


def stationary_diagonal(lattice: FrequencyLattice) -> np.ndarray:
    """``Sigma = diag(2/<k>^2, 2)`` per mode."""
    s = np.zeros((lattice.size, 2, 2), dtype=complex)
    s[:, 0, 0] = 2.0 / lattice.bracket2
    s[:, 1, 1] = 2.0
    return s


def lyapunov_residual(p: ModelParams, lattice: FrequencyLattice) -> np.ndarray:
    """Entrywise ``|A Sigma + Sigma A^* + B B^*|`` per mode for ``Sigma = diag(2/<k>^2, 2)``."""
    a = kg_drift(p, lattice)
    s = stationary_diagonal(lattice)
    bb = np.zeros_like(a)
    bb[:, 1, 1] = 8.0 * p.alpha.real / p.eps ** 2
    return np.abs(a @ s + s @ np.conj(np.swapaxes(a, -1, -2)) + bb)


def cgl_lyapunov_residual(alpha: complex, lattice: FrequencyLattice) -> np.ndarray:
    """``|2 Re(rate) var - 2 |c|^2|`` per mode with ``var = 2/<k>^2``."""
    rate = lattice.bracket2 / (2.0 * complex(alpha))
    return np.abs(2.0 * rate.real * (2.0 / lattice.bracket2) - 2.0 * abs(cgl_noise_coefficient(alpha)) ** 2)


def sample_mu(lattice: FrequencyLattice, stream: NoiseStream, count: int | None = None, step: int = 0) -> PairState:
    """Independent ``zhat(k) ~ N_c(0, 2/<k>^2)`` and ``yhat(k) ~ N_c(0, 2)``.

    With ``count=None`` a single unbatched state is returned.
    """
    n = 1 if count is None else int(count)
    xi = stream.complex_normals(step, n, 2 * lattice.size, tag=TAG_INITIAL).reshape(n, lattice.size, 2)
    z = xi[..., 0] * np.sqrt(2.0 / lattice.bracket2)
    y = xi[..., 1] * np.sqrt(2.0)
    if count is None:
        z, y = z[0], y[0]
    return PairState(SpectralField(lattice, z), SpectralField(lattice, y))


def sample_mu0(lattice: FrequencyLattice, stream: NoiseStream, count: int | None = None, step: int = 0) -> SpectralField:
    """The first marginal of ``mu`` (same draws as ``sample_mu``)."""
    return sample_mu(lattice, stream, count, step).psi


def pack(state: PairState) -> np.ndarray:
    """``(batch, K, 2)`` array from a (possibly unbatched) pair state."""
    z = np.atleast_2d(state.psi.coeffs)
    y = np.atleast_2d(state.phi.coeffs)
    return np.stack([z, y], axis=-1)


def draw(stream: NoiseStream, step: int, count: int, lattice: FrequencyLattice, dim: int) -> np.ndarray:
    return stream.complex_normals(step, count, lattice.size * dim, tag=TAG_DYNAMICS).reshape(count, lattice.size, dim)


def apply_blocks(mat: np.ndarray, x: np.ndarray) -> np.ndarray:
    """``out[b, k, i] = sum_j mat[k, i, j] x[b, k, j]`` for small block dimension."""
    out = mat[None, :, :, 0] * x[:, :, None, 0]
    for j in range(1, mat.shape[-1]):
        out += mat[None, :, :, j] * x[:, :, None, j]
    return out


def apply_transition(tr: Transition, x: np.ndarray, xi: np.ndarray | None, forcing: np.ndarray | None = None) -> np.ndarray:
    """``E x + Phi forcing + L xi`` over arrays of shape ``(batch, K, d)``."""
    out = apply_blocks(tr.E, x)
    if forcing is not None:
        out += apply_blocks(tr.Phi, forcing)
    if xi is not None:
        out += apply_blocks(tr.L, xi)
    return out


def ou_exact_step(state: PairState, dt: float, modes: GaussianModes, stream: NoiseStream, step: int = 0,
                  noise_scale: float = 1.0) -> PairState:
    """Advance a (batched) pair state by ``dt`` with the exact Gaussian transition."""
    tr = modes.transition(dt, noise_scale)
    x = pack(state)
    xi = draw(stream, step, x.shape[0], modes.lattice, 2)
    y = apply_transition(tr, x, xi)
    if state.psi.coeffs.ndim == 1:
        y = y[0]
    lat = state.lattice
    return PairState(SpectralField(lat, y[..., 0]), SpectralField(lat, y[..., 1]))


def sample_Z_trajectory(p: ModelParams, lattice: FrequencyLattice, dt: float, steps: int, initial: PairState,
                        stream: NoiseStream, record_stride: int = 1, noise_scale: float = 1.0) -> Trajectory:
    """Linear stochastic Klein-Gordon paths with exact transitions.

    ``initial`` may be batched; path ``i`` uses trajectory id ``stream.trajectory_id + i``.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    modes = mode_ou(p, lattice)
    tr = modes.transition(dt, noise_scale)
    x = pack(initial)
    count = x.shape[0]
    times, zs, ys = [0.0], [x[..., 0].copy()], [x[..., 1].copy()]
    for n in range(steps):
        xi = draw(stream, n, count, lattice, 2) if noise_scale != 0 else None
        x = apply_transition(tr, x, xi)
        if (n + 1) % record_stride == 0 or n + 1 == steps:
            times.append((n + 1) * dt)
            zs.append(x[..., 0].copy())
            ys.append(x[..., 1].copy())
    meta = {"seed": stream.seed, "trajectory_id": stream.trajectory_id, "dt": dt, "steps": steps,
            "eps": p.eps, "alpha": str(p.alpha), "noise_scale": noise_scale}
    return Trajectory(lattice, np.array(times), np.array(zs), np.array(ys), meta=meta)


def cgl_ou_exact_step(z: SpectralField, dt: float, alpha: complex, stream: NoiseStream, step: int = 0,
                      noise_scale: float = 1.0) -> SpectralField:
    """Exact step of ``dZ = -<k>^2/(2 alpha) Z dt + (sqrt(Re alpha)/alpha) dW`` per mode."""
    modes = cgl_modes(alpha, z.lattice)
    tr = modes.transition(dt, noise_scale)
    x = np.atleast_2d(z.coeffs)[..., None]
    xi = draw(stream, step, x.shape[0], z.lattice, 1)
    y = apply_transition(tr, x, xi)[..., 0]
    return SpectralField(z.lattice, y if z.coeffs.ndim > 1 else y[0])
