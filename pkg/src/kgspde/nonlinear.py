"""Exponential-Euler time stepping for the Galerkin-truncated renormalized equations.

Every equation here is a stack of per-mode linear blocks driven by one
shared complex Wiener process, plus the Wick nonlinearity
``F(psi) = Pi_N H_{n+1,n}(Pi_N psi; sigma_N)`` frozen over each step:

    X_{j+1} = E X_j + Phi (g F(psi_j)) + L xi_j

``E``, ``Phi = A^{-1}(E - I)`` and the noise factor ``L`` are exact for the
linear part, so only the nonlinear term carries an O(dt) error.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .gaussian import GaussianModes, apply_blocks, cgl_noise_coefficient, kg_drift, kg_noise_vector
from .lattice import FrequencyLattice, PairState, SpectralField, alias_free_size, to_physical, to_spectral
from .propagators import sinh_flow
from .rng import TAG_DYNAMICS, NoiseStream
from .symbols import ModelParams
from .trajectory import Trajectory
from .wick import hermite_eval, pointwise_variance, renormalized_nonlinearity, wick_table


@dataclass(frozen=True, eq=False)
class LinearBlock:
    """One linear equation per mode: drift ``A`` (K, d, d), noise vector ``b`` (d,),
    closed-form flow, and the direction ``g`` (d,) along which ``F`` enters."""

    name: str
    A: np.ndarray
    b: np.ndarray
    g: np.ndarray
    flow: object

    @property
    def dim(self) -> int:
        return self.A.shape[-1]


def kg_block(eps: float, alpha: complex, lattice: FrequencyLattice, name: str | None = None) -> LinearBlock:
    """``eps^2 u_tt + 2 alpha u_t + (1 - Laplace) u + F = 2 sqrt(Re alpha) W_t`` as ``(u, eps u_t)``."""
    p = ModelParams(eps=eps, alpha=alpha, n_max=lattice.n_max)
    return LinearBlock(
        name or f"kg(eps={eps:g}, alpha={complex(alpha)})",
        kg_drift(p, lattice),
        kg_noise_vector(alpha, eps),
        np.array([0.0, -1.0 / eps], dtype=complex),
        lambda dt: sinh_flow(eps, alpha, lattice, dt)[0],
    )


def cgl_block(alpha: complex, lattice: FrequencyLattice, name: str = "cgl") -> LinearBlock:
    """``2 alpha u_t + (1 - Laplace) u + F = 2 sqrt(Re alpha) W_t``."""
    alpha = complex(alpha)
    a = (-lattice.bracket2 / (2.0 * alpha)).reshape(-1, 1, 1).astype(complex)
    return LinearBlock(
        name,
        a,
        np.array([cgl_noise_coefficient(alpha)], dtype=complex),
        np.array([-1.0 / (2.0 * alpha)], dtype=complex),
        lambda dt: np.exp(a * dt),
    )


def _block_diag(mats: list) -> np.ndarray:
    k = mats[0].shape[0]
    dims = [m.shape[-1] for m in mats]
    out = np.zeros((k, sum(dims), sum(dims)), dtype=complex)
    o = 0
    for m, d in zip(mats, dims):
        out[:, o:o + d, o:o + d] = m
        o += d
    return out


@dataclass(frozen=True, eq=False)
class StackedSystem:
    """Blocks sharing one noise; slot 0 of each block holds its ``psi``."""

    lattice: FrequencyLattice
    blocks: tuple

    @property
    def dim(self) -> int:
        return sum(b.dim for b in self.blocks)

    @property
    def offsets(self) -> list:
        out, o = [], 0
        for b in self.blocks:
            out.append(o)
            o += b.dim
        return out

    def modes(self) -> GaussianModes:
        a = _block_diag([b.A for b in self.blocks])
        bvec = np.concatenate([b.b for b in self.blocks])
        d = 2.0 * np.outer(bvec, bvec.conj())
        blocks = self.blocks

        def flow(dt):
            return _block_diag([np.asarray(b.flow(dt), dtype=complex) for b in blocks])

        return GaussianModes(self.lattice, a, np.broadcast_to(d, a.shape).copy(), flow)

    def g(self) -> np.ndarray:
        return np.concatenate([b.g for b in self.blocks])


@dataclass(frozen=True, eq=False)
class StepResult:
    times: np.ndarray
    states: np.ndarray
    blowup_step: np.ndarray


def wick_force(psi: np.ndarray, lattice: FrequencyLattice, n: int, sigma: float, grid_size: int) -> np.ndarray:
    """Lattice coefficients of ``H_{n+1,n}(psi(x); sigma)`` for coefficient arrays ``(..., K)``."""
    field_ = SpectralField(lattice, psi)
    vals = hermite_eval(n + 1, n, sigma, to_physical(field_, grid_size))
    return to_spectral(vals, lattice).coeffs


def integrate(system: StackedSystem, x0: np.ndarray, dt: float, steps: int, stream: NoiseStream | None, n: int,
              sigma: float, *, noise_scale: float = 1.0, nonlinearity_scale: float = 1.0, record_stride: int = 1,
              grid_size: int | None = None, blowup_threshold: float = 1e8, step_offset: int = 0,
              noise_substeps: int = 1) -> StepResult:
    """Exponential Euler for a stacked system; ``x0`` has shape ``(batch, K, D)``.

    Paths whose state becomes non-finite or exceeds ``blowup_threshold`` are
    flagged with the step index and carried as NaN afterwards.

    With ``noise_substeps = m`` the stochastic convolution over one step is
    assembled from ``m`` draws of the ``dt / m`` transition,
    ``sum_i E_f^(m-1-i) L_f xi_(jm+i)``.  This has exactly the law of ``L xi``
    and reuses the noise indices of a run with step ``dt / m``, so runs at
    different ``dt`` see the same Brownian path.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    lat = system.lattice
    grid = alias_free_size(lat.n_max, 2 * n + 1) if grid_size is None else int(grid_size)
    if grid < (2 * n + 2) * lat.n_max + 1 and lat.n_max > 0:
        raise ValueError(f"grid of {grid} points aliases degree-{2 * n + 1} products")
    if noise_substeps < 1:
        raise ValueError("noise_substeps must be at least 1")
    modes = system.modes()
    tr = modes.transition(dt, noise_scale)
    fine = modes.transition(dt / noise_substeps, noise_scale) if noise_substeps > 1 else tr
    g = system.g()
    slots = system.offsets
    x = np.array(x0, dtype=complex)
    batch = x.shape[0]
    alive = np.ones(batch, dtype=bool)
    blow = np.full(batch, -1, dtype=np.int64)
    times, recs = [0.0], [x.copy()]
    use_noise = noise_scale != 0 and stream is not None
    for j in range(steps):
        new = apply_blocks(tr.E, x)
        if nonlinearity_scale != 0:
            psi = x[..., slots]
            psi = np.where(alive[:, None, None], psi, 0)
            f = wick_force(np.moveaxis(psi, -1, 1), lat, n, sigma, grid)
            f = np.moveaxis(f, 1, -1) * nonlinearity_scale
            forcing = np.zeros_like(x)
            for i, (s, b) in enumerate(zip(slots, system.blocks)):
                forcing[..., s:s + b.dim] = f[..., i:i + 1] * b.g
            new += apply_blocks(tr.Phi, forcing)
        if use_noise:
            shape = (batch, lat.size, system.dim)
            acc = None
            for i in range(noise_substeps):
                xi = stream.complex_normals(step_offset + j * noise_substeps + i, batch, lat.size * system.dim,
                                            tag=TAG_DYNAMICS)
                kick = apply_blocks(fine.L, xi.reshape(shape))
                acc = kick if acc is None else apply_blocks(fine.E, acc) + kick
            new += acc
        with np.errstate(invalid="ignore", over="ignore"):
            bad = ~np.all(np.isfinite(new), axis=(1, 2)) | (np.abs(np.nan_to_num(new, nan=np.inf)).max(axis=(1, 2)) > blowup_threshold)
        fresh = bad & alive
        blow[fresh] = j + 1
        alive &= ~bad
        new[~alive] = np.nan
        x = new
        if (j + 1) % record_stride == 0 or j + 1 == steps:
            times.append((j + 1) * dt)
            recs.append(x.copy())
    return StepResult(np.array(times), np.array(recs), blow)


# ----------------------------------------------------------- user-facing runs


@dataclass(frozen=True, eq=False)
class SpdeRun:
    """One (batched) run of the renormalized Galerkin equation.

    ``sigma`` defaults to the pointwise variance of ``Pi_N Z`` under ``mu``.
    ``noise_scale`` and ``nonlinearity_scale`` switch the two non-linear-flow
    ingredients off for reductions and oracles.
    """

    params: ModelParams
    initial: PairState
    dt: float
    steps: int
    stream: NoiseStream
    record_stride: int = 1
    noise_scale: float = 1.0
    nonlinearity_scale: float = 1.0
    sigma: float | None = None
    grid_size: int | None = None
    blowup_threshold: float = 1e8
    noise_substeps: int = 1

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.steps < 0 or self.record_stride < 1:
            raise ValueError("steps must be >= 0 and record_stride >= 1")
        if self.initial.lattice.n_max != self.params.n_max:
            raise ValueError("initial state lattice does not match params.n_max")

    @property
    def lattice(self) -> FrequencyLattice:
        return self.initial.lattice

    @property
    def renorm(self) -> float:
        return pointwise_variance(self.lattice.n_max) if self.sigma is None else float(self.sigma)

    def manifest(self) -> dict:
        return {
            "eps": self.params.eps, "alpha": [self.params.alpha.real, self.params.alpha.imag],
            "n": self.params.n, "n_max": self.params.n_max, "dt": self.dt, "steps": self.steps,
            "seed": self.stream.seed, "trajectory_id": self.stream.trajectory_id,
            "record_stride": self.record_stride, "noise_scale": self.noise_scale,
            "nonlinearity_scale": self.nonlinearity_scale, "sigma": self.renorm,
            "noise_substeps": self.noise_substeps,
        }


def _pair_x0(state: PairState) -> np.ndarray:
    return np.stack([np.atleast_2d(state.psi.coeffs), np.atleast_2d(state.phi.coeffs)], axis=-1)


def _kg_system(run: SpdeRun) -> StackedSystem:
    return StackedSystem(run.lattice, (kg_block(run.params.eps, run.params.alpha, run.lattice),))


def _to_trajectory(run: SpdeRun, res: StepResult, two: bool = True) -> Trajectory:
    meta = run.manifest()
    meta["blowup_count"] = int((res.blowup_step >= 0).sum())
    phi = res.states[..., 1] if two else None
    return Trajectory(run.lattice, res.times, res.states[..., 0], phi, res.blowup_step, meta)


def run_spde(run: SpdeRun) -> Trajectory:
    """``eps^2 psi_tt + 2 alpha psi_t + (1 - Laplace) psi + Pi_N H_{n+1,n}(psi; sigma) = 2 sqrt(Re alpha) W_t``."""
    res = integrate(_kg_system(run), _pair_x0(run.initial), run.dt, run.steps, run.stream, run.params.n, run.renorm,
                    noise_scale=run.noise_scale, nonlinearity_scale=run.nonlinearity_scale,
                    record_stride=run.record_stride, grid_size=run.grid_size, blowup_threshold=run.blowup_threshold,
                    noise_substeps=run.noise_substeps)
    return _to_trajectory(run, res)


def step_spde(state: PairState, run: SpdeRun, step_index: int = 0) -> PairState:
    """One exponential-Euler step using the noise of ``step_index``."""
    res = integrate(_kg_system(run), _pair_x0(state), run.dt, 1, run.stream, run.params.n, run.renorm,
                    noise_scale=run.noise_scale, nonlinearity_scale=run.nonlinearity_scale,
                    grid_size=run.grid_size, blowup_threshold=run.blowup_threshold, step_offset=step_index,
                    noise_substeps=run.noise_substeps)
    x = res.states[-1]
    if state.psi.coeffs.ndim == 1:
        x = x[0]
    return PairState(SpectralField(run.lattice, x[..., 0]), SpectralField(run.lattice, x[..., 1]))


def run_cgl(run: SpdeRun, initial: SpectralField | None = None) -> Trajectory:
    """``2 alpha psi_t + (1 - Laplace) psi + Pi_N H_{n+1,n}(psi; sigma) = 2 sqrt(Re alpha) W_t``.

    ``initial`` defaults to ``run.initial.psi``; ``eps`` is ignored.
    """
    init = run.initial.psi if initial is None else initial
    system = StackedSystem(run.lattice, (cgl_block(run.params.alpha, run.lattice),))
    x0 = np.atleast_2d(init.coeffs)[..., None]
    res = integrate(system, x0, run.dt, run.steps, run.stream, run.params.n, run.renorm,
                    noise_scale=run.noise_scale, nonlinearity_scale=run.nonlinearity_scale,
                    record_stride=run.record_stride, grid_size=run.grid_size, blowup_threshold=run.blowup_threshold,
                    noise_substeps=run.noise_substeps)
    return _to_trajectory(run, res, two=False)


def step_cgl(state: SpectralField, run: SpdeRun, step_index: int = 0) -> SpectralField:
    system = StackedSystem(run.lattice, (cgl_block(run.params.alpha, run.lattice),))
    x0 = np.atleast_2d(state.coeffs)[..., None]
    res = integrate(system, x0, run.dt, 1, run.stream, run.params.n, run.renorm, noise_scale=run.noise_scale,
                    nonlinearity_scale=run.nonlinearity_scale, grid_size=run.grid_size,
                    blowup_threshold=run.blowup_threshold, step_offset=step_index, noise_substeps=run.noise_substeps)
    x = res.states[-1][..., 0]
    return SpectralField(run.lattice, x if state.coeffs.ndim > 1 else x[0])


def _require_real(run: SpdeRun):
    if run.params.alpha.imag != 0 or run.params.eps != 1.0:
        raise ValueError("the real-damping target needs eps = 1 and real alpha")


def run_url_target(run: SpdeRun) -> Trajectory:
    """The renormalized damped wave equation with real damping ``alpha1`` and ``eps = 1``."""
    _require_real(run)
    return run_spde(run)


def step_url_target(state: PairState, run: SpdeRun, step_index: int = 0) -> PairState:
    _require_real(run)
    return step_spde(state, run, step_index)


# ------------------------------------------------- Da Prato - Debussche split


def run_dpd(run: SpdeRun, z_path: Trajectory, wick_tables: list | None = None) -> Trajectory:
    """Remainder ``U = Psi - Z`` solving the random equation with Wick data of ``Z``.

    ``z_path`` must be the linear solution driven by the same noise and
    recorded at every step.  ``wick_tables[j]`` (built from ``Z`` at step ``j``
    when omitted) maps ``(k, l)`` to ``:Z^k conj(Z)^l:``.  Returns the ``U`` path
    on the same time grid; ``Psi`` is ``U + Z``.
    """
    if len(z_path.times) != run.steps + 1:
        raise ValueError("z_path must be recorded at every step")
    lat = run.lattice
    n = run.params.n
    sigma = run.renorm
    block = kg_block(run.params.eps, run.params.alpha, lat)
    system = StackedSystem(lat, (block,))
    tr = system.modes().transition(run.dt, 0.0)
    x = _pair_x0(run.initial) - np.stack([z_path.psi[0], z_path.phi[0]], axis=-1)
    batch = x.shape[0]
    out = [x.copy()]
    blow = np.full(batch, -1, dtype=np.int64)
    for j in range(run.steps):
        new = apply_blocks(tr.E, x)
        if run.nonlinearity_scale != 0:
            f = np.empty((batch, lat.size), dtype=complex)
            for b in range(batch):
                if wick_tables is None:
                    table = wick_table(SpectralField(lat, z_path.psi[j, b]), n, sigma)
                else:
                    table = wick_tables[j] if batch == 1 else wick_tables[j][b]
                u = SpectralField(lat, np.nan_to_num(x[b, :, 0]))
                f[b] = renormalized_nonlinearity(u, table, n).coeffs
            forcing = f[..., None] * block.g * run.nonlinearity_scale
            new += apply_blocks(tr.Phi, forcing)
        bad = ~np.all(np.isfinite(new), axis=(1, 2)) | (np.abs(np.nan_to_num(new)).max(axis=(1, 2)) > run.blowup_threshold)
        blow[bad & (blow < 0)] = j + 1
        new[blow >= 0] = np.nan
        x = new
        out.append(x.copy())
    arr = np.array(out)
    meta = run.manifest()
    meta["component"] = "dpd remainder"
    return Trajectory(lat, z_path.times, arr[..., 0], arr[..., 1], blow, meta)
