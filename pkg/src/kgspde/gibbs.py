"""The truncated Gibbs measure: interaction energy, importance sampling, invariance tests.

The measure has density ``exp(-V_N(psi)) / Gamma_N`` against ``mu_0 x mu_1`` with
``V_N(psi) = (1 / (2n + 2)) int H_{n+1,n+1}(Pi_N psi(x); sigma_N) dx``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .gaussian import sample_mu
from .lattice import FrequencyLattice, PairState, SpectralField, alias_free_size, quadrature, to_physical
from .nonlinear import SpdeRun, run_spde
from .rng import NoiseStream
from .symbols import ModelParams
from .wick import hermite_eval, pointwise_variance

MIN_ESS = 10.0


def interaction_energy(psi: SpectralField, n: int, sigma: float | None = None, grid_size: int | None = None):
    """``(1 / (2n+2)) int_{T^2} H_{n+1,n+1}(psi(x); sigma) dx`` (batched over leading axes).

    ``sigma`` defaults to the pointwise variance of ``Pi_N Z``.
    """
    lat = psi.lattice
    sig = pointwise_variance(lat.n_max) if sigma is None else float(sigma)
    need = (2 * n + 2) * lat.n_max + 1
    grid = alias_free_size(lat.n_max, 2 * n + 2, 0) if grid_size is None else int(grid_size)
    if grid < need:
        raise ValueError(f"grid of {grid} points aliases the degree-{2 * n + 2} integrand (need {need})")
    vals = hermite_eval(n + 1, n + 1, sig, to_physical(psi, grid))
    total = quadrature(vals) / (2 * n + 2)
    scale = np.maximum(np.abs(total), 1.0)
    if np.any(np.abs(np.imag(total)) > 1e-10 * scale):
        raise FloatingPointError("interaction energy has a non-negligible imaginary part")
    out = np.real(total)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True, eq=False)
class GibbsEnsemble:
    """Weighted samples: ``weights`` are self-normalized ``exp(log_weight)``."""

    states: PairState
    log_weight: np.ndarray
    n: int
    sigma: float

    @property
    def weights(self) -> np.ndarray:
        return np.exp(self.log_weight - logsumexp(self.log_weight))

    @property
    def ess(self) -> float:
        w = self.weights
        return float(1.0 / np.sum(w ** 2))

    @property
    def low_ess(self) -> bool:
        return self.ess < MIN_ESS

    def mean(self, values: np.ndarray) -> float:
        return float(np.sum(self.weights * values))

    def standard_error(self, values: np.ndarray) -> float:
        """Delta-method standard error of the self-normalized mean."""
        w = self.weights
        m = np.sum(w * values)
        return float(np.sqrt(np.sum(w ** 2 * (values - m) ** 2)))


def sample_rho_n(p: ModelParams, count: int, stream: NoiseStream, sigma: float | None = None) -> GibbsEnsemble:
    """Importance sample of the truncated Gibbs measure with proposal ``mu``.

    ``psi`` is drawn from ``mu_0`` and ``phi`` exactly from ``mu_1``.  A warning
    is issued when the effective sample size drops below ``MIN_ESS``.
    """
    if count < 1:
        raise ValueError("count must be at least 1")
    lat = FrequencyLattice(p.n_max)
    states = sample_mu(lat, stream, count)
    sig = pointwise_variance(lat.n_max) if sigma is None else float(sigma)
    logw = -np.atleast_1d(interaction_energy(states.psi, p.n, sig))
    ens = GibbsEnsemble(states, logw, p.n, sig)
    if ens.low_ess:
        warnings.warn(f"effective sample size {ens.ess:.1f} is below {MIN_ESS}", RuntimeWarning, stacklevel=2)
    return ens


def weight_moments(n: int, n_values, powers, count: int, stream: NoiseStream) -> dict:
    """Monte-Carlo ``E_mu[exp(-V_N)^p]`` with standard errors, keyed by ``(N, p)``."""
    out = {}
    for nn in n_values:
        lat = FrequencyLattice(nn)
        psi = sample_mu(lat, stream, count).psi
        v = np.atleast_1d(interaction_energy(psi, n))
        for p in powers:
            w = np.exp(-p * v)
            out[(nn, p)] = (float(w.mean()), float(w.std(ddof=1) / np.sqrt(count)))
    return out


# ------------------------------------------------------------- invariance


def shell_index(lattice: FrequencyLattice) -> tuple:
    """Distinct ``|k|^2`` values and the shell id of each mode."""
    shells, idx = np.unique(lattice.norm2, return_inverse=True)
    return shells, idx


def observables(state: PairState, n: int, sigma: float, by_shell: bool = True) -> dict:
    """Occupancies ``|psi(k)|^2``, ``|phi(k)|^2`` (shell averages by default) and the interaction energy."""
    lat = state.lattice
    z = np.atleast_2d(state.psi.coeffs)
    y = np.atleast_2d(state.phi.coeffs)
    out = {}
    if by_shell:
        shells, idx = shell_index(lat)
        for s_id, s in enumerate(shells):
            sel = idx == s_id
            out[f"psi_occ|k|^2={int(s)}"] = np.mean(np.abs(z[:, sel]) ** 2, axis=1)
            out[f"phi_occ|k|^2={int(s)}"] = np.mean(np.abs(y[:, sel]) ** 2, axis=1)
    else:
        for j, (k1, k2) in enumerate(lat.modes):
            out[f"psi_occ({k1},{k2})"] = np.abs(z[:, j]) ** 2
            out[f"phi_occ({k1},{k2})"] = np.abs(y[:, j]) ** 2
    out["interaction_energy"] = np.atleast_1d(interaction_energy(SpectralField(lat, z), n, sigma))
    return out


@dataclass(frozen=True)
class InvarianceReport:
    dt: float
    horizon: float
    count: int
    survivors: int
    ess: float
    rows: list

    @property
    def max_abs_z(self) -> float:
        return max(abs(r["z"]) for r in self.rows)

    def as_dict(self) -> dict:
        return {"dt": self.dt, "horizon": self.horizon, "count": self.count, "survivors": self.survivors,
                "ess": self.ess, "max_abs_z": self.max_abs_z, "observables": self.rows}


def invariance_test(p: ModelParams, dt: float, horizon: float, count: int, stream: NoiseStream,
                    nonlinear: bool = True, by_shell: bool = True, sigma: float | None = None) -> InvarianceReport:
    """Evolve a weighted ``rho_N`` ensemble to time ``horizon`` and z-test each observable.

    For observable ``O`` the statistic is the weighted mean of the paired
    differences ``O(X_i(t)) - O(X_i(0))`` divided by its self-normalized
    standard error.  ``nonlinear=False`` drops both the weight and the
    nonlinearity (the Gaussian case).
    """
    lat = FrequencyLattice(p.n_max)
    sig = pointwise_variance(lat.n_max) if sigma is None else float(sigma)
    states = sample_mu(lat, stream, count)
    if nonlinear:
        logw = -np.atleast_1d(interaction_energy(states.psi, p.n, sig))
    else:
        logw = np.zeros(count)
    steps = int(round(horizon / dt))
    if steps < 1 or abs(steps * dt - horizon) > 1e-9 * horizon:
        raise ValueError("horizon must be a positive multiple of dt")
    run = SpdeRun(p, states, dt, steps, stream, record_stride=steps,
                  nonlinearity_scale=1.0 if nonlinear else 0.0, sigma=sig)
    traj = run_spde(run)
    alive = traj.alive
    final = PairState(SpectralField(lat, traj.psi[-1][alive]), SpectralField(lat, traj.phi[-1][alive]))
    first = PairState(SpectralField(lat, states.psi.coeffs[alive]), SpectralField(lat, states.phi.coeffs[alive]))
    lw = logw[alive]
    w = np.exp(lw - logsumexp(lw))
    o0 = observables(first, p.n, sig, by_shell)
    o1 = observables(final, p.n, sig, by_shell)
    rows = []
    for name in o0:
        d = o1[name] - o0[name]
        mean = float(np.sum(w * d))
        se = float(np.sqrt(np.sum(w ** 2 * (d - mean) ** 2)))
        rows.append({
            "observable": name,
            "mean_0": float(np.sum(w * o0[name])),
            "mean_t": float(np.sum(w * o1[name])),
            "diff": mean,
            "se": se,
            "z": mean / se if se > 0 else 0.0,
        })
    return InvarianceReport(dt, horizon, count, int(alive.sum()), float(1.0 / np.sum(w ** 2)), rows)


@dataclass(frozen=True)
class BiasProfile:
    """Coupled differences ``E_rho[O(X^dt_t) - O(X^ref_t)]`` for each ``dt``.

    ``fits`` maps each observable to the least-squares line through the origin
    of ``diff`` against ``dt - dt_ref`` (``coef``, ``se``, ``z``, ``r_squared``).
    """

    dt_ref: float
    dts: list
    horizon: float
    count: int
    survivors: int
    rows: list
    fits: dict

    def as_dict(self) -> dict:
        return {"dt_ref": self.dt_ref, "dts": self.dts, "horizon": self.horizon, "count": self.count,
                "survivors": self.survivors, "rows": self.rows, "fits": self.fits}


def _steps_for(horizon: float, dt: float) -> int:
    steps = int(round(horizon / dt))
    if steps < 1 or abs(steps * dt - horizon) > 1e-9 * horizon:
        raise ValueError(f"horizon {horizon} is not a positive multiple of dt={dt}")
    return steps


def dt_bias_profile(p: ModelParams, dts, dt_ref: float, horizon: float, count: int, stream: NoiseStream,
                    by_shell: bool = True, sigma: float | None = None) -> BiasProfile:
    """Discretization bias of the weighted ensemble, isolated by coupling.

    All runs start from the same weighted ``rho_N`` sample and are driven by
    one Brownian path resolved at ``dt_ref``, so the differences between them
    carry the time-stepping error and almost none of the sampling noise.
    Every ``dt`` must be an integer multiple of ``dt_ref``.
    """
    lat = FrequencyLattice(p.n_max)
    sig = pointwise_variance(lat.n_max) if sigma is None else float(sigma)
    states = sample_mu(lat, stream, count)
    logw = -np.atleast_1d(interaction_energy(states.psi, p.n, sig))
    _steps_for(horizon, dt_ref)
    finals = {}
    alive = np.ones(count, dtype=bool)
    for dt in [dt_ref] + [float(d) for d in dts]:
        m = int(round(dt / dt_ref))
        if m < 1 or abs(m * dt_ref - dt) > 1e-9 * dt:
            raise ValueError(f"dt={dt} is not a multiple of dt_ref={dt_ref}")
        run = SpdeRun(p, states, dt, _steps_for(horizon, dt), stream, record_stride=_steps_for(horizon, dt),
                      sigma=sig, noise_substeps=m)
        traj = run_spde(run)
        alive &= traj.alive
        finals[dt] = traj
    lw = logw[alive]
    w = np.exp(lw - logsumexp(lw))

    def obs(traj):
        st = PairState(SpectralField(lat, traj.psi[-1][alive]), SpectralField(lat, traj.phi[-1][alive]))
        return observables(st, p.n, sig, by_shell)

    ref = obs(finals[dt_ref])
    rows = []
    per_obs = {name: [] for name in ref}
    for dt in dts:
        o = obs(finals[float(dt)])
        for name in ref:
            d = o[name] - ref[name]
            mean = float(np.sum(w * d))
            se = float(np.sqrt(np.sum(w ** 2 * (d - mean) ** 2)))
            rows.append({"observable": name, "dt": float(dt), "diff": mean, "se": se})
            per_obs[name].append((float(dt) - dt_ref, mean, se))
    fits = {}
    for name, pts in per_obs.items():
        x = np.array([q[0] for q in pts])
        y = np.array([q[1] for q in pts])
        s = np.array([q[2] for q in pts])
        coef = float(x @ y / (x @ x))
        # the diffs share the reference run, so bound the slope error by the worst point
        coef_se = float(np.max(s / x))
        ss_res = float(np.sum((y - coef * x) ** 2))
        ss_tot = float(np.sum(y ** 2))
        fits[name] = {"coef": coef, "se": coef_se, "z": coef / coef_se if coef_se > 0 else 0.0,
                      "r_squared": 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0}
    return BiasProfile(dt_ref, [float(d) for d in dts], horizon, count, int(alive.sum()), rows, fits)
