"""Measured rates and trends: limit sweeps, Wick-Cauchy tests, covariance rates, energy probes.

Every report carries a ``manifest`` with the seeds, grids and step sizes that
produced it, so a run can be repeated bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .gaussian import GaussianModes, sample_mu
from .lattice import FrequencyLattice, SpectralField, neg_holder_proxy, sobolev_norm
from .nonlinear import StackedSystem, cgl_block, integrate, kg_block
from .propagators import LinearSolveSpec, nrl_linear_error, pair_energy_sup, url_linear_error
from .rng import TAG_AUX, NoiseStream
from .symbols import ModelParams
from .wick import pointwise_variance, wick_power_field


@dataclass(frozen=True)
class RateReport:
    """Errors against a strictly decreasing parameter and the log-log fit ``log e = slope log p + b``."""

    param_values: list
    errors: list
    slope: float
    intercept: float
    r_squared: float
    slope_se: float
    manifest: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    @property
    def slope_ci(self) -> tuple:
        """Three-standard-error band on the slope."""
        return self.slope - 3 * self.slope_se, self.slope + 3 * self.slope_se

    def as_dict(self) -> dict:
        return {"param_values": list(self.param_values), "errors": list(self.errors), "slope": self.slope,
                "intercept": self.intercept, "r_squared": self.r_squared, "slope_se": self.slope_se,
                "slope_ci": list(self.slope_ci), "manifest": self.manifest, "extra": self.extra}

    def rows(self) -> list:
        se = self.extra.get("standard_errors", [math.nan] * len(self.errors))
        return [{"param": p, "error": e, "se": s} for p, e, s in zip(self.param_values, self.errors, se)]


def fit_rate(param_values, errors, manifest: dict | None = None, extra: dict | None = None) -> RateReport:
    """Least-squares log-log fit; needs at least two strictly decreasing positive parameters."""
    x = np.asarray(param_values, dtype=float)
    y = np.asarray(errors, dtype=float)
    if x.ndim != 1 or x.size < 2:
        raise ValueError("a rate fit needs at least two parameter values")
    if x.shape != y.shape:
        raise ValueError("param_values and errors differ in length")
    if np.any(np.diff(x) >= 0):
        raise ValueError("param_values must be strictly decreasing")
    if np.any(x <= 0) or np.any(~np.isfinite(y)) or np.any(y <= 0):
        raise ValueError("rate fits need positive parameters and positive finite errors")
    lx, ly = np.log(x), np.log(y)
    if x.size == 2:
        slope = float((ly[1] - ly[0]) / (lx[1] - lx[0]))
        icpt, r2, se = float(ly[0] - slope * lx[0]), 1.0, 0.0
    else:
        fit = stats.linregress(lx, ly)
        slope, icpt, r2, se = float(fit.slope), float(fit.intercept), float(fit.rvalue ** 2), float(fit.stderr)
    return RateReport([float(v) for v in x], [float(v) for v in y], slope, icpt, r2, se,
                      dict(manifest or {}), dict(extra or {}))


def dyadic(j_from: int, j_to: int) -> list:
    """``[2^-j_from, ..., 2^-j_to]``."""
    return [2.0 ** -j for j in range(j_from, j_to + 1)]


# ------------------------------------------------------------- data fixtures


def _complex_noise(lattice: FrequencyLattice, seed: int, count: int = 1) -> np.ndarray:
    xi = NoiseStream(seed).complex_normals(0, count, lattice.size, tag=TAG_AUX)
    return xi[0] if count == 1 else xi


def standard_fixtures(lattice: FrequencyLattice, seed: int = 0, forcing: bool = True) -> dict:
    """Three data sets ``(phi0, phi1, f)``: one mode, broadband smooth, and rough.

    The rough set is barely ``H^0.9 x H^-0.1`` with forcing barely in
    ``L^2 H^-0.1``.  Initial data are small next to the (time-constant)
    forcing, so the energy supremum is reached at positive times rather than
    at ``t = 0``.  With ``forcing=False`` ``f`` is ``None``.
    """
    b = lattice.bracket2
    single = np.zeros(lattice.size, dtype=complex)
    single[lattice.index_of((1, 0)) if lattice.n_max >= 1 else 0] = 1.0
    noise = [_complex_noise(lattice, seed * 8 + i) for i in range(6)]
    out = {
        "single": (0.1 * single, 0.1j * single, single),
        "smooth": (0.1 * noise[0] * b ** -2.0, 0.1 * noise[1] * b ** -1.5, noise[2] * b ** -1.0),
        "rough": (0.1 * noise[3] * b ** -0.95, 0.1 * noise[4] * b ** -0.45, noise[5] * b ** -0.05),
    }
    res = {}
    for name, (a0, a1, f) in out.items():
        res[name] = (SpectralField(lattice, a0), SpectralField(lattice, a1),
                     SpectralField(lattice, f) if forcing else None)
    return res


def nrl_fixture(lattice: FrequencyLattice, seed: int = 0) -> tuple:
    """Smooth data with a nonzero velocity, so the initial layer contributes at order ``eps``."""
    b = lattice.bracket2
    a0 = _complex_noise(lattice, 1000 + seed) * b ** -2.0
    a1 = _complex_noise(lattice, 2000 + seed) * b ** -2.0
    return SpectralField(lattice, a0), SpectralField(lattice, a1)


# ------------------------------------------------------- deterministic sweeps


def nrl_deterministic_sweep(p: ModelParams, eps_list, sigma: float = 0.0, theta: float = 1.0,
                            phi0: SpectralField | None = None, phi1: SpectralField | None = None,
                            forcing=None, steps: int = 200, samples: int = 400) -> RateReport:
    """``sup_t ||u_eps - v||_{H^sigma}`` against ``eps`` with ``v`` the heat limit."""
    lat = FrequencyLattice(p.n_max)
    if phi0 is None or phi1 is None:
        phi0, phi1 = nrl_fixture(lat)
    dt = p.horizon / steps
    errs, ratios = [], []
    for eps in eps_list:
        q = p.replace(eps=float(eps))
        le = nrl_linear_error(q, LinearSolveSpec(q, phi0, phi1, forcing, dt, steps), sigma, theta, samples)
        errs.append(le.error)
        ratios.append(le.ratio)
    manifest = {"kind": "nrl-deterministic", "alpha": [p.alpha.real, p.alpha.imag], "n_max": p.n_max,
                "horizon": p.horizon, "sigma": sigma, "theta": theta, "samples": samples}
    return fit_rate(eps_list, errs, manifest, {"empirical_constants": ratios})


def url_deterministic_sweep(alpha1: float, alpha2_list, p: ModelParams, sigma: float = 0.0,
                            phi0: SpectralField | None = None, phi1: SpectralField | None = None,
                            forcing=None, steps: int = 200, samples: int = 400) -> RateReport:
    """``sup_t`` pair-norm distance between damping ``alpha1 + i alpha2`` and ``alpha1`` against ``|alpha2|``."""
    lat = FrequencyLattice(p.n_max)
    if phi0 is None or phi1 is None:
        phi0, phi1 = nrl_fixture(lat)
    dt = p.horizon / steps
    q = p.replace(eps=1.0, alpha=complex(alpha1, 0.0))
    errs, ratios = [], []
    for a2 in alpha2_list:
        le = url_linear_error(alpha1, float(a2), LinearSolveSpec(q, phi0, phi1, forcing, dt, steps), sigma, samples)
        errs.append(le.error)
        ratios.append(le.ratio)
    manifest = {"kind": "url-deterministic", "alpha1": alpha1, "n_max": p.n_max, "horizon": p.horizon,
                "sigma": sigma, "samples": samples}
    return fit_rate([abs(a) for a in alpha2_list], errs, manifest, {"empirical_constants": ratios})


# ---------------------------------------------------------- stochastic sweeps


def _coupled_sweep(kind: str, p: ModelParams, blocks: list, target, params: list, dt: float, count: int,
                   stream: NoiseStream, delta: float, nonlinear: bool, noise: bool, sigma: float | None) -> RateReport:
    lat = FrequencyLattice(p.n_max)
    system = StackedSystem(lat, tuple(blocks) + (target,))
    init = sample_mu(lat, stream, count)
    z0 = np.atleast_2d(init.psi.coeffs)
    y0 = np.atleast_2d(init.phi.coeffs)
    cols = []
    for b in blocks:
        cols += [z0, y0]
    cols.append(z0)
    x0 = np.stack(cols, axis=-1)
    steps = int(round(p.horizon / dt))
    if steps < 1:
        raise ValueError("dt exceeds the horizon")
    sig = pointwise_variance(lat.n_max) if sigma is None else float(sigma)
    res = integrate(system, x0, dt, steps, stream if noise else None, p.n, sig,
                    noise_scale=1.0 if noise else 0.0, nonlinearity_scale=1.0 if nonlinear else 0.0)
    alive = res.blowup_step < 0
    psi_t = res.states[:, alive, :, -1]
    w = lat.bracket2 ** (-delta)
    errs, ses = [], []
    for i, off in enumerate(system.offsets[:-1]):
        diff = res.states[:, alive, :, off] - psi_t
        per_path = np.sqrt(np.sum(w * np.abs(diff) ** 2, axis=-1)).max(axis=0)
        errs.append(float(per_path.mean()))
        ses.append(float(per_path.std(ddof=1) / math.sqrt(per_path.size)) if per_path.size > 1 else math.nan)
    manifest = {"kind": kind, "alpha": [p.alpha.real, p.alpha.imag], "n": p.n, "n_max": p.n_max,
                "horizon": p.horizon, "dt": dt, "count": count, "seed": stream.seed,
                "trajectory_id": stream.trajectory_id, "delta": delta, "nonlinear": nonlinear, "noise": noise,
                "sigma": sig}
    extra = {"standard_errors": ses, "survivors": int(alive.sum()), "blowups": int((~alive).sum())}
    return fit_rate(params, errs, manifest, extra)


def nrl_stochastic_sweep(p: ModelParams, eps_list, dt: float, count: int, stream: NoiseStream, delta: float = 0.1,
                         nonlinear: bool = True, noise: bool = True, sigma: float | None = None) -> RateReport:
    """Monte-Carlo ``E sup_t ||Psi_eps - Psi_CGL||_{H^-delta}`` for each ``eps``.

    All equations run as one stacked system on the same noise and the same
    initial ``psi``; paths that blow up in any component are excluded and counted.
    """
    eps_list = [float(e) for e in eps_list]
    if len(eps_list) < 2:
        raise ValueError("a rate fit needs at least two eps values")
    lat = FrequencyLattice(p.n_max)
    blocks = [kg_block(e, p.alpha, lat, name=f"kg(eps={e:g})") for e in eps_list]
    return _coupled_sweep("nrl-stochastic", p, blocks, cgl_block(p.alpha, lat), eps_list, dt, count, stream,
                          delta, nonlinear, noise, sigma)


def url_stochastic_sweep(alpha1: float, alpha2_list, p: ModelParams, dt: float, count: int, stream: NoiseStream,
                         delta: float = 0.1, nonlinear: bool = True, noise: bool = True,
                         sigma: float | None = None) -> RateReport:
    """Monte-Carlo ``E sup_t ||Psi_{alpha1 + i alpha2} - Psi_{alpha1}||_{H^-delta}`` with ``eps = 1``.

    The noise amplitude depends only on ``Re alpha = alpha1``, so the coupled
    equations see literally the same forcing.
    """
    a2s = [float(a) for a in alpha2_list]
    if len(a2s) < 2:
        raise ValueError("a rate fit needs at least two alpha2 values")
    if alpha1 <= 0:
        raise ValueError("alpha1 must be positive")
    lat = FrequencyLattice(p.n_max)
    q = p.replace(eps=1.0, alpha=complex(alpha1, 0.0))
    blocks = [kg_block(1.0, complex(alpha1, a), lat, name=f"kg(alpha2={a:g})") for a in a2s]
    target = kg_block(1.0, complex(alpha1, 0.0), lat, name="target")
    return _coupled_sweep_pair("url-stochastic", q, blocks, target, [abs(a) for a in a2s], dt, count, stream,
                               delta, nonlinear, noise, sigma)


def _coupled_sweep_pair(kind, p, blocks, target, params, dt, count, stream, delta, nonlinear, noise, sigma):
    """Like ``_coupled_sweep`` but with a two-slot target block."""
    lat = FrequencyLattice(p.n_max)
    system = StackedSystem(lat, tuple(blocks) + (target,))
    init = sample_mu(lat, stream, count)
    z0 = np.atleast_2d(init.psi.coeffs)
    y0 = np.atleast_2d(init.phi.coeffs)
    x0 = np.stack([z0, y0] * (len(blocks) + 1), axis=-1)
    steps = int(round(p.horizon / dt))
    if steps < 1:
        raise ValueError("dt exceeds the horizon")
    sig = pointwise_variance(lat.n_max) if sigma is None else float(sigma)
    res = integrate(system, x0, dt, steps, stream if noise else None, p.n, sig,
                    noise_scale=1.0 if noise else 0.0, nonlinearity_scale=1.0 if nonlinear else 0.0)
    alive = res.blowup_step < 0
    t_off = system.offsets[-1]
    w = lat.bracket2 ** (-delta)
    errs, ses = [], []
    for off in system.offsets[:-1]:
        diff = res.states[:, alive, :, off] - res.states[:, alive, :, t_off]
        per_path = np.sqrt(np.sum(w * np.abs(diff) ** 2, axis=-1)).max(axis=0)
        errs.append(float(per_path.mean()))
        ses.append(float(per_path.std(ddof=1) / math.sqrt(per_path.size)) if per_path.size > 1 else math.nan)
    manifest = {"kind": kind, "alpha1": p.alpha.real, "n": p.n, "n_max": p.n_max, "horizon": p.horizon, "dt": dt,
                "count": count, "seed": stream.seed, "trajectory_id": stream.trajectory_id, "delta": delta,
                "nonlinear": nonlinear, "noise": noise, "sigma": sig}
    extra = {"standard_errors": ses, "survivors": int(alive.sum()), "blowups": int((~alive).sum())}
    return fit_rate(params, errs, manifest, extra)


# ----------------------------------------------------------------- Wick-Cauchy


@dataclass(frozen=True)
class WickCauchyReport:
    n_values: list
    m: int
    n: int
    delta: float
    count: int
    pairs: list
    spearman_rho: float
    spearman_p: float
    group_means: dict
    oracle: dict
    manifest: dict

    @property
    def decreasing(self) -> bool:
        """Mean difference strictly decreases as the smaller truncation grows."""
        keys = sorted(self.group_means)
        vals = [self.group_means[k] for k in keys]
        return all(a > b for a, b in zip(vals, vals[1:]))

    def as_dict(self) -> dict:
        return {"n_values": self.n_values, "m": self.m, "n": self.n, "delta": self.delta, "count": self.count,
                "pairs": self.pairs, "spearman_rho": self.spearman_rho, "spearman_p": self.spearman_p,
                "group_means": {str(k): v for k, v in self.group_means.items()}, "decreasing": self.decreasing,
                "oracle": self.oracle, "manifest": self.manifest}


def tail_sum(n_lo: int, n_hi: int, delta: float) -> float:
    """``sum_{n_lo < |k| <= n_hi} 2 <k>^{-2-2 delta}``, the mean square ``H^-delta`` size of a tail of ``Z``."""
    lat = FrequencyLattice(n_hi)
    sel = lat.norm2 > n_lo * n_lo
    return float(np.sum(2.0 * lat.bracket2[sel] ** (-1.0 - delta)))


def wick_cauchy_test(n_values, m: int, n: int, count: int, stream: NoiseStream, delta: float = 0.5,
                     refine: int = 1) -> WickCauchyReport:
    """Monte-Carlo ``E ||H_{m,n}(Pi_{N_i} Z; C_{N_i}) - H_{m,n}(Pi_{N_j} Z; C_{N_j})||`` for all pairs.

    ``Z ~ mu_0`` is drawn once on the largest lattice and truncated, which is
    the law of the stationary linear solution at any fixed time.  The norm is
    the grid sup of ``|<nabla>^-delta . |``.  The trend statistic is Spearman's
    rho between ``min(N_i, N_j)`` and the mean difference, one-sided toward
    decrease.  For ``(m, n) = (1, 0)`` the report also compares the mean square
    ``H^-delta`` difference with the exact tail sum.
    """
    ns = [int(v) for v in n_values]
    if len(ns) < 2:
        raise ValueError("need at least two truncation levels")
    if any(b <= a for a, b in zip(ns, ns[1:])):
        raise ValueError("truncation levels must be strictly increasing")
    top = FrequencyLattice(ns[-1])
    out_lat = FrequencyLattice(max(1, (m + n)) * ns[-1])
    z = sample_mu(top, stream, count).psi
    fields = {}
    for nn in ns:
        lat = FrequencyLattice(nn)
        zn = z.restrict(lat)
        fields[nn] = wick_power_field(zn, m, n, pointwise_variance(nn), out_lattice=out_lat)
    pairs = []
    oracle = {}
    for i, a in enumerate(ns):
        for b in ns[i + 1:]:
            diff = fields[a] - fields[b]
            vals = np.atleast_1d(neg_holder_proxy(diff, delta, refine))
            row = {"n_lo": a, "n_hi": b, "mean": float(vals.mean()),
                   "se": float(vals.std(ddof=1) / math.sqrt(count)) if count > 1 else math.nan}
            if (m, n) == (1, 0):
                sq = np.atleast_1d(sobolev_norm(diff, -delta)) ** 2
                exact = tail_sum(a, b, delta)
                se = float(sq.std(ddof=1) / math.sqrt(count)) if count > 1 else math.nan
                oracle[f"{a}-{b}"] = {"mc": float(sq.mean()), "se": se, "exact": exact,
                                      "z": float((sq.mean() - exact) / se) if se > 0 else 0.0}
            pairs.append(row)
    x = [r["n_lo"] for r in pairs]
    y = [r["mean"] for r in pairs]
    if len(pairs) >= 3:
        sp = stats.spearmanr(x, y, alternative="less")
        rho, pval = float(sp.statistic), float(sp.pvalue)
    else:
        rho, pval = math.nan, math.nan
    groups = {}
    for r in pairs:
        groups.setdefault(r["n_lo"], []).append(r["mean"])
    means = {k: float(np.mean(v)) for k, v in groups.items()}
    manifest = {"seed": stream.seed, "trajectory_id": stream.trajectory_id, "count": count,
                "grid": out_lat.grid_size * refine}
    return WickCauchyReport(ns, m, n, delta, count, pairs, rho, pval, means, oracle, manifest)


# ----------------------------------------------------- Gaussian covariance rate


def coupled_limit_modes(eps: float, alpha: complex, lattice: FrequencyLattice) -> GaussianModes:
    """Linear KG (``eps``) and its heat limit on one shared noise, as a 3-dimensional system per mode."""
    return StackedSystem(lattice, (kg_block(eps, alpha, lattice), cgl_block(alpha, lattice))).modes()


def coupled_covariance(eps: float, alpha: complex, lattice: FrequencyLattice, t: float) -> np.ndarray:
    """Covariance ``(K, 3, 3)`` of ``(Z_eps, eps d_t Z_eps, Z)`` at time ``t``.

    Both start from the same ``Z(0) ~ mu_0`` with ``eps d_t Z_eps(0) ~ mu_1``
    independent; ``Sigma(t) = E Sigma_0 E^* + Q(t)`` with exact ``E`` and ``Q``.
    """
    modes = coupled_limit_modes(eps, alpha, lattice)
    tr = modes.transition(t)
    s = 2.0 / lattice.bracket2
    s0 = np.zeros((lattice.size, 3, 3), dtype=complex)
    s0[:, 0, 0] = s0[:, 0, 2] = s0[:, 2, 0] = s0[:, 2, 2] = s
    s0[:, 1, 1] = 2.0
    return tr.E @ s0 @ np.conj(np.swapaxes(tr.E, -1, -2)) + tr.Q


def mode_covariance_rate(p: ModelParams, k, theta: float, eps_list, t: float | None = None) -> RateReport:
    """``|E[(Z_eps - Z)(t; k) conj(Z(t; k))]|`` against ``eps``, computed without sampling.

    ``extra`` also carries the root-mean-square difference
    ``E|Z_eps - Z|^2`` and its fitted slope, the prefactor ``err / eps^theta``
    and the same divided by ``<k>^{-2-theta}``.
    """
    eps_list = [float(e) for e in eps_list]
    kk = tuple(int(v) for v in k)
    radius = int(math.ceil(math.hypot(*kk)))
    lat = FrequencyLattice(max(radius, 0))
    idx = lat.index_of(kk)
    tt = p.horizon if t is None else float(t)
    cross, msq = [], []
    for eps in eps_list:
        s = coupled_covariance(eps, p.alpha, lat, tt)[idx]
        cross.append(abs(s[0, 2] - s[2, 2]))
        msq.append(float(np.real(s[0, 0] - s[0, 2] - s[2, 0] + s[2, 2])))
    bracket = 1.0 + kk[0] ** 2 + kk[1] ** 2
    prefactor = [c / e ** theta for c, e in zip(cross, eps_list)]
    normalized = [c / (e ** theta * bracket ** (-(2.0 + theta) / 2.0)) for c, e in zip(cross, eps_list)]
    rms = [math.sqrt(max(v, 0.0)) for v in msq]
    rms_fit = fit_rate(eps_list, rms)
    extra = {"rms": rms, "rms_slope": rms_fit.slope, "rms_r_squared": rms_fit.r_squared,
             "prefactor": prefactor, "normalized_prefactor": normalized, "bracket": math.sqrt(bracket)}
    manifest = {"kind": "mode-covariance", "alpha": [p.alpha.real, p.alpha.imag], "k": list(kk), "theta": theta,
                "t": tt}
    return fit_rate(eps_list, cross, manifest, extra)


# ---------------------------------------------------------- energy uniformity


@dataclass(frozen=True)
class EnergyProbe:
    alphas: list
    eps_values: list
    sigma: float
    constants: dict
    fixture_constants: dict
    ratio: dict
    spearman_p: dict
    manifest: dict

    def as_dict(self) -> dict:
        return {"alphas": [[a.real, a.imag] for a in self.alphas], "eps_values": self.eps_values,
                "sigma": self.sigma, "constants": self.constants, "fixture_constants": self.fixture_constants,
                "ratio": self.ratio, "spearman_p": self.spearman_p, "manifest": self.manifest}


def _increase_p(values: list) -> float:
    """One-sided Spearman p-value for growth along the list (as ``eps`` shrinks).

    Values are rounded to 10 significant digits first, so a constant sequence
    is treated as constant; no variation means no evidence of growth (p = 1).
    """
    v = np.array([float(f"{x:.10g}") for x in values])
    if np.all(v == v[0]):
        return 1.0
    res = stats.spearmanr(np.arange(v.size), v, alternative="greater")
    return 1.0 if math.isnan(res.pvalue) else float(res.pvalue)


def energy_uniformity_probe(alphas, eps_values, fixtures: dict, p: ModelParams, sigma: float = 0.9,
                            steps: int = 200, samples: int = 400) -> EnergyProbe:
    """Empirical constants ``sup_t E(t)^{1/2} / (data norm)`` on an ``(alpha, eps)`` grid.

    ``E(t) = ||u||_{H^sigma}^2 + ||eps u_t||_{H^{sigma-1}}^2`` and the data norm is
    ``||phi0||_{H^sigma} + ||phi1||_{H^{sigma-1}} + ||f||_{L^2 H^{sigma-1}}``.
    For each ``alpha`` the constant is the max over the fixtures, and the
    report gives its max/min ratio over ``eps`` and the Spearman p-value
    against growth as ``eps`` decreases.
    """
    alphas = [complex(a) for a in alphas]
    eps_values = [float(e) for e in eps_values]
    if not alphas or not eps_values or not fixtures:
        raise ValueError("alpha grid, eps grid and fixtures must be non-empty")
    dt = p.horizon / steps
    consts, per_fix, ratio, pvals = {}, {}, {}, {}
    for a in alphas:
        key = f"{a.real:g}{a.imag:+g}i"
        table = {}
        for name, (phi0, phi1, f) in fixtures.items():
            row = []
            for eps in eps_values:
                q = p.replace(eps=eps, alpha=a)
                spec = LinearSolveSpec(q, phi0, phi1, f, dt, steps)
                lhs = pair_energy_sup(q, spec, sigma, samples)
                rhs = sobolev_norm(phi0, sigma) + sobolev_norm(phi1, sigma - 1) + spec.forcing_l2(sigma - 1)
                row.append(lhs / rhs)
            table[name] = row
        worst = [max(table[n][i] for n in table) for i in range(len(eps_values))]
        consts[key] = worst
        per_fix[key] = table
        ratio[key] = max(max(r) / min(r) for r in table.values())
        pvals[key] = _increase_p(worst)
    manifest = {"kind": "energy-uniformity", "horizon": p.horizon, "n_max": p.n_max, "steps": steps,
                "samples": samples, "sigma": sigma, "fixtures": sorted(fixtures)}
    return EnergyProbe(alphas, eps_values, sigma, consts, per_fix, ratio, pvals, manifest)
