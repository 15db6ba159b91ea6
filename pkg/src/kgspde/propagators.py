"""Deterministic linear solvers for the damped Klein-Gordon equation and its limits.

State vector per mode is ``X = (u, eps u_t)``; the equation
``eps^2 u_tt + 2 alpha u_t + <k>^2 u = f`` reads ``X' = A X + (0, f / eps)``.
Forcing is piecewise constant on steps, which makes every per-mode Duhamel
integral closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .lattice import FrequencyLattice, SpectralField, sobolev_norm
from .symbols import ModelParams, discriminant_root, lambda_from_bracket
from .trajectory import Trajectory

COLLISION_TOL = 1e-6


def cexpm1(z):
    """``exp(z) - 1`` accurate for small complex ``z``."""
    z = np.asarray(z, dtype=complex)
    x, y = z.real, z.imag
    re = np.expm1(x) * np.cos(y) - 2.0 * np.sin(0.5 * y) ** 2
    im = np.exp(x) * np.sin(y)
    return re + 1j * im


def sinhc(z):
    """``sinh(z) / z`` with its series near zero."""
    z = np.asarray(z, dtype=complex)
    small = np.abs(z) < 1e-2
    zs = np.where(small, 1.0, z)
    z2 = z * z
    series = 1.0 + z2 / 6.0 + z2 * z2 / 120.0 + z2 ** 3 / 5040.0
    return np.where(small, series, np.sinh(zs) / zs)


# ------------------------------------------------------------------ mild form


@dataclass(frozen=True, eq=False)
class MildCoefficients:
    """Per-mode data of the mild representation ``u = e^{t lam+} phi+ + e^{t lam-} phi- + ...``.

    ``init_map[k]`` maps ``(phi0, phi1)`` to ``(phi+, phi-)``; the forcing enters as
    ``f+ = mult f`` and ``f- = -mult f``.
    """

    eps: float
    lam_plus: np.ndarray
    lam_minus: np.ndarray
    root: np.ndarray
    init_map: np.ndarray
    mult: np.ndarray
    collision: np.ndarray

    def split(self, phi0, phi1):
        """``(phi+, phi-)`` coefficient arrays."""
        phi0 = np.asarray(phi0)
        phi1 = np.asarray(phi1)
        plus = self.init_map[:, 0, 0] * phi0 + self.init_map[:, 0, 1] * phi1
        minus = self.init_map[:, 1, 0] * phi0 + self.init_map[:, 1, 1] * phi1
        return plus, minus


def mild_coefficients(p: ModelParams, lattice: FrequencyLattice) -> MildCoefficients:
    """``phi^(+/-) = (-/+ eps^2 lam^(-/+) phi0 +/- eps phi1) / (2 r)`` and ``f^(+/-) = +/- f / (2 r)``,
    with ``r = sqrt(alpha^2 - eps^2 <k>^2)``.

    Requires ``Im alpha != 0`` so that ``|r| >= sqrt(2 |Re alpha Im alpha|) > 0``.
    """
    if p.alpha.imag == 0:
        raise ValueError("the mild-form path requires Im alpha != 0; use the sinh representation for real alpha")
    eps = p.eps
    k2 = lattice.bracket2
    root = np.asarray(discriminant_root(eps, p.alpha, k2))
    floor = math.sqrt(2.0 * abs(p.alpha.real * p.alpha.imag))
    assert np.all(np.abs(root) >= floor * (1 - 1e-12))
    lp, lm = lambda_from_bracket(eps, p.alpha, k2)
    lp, lm = np.asarray(lp), np.asarray(lm)
    two_r = 2.0 * root
    init = np.empty((lattice.size, 2, 2), dtype=complex)
    init[:, 0, 0] = -eps ** 2 * lm / two_r
    init[:, 0, 1] = eps / two_r
    init[:, 1, 0] = eps ** 2 * lp / two_r
    init[:, 1, 1] = -eps / two_r
    collision = np.abs(lp - lm) < COLLISION_TOL * np.abs(lp)
    return MildCoefficients(eps, lp, lm, root, init, 1.0 / two_r, collision)


def mild_flow(p: ModelParams, lattice: FrequencyLattice, t: float):
    """``(E, Phi)`` with ``X(t) = E X(0) + Phi f`` for forcing ``f`` constant on ``[0, t]``.

    ``E`` has shape ``(K, 2, 2)`` and ``Phi`` shape ``(K, 2)``.  Modes at an
    eigenvalue collision are delegated to the sinh representation.
    """
    c = mild_coefficients(p, lattice)
    eps = p.eps
    lp, lm = c.lam_plus, c.lam_minus
    ep, em = np.exp(t * lp), np.exp(t * lm)
    w = c.mult
    e = np.empty((lattice.size, 2, 2), dtype=complex)
    e[:, 0, 0] = c.init_map[:, 0, 0] * ep + c.init_map[:, 1, 0] * em
    e[:, 0, 1] = (ep - em) * eps * w
    e[:, 1, 0] = eps * (lp * ep * c.init_map[:, 0, 0] + lm * em * c.init_map[:, 1, 0])
    e[:, 1, 1] = eps * (lp * ep * c.init_map[:, 0, 1] + lm * em * c.init_map[:, 1, 1])
    phi = np.empty((lattice.size, 2), dtype=complex)
    phi[:, 0] = w * (cexpm1(t * lp) / lp - cexpm1(t * lm) / lm)
    phi[:, 1] = eps * w * (ep - em)
    if np.any(c.collision):
        es, ps = sinh_flow(eps, p.alpha, lattice, t)
        e[c.collision] = es[c.collision]
        phi[c.collision] = ps[c.collision]
    return e, phi


# ------------------------------------------------------------ sinh / cosh form


def sinh_flow(eps: float, alpha: complex, lattice: FrequencyLattice, t: float):
    """``(E, Phi)`` from ``e^{At} = e^{mt} (cosh(wt) I + sinh(wt)/w (A - m I))``.

    ``m = -alpha / eps^2`` and ``w = sqrt(alpha^2 - eps^2 <k>^2) / eps^2``; valid for
    real ``alpha`` including the critically damped point ``w = 0``.
    """
    alpha = complex(alpha)
    k2 = lattice.bracket2
    m = -alpha / eps ** 2
    w = np.asarray(discriminant_root(eps, alpha, k2)) / eps ** 2
    a = np.zeros((lattice.size, 2, 2), dtype=complex)
    a[:, 0, 1] = 1.0 / eps
    a[:, 1, 0] = -k2 / eps
    a[:, 1, 1] = -2.0 * alpha / eps ** 2
    shifted = a - m * np.eye(2)
    wt = w * t
    small = np.abs(wt) <= 1.0
    emt = np.exp(m * t)
    ch = np.where(small, emt * np.cosh(np.where(small, wt, 0)), 0)
    sh = np.where(small, emt * t * sinhc(np.where(small, wt, 0)), 0)
    e = ch[:, None, None] * np.eye(2) + sh[:, None, None] * shifted
    if np.any(~small):
        wb = w[~small]
        up = np.exp((m + wb) * t)[:, None, None]
        dn = np.exp((m - wb) * t)[:, None, None]
        sb = shifted[~small]
        wbb = wb[:, None, None]
        e[~small] = (up * (sb + wbb * np.eye(2)) - dn * (sb - wbb * np.eye(2))) / (2.0 * wbb)
    g = np.array([0.0, 1.0 / eps])
    phi = np.linalg.solve(a, ((e - np.eye(2)) @ g)[..., None])[..., 0]
    return e, phi


# ------------------------------------------------------------------ stepping


@dataclass(frozen=True, eq=False)
class LinearSolveSpec:
    """Data for a linear solve on ``[0, dt * steps]``.

    ``forcing`` is ``None``, one field (constant in time) or a sequence of
    ``steps`` fields / an array ``(steps, K)`` (piecewise constant).
    """

    params: ModelParams
    phi0: SpectralField
    phi1: SpectralField
    forcing: object = None
    dt: float = 1e-2
    steps: int = 100

    def __post_init__(self):
        if self.dt <= 0 or self.steps < 0:
            raise ValueError("dt must be positive and steps nonnegative")
        if self.dt * self.steps > self.params.horizon * (1 + 1e-12):
            raise ValueError("dt * steps exceeds the horizon")
        if not self.phi0.lattice.same_modes(self.phi1.lattice):
            raise ValueError("initial data live on different lattices")
        f = self.forcing_array()
        if f is not None and f.shape[0] not in (1, self.steps):
            raise ValueError("forcing sample count must equal steps")

    @property
    def lattice(self) -> FrequencyLattice:
        return self.phi0.lattice

    def forcing_array(self):
        """``(n, K)`` forcing samples, ``n`` being 1 for constant forcing; ``None`` if absent."""
        f = self.forcing
        if f is None:
            return None
        if isinstance(f, SpectralField):
            return f.coeffs.reshape(1, -1)
        if isinstance(f, (list, tuple)):
            if len(f) == 0:
                return None
            return np.array([x.coeffs for x in f])
        arr = np.asarray(f, dtype=complex)
        return arr.reshape(-1, self.lattice.size)

    def constant_forcing(self):
        f = self.forcing_array()
        if f is None:
            return np.zeros(self.lattice.size, dtype=complex)
        if f.shape[0] == 1:
            return f[0]
        return None

    def forcing_l2(self, s: float) -> float:
        """``||f||_{L^2(0,T; H^s)}`` over the solve interval."""
        f = self.forcing_array()
        if f is None:
            return 0.0
        w = self.lattice.bracket2 ** s
        per = np.sum(w * np.abs(f) ** 2, axis=-1)
        if f.shape[0] == 1:
            return float(math.sqrt(per[0] * self.dt * self.steps))
        return float(math.sqrt(per.sum() * self.dt))


def _step_loop(e, phi, spec: LinearSolveSpec, name: str) -> Trajectory:
    f = spec.forcing_array()
    x = np.stack([spec.phi0.coeffs, spec.phi1.coeffs], axis=-1)
    out = [x]
    for n in range(spec.steps):
        x = np.einsum("kij,kj->ki", e, x)
        if f is not None:
            x = x + phi * f[0 if f.shape[0] == 1 else n][:, None]
        out.append(x)
    arr = np.array(out)
    times = spec.dt * np.arange(spec.steps + 1)
    meta = {"solver": name, "eps": spec.params.eps, "alpha": str(spec.params.alpha), "dt": spec.dt, "steps": spec.steps}
    return Trajectory(spec.lattice, times, arr[:, None, :, 0], arr[:, None, :, 1], meta=meta)


def linear_solve_mild(spec: LinearSolveSpec) -> Trajectory:
    """Exact per-mode exponentials in the ``lam^(+/-)`` representation (``Im alpha != 0``)."""
    e, phi = mild_flow(spec.params, spec.lattice, spec.dt)
    return _step_loop(e, phi, spec, "mild")


def linear_solve_sinh(spec: LinearSolveSpec) -> Trajectory:
    """Exact per-mode exponentials in the cosh / sinh representation (any ``Re alpha > 0``)."""
    e, phi = sinh_flow(spec.params.eps, spec.params.alpha, spec.lattice, spec.dt)
    return _step_loop(e, phi, spec, "sinh")


def evaluate_constant_forcing(flow, spec: LinearSolveSpec, times) -> tuple:
    """``(u, eps u_t)`` arrays ``(len(times), K)`` at arbitrary times for constant forcing.

    ``flow(t)`` returns ``(E, Phi)``.
    """
    f = spec.constant_forcing()
    if f is None:
        raise ValueError("dense evaluation needs forcing constant in time")
    x0 = np.stack([spec.phi0.coeffs, spec.phi1.coeffs], axis=-1)
    us, vs = [], []
    for t in times:
        e, phi = flow(float(t))
        x = np.einsum("kij,kj->ki", e, x0) + phi * f[:, None]
        us.append(x[:, 0])
        vs.append(x[:, 1])
    return np.array(us), np.array(vs)


def flow_for(p: ModelParams, lattice: FrequencyLattice):
    """Time-``t`` flow using the mild form when ``Im alpha != 0`` and cosh / sinh otherwise."""
    if p.alpha.imag != 0:
        return lambda t: mild_flow(p, lattice, t)
    return lambda t: sinh_flow(p.eps, p.alpha, lattice, t)


# ---------------------------------------------------------- low / high split


def cutoff(xi) -> np.ndarray:
    """Smooth radial cutoff: 1 on ``|xi| <= 1``, 0 on ``|xi| >= 2``."""
    from .lattice import _smooth_step

    r = np.asarray(xi, dtype=float)
    return _smooth_step(2.0 - r)


def split_low_high(f: SpectralField, eps: float) -> tuple:
    """``(I(eps nabla) f, (1 - I(eps nabla)) f)``."""
    i = cutoff(eps * np.sqrt(f.lattice.norm2))
    low = f.coeffs * i
    return SpectralField(f.lattice, low), SpectralField(f.lattice, f.coeffs - low)


# -------------------------------------------------------------- limit solves


def heat_flow(alpha: complex, lattice: FrequencyLattice, t: float):
    """``(e^{-t <k>^2/(2 alpha)}, (1 - e^{-t <k>^2/(2 alpha)}) / <k>^2)`` per mode."""
    a = lattice.bracket2 / (2.0 * complex(alpha))
    return np.exp(-a * t), -cexpm1(-a * t) / lattice.bracket2


def heat_solve(alpha: complex, phi0: SpectralField, forcing=None, dt: float = 1e-2, steps: int = 100) -> Trajectory:
    """Exact solve of ``2 alpha v_t + (1 - Laplace) v = f`` with piecewise-constant ``f``."""
    if not complex(alpha).real > 0:
        raise ValueError("alpha must have positive real part")
    decay, gain = heat_flow(alpha, phi0.lattice, dt)
    spec = LinearSolveSpec(ModelParams(alpha=alpha, horizon=max(dt * steps, 1e-300)), phi0, phi0, forcing, dt, steps)
    f = spec.forcing_array()
    v = phi0.coeffs.astype(complex)
    out = [v]
    for n in range(steps):
        v = decay * v
        if f is not None:
            v = v + gain * f[0 if f.shape[0] == 1 else n]
        out.append(v)
    times = dt * np.arange(steps + 1)
    return Trajectory(phi0.lattice, times, np.array(out)[:, None, :], meta={"solver": "heat", "alpha": str(alpha)})


def real_damped_wave_solve(alpha1: float, phi0: SpectralField, phi1: SpectralField, forcing=None,
                           dt: float = 1e-2, steps: int = 100) -> Trajectory:
    """``v_tt + 2 alpha1 v_t + (1 - Laplace) v = f`` via the cosh / sinh representation."""
    if not alpha1 > 0:
        raise ValueError("alpha1 must be positive")
    p = ModelParams(eps=1.0, alpha=complex(alpha1), horizon=max(dt * steps, 1e-300))
    return linear_solve_sinh(LinearSolveSpec(p, phi0, phi1, forcing, dt, steps))


# ------------------------------------------------------------- limit errors


def dense_times(horizon: float, samples: int, layer: float) -> np.ndarray:
    """Uniform times on ``[0, horizon]`` plus geometric times resolving an initial layer."""
    uni = np.linspace(0.0, horizon, samples + 1)
    if layer > 0:
        geo = layer * np.geomspace(1e-2, 50.0, 60)
        uni = np.union1d(uni, geo[geo < horizon])
    return uni


@dataclass(frozen=True)
class LimitError:
    error: float
    data_norm: float
    scale: float

    @property
    def ratio(self) -> float:
        """``error / (scale * data_norm)``: the empirical constant of the rate bound."""
        denom = self.scale * self.data_norm
        return self.error / denom if denom > 0 else 0.0


def nrl_linear_error(p: ModelParams, spec: LinearSolveSpec, sigma: float, theta: float = 1.0,
                     samples: int | None = None) -> LimitError:
    """``sup_t ||u_eps(t) - v(t)||_{H^sigma}`` with ``v`` the heat-limit solution from ``phi0``.

    With constant (or absent) forcing both solutions are evaluated exactly on
    a dense time set that also resolves the ``eps^2`` initial layer; otherwise
    on the step grid.  ``data_norm`` is the theta-shifted data size
    ``||phi0||_{H^{sigma+theta}} + ||phi1||_{H^{sigma-1+theta}} + ||f||_{L^2 H^{sigma-1+theta}}``.
    """
    lat = spec.lattice
    w = lat.bracket2 ** sigma
    horizon = spec.dt * spec.steps
    if spec.constant_forcing() is not None:
        times = dense_times(horizon, samples or spec.steps, p.eps ** 2)
        u, _ = evaluate_constant_forcing(flow_for(p, lat), spec, times)
        f = spec.constant_forcing()
        vs = []
        for t in times:
            decay, gain = heat_flow(p.alpha, lat, t)
            vs.append(decay * spec.phi0.coeffs + gain * f)
        v = np.array(vs)
    else:
        solve = linear_solve_mild if p.alpha.imag != 0 else linear_solve_sinh
        u = solve(LinearSolveSpec(p, spec.phi0, spec.phi1, spec.forcing, spec.dt, spec.steps)).psi[:, 0]
        v = heat_solve(p.alpha, spec.phi0, spec.forcing, spec.dt, spec.steps).psi[:, 0]
    err = float(np.sqrt(np.sum(w * np.abs(u - v) ** 2, axis=-1)).max())
    data = (sobolev_norm(spec.phi0, sigma + theta) + sobolev_norm(spec.phi1, sigma - 1 + theta)
            + spec.forcing_l2(sigma - 1 + theta))
    return LimitError(err, float(data), p.eps ** theta)


def url_linear_error(alpha1: float, alpha2: float, spec: LinearSolveSpec, sigma: float,
                     samples: int | None = None) -> LimitError:
    """``sup_t ||(u - v, u_t - v_t)||_{H^sigma x H^{sigma-1}}`` for ``alpha = alpha1 + i alpha2`` vs ``alpha1``.

    Both solves use ``eps = 1`` and the cosh / sinh representation.
    """
    lat = spec.lattice
    horizon = spec.dt * spec.steps
    p_c = ModelParams(eps=1.0, alpha=complex(alpha1, alpha2), n=spec.params.n, n_max=lat.n_max, horizon=max(horizon, spec.params.horizon))
    p_r = p_c.replace(alpha=complex(alpha1, 0.0))
    if spec.constant_forcing() is not None:
        times = dense_times(horizon, samples or spec.steps, 0.0)
        u, ut = evaluate_constant_forcing(lambda t: sinh_flow(1.0, p_c.alpha, lat, t), spec, times)
        v, vt = evaluate_constant_forcing(lambda t: sinh_flow(1.0, p_r.alpha, lat, t), spec, times)
    else:
        a = linear_solve_sinh(LinearSolveSpec(p_c, spec.phi0, spec.phi1, spec.forcing, spec.dt, spec.steps))
        b = linear_solve_sinh(LinearSolveSpec(p_r, spec.phi0, spec.phi1, spec.forcing, spec.dt, spec.steps))
        u, ut, v, vt = a.psi[:, 0], a.phi[:, 0], b.psi[:, 0], b.phi[:, 0]
    w0 = lat.bracket2 ** sigma
    w1 = lat.bracket2 ** (sigma - 1)
    err = np.sqrt(np.sum(w0 * np.abs(u - v) ** 2 + w1 * np.abs(ut - vt) ** 2, axis=-1))
    data = sobolev_norm(spec.phi0, sigma) + sobolev_norm(spec.phi1, sigma - 1) + spec.forcing_l2(sigma - 1)
    return LimitError(float(err.max()), float(data), abs(alpha2))


def pair_energy_sup(p: ModelParams, spec: LinearSolveSpec, sigma: float, samples: int = 400) -> float:
    """``sup_t (||u||_{H^sigma}^2 + ||eps u_t||_{H^{sigma-1}}^2)^{1/2}`` on a dense time set."""
    lat = spec.lattice
    times = dense_times(spec.dt * spec.steps, samples, p.eps ** 2)
    u, v = evaluate_constant_forcing(flow_for(p, lat), spec, times)
    w0 = lat.bracket2 ** sigma
    w1 = lat.bracket2 ** (sigma - 1)
    return float(np.sqrt(np.sum(w0 * np.abs(u) ** 2 + w1 * np.abs(v) ** 2, axis=-1)).max())
