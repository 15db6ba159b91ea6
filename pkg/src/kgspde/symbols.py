"""Model parameters, the branch square root, propagator symbols and bound probes."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ModelParams:
    """Parameters of ``eps^2 u_tt + 2 alpha u_t + (1 - Laplace) u = f``.

    ``n`` is the nonlinearity degree (the Wick power is ``:u^{n+1} conj(u)^n:``),
    ``n_max`` the Galerkin truncation ``N`` and ``horizon`` the final time ``T``.
    """

    eps: float = 1.0
    alpha: complex = 1 + 1j
    n: int = 1
    n_max: int = 4
    horizon: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "alpha", complex(self.alpha))
        problems = self.violations()
        if problems:
            raise ValueError("; ".join(problems))

    def violations(self) -> list:
        out = []
        if not (0 < self.eps <= 1):
            out.append(f"eps must lie in (0, 1], got {self.eps}")
        if not self.alpha.real > 0:
            out.append(f"alpha must have positive real part, got {self.alpha}")
        if int(self.n) != self.n or self.n < 1:
            out.append(f"n must be an integer >= 1, got {self.n}")
        if int(self.n_max) != self.n_max or self.n_max < 0:
            out.append(f"n_max must be an integer >= 0, got {self.n_max}")
        if not self.horizon > 0:
            out.append(f"horizon must be positive, got {self.horizon}")
        return out

    def replace(self, **changes) -> "ModelParams":
        kw = dict(eps=self.eps, alpha=self.alpha, n=self.n, n_max=self.n_max, horizon=self.horizon)
        kw.update(changes)
        return ModelParams(**kw)


def branch_sqrt(z):
    """Square root with ``sqrt(r e^{i theta}) = sqrt(r) e^{i theta / 2}``, ``theta in (-pi, pi]``.

    Differs from a bare principal root only on the negative real axis with a
    signed zero imaginary part, which is sent to the upper half plane.
    """
    z = np.asarray(z, dtype=complex)
    w = np.empty_like(z)
    w.real = z.real
    w.imag = z.imag + 0.0
    out = np.sqrt(w)
    return complex(out) if out.ndim == 0 else out


def _bracket2(k) -> np.ndarray | float:
    k = np.asarray(k, dtype=float)
    if k.shape and k.shape[-1] == 2:
        return 1.0 + (k ** 2).sum(axis=-1)
    raise ValueError("k must be a mode (k1, k2) or an array of modes")


def discriminant_root(eps: float, alpha: complex, bracket2):
    """``sqrt(alpha^2 - eps^2 <k>^2)`` on the branch above."""
    return branch_sqrt(alpha * alpha - eps * eps * np.asarray(bracket2, dtype=float))


def lambda_from_bracket(eps: float, alpha: complex, bracket2):
    """``lambda^(+/-) = (-alpha +/- sqrt(alpha^2 - eps^2 <k>^2)) / eps^2``.

    ``lambda^+`` is evaluated as ``-<k>^2 / (alpha + root)``, which equals the
    defining formula but avoids cancellation when ``eps`` is small.
    """
    root = discriminant_root(eps, alpha, bracket2)
    lam_minus = -(alpha + root) / (eps * eps)
    lam_plus = -np.asarray(bracket2, dtype=float) / (alpha + root)
    return lam_plus, lam_minus


def lambda_pm(p: ModelParams, k):
    """Roots of ``eps^2 lam^2 + 2 alpha lam + <k>^2 = 0`` for mode(s) ``k``."""
    lp, lm = lambda_from_bracket(p.eps, p.alpha, _bracket2(k))
    if np.ndim(lp) == 0:
        return complex(lp), complex(lm)
    return lp, lm


def beta_shift(p: ModelParams) -> complex:
    """``beta = (alpha - sqrt(alpha^2 - eps^2)) / eps^2`` computed as ``1 / (alpha + sqrt(...))``."""
    beta = 1.0 / (p.alpha + discriminant_root(p.eps, p.alpha, 1.0))
    beta = complex(beta)
    assert beta.real >= 0.0
    assert abs(p.eps * beta) <= p.eps / p.alpha.real * (1 + 1e-12)
    return beta


# ------------------------------------------------------------- bound probes


def _entry(item: str, statement: str, s: np.ndarray, margin: np.ndarray, applies=True) -> dict:
    if not applies or margin.size == 0:
        return {
            "item": item,
            "statement": statement,
            "grid_size": int(margin.size),
            "pass": None,
            "worst_margin": None,
            "argmin_s": None,
        }
    i = int(np.argmin(margin))
    return {
        "item": item,
        "statement": statement,
        "grid_size": int(margin.size),
        "pass": bool(margin[i] >= 0.0),
        "worst_margin": float(margin[i]),
        "argmin_s": float(s[i]),
    }


def probe_base_bounds(alpha: complex, s_grid) -> list:
    """Check the elementary bounds on ``r(s) = sqrt(alpha^2 - s)`` over ``s_grid``.

    Each entry reports the smallest slack (``>= 0`` means the bound holds) and
    where it occurs.  Items:

    * ``1``   ``0 < Re r(s) <= Re alpha``
    * ``1m``  ``s -> Re r(s)`` strictly decreasing along the sorted grid
    * ``2``   ``|r(s)| >= sqrt(2 |Re alpha Im alpha|)``
    * ``3``   ``|sqrt(s) / r(s)| <= sqrt(1 + |alpha|^2 / (2 |Re alpha Im alpha|))``
    * ``4``   ``Re(-alpha + r(s)) <= -C (s ^ 1)`` with ``C = Re alpha / (2|alpha|^2 + 1)``
    * ``5h``  ``|r(s) - alpha + s / (2 alpha)| <= 8 s^2 / |alpha|^3`` for ``s < |alpha|^2 / 2``
    * ``5g``  ``|r(s) - i sqrt(s)| <= 6 |alpha|^2 / sqrt(s)`` for ``s > 2 |alpha|^2``

    For ``Im alpha < 0`` the large-``s`` root tends to ``-i sqrt(s)``; item ``5g``
    then compares against that conjugate expansion.
    Items needing ``Im alpha != 0`` are reported with ``pass = None`` otherwise.
    """
    alpha = complex(alpha)
    if not alpha.real > 0:
        raise ValueError("alpha must have positive real part")
    s = np.sort(np.asarray(s_grid, dtype=float))
    if s.size == 0 or np.any(s <= 0):
        raise ValueError("s_grid must be a nonempty set of positive reals")
    r = branch_sqrt(alpha * alpha - s)
    a1, a2 = alpha.real, alpha.imag
    cross = 2.0 * abs(a1 * a2)
    mod2 = abs(alpha) ** 2
    out = []

    out.append(_entry("1", "0 < Re sqrt(alpha^2-s) <= Re alpha", s, np.minimum(r.real, a1 - r.real)))
    # the lower bound is strict
    out[-1]["pass"] = bool(out[-1]["pass"] and np.all(r.real > 0))
    dec = -np.diff(r.real)
    out.append(_entry("1m", "Re sqrt(alpha^2-s) strictly decreasing", s[1:], dec if dec.size else np.array([1.0])))
    out[-1]["pass"] = bool(dec.size == 0 or np.all(dec > 0))

    has_im = a2 != 0
    if has_im:
        out.append(_entry("2", "|sqrt(alpha^2-s)| >= sqrt(2|Re a Im a|)", s, np.abs(r) - math.sqrt(cross)))
        bound3 = math.sqrt(1.0 + mod2 / cross)
        out.append(_entry("3", "|sqrt(s)/sqrt(alpha^2-s)| <= sqrt(1+|a|^2/(2|Re a Im a|))", s, bound3 - np.sqrt(s) / np.abs(r)))
    else:
        out.append(_entry("2", "|sqrt(alpha^2-s)| >= sqrt(2|Re a Im a|)", s, np.array([]), applies=False))
        out.append(_entry("3", "|sqrt(s)/sqrt(alpha^2-s)| <= sqrt(1+|a|^2/(2|Re a Im a|))", s, np.array([]), applies=False))

    c_alpha = a1 / (2.0 * mod2 + 1.0)
    out.append(_entry("4", "Re(-alpha+sqrt(alpha^2-s)) <= -C_alpha min(s,1)", s, -c_alpha * np.minimum(s, 1.0) - (r.real - a1)))

    low = s < mod2 / 2.0
    h = r[low] - alpha + s[low] / (2.0 * alpha)
    out.append(_entry("5h", "|h(s,alpha)| <= 8 s^2/|alpha|^3 for s < |alpha|^2/2", s[low], 8.0 * s[low] ** 2 / abs(alpha) ** 3 - np.abs(h)))
    high = s > 2.0 * mod2
    sign = 1.0 if a2 >= 0 else -1.0
    g = r[high] - sign * 1j * np.sqrt(s[high])
    out.append(_entry("5g", "|g(s,alpha)| <= 6|alpha|^2/sqrt(s) for s > 2|alpha|^2", s[high], 6.0 * mod2 / np.sqrt(s[high]) - np.abs(g)))
    return out
