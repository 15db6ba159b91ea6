"""Complex Hermite polynomials and Wick powers of band-limited fields.

``H_{m,n}(z; sigma)`` is defined by the generating function
``exp(t conj(z) + conj(t) z - sigma t conj(t)) = sum conj(t)^m t^n / (m! n!) H_{m,n}(z; sigma)``
and evaluated through its closed form
``H_{m,n}(z; sigma) = sum_j (-sigma)^j j! C(m,j) C(n,j) z^(m-j) conj(z)^(n-j)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .lattice import (
    TWO_PI,
    FrequencyLattice,
    SpectralField,
    alias_free_size,
    fast_even_size,
    to_physical,
    to_spectral,
)


@dataclass(frozen=True)
class HermiteSpec:
    m: int
    n: int
    sigma: float

    def __post_init__(self):
        if self.m < 0 or self.n < 0:
            raise ValueError("Hermite degrees must be nonnegative")
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")

    def __call__(self, z):
        return hermite_eval(self.m, self.n, self.sigma, z)


def c_n_exact(n_max: int) -> Fraction:
    """``sum_{|k| <= N} 2 / (1 + |k|^2)`` as an exact fraction."""
    if n_max < 0:
        raise ValueError("N must be nonnegative")
    lat = FrequencyLattice(n_max)
    total = Fraction(0)
    for k2 in lat.norm2.astype(int):
        total += Fraction(2, 1 + int(k2))
    return total


def c_n(n_max: int) -> float:
    """Lattice sum ``C_N = sum_{|k| <= N} 2 / <k>^2``."""
    return float(c_n_exact(n_max))


def pointwise_variance(n_max: int) -> float:
    """``E |Pi_N Z(x)|^2`` under ``Z ~ mu_0``: ``C_N / (2 pi)^2`` in the ``e_k`` normalization.

    This is the renormalization variance used for all physical-space Wick powers.
    """
    return c_n(n_max) / TWO_PI ** 2


def hermite_eval(m: int, n: int, sigma: float, z):
    """``H_{m,n}(z; sigma)`` (vectorized over ``z``).

    Evaluated as ``z^(m-n) P(|z|^2)`` (or its conjugate form) so the sum runs in
    real arithmetic.
    """
    if m < 0 or n < 0:
        raise ValueError("Hermite degrees must be nonnegative")
    z = np.asarray(z, dtype=complex)
    r = z.real * z.real + z.imag * z.imag
    lo = min(m, n)
    poly = np.zeros(z.shape)
    for j in range(lo + 1):
        # Horner in |z|^2: term j carries |z|^(2(min - j))
        coef = (-sigma) ** j * math.factorial(j) * math.comb(m, j) * math.comb(n, j)
        poly = poly * r + coef
    base = z if m >= n else np.conj(z)
    out = poly.astype(complex)
    for _ in range(abs(m - n)):
        out = out * base
    return complex(out) if out.ndim == 0 else out


def hermite_translation_check(m: int, n: int, sigma: float, z, w) -> float:
    """Scaled residual of ``H_{m,n}(z+w) = sum C(m,a) C(n,b) w^(m-a) conj(w)^(n-b) H_{a,b}(z)``."""
    lhs = hermite_eval(m, n, sigma, z + w)
    rhs = 0j
    for a in range(m + 1):
        for b in range(n + 1):
            rhs += math.comb(m, a) * math.comb(n, b) * w ** (m - a) * np.conj(w) ** (n - b) * hermite_eval(a, b, sigma, z)
    return float(abs(lhs - rhs) / max(1.0, abs(lhs)))


def hermite_wirtinger_check(m: int, n: int, sigma: float, z, h: float = 1e-5) -> float:
    """Residual of ``d/d(conj z) H_{m,n} = n H_{m,n-1}`` by central differences.

    ``d/d(conj z) = (d/dx + i d/dy) / 2``.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    dx = (hermite_eval(m, n, sigma, z + h) - hermite_eval(m, n, sigma, z - h)) / (2 * h)
    dy = (hermite_eval(m, n, sigma, z + 1j * h) - hermite_eval(m, n, sigma, z - 1j * h)) / (2 * h)
    fd = 0.5 * (dx + 1j * dy)
    return float(abs(fd - n * hermite_eval(m, n - 1, sigma, z)))


def generating_function_check(z: complex, sigma: float, t: complex, order: int = 6) -> float:
    """``|sum_{m,n <= order} conj(t)^m t^n / (m! n!) H_{m,n}(z) - exp(t conj z + conj t z - sigma |t|^2)|``."""
    total = 0j
    for m in range(order + 1):
        for n in range(order + 1):
            total += np.conj(t) ** m * t ** n / (math.factorial(m) * math.factorial(n)) * hermite_eval(m, n, sigma, z)
    exact = np.exp(t * np.conj(z) + np.conj(t) * z - sigma * t * np.conj(t))
    return float(abs(total - exact))


def correlated_pair(sigma_x: float, sigma_y: float, cross: complex, size: int, rng: np.random.Generator):
    """Jointly circular ``(X, Y)`` with ``E|X|^2 = sigma_x``, ``E|Y|^2 = sigma_y``, ``E[conj(X) Y] = cross``."""
    cross = complex(cross)
    if sigma_x <= 0 or sigma_y < 0:
        raise ValueError("variances must be positive")
    rest = sigma_y - abs(cross) ** 2 / sigma_x
    if rest < -1e-12 * max(1.0, sigma_y):
        raise ValueError("infeasible covariance: |E[conj(X) Y]|^2 exceeds sigma_x sigma_y")
    g = rng.standard_normal((4, size)) * np.sqrt(0.5)
    xi1 = g[0] + 1j * g[1]
    xi2 = g[2] + 1j * g[3]
    x = np.sqrt(sigma_x) * xi1
    y = (cross / sigma_x) * x + np.sqrt(max(rest, 0.0)) * xi2
    return x, y


def orthogonality_mc(m: int, n: int, k: int, l: int, sigma_x: float, sigma_y: float, cross: complex,
                     samples: int, rng: np.random.Generator) -> tuple:
    """Monte-Carlo ``E[H_{m,n}(X; sigma_x) H_{k,l}(Y; sigma_y)]`` with its standard error.

    Returns ``(estimate, standard_error, exact)`` where ``exact`` is
    ``1{m=l, n=k} m! n! E[X conj Y]^m E[conj X Y]^n`` (read off the generating
    function; ``cross`` is ``E[conj X Y]``).
    """
    x, y = correlated_pair(sigma_x, sigma_y, cross, samples, rng)
    v = hermite_eval(m, n, sigma_x, x) * hermite_eval(k, l, sigma_y, y)
    est = complex(v.mean())
    se = float(np.sqrt(np.mean(np.abs(v - est) ** 2) / samples))
    exact = 0j
    if m == l and n == k:
        exact = math.factorial(m) * math.factorial(n) * np.conj(complex(cross)) ** m * complex(cross) ** n
    return est, se, complex(exact)


def _check_grid(m: int, need: int):
    if m < need:
        raise ValueError(f"grid of {m} points is too small for an alias-free product (need {need})")


def wick_power_field(z: SpectralField, m: int, n: int, sigma: float, out_lattice: FrequencyLattice | None = None,
                     grid_size: int | None = None) -> SpectralField:
    """Lattice coefficients of ``H_{m,n}(z(x); sigma)``.

    The product is evaluated on a grid that is alias-free for the requested
    output lattice, so the projection is exact.  ``out_lattice`` defaults to the
    input lattice; passing one of radius ``(m+n) N`` keeps the full product.
    """
    out = z.lattice if out_lattice is None else out_lattice
    deg = m + n
    need = deg * z.lattice.n_max + out.n_max + 1
    grid = alias_free_size(z.lattice.n_max, deg, out.n_max) if grid_size is None else int(grid_size)
    _check_grid(grid, need)
    vals = hermite_eval(m, n, sigma, to_physical(z, grid))
    return to_spectral(vals, out)


def wick_table(z: SpectralField, n: int, sigma: float, exact: bool = True) -> dict:
    """``{(k, l): :z^k conj(z)^l:}`` for ``k <= n+1``, ``l <= n``.

    With ``exact=True`` entry ``(k, l)`` lives on the lattice of radius ``(k+l) N``
    and represents the polynomial without truncation.
    """
    table = {}
    big = z.lattice.n_max
    for k in range(n + 2):
        for l in range(n + 1):
            lat = FrequencyLattice((k + l) * big) if exact else z.lattice
            table[(k, l)] = wick_power_field(z, k, l, sigma, out_lattice=lat)
    return table


def renormalized_nonlinearity(u: SpectralField, table: dict, n: int, grid_size: int | None = None) -> SpectralField:
    """``Pi_N sum_{k,l} C(n+1,k) C(n,l) u^(n+1-k) conj(u)^(n-l) :Z^k conj(Z)^l:``.

    ``table`` maps ``(k, l)`` to spectral fields on lattices of any radius.
    """
    need = 0
    for k in range(n + 2):
        for l in range(n + 1):
            if (k, l) not in table:
                raise KeyError(f"Wick table has no entry for (k, l) = {(k, l)}")
            radius = (2 * n + 1 - k - l) * u.lattice.n_max + table[(k, l)].lattice.n_max
            need = max(need, radius + u.lattice.n_max + 1, 2 * table[(k, l)].lattice.n_max + 2)
    grid = fast_even_size(max(need, 2 * u.lattice.n_max + 2)) if grid_size is None else int(grid_size)
    _check_grid(grid, need)
    uu = to_physical(u, grid)
    ub = np.conj(uu)
    total = np.zeros_like(uu)
    for k in range(n + 2):
        for l in range(n + 1):
            w = to_physical(table[(k, l)], grid)
            total += math.comb(n + 1, k) * math.comb(n, l) * uu ** (n + 1 - k) * ub ** (n - l) * w
    return to_spectral(total, u.lattice)


def constant_field(lattice: FrequencyLattice, value: complex) -> SpectralField:
    """Field equal to ``value`` everywhere (``fhat(0) = 2 pi value``)."""
    return SpectralField.from_modes(lattice, {(0, 0): TWO_PI * value})
