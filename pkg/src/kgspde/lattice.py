"""Frequency lattice, Fourier transforms on the 2-torus, and norms.

Convention: functions on T^2 = [0, 2pi)^2 are expanded in the orthonormal
basis ``e_k(x) = exp(i k.x) / (2 pi)``, so ``f(x) = sum_k fhat(k) e_k(x)`` and
``fhat(k) = <f, e_k>``.  Lattice modes are the integer vectors with Euclidean
length at most ``N``, ordered lexicographically in ``(k1, k2)``.
"""

from __future__ import annotations

import json
import math
import os
import struct
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.fft

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class FrequencyLattice:
    """Modes ``{k in Z^2 : |k| <= n_max}`` plus a physical grid size.

    ``grid_size`` is the number of grid points per axis used by the
    transforms; it defaults to ``2 * n_max + 2`` and may be raised for
    nonlinear work.
    """

    n_max: int
    grid_size: int = 0

    def __post_init__(self):
        if int(self.n_max) != self.n_max or self.n_max < 0:
            raise ValueError(f"n_max must be a nonnegative integer, got {self.n_max!r}")
        object.__setattr__(self, "n_max", int(self.n_max))
        minimum = 2 * self.n_max + 2
        if self.grid_size == 0:
            object.__setattr__(self, "grid_size", minimum)
        elif self.grid_size < minimum:
            raise ValueError(
                f"grid_size {self.grid_size} does not resolve modes up to N={self.n_max}"
                f" (need at least {minimum})"
            )

    @cached_property
    def modes(self) -> np.ndarray:
        n = self.n_max
        ks = [(a, b) for a in range(-n, n + 1) for b in range(-n, n + 1) if a * a + b * b <= n * n]
        out = np.array(ks, dtype=np.int64).reshape(-1, 2)
        out.setflags(write=False)
        return out

    @property
    def size(self) -> int:
        return len(self.modes)

    @cached_property
    def norm2(self) -> np.ndarray:
        """``|k|^2`` per mode."""
        out = (self.modes ** 2).sum(axis=1).astype(float)
        out.setflags(write=False)
        return out

    @cached_property
    def bracket2(self) -> np.ndarray:
        """``<k>^2 = 1 + |k|^2`` per mode."""
        out = 1.0 + self.norm2
        out.setflags(write=False)
        return out

    def bracket(self, s: float) -> np.ndarray:
        """``<k>^s`` per mode."""
        return self.bracket2 ** (0.5 * s)

    @cached_property
    def _index(self) -> dict:
        return {(int(a), int(b)): i for i, (a, b) in enumerate(self.modes)}

    def index_of(self, k) -> int:
        try:
            return self._index[(int(k[0]), int(k[1]))]
        except KeyError:
            raise KeyError(f"mode {tuple(k)} is not on the lattice with N={self.n_max}") from None

    @cached_property
    def neg_index(self) -> np.ndarray:
        """Position of ``-k`` for each mode ``k``."""
        return np.array([self._index[(-int(a), -int(b))] for a, b in self.modes])

    def with_grid(self, grid_size: int) -> "FrequencyLattice":
        return FrequencyLattice(self.n_max, grid_size)

    def embed_indices(self, other: "FrequencyLattice") -> np.ndarray:
        """Positions of this lattice's modes inside a larger lattice ``other``."""
        if other.n_max < self.n_max:
            raise ValueError("target lattice is smaller than the source lattice")
        return np.array([other.index_of(k) for k in self.modes], dtype=np.int64)

    def same_modes(self, other: "FrequencyLattice") -> bool:
        return self.n_max == other.n_max


def _as_coeffs(coeffs, lattice: FrequencyLattice) -> np.ndarray:
    arr = np.array(coeffs, dtype=np.complex128)
    if arr.ndim == 0 or arr.shape[-1] != lattice.size:
        raise ValueError(
            f"coefficient array shape {arr.shape} does not end in the mode count {lattice.size}"
        )
    if not np.all(np.isfinite(arr)):
        raise ValueError("coefficients must be finite")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Fourier coefficients over a lattice.  Leading axes, if any, are batch axes."""

    lattice: FrequencyLattice
    coeffs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "coeffs", _as_coeffs(self.coeffs, self.lattice))

    @classmethod
    def zeros(cls, lattice: FrequencyLattice, batch: tuple = ()) -> "SpectralField":
        return cls(lattice, np.zeros(tuple(batch) + (lattice.size,), dtype=complex))

    @classmethod
    def from_modes(cls, lattice: FrequencyLattice, values: dict) -> "SpectralField":
        c = np.zeros(lattice.size, dtype=complex)
        for k, v in values.items():
            c[lattice.index_of(k)] = v
        return cls(lattice, c)

    @property
    def batch_shape(self) -> tuple:
        return self.coeffs.shape[:-1]

    def __getitem__(self, k) -> complex:
        return self.coeffs[..., self.lattice.index_of(k)]

    def _check(self, other: "SpectralField"):
        if not self.lattice.same_modes(other.lattice):
            raise ValueError("fields live on different lattices")

    def __add__(self, other: "SpectralField") -> "SpectralField":
        self._check(other)
        return SpectralField(self.lattice, self.coeffs + other.coeffs)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        self._check(other)
        return SpectralField(self.lattice, self.coeffs - other.coeffs)

    def __neg__(self) -> "SpectralField":
        return SpectralField(self.lattice, -self.coeffs)

    def __mul__(self, scalar) -> "SpectralField":
        return SpectralField(self.lattice, self.coeffs * scalar)

    __rmul__ = __mul__

    def map_coeffs(self, fn) -> "SpectralField":
        return SpectralField(self.lattice, fn(self.coeffs))

    def restrict(self, lattice: FrequencyLattice) -> "SpectralField":
        """Projection onto a lattice with ``n_max`` at most this one's."""
        idx = lattice.embed_indices(self.lattice)
        return SpectralField(lattice, self.coeffs[..., idx])

    def embed(self, lattice: FrequencyLattice) -> "SpectralField":
        """Zero-extension onto a larger lattice."""
        idx = self.lattice.embed_indices(lattice)
        out = np.zeros(self.batch_shape + (lattice.size,), dtype=complex)
        out[..., idx] = self.coeffs
        return SpectralField(lattice, out)

    def reflect_conj(self) -> "SpectralField":
        """Coefficients of the complex conjugate function: ``conj(fhat(-k))``."""
        return SpectralField(self.lattice, np.conj(self.coeffs[..., self.lattice.neg_index]))


@dataclass(frozen=True, eq=False)
class PairState:
    """Phase-space point ``(psi, phi)`` with ``phi = eps * d/dt psi``."""

    psi: SpectralField
    phi: SpectralField

    def __post_init__(self):
        if not self.psi.lattice.same_modes(self.phi.lattice):
            raise ValueError("psi and phi must share one lattice")
        if self.psi.batch_shape != self.phi.batch_shape:
            raise ValueError("psi and phi batch shapes differ")

    @property
    def lattice(self) -> FrequencyLattice:
        return self.psi.lattice

    @classmethod
    def zeros(cls, lattice: FrequencyLattice, batch: tuple = ()) -> "PairState":
        z = SpectralField.zeros(lattice, batch)
        return cls(z, z)


# ---------------------------------------------------------------- transforms


def _grid_positions(lattice: FrequencyLattice, m: int) -> tuple:
    return lattice.modes[:, 0] % m, lattice.modes[:, 1] % m


def _resolve_grid(lattice: FrequencyLattice, grid_size) -> int:
    m = lattice.grid_size if grid_size is None else int(grid_size)
    if m < 2 * lattice.n_max + 2:
        raise ValueError(
            f"grid of {m} points per axis is too small for N={lattice.n_max}"
            f" (need at least {2 * lattice.n_max + 2})"
        )
    return m


def fft_workers() -> int:
    """Thread count for batched FFTs (``KGSPDE_THREADS``, default 1)."""
    try:
        return max(1, int(os.environ.get("KGSPDE_THREADS", "1")))
    except ValueError:
        return 1


def to_physical(f: SpectralField, grid_size: int | None = None) -> np.ndarray:
    """Values ``sum_k fhat(k) e_k(x_j)`` on the uniform grid ``x_j = 2 pi j / M``.

    Returns an array of shape ``batch + (M, M)``; axis -2 is ``x1``, axis -1 is ``x2``.
    """
    lat = f.lattice
    m = _resolve_grid(lat, grid_size)
    i1, i2 = _grid_positions(lat, m)
    buf = np.zeros(f.batch_shape + (m, m), dtype=complex)
    buf[..., i1, i2] = f.coeffs
    return scipy.fft.ifft2(buf, axes=(-2, -1), workers=fft_workers()) * (m * m / TWO_PI)


def to_spectral(values, lattice: FrequencyLattice) -> SpectralField:
    """Trapezoidal Fourier coefficients of grid values, restricted to ``lattice``.

    Exact when the sampled function is a trigonometric polynomial whose modes
    do not alias onto the lattice on this grid.
    """
    values = np.asarray(values)
    m = values.shape[-1]
    if values.ndim < 2 or values.shape[-2] != m:
        raise ValueError("grid values must end in a square (M, M) block")
    _resolve_grid(lattice, m)
    i1, i2 = _grid_positions(lattice, m)
    spec = scipy.fft.fft2(values, axes=(-2, -1), workers=fft_workers())
    return SpectralField(lattice, spec[..., i1, i2] * (TWO_PI / (m * m)))


def grid_points(m: int) -> np.ndarray:
    return TWO_PI * np.arange(m) / m


def alias_free_size(n_max: int, degree: int, out_n_max: int | None = None) -> int:
    """Smallest FFT-friendly even grid on which the lattice projection of a
    degree-``degree`` product of ``N``-band-limited fields is exact."""
    out = n_max if out_n_max is None else out_n_max
    return fast_even_size(max(degree * n_max + out + 1, 2 * out + 2, 2 * n_max + 2))


def fast_even_size(need: int) -> int:
    """Smallest even FFT-friendly length that is at least ``need``."""
    m = scipy.fft.next_fast_len(int(need))
    while m % 2:
        m = scipy.fft.next_fast_len(m + 1)
    return m


def quadrature(values) -> np.ndarray:
    """Trapezoidal integral over T^2 of grid values (exact for trig polynomials)."""
    values = np.asarray(values)
    m = values.shape[-1]
    return values.sum(axis=(-2, -1)) * (TWO_PI / m) ** 2


# --------------------------------------------------------------------- norms


def sobolev_norm(f: SpectralField, s: float) -> np.ndarray | float:
    """``||f||_{H^s} = (sum_k <k>^{2s} |fhat(k)|^2)^{1/2}``."""
    w = f.lattice.bracket2 ** s
    out = np.sqrt(np.sum(w * np.abs(f.coeffs) ** 2, axis=-1))
    return float(out) if out.ndim == 0 else out


def _smooth_step(t: np.ndarray) -> np.ndarray:
    """C-infinity map of [0, 1] onto [0, 1], 0 below and 1 above."""
    t = np.clip(t, 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(t > 0, np.exp(-1.0 / np.where(t > 0, t, 1.0)), 0.0)
        b = np.where(t < 1, np.exp(-1.0 / np.where(t < 1, 1.0 - t, 1.0)), 0.0)
    return a / (a + b)


def lp_bump(r) -> np.ndarray:
    """Radial bump: 1 on ``r <= 3/4``, 0 on ``r >= 4/3``, smooth in between."""
    r = np.asarray(r, dtype=float)
    return _smooth_step((4.0 / 3.0 - r) / (4.0 / 3.0 - 0.75))


def lp_blocks(lattice: FrequencyLattice) -> tuple:
    """Littlewood-Paley multipliers ``chi_j(k)`` for ``j = -1, 0, ..., J``.

    ``chi_{-1} = chi`` and ``chi_j(k) = chi(k / 2^{j+1}) - chi(k / 2^j)``; the
    blocks sum to one and ``chi_j`` is supported in ``3/4 2^j <= |k| <= 8/3 2^j``.
    Returns ``(js, weights)`` with ``weights`` of shape ``(len(js), K)``.
    """
    r = np.sqrt(lattice.norm2)
    top = -1
    while 0.75 * 2.0 ** (top + 1) < max(r.max(), 0.0):
        top += 1
    js = np.arange(-1, top + 1)
    rows = [lp_bump(r)]
    for j in js[1:]:
        rows.append(lp_bump(r / 2.0 ** (j + 1)) - lp_bump(r / 2.0 ** j))
    return js, np.array(rows)


def besov_norm(f: SpectralField, s: float, r: int = 2, q: float = 2, grid_size: int | None = None):
    """Dyadic Besov norm ``|| (2^{js} ||Delta_j f||_{L^q})_j ||_{l^r}``.

    Supported: ``r = 2`` with ``q = 2`` (computed from coefficients) or
    ``q = inf`` (grid sup of each block).
    """
    if r != 2 or q not in (2, math.inf):
        raise ValueError(f"unsupported Besov indices (q={q}, r={r}); need r=2 and q in {{2, inf}}")
    js, chi = lp_blocks(f.lattice)
    scale = 2.0 ** (js * s)
    if q == 2:
        block = np.sqrt(np.einsum("jk,...k->...j", chi ** 2, np.abs(f.coeffs) ** 2))
    else:
        parts = [
            np.abs(to_physical(f.map_coeffs(lambda c, w=w: c * w), grid_size)).max(axis=(-2, -1))
            for w in chi
        ]
        block = np.stack(parts, axis=-1)
    out = np.sqrt(np.sum((scale * block) ** 2, axis=-1))
    return float(out) if out.ndim == 0 else out


def neg_holder_proxy(f: SpectralField, delta: float, refine: int = 1):
    """Grid sup of ``|<nabla>^{-delta} f|``, a proxy for the ``W^{-delta,inf}`` norm.

    ``refine`` multiplies the default grid size to sample the sup more densely.
    """
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    if refine < 1:
        raise ValueError("refine must be at least 1")
    smoothed = f.map_coeffs(lambda c: c * f.lattice.bracket(-delta))
    vals = np.abs(to_physical(smoothed, f.lattice.grid_size * int(refine)))
    out = vals.max(axis=(-2, -1))
    return float(out) if out.ndim == 0 else out


# ------------------------------------------------------------- serialization

_MAGIC = b"KGSF"


def field_to_json(f: SpectralField) -> str:
    """JSON text ``{"n_max": N, "ordering": ..., "coeffs": [[re, im], ...]}``."""
    if f.batch_shape:
        raise ValueError("only unbatched fields serialize")
    return json.dumps(
        {
            "n_max": f.lattice.n_max,
            "ordering": "lexicographic (k1, k2), |k| <= n_max",
            "coeffs": [[float(c.real), float(c.imag)] for c in f.coeffs],
        }
    )


def field_from_json(text: str, grid_size: int = 0) -> SpectralField:
    doc = json.loads(text)
    lat = FrequencyLattice(int(doc["n_max"]), grid_size)
    c = np.array([complex(a, b) for a, b in doc["coeffs"]], dtype=complex)
    return SpectralField(lat, c)


def field_to_bytes(f: SpectralField) -> bytes:
    """Flat little-endian record: magic, n_max (u32), count (u32), complex128 pairs."""
    if f.batch_shape:
        raise ValueError("only unbatched fields serialize")
    head = _MAGIC + struct.pack("<II", f.lattice.n_max, f.lattice.size)
    return head + np.ascontiguousarray(f.coeffs, dtype="<c16").tobytes()


def field_from_bytes(data: bytes, grid_size: int = 0) -> SpectralField:
    if data[:4] != _MAGIC:
        raise ValueError("not a serialized spectral field")
    n_max, count = struct.unpack("<II", data[4:12])
    lat = FrequencyLattice(n_max, grid_size)
    if count != lat.size:
        raise ValueError("mode count does not match n_max")
    c = np.frombuffer(data[12:], dtype="<c16")
    if len(c) != count:
        raise ValueError("truncated coefficient block")
    return SpectralField(lat, c.astype(complex))
