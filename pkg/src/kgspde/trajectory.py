"""Recorded trajectories and their CSV / binary dumps."""

from __future__ import annotations

import io
import json
from dataclasses import dataclass, field

import numpy as np

from .lattice import FrequencyLattice, PairState, SpectralField


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Time samples of one or two spectral components for a batch of paths.

    ``psi`` (and ``phi`` when present) have shape ``(len(times), batch, K)``.
    ``alive`` has shape ``(batch,)``; ``blowup_step`` holds the step at which a
    path was flagged, or -1.
    """

    lattice: FrequencyLattice
    times: np.ndarray
    psi: np.ndarray
    phi: np.ndarray | None = None
    blowup_step: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    @property
    def count(self) -> int:
        return self.psi.shape[1]

    @property
    def alive(self) -> np.ndarray:
        if self.blowup_step is None:
            return np.ones(self.count, dtype=bool)
        return self.blowup_step < 0

    def field(self, i: int) -> SpectralField:
        return SpectralField(self.lattice, self.psi[i])

    def state(self, i: int) -> PairState:
        if self.phi is None:
            raise ValueError("trajectory has no second component")
        return PairState(SpectralField(self.lattice, self.psi[i]), SpectralField(self.lattice, self.phi[i]))

    def final(self) -> PairState:
        return self.state(len(self.times) - 1)

    def header_lines(self) -> list:
        meta = {"n_max": self.lattice.n_max, **self.meta}
        return ["# " + json.dumps(meta, sort_keys=True, default=str)]

    def to_csv(self) -> str:
        """Rows ``t, path, k1, k2, re_z, im_z[, re_y, im_y]`` with the run metadata as a comment."""
        buf = io.StringIO()
        for line in self.header_lines():
            buf.write(line + "\n")
        cols = ["t", "path", "k1", "k2", "re_z", "im_z"]
        if self.phi is not None:
            cols += ["re_y", "im_y"]
        buf.write(",".join(cols) + "\n")
        modes = self.lattice.modes
        for it, t in enumerate(self.times):
            for b in range(self.count):
                for j, (k1, k2) in enumerate(modes):
                    z = self.psi[it, b, j]
                    row = [repr(float(t)), str(b), str(k1), str(k2), repr(float(z.real)), repr(float(z.imag))]
                    if self.phi is not None:
                        y = self.phi[it, b, j]
                        row += [repr(float(y.real)), repr(float(y.imag))]
                    buf.write(",".join(row) + "\n")
        return buf.getvalue()

    def to_npz_bytes(self) -> bytes:
        buf = io.BytesIO()
        arrays = {"times": self.times, "psi": self.psi, "modes": self.lattice.modes}
        if self.phi is not None:
            arrays["phi"] = self.phi
        if self.blowup_step is not None:
            arrays["blowup_step"] = self.blowup_step
        meta = json.dumps({"n_max": self.lattice.n_max, **self.meta}, sort_keys=True, default=str)
        np.savez(buf, meta=np.array(meta), **arrays)
        return buf.getvalue()
