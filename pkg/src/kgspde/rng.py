"""Counter-based Gaussian noise.

Draws are a pure function of ``(seed, trajectory, step, tag, slot)``.  Trajectories
are grouped in fixed blocks of ``BLOCK`` ids; each ``(seed, block, step, tag)``
selects one Philox key/counter pair, and a trajectory reads its own row of
that block.  Running trajectories in a different order, in different
batches, or in parallel therefore never changes the numbers they see.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

BLOCK = 256
_MASK64 = (1 << 64) - 1

TAG_DYNAMICS = 0
TAG_INITIAL = 1
TAG_AUX = 2


@dataclass(frozen=True)
class NoiseStream:
    """Reproducible source of standard complex normals ``N_c(0, 1)``.

    ``trajectory_id`` is the id of the first trajectory this stream serves;
    batched draws cover ids ``trajectory_id, trajectory_id + 1, ...``.
    """

    seed: int
    trajectory_id: int = 0

    def __post_init__(self):
        if not (0 <= int(self.seed) <= _MASK64):
            raise ValueError("seed must be a 64-bit unsigned integer")
        if int(self.trajectory_id) < 0:
            raise ValueError("trajectory_id must be nonnegative")

    def generator(self, block: int, step: int, tag: int = TAG_DYNAMICS) -> np.random.Generator:
        key = (int(self.seed) & _MASK64) | (int(block) << 64)
        counter = np.array([0, int(step), int(tag), 0], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=key, counter=counter))

    def ids(self, count: int) -> np.ndarray:
        return self.trajectory_id + np.arange(int(count))

    def complex_normals(self, step: int, count: int, width: int, tag: int = TAG_DYNAMICS) -> np.ndarray:
        """Array ``(count, width)`` of independent ``N_c(0, 1)`` variables.

        Row ``i`` belongs to trajectory ``trajectory_id + i``; entry ``(i, j)``
        depends only on ``(seed, trajectory, step, tag, j)`` and ``width``.
        """
        count = int(count)
        if count == 0:
            return np.empty((0, width), dtype=complex)
        first = int(self.trajectory_id)
        b0, b1 = first // BLOCK, (first + count - 1) // BLOCK
        raw = np.empty(((b1 - b0 + 1) * BLOCK, width, 2))
        for j, b in enumerate(range(b0, b1 + 1)):
            raw[j * BLOCK:(j + 1) * BLOCK] = self.generator(b, step, tag).standard_normal((BLOCK, width, 2))
        off = first - b0 * BLOCK
        sel = raw[off:off + count]
        return (sel[..., 0] + 1j * sel[..., 1]) * np.sqrt(0.5)

    def for_trajectory(self, trajectory_id: int) -> "NoiseStream":
        return NoiseStream(self.seed, trajectory_id)
