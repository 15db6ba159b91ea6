"""Spectral Galerkin solvers and experiments for damped Klein-Gordon SPDEs on the 2-torus."""

__version__ = "0.1.0"

from .lattice import FrequencyLattice, PairState, SpectralField  # noqa: E402
from .symbols import ModelParams  # noqa: E402
from .rng import NoiseStream  # noqa: E402

__all__ = ["FrequencyLattice", "PairState", "SpectralField", "ModelParams", "NoiseStream", "__version__"]
