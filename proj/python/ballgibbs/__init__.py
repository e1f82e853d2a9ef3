"""Spectral Galerkin flows and Gibbs ensembles on the unit ball."""

from ._core import (
    ConfigError,
    DimensionError,
    EigenBasis,
    NumericalError,
    __version__,
    config_hash,
    evolve,
    gibbs_weight,
    hamiltonian,
    mass,
    quartic_coupling,
    run,
    sample_free,
    sample_seed,
    sobolev_norm,
)

__all__ = [
    "ConfigError",
    "DimensionError",
    "EigenBasis",
    "NumericalError",
    "__version__",
    "config_hash",
    "evolve",
    "gibbs_weight",
    "hamiltonian",
    "mass",
    "quartic_coupling",
    "run",
    "sample_free",
    "sample_seed",
    "sobolev_norm",
]
