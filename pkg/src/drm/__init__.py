"""Simulations of a periodically driven, dissipative nonlinear rotor:
classical phase-space structure, Lindblad dynamics on the momentum lattice,
Floquet/Liouvillian spectra, and metastable limit-cycle lifetimes."""

from .model import (ConfigError, ModelParams, ResonanceGeometry, RunConfig,
                    derive_geometry, load_config)

__all__ = [
    "ConfigError", "ModelParams", "ResonanceGeometry", "RunConfig",
    "derive_geometry", "load_config",
]

__version__ = "0.1.0"
