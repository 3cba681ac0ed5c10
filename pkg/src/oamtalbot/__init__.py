"""Wave-optics simulation and analysis of Talbot self-imaging for spin-orbit OAM lattices.

The package splits into five areas:

- ``grid_field``: sampled planes, scalar/Jones fields, elementary operations
- ``spinorbit``: prism-pair state preparation and vortex-lattice diagnostics
- ``propagation``: paraxial spectral propagation, lenses, carpets
- ``analysis``: spacing/shift/SNR/chirality estimators on intensity images
- ``cli``: batch runner with reproducible manifests and rendered figures
"""

__version__ = "0.1.0"

from . import analysis, config, grid_field, manifest, pgmio, propagation, selftest, spinorbit  # noqa: F401

__all__ = [
    "analysis",
    "config",
    "grid_field",
    "manifest",
    "pgmio",
    "propagation",
    "selftest",
    "spinorbit",
    "__version__",
]
