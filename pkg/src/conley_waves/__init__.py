"""Spectra, parabolic flows and standing-wave existence checks for 1D Schrödinger problems."""

from importlib.metadata import PackageNotFoundError, version as _version

try:
    __version__ = _version("artifact")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.1.0"

from .grid import Field, Grid, build_grid
from .spectral import SplitPotential, assemble, eigen_lowest, morse_count, projections
from .nonlinear import NonlinearitySpec
from .semiflow import EvolvePolicy, FlowSpec, evolve
from .config import ConfigError, RunConfig, parse_config, serialize_config

__all__ = [
    "ConfigError",
    "EvolvePolicy",
    "Field",
    "FlowSpec",
    "Grid",
    "NonlinearitySpec",
    "RunConfig",
    "SplitPotential",
    "assemble",
    "build_grid",
    "eigen_lowest",
    "evolve",
    "morse_count",
    "parse_config",
    "projections",
    "serialize_config",
    "__version__",
]
