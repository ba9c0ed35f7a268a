"""Stochastic bifurcation analysis through mean orbits of the Fokker-Planck equation."""

__version__ = "0.1.0"

from .bifurcation import BifurcationDiagram, sweep
from .equilibria import EquilibriumScan, MeanEquilibrium, ScanConfig, detect_equilibria
from .errors import ConfigError, NumericalError, OutputError, StochBifError
from .fpe import DensityField, Grid, assemble_operator, build_graded_grid, build_grid, delta_init, evolve, step
from .montecarlo import EnsembleConfig, em_mean_orbit
from .orbits import MeanOrbit, first_moment, mean_orbit, mean_orbits
from .systems import SdeSystem, lookup_builtin, parse_polynomial_system

__all__ = [
    "BifurcationDiagram",
    "ConfigError",
    "DensityField",
    "EnsembleConfig",
    "EquilibriumScan",
    "Grid",
    "MeanEquilibrium",
    "MeanOrbit",
    "NumericalError",
    "OutputError",
    "ScanConfig",
    "SdeSystem",
    "StochBifError",
    "assemble_operator",
    "build_grid",
    "build_graded_grid",
    "delta_init",
    "detect_equilibria",
    "em_mean_orbit",
    "evolve",
    "first_moment",
    "lookup_builtin",
    "mean_orbit",
    "mean_orbits",
    "parse_polynomial_system",
    "step",
    "sweep",
]
