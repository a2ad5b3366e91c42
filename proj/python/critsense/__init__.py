"""Fidelity susceptibilities of the bosonic Josephson junction."""

from ._core import (
    EigensolverError,
    ModelParams,
    OrderParameterFamily,
    analyze_family,
    bhattacharyya,
    critical_point,
    fit_power_law,
    jz_distribution,
    scan,
    spectrum,
    susceptibilities,
    uhlmann,
    uniform_grid,
)

__all__ = [
    "EigensolverError",
    "ModelParams",
    "OrderParameterFamily",
    "analyze_family",
    "bhattacharyya",
    "critical_point",
    "fit_power_law",
    "jz_distribution",
    "scan",
    "spectrum",
    "susceptibilities",
    "uhlmann",
    "uniform_grid",
]
__version__ = "0.1.0"
