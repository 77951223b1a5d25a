# SPDX-License-Identifier: Apache-2.0
"""Python access to the sargcp geodesy, statistics, point target analysis and pipeline."""

from ._core import (
    BoxplotBounds,
    ConvergenceError,
    DomainError,
    Error,
    IllConditionedError,
    ParseError,
    PtaResult,
    adjusted_boxplot_bounds,
    analyze_chip,
    ecef_to_geodetic,
    geodetic_to_ecef,
    geodetic_to_map,
    map_to_geodetic,
    medcouple,
    run_all,
    run_stage,
    screen_series,
    simulate,
    utm_zone_for,
)

STAGES = ("detect", "pta", "screen", "correct", "solve", "report")

__all__ = [
    "BoxplotBounds",
    "ConvergenceError",
    "DomainError",
    "Error",
    "IllConditionedError",
    "ParseError",
    "PtaResult",
    "STAGES",
    "adjusted_boxplot_bounds",
    "analyze_chip",
    "ecef_to_geodetic",
    "geodetic_to_ecef",
    "geodetic_to_map",
    "map_to_geodetic",
    "medcouple",
    "run_all",
    "run_stage",
    "screen_series",
    "simulate",
    "utm_zone_for",
]
