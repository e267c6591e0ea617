"""Minimal geodesic loops at the pole of a doubly warped product."""

from .arcs import (
    DegenerateTurning,
    GeodesicArc,
    NoTurningPoint,
    RevolutionProfile,
    arc_from_turning,
    half_oscillation,
    turning_radius,
)
from .loops import (
    ClairautTable,
    MinimalLoop,
    SearchExhausted,
    SearchParams,
    loop_table,
    minimal_loop,
    default_workers,
    radius_cap,
)
from .oracle import GridOracleResult, Unreachable, grid_oracle, stencil
from .shooting import BarrierCrossing, ShootResult, shoot_3d

__all__ = [
    "BarrierCrossing",
    "GridOracleResult",
    "ShootResult",
    "Unreachable",
    "default_workers",
    "grid_oracle",
    "shoot_3d",
    "stencil",
    "ClairautTable",
    "DegenerateTurning",
    "GeodesicArc",
    "MinimalLoop",
    "NoTurningPoint",
    "RevolutionProfile",
    "SearchExhausted",
    "SearchParams",
    "arc_from_turning",
    "half_oscillation",
    "loop_table",
    "minimal_loop",
    "radius_cap",
    "turning_radius",
]
