"""Device-aware HVAC control toolkit.

Bilinear building thermal simulation, a simplified PMV comfort model, a
reactive desk comfort device, a two-time-scale MPC over a nonconvex NLP
solved by multistart augmented Lagrangian, and a closed-loop experiment
harness comparing device-aware and conventional planning.
"""

from .building import BuildingConfig, RoomKind, ThermalParams, single_zone
from .comfort import (
    ComfortBand,
    FitReport,
    PmvContext,
    SimplifiedPmvModel,
    SUMMER_MODEL,
    WINTER_MODEL,
    fit_simplified,
    pmv_full,
    pmv_simplified,
)
from .mpc import HourClock, MpcConfig, Variant, build_problem, extract_plan
from .nlp import SolverSettings, SolveStatus, solve_multistart, solve_single

__version__ = "0.1.0"
