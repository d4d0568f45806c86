"""Box, half-space, and sparsity constraints as NUV priors in linear Gaussian models.

The package is organized around a small Gaussian message algebra
(:mod:`nuvbox.gaussian`), closed-form NUV constraint nodes
(:mod:`nuvbox.priors`), a single-variable coordinate-ascent testbed
(:mod:`nuvbox.scalar`), an exact linear state-space smoother
(:mod:`nuvbox.ssm`), convex-polyhedron output constraints
(:mod:`nuvbox.polyhedron`), and config-driven application scenarios
(:mod:`nuvbox.scenarios`) exposed through the ``nuvbox`` CLI
(:mod:`nuvbox.cli`).
"""

from nuvbox.errors import (
    ConfigError,
    DimensionMismatch,
    InconsistentDirac,
    InfeasibleConfig,
    InvalidProblem,
    NonConvergence,
    NotApplicable,
    NuvError,
    UnderdeterminedModel,
)
from nuvbox.gaussian import VARIANCE_FLOOR, GaussianMsg, GaussianVecMsg, multiply, scale_factor
from nuvbox.priors import (
    BinarySpec,
    BoxSpec,
    HalfSpaceSpec,
    LaplaceSpec,
    NuvState,
    Side,
    binary_message,
    binary_update,
    box_log_scale,
    box_message,
    box_update,
    cost,
    halfspace_update,
    laplace_update,
)
from nuvbox.scalar import (
    ScalarProblem,
    SolveReport,
    brute_force_map,
    characteristic_sweep,
    feasibility_threshold,
    scalar_map_solve,
)
from nuvbox.ssm import FactorSet, LinearSSM, Posterior, dense_solve, lowpass_model, simulate, smooth
from nuvbox.polyhedron import PolyhedronSpec, polyhedron_cost, polyhedron_update
from nuvbox.scenarios import ScenarioConfig, ScenarioResult, builtin_scenarios, constraint_report, run_scenario

__version__ = "0.1.0"

__all__ = [
    "BinarySpec",
    "BoxSpec",
    "ConfigError",
    "DimensionMismatch",
    "FactorSet",
    "GaussianMsg",
    "GaussianVecMsg",
    "HalfSpaceSpec",
    "InconsistentDirac",
    "InfeasibleConfig",
    "InvalidProblem",
    "LaplaceSpec",
    "LinearSSM",
    "NonConvergence",
    "NotApplicable",
    "NuvError",
    "NuvState",
    "PolyhedronSpec",
    "Posterior",
    "ScalarProblem",
    "ScenarioConfig",
    "ScenarioResult",
    "Side",
    "SolveReport",
    "UnderdeterminedModel",
    "VARIANCE_FLOOR",
    "binary_message",
    "binary_update",
    "box_log_scale",
    "box_message",
    "box_update",
    "brute_force_map",
    "builtin_scenarios",
    "characteristic_sweep",
    "constraint_report",
    "cost",
    "dense_solve",
    "feasibility_threshold",
    "halfspace_update",
    "laplace_update",
    "lowpass_model",
    "multiply",
    "polyhedron_cost",
    "polyhedron_update",
    "run_scenario",
    "scalar_map_solve",
    "scale_factor",
    "simulate",
    "smooth",
]
