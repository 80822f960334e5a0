"""Constrained higher-order binary optimization with Ising-machine solvers."""
from .constrained import AlmConfig, ConstrainedProblem, PenaltyConfig, solve_alm, solve_penalty
from .hobo import HoboConfig, QuadraticFormComposite, minimize_hobo
from .model import (
    Assignment,
    BinaryPolynomial,
    IsingModel,
    QuboModel,
    VariableDomain,
    boolean_to_ising,
    dumps_polynomial,
    ising_to_boolean,
    loads_polynomial,
)
from .quadratize import quadratize
from .solvers import DsbConfig, SaConfig, solve_dsb, solve_exhaustive, solve_sa
from .swipt import ScenarioConfig, SwiptInstance, generate_instance, to_constrained_problem

__version__ = "0.1.0"

__all__ = [
    "AlmConfig",
    "Assignment",
    "BinaryPolynomial",
    "ConstrainedProblem",
    "DsbConfig",
    "HoboConfig",
    "IsingModel",
    "PenaltyConfig",
    "QuadraticFormComposite",
    "QuboModel",
    "SaConfig",
    "ScenarioConfig",
    "SwiptInstance",
    "VariableDomain",
    "boolean_to_ising",
    "dumps_polynomial",
    "generate_instance",
    "ising_to_boolean",
    "loads_polynomial",
    "minimize_hobo",
    "quadratize",
    "solve_alm",
    "solve_dsb",
    "solve_exhaustive",
    "solve_penalty",
    "solve_sa",
    "to_constrained_problem",
]
