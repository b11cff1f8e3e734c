"""Boundary-crossing asymptotics of random walks: simulation, exact oracles and integral tests."""

__version__ = "0.1.0"

from .boundary import (Constant, Kind, Power, PowerLog, Tabulated, Test, TestVerdict, Verdict,
                       additivity_check, boundary_from_dict, classify, eval_boundary)
from .curves import RatioTable, SurvivalCurve, ratio_curve
from .increments import (DomainError, Lattice, ParetoTails, StableExact, model_from_dict, norming_c,
                         positivity_index, sample_increment, truncated_second_moment)
from .rng import Estimate, RngStream

__all__ = [
    "Constant", "Kind", "Power", "PowerLog", "Tabulated", "Test", "TestVerdict", "Verdict",
    "additivity_check", "boundary_from_dict", "classify", "eval_boundary",
    "RatioTable", "SurvivalCurve", "ratio_curve",
    "DomainError", "Lattice", "ParetoTails", "StableExact", "model_from_dict", "norming_c",
    "positivity_index", "sample_increment", "truncated_second_moment",
    "Estimate", "RngStream",
]
