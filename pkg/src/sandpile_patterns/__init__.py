"""Least solutions of the integer obstacle problem ``Lap u <= 2``, their
Sierpinski-like Laplacians, and exact continuum supersolutions on the square."""

__version__ = "0.1.0"

from .grid import (DomainError, DomainMask, IntField, LatticePoint, ShapeSpec, Window, build_mask,
                   cutoff_quadratic, laplacian_at, laplacian_field, shift_cutoff)
from .solver import (BurnReport, SandpileConfig, Solution, SolveStats, brute_force_least,
                     burning_certificate, check_feasible, solve_least, stabilize)
from .continuum import (CxPoint, QuadraticPiece, SuperSolution, TriangleMap, gradient_at, ifs_generate,
                        interpolate, pieces, sample_field, value_at)
from .patterns import (MatchReport, PatternData, PeriodicPattern, Region, detect_period, fit_quadratic,
                       match_at, match_fraction, v_norm, validate_structure, vinv_norm)

__all__ = [
    "BurnReport", "CxPoint", "DomainError", "DomainMask", "IntField", "LatticePoint", "MatchReport",
    "PatternData", "PeriodicPattern", "QuadraticPiece", "Region", "SandpileConfig", "ShapeSpec",
    "Solution", "SolveStats", "SuperSolution", "TriangleMap", "Window", "brute_force_least",
    "build_mask", "burning_certificate", "check_feasible", "cutoff_quadratic", "detect_period",
    "fit_quadratic", "gradient_at", "ifs_generate", "interpolate", "laplacian_at", "laplacian_field",
    "match_at", "match_fraction", "pieces", "sample_field", "shift_cutoff", "solve_least", "stabilize",
    "v_norm", "validate_structure", "value_at", "vinv_norm",
]
