"""Self-contained conic programming backend (zero / nonneg / second-order /
exponential cones) used by every convex subproblem of the allocation layer."""

from .program import Affine, ConicProgram, ConicSolution
from .cones import ConeLayout

__all__ = ["Affine", "ConicProgram", "ConicSolution", "ConeLayout"]
