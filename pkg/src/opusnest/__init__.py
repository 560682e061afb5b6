"""Irregular strip packing by pairwise compatibility, clustering, path ordering
and rectangle packing, with a statevector QAOA backend for the ordering step."""

from .compat import DiscretizationConfig
from .geometry import Point, Polygon, Pose, Rect
from .packing import Layout, layout_metrics, validate_layout
from .pipeline import SolverConfig, SolveReport, solve, tune_qaoa
from .qaoa import QaoaConfig

__version__ = "0.1.0"

__all__ = [
    "DiscretizationConfig", "Layout", "Point", "Polygon", "Pose", "QaoaConfig", "Rect",
    "SolveReport", "SolverConfig", "layout_metrics", "solve", "tune_qaoa", "validate_layout",
]
