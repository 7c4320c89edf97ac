"""Compilation of logical circuits onto basis-gate sets and coupling graphs."""

from __future__ import annotations

from .basis import BASES, SUPERCONDUCTING, TRAPPED_ION, BasisGateSet, DecompositionError, decompose, get_basis, optimize
from .compile import (
    CX_CEILING,
    REFERENCE_CX,
    RankedLayout,
    TranspileResult,
    format_ranking,
    format_report,
    rank_layouts,
    ranking_csv,
    report_csv,
    transpile,
)
from .layout import STRATEGIES, Layout, LayoutError, image_is_connected, layout_init, random_layouts
from .routing import HEURISTICS, RoutedCircuit, RoutingError, route
from .verify import EquivalenceResult, verify_equivalence

__all__ = [
    "BASES", "SUPERCONDUCTING", "TRAPPED_ION", "BasisGateSet", "DecompositionError", "decompose", "get_basis",
    "optimize", "CX_CEILING", "REFERENCE_CX", "RankedLayout", "TranspileResult", "format_ranking", "format_report",
    "rank_layouts", "ranking_csv", "report_csv", "transpile", "STRATEGIES", "Layout", "LayoutError",
    "image_is_connected", "layout_init", "random_layouts", "HEURISTICS", "RoutedCircuit", "RoutingError", "route",
    "EquivalenceResult", "verify_equivalence",
]
