"""Local charts of smooth projective planes: DSL, tableau and regularity."""

from .dsl import ChartExpr, parse_chart
from .lab import (
    CLASSICAL_COMPLEX_CHART,
    COMPONENTWISE_CHART,
    ChartJet,
    Derivatives,
    blended_chart_text,
    dual_chart_tableau,
    eval_with_derivatives,
    regularity_margin,
    regularity_scan,
    solve_y,
    tableau_at,
)

__all__ = [
    "CLASSICAL_COMPLEX_CHART", "COMPONENTWISE_CHART", "ChartExpr", "ChartJet", "Derivatives",
    "blended_chart_text", "dual_chart_tableau", "eval_with_derivatives", "parse_chart",
    "regularity_margin", "regularity_scan", "solve_y", "tableau_at",
]
