"""Convex strategy constraints and their builders."""

from .base import (
    Constraint,
    ConstraintError,
    ConstraintSet,
    LinearConstraint,
    MaxLinearConstraint,
    QuadraticConstraint,
    linear_constraint,
)
from .risk import build_risk_constraint, patroller_risk, risk_coefficients
from .stats import IntervalBound, normal_quantile, wilson_bound, wilson_interval

__all__ = [
    "Constraint",
    "ConstraintError",
    "ConstraintSet",
    "IntervalBound",
    "LinearConstraint",
    "MaxLinearConstraint",
    "QuadraticConstraint",
    "build_risk_constraint",
    "linear_constraint",
    "normal_quantile",
    "patroller_risk",
    "risk_coefficients",
    "wilson_bound",
    "wilson_interval",
]
