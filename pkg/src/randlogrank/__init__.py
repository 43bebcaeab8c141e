"""Randomization-based logrank and stratified logrank tests for censored outcomes."""

__version__ = "0.1.0"

from .logrank import (
    LogrankComponents,
    LogrankResult,
    StratifiedResult,
    logrank_components,
    logrank_statistic,
    stratified_logrank,
)
from .moments import (
    MechanismSpec,
    asymptotic_variance_approx,
    condition_report,
    exact_mean_U,
    exact_variance_L,
)
from .survival import (
    CensoringSpec,
    DiscreteLaw,
    ExponentialLaw,
    FinitePopulation,
    SurvivalData,
    SurvivalRecord,
    build_event_grid,
    contingency_at,
    empirical_survival,
    hypergeometric_mean_var,
)

__all__ = [
    "CensoringSpec",
    "DiscreteLaw",
    "ExponentialLaw",
    "FinitePopulation",
    "LogrankComponents",
    "LogrankResult",
    "MechanismSpec",
    "StratifiedResult",
    "SurvivalData",
    "SurvivalRecord",
    "asymptotic_variance_approx",
    "build_event_grid",
    "condition_report",
    "contingency_at",
    "empirical_survival",
    "exact_mean_U",
    "exact_variance_L",
    "hypergeometric_mean_var",
    "logrank_components",
    "logrank_statistic",
    "stratified_logrank",
]
