"""Finite-population moments of L and regularity-condition diagnostics.

Everything here conditions on the potential event times: the randomness is
the Bernoulli assignment and the censoring mechanism, summarized by
:class:`MechanismSpec`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np
from scipy.stats import binom

from .survival import (
    CensoringSpec,
    EmpiricalSurvival,
    EventGrid,
    FinitePopulation,
    build_event_grid,
)

SurvivalFn = Callable[[np.ndarray], np.ndarray]

FINITE_N_NOTE = "finite-n diagnostic, not a limit claim"


@dataclass(frozen=True)
class MechanismSpec:
    """Assignment probability and censoring survival functions G_z(c) = pr(C(z) >= c).

    With ``conditional_mode`` the survival functions are read as
    pr(C(z) >= c | Z = z); every formula is used unchanged.
    """

    p1: float
    G1: SurvivalFn
    G0: SurvivalFn
    conditional_mode: bool = False

    def __post_init__(self):
        if not 0 < self.p1 < 1:
            raise ValueError(f"p1 must lie in (0, 1), got {self.p1}")

    @property
    def p0(self) -> float:
        return 1.0 - self.p1

    @classmethod
    def from_censoring(cls, p1: float, censoring: CensoringSpec, conditional_mode: bool = False):
        return cls(p1, censoring.treated.survival, censoring.control.survival, conditional_mode)

    @classmethod
    def from_population(cls, pop: FinitePopulation, stratum: int | None = None):
        if stratum is None:
            if len(pop.labels) != 1:
                raise ValueError("population has several strata; pass one label")
            stratum = pop.labels[0]
        return cls.from_censoring(pop.p1_for(stratum), pop.censoring_for(stratum))


@dataclass(frozen=True)
class DerivedRates:
    """g_k = G(t_k) for the realized censoring time and phi_k = pr(Z=1 | C >= t_k)."""

    g: np.ndarray
    phi: np.ndarray


def derived_rates(grid: EventGrid, mech: MechanismSpec) -> DerivedRates:
    g1 = np.asarray(mech.G1(grid.times), dtype=np.float64)
    g0 = np.asarray(mech.G0(grid.times), dtype=np.float64)
    g = mech.p1 * g1 + mech.p0 * g0
    with np.errstate(divide="ignore", invalid="ignore"):
        phi = np.where(g > 0, mech.p1 * g1 / np.where(g > 0, g, 1.0), 0.0)
    return DerivedRates(g=np.clip(g, 0.0, 1.0), phi=np.clip(phi, 0.0, 1.0))


def _one_minus_pow(g: np.ndarray, m: np.ndarray) -> np.ndarray:
    """1 - (1 - g)^m without under/overflow."""
    with np.errstate(divide="ignore"):
        out = -np.expm1(m * np.log1p(-g))
    out = np.where(g >= 1.0, 1.0, out)
    return np.where(g <= 0.0, 0.0, out)


def _variance_terms(grid: EventGrid, mech: MechanismSpec) -> np.ndarray:
    rates = derived_rates(grid, mech)
    nk = grid.n_at_risk.astype(np.float64)
    h = grid.hazard
    g, phi = rates.g, rates.phi
    bracket = g - _one_minus_pow(g, nk) / nk
    with np.errstate(divide="ignore", invalid="ignore"):
        lead = np.where(nk > 1, nk * nk / (nk - 1.0), 0.0)
    return lead * h * (1.0 - h) * phi * (1.0 - phi) * bracket


def exact_variance_L(grid: EventGrid, mech: MechanismSpec) -> float:
    """Var(L | potential event times) in closed form."""
    return math.fsum(_variance_terms(grid, mech).tolist())


def exact_mean_U(grid: EventGrid, mech: MechanismSpec) -> float:
    """E[U | potential event times], summed over the binomial law of each N_k.

    Given N_k = m, E[V_k] = (m - 1) h(1-h) phi(1-phi) n_k/(n_k-1) for m >= 1 and
    N_k ~ Bin(n_k, g_k). The mixture is summed term by term rather than through
    the closed form, so it checks ``exact_variance_L`` along a separate path.
    """
    rates = derived_rates(grid, mech)
    total = []
    for nk, h, g, phi in zip(grid.n_at_risk, grid.hazard, rates.g, rates.phi):
        nk = int(nk)
        if nk <= 1:
            continue
        m = np.arange(1, nk + 1)
        pmf = binom.pmf(m, nk, g)
        ev = (m - 1.0) * h * (1.0 - h) * phi * (1.0 - phi) * nk / (nk - 1.0)
        total.append(math.fsum((pmf * ev).tolist()))
    return math.fsum(total)


def asymptotic_variance_approx(pop_size: int, F: EmpiricalSurvival, mech: MechanismSpec) -> float:
    """Leading-order variance, sum_k n_k h_k (1-h_k) phi_k (1-phi_k) g_k.

    Equal to the integral n p1 p0 \\int F G1 G0 / G (1 - dLambda) dLambda
    over the empirical law of the potential event times.
    """
    grid = F.grid
    if F.n != pop_size:
        raise ValueError("size mismatch")
    t = grid.times
    nk = pop_size * F.F(t)
    jumps = F.Lambda(t) - np.concatenate(([0.0], F.Lambda(t)[:-1]))
    rates = derived_rates(grid, mech)
    terms = nk * jumps * (1.0 - jumps) * rates.phi * (1.0 - rates.phi) * rates.g
    return math.fsum(np.asarray(terms).tolist())


@dataclass(frozen=True)
class ConditionReport:
    """Finite-n values of the quantities in the regularity conditions."""

    n: int
    p1: float
    d_tilde: int
    g_tilde: float
    criterion1: float
    condition1_p_ok: bool
    condition2_flags: dict
    condition2_any: bool
    condition3: dict = field(default_factory=dict)
    note: str = FINITE_N_NOTE

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "p1": self.p1,
            "d_tilde": self.d_tilde,
            "g_tilde": self.g_tilde,
            "criterion1": self.criterion1,
            "condition1_p_ok": self.condition1_p_ok,
            "condition2_flags": self.condition2_flags,
            "condition2_any": self.condition2_any,
            "condition3": {str(k): v.to_dict() for k, v in self.condition3.items()},
            "note": self.note,
        }


def _criterion1(d_tilde: int, g_tilde: float, n: int) -> float:
    first = math.inf if n <= 1 else (g_tilde / d_tilde) * math.sqrt(n / math.log(n))
    second = g_tilde * n / d_tilde**3
    return min(first, second)


def condition_report(
    grid: EventGrid,
    mech: MechanismSpec,
    n: int | None = None,
    strata: Mapping[int, tuple[EventGrid, MechanismSpec]] | None = None,
) -> ConditionReport:
    """d-tilde, g-tilde, the criterion of the continuous-time condition and the
    per-time clauses of the discrete-time condition, evaluated at this n.

    ``strata`` maps each stratum label to its own (grid, mechanism) pair and
    yields nested reports.
    """
    n = grid.n if n is None else n
    d_tilde = int(grid.d.max())
    g1 = np.asarray(mech.G1(grid.times), dtype=np.float64)
    g0 = np.asarray(mech.G0(grid.times), dtype=np.float64)
    # pseudo censoring with independent components: survival G1 * G0
    g_tilde = math.fsum((grid.d * g1 * g0).tolist()) / n
    flags = {
        "d_over_n_positive": (grid.d / n > 0).tolist(),
        "G1_positive": (g1 > 0).tolist(),
        "G0_positive": (g0 > 0).tolist(),
        "hazard_below_one": (grid.hazard < 1).tolist(),
    }
    any_k = bool(np.any((grid.d > 0) & (g1 > 0) & (g0 > 0) & (grid.hazard < 1)))
    nested = {}
    if strata:
        for label, (sgrid, smech) in strata.items():
            nested[label] = condition_report(sgrid, smech)
    return ConditionReport(
        n=n,
        p1=mech.p1,
        d_tilde=d_tilde,
        g_tilde=g_tilde,
        criterion1=_criterion1(d_tilde, g_tilde, n),
        condition1_p_ok=0 < mech.p1 < 1,
        condition2_flags=flags,
        condition2_any=any_k,
        condition3=nested,
    )


def population_condition_reports(pop: FinitePopulation) -> dict[int, ConditionReport]:
    """One report per stratum of ``pop``."""
    out = {}
    for s in pop.labels:
        sub = pop.stratum(s)
        out[s] = condition_report(build_event_grid(sub.potential_event_times), MechanismSpec.from_population(sub))
    return out
