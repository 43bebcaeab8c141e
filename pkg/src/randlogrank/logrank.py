"""Standardized and stratified logrank statistics with their components."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .survival import RecordsLike, SurvivalData, as_survival_data, hypergeometric_moments


@dataclass(frozen=True)
class LogrankComponents:
    """Per-event-time pieces: treated events D1k, expectation Mk, variance Vk."""

    times: np.ndarray
    d1: np.ndarray
    m: np.ndarray
    v: np.ndarray
    n_at_risk: np.ndarray
    n1_at_risk: np.ndarray
    d: np.ndarray


@dataclass(frozen=True)
class LogrankResult:
    """L, U and LR = L / sqrt(U). ``statistic`` is None when U == 0."""

    L: float
    U: float
    statistic: float | None
    components: LogrankComponents | None = None

    @property
    def defined(self) -> bool:
        return self.statistic is not None

    @property
    def p_value(self) -> float | None:
        """Asymptotic two-sided p-value against N(0, 1)."""
        return None if self.statistic is None else two_sided_p_value(self.statistic)


@dataclass(frozen=True)
class StratifiedResult:
    per_stratum: tuple[tuple[int, float, float], ...]
    statistic: float | None

    @property
    def L(self) -> float:
        return math.fsum(l for _, l, _ in self.per_stratum)

    @property
    def U(self) -> float:
        return math.fsum(u for _, _, u in self.per_stratum)

    @property
    def defined(self) -> bool:
        return self.statistic is not None

    @property
    def p_value(self) -> float | None:
        return None if self.statistic is None else two_sided_p_value(self.statistic)


def two_sided_p_value(z: float) -> float:
    return float(2.0 * ndtr(-abs(z)))


def standardize(L: float, U: float) -> float | None:
    return L / math.sqrt(U) if U > 0 else None


def _components(data: SurvivalData) -> LogrankComponents:
    # one sort, then tail sums give the risk sets at every distinct time
    order = np.argsort(data.time, kind="stable")
    t = data.time[order]
    e = data.event[order].astype(np.int64)
    z = data.group[order].astype(np.int64)
    times, first = np.unique(t, return_index=True)
    n = t.shape[0]
    n_at = n - first
    n1_at = np.cumsum(z[::-1])[::-1][first]
    d = np.add.reduceat(e, first)
    d1 = np.add.reduceat(e * z, first)
    keep = d > 0
    m, v = hypergeometric_moments(n_at[keep], d[keep], n1_at[keep])
    return LogrankComponents(
        times=times[keep],
        d1=d1[keep],
        m=m,
        v=v,
        n_at_risk=n_at[keep],
        n1_at_risk=n1_at[keep],
        d=d[keep],
    )


def logrank_components(records: RecordsLike) -> LogrankComponents:
    data = as_survival_data(records)
    if len(data) == 0:
        raise ValueError("empty dataset")
    return _components(data)


def logrank_statistic(records: RecordsLike) -> LogrankResult:
    comp = logrank_components(records)
    L = math.fsum((comp.d1 - comp.m).tolist())
    U = math.fsum(comp.v.tolist())
    return LogrankResult(L=L, U=U, statistic=standardize(L, U), components=comp)


def stratified_logrank(records: RecordsLike) -> StratifiedResult:
    data = as_survival_data(records)
    if len(data) == 0:
        raise ValueError("empty dataset")
    per = []
    for s in np.unique(data.stratum):
        res = logrank_statistic(data.subset(data.stratum == s))
        per.append((int(s), res.L, res.U))
    L = math.fsum(l for _, l, _ in per)
    U = math.fsum(u for _, _, u in per)
    return StratifiedResult(per_stratum=tuple(per), statistic=standardize(L, U))
