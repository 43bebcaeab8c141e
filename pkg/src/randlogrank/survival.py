"""Core data model for censored two-group data.

Holds the per-unit record types, the event grid built from potential event
times, the 2x2 contingency table at a time point, and the censoring laws
used to describe a finite population's censoring mechanism.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence, Union

import numpy as np


@dataclass(frozen=True)
class SurvivalRecord:
    """One unit's observed triple: time at risk, event flag, group."""

    unit_id: object
    time: float
    event: bool
    group: int
    stratum: int = 0

    def __post_init__(self):
        if not math.isfinite(self.time) or self.time < 0:
            raise ValueError(f"invalid time: {self.time!r}")
        if self.group not in (0, 1):
            raise ValueError(f"group must be 0 or 1, got {self.group!r}")


@dataclass(frozen=True)
class SurvivalData:
    """Column-oriented view of a batch of records."""

    time: np.ndarray
    event: np.ndarray
    group: np.ndarray
    stratum: np.ndarray

    @classmethod
    def from_arrays(cls, time, event, group, stratum=None) -> "SurvivalData":
        time = np.asarray(time, dtype=np.float64)
        event = np.asarray(event, dtype=bool)
        group = np.asarray(group, dtype=np.int64)
        if stratum is None:
            stratum = np.zeros(time.shape, dtype=np.int64)
        stratum = np.asarray(stratum, dtype=np.int64)
        if not (time.shape == event.shape == group.shape == stratum.shape) or time.ndim != 1:
            raise ValueError("time, event, group and stratum must be 1-d arrays of equal length")
        if not np.all(np.isfinite(time)) or np.any(time < 0):
            raise ValueError("invalid time")
        if np.any((group != 0) & (group != 1)):
            raise ValueError("group must be 0 or 1")
        return cls(time, event, group, stratum)

    @classmethod
    def from_records(cls, records: Iterable[SurvivalRecord]) -> "SurvivalData":
        records = list(records)
        return cls.from_arrays(
            [r.time for r in records],
            [bool(r.event) for r in records],
            [r.group for r in records],
            [r.stratum for r in records],
        )

    def __len__(self) -> int:
        return self.time.shape[0]

    def subset(self, mask) -> "SurvivalData":
        return SurvivalData(self.time[mask], self.event[mask], self.group[mask], self.stratum[mask])

    def to_records(self) -> list[SurvivalRecord]:
        return [
            SurvivalRecord(i, float(t), bool(e), int(g), int(s))
            for i, (t, e, g, s) in enumerate(zip(self.time, self.event, self.group, self.stratum))
        ]


RecordsLike = Union[SurvivalData, Sequence[SurvivalRecord]]


def as_survival_data(records: RecordsLike) -> SurvivalData:
    if isinstance(records, SurvivalData):
        return records
    return SurvivalData.from_records(records)


@dataclass(frozen=True)
class EventGrid:
    """Distinct potential event times with multiplicities, risk-set sizes and hazards."""

    times: np.ndarray
    d: np.ndarray
    n_at_risk: np.ndarray
    hazard: np.ndarray

    @property
    def K(self) -> int:
        return self.times.shape[0]

    @property
    def n(self) -> int:
        return int(self.d.sum())


def build_event_grid(potential_event_times) -> EventGrid:
    t = np.asarray(potential_event_times, dtype=np.float64).ravel()
    if t.size == 0:
        raise ValueError("empty population")
    if not np.all(np.isfinite(t)) or np.any(t < 0):
        raise ValueError("invalid time")
    times, d = np.unique(t, return_counts=True)
    n_at_risk = np.cumsum(d[::-1])[::-1]
    return EventGrid(times, d.astype(np.int64), n_at_risk.astype(np.int64), d / n_at_risk)


@dataclass(frozen=True)
class ContingencyTable:
    """At-risk and event counts by group at a single time point."""

    time: float
    n1: int
    n0: int
    d1: int
    d0: int

    @property
    def n_total(self) -> int:
        return self.n1 + self.n0

    @property
    def d_total(self) -> int:
        return self.d1 + self.d0


def contingency_at(records: RecordsLike, t: float) -> ContingencyTable:
    data = as_survival_data(records)
    at_risk = data.time >= t
    # exact float equality on purpose: ties are bit-identical by construction
    event_at = data.event & (data.time == t)
    treated = data.group == 1
    return ContingencyTable(
        time=float(t),
        n1=int(np.sum(at_risk & treated)),
        n0=int(np.sum(at_risk & ~treated)),
        d1=int(np.sum(event_at & treated)),
        d0=int(np.sum(event_at & ~treated)),
    )


def hypergeometric_mean_var(n_total: int, d_total: int, n1: int) -> tuple[float, float]:
    """Mean and variance of HGeom(n_total, d_total, n1), with 0/0 taken as 0."""
    if not (0 <= d_total <= n_total and 0 <= n1 <= n_total):
        raise ValueError(f"invalid counts: N={n_total}, D={d_total}, N1={n1}")
    if n_total == 0:
        return 0.0, 0.0
    mean = d_total * n1 / n_total
    if n_total == 1:
        return mean, 0.0
    n0 = n_total - n1
    var = d_total * (n_total - d_total) * n1 * n0 / (n_total * n_total * (n_total - 1))
    return mean, var


def hypergeometric_moments(n_total, d_total, n1):
    """Vectorized ``hypergeometric_mean_var`` over integer arrays."""
    N = np.asarray(n_total, dtype=np.float64)
    D = np.asarray(d_total, dtype=np.float64)
    N1 = np.asarray(n1, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        mean = np.where(N > 0, D * N1 / np.where(N > 0, N, 1.0), 0.0)
        denom = N * N * (N - 1.0)
        var = np.where(N > 1, D * (N - D) * N1 * (N - N1) / np.where(N > 1, denom, 1.0), 0.0)
    return mean, var


@dataclass(frozen=True)
class EmpiricalSurvival:
    """Empirical survival F and integrated hazard of the potential event times."""

    grid: EventGrid
    n: int

    def F(self, t):
        """F(t) = #{i: T_i >= t} / n."""
        t = np.asarray(t, dtype=np.float64)
        k = np.searchsorted(self.grid.times, t, side="left")
        padded = np.append(self.grid.n_at_risk, 0)
        out = padded[k] / self.n
        return float(out) if out.ndim == 0 else out

    def Lambda(self, t):
        """Integrated hazard: sum of h_k over t_k <= t."""
        t = np.asarray(t, dtype=np.float64)
        k = np.searchsorted(self.grid.times, t, side="right")
        cum = np.concatenate(([0.0], np.cumsum(self.grid.hazard)))
        out = cum[k]
        return float(out) if out.ndim == 0 else out


def empirical_survival(grid: EventGrid, n: int) -> EmpiricalSurvival:
    if int(grid.d.sum()) != n:
        raise ValueError(f"size mismatch: grid holds {int(grid.d.sum())} units, n={n}")
    return EmpiricalSurvival(grid, n)


# -- censoring laws ---------------------------------------------------------
#
# ``survival(t)`` is pr(C >= t), the convention under which a unit whose
# censoring time equals its event time still has the event observed.


@dataclass(frozen=True)
class DiscreteLaw:
    """Finite-support censoring law; values may include +inf (never censored)."""

    values: tuple
    probs: tuple

    def __post_init__(self):
        values = tuple(float(v) for v in self.values)
        probs = tuple(float(p) for p in self.probs)
        if len(values) == 0 or len(values) != len(probs):
            raise ValueError("support values and probabilities must be nonempty and of equal length")
        if len(set(values)) != len(values):
            raise ValueError("support values must be distinct")
        if any(math.isnan(v) or v < 0 for v in values):
            raise ValueError("support values must be >= 0")
        if any(p <= 0 for p in probs):
            raise ValueError("support probabilities must be positive")
        if abs(math.fsum(probs) - 1.0) > 1e-15 * len(probs) + 1e-15:
            raise ValueError("support probabilities must sum to 1")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "probs", probs)

    def survival(self, t):
        t = np.asarray(t, dtype=np.float64)
        v = np.asarray(self.values)
        p = np.asarray(self.probs)
        out = ((v[None, :] >= t.reshape(-1, 1)) * p[None, :]).sum(axis=1).reshape(t.shape)
        return np.minimum(out, 1.0) if out.ndim else float(min(out, 1.0))

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.choice(np.asarray(self.values), size=size, p=np.asarray(self.probs))


@dataclass(frozen=True)
class ExponentialLaw:
    """scale * Expo(1)."""

    scale: float

    def __post_init__(self):
        if not self.scale > 0:
            raise ValueError("exponential scale must be positive")

    def survival(self, t):
        t = np.asarray(t, dtype=np.float64)
        out = np.exp(-np.maximum(t, 0.0) / self.scale)
        return out if out.ndim else float(out)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return self.scale * rng.standard_exponential(size)


NO_CENSORING = DiscreteLaw((math.inf,), (1.0,))

CensoringLaw = Union[DiscreteLaw, ExponentialLaw]


@dataclass(frozen=True)
class CensoringSpec:
    """Marginal laws of the potential censoring times C(1), C(0); independent within unit."""

    treated: CensoringLaw = NO_CENSORING
    control: CensoringLaw = NO_CENSORING

    @property
    def is_discrete(self) -> bool:
        return isinstance(self.treated, DiscreteLaw) and isinstance(self.control, DiscreteLaw)


@dataclass(frozen=True)
class FinitePopulation:
    """Fixed potential event times plus the assignment and censoring mechanisms.

    ``p1`` and ``censoring`` may be given per stratum as mappings keyed by label.
    """

    potential_event_times: np.ndarray
    p1: Union[float, Mapping[int, float]] = 0.5
    censoring: Union[CensoringSpec, Mapping[int, CensoringSpec]] = field(default_factory=CensoringSpec)
    strata: np.ndarray | None = None

    def __post_init__(self):
        t = np.asarray(self.potential_event_times, dtype=np.float64).ravel()
        if t.size == 0:
            raise ValueError("empty population")
        if not np.all(np.isfinite(t)) or np.any(t < 0):
            raise ValueError("invalid time")
        object.__setattr__(self, "potential_event_times", t)
        strata = np.zeros(t.shape, np.int64) if self.strata is None else np.asarray(self.strata, np.int64)
        if strata.shape != t.shape:
            raise ValueError("strata must have one label per unit")
        object.__setattr__(self, "strata", strata)
        for s in self.labels:
            p = self.p1_for(s)
            if not 0 < p < 1:
                raise ValueError(f"p1 must lie in (0, 1), got {p} in stratum {s}")

    @property
    def n(self) -> int:
        return self.potential_event_times.shape[0]

    @property
    def labels(self) -> list[int]:
        return [int(s) for s in np.unique(self.strata)]

    def p1_for(self, stratum: int) -> float:
        if isinstance(self.p1, Mapping):
            return float(self.p1[stratum])
        return float(self.p1)

    def censoring_for(self, stratum: int) -> CensoringSpec:
        if isinstance(self.censoring, Mapping):
            return self.censoring[stratum]
        return self.censoring

    def stratum(self, label: int) -> "FinitePopulation":
        mask = self.strata == label
        return FinitePopulation(
            self.potential_event_times[mask],
            self.p1_for(label),
            self.censoring_for(label),
            self.strata[mask],
        )
