"""Exact randomization distribution of the logrank quantities at small n.

The enumeration runs over every assignment vector and every realized-arm
censoring value of every unit, so each atom is one joint outcome with its
exact probability. The ``check_*`` functions compare that distribution with
the hypergeometric and binomial laws it must follow under Fisher's null.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .moments import MechanismSpec, derived_rates, exact_variance_L
from .survival import (
    CensoringSpec,
    DiscreteLaw,
    EventGrid,
    FinitePopulation,
    build_event_grid,
    hypergeometric_moments,
)

DEFAULT_CAP = 8
TOLERANCE = 1e-12

# accumulate probabilities in extended precision
_ACC = np.longdouble


class EnumerationTooLarge(ValueError):
    pass


DiscreteCensoringSpec = CensoringSpec


@dataclass
class OracleDistribution:
    """All atoms of the joint law of (Z, realized censoring) with derived observables.

    Arrays indexed ``[atom]``, ``[atom, unit]`` or ``[atom, k]``.
    """

    grid: EventGrid
    event_times: np.ndarray
    Z: np.ndarray
    C: np.ndarray
    prob: np.ndarray
    W: np.ndarray
    delta: np.ndarray
    at_risk: np.ndarray  # [atom, unit, k] bool, W_i >= t_k
    event_at: np.ndarray  # [atom, unit, k] bool, Delta_i and W_i == t_k
    N: np.ndarray
    D: np.ndarray
    N1: np.ndarray
    D1: np.ndarray
    M: np.ndarray
    V: np.ndarray
    L: np.ndarray
    U: np.ndarray
    LR: np.ndarray
    _history_cache: dict = field(default_factory=dict, repr=False)

    @property
    def n_atoms(self) -> int:
        return self.prob.shape[0]

    @property
    def K(self) -> int:
        return self.grid.K

    @cached_property
    def total_probability(self) -> float:
        return float(np.sum(self.prob.astype(_ACC)))

    def history_index(self, k: int) -> np.ndarray:
        """Group id of each atom under the information available before t_k (0-based k).

        The key holds, for every grid time q up to t_k, each unit's at-risk
        flag and observed-event flag, the treatment flags of units with an
        event at the previous grid time, and the treated at-risk count.
        """
        if k not in self._history_cache:
            parts = []
            for q in range(k + 1):
                parts.append(self.at_risk[:, :, q])
                parts.append(self.event_at[:, :, q])
                if q >= 1:
                    parts.append(self.Z & self.event_at[:, :, q - 1])
                parts.append(self.N1[:, q : q + 1])
            key = np.concatenate([np.asarray(p, dtype=np.int64) for p in parts], axis=1)
            _, inverse = np.unique(key, axis=0, return_inverse=True)
            self._history_cache[k] = inverse.ravel()
        return self._history_cache[k]

    def observables(self) -> dict:
        """Probability of each distinct (Z, W, Delta) pattern, keyed by bytes."""
        out: dict = {}
        for z, w, d, p in zip(self.Z, self.W, self.delta, self.prob):
            key = (z.astype(np.int8).tobytes(), w.tobytes(), d.astype(np.int8).tobytes())
            out[key] = out.get(key, 0.0) + float(p)
        return out


def _unit_options(pop: FinitePopulation, prune: bool):
    c = pop.censoring
    if not isinstance(c, CensoringSpec) or not c.is_discrete:
        raise ValueError("enumeration needs finite-support censoring in both arms")
    p1 = pop.p1_for(pop.labels[0])
    s1, s0 = c.treated, c.control
    z, val, pr = [], [], []
    if prune:
        # only the realized arm's censoring value can reach (W, Delta)
        for v, p in zip(s1.values, s1.probs):
            z.append(1), val.append(v), pr.append(p1 * p)
        for v, p in zip(s0.values, s0.probs):
            z.append(0), val.append(v), pr.append((1 - p1) * p)
    else:
        for arm, pz in ((1, p1), (0, 1 - p1)):
            for v1, q1 in zip(s1.values, s1.probs):
                for v0, q0 in zip(s0.values, s0.probs):
                    z.append(arm), val.append(v1 if arm else v0), pr.append(pz * q1 * q0)
    return np.array(z, dtype=bool), np.array(val, dtype=np.float64), np.array(pr, dtype=np.float64)


def enumerate_population(pop: FinitePopulation, cap: int = DEFAULT_CAP, prune: bool = True) -> OracleDistribution:
    """Exact joint distribution over assignments and realized censoring values."""
    if len(pop.labels) != 1:
        raise ValueError("enumeration supports a single stratum")
    n = pop.n
    if n > cap:
        raise EnumerationTooLarge(f"enumeration too large: n={n} exceeds cap {cap}")
    T = pop.potential_event_times
    oz, oc, op = _unit_options(pop, prune)
    m = oz.shape[0]
    idx = np.indices((m,) * n).reshape(n, -1).T  # [atom, unit]
    Z = oz[idx]
    C = oc[idx]
    prob = np.prod(op[idx], axis=1)

    W = np.minimum(T[None, :], C)
    delta = T[None, :] <= C
    grid = build_event_grid(T)
    t = grid.times
    at_risk = W[:, :, None] >= t[None, None, :]
    event_at = delta[:, :, None] & (W[:, :, None] == t[None, None, :])
    N = at_risk.sum(axis=1)
    N1 = (at_risk & Z[:, :, None]).sum(axis=1)
    D = event_at.sum(axis=1)
    D1 = (event_at & Z[:, :, None]).sum(axis=1)
    M, V = hypergeometric_moments(N, D, N1)
    L = np.zeros(prob.shape[0])
    U = np.zeros(prob.shape[0])
    for k in range(t.shape[0]):
        L += D1[:, k] - M[:, k]
        U += V[:, k]
    with np.errstate(divide="ignore", invalid="ignore"):
        LR = np.where(U > 0, L / np.sqrt(np.where(U > 0, U, 1.0)), np.nan)
    return OracleDistribution(
        grid=grid, event_times=t, Z=Z, C=C, prob=prob, W=W, delta=delta,
        at_risk=at_risk, event_at=event_at, N=N, D=D, N1=N1, D1=D1, M=M, V=V,
        L=L, U=U, LR=LR,
    )


# -- exact reference pmfs ----------------------------------------------------


def hypergeom_pmf(x: int, N: int, D: int, b: int) -> float:
    """pr(x successes in b draws from N items of which D are successes)."""
    if x < 0 or x > D or b - x < 0 or b - x > N - D:
        return 0.0
    return math.comb(D, x) * math.comb(N - D, b - x) / math.comb(N, b)


def binom_pmf(x: int, m: int, p: float) -> float:
    if x < 0 or x > m:
        return 0.0
    return math.comb(m, x) * p**x * (1.0 - p) ** (m - x)


# -- grouped sums ------------------------------------------------------------


def _group_sums(group: np.ndarray, values: np.ndarray, n_groups: int) -> np.ndarray:
    acc = np.zeros(n_groups, dtype=_ACC)
    np.add.at(acc, group, values.astype(_ACC))
    return acc


def _joint_table(group: np.ndarray, x: np.ndarray, prob: np.ndarray, n_groups: int, width: int) -> np.ndarray:
    acc = np.zeros((n_groups, width), dtype=_ACC)
    np.add.at(acc, (group, x), prob.astype(_ACC))
    return acc


def _conditional_pmf(group, x, prob, n_groups, width):
    joint = _joint_table(group, x, prob, n_groups, width)
    mass = joint.sum(axis=1)
    return joint / mass[:, None], mass


def _first_of_group(group: np.ndarray, n_groups: int) -> np.ndarray:
    first = np.full(n_groups, -1, dtype=np.int64)
    order = np.arange(group.shape[0])[::-1]
    first[group[order]] = order
    return first


@dataclass
class CheckReport:
    name: str
    max_deviation: float
    tolerance: float = TOLERANCE
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return bool(self.max_deviation <= self.tolerance)

    def to_dict(self) -> dict:
        return {
            "check": self.name,
            "max_deviation": self.max_deviation,
            "tolerance": self.tolerance,
            "passed": self.passed,
            **self.details,
        }


def _hgeom_deviation(dist: OracleDistribution, k: int, group: np.ndarray) -> tuple[float, int]:
    n_groups = int(group.max()) + 1
    width = int(dist.N1[:, k].max()) + 1
    cond, _ = _conditional_pmf(group, dist.D1[:, k], dist.prob, n_groups, width)
    first = _first_of_group(group, n_groups)
    worst = 0.0
    for g in range(n_groups):
        a = first[g]
        N, D, N1 = int(dist.N[a, k]), int(dist.D[a, k]), int(dist.N1[a, k])
        in_group = group == g
        # margins must be fixed within a conditioning event
        if not (np.all(dist.N[in_group, k] == N) and np.all(dist.D[in_group, k] == D) and np.all(dist.N1[in_group, k] == N1)):
            return math.inf, n_groups
        for x in range(width):
            worst = max(worst, abs(float(cond[g, x]) - hypergeom_pmf(x, N, D, N1)))
    return worst, n_groups


def check_conditional_hypergeometric(dist: OracleDistribution) -> CheckReport:
    """D1k given its table margins, and given the whole past, is HGeom(Nk, Dk, N1k)."""
    worst_margin = 0.0
    worst_history = 0.0
    events = 0
    for k in range(dist.K):
        margins = np.stack([dist.N[:, k], dist.D[:, k], dist.N1[:, k]], axis=1)
        _, gm = np.unique(margins, axis=0, return_inverse=True)
        dev, ng = _hgeom_deviation(dist, k, gm.ravel())
        worst_margin = max(worst_margin, dev)
        events += ng
        dev, ng = _hgeom_deviation(dist, k, dist.history_index(k))
        worst_history = max(worst_history, dev)
        events += ng
    return CheckReport(
        "hypergeom",
        max(worst_margin, worst_history),
        details={
            "max_deviation_given_margins": worst_margin,
            "max_deviation_given_history": worst_history,
            "conditioning_events": events,
        },
    )


def check_martingale(dist: OracleDistribution) -> CheckReport:
    """E[D1k - Mk | past] = 0 for every attainable past, and E[L] = 0."""
    worst = 0.0
    for k in range(dist.K):
        group = dist.history_index(k)
        n_groups = int(group.max()) + 1
        mass = _group_sums(group, dist.prob, n_groups)
        num = _group_sums(group, dist.prob * (dist.D1[:, k] - dist.M[:, k]), n_groups)
        worst = max(worst, float(np.max(np.abs(num / mass))))
    mean_L = float(np.sum(dist.prob.astype(_ACC) * dist.L.astype(_ACC)))
    return CheckReport(
        "martingale",
        max(worst, abs(mean_L)),
        details={"max_conditional_mean": worst, "mean_L": mean_L},
    )


def _marginal_pmf(x: np.ndarray, prob: np.ndarray, width: int) -> np.ndarray:
    acc = np.zeros(width, dtype=_ACC)
    np.add.at(acc, x, prob.astype(_ACC))
    return acc


def check_marginal_laws(dist: OracleDistribution, mech: MechanismSpec) -> CheckReport:
    """Laws of (N_k, D_k, N_1k): binomial margins, conditional HGeom/Bin given N_k,
    and conditional independence of D_k and N_1k given N_k."""
    grid = dist.grid
    rates = derived_rates(grid, mech)
    dev = {"D_binomial": 0.0, "N1_binomial": 0.0, "N_binomial": 0.0,
           "D_given_N_hypergeom": 0.0, "N1_given_N_binomial": 0.0, "factorization": 0.0}
    for k in range(grid.K):
        nk, dk = int(grid.n_at_risk[k]), int(grid.d[k])
        g, phi = float(rates.g[k]), float(rates.phi[k])
        N, D, N1 = dist.N[:, k], dist.D[:, k], dist.N1[:, k]
        w = nk + 1
        pD = _marginal_pmf(D, dist.prob, w)
        pN1 = _marginal_pmf(N1, dist.prob, w)
        pN = _marginal_pmf(N, dist.prob, w)
        for x in range(w):
            dev["D_binomial"] = max(dev["D_binomial"], abs(float(pD[x]) - binom_pmf(x, dk, g)))
            dev["N1_binomial"] = max(dev["N1_binomial"], abs(float(pN1[x]) - binom_pmf(x, nk, g * phi)))
            dev["N_binomial"] = max(dev["N_binomial"], abs(float(pN[x]) - binom_pmf(x, nk, g)))
        joint = np.zeros((w, w, w), dtype=_ACC)
        np.add.at(joint, (N, D, N1), dist.prob.astype(_ACC))
        for m in range(w):
            mass = joint[m].sum()
            if mass == 0:
                continue
            cond = joint[m] / mass
            cD = cond.sum(axis=1)
            cN1 = cond.sum(axis=0)
            for a in range(w):
                dev["D_given_N_hypergeom"] = max(dev["D_given_N_hypergeom"], abs(float(cD[a]) - hypergeom_pmf(a, nk, dk, m)))
                dev["N1_given_N_binomial"] = max(dev["N1_given_N_binomial"], abs(float(cN1[a]) - binom_pmf(a, m, phi)))
            dev["factorization"] = max(dev["factorization"], float(np.max(np.abs(cond - np.outer(cD, cN1)))))
    return CheckReport("marginals", max(dev.values()), details={"per_law": dev})


def variance_identity(dist: OracleDistribution, grid: EventGrid, mech: MechanismSpec) -> CheckReport:
    """Var(L) from the atoms, E[U] from the atoms, and the closed form agree."""
    p = dist.prob.astype(_ACC)
    L = dist.L.astype(_ACC)
    mean_L = np.sum(p * L)
    var_L = float(np.sum(p * (L - mean_L) ** 2))
    mean_U = float(np.sum(p * dist.U.astype(_ACC)))
    closed = exact_variance_L(grid, mech)
    worst = max(abs(var_L - mean_U), abs(var_L - closed), abs(mean_U - closed))
    return CheckReport(
        "variance",
        worst,
        details={"oracle_var_L": var_L, "oracle_mean_U": mean_U, "closed_form": closed},
    )


CHECKS = ("hypergeom", "martingale", "marginals", "variance")


def run_checks(pop: FinitePopulation, checks=CHECKS, cap: int = DEFAULT_CAP) -> dict[str, CheckReport]:
    dist = enumerate_population(pop, cap=cap)
    mech = MechanismSpec.from_population(pop)
    out = {}
    for name in checks:
        if name == "hypergeom":
            out[name] = check_conditional_hypergeometric(dist)
        elif name == "martingale":
            out[name] = check_martingale(dist)
        elif name == "marginals":
            out[name] = check_marginal_laws(dist, mech)
        elif name == "variance":
            out[name] = variance_identity(dist, dist.grid, mech)
        else:
            raise ValueError(f"unknown check {name!r}")
    return out


def random_population(rng: np.random.Generator, n: int | None = None) -> FinitePopulation:
    """Small population with random ties, p1 and 1-3 point censoring supports."""
    n = int(rng.integers(3, 7)) if n is None else n
    n_distinct = int(rng.integers(1, n + 1))
    levels = np.sort(rng.choice(np.arange(1, 9), size=n_distinct, replace=False)).astype(float)
    times = rng.choice(levels, size=n)
    p1 = float(rng.choice([0.3, 0.5, 0.7]))
    candidates = np.concatenate((np.arange(1, 9) * 0.5, [math.inf]))

    def law():
        size = int(rng.integers(1, 4))
        vals = rng.choice(candidates, size=size, replace=False)
        w = rng.random(size) + 0.1
        probs = w / w.sum()
        probs[-1] = 1.0 - math.fsum(probs[:-1].tolist())
        return DiscreteLaw(tuple(vals), tuple(probs))

    return FinitePopulation(times, p1, CensoringSpec(law(), law()))
