"""Monte Carlo engine for the superpopulation and finite-population experiments.

Potential event times come from a Gaussian copula with AR(1) correlation,
censoring from scaled exponentials, assignment from (possibly
covariate-dependent) Bernoulli draws. Each replication draws from its own
stream ``SeedSequence(seed, spawn_key=(1, rep))`` and the fixed population
in finite-population mode from ``SeedSequence(seed, spawn_key=(0,))``, so
output never depends on how replications are split across workers.
"""
from __future__ import annotations

import hashlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, replace

import numpy as np
from scipy.special import log_ndtr, ndtr

from . import _kernels

MODES = ("superpopulation", "finite", "random")
MODE_ALIASES = {
    "superpop": "superpopulation",
    "superpopulation": "superpopulation",
    "fixed-z": "superpopulation",
    "finite": "finite",
    "finite-population": "finite",
    "fixed-t": "finite",
    "random": "random",
    "fully-random": "random",
}
CENSORING_FAMILIES = ("homogeneous", "heterogeneous")

FIXED_POPULATION_KEY = 0
REPLICATION_KEY = 1
GENERATOR = "numpy PCG64 seeded by SeedSequence(seed, spawn_key=(1, replication)); fixed population spawn_key=(0,)"

CHUNK = 256


def covariate_pattern(n: int) -> np.ndarray:
    """Blocks of 0.2n zeros, 0.3n ones, 0.3n zeros, 0.2n ones."""
    if n <= 0 or n % 10:
        raise ValueError(f"n must be a positive multiple of 10, got {n}")
    a, b = n // 5, 3 * n // 10
    return np.concatenate((np.zeros(a), np.ones(b), np.zeros(b), np.ones(a))).astype(np.int64)


def first_half_treated(n: int) -> np.ndarray:
    """Fixed assignment used for superpopulation runs: first n/2 units treated."""
    if n % 2:
        raise ValueError("n must be even")
    return np.concatenate((np.ones(n // 2, bool), np.zeros(n // 2, bool)))


@dataclass(frozen=True)
class CopulaEventModel:
    n: int
    rho: float = 0.0
    theta: float = 0.0

    def __post_init__(self):
        if not -1 < self.rho < 1:
            raise ValueError("rho must lie in (-1, 1)")
        if self.theta < 0:
            raise ValueError("theta must be >= 0")
        covariate_pattern(self.n)

    @property
    def covariates(self) -> np.ndarray:
        return covariate_pattern(self.n)

    def transform(self, zeta: np.ndarray) -> np.ndarray:
        """Map iid standard normals (rows of length n) to potential event times."""
        eps = _kernels.ar1_rows(zeta, self.rho)
        # -log(1 - Phi(eps)) computed as -log Phi(-eps) to keep the upper tail exact
        return -log_ndtr(-eps) * (1.0 + self.theta * self.covariates)


def copula_uniforms(zeta: np.ndarray, rho: float) -> np.ndarray:
    return ndtr(_kernels.ar1_rows(zeta, rho))


def sample_copula_event_times(model: CopulaEventModel, rng: np.random.Generator) -> np.ndarray:
    return model.transform(rng.standard_normal(model.n))


@dataclass(frozen=True)
class ScenarioConfig:
    """One simulation scenario.

    ``censoring`` picks between C(1) ~ 2 Expo(1), C(0) ~ Expo(1)
    ("homogeneous") and the covariate-scaled family with scales
    10^(1 + ic (X - 1)) and 10^(ic (X - 1)) ("heterogeneous").
    Assignment is Bern(0.5 + iz * 0.2 * (1 - 2X)).
    """

    case: str = "custom"
    mode: str = "finite"
    n: int = 1000
    reps: int = 10_000
    seed: int | None = None
    rho: float = 0.0
    theta: float = 0.0
    censoring: str = "homogeneous"
    iz: int = 0
    ic: int = 0
    strata: bool = False

    def __post_init__(self):
        mode = MODE_ALIASES.get(self.mode)
        if mode is None:
            raise ValueError(f"unknown mode {self.mode!r}")
        object.__setattr__(self, "mode", mode)
        if self.censoring not in CENSORING_FAMILIES:
            raise ValueError(f"unknown censoring family {self.censoring!r}")
        if self.iz not in (0, 1) or self.ic not in (0, 1):
            raise ValueError("iz and ic must be 0 or 1")
        if self.censoring == "homogeneous" and self.ic:
            raise ValueError("ic applies to the heterogeneous censoring family only")
        if self.reps <= 0:
            raise ValueError("replications must be positive")
        if self.seed is not None and self.seed < 0:
            raise ValueError("seed must be nonnegative")
        CopulaEventModel(self.n, self.rho, self.theta)

    @property
    def event_model(self) -> CopulaEventModel:
        return CopulaEventModel(self.n, self.rho, self.theta)

    def to_dict(self) -> dict:
        return asdict(self)


TABLE3 = {"1": (0.0, 0.0), "2": (0.5, 0.0), "3": (0.0, 1.0), "4": (0.5, 1.0)}
TABLE4 = {"i": (0, 0), "ii": (0, 1), "iii": (1, 0), "iv": (1, 1)}
_ROMAN = {"1": "i", "2": "ii", "3": "iii", "4": "iv"}


def preset(name: str, **overrides) -> ScenarioConfig:
    """``table3-case{1..4}`` or ``table4-case{i..iv}`` (arabic 1-4 accepted for table 4)."""
    key = name.strip().lower()
    if key.startswith("table3-case") and key[11:] in TABLE3:
        rho, theta = TABLE3[key[11:]]
        cfg = ScenarioConfig(case=key, mode="finite", rho=rho, theta=theta, censoring="homogeneous")
    elif key.startswith("table4-case") and _ROMAN.get(key[11:], key[11:]) in TABLE4:
        label = _ROMAN.get(key[11:], key[11:])
        iz, ic = TABLE4[label]
        cfg = ScenarioConfig(
            case=f"table4-case{label}", mode="finite", rho=0.5, theta=1.0,
            censoring="heterogeneous", iz=iz, ic=ic, strata=True,
        )
    else:
        raise KeyError(f"unknown preset {name!r}")
    return replace(cfg, **overrides) if overrides else cfg


PRESETS = [f"table3-case{k}" for k in TABLE3] + [f"table4-case{k}" for k in TABLE4]


def assignment_probabilities(config: ScenarioConfig) -> np.ndarray:
    X = covariate_pattern(config.n)
    return 0.5 + config.iz * 0.2 * (1 - 2 * X)


def censoring_scales(config: ScenarioConfig) -> tuple[np.ndarray, np.ndarray]:
    """Per-unit scales of the Expo(1) draws for arms 1 and 0."""
    n = config.n
    if config.censoring == "homogeneous":
        return np.full(n, 2.0), np.ones(n)
    X = covariate_pattern(n)
    expo = config.ic * (X - 1)
    return 10.0 ** (1 + expo), 10.0 ** expo.astype(np.float64)


def sample_mechanisms(config: ScenarioConfig, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """One draw of (Z, realized censoring time)."""
    p = assignment_probabilities(config)
    Z = rng.random(config.n) < p
    s1, s0 = censoring_scales(config)
    C1 = s1 * rng.standard_exponential(config.n)
    C0 = s0 * rng.standard_exponential(config.n)
    return Z, np.where(Z, C1, C0)


def replication_rng(seed: int, rep: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(REPLICATION_KEY, rep)))


def fixed_population(config: ScenarioConfig) -> np.ndarray:
    """The single realization of potential event times held fixed in finite-population mode."""
    rng = np.random.default_rng(np.random.SeedSequence(config.seed, spawn_key=(FIXED_POPULATION_KEY,)))
    return sample_copula_event_times(config.event_model, rng)


@dataclass
class ReplicationOutput:
    """Per-replication statistics; NaN marks an undefined statistic (U = 0)."""

    config: ScenarioConfig
    L: np.ndarray
    U: np.ndarray
    lr: np.ndarray
    slr: np.ndarray | None
    fixed_times_digest: str | None = None
    backend: str = _kernels.BACKEND

    def metadata(self) -> dict:
        return {
            "seed": self.config.seed,
            "generator": GENERATOR,
            "fixed_population_stream": [FIXED_POPULATION_KEY] if self.config.mode == "finite" else None,
            "fixed_times_sha256": self.fixed_times_digest,
        }


def _standardize(L: np.ndarray, U: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(U > 0, L / np.sqrt(np.where(U > 0, U, 1.0)), np.nan)


class _Plan:
    """Everything fixed across replications."""

    def __init__(self, config: ScenarioConfig):
        self.config = config
        n = config.n
        self.model = config.event_model
        self.X = covariate_pattern(n)
        self.p = assignment_probabilities(config)
        self.s1, self.s0 = censoring_scales(config)
        self.T = fixed_population(config) if config.mode == "finite" else None
        self.Z = first_half_treated(n) if config.mode == "superpopulation" else None
        self.strata_idx = [np.flatnonzero(self.X == s) for s in (0, 1)] if config.strata else None

    def draw(self, reps: range) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        n = self.config.n
        R = len(reps)
        zeta = np.empty((R, n)) if self.T is None else None
        Z = np.empty((R, n), bool)
        C = np.empty((R, n))
        for j, rep in enumerate(reps):
            rng = replication_rng(self.config.seed, rep)
            # draw order within a replication is part of the reproducibility contract
            if zeta is not None:
                zeta[j] = rng.standard_normal(n)
            Z[j] = self.Z if self.Z is not None else rng.random(n) < self.p
            C1 = self.s1 * rng.standard_exponential(n)
            C0 = self.s0 * rng.standard_exponential(n)
            C[j] = np.where(Z[j], C1, C0)
        T = np.broadcast_to(self.T, (R, n)) if zeta is None else self.model.transform(zeta)
        W = np.minimum(T, C)
        delta = T <= C
        return W, delta, Z

    def run_chunk(self, reps: range):
        W, delta, Z = self.draw(reps)
        L, U = _kernels.logrank_rows(W, delta, Z)
        if self.strata_idx is None:
            return L, U, None
        Ls = np.zeros(len(reps))
        Us = np.zeros(len(reps))
        for idx in self.strata_idx:
            l, u = _kernels.logrank_rows(W[:, idx], delta[:, idx], Z[:, idx])
            Ls += l
            Us += u
        return L, U, _standardize(Ls, Us)


def run_scenario(config: ScenarioConfig, threads: int = 1) -> ReplicationOutput:
    """Simulate ``config.reps`` datasets and compute LR (and SLR on X when ``config.strata``)."""
    if config.seed is None:
        raise ValueError("a seed is required")
    if threads < 1:
        raise ValueError("threads must be >= 1")
    plan = _Plan(config)
    R = config.reps
    L = np.empty(R)
    U = np.empty(R)
    slr = np.empty(R) if config.strata else None
    chunks = [range(a, min(a + CHUNK, R)) for a in range(0, R, CHUNK)]

    def work(chunk):
        l, u, s = plan.run_chunk(chunk)
        sl = slice(chunk.start, chunk.stop)
        L[sl] = l
        U[sl] = u
        if slr is not None:
            slr[sl] = s

    if threads == 1:
        for c in chunks:
            work(c)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(work, chunks))

    digest = None
    if plan.T is not None:
        digest = hashlib.sha256(np.ascontiguousarray(plan.T).tobytes()).hexdigest()
    return ReplicationOutput(config, L, U, _standardize(L, U), slr, digest)
