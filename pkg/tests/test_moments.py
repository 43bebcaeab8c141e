import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from randlogrank.moments import (
    FINITE_N_NOTE,
    MechanismSpec,
    _one_minus_pow,
    asymptotic_variance_approx,
    condition_report,
    exact_mean_U,
    exact_variance_L,
    population_condition_reports,
)
from randlogrank.oracle import random_population
from randlogrank.survival import FinitePopulation, build_event_grid, empirical_survival


def _const(c):
    return lambda t: np.full(np.shape(t), float(c))


def _mech(p1=0.5, g1=1.0, g0=1.0):
    return MechanismSpec(p1, _const(g1), _const(g0))


def _approx(grid, mech):
    return asymptotic_variance_approx(grid.n, empirical_survival(grid, grid.n), mech)


class TestClosedForm:
    def test_all_tied_is_zero(self):
        grid = build_event_grid([3.0, 3.0, 3.0])
        assert exact_variance_L(grid, _mech()) == 0.0
        assert exact_mean_U(grid, _mech()) == 0.0
        assert _approx(grid, _mech()) == 0.0

    def test_single_point_eighth(self):
        # two units, first has the only event at t1 = 1: n_1 = 2, d_1 = 1
        grid = build_event_grid([1.0, 2.0])
        mech = _mech()
        # the last grid point has h = 1 and contributes nothing
        assert exact_variance_L(grid, mech) == pytest.approx(0.125, abs=1e-15)
        assert exact_mean_U(grid, mech) == pytest.approx(0.125, abs=1e-15)
        assert _approx(grid, mech) == pytest.approx(0.125, abs=1e-15)

    def test_one_arm_never_observable(self):
        grid = build_event_grid([1.0, 2.0, 3.0, 4.0])
        mech = _mech(g0=0.0)
        assert exact_variance_L(grid, mech) == 0.0
        assert exact_mean_U(grid, mech) == 0.0

    def test_p1_validation(self):
        with pytest.raises(ValueError):
            MechanismSpec(0.0, _const(1), _const(1))

    def test_one_minus_pow_edges(self):
        g = np.array([0.0, 1.0, 0.5, 1e-300])
        m = np.array([5.0, 5.0, 3.0, 2.0])
        np.testing.assert_allclose(_one_minus_pow(g, m), [0.0, 1.0, 0.875, 2e-300], rtol=1e-15)


@given(st.integers(0, 10_000))
def test_mean_U_equals_variance_L(seed):
    pop = random_population(np.random.default_rng(seed))
    grid = build_event_grid(pop.potential_event_times)
    mech = MechanismSpec.from_population(pop)
    v = exact_variance_L(grid, mech)
    assert v >= 0.0
    assert exact_mean_U(grid, mech) == pytest.approx(v, abs=1e-12)


@given(st.integers(0, 10_000))
def test_approximation_error_bounded_by_hazard_sum(seed):
    pop = random_population(np.random.default_rng(seed))
    grid = build_event_grid(pop.potential_event_times)
    mech = MechanismSpec.from_population(pop)
    assert abs(_approx(grid, mech) - exact_variance_L(grid, mech)) <= grid.hazard.sum() + 1e-12


def test_bracket_nondecreasing_in_g():
    g = np.linspace(0.0, 1.0, 2001)
    for m in range(2, 60):
        bracket = g - _one_minus_pow(g, np.full_like(g, m)) / m
        assert np.all(np.diff(bracket) >= -1e-15)


@given(st.integers(0, 10_000), st.floats(0.05, 1.0))
def test_scaling_censoring_down_never_increases_variance(seed, c):
    rng = np.random.default_rng(seed)
    grid = build_event_grid(rng.integers(1, 9, size=int(rng.integers(3, 30))).astype(float))
    g1, g0 = rng.uniform(0.05, 1.0, 2)
    full = _mech(0.5, g1, g0)
    scaled = _mech(0.5, c * g1, c * g0)  # phi unchanged
    assert exact_variance_L(grid, scaled) <= exact_variance_L(grid, full) + 1e-12


class TestConditionReport:
    def test_no_ties_no_censoring(self):
        grid = build_event_grid([1.0, 2.0, 3.0, 4.0])
        r = condition_report(grid, _mech())
        assert r.d_tilde == 1 and r.g_tilde == 1.0
        assert r.note == FINITE_N_NOTE
        assert r.condition1_p_ok

    def test_ties(self):
        r = condition_report(build_event_grid([1.0, 2.0, 2.0, 5.0]), _mech())
        assert r.d_tilde == 2 and r.g_tilde == 1.0
        assert r.criterion1 == pytest.approx(min(0.5 * math.sqrt(4 / math.log(4)), 4 / 8))

    def test_nothing_observable(self):
        r = condition_report(build_event_grid([1.0, 2.0, 3.0]), _mech(g1=0.0, g0=0.0))
        assert r.g_tilde == 0.0 and r.criterion1 == 0.0
        assert not any(r.condition2_flags["G1_positive"])
        assert not r.condition2_any

    def test_flags_and_bounds(self):
        grid = build_event_grid([1.0, 2.0, 2.0, 5.0])
        r = condition_report(grid, _mech(g1=0.5, g0=1.0))
        assert r.condition2_flags["hazard_below_one"] == [True, True, False]
        assert 1 <= r.d_tilde <= 4 and 0 <= r.g_tilde <= 1
        assert r.to_dict()["note"] == FINITE_N_NOTE

    def test_per_stratum(self):
        pop = FinitePopulation([1.0, 2.0, 3.0, 4.0], p1={0: 0.5, 1: 0.3}, strata=[0, 0, 1, 1])
        reports = population_condition_reports(pop)
        assert set(reports) == {0, 1}
        assert reports[1].p1 == 0.3 and reports[0].n == 2
        nested = condition_report(
            build_event_grid(pop.potential_event_times), _mech(),
            strata={s: (build_event_grid(pop.stratum(s).potential_event_times), _mech()) for s in (0, 1)},
        )
        assert set(nested.condition3) == {0, 1}
        assert "0" in nested.to_dict()["condition3"]
