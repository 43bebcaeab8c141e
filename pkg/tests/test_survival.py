import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from randlogrank.oracle import hypergeom_pmf
from randlogrank.survival import (
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


class TestEventGrid:
    def test_hand_counted(self):
        g = build_event_grid([1.0, 2.0, 2.0, 5.0])
        assert g.times.tolist() == [1.0, 2.0, 5.0]
        assert g.d.tolist() == [1, 2, 1]
        assert g.n_at_risk.tolist() == [4, 3, 1]
        np.testing.assert_allclose(g.hazard, [0.25, 2 / 3, 1.0], rtol=0, atol=1e-15)

    def test_singleton(self):
        g = build_event_grid([3.0])
        assert g.times.tolist() == [3.0] and g.d.tolist() == [1]
        assert g.n_at_risk.tolist() == [1] and g.hazard.tolist() == [1.0]

    def test_all_tied(self):
        g = build_event_grid([2, 2, 2])
        assert g.d.tolist() == [3] and g.n_at_risk.tolist() == [3] and g.hazard.tolist() == [1.0]

    def test_errors(self):
        with pytest.raises(ValueError, match="empty population"):
            build_event_grid([])
        with pytest.raises(ValueError, match="invalid time"):
            build_event_grid([1.0, -0.5])
        with pytest.raises(ValueError, match="invalid time"):
            build_event_grid([1.0, float("nan")])
        with pytest.raises(ValueError, match="invalid time"):
            build_event_grid([math.inf])

    @given(st.lists(st.integers(0, 6), min_size=1, max_size=30), st.randoms(use_true_random=False))
    def test_invariants_and_permutation(self, values, rnd):
        t = [float(v) for v in values]
        g = build_event_grid(t)
        shuffled = list(t)
        rnd.shuffle(shuffled)
        g2 = build_event_grid(shuffled)
        assert g.times.tolist() == g2.times.tolist() and g.d.tolist() == g2.d.tolist()
        assert g.d.sum() == len(t)
        assert np.all(np.diff(g.times) > 0)
        assert np.all(np.diff(g.n_at_risk) <= 0)
        for k in range(g.K):
            assert g.n_at_risk[k] == g.d[k:].sum()
        assert np.all((g.hazard > 0) & (g.hazard <= 1)) and g.hazard[-1] == 1.0


class TestContingency:
    def test_examples(self, two_records):
        c = contingency_at(two_records, 1.0)
        assert (c.n1, c.n0, c.d1, c.d0) == (1, 1, 1, 0)
        c = contingency_at(two_records, 2.0)
        assert (c.n1, c.n0, c.d1, c.d0) == (0, 1, 0, 1)

    def test_empty(self):
        c = contingency_at([], 3.0)
        assert (c.n1, c.n0, c.d1, c.d0) == (0, 0, 0, 0)

    @given(
        st.lists(st.tuples(st.integers(0, 5), st.booleans(), st.integers(0, 1)), min_size=1, max_size=20),
        st.integers(0, 6),
    )
    def test_table_identities(self, rows, t):
        recs = [SurvivalRecord(i, float(w), e, z) for i, (w, e, z) in enumerate(rows)]
        c = contingency_at(recs, float(t))
        assert c.n_total == sum(1 for w, _, _ in rows if w >= t)
        assert c.d_total == sum(1 for w, e, _ in rows if e and w == t)
        assert 0 <= c.d1 <= c.n1 and 0 <= c.d0 <= c.n0

    def test_record_validation(self):
        with pytest.raises(ValueError):
            SurvivalRecord(0, -1.0, True, 1)
        with pytest.raises(ValueError):
            SurvivalRecord(0, 1.0, True, 2)


class TestHypergeometricMoments:
    def test_examples(self):
        m, v = hypergeometric_mean_var(4, 2, 2)
        assert m == 1.0 and v == pytest.approx(1 / 3, abs=1e-15)
        assert hypergeometric_mean_var(1, 1, 1) == (1.0, 0.0)
        assert hypergeometric_mean_var(5, 0, 3) == (0.0, 0.0)
        assert hypergeometric_mean_var(0, 0, 0) == (0.0, 0.0)

    def test_invalid(self):
        with pytest.raises(ValueError, match="invalid counts"):
            hypergeometric_mean_var(3, 4, 1)
        with pytest.raises(ValueError, match="invalid counts"):
            hypergeometric_mean_var(3, 1, 4)

    def test_against_enumerated_pmf(self):
        worst = 0.0
        for N in range(0, 13):
            for D in range(N + 1):
                for b in range(N + 1):
                    pmf = [hypergeom_pmf(x, N, D, b) for x in range(b + 1)]
                    mean = math.fsum(x * p for x, p in enumerate(pmf))
                    var = math.fsum((x - mean) ** 2 * p for x, p in enumerate(pmf))
                    m, v = hypergeometric_mean_var(N, D, b)
                    worst = max(worst, abs(m - mean), abs(v - var))
        assert worst < 1e-12


class TestEmpiricalSurvival:
    def test_examples(self):
        F = empirical_survival(build_event_grid([1, 2, 2, 5]), 4)
        assert F.F(1.5) == 0.75
        assert F.F(6.0) == 0.0
        assert F.Lambda(2.0) == pytest.approx(0.25 + 2 / 3, abs=1e-15)
        assert F.F(0.0) == 1.0

    def test_size_mismatch(self):
        with pytest.raises(ValueError, match="size mismatch"):
            empirical_survival(build_event_grid([1, 2]), 3)

    @given(st.lists(st.integers(1, 8), min_size=1, max_size=25))
    def test_jumps_match_multiplicities(self, values):
        g = build_event_grid(values)
        n = len(values)
        F = empirical_survival(g, n)
        Fk = F.F(g.times)
        nxt = np.append(Fk[1:], 0.0)
        np.testing.assert_allclose((Fk - nxt) * n, g.d, atol=1e-9)
        assert np.all(np.diff(F.Lambda(np.linspace(0, 9, 50))) >= 0)
        assert F.Lambda(g.times[-1]) == pytest.approx(g.hazard.sum())


class TestLawsAndPopulation:
    def test_discrete_survival_is_weak_inequality(self):
        law = DiscreteLaw((1.0, 2.0, math.inf), (0.2, 0.3, 0.5))
        assert law.survival(1.0) == pytest.approx(1.0)
        assert law.survival(1.5) == pytest.approx(0.8)
        assert law.survival(2.0) == pytest.approx(0.8)
        assert law.survival(2.5) == pytest.approx(0.5)

    def test_discrete_validation(self):
        with pytest.raises(ValueError):
            DiscreteLaw((1.0, 1.0), (0.5, 0.5))
        with pytest.raises(ValueError):
            DiscreteLaw((1.0, 2.0), (0.5, 0.4))
        with pytest.raises(ValueError):
            DiscreteLaw((1.0,), (0.0,))

    def test_exponential(self):
        law = ExponentialLaw(2.0)
        assert law.survival(2.0) == pytest.approx(math.exp(-1))
        assert law.survival(0.0) == 1.0

    def test_population_validation(self):
        with pytest.raises(ValueError):
            FinitePopulation([1.0, 2.0], p1=1.0)
        with pytest.raises(ValueError):
            FinitePopulation([])
        pop = FinitePopulation([1.0, 2.0, 3.0], p1={0: 0.3, 1: 0.6}, strata=[0, 1, 1])
        assert pop.stratum(1).n == 2 and pop.stratum(1).p1 == 0.6

    def test_survival_data_roundtrip(self, two_records):
        d = SurvivalData.from_records(two_records)
        assert len(d) == 2
        back = d.to_records()
        assert [(r.time, r.event, r.group) for r in back] == [(1.0, True, 1), (2.0, True, 0)]
