import math

import numpy as np
import pytest

from schemerisk.annuity import DiscountBasis, basis_moments
from schemerisk.lifetable import MortalityBasis, from_rates
from schemerisk.scheme import (
    SchemeSpec,
    UndefinedVcoError,
    benefit_factor,
    default_n_grid,
    executive_count,
    f_factor,
    liability_moments,
    vco_curve,
)


class TestSchemeSpec:
    def test_executive_layout(self):
        spec = SchemeSpec.executive(100, 0.05, 5)
        assert spec.n_exec == 5
        assert spec.benefits[:5].tolist() == [5.0] * 5
        assert spec.total_benefit == 120
        assert spec.total_benefit_sq == 5 * 25 + 95

    @pytest.mark.parametrize("alpha, n, want", [(0.05, 10, 1), (0.05, 30, 2), (0.05, 100, 5), (0.0, 50, 0), (1.0, 7, 7)])
    def test_headcount_rounds_half_up(self, alpha, n, want):
        assert executive_count(alpha, n) == want

    @pytest.mark.parametrize(
        "build",
        [
            lambda: SchemeSpec.homogeneous(0),
            lambda: SchemeSpec.homogeneous(2.5),
            lambda: SchemeSpec.executive(10, 1.2, 5),
            lambda: SchemeSpec.executive(10, 0.1, 0.5),
            lambda: SchemeSpec.explicit([1.0, 0.0]),
            lambda: SchemeSpec.explicit([]),
            lambda: SchemeSpec.homogeneous(10, x=70, ret=65),
        ],
    )
    def test_rejects_invalid(self, build):
        with pytest.raises(ValueError):
            build()

    def test_resize(self):
        spec = SchemeSpec.executive(100, 0.05, 5).resize(500)
        assert spec.n_exec == 25
        with pytest.raises(ValueError):
            SchemeSpec.explicit([1, 2]).resize(3)


class TestFFactor:
    def test_examples(self):
        assert f_factor(0.3, 1) == 1
        assert f_factor(0, 7) == 1
        assert f_factor(1, 7) == 1
        assert f_factor(0.05, 5) == pytest.approx(2.2 / 1.44, rel=1e-15)
        assert f_factor(0.05, 5) == pytest.approx(1.5278, abs=5e-5)

    def test_at_least_one(self):
        for alpha in np.linspace(0, 1, 41):
            for k in (1, 1.5, 2, 5, 20, 100):
                f = f_factor(alpha, k)
                assert f >= 1 - 1e-15
                if 0 < alpha < 1 and k > 1:
                    assert f > 1

    def test_matches_benefit_vector(self):
        for n, alpha, k in [(100, 0.05, 5), (40, 0.25, 3), (20, 0.5, 20)]:
            spec = SchemeSpec.executive(n, alpha, k)
            assert benefit_factor(spec.benefits) == pytest.approx(f_factor(alpha, k), rel=1e-14)

    def test_domain(self):
        with pytest.raises(ValueError):
            f_factor(-0.1, 2)
        with pytest.raises(ValueError):
            f_factor(0.1, 0.9)


class TestReproduction:
    """Headline figures for the model scheme: age 40, retirement 65, 4% force of interest."""

    def vco(self, pma, discount, basis, spec):
        return liability_moments(spec, basis, pma, discount).vco

    @pytest.mark.parametrize("n, want", [(100, 0.039), (500, 0.018)])
    def test_deterministic(self, pma, discount, deterministic, n, want):
        assert self.vco(pma, discount, deterministic, SchemeSpec.homogeneous(n)) == pytest.approx(want, abs=0.003)

    @pytest.mark.parametrize("n, want", [(100, 0.055), (500, 0.043)])
    def test_two_point(self, pma, discount, two_point, n, want):
        assert self.vco(pma, discount, two_point, SchemeSpec.homogeneous(n)) == pytest.approx(want, abs=0.003)

    def test_floor(self, pma, discount, two_point):
        lm = liability_moments(SchemeSpec.homogeneous(100), two_point, pma, discount)
        assert lm.systematic_vco == pytest.approx(0.039, abs=0.003)
        assert lm.systematic_vco / lm.vco == pytest.approx(0.71, abs=0.03)

    @pytest.mark.parametrize("k, det, sto", [(5, 0.049, 0.062), (20, 0.092, 0.100)])
    def test_executive(self, pma, discount, deterministic, two_point, k, det, sto):
        spec = SchemeSpec.executive(100, 0.05, k)
        assert self.vco(pma, discount, deterministic, spec) == pytest.approx(det, abs=0.003)
        assert self.vco(pma, discount, two_point, spec) == pytest.approx(sto, abs=0.003)


class TestLiabilityMoments:
    def test_single_member(self, pma, discount, two_point):
        y = basis_moments(pma, two_point, discount, 40, 65)
        lm = liability_moments(SchemeSpec.homogeneous(1), two_point, pma, discount)
        assert lm.vco == pytest.approx(math.sqrt(y.variance) / y.m1, rel=1e-14)

    @pytest.mark.parametrize("r", [0, 1, 2])
    @pytest.mark.parametrize("n, alpha, k", [(100, 0.05, 5), (500, 0.05, 20), (40, 0.25, 3)])
    def test_decomposition_identity(self, pma, discount, r, n, alpha, k):
        basis = MortalityBasis.two_point(r)
        y = basis_moments(pma, basis, discount, 40, 65)
        lm = liability_moments(SchemeSpec.executive(n, alpha, k), basis, pma, discount)
        f = f_factor(alpha, k)
        rhs = f * (y.variance - y.cov_pair) / (n * y.m1**2) + y.cov_pair / y.m1**2
        assert lm.vco**2 == pytest.approx(rhs, rel=1e-12)

    def test_deterministic_bound(self, pma, discount, deterministic):
        y = basis_moments(pma, deterministic, discount, 40, 65)
        for n in (1, 10, 100, 1000):
            lm = liability_moments(SchemeSpec.homogeneous(n), deterministic, pma, discount)
            assert lm.vco <= math.sqrt(y.variance) / y.m1 / math.sqrt(n) * (1 + 1e-12)

    @pytest.mark.parametrize("r", [0, 1, 3])
    def test_floor_and_convergence(self, pma, discount, r):
        basis = MortalityBasis.two_point(r)
        for n in (1, 100, 10_000):
            lm = liability_moments(SchemeSpec.homogeneous(n), basis, pma, discount)
            assert lm.vco >= lm.systematic_vco >= 0
            assert lm.idiosyncratic_vco >= 0
            assert lm.sd == math.sqrt(lm.variance)
        big = liability_moments(SchemeSpec.homogeneous(10**6), basis, pma, discount)
        assert big.vco - big.systematic_vco < 1e-3

    def test_scenario_symmetry(self, pma, discount):
        a = liability_moments(SchemeSpec.executive(100, 0.05, 5), MortalityBasis.from_pairs([(1, 0.5), (-1, 0.5)]), pma, discount)
        b = liability_moments(SchemeSpec.executive(100, 0.05, 5), MortalityBasis.from_pairs([(-1, 0.5), (1, 0.5)]), pma, discount)
        assert (a.expected, a.variance, a.vco, a.systematic_vco) == (b.expected, b.variance, b.vco, b.systematic_vco)

    def test_mean_band_across_r(self, pma, discount):
        spec = SchemeSpec.homogeneous(100)
        means = [liability_moments(spec, MortalityBasis.two_point(r), pma, discount).expected for r in (0, 1, 2, 3)]
        assert max(means) / min(means) - 1 < 0.01

    def test_all_dead_table(self):
        table = from_rates([0.5, 1.0], 0)
        with pytest.raises(UndefinedVcoError):
            liability_moments(SchemeSpec.homogeneous(5, x=0, ret=3), MortalityBasis.deterministic(), table, DiscountBasis(0.04))


class TestVcoCurve:
    def test_default_grid(self):
        grid = default_n_grid()
        assert grid[0] == 1 and grid[-1] == 10_000
        assert 999 in grid and 1000 in grid and 1050 not in grid

    @pytest.mark.parametrize("r", [0, 1, 2])
    def test_strictly_decreasing(self, pma, discount, r):
        curve = vco_curve(SchemeSpec.homogeneous(1), MortalityBasis.two_point(r), pma, discount)
        assert np.all(np.diff(curve.vco) < 0)
        assert np.all(curve.vco >= curve.systematic_vco)

    def test_deterministic_floor_zero(self, pma, discount, deterministic):
        curve = vco_curve(SchemeSpec.homogeneous(1), deterministic, pma, discount, [1, 10, 100])
        assert curve.systematic_vco.tolist() == [0.0, 0.0, 0.0]

    def test_matches_pointwise(self, pma, discount, two_point):
        template = SchemeSpec.executive(1, 0.05, 5)
        ns = [1, 7, 30, 100, 333]
        curve = vco_curve(template, two_point, pma, discount, ns)
        for n, v in zip(ns, curve.vco):
            assert v == pytest.approx(liability_moments(template.resize(n), two_point, pma, discount).vco, rel=1e-12)

    def test_continuous_headcount(self, pma, discount, deterministic):
        template = SchemeSpec.executive(1, 0.05, 5)
        curve = vco_curve(template, deterministic, pma, discount, [20, 30], exact_headcount=False)
        exact = vco_curve(template, deterministic, pma, discount, [20, 30])
        assert curve.vco[0] == pytest.approx(exact.vco[0], rel=1e-12)
        assert curve.vco[1] != pytest.approx(exact.vco[1], rel=1e-6)

    @pytest.mark.parametrize("grid", [[], [0, 1], [5, 3], [3, 3]])
    def test_rejects_bad_grid(self, pma, discount, deterministic, grid):
        with pytest.raises(ValueError):
            vco_curve(SchemeSpec.homogeneous(1), deterministic, pma, discount, grid)
