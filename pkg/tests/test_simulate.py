"""Increment models, quantile couplings, and empirical inequality checks."""

import io
import math

import numpy as np
import pytest
from scipy import integrate, special

from salab import (
    IncrementModel,
    Spectrum,
    couple_quantile,
    delta_n,
    dump_paths,
    empirical_check_montgomery_smith,
    empirical_check_rosenthal,
    inv_phi,
    norm_moment,
    sample_increments,
    substream,
)

POLY2 = Spectrum.polynomial(2.0)
UNIT = Spectrum.explicit([1.0])


def model(kind, spectrum=POLY2, dim=4, step=None):
    return IncrementModel(kind, spectrum, dim, lattice_step=step)


ALL_KINDS = [
    model("gaussian"),
    model("twopoint"),
    model("uniform"),
    model("lattice3", step=1.5),
]


class TestInvPhi:
    def test_against_scipy_quantile(self):
        # scipy.special.ndtri is the independent oracle
        rng = np.random.default_rng(7)
        u = np.concatenate(
            [
                rng.uniform(1e-15, 1.0 - 1e-15, 50000),
                [1e-15, 1e-9, 0.02425, 0.5, 0.97575, 1.0 - 1e-9],
            ]
        )
        err = np.abs(inv_phi(u) - special.ndtri(u))
        assert err.max() <= 1e-9  # design target; measured ~3e-15

    def test_symmetry_and_edges(self):
        # for u >= 1/2 the reflection 1 - u is exact, so the upper branch is
        # bitwise the negated lower branch
        u = np.array([0.5078125, 0.77, 0.9921875, 1.0 - 1e-12])
        np.testing.assert_array_equal(inv_phi(u), -inv_phi(1.0 - u))
        assert inv_phi(0.5) == 0.0
        assert inv_phi(0.0) == -math.inf and inv_phi(1.0) == math.inf
        with pytest.raises(ValueError):
            inv_phi(1.5)


class TestIncrementModel:
    def test_validation(self):
        with pytest.raises(ValueError):
            model("poisson")
        with pytest.raises(ValueError):
            model("gaussian", dim=0)
        with pytest.raises(ValueError):
            model("lattice3", step=0.9)  # sigma_1^2 = 1 > step^2
        with pytest.raises(ValueError):
            model("twopoint", step=1.0)
        model("lattice3", step=1.0)  # boundary sigma_1^2 == step^2 is allowed

    @pytest.mark.parametrize("m", ALL_KINDS, ids=lambda m: m.kind)
    def test_marginal_mean_and_variance(self, m):
        draws = 10**5
        x = sample_increments(m, draws, substream(101, 0))
        se_mean = m.sds / math.sqrt(draws)
        assert np.all(np.abs(x.mean(axis=0)) <= 4.0 * se_mean + 1e-12)
        second = (x**2).mean(axis=0)
        se_second = (x**2).std(axis=0, ddof=1) / math.sqrt(draws)
        assert np.all(np.abs(second - m.variances) <= 4.0 * se_second + 1e-12)

    def test_lattice_probabilities(self):
        m = model("lattice3", dim=3, step=1.5)
        x = sample_increments(m, 10**5, substream(5, 0))
        p = m.variances / 1.5**2
        for col in range(3):
            for value, prob in [(-1.5, p[col] / 2), (0.0, 1 - p[col]), (1.5, p[col] / 2)]:
                phat = np.mean(x[:, col] == value)
                se = math.sqrt(prob * (1 - prob) / 10**5)
                assert abs(phat - prob) <= 4.0 * se + 1e-12

    def test_lattice_edge_probability_one(self):
        # sigma^2 == step^2 leaves no mass at zero
        m = IncrementModel("lattice3", UNIT, 1, lattice_step=1.0)
        x = sample_increments(m, 4000, substream(6, 0))
        assert set(np.unique(x)) == {-1.0, 1.0}

    def test_lattice_fourth_moment_identity(self):
        # E Z_m^4 = step^2 sigma_m^2 for the three-point law
        m = model("lattice3", dim=3, step=1.0)
        x = sample_increments(m, 10**5, substream(8, 0))
        fourth = (x**4).mean(axis=0)
        se = (x**4).std(axis=0, ddof=1) / math.sqrt(10**5)
        assert np.all(np.abs(fourth - m.variances) <= 4.0 * se)

    def test_norm_moment_closed_forms(self):
        two = model("twopoint", dim=2)
        assert norm_moment(two, 6.0) == pytest.approx(1.25**3, rel=1e-12)
        assert norm_moment(two, 2.0) == pytest.approx(1.25, rel=1e-12)
        g1 = IncrementModel("gaussian", UNIT, 1)
        assert norm_moment(g1, 4.0) == pytest.approx(3.0, rel=1e-12)
        assert norm_moment(g1, 6.0) == pytest.approx(15.0, rel=1e-12)
        # fourth moment via the independent-coordinate expansion
        gd = model("gaussian", dim=3)
        var = gd.variances
        assert norm_moment(gd, 4.0) == pytest.approx(
            float(np.sum(var)) ** 2 + 2.0 * float(np.sum(var**2)), rel=1e-12
        )
        un = model("uniform", dim=2)
        mc = sample_increments(un, 2 * 10**5, substream(9, 0))
        hat = np.mean(np.sum(mc**2, axis=1) ** 2)
        se = np.std(np.sum(mc**2, axis=1) ** 2, ddof=1) / math.sqrt(2 * 10**5)
        assert abs(norm_moment(un, 4.0) - hat) <= 4.0 * se
        with pytest.raises(NotImplementedError):
            norm_moment(model("gaussian", dim=2), 6.0)


class TestDeltaN:
    def test_hand_cases(self):
        assert delta_n(np.ones((3, 2)), np.ones((3, 2))) == (0.0, 0.0)
        assert delta_n(np.array([[1.0]]), np.array([[0.5]])) == (0.5, 0.5)
        d, d_inf = delta_n(np.array([[1.0, 0.0], [0.0, 1.0]]), np.zeros((2, 2)))
        assert d == pytest.approx(math.sqrt(2.0), rel=1e-15)
        assert d_inf == 1.0

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            delta_n(np.zeros((2, 2)), np.zeros((3, 2)))


class TestCoupling:
    def test_gaussian_coupling_is_pathwise_exact(self):
        paths = couple_quantile(model("gaussian"), 64, substream(11, 0))
        assert paths.delta == 0.0 and paths.delta_inf == 0.0
        np.testing.assert_array_equal(paths.x, paths.y)

    def test_twopoint_second_moment_against_quadrature(self):
        # oracle: E(X - Y)^2 = int_0^1 (sign(u - 1/2) - invPhi(u))^2 du
        oracle = integrate.quad(
            lambda u: (math.copysign(1.0, u - 0.5) - special.ndtri(u)) ** 2,
            0.0,
            1.0,
            points=[0.5],
            epsabs=0,
            epsrel=1e-10,
        )[0]
        assert oracle == pytest.approx(2.0 * (1.0 - math.sqrt(2.0 / math.pi)), rel=1e-9)
        m = IncrementModel("twopoint", UNIT, 1)
        reps = 20000
        vals = np.array(
            [couple_quantile(m, 1, substream(21, r)).delta ** 2 for r in range(reps)]
        )
        se = vals.std(ddof=1) / math.sqrt(reps)
        assert abs(vals.mean() - oracle) <= 4.0 * se

    @pytest.mark.parametrize("m", ALL_KINDS, ids=lambda m: m.kind)
    def test_gaussian_partner_matches_covariance(self, m):
        paths = couple_quantile(m, 10**4, substream(31, 0))
        second = (paths.y**2).mean(axis=0)
        se = (paths.y**2).std(axis=0, ddof=1) / math.sqrt(10**4)
        assert np.all(np.abs(second - m.variances) <= 4.0 * se + 1e-12)

    def test_comonotone_in_the_shared_uniform(self):
        for kind, step in [("twopoint", None), ("lattice3", 1.0), ("uniform", None), ("gaussian", None)]:
            m = IncrementModel(kind, UNIT, 1, lattice_step=step)
            paths = couple_quantile(m, 512, substream(41, 0), keep_uniforms=True)
            order = np.argsort(paths.u[:, 0])
            assert np.all(np.diff(paths.x[order, 0]) >= 0)
            assert np.all(np.diff(paths.y[order, 0]) >= 0)

    def test_determinism_bitwise(self):
        a = couple_quantile(model("lattice3", step=1.5), 128, substream(77, 3))
        b = couple_quantile(model("lattice3", step=1.5), 128, substream(77, 3))
        np.testing.assert_array_equal(a.x, b.x)
        np.testing.assert_array_equal(a.sy, b.sy)
        assert a.delta == b.delta and a.delta_inf == b.delta_inf

    @pytest.mark.parametrize("m", ALL_KINDS, ids=lambda m: m.kind)
    def test_norm_ordering(self, m):
        paths = couple_quantile(m, 100, substream(51, 0))
        assert paths.delta >= paths.delta_inf >= 0.0

    @pytest.mark.parametrize("m", ALL_KINDS, ids=lambda m: m.kind)
    def test_partial_sum_telescoping(self, m):
        paths = couple_quantile(m, 200, substream(61, 0))
        if m.kind == "lattice3":
            # integer bookkeeping telescopes exactly
            units = paths.sx_units
            assert units.dtype == np.int64
            np.testing.assert_array_equal(units[1:] - units[:-1], paths.x_units[1:])
            np.testing.assert_array_equal(paths.sx, m.lattice_step * units)
        else:
            # stored sums come from sequential accumulation: each row is
            # bitwise the previous row plus the increment
            np.testing.assert_array_equal(paths.sx[1:], paths.sx[:-1] + paths.x[1:])
        np.testing.assert_array_equal(paths.sy[1:], paths.sy[:-1] + paths.y[1:])
        np.testing.assert_array_equal(paths.sx[0], paths.x[0])

    def test_lattice_membership_of_partial_sums(self):
        step = 0.1  # deliberately not a binary fraction
        spec = Spectrum.explicit([0.01, 0.005])
        m = IncrementModel("lattice3", spec, 2, lattice_step=step)
        paths = couple_quantile(m, 500, substream(71, 0))
        exact = step * paths.sx_units
        ulp = np.spacing(np.abs(exact) + np.float64(step))
        assert np.all(np.abs(paths.sx - exact) <= ulp)

    def test_dump_paths_header(self):
        m = model("twopoint", dim=2)
        paths = couple_quantile(m, 3, substream(81, 0))
        buf = io.StringIO()
        dump_paths(paths, buf, seed=81)
        lines = buf.getvalue().splitlines()
        assert lines[0].startswith("# model=twopoint(poly:2.0,D=2)")
        assert "seed=81" in lines[0]
        assert lines[1] == "j,m,X,Y"
        assert len(lines) == 2 + 3 * 2


class TestMontgomerySmith:
    def test_enumeration_two_flips(self):
        # four equally likely outcomes; margins frozen from the exact law
        m = IncrementModel("twopoint", UNIT, 1)
        margins = empirical_check_montgomery_smith(m, 2, [0.5, 1.0, 2.0], reps=0, method="enumerate")
        assert [p.margin for p in margins] == [-3.5, -4.0, -4.5]
        assert all(p.stderr == 0.0 for p in margins)

    def test_degenerate_zero_model(self):
        m = IncrementModel("twopoint", Spectrum.explicit([0.0]), 1)
        margins = empirical_check_montgomery_smith(m, 2, [0.5, 1.0], reps=0, method="enumerate")
        assert all(p.prob_max == p.prob_final == p.margin == 0.0 for p in margins)

    def test_single_increment_margin_nonpositive_identically(self):
        # max_s ||S_s|| = ||S_1|| and x/30 < x, so the empirical margin cannot
        # be positive on any sample
        m = model("uniform", dim=2)
        margins = empirical_check_montgomery_smith(
            m, 1, [0.1, 0.5, 1.0], reps=2000, rng=substream(91, 0)
        )
        assert all(p.margin <= 0.0 for p in margins)

    def test_mc_margins_nonpositive_within_4se(self):
        m = model("lattice3", dim=3, step=1.2)
        scale = math.sqrt(8 * float(np.sum(m.variances)))
        xs = [f * scale for f in (0.5, 1.0, 2.0, 3.0)]
        margins = empirical_check_montgomery_smith(m, 8, xs, reps=4000, rng=substream(92, 0))
        assert all(p.margin <= 4.0 * p.stderr for p in margins)

    def test_enumeration_cap(self):
        m = model("lattice3", dim=4, step=1.0)
        with pytest.raises(ValueError, match="cap"):
            empirical_check_montgomery_smith(m, 12, [1.0], reps=0, method="enumerate")


class TestRosenthal:
    def test_enumeration_oracle_three_summands(self):
        # per-coordinate sign algebra gives E||S_3||^4 = 21(s1^4+s2^4) + 18 s1^2 s2^2
        m = model("twopoint", dim=2)
        check = empirical_check_rosenthal(m, 3, 4.0, method="enumerate")
        assert check.moment == pytest.approx(26.8125, abs=1e-12)
        assert check.denominator == pytest.approx(18.75, abs=1e-12)
        assert check.ratio == pytest.approx(1.43, abs=1e-12)

    def test_mc_agrees_with_enumeration(self):
        m = model("twopoint", dim=2)
        exact = empirical_check_rosenthal(m, 3, 4.0, method="enumerate")
        mc = empirical_check_rosenthal(m, 3, 4.0, reps=20000, rng=substream(93, 0))
        assert abs(mc.ratio - exact.ratio) <= 4.0 * mc.stderr

    def test_gaussian_ratio_approaches_three(self):
        # E S_n^4 = 3 (n sigma^2)^2, so the ratio is 3n/(n+3)
        m = IncrementModel("gaussian", UNIT, 1)
        for n in (10, 80):
            check = empirical_check_rosenthal(m, n, 4.0, reps=20000, rng=substream(94, n))
            assert abs(check.ratio - 3.0 * n / (n + 3.0)) <= 4.0 * check.stderr

    def test_single_summand_ratio_below_one(self):
        m = model("twopoint", dim=3)
        check = empirical_check_rosenthal(m, 1, 4.0, method="enumerate")
        assert check.ratio <= 1.0
