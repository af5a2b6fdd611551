"""Lattice construction, truncated-Gaussian moments, and pathwise certificates."""

import math

import numpy as np
import pytest
from scipy import integrate, stats

from salab import (
    IncrementModel,
    Spectrum,
    build_lattice_instance,
    certified_delta_lower,
    couple_quantile,
    eta_moments,
    feller_floor,
    lower_moment_bound,
    simulate_U,
    substream,
)

POLY2 = Spectrum.polynomial(2.0)


def quad_eta_moments(s_sq, step):
    """Independent quadrature oracle for the truncated second/fourth moments."""
    s = math.sqrt(s_sq)
    half = step / 2.0
    m2 = integrate.quad(
        lambda t: t * t * stats.norm.pdf(t, scale=s), -half, half, epsabs=0, epsrel=1e-12
    )[0]
    m4 = integrate.quad(
        lambda t: t**4 * stats.norm.pdf(t, scale=s), -half, half, epsabs=0, epsrel=1e-12
    )[0]
    return m2, m4


class TestEtaMoments:
    def test_unit_truncation_values(self):
        # s = 1, step = 2 puts the cut at one standard deviation; quadrature
        # gives 0.19874804309879923 and 0.11230268025811091
        m2, m4 = eta_moments(1.0, 2.0)
        q2, q4 = quad_eta_moments(1.0, 2.0)
        assert m2 == pytest.approx(q2, rel=1e-10)
        assert m4 == pytest.approx(q4, rel=1e-10)
        assert m2 == pytest.approx(0.1987480, abs=5e-8)
        assert m4 == pytest.approx(0.1123027, abs=5e-8)

    def test_wide_window_recovers_gaussian_moments(self):
        m2, m4 = eta_moments(1.0, 1000.0)
        assert m2 == pytest.approx(1.0, rel=1e-12)
        assert m4 == pytest.approx(3.0, rel=1e-12)

    def test_vanishing_window(self):
        m2, m4 = eta_moments(1.0, 1e-8)
        assert m2 <= 1e-16 and m4 <= 1e-24

    def test_vectorized_matches_scalar(self):
        s_sq = np.array([0.3, 1.0, 4.2])
        m2, m4 = eta_moments(s_sq, 1.7)
        for i, v in enumerate(s_sq):
            assert m2[i] == pytest.approx(eta_moments(float(v), 1.7)[0], rel=1e-14)
            assert m4[i] == pytest.approx(eta_moments(float(v), 1.7)[1], rel=1e-14)

    def test_rejects_bad_inputs(self):
        with pytest.raises(ValueError):
            eta_moments(0.0, 1.0)
        with pytest.raises(ValueError):
            eta_moments(1.0, 0.0)


def test_feller_floor():
    assert feller_floor(2.0, 1.0) == 0.5
    assert feller_floor(1.0, 0.0) == 1.0
    assert feller_floor(0.0, 5.0) == 0.0
    assert feller_floor(0.0, 0.0) == 0.0
    with pytest.raises(ValueError):
        feller_floor(-1.0, 1.0)


class TestBuildInstance:
    def test_cutoff_poly2(self):
        inst = build_lattice_instance(POLY2, 1.0, 10**4, trunc_dim=400)
        assert inst.k == 100  # n sigma_m^2 >= 1 iff m <= 100

    def test_cutoff_exponential(self):
        # n e^{-m} >= 1 iff m <= ln n; 149 > e^5
        inst = build_lattice_instance(Spectrum.exponential(1.0, 1.0), 1.0, 149, trunc_dim=64)
        assert inst.k == 5
        inst2 = build_lattice_instance(Spectrum.exponential(1.0, 1.0), 1.0, 148, trunc_dim=64)
        assert inst2.k == 4  # 148 < e^5

    def test_cutoff_zero_when_n_small(self):
        inst = build_lattice_instance(POLY2, 2.0, 3, trunc_dim=32)
        assert inst.k == 0

    def test_step_below_sigma_rejected(self):
        with pytest.raises(ValueError):
            build_lattice_instance(POLY2, 0.5, 100)

    def test_capture_note(self):
        # D = 10 k captures 90% of the tail trace for poly(2)
        inst = build_lattice_instance(POLY2, 1.0, 10**4, trunc_dim=1000)
        assert inst.captured_fraction < 0.999
        assert any("captures" in note for note in inst.notes)
        assert inst.truncation_deficit > 0.0

    def test_k_monotone_in_n_and_step(self):
        ks_n = [build_lattice_instance(POLY2, 1.0, n, trunc_dim=4000).k
                for n in (10, 10**2, 10**3, 10**4)]
        assert ks_n == sorted(ks_n)
        ks_step = [build_lattice_instance(POLY2, s, 10**4, trunc_dim=4000).k
                   for s in (1.0, 2.0, 4.0, 8.0)]
        assert ks_step == sorted(ks_step, reverse=True)

    def test_moment_bracket_contains_brute_force_sum(self):
        n, dim, upto = 200, 100, 700
        inst = build_lattice_instance(POLY2, 1.0, n, trunc_dim=dim)
        brute = math.fsum(
            integrate.quad(
                lambda t: t * t * stats.norm.pdf(t, scale=math.sqrt(n * POLY2.sigma_sq(m))),
                -0.5,
                0.5,
                epsabs=0,
                epsrel=1e-10,
            )[0]
            for m in range(inst.k + 1, upto)
        )
        # coordinates beyond the quadrature range contribute at most n * B^2
        rest = n * POLY2.tail_variance(upto - 1)
        assert inst.a - inst.a_half - 1e-9 <= brute + rest
        assert brute <= inst.a + inst.a_half + 1e-9

    def test_a_dominated_by_tail_trace_and_comparable(self):
        # a <= n B_k^2 since eta^2 <= T^2; the ratio stays of order one
        for n in (10**2, 10**3, 10**4, 10**5):
            inst = build_lattice_instance(POLY2, 1.0, n, trunc_dim=max(256, 16 * int(math.isqrt(n))))
            trace = n * POLY2.tail_variance(inst.k)
            assert inst.a <= trace * (1.0 + 1e-9)
            assert 0.1 <= inst.a / trace <= 1.0

    def test_finite_spectrum_empty_tail(self):
        spec = Spectrum.explicit([1.0, 0.5])
        inst = build_lattice_instance(spec, 1.0, 100)
        assert inst.k == 2 == inst.trunc_dim  # every coordinate is pinned
        assert inst.a == 0.0 and inst.b == 0.0 and inst.feller_floor == 0.0


class TestSimulateU:
    def test_determinism(self):
        inst = build_lattice_instance(POLY2, 1.0, 500, trunc_dim=256)
        s1 = simulate_U(inst, 500, master_seed=13)
        s2 = simulate_U(inst, 500, master_seed=13)
        assert s1 == s2

    def test_mean_matches_a_within_bracket(self):
        inst = build_lattice_instance(POLY2, 1.0, 2000, trunc_dim=2000)
        summary = simulate_U(inst, 4000, master_seed=23)
        budget = inst.truncation_deficit + inst.a_half + 4.0 * summary.se_u
        assert abs(summary.mean_u - inst.a) <= budget

    def test_probability_floor(self):
        inst = build_lattice_instance(POLY2, 1.0, 2000, trunc_dim=2000)
        summary = simulate_U(inst, 4000, master_seed=29)
        assert summary.prob_half_a >= inst.feller_floor - 4.0 * summary.prob_se

    def test_empty_tail_gives_zero(self):
        inst = build_lattice_instance(Spectrum.explicit([1.0, 0.5]), 1.0, 100)
        summary = simulate_U(inst, 100, master_seed=31)
        assert summary.mean_u == 0.0 and summary.se_u == 0.0

    def test_threads_do_not_change_results(self):
        inst = build_lattice_instance(POLY2, 1.0, 300, trunc_dim=128)
        assert simulate_U(inst, 200, 37, threads=1) == simulate_U(inst, 200, 37, threads=4)


class TestCertificate:
    def test_single_coordinate_exhaustive_minimum(self):
        # T = 0.3, step 1: the closest lattice point is 0, at distance 0.3
        spec = Spectrum.explicit([1.0])
        inst = build_lattice_instance(spec, 1.0, 1, trunc_dim=1)
        assert inst.k == 1  # n sigma_1^2 = 1 >= step^2
        # force k = 0 with a wider step so the certificate sees the coordinate
        inst0 = build_lattice_instance(Spectrum.explicit([0.25]), 1.0, 1, trunc_dim=1)
        assert inst0.k == 0
        cert = certified_delta_lower(np.array([[0.3]]), inst0)
        assert cert == pytest.approx(0.3, rel=1e-15)
        assert min(abs(s - 0.3) for s in (-3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0)) >= cert - 1e-15

    def test_outside_window_contributes_nothing(self):
        inst0 = build_lattice_instance(Spectrum.explicit([0.25]), 1.0, 1, trunc_dim=1)
        assert certified_delta_lower(np.array([[0.7]]), inst0) == 0.0

    def test_pathwise_on_coupled_lattice_paths(self):
        n, dim = 400, 128
        inst = build_lattice_instance(POLY2, 1.0, n, trunc_dim=dim)
        model = IncrementModel("lattice3", POLY2, dim, lattice_step=1.0)
        for rep in range(40):
            paths = couple_quantile(model, n, substream(43, rep))
            cert = certified_delta_lower(paths, inst)
            assert cert <= paths.delta

    def test_dimension_mismatch_rejected(self):
        inst = build_lattice_instance(POLY2, 1.0, 100, trunc_dim=64)
        with pytest.raises(ValueError):
            certified_delta_lower(np.zeros((10, 32)), inst)


class TestLowerMomentBound:
    def test_zero_cutoff_convention(self):
        inst = build_lattice_instance(POLY2, 2.0, 3, trunc_dim=64)
        assert inst.k == 0
        bound = lower_moment_bound(inst, 4.0)
        assert bound.head_term == 0.0
        assert bound.tail_term == pytest.approx((3.0 * POLY2.tail_variance(0)) ** 2, rel=1e-9)

    def test_poly2_worked_case(self):
        inst = build_lattice_instance(POLY2, 1.0, 10**4, trunc_dim=400)
        bound = lower_moment_bound(inst, 4.0)
        # oracle: trigamma tail of the squares
        tail = float(10**4 * POLY2.tail_variance(100))
        assert bound.tail_term == pytest.approx(tail**2, rel=1e-9)
        assert bound.tail_term == pytest.approx(9900.58, abs=0.5)
        assert bound.head_term == pytest.approx((1.0 * 100) ** 2, rel=1e-12)

    def test_gamma_two_is_exact_trace(self):
        inst = build_lattice_instance(POLY2, 1.0, 100, trunc_dim=400)
        bound = lower_moment_bound(inst, 2.0)
        assert bound.tail_term == pytest.approx(100 * POLY2.tail_variance(inst.k), rel=1e-12)
