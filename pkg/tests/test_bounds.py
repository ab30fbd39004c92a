"""Bound algebra, Rademacher estimation, and the generalization chain."""

import math

import numpy as np
import pytest

from auctionlearn import (ClassSpec, Discrete, DistributionSpec, SampleSet,
                          Seed, SingleReserve, Uniform, bound_formula,
                          generalization_chain_check, high_prob_bound,
                          main_bound, massart_bound, rademacher_estimate,
                          sample_complexity_estimate, split_sample_space,
                          tlevel_epsilon)

SINGLE = ClassSpec("single-reserve")
ASP = ClassSpec("anonymous-second-price")
PLAYER = ClassSpec("player-reserves")
U01 = DistributionSpec.iid(Uniform(0, 1))


def test_massart_values():
    assert massart_bound(10, 100) == pytest.approx(math.sqrt(2 * math.log(10) / 100))
    assert massart_bound(10, 100) == pytest.approx(0.2146, abs=1e-4)
    assert massart_bound(1, 7) == 0.0
    # range scaling: [0, 2] doubles the m=200 single-reserve figure
    assert massart_bound(400, 200, (0.0, 2.0)) == pytest.approx(
        2 * math.sqrt(2 * math.log(400) / 200))
    assert massart_bound(400, 200, (0.0, 2.0)) == pytest.approx(0.4896, abs=1e-4)


def test_massart_monotonicity():
    assert massart_bound(20, 50) > massart_bound(10, 50)
    assert massart_bound(10, 100) < massart_bound(10, 50)


def test_main_bound_single_reserve():
    r = main_bound(SINGLE, 200)
    assert r.expected_gap_bound == pytest.approx(math.sqrt(2 * math.log(400) / 200))
    assert r.expected_gap_bound == pytest.approx(0.2448, abs=1e-4)
    assert r.log_tau_2m == pytest.approx(math.log(400))
    assert not r.vacuous


def test_main_bound_matches_displayed_formulas():
    # sqrt(2*log(2*n*m)/m) at n=2, m=200
    r = main_bound(ASP, 200, n=2)
    assert r.expected_gap_bound == math.sqrt(2 * math.log(2 * 2 * 200) / 200)
    assert r.expected_gap_bound == pytest.approx(0.2585, abs=1e-4)
    # sqrt(2*n*log(2*m)/m) at n=3, m=1000
    r = main_bound(PLAYER, 1000, n=3)
    assert r.expected_gap_bound == math.sqrt(2 * 3 * math.log(2000) / 1000)
    assert r.expected_gap_bound == pytest.approx(0.2135, abs=1e-4)


def test_bound_formula_strings():
    assert bound_formula(SINGLE) == "sqrt(2*log(2*m)/m)"
    assert bound_formula(ASP) == "sqrt(2*log(2*n*m)/m)"
    assert bound_formula(PLAYER) == "sqrt(2*n*log(2*m)/m)"


def test_range_scaling_of_main_bound():
    unit = main_bound(SINGLE, 200).expected_gap_bound
    wide = main_bound(SINGLE, 200, value_range=(0.0, 2.0)).expected_gap_bound
    assert wide == pytest.approx(2 * unit)


def test_high_prob_bound():
    r = main_bound(SINGLE, 200)
    assert high_prob_bound(r, 0.1) == pytest.approx(r.expected_gap_bound / 0.1)
    assert high_prob_bound(r, 0.1) == pytest.approx(2.448, abs=5e-4)
    # the delta-bearing report is flagged vacuous on [0, 1]
    assert main_bound(SINGLE, 200, delta=0.1).vacuous
    assert not main_bound(SINGLE, 200, delta=0.9).vacuous
    assert high_prob_bound(r, 0.5) * 0.5 == r.expected_gap_bound  # binary delta: exact
    assert high_prob_bound(r, 0.25) * 0.25 == r.expected_gap_bound
    with pytest.raises(ValueError):
        high_prob_bound(r, 1.0)
    with pytest.raises(ValueError):
        high_prob_bound(r, 0.0)


def test_vacuous_flag_reported_not_clipped():
    r = main_bound(SINGLE, 2)
    assert r.expected_gap_bound > 1.0
    assert r.vacuous


def test_tlevel_epsilon_full_precision():
    t = tlevel_epsilon(2, 1000)
    assert t.epsilon == (2 * 2 * math.log(2000) / 1000) ** (1.0 / 3.0)
    assert t.epsilon == pytest.approx(0.3121, abs=2e-4)
    assert t.levels == math.ceil(1.0 / t.epsilon) == 4
    assert t.overall_bound == 2.0 * t.epsilon


def test_tlevel_epsilon_decreases_with_m():
    eps = [tlevel_epsilon(1, m).epsilon for m in (10, 100, 1000, 10000)]
    assert all(a > b for a, b in zip(eps, eps[1:]))


def test_sample_complexity_single_reserve_half():
    assert sample_complexity_estimate(SINGLE, 0.5) == 34
    # direct verification at the boundary
    assert main_bound(SINGLE, 34).expected_gap_bound <= 0.5
    assert main_bound(SINGLE, 33).expected_gap_bound > 0.5


def test_sample_complexity_trivial_epsilon():
    b1 = main_bound(SINGLE, 1).expected_gap_bound
    assert sample_complexity_estimate(SINGLE, b1 + 0.01) == 1


def test_sample_complexity_scaling_factor():
    # for an m^n class the output tracks n*log(1/eps)/eps^2 within a factor 4
    ratios = []
    for eps in (0.2, 0.1, 0.05):
        m = sample_complexity_estimate(PLAYER, eps, n=2)
        ratios.append(m * eps**2 / (2 * math.log(1 / eps)))
    assert max(ratios) / min(ratios) <= 4.0


def test_sample_complexity_validation():
    with pytest.raises(ValueError):
        sample_complexity_estimate(SINGLE, 0.0)


def uniform_sample(m, seed, n=1):
    gen = np.random.default_rng(seed)
    return SampleSet(gen.random((m, n, 1)))


def test_rademacher_singleton_is_zero_mean():
    S = uniform_sample(20, 1)
    est = rademacher_estimate(S, [SingleReserve(0.5)], draws=20_000, seed=Seed(5))
    assert abs(est.estimate) <= 3 * est.std_error
    assert est.set_size == 1


def test_rademacher_single_point_sample():
    S = SampleSet(np.array([[[1.0]]]))
    est = rademacher_estimate(S, [SingleReserve(1.0)], draws=20_000, seed=Seed(6))
    # one +/-1 variable scaled by 2: mean 0, observed values +/-2
    assert abs(est.estimate) <= 3 * est.std_error
    assert est.estimate <= 2.0


def test_rademacher_duplication_invariance():
    S = uniform_sample(12, 2)
    hyps = [SingleReserve(0.3), SingleReserve(0.7)]
    a = rademacher_estimate(S, hyps, draws=500, seed=Seed(7))
    b = rademacher_estimate(S, hyps * 3, draws=500, seed=Seed(7))
    assert a.estimate == b.estimate and a.std_error == b.std_error


def test_rademacher_below_enumerated_massart():
    for seed in range(4):
        S = uniform_sample(10, 100 + seed)
        space = split_sample_space(SINGLE, S, "exact")
        est = rademacher_estimate(S, space.hypotheses, draws=4000, seed=Seed(seed))
        assert est.estimate <= massart_bound(len(space), S.m) + 3 * est.std_error


def test_chain_check_uniform_small():
    report = generalization_chain_check(SINGLE, U01, m=4, replicates=80,
                                        sigma_draws=500, seed=Seed(11))
    assert report.optimum == pytest.approx(0.25)
    assert report.optimum_source == "analytic"
    assert report.chain_holds
    assert report.gap_mean >= -3 * report.gap_se
    assert report.theoretical_bound == pytest.approx(
        math.sqrt(2 * math.log(8) / 4))


def test_chain_check_point_mass_has_zero_gap():
    point = DistributionSpec.iid(Discrete((0.5,), (1.0,)))
    report = generalization_chain_check(SINGLE, point, m=3, replicates=10,
                                        sigma_draws=300, seed=Seed(12))
    assert report.gap_mean == 0.0
    assert report.chain_holds


def test_chain_check_non_analytic_class_uses_monte_carlo():
    dist2 = DistributionSpec.iid(Uniform(0, 1), 2, 1)
    # quadrature reference for the two-uniform-bidder reserve optimum:
    # one bidder above r pays r; both above pay the smaller of the two
    best = 0.0
    for r in np.linspace(0, 1, 2001):
        p_one = 2 * (1 - r) * r
        e_both = (1 - r) ** 2 * (r + (1 - r) / 3)
        best = max(best, p_one * r + e_both)
    report = generalization_chain_check(
        ClassSpec("anonymous-second-price"), dist2, m=4, replicates=30,
        sigma_draws=400, seed=Seed(14), optimum=best, eval_draws=4000)
    assert report.optimum_source == "provided"
    assert report.chain_holds
