"""Generalization-bound algebra and Monte Carlo Rademacher estimation.

Expected-gap bounds take the form (beta - alpha) * sqrt(2 * log(tau(2m)) / m)
with tau the per-class split-sample count bound and log the natural
logarithm; dividing by delta gives the Markov high-probability variant.
Values above the value range are reported as-is but flagged vacuous.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .erm import ClassSpec, erm
from .errors import AnalyticUnsupported
from .mechanisms import (TAG_ASP, TAG_PLAYER, TAG_SINGLE,
                         analytic_true_revenue, monte_carlo_true_revenue,
                         profile_revenues)
from .model import DEFAULT_RANGE, DistributionSpec, SampleSet, Seed, sample_values
from .splitsample import split_sample_space, theoretical_growth_bound


def massart_bound(cardinality: int, m: int,
                  value_range: tuple[float, float] = DEFAULT_RANGE) -> float:
    """Finite-class Rademacher bound: (beta-alpha) * sqrt(2 ln(card) / m)."""
    if cardinality < 1 or m < 1:
        raise ValueError("cardinality and m must be >= 1")
    alpha, beta = value_range
    return (beta - alpha) * math.sqrt(2.0 * math.log(cardinality) / m)


@dataclass(frozen=True)
class BoundReport:
    class_tag: str
    m: int
    n: int
    k: int
    s: int | None
    delta: float | None
    log_tau_2m: float
    expected_gap_bound: float
    high_prob_bound: float | None
    value_range: tuple[float, float]
    vacuous: bool

    def csv_row(self) -> list:
        return [self.class_tag, self.m, self.n, self.k,
                "" if self.s is None else self.s,
                "" if self.delta is None else repr(self.delta),
                repr(self.log_tau_2m), repr(self.expected_gap_bound),
                "" if self.high_prob_bound is None else repr(self.high_prob_bound),
                int(self.vacuous)]


def main_bound(spec: ClassSpec, m: int, n: int = 1, k: int = 1,
               delta: float | None = None,
               value_range: tuple[float, float] = DEFAULT_RANGE) -> BoundReport:
    """Expected-gap bound from the class's split-sample count bound at 2m."""
    if m < 1:
        raise ValueError("m must be >= 1")
    alpha, beta = value_range
    log_tau = theoretical_growth_bound(spec, 2 * m, n, k).log
    bound = (beta - alpha) * math.sqrt(2.0 * log_tau / m)
    hp = None
    if delta is not None:
        _check_delta(delta)
        hp = bound / delta
    headline = bound if hp is None else hp
    return BoundReport(spec.tag, m, n, k, spec.levels, delta, log_tau, bound, hp,
                       value_range, vacuous=headline > (beta - alpha))


def _check_delta(delta: float) -> None:
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie strictly between 0 and 1")


def high_prob_bound(report: BoundReport, delta: float) -> float:
    """Markov step: the expected-gap bound divided by delta."""
    _check_delta(delta)
    return report.expected_gap_bound / delta


_FORMULAS = {
    TAG_SINGLE: "sqrt(2*log(2*m)/m)",
    TAG_ASP: "sqrt(2*log(2*n*m)/m)",
    TAG_PLAYER: "sqrt(2*n*log(2*m)/m)",
}


def bound_formula(spec: ClassSpec) -> str:
    """Canonical closed-form string of the expected-gap bound (unit range)."""
    return _FORMULAS.get(spec.tag, "sqrt(2*log_tau(2*m)/m)")


@dataclass(frozen=True)
class TLevelTuning:
    """Level-count choice balancing discretization loss against the bound."""

    epsilon: float
    levels: int
    overall_bound: float


def tlevel_epsilon(n: int, m: int) -> TLevelTuning:
    """Grid width epsilon = (2n ln(2m) / m)^(1/3), its level count, and the
    resulting overall bound 2 * epsilon."""
    if n < 1 or m < 1:
        raise ValueError("n and m must be >= 1")
    eps = (2.0 * n * math.log(2 * m) / m) ** (1.0 / 3.0)
    return TLevelTuning(eps, math.ceil(1.0 / eps), 2.0 * eps)


def sample_complexity_estimate(spec: ClassSpec, epsilon: float, n: int = 1, k: int = 1,
                               value_range: tuple[float, float] = DEFAULT_RANGE) -> int:
    """Smallest m whose expected-gap bound is <= epsilon.

    Doubling finds a feasible m; binary search then exploits that the bound
    is decreasing from m = 2 on.  epsilon at or above the m = 1 bound
    trivially returns 1.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")

    def bound(m: int) -> float:
        return main_bound(spec, m, n, k, value_range=value_range).expected_gap_bound

    if bound(1) <= epsilon:
        return 1
    hi = 2
    while bound(hi) > epsilon:
        hi *= 2
        if hi > 2**62:
            raise RuntimeError("bound does not reach epsilon at any feasible m")
    lo = max(2, hi // 2)
    if bound(lo) <= epsilon:
        return lo
    while hi - lo > 1:                 # invariant: bound(lo) > eps >= bound(hi)
        mid = (lo + hi) // 2
        if bound(mid) <= epsilon:
            hi = mid
        else:
            lo = mid
    return hi


# ---------------------------------------------------------------------------
# Monte Carlo Rademacher complexity


@dataclass(frozen=True)
class RademacherEstimate:
    estimate: float
    std_error: float
    draws: int
    set_size: int


def rademacher_estimate(S: SampleSet, hypotheses, draws: int,
                        seed: Seed) -> RademacherEstimate:
    """Monte Carlo estimate of E_sigma[ sup_h (2/m) sum_t sigma_t r(h, z_t) ].

    Duplicate hypotheses cannot change the supremum, so the estimate is
    invariant to repeating entries of the list.
    """
    hyps = list(hypotheses)
    if not hyps:
        raise ValueError("need at least one hypothesis")
    if draws < 2:
        raise ValueError("need at least 2 sign draws")
    alpha = S.value_range[0]
    R = np.stack([profile_revenues(h, S.values, alpha) for h in hyps])  # (H, m)
    rng = seed.rng()
    signs = rng.integers(0, 2, size=(draws, S.m)).astype(float) * 2.0 - 1.0
    sups = (R @ signs.T).max(axis=0) * (2.0 / S.m)
    return RademacherEstimate(float(sups.mean()),
                              float(sups.std(ddof=1) / math.sqrt(draws)),
                              draws, len(hyps))


# ---------------------------------------------------------------------------
# empirical check of the generalization chain
#   expected gap  <=  E[Rademacher of the pooled split-sample space]  <=  bound


@dataclass(frozen=True)
class ChainReport:
    class_tag: str
    m: int
    replicates: int
    optimum: float
    optimum_source: str
    gap_mean: float
    gap_se: float
    rademacher_mean: float
    rademacher_se: float
    enumerated_massart_mean: float
    theoretical_bound: float
    gap_below_rademacher: bool
    rademacher_below_bound: bool

    @property
    def chain_holds(self) -> bool:
        return self.gap_below_rademacher and self.rademacher_below_bound


def generalization_chain_check(spec: ClassSpec, dist: DistributionSpec, m: int,
                               replicates: int, sigma_draws: int, seed: Seed,
                               optimum: float | None = None,
                               eval_draws: int = 100_000,
                               subset_ceiling: int = 10**6) -> ChainReport:
    """Estimate the two sides of the generalization chain by simulation.

    Per replicate: draw S and an independent twin S' of size m, measure the
    gap optimum - R_D(h_S), and estimate the Rademacher complexity of S
    against the split-sample space enumerated on the pooled 2m sample.  The
    report compares gap <= rademacher <= closed-form bound, each link slack
    by three combined standard errors.

    When no optimum is supplied it is resolved analytically where possible,
    otherwise through the dense-grid common-draws estimator (whose Monte
    Carlo bias is inherited by the gap estimate).
    """
    if replicates < 2:
        raise ValueError("need at least 2 replicates")
    if optimum is not None:
        source = "provided"
    else:
        from .experiments import in_class_optimum  # deferred: avoids an import cycle
        est = in_class_optimum(spec, dist, method="auto", seed=seed.child("chain-opt"))
        optimum, source = est.value, est.method

    gaps = np.empty(replicates)
    rads = np.empty(replicates)
    massarts = np.empty(replicates)
    for j in range(replicates):
        S = sample_values(dist, m, seed.child("chain-S", j))
        S_twin = sample_values(dist, m, seed.child("chain-S-twin", j))
        h = erm(spec, S)
        try:
            rd = analytic_true_revenue(h, dist)
        except AnalyticUnsupported:
            rd = monte_carlo_true_revenue(h, dist, eval_draws,
                                          seed.child("chain-eval", j)).value
        gaps[j] = optimum - rd
        pooled = S.concat(S_twin)
        space = split_sample_space(spec, pooled, "exact", subset_ceiling=subset_ceiling)
        est = rademacher_estimate(S, space.hypotheses, sigma_draws,
                                  seed.child("chain-sigma", j))
        rads[j] = est.estimate
        massarts[j] = massart_bound(len(space), m, dist.value_range)

    gap_mean = float(gaps.mean())
    gap_se = float(gaps.std(ddof=1) / math.sqrt(replicates))
    rad_mean = float(rads.mean())
    rad_se = float(rads.std(ddof=1) / math.sqrt(replicates))
    bound = main_bound(spec, m, dist.n, dist.k,
                       value_range=dist.value_range).expected_gap_bound
    link1 = gap_mean <= rad_mean + 3.0 * math.hypot(gap_se, rad_se)
    link2 = rad_mean <= bound + 3.0 * rad_se
    return ChainReport(spec.tag, m, replicates, optimum, source,
                       gap_mean, gap_se, rad_mean, rad_se,
                       float(massarts.mean()), bound, link1, link2)
