"""Split-sample hypothesis spaces, growth-rate estimates, and count bounds.

The split-sample space of a sample S collects the distinct ERM outputs over
all subsets of S of size ceil(|S|/2).  Its largest possible cardinality over
samples of a given size (the split-sample growth rate) is what the
generalization bounds consume; the true supremum is not computable, so
``growth_rate_estimate`` reports an observed maximum over sampled S next to
the closed-form per-class bound, never conflating the two.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .erm import DEFAULT_CANDIDATE_CEILING, ClassSpec, _check_dims, _erm_on_values
from .errors import CeilingExceeded
from .mechanisms import (TAG_ASP, TAG_BEST, TAG_BUNDLE, TAG_ITEM, TAG_PLAYER,
                         TAG_SINGLE, TAG_TLEVEL, Hypothesis, SingleReserve,
                         sort_key)
from .model import DistributionSpec, SampleSet, Seed, sample_values

DEFAULT_SUBSET_CEILING = 10**6


@dataclass(frozen=True)
class SplitSampleSpace:
    """Distinct ERM outputs over examined half-size subsets of one sample."""

    base: SampleSet
    subset_size: int
    hypotheses: tuple[Hypothesis, ...]   # deduplicated, canonically sorted
    mode: str                            # "exact" | "monte-carlo"
    subsets_examined: int

    def __len__(self) -> int:
        return len(self.hypotheses)


def split_sample_space(spec: ClassSpec, S: SampleSet, mode: str = "exact",
                       trials: int | None = None, seed: Seed | None = None,
                       subset_ceiling: int = DEFAULT_SUBSET_CEILING,
                       candidate_ceiling: int = DEFAULT_CANDIDATE_CEILING) -> SplitSampleSpace:
    """Enumerate ERM outputs over subsets of size ceil(m/2).

    Exact mode walks all C(m, ceil(m/2)) subsets in lexicographic index
    order; monte-carlo mode samples `trials` subsets uniformly (its distinct
    set is always a subset of the exact one).
    """
    _check_dims(spec, S.n, S.k)
    m = S.m
    size = math.ceil(m / 2)
    total = math.comb(m, size)

    if mode == "exact":
        if total > subset_ceiling:
            raise CeilingExceeded(
                f"exact mode needs {total} subsets, over the ceiling {subset_ceiling}"
            )
        if spec.tag == TAG_SINGLE:
            hyps = _single_reserve_exact(S, size)
            return SplitSampleSpace(S, size, hyps, "exact", total)
        index_sets = itertools.combinations(range(m), size)
        examined = total
    elif mode == "monte-carlo":
        if trials is None or trials < 1 or seed is None:
            raise ValueError("monte-carlo mode needs trials >= 1 and a seed")
        rng = seed.rng()
        index_sets = (tuple(sorted(rng.choice(m, size=size, replace=False)))
                      for _ in range(trials))
        examined = trials
    else:
        raise ValueError(f"unknown mode {mode!r}")

    distinct: dict[tuple, Hypothesis] = {}
    values = S.values
    for idx in index_sets:
        h = _erm_on_values(spec, values[list(idx)], S.value_range, candidate_ceiling)
        distinct[sort_key(h)] = h
    hyps = tuple(distinct[key] for key in sorted(distinct))
    return SplitSampleSpace(S, size, hyps, mode, examined)


@lru_cache(maxsize=64)
def _combo_indices(m: int, size: int) -> np.ndarray:
    combos = np.fromiter(itertools.chain.from_iterable(
        itertools.combinations(range(m), size)), dtype=np.intp)
    combos = combos.reshape(-1, size)
    combos.setflags(write=False)
    return combos


def _single_reserve_exact(S: SampleSet, size: int) -> tuple[Hypothesis, ...]:
    """Vectorized exact enumeration for the posted-price class.

    Subsets are taken as index combinations into the ascending-sorted value
    vector, so each subset row is already sorted; posting the j-th smallest
    value earns it from the (size - j) values at or above it, which matches
    the generic kernel's sorted accumulation bit-for-bit.
    """
    pool = np.sort(S.values[:, 0, 0])
    combos = _combo_indices(S.m, size)
    V = pool[combos]                                   # (C, size)
    tri = np.arange(size)[None, :] >= np.arange(size)[:, None]   # [j, t]: t >= j
    rows = V[:, :, None] * tri[None, :, :]             # (C, j, t)
    revs = np.mean(rows, axis=2)
    best = revs.max(axis=1)
    eq = revs == best[:, None]
    pick = size - 1 - np.argmax(eq[:, ::-1], axis=1)   # last argmax = largest value
    reserves = np.unique(V[np.arange(len(V)), pick])
    return tuple(SingleReserve(float(r)) for r in reserves)


# ---------------------------------------------------------------------------
# growth rate


@dataclass(frozen=True)
class GrowthBound:
    """Closed-form candidate-count bound, as an exact integer plus its log."""

    count: int
    log: float


def theoretical_growth_bound(spec: ClassSpec, m: int, n: int = 1, k: int = 1) -> GrowthBound:
    """Per-class bound on the split-sample space cardinality at sample size m."""
    if m < 1 or n < 1 or k < 1:
        raise ValueError("m, n, k must be positive")
    tag = spec.tag
    if tag == TAG_SINGLE:
        return GrowthBound(m, math.log(m))
    if tag == TAG_ASP:
        return GrowthBound(n * m, math.log(n * m))
    if tag == TAG_PLAYER:
        return GrowthBound(m**n, n * math.log(m))
    if tag == TAG_TLEVEL:
        s = spec.levels
        return GrowthBound(m**(n * s), n * s * math.log(m))
    if tag == TAG_BUNDLE:
        if spec.per_player:
            return GrowthBound(m**n, n * math.log(m))
        return GrowthBound(m * n, math.log(m * n))
    if tag == TAG_ITEM:
        if spec.per_player:
            return GrowthBound(m**(n * k), n * k * math.log(m))
        return GrowthBound((n * m)**k, k * math.log(n * m))
    if tag == TAG_BEST:
        if spec.per_player:
            return GrowthBound(m**(n * (k + 1)), n * (k + 1) * math.log(m))
        return GrowthBound((m * n)**(k + 1), (k + 1) * math.log(m * n))
    raise ValueError(f"unknown class tag {tag!r}")


@dataclass(frozen=True)
class GrowthEstimate:
    """Observed max |split-sample space| over sampled S, next to the bound."""

    class_tag: str
    m: int
    n: int
    k: int
    s: int | None
    draws: int
    observed_max: int
    bound: GrowthBound


def growth_rate_estimate(spec: ClassSpec, m: int, dist: DistributionSpec,
                         draws: int, seed: Seed,
                         subset_ceiling: int = DEFAULT_SUBSET_CEILING) -> GrowthEstimate:
    """Max |split-sample space| over `draws` independent samples of size m.

    A lower-confidence stand-in for the supremum over all S; the closed-form
    bound is reported alongside.
    """
    if draws < 1:
        raise ValueError("draws must be >= 1")
    observed = 0
    for i in range(draws):
        S = sample_values(dist, m, seed.child("growth-draw", i))
        space = split_sample_space(spec, S, "exact", subset_ceiling=subset_ceiling)
        observed = max(observed, len(space))
    bound = theoretical_growth_bound(spec, m, dist.n, dist.k)
    return GrowthEstimate(spec.tag, m, dist.n, dist.k, spec.levels, draws, observed, bound)


def growth_csv_row(est: GrowthEstimate) -> list:
    return [est.class_tag, est.m, est.n, est.k,
            "" if est.s is None else est.s,
            est.draws, est.observed_max, repr(est.bound.log)]
