"""The auction hypothesis classes, each an executable truthful mechanism.

Every hypothesis maps a valuation profile to an Outcome (per-item allocation
plus per-bidder payments).  Conventions shared by all classes:

* bidders and items are 0-indexed; allocation ties go to the lowest bidder index
* a bidder whose value equals a posted price or reserve buys (``>=`` sells)
* multi-bidder reserves are lazy: the highest bidder is selected first and the
  sale happens only if that bidder clears their own reserve
* multi-item valuations are additive; the grand bundle is worth the row sum

``run_mechanism`` is the scalar reference semantics.  ``profile_revenues``
evaluates one hypothesis on a whole array of profiles with identical
floating-point results, and is what the samplers and experiment loops use.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import AnalyticUnsupported, DimensionMismatch
from .model import (Discrete, DistributionSpec, Seed, Uniform,
                    ValuationProfile, sample_values)

TAG_SINGLE = "single-reserve"
TAG_ASP = "anonymous-second-price"
TAG_PLAYER = "player-reserves"
TAG_TLEVEL = "t-level"
TAG_BUNDLE = "bundle-price"
TAG_ITEM = "item-prices"
TAG_BEST = "best-of"

CLASS_TAGS = (TAG_SINGLE, TAG_ASP, TAG_PLAYER, TAG_TLEVEL, TAG_BUNDLE, TAG_ITEM, TAG_BEST)


# ---------------------------------------------------------------------------
# hypothesis types


@dataclass(frozen=True)
class SingleReserve:
    """Post one reserve price to a single bidder for a single item."""

    price: float

    tag = TAG_SINGLE

    def param_vector(self) -> tuple[float, ...]:
        return (self.price,)


@dataclass(frozen=True)
class AnonymousSecondPriceReserve:
    """Second-price single-item auction with one anonymous reserve."""

    price: float

    tag = TAG_ASP

    def param_vector(self) -> tuple[float, ...]:
        return (self.price,)


@dataclass(frozen=True)
class PlayerReserves:
    """Second-price single-item auction with lazy per-bidder reserves."""

    prices: tuple[float, ...]

    tag = TAG_PLAYER

    def __post_init__(self):
        object.__setattr__(self, "prices", tuple(float(p) for p in self.prices))

    def param_vector(self) -> tuple[float, ...]:
        return self.prices


@dataclass(frozen=True)
class TLevel:
    """Threshold-ranked single-item auction.

    Each bidder i carries a nondecreasing threshold vector; a bidder's index is
    the count of thresholds their value clears.  The item goes to the highest
    index at least 1 (ties to the lowest bidder number), and the winner pays
    the threshold at the smallest index that would still win against the
    others' fixed indices.  Bidders clearing no threshold are never served.
    """

    thresholds: tuple[tuple[float, ...], ...]  # [bidder][level]

    tag = TAG_TLEVEL

    def __post_init__(self):
        rows = tuple(tuple(float(x) for x in row) for row in self.thresholds)
        if not rows or not rows[0]:
            raise ValueError("t-level needs at least one threshold per bidder")
        s = len(rows[0])
        if any(len(row) != s for row in rows):
            raise ValueError("all bidders must carry the same number of levels")
        for row in rows:
            if any(a > b for a, b in zip(row, row[1:])):
                raise ValueError("thresholds must be nondecreasing per bidder")
        object.__setattr__(self, "thresholds", rows)

    @property
    def levels(self) -> int:
        return len(self.thresholds[0])

    def param_vector(self) -> tuple[float, ...]:
        return tuple(x for row in self.thresholds for x in row)


@dataclass(frozen=True)
class BundlePrice:
    """Sell all items as one bundle against additive bundle values.

    Anonymous mode is a second-price auction on bundle totals with one reserve
    (a posted price when there is a single bidder); per-player mode applies
    lazy per-bidder reserves to the bundle totals.
    """

    price: float | None = None
    prices: tuple[float, ...] | None = None

    tag = TAG_BUNDLE

    def __post_init__(self):
        if (self.price is None) == (self.prices is None):
            raise ValueError("bundle price takes exactly one of price / prices")
        if self.prices is not None:
            object.__setattr__(self, "prices", tuple(float(p) for p in self.prices))

    @property
    def per_player(self) -> bool:
        return self.prices is not None

    def param_vector(self) -> tuple[float, ...]:
        return (self.price,) if self.price is not None else self.prices


@dataclass(frozen=True)
class ItemPrices:
    """Sell each item independently by the single-item rule.

    Anonymous mode posts one price per item (second price with that reserve
    when there are several bidders); per-player mode uses a lazy reserve
    matrix indexed [bidder][item].
    """

    prices: tuple[float, ...] | None = None
    price_matrix: tuple[tuple[float, ...], ...] | None = None

    tag = TAG_ITEM

    def __post_init__(self):
        if (self.prices is None) == (self.price_matrix is None):
            raise ValueError("item prices take exactly one of prices / price_matrix")
        if self.prices is not None:
            object.__setattr__(self, "prices", tuple(float(p) for p in self.prices))
        else:
            rows = tuple(tuple(float(p) for p in row) for row in self.price_matrix)
            if not rows or any(len(row) != len(rows[0]) for row in rows):
                raise ValueError("price matrix must be rectangular")
            object.__setattr__(self, "price_matrix", rows)

    @property
    def per_player(self) -> bool:
        return self.price_matrix is not None

    def param_vector(self) -> tuple[float, ...]:
        if self.prices is not None:
            return self.prices
        return tuple(p for row in self.price_matrix for p in row)


@dataclass(frozen=True)
class BestOf:
    """Run a bundle pricing and an item pricing and realize whichever raises
    more revenue on the reported profile (ties to the bundle).

    Note: the per-profile branch choice maximizes seller revenue, so unlike
    its two constituents this combined rule is not dominant-strategy truthful;
    it is the revenue benchmark the ERM candidate counting works with.
    """

    bundle: BundlePrice
    items: ItemPrices

    tag = TAG_BEST

    def __post_init__(self):
        if self.bundle.per_player != self.items.per_player:
            raise ValueError("best-of branches must share the anonymous/per-player mode")

    @property
    def per_player(self) -> bool:
        return self.bundle.per_player

    def param_vector(self) -> tuple[float, ...]:
        return self.bundle.param_vector() + self.items.param_vector()


Hypothesis = (SingleReserve | AnonymousSecondPriceReserve | PlayerReserves
              | TLevel | BundlePrice | ItemPrices | BestOf)


def sort_key(h: Hypothesis) -> tuple:
    return (h.tag, h.param_vector())


@dataclass(frozen=True)
class Outcome:
    """Per-item winners (or None) and per-bidder payments for one profile."""

    allocation: tuple[int | None, ...]
    payments: tuple[float, ...]

    @property
    def revenue(self) -> float:
        return float(np.sum(np.asarray(self.payments)))


# ---------------------------------------------------------------------------
# scalar reference semantics


def _second_highest(column: np.ndarray, alpha: float) -> float:
    if column.shape[0] < 2:
        return alpha
    return float(np.partition(column, -2)[-2])


def _single_item_outcome(column: np.ndarray, reserves: np.ndarray, alpha: float):
    """Second price with (possibly per-bidder) reserves on one item's values.

    Returns (winner or None, payment).  The highest bidder is tentatively
    selected (ties to the lowest index) and buys iff they clear their reserve.
    """
    w = int(np.argmax(column))
    if column[w] < reserves[w]:
        return None, 0.0
    return w, max(float(reserves[w]), _second_highest(column, alpha))


def _tlevel_indices(values: np.ndarray, thresholds) -> np.ndarray:
    # index of bidder i = number of thresholds their value clears
    return np.array([int(np.searchsorted(np.asarray(row), v, side="right"))
                     for row, v in zip(thresholds, values)])


def _tlevel_outcome(column: np.ndarray, h: TLevel):
    idx = _tlevel_indices(column, h.thresholds)
    top = int(idx.max())
    if top < 1:
        return None, 0.0
    w = int(np.argmax(idx))
    others = np.delete(idx, w)
    m_other = int(others.max()) if others.size else 0
    if m_other == 0:
        j_min = 1
    else:
        rest = idx.copy()
        rest[w] = -1
        l_star = int(np.argmax(rest))
        j_min = m_other if w < l_star else m_other + 1
    return w, float(h.thresholds[w][j_min - 1])


def run_mechanism(h: Hypothesis, v: ValuationProfile) -> Outcome:
    """Execute hypothesis h on one profile; deterministic."""
    vals = v.values
    n, k = vals.shape
    alpha = v.value_range[0]

    if isinstance(h, SingleReserve):
        if (n, k) != (1, 1):
            raise DimensionMismatch("single reserve requires n = 1, k = 1")
        if vals[0, 0] >= h.price:
            return Outcome((0,), (float(h.price),))
        return Outcome((None,), (0.0,))

    if isinstance(h, AnonymousSecondPriceReserve):
        if k != 1:
            raise DimensionMismatch("anonymous second price requires k = 1")
        w, pay = _single_item_outcome(vals[:, 0], np.full(n, h.price), alpha)
        return _one_item_result(w, pay, n)

    if isinstance(h, PlayerReserves):
        if k != 1 or len(h.prices) != n:
            raise DimensionMismatch("player reserves require k = 1 and one price per bidder")
        w, pay = _single_item_outcome(vals[:, 0], np.asarray(h.prices), alpha)
        return _one_item_result(w, pay, n)

    if isinstance(h, TLevel):
        if k != 1 or len(h.thresholds) != n:
            raise DimensionMismatch("t-level requires k = 1 and one threshold row per bidder")
        w, pay = _tlevel_outcome(vals[:, 0], h)
        return _one_item_result(w, pay, n)

    if isinstance(h, BundlePrice):
        _check_bundle_dims(h, n)
        totals = np.sum(vals, axis=1)
        reserves = np.full(n, h.price) if not h.per_player else np.asarray(h.prices)
        w, pay = _single_item_outcome(totals, reserves, alpha)
        if w is None:
            return Outcome((None,) * k, (0.0,) * n)
        payments = [0.0] * n
        payments[w] = pay
        return Outcome((w,) * k, tuple(payments))

    if isinstance(h, ItemPrices):
        _check_item_dims(h, n, k)
        allocation: list[int | None] = []
        payments = [0.0] * n
        for j in range(k):
            if h.per_player:
                reserves = np.asarray([h.price_matrix[i][j] for i in range(n)])
            else:
                reserves = np.full(n, h.prices[j])
            w, pay = _single_item_outcome(vals[:, j], reserves, alpha)
            allocation.append(w)
            if w is not None:
                payments[w] += pay
        return Outcome(tuple(allocation), tuple(payments))

    if isinstance(h, BestOf):
        out_b = run_mechanism(h.bundle, v)
        out_i = run_mechanism(h.items, v)
        return out_b if out_b.revenue >= out_i.revenue else out_i

    raise TypeError(f"unknown hypothesis type {type(h)!r}")


def _one_item_result(w, pay, n) -> Outcome:
    payments = [0.0] * n
    if w is None:
        return Outcome((None,), tuple(payments))
    payments[w] = pay
    return Outcome((w,), tuple(payments))


def _check_bundle_dims(h: BundlePrice, n: int) -> None:
    if h.per_player and len(h.prices) != n:
        raise DimensionMismatch("bundle price needs one reserve per bidder")


def _check_item_dims(h: ItemPrices, n: int, k: int) -> None:
    if h.per_player:
        if len(h.price_matrix) != n or len(h.price_matrix[0]) != k:
            raise DimensionMismatch("item price matrix must be n x k")
    elif len(h.prices) != k:
        raise DimensionMismatch("item prices need one price per item")


def revenue(h: Hypothesis, v: ValuationProfile) -> float:
    """Sum of payments collected by h on profile v."""
    return run_mechanism(h, v).revenue


def bidder_utility(h: Hypothesis, i: int, true_values: np.ndarray,
                   reported: ValuationProfile) -> float:
    """Bidder i's utility under true values when `reported` is submitted."""
    out = run_mechanism(h, reported)
    received = sum(float(true_values[i, j]) for j, w in enumerate(out.allocation) if w == i)
    return received - out.payments[i]


# ---------------------------------------------------------------------------
# vectorized evaluation over arrays of profiles


def _vec_second(columns: np.ndarray, alpha: float) -> np.ndarray:
    # columns: (N, n) -> per-row second-highest value, alpha when n == 1
    if columns.shape[1] < 2:
        return np.full(columns.shape[0], alpha)
    return np.partition(columns, -2, axis=1)[:, -2]


def _vec_lazy(columns: np.ndarray, reserves: np.ndarray, alpha: float):
    # second price with per-bidder reserves, vectorized over profiles;
    # returns (winner, sale mask, payment-if-sold)
    w = np.argmax(columns, axis=1)
    vw = np.take_along_axis(columns, w[:, None], axis=1)[:, 0]
    rw = np.asarray(reserves)[w]
    sec = _vec_second(columns, alpha)
    return w, vw >= rw, np.maximum(rw, sec)


def _vec_lazy_revenue(columns: np.ndarray, reserves: np.ndarray, alpha: float) -> np.ndarray:
    w, sale, pay = _vec_lazy(columns, reserves, alpha)
    return np.where(sale, pay, 0.0)


def _vec_tlevel_revenue(columns: np.ndarray, thr: np.ndarray) -> np.ndarray:
    # columns (N, n), thr (n, s)
    idx = np.sum(columns[:, :, None] >= thr[None, :, :], axis=2)  # (N, n)
    w = np.argmax(idx, axis=1)
    top = np.take_along_axis(idx, w[:, None], axis=1)[:, 0]
    rest = idx.copy()
    np.put_along_axis(rest, w[:, None], -1, axis=1)
    m_other = rest.max(axis=1)
    m_other = np.maximum(m_other, 0)
    l_star = np.argmax(rest, axis=1)
    j_min = np.where(m_other == 0, 1, np.where(w < l_star, m_other, m_other + 1))
    pay = thr[w, j_min - 1]
    return np.where(top >= 1, pay, 0.0)


def profile_revenues(h: Hypothesis, values: np.ndarray, alpha: float = 0.0) -> np.ndarray:
    """Revenue of h on each profile of a (N, n, k) value array.

    Entry t equals ``revenue(h, profile_t)`` bit-for-bit.
    """
    values = np.asarray(values, dtype=float)
    N, n, k = values.shape

    if isinstance(h, SingleReserve):
        if (n, k) != (1, 1):
            raise DimensionMismatch("single reserve requires n = 1, k = 1")
        v = values[:, 0, 0]
        return np.where(v >= h.price, float(h.price), 0.0)

    if isinstance(h, AnonymousSecondPriceReserve):
        if k != 1:
            raise DimensionMismatch("anonymous second price requires k = 1")
        return _vec_lazy_revenue(values[:, :, 0], np.full(n, h.price), alpha)

    if isinstance(h, PlayerReserves):
        if k != 1 or len(h.prices) != n:
            raise DimensionMismatch("player reserves require k = 1 and one price per bidder")
        return _vec_lazy_revenue(values[:, :, 0], np.asarray(h.prices), alpha)

    if isinstance(h, TLevel):
        if k != 1 or len(h.thresholds) != n:
            raise DimensionMismatch("t-level requires k = 1 and one threshold row per bidder")
        return _vec_tlevel_revenue(values[:, :, 0], np.asarray(h.thresholds))

    if isinstance(h, BundlePrice):
        _check_bundle_dims(h, n)
        totals = np.sum(values, axis=2)
        reserves = np.asarray(h.prices) if h.per_player else np.full(n, h.price)
        return _vec_lazy_revenue(totals, reserves, alpha)

    if isinstance(h, ItemPrices):
        _check_item_dims(h, n, k)
        # accumulate per bidder, then sum bidders, to match the scalar
        # Outcome.revenue float-for-float
        payments = np.zeros((N, n))
        rows = np.arange(N)
        for j in range(k):
            if h.per_player:
                reserves = np.asarray([h.price_matrix[i][j] for i in range(n)])
            else:
                reserves = np.full(n, h.prices[j])
            w, sale, pay = _vec_lazy(values[:, :, j], reserves, alpha)
            payments[rows, w] = payments[rows, w] + np.where(sale, pay, 0.0)
        return payments.sum(axis=1)

    if isinstance(h, BestOf):
        return np.maximum(profile_revenues(h.bundle, values, alpha),
                          profile_revenues(h.items, values, alpha))

    raise TypeError(f"unknown hypothesis type {type(h)!r}")


# ---------------------------------------------------------------------------
# serialization (tagged records; round-trips are exact)


def hypothesis_to_record(h: Hypothesis) -> dict:
    if isinstance(h, SingleReserve):
        return {"class": TAG_SINGLE, "price": h.price}
    if isinstance(h, AnonymousSecondPriceReserve):
        return {"class": TAG_ASP, "price": h.price}
    if isinstance(h, PlayerReserves):
        return {"class": TAG_PLAYER, "prices": list(h.prices)}
    if isinstance(h, TLevel):
        return {"class": TAG_TLEVEL, "thresholds": [list(r) for r in h.thresholds]}
    if isinstance(h, BundlePrice):
        if h.per_player:
            return {"class": TAG_BUNDLE, "prices": list(h.prices)}
        return {"class": TAG_BUNDLE, "price": h.price}
    if isinstance(h, ItemPrices):
        if h.per_player:
            return {"class": TAG_ITEM, "price_matrix": [list(r) for r in h.price_matrix]}
        return {"class": TAG_ITEM, "prices": list(h.prices)}
    if isinstance(h, BestOf):
        return {"class": TAG_BEST,
                "bundle": hypothesis_to_record(h.bundle),
                "items": hypothesis_to_record(h.items)}
    raise TypeError(f"unknown hypothesis type {type(h)!r}")


def hypothesis_from_record(rec: dict) -> Hypothesis:
    tag = rec.get("class")
    if tag == TAG_SINGLE:
        return SingleReserve(float(rec["price"]))
    if tag == TAG_ASP:
        return AnonymousSecondPriceReserve(float(rec["price"]))
    if tag == TAG_PLAYER:
        return PlayerReserves(tuple(rec["prices"]))
    if tag == TAG_TLEVEL:
        return TLevel(tuple(tuple(r) for r in rec["thresholds"]))
    if tag == TAG_BUNDLE:
        if "prices" in rec:
            return BundlePrice(prices=tuple(rec["prices"]))
        return BundlePrice(price=float(rec["price"]))
    if tag == TAG_ITEM:
        if "price_matrix" in rec:
            return ItemPrices(price_matrix=tuple(tuple(r) for r in rec["price_matrix"]))
        return ItemPrices(prices=tuple(rec["prices"]))
    if tag == TAG_BEST:
        bundle = hypothesis_from_record(rec["bundle"])
        items = hypothesis_from_record(rec["items"])
        return BestOf(bundle, items)
    raise ValueError(f"unknown hypothesis record class {tag!r}")


# ---------------------------------------------------------------------------
# expected revenue under a value distribution


@dataclass(frozen=True)
class RevenueEstimate:
    value: float
    std_error: float | None = None


def _posted_price_revenue(marginal, price: float) -> float:
    """price * P(value >= price) for marginals with a closed-form survival."""
    if isinstance(marginal, (Uniform, Discrete)):
        return float(price) * marginal.survival(float(price))
    raise AnalyticUnsupported(
        f"no closed form for posted prices under {type(marginal).__name__}"
    )


def _bundle_total_distribution(spec: DistributionSpec) -> Discrete:
    """Exact distribution of a single bidder's bundle total (discrete marginals)."""
    if spec.n != 1 or not all(isinstance(m, Discrete) for m in spec.marginals[0]):
        raise AnalyticUnsupported("bundle totals are closed-form only for one bidder "
                                  "with discrete marginals")
    points = np.array([0.0])
    probs = np.array([1.0])
    for marg in spec.marginals[0]:
        new_pts = (points[:, None] + np.asarray(marg.points)[None, :]).ravel()
        new_pr = (probs[:, None] * np.asarray(marg.probs)[None, :]).ravel()
        points, inverse = np.unique(new_pts, return_inverse=True)
        probs = np.bincount(inverse, weights=new_pr)
    total = probs.sum()
    return Discrete(tuple(points), tuple(probs / total))


def analytic_true_revenue(h: Hypothesis, spec: DistributionSpec) -> float:
    """Closed-form expected revenue; single-bidder posted-price shapes only."""
    if spec.n != 1:
        raise AnalyticUnsupported("closed forms cover single-bidder classes only")
    if isinstance(h, (SingleReserve, AnonymousSecondPriceReserve)):
        if spec.k != 1:
            raise AnalyticUnsupported("single-item class on a multi-item spec")
        return _posted_price_revenue(spec.marginals[0][0], h.price)
    if isinstance(h, PlayerReserves):
        if spec.k != 1:
            raise AnalyticUnsupported("single-item class on a multi-item spec")
        return _posted_price_revenue(spec.marginals[0][0], h.prices[0])
    if isinstance(h, TLevel):
        if spec.k != 1:
            raise AnalyticUnsupported("single-item class on a multi-item spec")
        # one bidder: only the lowest threshold binds
        return _posted_price_revenue(spec.marginals[0][0], h.thresholds[0][0])
    if isinstance(h, ItemPrices):
        prices = h.price_matrix[0] if h.per_player else h.prices
        if len(prices) != spec.k:
            raise DimensionMismatch("item prices do not match the spec's item count")
        return float(sum(_posted_price_revenue(spec.marginals[0][j], prices[j])
                         for j in range(spec.k)))
    if isinstance(h, BundlePrice):
        price = h.prices[0] if h.per_player else h.price
        totals = _bundle_total_distribution(spec)
        return float(price) * totals.survival(float(price))
    raise AnalyticUnsupported(f"no closed form for {h.tag} under this spec")


def monte_carlo_true_revenue(h: Hypothesis, spec: DistributionSpec, draws: int,
                             seed: Seed) -> RevenueEstimate:
    if draws < 2:
        raise ValueError("monte carlo needs at least 2 draws")
    sample = sample_values(spec, draws, seed)
    revs = profile_revenues(h, sample.values, spec.value_range[0])
    return RevenueEstimate(float(revs.mean()),
                           float(revs.std(ddof=1) / math.sqrt(draws)))


def true_revenue(h: Hypothesis, spec: DistributionSpec, method: str = "analytic",
                 draws: int = 100_000, seed: Seed = Seed(0)) -> RevenueEstimate:
    """Expected revenue of h under the spec.

    ``method='analytic'`` uses the closed form (single-bidder posted-price
    classes under uniform or discrete marginals) and raises
    AnalyticUnsupported otherwise; ``method='monte-carlo'`` estimates from
    fresh draws and reports a standard error.
    """
    if method == "analytic":
        return RevenueEstimate(analytic_true_revenue(h, spec), None)
    if method == "monte-carlo":
        return monte_carlo_true_revenue(h, spec, draws, seed)
    raise ValueError(f"unknown method {method!r}")
