"""Valuation profiles, sample sets, value distributions, and deterministic randomness.

All sampling is a pure function of (spec, m, seed): the same inputs always
reproduce the same bits.  Sub-seeds are derived from a master seed via a keyed
hash of (master, purpose label, replicate index), so parallel experiments can
draw independent streams in any order.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import dataclass

import numpy as np

from .errors import (AuctionLearnError, DimensionMismatch, InvalidDistribution,
                     SampleFileError)

DEFAULT_RANGE = (0.0, 1.0)

_PROB_TOL = 1e-12


# ---------------------------------------------------------------------------
# seeds


@dataclass(frozen=True)
class Seed:
    """Master seed for a reproducible computation tree.

    ``child(label, index)`` derives an independent sub-seed as a pure function
    of (master, label, index); derived streams never depend on evaluation
    order.
    """

    master: int = 0

    def __post_init__(self):
        if not 0 <= int(self.master) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    def child(self, label: str, index: int = 0) -> "Seed":
        key = f"{self.master}|{label}|{index}".encode()
        digest = hashlib.blake2b(key, digest_size=8).digest()
        return Seed(int.from_bytes(digest, "big"))

    def rng(self) -> np.random.Generator:
        return np.random.default_rng(self.master)


# ---------------------------------------------------------------------------
# marginal distributions


@dataclass(frozen=True)
class Uniform:
    low: float
    high: float

    def __post_init__(self):
        if not (math.isfinite(self.low) and math.isfinite(self.high)):
            raise InvalidDistribution("uniform bounds must be finite")
        if self.high <= self.low:
            raise InvalidDistribution("uniform requires low < high")

    @property
    def support(self) -> tuple[float, float]:
        return (self.low, self.high)

    def ppf(self, u: np.ndarray) -> np.ndarray:
        return self.low + u * (self.high - self.low)

    def cdf(self, x: np.ndarray) -> np.ndarray:
        return np.clip((np.asarray(x, dtype=float) - self.low) / (self.high - self.low), 0.0, 1.0)

    def survival(self, price: float) -> float:
        """P(value >= price); piecewise linear."""
        return float(np.clip((self.high - price) / (self.high - self.low), 0.0, 1.0))

    def to_dict(self) -> dict:
        return {"type": "uniform", "low": self.low, "high": self.high}


@dataclass(frozen=True)
class TruncatedExponential:
    """Exponential with the given rate, truncated and renormalized on [0, cap]."""

    rate: float
    cap: float

    def __post_init__(self):
        if self.rate <= 0 or not math.isfinite(self.rate):
            raise InvalidDistribution("truncated exponential requires rate > 0")
        if self.cap <= 0 or not math.isfinite(self.cap):
            raise InvalidDistribution("truncated exponential requires cap > 0")

    @property
    def support(self) -> tuple[float, float]:
        return (0.0, self.cap)

    @property
    def _mass(self) -> float:
        return -math.expm1(-self.rate * self.cap)

    def ppf(self, u: np.ndarray) -> np.ndarray:
        return -np.log1p(-u * self._mass) / self.rate

    def cdf(self, x: np.ndarray) -> np.ndarray:
        x = np.clip(np.asarray(x, dtype=float), 0.0, self.cap)
        return -np.expm1(-self.rate * x) / self._mass

    def to_dict(self) -> dict:
        return {"type": "trunc-exp", "rate": self.rate, "cap": self.cap}


@dataclass(frozen=True)
class Discrete:
    points: tuple[float, ...]
    probs: tuple[float, ...]

    def __post_init__(self):
        pts = tuple(float(x) for x in self.points)
        pr = tuple(float(p) for p in self.probs)
        if len(pts) == 0 or len(pts) != len(pr):
            raise InvalidDistribution("discrete requires matching nonempty points/probs")
        if any(not math.isfinite(x) for x in pts):
            raise InvalidDistribution("discrete support must be finite")
        if any(p < 0 for p in pr):
            raise InvalidDistribution("discrete probabilities must be nonnegative")
        if abs(sum(pr) - 1.0) > _PROB_TOL:
            raise InvalidDistribution(f"discrete probabilities sum to {sum(pr)!r}, not 1")
        order = np.argsort(pts, kind="stable")
        object.__setattr__(self, "points", tuple(pts[i] for i in order))
        object.__setattr__(self, "probs", tuple(pr[i] for i in order))

    @property
    def support(self) -> tuple[float, float]:
        return (self.points[0], self.points[-1])

    def ppf(self, u: np.ndarray) -> np.ndarray:
        cum = np.cumsum(self.probs)
        cum[-1] = 1.0  # guard against rounding in the final bin
        idx = np.searchsorted(cum, u, side="right")
        return np.asarray(self.points, dtype=float)[np.minimum(idx, len(self.points) - 1)]

    def cdf(self, x: np.ndarray) -> np.ndarray:
        pts = np.asarray(self.points)
        cum = np.concatenate([[0.0], np.cumsum(self.probs)])
        return cum[np.searchsorted(pts, np.asarray(x, dtype=float), side="right")]

    def cdf_left(self, x: np.ndarray) -> np.ndarray:
        """P(value < x); differs from cdf at the atoms."""
        pts = np.asarray(self.points)
        cum = np.concatenate([[0.0], np.cumsum(self.probs)])
        return cum[np.searchsorted(pts, np.asarray(x, dtype=float), side="left")]

    def survival(self, price: float) -> float:
        """P(value >= price)."""
        return float(sum(p for x, p in zip(self.points, self.probs) if x >= price))

    def to_dict(self) -> dict:
        return {"type": "discrete", "points": list(self.points), "probs": list(self.probs)}


Marginal = Uniform | TruncatedExponential | Discrete


def marginal_from_dict(d: dict) -> Marginal:
    kind = d.get("type")
    if kind == "uniform":
        return Uniform(float(d["low"]), float(d["high"]))
    if kind == "trunc-exp":
        return TruncatedExponential(float(d["rate"]), float(d["cap"]))
    if kind == "discrete":
        return Discrete(tuple(d["points"]), tuple(d["probs"]))
    raise InvalidDistribution(f"unknown marginal type {kind!r}")


# ---------------------------------------------------------------------------
# joint distribution over an n x k valuation matrix


@dataclass(frozen=True)
class DistributionSpec:
    """Independent per-bidder-per-item marginals on a common value range."""

    marginals: tuple[tuple[Marginal, ...], ...]  # [bidder][item]
    value_range: tuple[float, float] = DEFAULT_RANGE

    def __post_init__(self):
        alpha, beta = self.value_range
        if not (math.isfinite(alpha) and math.isfinite(beta) and alpha < beta):
            raise InvalidDistribution("value range must be finite with alpha < beta")
        if alpha < 0:
            raise InvalidDistribution("alpha must be >= 0: payments are nonnegative")
        if len(self.marginals) == 0 or any(len(row) == 0 for row in self.marginals):
            raise InvalidDistribution("need at least one bidder and one item")
        k = len(self.marginals[0])
        if any(len(row) != k for row in self.marginals):
            raise InvalidDistribution("ragged marginal grid")
        for row in self.marginals:
            for marg in row:
                lo, hi = marg.support
                if lo < alpha - _PROB_TOL or hi > beta + _PROB_TOL:
                    raise InvalidDistribution(
                        f"marginal support [{lo}, {hi}] outside declared range [{alpha}, {beta}]"
                    )

    @classmethod
    def iid(cls, marginal: Marginal, n: int = 1, k: int = 1,
            value_range: tuple[float, float] = DEFAULT_RANGE) -> "DistributionSpec":
        return cls(tuple(tuple(marginal for _ in range(k)) for _ in range(n)), value_range)

    @property
    def n(self) -> int:
        return len(self.marginals)

    @property
    def k(self) -> int:
        return len(self.marginals[0])

    def to_dict(self) -> dict:
        return {
            "alpha": self.value_range[0],
            "beta": self.value_range[1],
            "marginals": [[m.to_dict() for m in row] for row in self.marginals],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DistributionSpec":
        rng = (float(d.get("alpha", 0.0)), float(d.get("beta", 1.0)))
        rows = tuple(tuple(marginal_from_dict(m) for m in row) for row in d["marginals"])
        return cls(rows, rng)


# ---------------------------------------------------------------------------
# profiles and sample sets


@dataclass(frozen=True)
class ValuationProfile:
    """One joint bid vector: values[bidder, item] within the declared range."""

    values: np.ndarray
    value_range: tuple[float, float] = DEFAULT_RANGE

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=float)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise DimensionMismatch("profile values must be an n x k matrix")
        alpha, beta = self.value_range
        if alpha < 0 or beta <= alpha:
            raise AuctionLearnError("value range needs 0 <= alpha < beta")
        if not np.all(np.isfinite(arr)):
            raise AuctionLearnError("profile contains non-finite values")
        if arr.min() < alpha or arr.max() > beta:
            raise AuctionLearnError(
                f"profile values outside declared range [{alpha}, {beta}]"
            )
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def k(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class SampleSet:
    """Ordered multiset of valuation profiles sharing one (n, k, range)."""

    values: np.ndarray  # shape (m, n, k), read-only
    value_range: tuple[float, float] = DEFAULT_RANGE
    provenance: str = "unspecified"

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=float)
        if arr.ndim != 3 or arr.shape[0] < 1:
            raise DimensionMismatch("sample values must have shape (m, n, k) with m >= 1")
        alpha, beta = self.value_range
        if alpha < 0 or beta <= alpha:
            raise AuctionLearnError("value range needs 0 <= alpha < beta")
        if not np.all(np.isfinite(arr)):
            raise AuctionLearnError("sample contains non-finite values")
        if arr.min() < alpha or arr.max() > beta:
            raise AuctionLearnError(f"sample values outside declared range [{alpha}, {beta}]")
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)

    @property
    def m(self) -> int:
        return self.values.shape[0]

    @property
    def n(self) -> int:
        return self.values.shape[1]

    @property
    def k(self) -> int:
        return self.values.shape[2]

    @property
    def profiles(self) -> list[ValuationProfile]:
        return [ValuationProfile(self.values[t], self.value_range) for t in range(self.m)]

    def profile(self, t: int) -> ValuationProfile:
        return ValuationProfile(self.values[t], self.value_range)

    def subset(self, indices) -> "SampleSet":
        idx = list(indices)
        return SampleSet(self.values[idx], self.value_range,
                         provenance=f"{self.provenance} (subset {idx})")

    def concat(self, other: "SampleSet") -> "SampleSet":
        if (self.n, self.k) != (other.n, other.k) or self.value_range != other.value_range:
            raise DimensionMismatch("cannot concatenate samples with different shapes or ranges")
        return SampleSet(np.concatenate([self.values, other.values]), self.value_range,
                         provenance=f"{self.provenance} + {other.provenance}")


def sample_values(spec: DistributionSpec, m: int, seed: Seed) -> SampleSet:
    """Draw m i.i.d. profiles from the spec.  Bit-identical for identical inputs."""
    if m < 1:
        raise AuctionLearnError("m must be >= 1")
    rng = seed.rng()
    u = rng.random((m, spec.n, spec.k))
    out = np.empty((m, spec.n, spec.k), dtype=float)
    for i in range(spec.n):
        for j in range(spec.k):
            out[:, i, j] = spec.marginals[i][j].ppf(u[:, i, j])
    alpha, beta = spec.value_range
    np.clip(out, alpha, beta, out=out)  # guard against ppf rounding at the edges
    return SampleSet(out, spec.value_range, provenance=f"sampled(seed={seed.master}, m={m})")


# ---------------------------------------------------------------------------
# sample files: JSON header line, then one JSON profile record per line


def save_samples(sample: SampleSet, path: str) -> None:
    header = {"n": sample.n, "k": sample.k,
              "alpha": sample.value_range[0], "beta": sample.value_range[1]}
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(header) + "\n")
        for t in range(sample.m):
            fh.write(json.dumps(sample.values[t].tolist()) + "\n")


def load_samples(path: str, n: int | None = None, k: int | None = None,
                 value_range: tuple[float, float] | None = None) -> SampleSet:
    """Read a sample file, cross-checking any declared dimensions and range."""
    if not os.path.exists(path):
        raise SampleFileError(f"no such sample file: {path}")
    with open(path, encoding="utf-8") as fh:
        lines = [line.strip() for line in fh if line.strip()]
    if not lines:
        raise SampleFileError(f"empty sample file: {path}")
    try:
        header = json.loads(lines[0])
        file_n, file_k = int(header["n"]), int(header["k"])
        rng = (float(header["alpha"]), float(header["beta"]))
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise SampleFileError(f"malformed header in {path}: {exc}") from exc
    if n is not None and n != file_n:
        raise DimensionMismatch(f"declared n={n} but file header has n={file_n}")
    if k is not None and k != file_k:
        raise DimensionMismatch(f"declared k={k} but file header has k={file_k}")
    if value_range is not None and tuple(value_range) != rng:
        raise SampleFileError(f"declared range {value_range} but file header has {rng}")
    if len(lines) == 1:
        raise SampleFileError(f"empty sample: {path} has a header but no records")
    records = []
    for lineno, line in enumerate(lines[1:], start=2):
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise SampleFileError(f"malformed record at {path}:{lineno}: {exc}") from exc
        arr = np.asarray(rec, dtype=float)
        if arr.shape != (file_n, file_k):
            raise DimensionMismatch(
                f"record at {path}:{lineno} has shape {arr.shape}, expected {(file_n, file_k)}"
            )
        if not np.all(np.isfinite(arr)) or arr.min() < rng[0] or arr.max() > rng[1]:
            raise SampleFileError(
                f"record at {path}:{lineno} has values outside declared range {rng}"
            )
        records.append(arr)
    return SampleSet(np.stack(records), rng, provenance=f"file:{path}")
