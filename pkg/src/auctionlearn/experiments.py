"""End-to-end generalization experiments: sample -> ERM -> true revenue -> gap.

Each configuration runs seeded replicates per sample size, measures how far
the learned mechanism's expected revenue falls short of the in-class optimum,
and attaches the closed-form bound plus the fraction of replicates violating
the Markov high-probability variant.  Re-running with the same master seed
reproduces every row bit-exactly regardless of the worker-thread count.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .bounds import main_bound, sample_complexity_estimate
from .erm import DEFAULT_CANDIDATE_CEILING, ClassSpec, _tlevel_rows, erm
from .errors import AnalyticUnsupported, CeilingExceeded
from .mechanisms import (TAG_ASP, TAG_BEST, TAG_BUNDLE, TAG_ITEM, TAG_PLAYER,
                         TAG_SINGLE, TAG_TLEVEL, Discrete, Uniform,
                         _bundle_total_distribution, _vec_second,
                         analytic_true_revenue, monte_carlo_true_revenue)
from .model import DistributionSpec, Seed, sample_values

_GRID_BUDGET = 2 * 10**8  # grid points x draws ceiling for joint grid optima


# ---------------------------------------------------------------------------
# in-class optimum


@dataclass(frozen=True)
class OptimumEstimate:
    value: float
    std_error: float | None
    method: str  # "analytic" | "grid-mc"


def _posted_optimum(marginal) -> float:
    """sup_r r * P(v >= r) for one marginal."""
    if isinstance(marginal, Uniform):
        a, b = marginal.low, marginal.high
        r = max(a, b / 2.0)
        return r * marginal.survival(r)
    if isinstance(marginal, Discrete):
        return max(float(x) * marginal.survival(float(x)) for x in marginal.points)
    raise AnalyticUnsupported(
        f"no closed-form posted-price optimum under {type(marginal).__name__}"
    )


def _analytic_optimum(spec: ClassSpec, dist: DistributionSpec) -> float:
    if dist.n != 1:
        raise AnalyticUnsupported("closed-form optima cover single-bidder specs only")
    tag = spec.tag
    if tag in (TAG_SINGLE, TAG_ASP, TAG_PLAYER, TAG_TLEVEL):
        if dist.k != 1:
            raise AnalyticUnsupported("single-item class on a multi-item spec")
        return _posted_optimum(dist.marginals[0][0])
    if tag == TAG_ITEM:
        return float(sum(_posted_optimum(m) for m in dist.marginals[0]))
    if tag == TAG_BUNDLE:
        totals = _bundle_total_distribution(dist)  # discrete marginals only
        return _posted_optimum(totals)
    raise AnalyticUnsupported(f"no closed-form optimum for {tag}")


def _price_grid(lo: float, hi: float, step: float) -> np.ndarray:
    count = int(round((hi - lo) / step))
    return lo + np.arange(count + 1) * step


def _grid_second_price(grid: np.ndarray, columns: np.ndarray, alpha: float):
    """Mean revenue of each anonymous reserve in `grid` on the drawn columns."""
    top = columns.max(axis=1)
    sec = _vec_second(columns, alpha)
    out = np.empty(len(grid))
    chunk = max(1, _GRID_BUDGET // (20 * len(top)))
    for start in range(0, len(grid), chunk):
        g = grid[start:start + chunk]
        rows = np.where(top[None, :] >= g[:, None],
                        np.maximum(g[:, None], sec[None, :]), 0.0)
        out[start:start + chunk] = rows.mean(axis=1)
    return out


def _grid_lazy_coordinate(grid: np.ndarray, columns: np.ndarray, bidder: int,
                          alpha: float) -> np.ndarray:
    """Per-draw-mean revenue curve of bidder's lazy reserve over the grid."""
    w = np.argmax(columns, axis=1)
    sec = _vec_second(columns, alpha)
    mask = w == bidder
    vi = columns[mask, bidder]
    si = sec[mask]
    out = np.empty(len(grid))
    chunk = max(1, _GRID_BUDGET // (20 * max(1, len(vi))))
    for start in range(0, len(grid), chunk):
        g = grid[start:start + chunk]
        rows = np.where(vi[None, :] >= g[:, None],
                        np.maximum(g[:, None], si[None, :]), 0.0)
        out[start:start + chunk] = rows.sum(axis=1)
    return out / columns.shape[0]


def _grid_optimum(spec: ClassSpec, dist: DistributionSpec, grid_step: float,
                  draws: int, seed: Seed) -> OptimumEstimate:
    """Max over a parameter grid of mean revenue on one shared draw set.

    Common random numbers across the grid keep the comparison low-variance;
    the reported value inherits the usual upward selection bias of a max of
    correlated means.
    """
    alpha, beta = dist.value_range
    sample = sample_values(dist, draws, seed)
    values = sample.values
    n, k = dist.n, dist.k
    tag = spec.tag

    def finish(curve: np.ndarray) -> OptimumEstimate:
        return OptimumEstimate(float(curve.max()), None, "grid-mc")

    if tag == TAG_SINGLE or (tag in (TAG_ASP, TAG_PLAYER) and n == 1) \
            or (tag == TAG_TLEVEL and n == 1):
        grid = _price_grid(alpha, beta, grid_step)
        v = np.sort(values[:, 0, 0])
        counts = len(v) - np.searchsorted(v, grid, side="left")
        return finish(grid * counts / len(v))

    if tag == TAG_ASP:
        grid = _price_grid(alpha, beta, grid_step)
        return finish(_grid_second_price(grid, values[:, :, 0], alpha))

    if tag == TAG_PLAYER:
        grid = _price_grid(alpha, beta, grid_step)
        total = sum(_grid_lazy_coordinate(grid, values[:, :, 0], i, alpha).max()
                    for i in range(n))
        return OptimumEstimate(float(total), None, "grid-mc")

    if tag == TAG_BUNDLE:
        totals = np.sum(values, axis=2)
        grid = _price_grid(k * alpha, k * beta, grid_step)
        if spec.per_player:
            total = sum(_grid_lazy_coordinate(grid, totals, i, alpha).max()
                        for i in range(n))
            return OptimumEstimate(float(total), None, "grid-mc")
        return finish(_grid_second_price(grid, totals, alpha))

    if tag == TAG_ITEM:
        grid = _price_grid(alpha, beta, grid_step)
        total = 0.0
        for j in range(k):
            if spec.per_player:
                total += sum(_grid_lazy_coordinate(grid, values[:, :, j], i, alpha).max()
                             for i in range(n))
            else:
                total += _grid_second_price(grid, values[:, :, j], alpha).max()
        return OptimumEstimate(float(total), None, "grid-mc")

    if tag == TAG_TLEVEL:
        if spec.levels != 1:
            raise AnalyticUnsupported(
                "grid optimum for multi-bidder t-level supports a single level; "
                "use coarser candidate-based estimates for s > 1"
            )
        grid = _price_grid(alpha, beta, grid_step)
        if len(grid)**n * draws > _GRID_BUDGET:
            raise CeilingExceeded(
                "t-level grid optimum over budget; increase grid_step or lower draws"
            )
        mesh = np.stack(np.meshgrid(*([grid] * n), indexing="ij"), axis=-1)
        thr = mesh.reshape(-1, n, 1)
        cols = values[:, :, 0]
        best = -math.inf
        chunk = max(1, _GRID_BUDGET // (20 * draws * n))
        for start in range(0, len(thr), chunk):
            revs = _tlevel_rows(thr[start:start + chunk], cols).mean(axis=1)
            best = max(best, float(revs.max()))
        return OptimumEstimate(best, None, "grid-mc")

    if tag == TAG_BEST:
        if k != 1 or spec.per_player:
            raise AnalyticUnsupported(
                "joint grid optimum for best-of is limited to anonymous k = 1; "
                "the branch classes cover multi-item grids separably"
            )
        # k = 1: both branches are anonymous reserves on the same column
        cols = values[:, :, 0]
        grid = _price_grid(alpha, beta, grid_step)
        if len(grid)**2 * draws > _GRID_BUDGET:
            raise CeilingExceeded(
                "best-of grid optimum over budget; increase grid_step or lower draws"
            )
        top = cols.max(axis=1)
        sec = _vec_second(cols, alpha)
        bundle_rows = np.where(top[None, :] >= grid[:, None],
                               np.maximum(grid[:, None], sec[None, :]), 0.0)
        best = -math.inf
        for b in range(len(grid)):
            mixed = np.maximum(bundle_rows[b][None, :], bundle_rows)
            best = max(best, float(mixed.mean(axis=1).max()))
        return OptimumEstimate(best, None, "grid-mc")

    raise AnalyticUnsupported(f"no grid optimum for {tag}")


def in_class_optimum(spec: ClassSpec, dist: DistributionSpec, method: str = "auto",
                     grid_step: float = 1e-3, draws: int = 10**6,
                     seed: Seed = Seed(0)) -> OptimumEstimate:
    """sup over the class of expected revenue under the spec.

    'analytic' covers single-bidder posted-price shapes under uniform or
    discrete marginals; 'grid' maximizes over a parameter grid evaluated on
    shared Monte Carlo draws; 'auto' prefers analytic and falls back.
    """
    if method not in ("auto", "analytic", "grid"):
        raise ValueError(f"unknown method {method!r}")
    if method in ("auto", "analytic"):
        try:
            return OptimumEstimate(_analytic_optimum(spec, dist), None, "analytic")
        except AnalyticUnsupported:
            if method == "analytic":
                raise
    return _grid_optimum(spec, dist, grid_step, draws, seed)


# ---------------------------------------------------------------------------
# experiment harness


@dataclass(frozen=True)
class ExperimentConfig:
    class_spec: ClassSpec
    dist: DistributionSpec
    m_grid: tuple[int, ...]
    replicates: int = 1000
    delta: float = 0.1
    seed: Seed = Seed(0)
    eval_draws: int = 100_000
    eval_method: str = "auto"       # "auto" | "analytic" | "monte-carlo"
    threads: int = 1
    candidate_ceiling: int = DEFAULT_CANDIDATE_CEILING
    optimum_grid_step: float = 1e-3
    optimum_draws: int = 10**6
    optimum_override: float | None = None   # for classes with no feasible estimator

    def canonical_dict(self) -> dict:
        # threads excluded: worker count must never change results
        return {
            "class": {"tag": self.class_spec.tag, "levels": self.class_spec.levels,
                      "per_player": self.class_spec.per_player},
            "dist": self.dist.to_dict(),
            "m_grid": list(self.m_grid),
            "replicates": self.replicates,
            "delta": self.delta,
            "seed": self.seed.master,
            "eval_draws": self.eval_draws,
            "eval_method": self.eval_method,
            "candidate_ceiling": self.candidate_ceiling,
            "optimum_grid_step": self.optimum_grid_step,
            "optimum_draws": self.optimum_draws,
            "optimum_override": self.optimum_override,
        }


def config_fingerprint(config: ExperimentConfig) -> str:
    blob = json.dumps(config.canonical_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def benchmark_note(spec: ClassSpec, n: int) -> str:
    """Informational approximation constants against the best truthful
    mechanism; no oracle exists for that supremum, so nothing is asserted."""
    if spec.tag == TAG_PLAYER and n >= 2:
        return ("player-specific reserves capture >= 1/2 of the optimal "
                "truthful revenue (informational)")
    if spec.tag == TAG_BEST and n == 1:
        return ("best of bundle/item pricing is reported as both a 1/8 and a "
                "1/6 approximation of the optimal truthful revenue "
                "(informational)")
    return ""


@dataclass(frozen=True)
class ExperimentRow:
    class_tag: str
    m: int
    n: int
    k: int
    s: int | None
    replicates: int
    mean_revenue: float
    std_error: float
    optimum: float
    gap: float
    bound: float
    delta: float
    hp_violation_fraction: float
    fingerprint: str
    benchmark_note: str = ""

    def as_dict(self) -> dict:
        return {
            "class": self.class_tag, "m": self.m, "n": self.n, "k": self.k,
            "s": self.s, "replicates": self.replicates,
            "mean_revenue": self.mean_revenue, "std_error": self.std_error,
            "optimum": self.optimum, "gap": self.gap, "bound": self.bound,
            "delta": self.delta,
            "hp_violation_fraction": self.hp_violation_fraction,
            "fingerprint": self.fingerprint,
            "benchmark_note": self.benchmark_note,
        }


def _replicate_revenue(config: ExperimentConfig, m: int, index: int) -> float:
    S = sample_values(config.dist, m, config.seed.child(f"exp-sample-m{m}", index))
    h = erm(config.class_spec, S, config.candidate_ceiling)
    if config.eval_method in ("auto", "analytic"):
        try:
            return analytic_true_revenue(h, config.dist)
        except AnalyticUnsupported:
            if config.eval_method == "analytic":
                raise
    return monte_carlo_true_revenue(h, config.dist, config.eval_draws,
                                    config.seed.child(f"exp-eval-m{m}", index)).value


def generalization_experiment(config: ExperimentConfig) -> list[ExperimentRow]:
    """One row per m: mean learned revenue, gap to the optimum, and bounds."""
    spec = config.class_spec
    dist = config.dist
    if config.optimum_override is not None:
        opt = OptimumEstimate(config.optimum_override, None, "provided")
    else:
        opt = in_class_optimum(spec, dist, "auto", config.optimum_grid_step,
                               config.optimum_draws, config.seed.child("optimum"))
    fp = config_fingerprint(config)
    rows = []
    for m in config.m_grid:
        indices = range(config.replicates)
        if config.threads > 1:
            with ThreadPoolExecutor(max_workers=config.threads) as pool:
                revs = np.fromiter(
                    pool.map(lambda i: _replicate_revenue(config, m, i), indices),
                    dtype=float, count=config.replicates)
        else:
            revs = np.fromiter((_replicate_revenue(config, m, i) for i in indices),
                               dtype=float, count=config.replicates)
        report = main_bound(spec, m, dist.n, dist.k, delta=config.delta,
                            value_range=dist.value_range)
        mean_rev = float(revs.mean())
        se = float(revs.std(ddof=1) / math.sqrt(config.replicates))
        threshold = report.expected_gap_bound / config.delta
        viol = float(np.mean((opt.value - revs) > threshold))
        rows.append(ExperimentRow(
            spec.tag, m, dist.n, dist.k, spec.levels, config.replicates,
            mean_rev, se, opt.value, opt.value - mean_rev,
            report.expected_gap_bound, config.delta, viol, fp,
            benchmark_note(spec, dist.n)))
    return rows


@dataclass(frozen=True)
class CurveRow:
    epsilon: float
    m_bound: int
    m_empirical: int | None

    def as_dict(self) -> dict:
        return {"epsilon": self.epsilon, "m_bound": self.m_bound,
                "m_empirical": self.m_empirical}


def sample_complexity_curve(config: ExperimentConfig,
                            eps_grid) -> tuple[list[ExperimentRow], list[CurveRow]]:
    """Bound-implied m(eps) next to the smallest experiment-grid m whose
    measured gap is already within eps."""
    rows = generalization_experiment(config)
    curve = []
    for eps in eps_grid:
        m_bound = sample_complexity_estimate(config.class_spec, eps,
                                             config.dist.n, config.dist.k,
                                             config.dist.value_range)
        hit = [r.m for r in rows if r.gap <= eps]
        curve.append(CurveRow(float(eps), m_bound, min(hit) if hit else None))
    return rows, curve


# ---------------------------------------------------------------------------
# output writers (full-precision floats; deterministic bytes)


_CSV_FIELDS = ["class", "m", "n", "k", "s", "replicates", "mean_revenue",
               "std_error", "optimum", "gap", "bound", "delta",
               "hp_violation_fraction", "fingerprint", "benchmark_note"]


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_rows_csv(rows: list[ExperimentRow], path: str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(_CSV_FIELDS)
        for r in rows:
            d = r.as_dict()
            writer.writerow([_cell(d[f]) for f in _CSV_FIELDS])


def write_rows_jsonl(rows, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in rows:
            fh.write(json.dumps(r.as_dict(), sort_keys=True) + "\n")


def write_gap_svg(rows: list[ExperimentRow], path: str,
                  width: int = 640, height: int = 400) -> None:
    """Minimal line chart of measured gap and bound against m."""
    pad = 50
    ms = [r.m for r in rows]
    lo_m, hi_m = min(ms), max(ms)
    top = max(max(r.bound for r in rows), max(r.gap for r in rows)) * 1.05 or 1.0

    def x(m):
        if hi_m == lo_m:
            return pad + (width - 2 * pad) / 2
        return pad + (m - lo_m) / (hi_m - lo_m) * (width - 2 * pad)

    def y(v):
        return height - pad - (v / top) * (height - 2 * pad)

    def polyline(points, color):
        pts = " ".join(f"{x(m):.2f},{y(v):.2f}" for m, v in points)
        return f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>'

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" y2="{height - pad}" stroke="black"/>',
        f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" stroke="black"/>',
        polyline([(r.m, r.gap) for r in rows], "#c0392b"),
        polyline([(r.m, r.bound) for r in rows], "#2980b9"),
        f'<text x="{width - pad}" y="{height - pad + 30}" text-anchor="end" font-size="12">m</text>',
        f'<text x="{pad + 8}" y="{pad + 4}" font-size="12" fill="#2980b9">bound</text>',
        f'<text x="{pad + 8}" y="{pad + 20}" font-size="12" fill="#c0392b">measured gap</text>',
    ]
    for r in rows:
        parts.append(f'<text x="{x(r.m):.2f}" y="{height - pad + 16}" '
                     f'text-anchor="middle" font-size="10">{r.m}</text>')
    parts.append(f'<text x="{pad - 6}" y="{y(top / 1.05):.2f}" text-anchor="end" '
                 f'font-size="10">{top / 1.05:.4g}</text>')
    parts.append("</svg>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(parts) + "\n")
