"""Validation experiments: SAD/MAD, the Hoeffding-violation protocol and
sampling-distribution checks against exact posteriors."""
from __future__ import annotations

import csv
import io
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from math import ceil, log

import numpy as np
from scipy.stats import binom

from .dataset import Dataset
from .estimators import build_collection, edge_frequencies
from .oracle import DagSpace
from .sampler import IntervalCache, dds, make_rng
from .scores import ScoreConfig, build_beta_tables
from .subset_dp import GuardError, exact_edge_posteriors_order_modular, run_dp

DEFAULT_SIGNIFICANCE = 1e-3


def sad(exact, estimated) -> float:
    """Sum of absolute differences over the off-diagonal entries."""
    exact = np.asarray(exact, dtype=float)
    estimated = np.asarray(estimated, dtype=float)
    if exact.shape != estimated.shape or exact.ndim != 2 or exact.shape[0] != exact.shape[1]:
        raise ValueError(f"shape mismatch: {exact.shape} vs {estimated.shape}")
    off = ~np.eye(exact.shape[0], dtype=bool)
    return float(np.abs(exact - estimated)[off].sum())


def mad(exact, estimated) -> float:
    n = np.asarray(exact).shape[0]
    return sad(exact, estimated) / (n * (n - 1)) if n > 1 else 0.0


def hoeffding_sample_size(epsilon: float, delta: float) -> int:
    """Smallest ``N_o`` with ``2 exp(-2 N_o eps^2) <= delta``."""
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    return max(1, ceil(log(2 / delta) / (2 * epsilon ** 2)))


@dataclass
class ValidationReport:
    metric: str
    values: list = field(default_factory=list)
    target: float | None = None
    tolerance: float | None = None
    passed: bool | None = None
    timings: dict = field(default_factory=dict)
    details: dict = field(default_factory=dict)

    @property
    def mean(self) -> float:
        return float(np.mean(self.values)) if self.values else float("nan")

    @property
    def std(self) -> float:
        return float(np.std(self.values, ddof=1)) if len(self.values) > 1 else 0.0

    def to_json(self) -> dict:
        d = asdict(self)
        d["mean"] = self.mean
        d["std"] = self.std
        return d

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(["metric", "index", "value"])
        for idx, v in enumerate(self.values):
            w.writerow([self.metric, idx, v])
        return buf.getvalue()

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True)


def _timing_summary(per_run: list[dict]) -> dict:
    out = {}
    for key in sorted({k for d in per_run for k in d}):
        vals = [d[key] for d in per_run if key in d]
        out[key] = {"mean": float(np.mean(vals)),
                    "std": float(np.std(vals, ddof=1)) if len(vals) > 1 else 0.0}
    return out


def _hoeffding_rep(args):
    tables, beta, n_samples, seed, rep, exact, epsilon = args
    res = dds(tables, beta, n_samples, make_rng(seed, rep), IntervalCache())
    est = edge_frequencies(build_collection(res))
    n = tables.n
    viol = (np.abs(est - exact) >= epsilon) & ~np.eye(n, dtype=bool)
    return viol, est, res.timings


def run_hoeffding_experiment(ds: Dataset, cfg: ScoreConfig, epsilon: float, delta: float,
                             repetitions: int = 400, seed: int = 0, workers: int = 1,
                             significance: float = DEFAULT_SIGNIFICANCE,
                             estimator=None) -> ValidationReport:
    """Repeat DDS ``repetitions`` times at the Hoeffding sample size and count,
    per edge, runs with ``|p_hat - p| >= epsilon``.

    Each edge's violation count is tested against ``H0: p_vio <= delta`` with a
    one-sided binomial test; the report passes when no edge rejects at
    ``significance``. ``estimator(rep) -> edge matrix`` replaces DDS when given.
    """
    beta = build_beta_tables(ds, cfg)
    t0 = time.perf_counter()
    tables = run_dp(beta)
    exact = exact_edge_posteriors_order_modular(tables, beta)
    t_dp = time.perf_counter() - t0
    n = ds.n
    n_samples = hoeffding_sample_size(epsilon, delta)
    off = ~np.eye(n, dtype=bool)
    counts = np.zeros((n, n), dtype=np.int64)
    per_run = []
    errors = []
    if estimator is not None:
        for rep in range(repetitions):
            est = np.asarray(estimator(rep))
            counts += (np.abs(est - exact) >= epsilon) & off
            errors.append(float(np.abs(est - exact)[off].max()) if n > 1 else 0.0)
    else:
        jobs = [(tables, beta, n_samples, seed, rep, exact, epsilon) for rep in range(repetitions)]
        if workers > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(_hoeffding_rep, jobs, chunksize=max(1, repetitions // (4 * workers))))
        else:
            results = map(_hoeffding_rep, jobs)
        for viol, est, timings in results:
            counts += viol
            per_run.append(timings)
            errors.append(float(np.abs(est - exact)[off].max()) if n > 1 else 0.0)
    p_vio = counts / repetitions
    # P(X >= count) under p_vio = delta: small means "p_vio > delta" is detected
    p_exceed = np.where(off, binom.sf(counts - 1, repetitions, delta), 1.0)
    # P(X <= count) under p_vio = delta: small means "p_vio < delta" is established
    p_below = np.where(off, binom.cdf(counts, repetitions, delta), 1.0)
    passed = bool((p_exceed[off] > significance).all()) if n > 1 else True
    hist_counts, hist_edges = np.histogram(p_vio[off], bins=10, range=(0.0, max(delta * 2, 1e-12)))
    timings = _timing_summary(per_run)
    timings["T_DP"] = {"mean": t_dp, "std": 0.0}
    return ValidationReport(
        metric="hoeffding_violation_max",
        values=errors,
        target=delta,
        tolerance=significance,
        passed=passed,
        timings=timings,
        details={
            "epsilon": epsilon, "delta": delta, "n_samples": n_samples,
            "repetitions": repetitions, "seed": seed,
            "p_vio": p_vio.tolist(), "max_p_vio": float(p_vio[off].max()) if n > 1 else 0.0,
            "min_p_exceed": float(p_exceed[off].min()) if n > 1 else 1.0,
            "max_p_below": float(p_below[off].max()) if n > 1 else 0.0,
            "histogram": {"counts": hist_counts.tolist(), "edges": hist_edges.tolist()},
        },
    )


def total_variation(p, q) -> float:
    return 0.5 * float(np.abs(np.asarray(p) - np.asarray(q)).sum())


def sampling_distribution_test(ds: Dataset, cfg: ScoreConfig, n_samples: int, seed: int = 0,
                               threshold: float = 0.01, max_n: int = 4) -> ValidationReport:
    """TV distance between DDS DAG frequencies and the exact ``p_<(G | D)``."""
    if ds.n > max_n:
        raise GuardError(f"sampling-distribution test is limited to n <= {max_n}, got n={ds.n}")
    beta = build_beta_tables(ds, cfg)
    t0 = time.perf_counter()
    tables = run_dp(beta)
    t_dp = time.perf_counter() - t0
    res = dds(tables, beta, n_samples, make_rng(seed), IntervalCache())
    space = DagSpace(beta)
    freq = np.zeros(len(space))
    for d in res.dags:
        freq[space.index(d)] += 1
    freq /= n_samples
    tv = total_variation(freq, space.posterior_order_modular)
    return ValidationReport(
        metric="total_variation",
        values=[tv],
        target=0.0,
        tolerance=threshold,
        passed=tv < threshold,
        timings={"T_DP": t_dp, **res.timings},
        details={"n_samples": n_samples, "seed": seed, "n_dags": len(space)},
    )
