"""Feature-posterior estimators built on DDS output.

* :func:`estimate_dds` is the plain sample mean (order-modular target).
* :func:`estimate_dos_edges` averages the analytic per-order edge posterior.
* :func:`estimate_iwdds` reweights the deduplicated sample set by
  structure-modular joints and, given ``log p(D)``, attaches the sound
  interval ``[delta * p, delta * p + 1 - delta]``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from ._bits import compress, logsumexp
from .features import Feature
from .oracle import count_linear_extensions
from .sampler import Dag, DdsResult
from .subset_dp import DpTables

DELTA_SLACK = 1e-9


@dataclass
class DagCollection:
    """Unique sampled DAGs with their log joints and multiplicities."""

    dags: list[Dag] = field(default_factory=list)
    log_joint: list[float] = field(default_factory=list)
    multiplicity: list[int] = field(default_factory=list)
    _pos: dict = field(default_factory=dict, repr=False)

    def add(self, dag: Dag, log_joint: float, count: int = 1) -> None:
        g = self._pos.get(dag.parents)
        if g is None:
            self._pos[dag.parents] = len(self.dags)
            self.dags.append(dag)
            self.log_joint.append(float(log_joint))
            self.multiplicity.append(count)
        else:
            self.multiplicity[g] += count

    def extend(self, samples) -> "DagCollection":
        for dag, lj in samples:
            self.add(dag, lj)
        return self

    def __len__(self):
        return len(self.dags)

    def __contains__(self, dag: Dag):
        return dag.parents in self._pos

    @property
    def n_samples(self) -> int:
        return int(sum(self.multiplicity))

    @property
    def log_normalizer(self) -> float:
        return float(logsumexp(np.asarray(self.log_joint)))

    def weights(self) -> np.ndarray:
        lj = np.asarray(self.log_joint)
        return np.exp(lj - logsumexp(lj))

    def indicator(self, feature: Feature) -> np.ndarray:
        return np.fromiter((feature.eval(d) for d in self.dags), dtype=float, count=len(self.dags))

    def delta(self, log_evidence: float | None) -> float | None:
        if log_evidence is None:
            return None
        return _clamp_delta(np.exp(self.log_normalizer - log_evidence))


def build_collection(samples) -> DagCollection:
    """Deduplicate ``(Dag, log_joint)`` pairs by parent vector."""
    if isinstance(samples, DdsResult):
        samples = iter(samples)
    return DagCollection().extend(samples)


def _clamp_delta(delta: float) -> float:
    if delta > 1.0 + DELTA_SLACK:
        warnings.warn(f"sample mass exceeds the evidence (delta={delta:.12g}); "
                      "the supplied log p(D) is probably inexact", RuntimeWarning, stacklevel=3)
    return float(min(1.0, max(0.0, delta)))


@dataclass
class Estimate:
    value: float
    n_samples: int
    delta: float | None = None
    unique_dags: int | None = None
    feature: str | None = None

    @property
    def interval(self) -> tuple[float, float] | None:
        if self.delta is None:
            return None
        lo = self.delta * self.value
        return (lo, lo + 1.0 - self.delta)

    def to_json(self, seed=None) -> dict:
        iv = self.interval
        return {"feature": self.feature, "value": self.value, "delta": self.delta,
                "interval": list(iv) if iv is not None else None,
                "n_samples": self.n_samples, "unique_dags": self.unique_dags, "seed": seed}


def estimate_dds(samples, feature: Feature) -> Estimate:
    """Sample mean of ``feature`` over all draws, multiplicities included."""
    if not isinstance(samples, DagCollection):
        samples = DagCollection().extend(
            (s, 0.0) if isinstance(s, Dag) else s for s in samples)
    if not len(samples):
        raise ValueError("no samples")
    f = samples.indicator(feature)
    mult = np.asarray(samples.multiplicity, dtype=float)
    return Estimate(float(f @ mult / mult.sum()), samples.n_samples, unique_dags=len(samples))


def edge_frequencies(coll) -> np.ndarray:
    """Multiplicity-weighted edge frequencies, ``[i, j]`` for ``j -> i``."""
    n = coll.dags[0].n
    out = np.zeros((n, n))
    for dag, mult in zip(coll.dags, coll.multiplicity):
        out += float(mult) * dag.adjacency()
    return out / coll.n_samples


def estimate_dos_edges(orders, tables: DpTables) -> np.ndarray:
    """Mean over sampled orders of the analytic ``p(j -> i | <, D)``; row = child."""
    orders = np.atleast_2d(np.asarray(orders, dtype=np.int64))
    N, n = orders.shape
    U = np.zeros((N, n), dtype=np.int64)
    acc = np.zeros(N, dtype=np.int64)
    for pos in range(n):
        v = orders[:, pos]
        U[np.arange(N), v] = acc
        acc |= np.left_shift(1, v)
    out = np.zeros((n, n))
    for i in range(n):
        Ui = U[:, i]
        a_full = tables.alpha[i, compress(Ui, i)]
        for j in range(n):
            if j == i:
                continue
            has = (Ui >> j & 1).astype(bool)
            if not has.any():
                continue
            a_wo = tables.alpha[i, compress(Ui[has] & ~(1 << j), i)]
            out[i, j] = np.clip(-np.expm1(a_wo - a_full[has]), 0.0, 1.0).sum() / N
    return out


def estimate_iwdds(coll: DagCollection, feature: Feature, log_evidence: float | None = None) -> Estimate:
    """Importance-weighted estimate over unique DAGs (multiplicities ignored)."""
    if not len(coll):
        raise ValueError("empty DAG collection")
    value = float(np.clip(coll.indicator(feature) @ coll.weights(), 0.0, 1.0))
    return Estimate(value, coll.n_samples, coll.delta(log_evidence), len(coll))


def estimate_iw_linear_extensions(samples: Iterable[Dag], feature: Feature,
                                  log_p_prec_D: float, log_p_nprec_D: float) -> Estimate:
    """Importance-sampling estimate weighting each draw by ``1 / |<_G|``.

    Experimental: needs an ``O(n 2^n)`` linear-extension count per distinct DAG.
    """
    dags = [s[0] if isinstance(s, tuple) else s for s in samples]
    if not dags:
        raise ValueError("no samples")
    cache: dict = {}
    total = 0.0
    for d in dags:
        if not feature.eval(d):
            continue
        le = cache.get(d.parents)
        if le is None:
            le = cache[d.parents] = count_linear_extensions(d, exact=False)
        total += np.exp(log_p_prec_D - log_p_nprec_D - le)
    return Estimate(total / len(dags), len(dags))
