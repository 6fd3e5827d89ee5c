"""scikit-learn style front end.

Each estimator takes an integer-coded array (rows = records, columns =
variables; a pandas DataFrame keeps its column names) and learns posterior
structure information in :meth:`fit`.
"""
from __future__ import annotations

import time

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .dataset import Dataset, from_array
from .estimators import (Estimate, build_collection, edge_frequencies, estimate_dds, estimate_dos_edges,
                         estimate_iwdds)
from .features import Feature, parse_feature
from .oracle import evidence_structure_modular
from .sampler import DEFAULT_CAPACITY, IntervalCache, dds, make_rng
from .scores import ScoreConfig, build_beta_tables
from .subset_dp import MAX_N, exact_edge_posteriors_order_modular, run_dp

# inclusion-exclusion costs O(3^n); beyond this the interval is skipped by default
AUTO_EVIDENCE_MAX_N = 16


def _as_dataset(X, arity=None) -> Dataset:
    if isinstance(X, Dataset):
        return X
    names = None
    if hasattr(X, "columns"):
        names = [str(c) for c in X.columns]
    X = check_array(X, dtype=np.int64, ensure_min_samples=1, ensure_min_features=1)
    if (X < 0).any():
        raise ValueError("category indices must be non-negative")
    return from_array(X, names=names, arity=arity)


class _StructureBase(BaseEstimator):
    def __init__(self, score="k2", ess=1.0, max_indegree=3, rho=None, arity=None, max_n=MAX_N):
        self.score = score
        self.ess = ess
        self.max_indegree = max_indegree
        self.rho = rho
        self.arity = arity
        self.max_n = max_n

    def _config(self) -> ScoreConfig:
        return ScoreConfig(self.score, self.ess, self.max_indegree, self.rho)

    def _fit_tables(self, X):
        ds = _as_dataset(X, self.arity)
        t0 = time.perf_counter()
        self.beta_ = build_beta_tables(ds, self._config())
        self.tables_ = run_dp(self.beta_, max_n=self.max_n)
        self.names_ = ds.names
        self.n_features_in_ = ds.n
        self.log_evidence_order_ = self.tables_.log_evidence_order
        self.timings_ = {"T_DP": time.perf_counter() - t0}
        return ds

    def _feature(self, feature) -> Feature:
        if isinstance(feature, str):
            return parse_feature(feature, self.names_)
        return feature


class OrderModularEdges(_StructureBase):
    """Exact edge posteriors under the order-modular prior.

    Attributes
    ----------
    edge_posteriors_ : ndarray of shape (n, n)
        ``[i, j]`` is the posterior of ``j -> i`` (row = child).
    log_evidence_order_ : float
        ``log p_<(D)``.
    """

    def fit(self, X, y=None):
        self._fit_tables(X)
        self.edge_posteriors_ = exact_edge_posteriors_order_modular(self.tables_, self.beta_)
        return self

    def transform(self, X=None):
        check_is_fitted(self, "edge_posteriors_")
        return self.edge_posteriors_


class DDSSampler(_StructureBase):
    """Direct DAG Sampling: iid DAGs from the exact order-modular posterior.

    Parameters
    ----------
    n_samples : int
        Number of orders, hence DAGs, drawn in :meth:`fit`.
    random_state : int or None
        Seed for the Philox stream.
    cache_capacity : int or None
        Interval-cache capacity in stored intervals; ``None`` for unbounded.
    """

    def __init__(self, score="k2", ess=1.0, max_indegree=3, rho=None, n_samples=1000,
                 random_state=None, cache_capacity=DEFAULT_CAPACITY, arity=None, max_n=MAX_N):
        super().__init__(score, ess, max_indegree, rho, arity, max_n)
        self.n_samples = n_samples
        self.random_state = random_state
        self.cache_capacity = cache_capacity

    def fit(self, X, y=None):
        if int(self.n_samples) < 1:
            raise ValueError("n_samples must be >= 1")
        self._fit_tables(X)
        self.result_ = dds(self.tables_, self.beta_, int(self.n_samples), make_rng(self.random_state),
                           IntervalCache(self.cache_capacity))
        self.timings_.update(self.result_.timings)
        self.collection_ = build_collection(self.result_)
        self.edge_frequencies_ = edge_frequencies(self.collection_)
        return self

    @property
    def samples_(self):
        check_is_fitted(self, "result_")
        return self.result_.dags

    def dos_edge_posteriors(self) -> np.ndarray:
        check_is_fitted(self, "result_")
        return estimate_dos_edges(self.result_.orders, self.tables_)

    def estimate(self, feature) -> Estimate:
        check_is_fitted(self, "collection_")
        est = estimate_dds(self.collection_, self._feature(feature))
        est.feature = feature if isinstance(feature, str) else repr(feature)
        return est

    def predict_proba(self, features) -> np.ndarray:
        return np.array([self.estimate(f).value for f in features])


class IWDDS(DDSSampler):
    """Importance-weighted DDS targeting the structure-modular posterior.

    ``log_evidence='auto'`` computes ``log p(D)`` by inclusion-exclusion when
    ``n <= AUTO_EVIDENCE_MAX_N``; a float is used as given; ``None`` skips it,
    in which case estimates carry no interval.
    """

    def __init__(self, score="k2", ess=1.0, max_indegree=3, rho=None, n_samples=1000,
                 random_state=None, cache_capacity=DEFAULT_CAPACITY, arity=None, max_n=MAX_N,
                 log_evidence="auto"):
        super().__init__(score, ess, max_indegree, rho, n_samples, random_state, cache_capacity,
                         arity, max_n)
        self.log_evidence = log_evidence

    def fit(self, X, y=None):
        super().fit(X, y)
        if self.log_evidence == "auto":
            self.log_evidence_ = (evidence_structure_modular(self.beta_)
                                  if self.n_features_in_ <= AUTO_EVIDENCE_MAX_N else None)
        else:
            self.log_evidence_ = None if self.log_evidence is None else float(self.log_evidence)
        self.delta_ = self.collection_.delta(self.log_evidence_)
        return self

    def estimate(self, feature) -> Estimate:
        check_is_fitted(self, "collection_")
        est = estimate_iwdds(self.collection_, self._feature(feature), self.log_evidence_)
        est.feature = feature if isinstance(feature, str) else repr(feature)
        return est

    def edge_posteriors(self) -> np.ndarray:
        check_is_fitted(self, "collection_")
        w = self.collection_.weights()
        n = self.n_features_in_
        out = np.zeros((n, n))
        for dag, wg in zip(self.collection_.dags, w):
            out += wg * dag.adjacency()
        return out
