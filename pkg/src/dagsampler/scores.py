"""K2 / BDeu local marginal likelihoods and the per-node log-beta tables.

``log_beta[i][z]`` is ``log rho_i(Pa) + log score_i(Pa : D)`` for the ``z``-th
parent set of node ``i`` in canonical (size, encoding) order.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property
from math import comb, log
from pathlib import Path

import numpy as np
from scipy.special import gammaln

from ._bits import canonical_parent_sets, compress, members
from .dataset import Dataset, family_counts

FAMILIES = ("k2", "bdeu")
RHO_MODES = ("uniform", "inv_binomial")
TABLE_FORMAT = "dagsampler.beta/1"


@dataclass(frozen=True)
class ScoreConfig:
    """Score family, hyperparameters and the modular prior on parent sets.

    ``rho=None`` picks the usual pairing: ``inv_binomial`` for K2 and
    ``uniform`` for BDeu. The predecessor-set factor ``q_i`` is always 1.
    """

    family: str = "k2"
    ess: float = 1.0
    max_indegree: int = 3
    rho: str | None = None

    def __post_init__(self):
        family = self.family.lower()
        if family not in FAMILIES:
            raise ValueError(f"unknown score family {self.family!r}; expected one of {FAMILIES}")
        object.__setattr__(self, "family", family)
        if family == "bdeu" and not self.ess > 0:
            raise ValueError("BDeu needs a positive equivalent sample size")
        if self.max_indegree < 0:
            raise ValueError("max_indegree must be >= 0")
        if self.rho is not None and self.rho not in RHO_MODES:
            raise ValueError(f"unknown rho mode {self.rho!r}; expected one of {RHO_MODES}")

    @property
    def rho_mode(self) -> str:
        if self.rho is not None:
            return self.rho
        return "inv_binomial" if self.family == "k2" else "uniform"

    def effective_k(self, n: int) -> int:
        return min(self.max_indegree, n - 1)

    def as_dict(self) -> dict:
        return {"family": self.family, "ess": self.ess,
                "max_indegree": self.max_indegree, "rho": self.rho_mode}


def local_score(ds: Dataset, cfg: ScoreConfig, i: int, pa) -> float:
    """Natural-log marginal likelihood of column ``i`` given parents ``pa``."""
    pa = list(pa)
    if len(pa) > cfg.max_indegree:
        raise ValueError(f"parent set larger than max_indegree={cfg.max_indegree}")
    fc = family_counts(ds, i, pa)
    r = ds.arity[i]
    counts = fc.counts
    if counts.size == 0:
        return 0.0
    nij = counts.sum(axis=1)
    if cfg.family == "k2":
        return float(np.sum(gammaln(r) - gammaln(nij + r)) + np.sum(gammaln(counts + 1)))
    a_j = cfg.ess / fc.n_configs
    a_jk = a_j / r
    return float(np.sum(gammaln(a_j) - gammaln(a_j + nij))
                 + np.sum(gammaln(a_jk + counts) - gammaln(a_jk)))


def log_rho(cfg: ScoreConfig, n: int, size: int) -> float:
    if cfg.rho_mode == "uniform":
        return 0.0
    return -log(comb(n - 1, size))


class FamilyScoreTable:
    """Log-beta values for every node and every parent set up to size ``k``.

    Parameters
    ----------
    parent_sets : list of ndarray
        Per node, global bit masks in canonical order.
    log_beta : list of ndarray
        Matching ``log rho + log score`` values.
    """

    def __init__(self, parent_sets, log_beta, max_indegree: int, names=None, config: dict | None = None):
        self.parent_sets = [np.asarray(p, dtype=np.int64) for p in parent_sets]
        self.log_beta = [np.asarray(b, dtype=float) for b in log_beta]
        self.n = len(self.parent_sets)
        self.max_indegree = int(max_indegree)
        self.names = tuple(names) if names is not None else tuple(f"X{i}" for i in range(self.n))
        self.config = dict(config or {})
        for i, (p, b) in enumerate(zip(self.parent_sets, self.log_beta)):
            if p.shape != b.shape:
                raise ValueError(f"node {i}: parent sets and values differ in length")
            if (p >> i & 1).any():
                raise ValueError(f"node {i} listed as its own parent")

    @cached_property
    def _index(self) -> list[dict[int, int]]:
        return [{int(m): z for z, m in enumerate(p)} for p in self.parent_sets]

    def lookup(self, i: int, pa_mask: int) -> float:
        """``log beta'_i(Pa)``; ``-inf`` for parent sets outside the domain."""
        z = self._index[i].get(int(pa_mask))
        return -np.inf if z is None else float(self.log_beta[i][z])

    def dense(self, i: int) -> np.ndarray:
        """Node ``i`` values over compressed subsets of ``V - {i}``, ``-inf`` elsewhere."""
        out = np.full(1 << (self.n - 1), -np.inf)
        out[compress(self.parent_sets[i], i)] = self.log_beta[i]
        return out

    def log_joint(self, parents) -> float:
        """``sum_i log beta'_i(Pa_i)`` for a parent vector of masks."""
        return float(sum(self.lookup(i, pa) for i, pa in enumerate(parents)))

    def to_json(self) -> dict:
        return {
            "format": TABLE_FORMAT,
            "set_encoding": "bit j set <=> variable j present",
            "n": self.n,
            "names": list(self.names),
            "max_indegree": self.max_indegree,
            "config": self.config,
            "nodes": [
                {"node": i, "parents": [int(m) for m in p], "log_beta": [float(v) for v in b]}
                for i, (p, b) in enumerate(zip(self.parent_sets, self.log_beta))
            ],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "FamilyScoreTable":
        if obj.get("format") != TABLE_FORMAT:
            raise ValueError(f"not a {TABLE_FORMAT} document")
        nodes = sorted(obj["nodes"], key=lambda d: d["node"])
        return cls([d["parents"] for d in nodes], [d["log_beta"] for d in nodes],
                   obj["max_indegree"], obj.get("names"), obj.get("config"))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json()))

    @classmethod
    def load(cls, path) -> "FamilyScoreTable":
        return cls.from_json(json.loads(Path(path).read_text()))

    def __eq__(self, other):
        if not isinstance(other, FamilyScoreTable) or other.n != self.n:
            return NotImplemented
        return all(np.array_equal(a, b) for a, b in zip(self.parent_sets, other.parent_sets)) and \
            all(np.array_equal(a, b) for a, b in zip(self.log_beta, other.log_beta))


def build_beta_tables(ds: Dataset, cfg: ScoreConfig) -> FamilyScoreTable:
    n = ds.n
    k = cfg.effective_k(n)
    parent_sets, values = [], []
    for i in range(n):
        ps = canonical_parent_sets(n, i, k)
        vals = np.empty(ps.size)
        for z, mask in enumerate(ps):
            pa = members(int(mask))
            vals[z] = local_score(ds, cfg, i, pa) + log_rho(cfg, n, len(pa))
        parent_sets.append(ps)
        values.append(vals)
    return FamilyScoreTable(parent_sets, values, k, ds.names, cfg.as_dict())
