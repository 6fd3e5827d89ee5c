"""Brute-force and independent exact computations for small ``n``.

These are verification oracles: DAG enumeration, exact feature posteriors
under the structure-modular and order-modular priors, linear-extension
counts and the structure-modular evidence ``log p(D)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from itertools import permutations, product
from math import factorial, log
from typing import Iterator

import numpy as np

from ._bits import compress, logsumexp, masks_by_size, members
from .dataset import Dataset
from .features import Feature
from .sampler import Dag
from .scores import FamilyScoreTable, ScoreConfig, build_beta_tables
from .subset_dp import GuardError, build_alpha

MAX_ENUM_N = 6
MAX_ORDER_ENUM_N = 5
MAX_EVIDENCE_N = 22


def _guard(n, limit, what):
    if n > limit:
        raise GuardError(f"{what} is limited to n <= {limit}, got n={n}")


def enumerate_dags(n: int, k: int | None = None) -> Iterator[Dag]:
    """Every DAG on ``n`` nodes with in-degree at most ``k``, each exactly once.

    Parent sets are assigned node by node; ``desc`` tracks reachability in
    the partial graph so a choice closing a cycle is pruned immediately.
    """
    _guard(n, MAX_ENUM_N, "DAG enumeration")
    if k is None:
        k = n - 1
    cands = []
    for i in range(n):
        others = [m for m in range(1 << n) if not m >> i & 1 and m.bit_count() <= k]
        cands.append(sorted(others, key=lambda m: (m.bit_count(), m)))

    parents = [0] * n

    def rec(i, desc):
        if i == n:
            yield Dag(tuple(parents))
            return
        for pa in cands[i]:
            # p -> i closes a cycle iff p is already a descendant of i
            if pa & desc[i]:
                continue
            parents[i] = pa
            new = list(desc)
            gain = desc[i] | (1 << i)
            anc = pa
            for v in range(n):
                if desc[v] & pa:
                    anc |= 1 << v
            for v in members(anc):
                new[v] |= gain
            yield from rec(i + 1, new)
        parents[i] = 0

    yield from rec(0, [0] * n)


def count_linear_extensions(dag: Dag, exact: bool = True):
    """Number of total orders consistent with ``dag``.

    Subset DP: ``N(S) = sum N(S - {i})`` over ``i in S`` with no child in ``S``.
    ``exact=True`` returns a Python int; otherwise ``log N(V)`` as a float.
    """
    n = dag.n
    if exact and n > 20:
        raise GuardError("exact linear-extension counting is limited to n <= 20")
    if n > 25:
        raise GuardError("linear-extension counting is limited to n <= 25")
    children = [0] * n
    for i, p in enumerate(dag.parents):
        for j in members(p):
            children[j] |= 1 << i
    if exact:
        N = [0] * (1 << n)
        N[0] = 1
        for S in range(1, 1 << n):
            total = 0
            for i in members(S):
                if children[i] & S == 0:
                    total += N[S ^ (1 << i)]
            N[S] = total
        return N[-1]
    levels = masks_by_size(n)
    logN = np.full(1 << n, -np.inf)
    logN[0] = 0.0
    ch = np.array(children, dtype=np.int64)
    for s in range(1, n + 1):
        M = levels[s]
        terms = np.full((n, M.size), -np.inf)
        for i in range(n):
            ok = ((M >> i & 1) == 1) & ((M & ch[i]) == 0)
            terms[i, ok] = logN[M[ok] ^ (1 << i)]
        logN[M] = logsumexp(terms, axis=0)
    return float(logN[-1])


def count_linear_extensions_bruteforce(dag: Dag) -> int:
    return sum(1 for perm in permutations(range(dag.n)) if _consistent(dag.parents, perm))


def _consistent(parents, perm) -> bool:
    seen = 0
    for v in perm:
        if parents[v] & ~seen:
            return False
        seen |= 1 << v
    return True


class DagSpace:
    """All DAGs of the model space with their structure-modular log joints.

    ``log_joint[g] = sum_i log beta'_i(Pa_i)``, which equals
    ``log p(G, D)`` under the structure-modular prior ``p_i = rho_i``.
    """

    def __init__(self, beta: FamilyScoreTable):
        _guard(beta.n, MAX_ENUM_N, "DAG enumeration")
        self.beta = beta
        self.n = beta.n
        self.dags = list(enumerate_dags(beta.n, beta.max_indegree))
        P = np.array([d.parents for d in self.dags], dtype=np.int64).reshape(len(self.dags), self.n)
        self.parent_masks = P
        lj = np.zeros(len(self.dags))
        for i in range(self.n):
            lj += beta.dense(i)[compress(P[:, i], i)]
        self.log_joint = lj
        self._pos = {d.parents: g for g, d in enumerate(self.dags)}

    def __len__(self):
        return len(self.dags)

    def index(self, dag: Dag) -> int:
        return self._pos[dag.parents]

    @cached_property
    def log_evidence(self) -> float:
        """``log p_{not<}(D)`` by summing every DAG's joint."""
        return float(logsumexp(self.log_joint))

    @cached_property
    def log_extensions(self) -> np.ndarray:
        return np.array([log(count_linear_extensions(d)) for d in self.dags])

    @cached_property
    def posterior_structure_modular(self) -> np.ndarray:
        return np.exp(self.log_joint - self.log_evidence)

    @cached_property
    def posterior_order_modular(self) -> np.ndarray:
        """``p_<(G | D)`` via ``p_<(G, D) = |<_G| p(G, D)`` (q = 1, rho = p_i)."""
        w = self.log_joint + self.log_extensions
        return np.exp(w - logsumexp(w))

    @cached_property
    def log_evidence_order(self) -> float:
        return float(logsumexp(self.log_joint + self.log_extensions))

    def indicator(self, feature: Feature) -> np.ndarray:
        return np.fromiter((feature.eval(d) for d in self.dags), dtype=float, count=len(self.dags))

    def structure_modular(self, feature: Feature) -> float:
        return float(np.clip(self.indicator(feature) @ self.posterior_structure_modular, 0.0, 1.0))

    def order_modular(self, feature: Feature) -> float:
        return float(np.clip(self.indicator(feature) @ self.posterior_order_modular, 0.0, 1.0))

    def order_dag_log_joints(self) -> np.ndarray:
        """``log p_<(G, D)`` per DAG by summing ``prod beta'`` over (order, DAG) pairs.

        Independent of linear-extension counts: every order is enumerated and
        every DAG consistent with it receives that order's product of betas.
        """
        _guard(self.n, MAX_ORDER_ENUM_N, "order x DAG enumeration")
        n = self.n
        acc = np.zeros(len(self.dags))
        for perm in permutations(range(n)):
            U = [0] * n
            seen = 0
            for v in perm:
                U[v] = seen
                seen |= 1 << v
            choices = []
            for i in range(n):
                ps = self.beta.parent_sets[i]
                sel = (ps & ~U[i]) == 0
                choices.append(list(zip(ps[sel].tolist(), np.exp(self.beta.log_beta[i][sel] - self._shift(i)).tolist())))
            for combo in product(*choices):
                g = self._pos[tuple(c[0] for c in combo)]
                w = 1.0
                for c in combo:
                    w *= c[1]
                acc[g] += w
        shift = sum(self._shift(i) for i in range(n))
        with np.errstate(divide="ignore"):
            return np.log(acc) + shift

    def _shift(self, i):
        return float(self.beta.log_beta[i].max())


def order_modular_edge_posteriors_by_enumeration(beta: FamilyScoreTable) -> np.ndarray:
    """Edge matrix ``P[i, j] = p_<(j -> i | D)`` from the (order x DAG) double sum."""
    space = DagSpace(beta)
    lj = space.order_dag_log_joints()
    w = np.exp(lj - logsumexp(lj))
    n = beta.n
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            if i != j:
                out[i, j] = w[(space.parent_masks[:, i] >> j & 1) == 1].sum()
    return out


def exact_posterior_structure_modular(ds: Dataset, cfg: ScoreConfig, feature: Feature,
                                      beta: FamilyScoreTable | None = None) -> float:
    """``p_{not<}(f | D)`` by averaging over every DAG."""
    if ds.n > MAX_ENUM_N:
        raise GuardError(f"DAG enumeration is limited to n <= {MAX_ENUM_N}, got n={ds.n}")
    return DagSpace(beta or build_beta_tables(ds, cfg)).structure_modular(feature)


def exact_posterior_order_modular(ds: Dataset, cfg: ScoreConfig, feature: Feature,
                                  beta: FamilyScoreTable | None = None) -> float:
    """``p_<(f | D)`` with ``q = 1`` and ``rho = p_i``, weighting DAGs by ``|<_G|``."""
    if ds.n > MAX_ORDER_ENUM_N:
        raise GuardError(f"order-modular enumeration is limited to n <= {MAX_ORDER_ENUM_N}, got n={ds.n}")
    return DagSpace(beta or build_beta_tables(ds, cfg)).order_modular(feature)


@dataclass(frozen=True)
class EvidenceValue:
    log_value: float
    kind: str          # "structure_modular" or "order_modular"
    provenance: str    # "enumeration", "subset_dp" or "inclusion_exclusion"


def evidence_structure_modular(beta: FamilyScoreTable) -> float:
    """``log sum_G prod_i beta'_i(Pa_i)`` by inclusion-exclusion over sink sets.

    ``H(S) = sum_{W proper subset S} (-1)^{|S - W| + 1} H(W) prod_{i in S - W} A_i(W)``
    with ``A_i = alpha'_i``. Each node's ``A_i`` is scaled by its maximum so
    the alternating sums stay in range; the scales recombine exactly because
    every DAG on ``S`` uses each ``i in S`` once.
    """
    n = beta.n
    _guard(n, MAX_EVIDENCE_N, "inclusion-exclusion evidence")
    alpha = build_alpha(beta)
    shift = alpha.max(axis=1)
    A = np.exp(alpha - shift[:, None])
    full = (1 << n) - 1
    H = np.zeros(1 << n)
    H[0] = 1.0
    for s in range(n):
        for W in masks_by_size(n)[s]:
            W = int(W)
            hw = H[W]
            if hw == 0.0:
                continue
            free = members(full ^ W)
            # signed products over all non-empty T within V - W, built by doubling
            prods = np.array([-1.0])
            supers = np.array([W], dtype=np.int64)
            for i in free:
                a = -A[i, compress(W, i)]
                prods = np.concatenate([prods, prods * a])
                supers = np.concatenate([supers, supers | (1 << i)])
            # prods[t] = -(-1)^{|T|} prod A = (-1)^{|T|+1} prod A
            H[supers[1:]] += hw * prods[1:]
    if H[full] <= 0:
        raise FloatingPointError("inclusion-exclusion lost all precision")
    return float(np.log(H[full]) + shift.sum())


def evidence_by_enumeration(beta: FamilyScoreTable) -> float:
    return DagSpace(beta).log_evidence


def evidence_from_order_modular(beta: FamilyScoreTable, log_p_prec: float) -> float:
    """Rebuild ``log p_{not<}(D)`` from ``log p_<(D)`` and linear-extension counts.

    ``p_<(G | D)`` comes from the (order x DAG) enumeration, then
    ``p_{not<}(D) = p_<(D) sum_G p_<(G | D) / |<_G|``.
    """
    space = DagSpace(beta)
    lj = space.order_dag_log_joints()
    post = lj - log_p_prec
    return float(log_p_prec + logsumexp(post - space.log_extensions))


def n_dags(n: int) -> int:
    """Number of labelled DAGs on ``n`` nodes via the alternating-sum recurrence."""
    a = [1]
    for m in range(1, n + 1):
        a.append(sum((-1) ** (k + 1) * factorial(m) // (factorial(k) * factorial(m - k))
                     * 2 ** (k * (m - k)) * a[m - k] for k in range(1, m + 1)))
    return a[n]
