"""Order-space dynamic programming over the subset lattice.

Every quantity is a natural log. ``alpha[i, c]`` is indexed by the compressed
encoding ``c`` of a subset of ``V - {i}``; ``L`` and ``R`` are indexed by full
``n``-bit encodings.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._bits import compress, expand, logsumexp, masks_by_size, subset_logsumexp
from .scores import FamilyScoreTable

MAX_N = 25


class GuardError(RuntimeError):
    """Refusal to run a computation past its size limit."""


@dataclass(frozen=True)
class DpTables:
    alpha: np.ndarray
    L: np.ndarray
    R: np.ndarray

    @property
    def n(self) -> int:
        return self.alpha.shape[0]

    @property
    def full(self) -> int:
        return (1 << self.n) - 1

    @property
    def log_evidence_order(self) -> float:
        """``log p_<(D) = L'(V)``."""
        return float(self.L[self.full])

    def alpha_of(self, i: int, U: int) -> float:
        return float(self.alpha[i, compress(U, i)])

    @property
    def n_values(self) -> int:
        return self.alpha.size + self.L.size + self.R.size


def _truncated_alpha_node(dense: np.ndarray, k: int) -> np.ndarray:
    """Sum over ``Pa subset S`` with ``|Pa| <= k`` by a size-split recursion.

    With ``A_j(S)`` the sum over parent sets of size exactly ``j``,
    ``sum_{x in S} A_j(S - {x}) = (|S| - j) A_j(S)``, so each ``A_j`` is filled
    level by level in ``O(n 2^n)``.
    """
    d = dense.size.bit_length() - 1
    levels = masks_by_size(d)
    out = np.full(dense.size, -np.inf)
    for j in range(min(k, d) + 1):
        A = np.full(dense.size, -np.inf)
        A[levels[j]] = dense[levels[j]]
        for s in range(j + 1, d + 1):
            M = levels[s]
            terms = np.full((d, M.size), -np.inf)
            for x in range(d):
                has = (M >> x & 1).astype(bool)
                terms[x, has] = A[M[has] ^ (1 << x)]
            A[M] = logsumexp(terms, axis=0) - np.log(s - j)
        out = np.logaddexp(out, A)
    return out


def build_alpha(beta: FamilyScoreTable, truncated: bool = False) -> np.ndarray:
    """``alpha'_i(S) = log sum_{Pa subset S, |Pa| <= k} beta'_i(Pa)`` for all ``i, S``.

    The default is one full zeta transform per node over the zero-extended
    beta; ``truncated=True`` uses the ``O(k n 2^n)`` size-split recursion.
    """
    n = beta.n
    alpha = np.empty((n, 1 << (n - 1)))
    for i in range(n):
        dense = beta.dense(i)
        alpha[i] = _truncated_alpha_node(dense, beta.max_indegree) if truncated else subset_logsumexp(dense)
    return alpha


def build_L(alpha: np.ndarray) -> np.ndarray:
    """Forward contributions ``L(S) = sum_{i in S} alpha_i(S - {i}) L(S - {i})``."""
    n = alpha.shape[0]
    levels = masks_by_size(n)
    L = np.full(1 << n, -np.inf)
    L[0] = 0.0
    for s in range(1, n + 1):
        M = levels[s]
        terms = np.full((n, M.size), -np.inf)
        for i in range(n):
            has = (M >> i & 1).astype(bool)
            prev = M[has] ^ (1 << i)
            terms[i, has] = alpha[i, compress(prev, i)] + L[prev]
        L[M] = logsumexp(terms, axis=0)
    return L


def build_R(alpha: np.ndarray) -> np.ndarray:
    """Backward contributions ``R(T) = sum_{i in T} alpha_i(V - T) R(T - {i})``.

    Peeling off the first element of an order of ``T`` leaves an order of
    ``T - {i}`` whose common prefix grows by ``i``.
    """
    n = alpha.shape[0]
    full = (1 << n) - 1
    levels = masks_by_size(n)
    R = np.full(1 << n, -np.inf)
    R[0] = 0.0
    for s in range(1, n + 1):
        T = levels[s]
        rest = full ^ T
        terms = np.full((n, T.size), -np.inf)
        for i in range(n):
            has = (T >> i & 1).astype(bool)
            terms[i, has] = alpha[i, compress(rest[has], i)] + R[T[has] ^ (1 << i)]
        R[T] = logsumexp(terms, axis=0)
    return R


def run_dp(beta: FamilyScoreTable, truncated: bool = False, max_n: int = MAX_N) -> DpTables:
    if beta.n > max_n:
        raise GuardError(f"n={beta.n} exceeds the subset-DP limit of {max_n} variables")
    alpha = build_alpha(beta, truncated=truncated)
    return DpTables(alpha, build_L(alpha), build_R(alpha))


def order_joint(order, tables: DpTables) -> float:
    """``log p(<, D) = sum_j alpha'_{sigma_j}(U_{sigma_j})``."""
    U = 0
    total = 0.0
    for v in order:
        total += tables.alpha[v, compress(U, v)]
        U |= 1 << int(v)
    return float(total)


def order_log_joints(orders: np.ndarray, tables: DpTables) -> np.ndarray:
    """Vectorised :func:`order_joint` over an ``(N, n)`` array of orders."""
    orders = np.asarray(orders, dtype=np.int64)
    N, n = orders.shape
    U = np.zeros(N, dtype=np.int64)
    total = np.zeros(N)
    for pos in range(n):
        v = orders[:, pos]
        for i in range(n):
            sel = v == i
            total[sel] += tables.alpha[i, compress(U[sel], i)]
        U |= np.left_shift(1, v)
    return total


def parent_posterior_given_order(i: int, pa: int, U: int, beta: FamilyScoreTable, tables: DpTables) -> float:
    """``log p((i, Pa) | <, D)`` for predecessor set ``U`` of ``i``."""
    if U >> i & 1 or pa >> i & 1:
        raise ValueError(f"node {i} cannot precede itself or be its own parent")
    if pa & ~U:
        raise ValueError("parent set is not contained in the predecessor set")
    return beta.lookup(i, pa) - tables.alpha_of(i, U)


def edge_posterior_given_order(j: int, i: int, U: int, tables: DpTables) -> float:
    """``p(j -> i | <, D)``; zero when ``j`` does not precede ``i``."""
    if U >> i & 1:
        raise ValueError(f"node {i} cannot precede itself")
    if not U >> j & 1:
        return 0.0
    diff = tables.alpha_of(i, U & ~(1 << j)) - tables.alpha_of(i, U)
    return float(min(1.0, max(0.0, -np.expm1(diff))))


def exact_edge_posteriors_order_modular(tables: DpTables, beta: FamilyScoreTable) -> np.ndarray:
    """Matrix ``P[i, j] = p_<(j -> i | D)`` (row = child, column = parent).

    For child ``i`` the mass of orders giving it predecessor set ``U`` is
    ``L'(U) R'(V - U - {i})``; the edge mass restricts the parent-set sum to
    sets containing ``j``, obtained by a zeta transform over ``beta'_i``
    sliced to those sets.
    """
    n = tables.n
    full = tables.full
    out = np.zeros((n, n))
    if n == 1:
        return out
    logZ = tables.log_evidence_order
    cidx = np.arange(1 << (n - 1), dtype=np.int64)
    for i in range(n):
        U = expand(cidx, i)
        base = tables.L[U] + tables.R[full ^ U ^ (1 << i)]
        dense = beta.dense(i)
        for j in range(n):
            if j == i:
                continue
            jc = j if j < i else j - 1
            with_j = dense.reshape(-1, 2, 1 << jc)[:, 1, :].ravel()
            restricted = subset_logsumexp(with_j)
            b = base.reshape(-1, 2, 1 << jc)[:, 1, :].ravel()
            out[i, j] = np.exp(logsumexp(restricted + b) - logZ)
    return np.clip(out, 0.0, 1.0)
