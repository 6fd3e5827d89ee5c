"""Subset encodings and log-space helpers shared by the DP, sampler and oracle.

A set of variables is an ``int`` whose bit ``j`` is set iff variable ``j`` is a
member. Tables indexed by subsets of ``V - {i}`` use the *compressed* encoding
with bit ``i`` squeezed out, so they hold ``2**(n-1)`` entries.
"""
from __future__ import annotations

from functools import lru_cache
from math import comb

import numpy as np
from scipy.special import logsumexp as _scipy_lse

# Spread of finite log-values that can be moved to linear space after a
# max-shift without losing the smallest term to underflow.
LINEAR_RANGE = 600.0


def members(mask: int) -> list[int]:
    out = []
    j = 0
    while mask:
        if mask & 1:
            out.append(j)
        mask >>= 1
        j += 1
    return out


def to_mask(items) -> int:
    mask = 0
    for j in items:
        mask |= 1 << int(j)
    return mask


def compress(mask, i: int):
    """Drop bit ``i`` from ``mask`` (works on ints and integer arrays)."""
    low = (1 << i) - 1
    return (mask & low) | ((mask >> (i + 1)) << i)


def expand(cmask, i: int):
    """Inverse of :func:`compress`; the result never contains ``i``."""
    low = (1 << i) - 1
    return (cmask & low) | ((cmask >> i) << (i + 1))


@lru_cache(maxsize=None)
def popcounts(nbits: int) -> np.ndarray:
    idx = np.arange(1 << nbits, dtype=np.int64)
    pc = np.zeros(1 << nbits, dtype=np.int8)
    for b in range(nbits):
        pc += ((idx >> b) & 1).astype(np.int8)
    pc.flags.writeable = False
    return pc


@lru_cache(maxsize=None)
def masks_by_size(nbits: int) -> tuple[np.ndarray, ...]:
    """Subset encodings of ``nbits`` bits bucketed by cardinality, ascending."""
    pc = popcounts(nbits)
    order = np.argsort(pc, kind="stable")
    bounds = np.searchsorted(pc[order], np.arange(nbits + 2))
    buckets = []
    for s in range(nbits + 1):
        b = order[bounds[s]:bounds[s + 1]].astype(np.int64)
        b.flags.writeable = False
        buckets.append(b)
    return tuple(buckets)


def canonical_parent_sets(n: int, i: int, k: int) -> np.ndarray:
    """All ``Pa`` in ``V - {i}`` with ``|Pa| <= k`` ordered by (size, encoding)."""
    buckets = masks_by_size(n - 1) if n > 1 else (np.zeros(1, dtype=np.int64),)
    parts = [expand(buckets[s], i) for s in range(min(k, n - 1) + 1)]
    return np.concatenate(parts).astype(np.int64)


def n_parent_sets(n: int, k: int) -> int:
    return sum(comb(n - 1, j) for j in range(min(k, n - 1) + 1))


def logsumexp(a, axis=None):
    """``scipy.special.logsumexp`` that returns -inf quietly for empty mass."""
    with np.errstate(divide="ignore", invalid="ignore"):
        return _scipy_lse(a, axis=axis)


def subset_logsumexp(logv: np.ndarray) -> np.ndarray:
    """Zeta transform in log space: ``out[S] = log sum_{T subset S} exp(logv[T])``.

    ``logv`` has length ``2**d``. The additions run in linear space after one
    max-shift when the finite values span less than ``LINEAR_RANGE`` nats,
    and fall back to pairwise ``logaddexp`` otherwise.
    """
    logv = np.asarray(logv, dtype=float)
    size = logv.size
    d = size.bit_length() - 1
    if size != 1 << d:
        raise ValueError("length must be a power of two")
    finite = np.isfinite(logv)
    if not finite.any():
        return np.full(size, -np.inf)
    hi = logv[finite].max()
    lo = logv[finite].min()
    if hi - lo < LINEAR_RANGE:
        a = np.exp(logv - hi)
        for j in range(d):
            v = a.reshape(-1, 2, 1 << j)
            v[:, 1, :] += v[:, 0, :]
        with np.errstate(divide="ignore"):
            return np.log(a) + hi
    a = logv.copy()
    for j in range(d):
        v = a.reshape(-1, 2, 1 << j)
        v[:, 1, :] = np.logaddexp(v[:, 1, :], v[:, 0, :])
    return a
