"""Complete discrete datasets and the family counts the scores consume."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np


class DataError(ValueError):
    """Raised for malformed or unusable input data."""


@dataclass(frozen=True)
class Dataset:
    """Integer-coded records over ``n`` discrete variables.

    Attributes
    ----------
    data : ndarray of shape (m, n)
        Category indices; column ``i`` takes values in ``[0, arity[i])``.
    arity : tuple of int
        Category count per variable, each at least 2.
    names : tuple of str
        Variable labels.
    categories : tuple of tuple of str, optional
        Original labels per column in first-appearance order, so that
        category ``c`` of column ``i`` is ``categories[i][c]``.
    """

    data: np.ndarray
    arity: tuple[int, ...]
    names: tuple[str, ...]
    categories: tuple[tuple[str, ...], ...] | None = field(default=None, compare=False)

    def __post_init__(self):
        data = np.ascontiguousarray(self.data, dtype=np.int64)
        if data.ndim != 2:
            raise DataError("data must be a 2-D array")
        m, n = data.shape
        if n < 1:
            raise DataError("dataset needs at least one variable")
        if len(self.arity) != n or len(self.names) != n:
            raise DataError("arity and names must have one entry per column")
        if any(r < 2 for r in self.arity):
            bad = [self.names[i] for i, r in enumerate(self.arity) if r < 2]
            raise DataError(f"variables with fewer than 2 categories: {bad}")
        if m and ((data < 0).any() or (data >= np.asarray(self.arity)).any()):
            row, col = np.argwhere((data < 0) | (data >= np.asarray(self.arity)))[0]
            raise DataError(f"row {row}, column {self.names[col]!r}: category index out of range")
        data.flags.writeable = False
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "arity", tuple(int(r) for r in self.arity))
        object.__setattr__(self, "names", tuple(str(s) for s in self.names))

    @property
    def n(self) -> int:
        return self.data.shape[1]

    @property
    def m(self) -> int:
        return self.data.shape[0]

    def index_of(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise KeyError(f"unknown variable {name!r}") from None


def from_array(X, names: Sequence[str] | None = None, arity: Sequence[int] | None = None) -> Dataset:
    """Wrap an integer-coded array. Arity defaults to ``max + 1`` per column."""
    X = np.asarray(X)
    if X.ndim != 2:
        raise DataError("expected a 2-D array of category indices")
    if not np.issubdtype(X.dtype, np.integer):
        if not np.all(np.equal(np.mod(X, 1), 0)):
            raise DataError("category indices must be integers")
        X = X.astype(np.int64)
    n = X.shape[1]
    if names is None:
        names = [f"X{i}" for i in range(n)]
    if arity is None:
        arity = [max(2, int(X[:, i].max()) + 1) if X.shape[0] else 2 for i in range(n)]
    return Dataset(X, tuple(arity), tuple(names))


def load_csv(path, delimiter: str = ",", header: bool = True) -> Dataset:
    """Read a discrete CSV file, mapping labels to indices by first appearance.

    Rows made only of whitespace are skipped. Empty cells, ragged rows and
    single-category columns raise :class:`DataError` naming the location.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh, delimiter=delimiter))

    # (line number, cells) with blank lines dropped
    lines = [(lineno, r) for lineno, r in enumerate(rows, start=1)
             if not all(not c.strip() for c in r)]
    if not lines:
        raise DataError(f"{path}: no data")
    if header:
        _, names = lines[0]
        names = [c.strip() for c in names]
        lines = lines[1:]
    else:
        names = [f"X{i}" for i in range(len(lines[0][1]))]
    n = len(names)
    if n == 0:
        raise DataError(f"{path}: no columns")
    if not lines:
        raise DataError(f"{path}: header but no records")

    codes: list[dict[str, int]] = [{} for _ in range(n)]
    data = np.empty((len(lines), n), dtype=np.int64)
    for r, (lineno, cells) in enumerate(lines):
        if len(cells) != n:
            raise DataError(f"{path}: line {lineno} has {len(cells)} cells, expected {n}")
        for c, cell in enumerate(cells):
            label = cell.strip()
            if not label:
                raise DataError(f"{path}: line {lineno}, column {names[c]!r}: missing value")
            data[r, c] = codes[c].setdefault(label, len(codes[c]))

    arity = [len(cm) for cm in codes]
    for c, r in enumerate(arity):
        if r < 2:
            raise DataError(f"{path}: column {names[c]!r} has a single category")
    categories = tuple(tuple(cm) for cm in codes)
    return Dataset(data, tuple(arity), tuple(names), categories)


@dataclass(frozen=True)
class FamilyCounts:
    """Sparse contingency table ``N_ijk`` for one family.

    Only parent configurations that occur in the data are stored. ``configs``
    are mixed-radix indices (first parent most significant) in ascending order
    and ``counts[c, k]`` is the number of rows with that configuration and
    child state ``k``.
    """

    configs: np.ndarray
    counts: np.ndarray
    n_configs: int

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def family_counts(ds: Dataset, i: int, pa: Iterable[int]) -> FamilyCounts:
    pa = sorted(int(j) for j in pa)
    if i in pa:
        raise ValueError(f"node {i} cannot be its own parent")
    r = ds.arity[i]
    q = 1
    for j in pa:
        q *= ds.arity[j]
    if ds.m == 0:
        return FamilyCounts(np.zeros(0, dtype=np.int64), np.zeros((0, r), dtype=np.int64), q)
    if q * r < 2 ** 62:
        cfg = np.zeros(ds.m, dtype=np.int64)
        for j in pa:
            cfg = cfg * ds.arity[j] + ds.data[:, j]
        keys, counts = np.unique(cfg * r + ds.data[:, i], return_counts=True)
        configs, inverse = np.unique(keys // r, return_inverse=True)
        table = np.zeros((configs.size, r), dtype=np.int64)
        table[inverse, keys % r] = counts
        return FamilyCounts(configs, table, q)
    # radix overflow: group on raw parent columns instead
    rows, inverse = np.unique(ds.data[:, pa], axis=0, return_inverse=True)
    table = np.zeros((rows.shape[0], r), dtype=np.int64)
    np.add.at(table, (inverse.ravel(), ds.data[:, i]), 1)
    return FamilyCounts(np.arange(rows.shape[0]), table, q)


def synthetic_dataset(n: int, m: int, seed: int = 0, arity: int = 2,
                      edge_prob: float = 0.5, max_indegree: int = 3,
                      concentration: float = 0.5) -> tuple[Dataset, tuple[int, ...]]:
    """Forward-sample ``m`` records from a random Bayesian network.

    Returns the dataset and the generating parent vector (bit masks). CPT rows
    are Dirichlet(``concentration``) draws so dependencies are usually strong.
    """
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    parents = [0] * n
    for pos, v in enumerate(perm):
        cands = [int(u) for u in perm[:pos] if rng.random() < edge_prob]
        if len(cands) > max_indegree:
            cands = [int(u) for u in rng.choice(cands, size=max_indegree, replace=False)]
        for u in cands:
            parents[v] |= 1 << u
    data = np.zeros((m, n), dtype=np.int64)
    for v in perm:
        pa = [j for j in range(n) if parents[v] >> j & 1]
        q = arity ** len(pa)
        cpt = rng.dirichlet([concentration] * arity, size=q)
        cfg = np.zeros(m, dtype=np.int64)
        for j in pa:
            cfg = cfg * arity + data[:, j]
        cum = np.cumsum(cpt[cfg], axis=1)
        u = rng.random(m)[:, None]
        data[:, v] = np.minimum((cum < u).sum(axis=1), arity - 1)
    return from_array(data, arity=[arity] * n), tuple(parents)
