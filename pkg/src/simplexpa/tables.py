"""Sparse tables over degree vectors."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._textio import text_output
from .params import ModelParams


def is_valid_vector(params: ModelParams, vec) -> bool:
    """Strictly decreasing, with ``vec[m] >= k - m + 1``."""
    v = tuple(int(x) for x in vec)
    k = params.k
    if len(v) != k + 1:
        return False
    if any(v[m] < k - m + 1 for m in range(k + 1)):
        return False
    return all(v[m] > v[m + 1] for m in range(k))


@dataclass
class PmfTable:
    """Values indexed by degree vectors, stored as parallel arrays.

    ``vectors`` has shape ``(N, k + 1)``; rows are unique.  Used both for raw
    counts (integer-valued) and for probabilities.
    """

    params: ModelParams
    vectors: np.ndarray
    values: np.ndarray
    cap: int | None = None
    _index: dict = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        self.vectors = np.asarray(self.vectors, dtype=np.int64).reshape(-1, self.params.k + 1)
        self.values = np.asarray(self.values, dtype=np.float64).reshape(-1)
        if self.vectors.shape[0] != self.values.shape[0]:
            raise ValueError("vectors and values differ in length")

    def __len__(self):
        return self.values.shape[0]

    def _lookup(self) -> dict:
        if self._index is None:
            self._index = {tuple(r): j for j, r in enumerate(self.vectors.tolist())}
        return self._index

    def get(self, vec, default: float = 0.0) -> float:
        j = self._lookup().get(tuple(int(x) for x in vec))
        return default if j is None else float(self.values[j])

    def __getitem__(self, vec) -> float:
        return self.get(vec)

    def total(self) -> float:
        return float(self.values.sum())

    def as_dict(self) -> dict:
        return {tuple(r): float(p) for r, p in zip(self.vectors.tolist(), self.values)}

    def normalized(self) -> "PmfTable":
        return PmfTable(self.params, self.vectors.copy(), self.values / self.total(), self.cap)

    def restrict(self, max_i0: int) -> "PmfTable":
        keep = self.vectors[:, 0] <= max_i0
        return PmfTable(self.params, self.vectors[keep], self.values[keep], max_i0)

    def marginal(self, axis: int) -> dict[int, float]:
        """Sum out every coordinate except ``axis``."""
        keys, inv = np.unique(self.vectors[:, axis], return_inverse=True)
        sums = np.bincount(inv, weights=self.values, minlength=keys.size)
        return {int(a): float(b) for a, b in zip(keys, sums)}

    def sorted(self) -> "PmfTable":
        order = np.lexsort(self.vectors.T[::-1])
        return PmfTable(self.params, self.vectors[order], self.values[order], self.cap)

    def to_csv(self, path, value_name: str = "probability", integer: bool = False) -> None:
        k = self.params.k
        t = self.sorted()
        fmt = (lambda v: str(int(v))) if integer else repr
        with text_output(path) as fh:
            w = csv.writer(fh)
            w.writerow([f"i_{m}" for m in range(k + 1)] + [value_name])
            for r, p in zip(t.vectors.tolist(), t.values.tolist()):
                w.writerow(r + [fmt(p)])

    @classmethod
    def from_csv(cls, path, params: ModelParams) -> "PmfTable":
        k = params.k
        with open(Path(path), newline="") as fh:
            rows = list(csv.reader(fh))
        header, body = rows[0], rows[1:]
        expected = [f"i_{m}" for m in range(k + 1)]
        if header[: k + 1] != expected or len(header) != k + 2:
            raise ValueError(f"unexpected header {header!r} for k={k}")
        vecs = np.array([[int(x) for x in r[: k + 1]] for r in body], dtype=np.int64)
        vals = np.array([float(r[k + 1]) for r in body])
        return cls(params, vecs.reshape(-1, k + 1), vals)


def table_from_samples(params: ModelParams, samples: np.ndarray) -> PmfTable:
    """Counts of each distinct row of an integer sample matrix."""
    samples = np.asarray(samples, dtype=np.int64).reshape(-1, params.k + 1)
    vecs, counts = np.unique(samples, axis=0, return_counts=True)
    return PmfTable(params, vecs, counts.astype(np.float64))
