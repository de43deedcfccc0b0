"""Slow, independent reference implementations used only by the tests.

The complex is kept as a set of frozensets of every dimension and degrees
are recounted from scratch; probabilities are exact fractions.
"""

from __future__ import annotations

from fractions import Fraction
from itertools import combinations, product

import numpy as np


class SetComplex:
    """Preferential attachment on an explicit set family."""

    def __init__(self, k: int, delta: float):
        self.k = k
        self.delta = delta
        top = tuple(range(1, k + 3))
        self.simplices: set[frozenset] = set()
        self._add_closure(top)
        # label j omits vertex k + 3 - j
        self.labels = [tuple(v for v in top if v != k + 3 - j) for j in range(1, k + 3)]
        self.next_vertex = k + 3
        self.chosen: list[int] = []

    def _add_closure(self, verts) -> None:
        for r in range(1, len(verts) + 1):
            for c in combinations(verts, r):
                self.simplices.add(frozenset(c))

    def degree(self, verts) -> int:
        """Number of simplices with one more vertex that contain ``verts``."""
        s = frozenset(verts)
        return sum(1 for t in self.simplices if len(t) == len(s) + 1 and s < t)

    def weights(self) -> list[float]:
        return [self.degree(lab) + self.delta for lab in self.labels]

    def total_weight(self) -> float:
        n = len(self.chosen)
        k = self.k
        return (n + 1) * (k + 2) + self.delta * (1 + (n + 1) * (k + 1))

    def step_with_uniform(self, u: float) -> int:
        cum = np.cumsum(self.weights())
        j = int(np.searchsorted(cum, u * self.total_weight(), side="right"))
        j = min(j, len(self.labels) - 1)
        self.attach(j + 1)
        return j + 1

    def attach(self, label: int) -> None:
        sigma = self.labels[label - 1]
        v = self.next_vertex
        self.next_vertex += 1
        self._add_closure(sigma + (v,))
        for i in range(self.k + 1):
            drop = sigma[self.k - i]
            self.labels.append(tuple(x for x in sigma if x != drop) + (v,))
        self.chosen.append(label)

    def degree_vector(self, label: int) -> tuple[int, ...]:
        sigma = self.labels[label - 1]
        return tuple(self.degree(sigma[self.k - m:]) for m in range(self.k + 1))

    def all_degree_vectors(self) -> np.ndarray:
        return np.array([self.degree_vector(j) for j in range(1, len(self.labels) + 1)])


def exact_joint_pmf(k: int, delta: Fraction, cap: int) -> dict[tuple, Fraction]:
    """Joint limiting pmf by the slice recursion in exact arithmetic."""
    delta = Fraction(delta)
    b = [k - m + 1 + delta * (k - m) for m in range(k + 1)]
    tau = k + 2 + delta * (k + 1)
    minimal = tuple(k - m + 1 for m in range(k + 1))
    p: dict[tuple, Fraction] = {}

    def get(v):
        return p.get(v, Fraction(0))

    def valid(v):
        return all(v[m] >= k - m + 1 for m in range(k + 1)) and all(v[m] > v[m + 1] for m in range(k))

    for i0 in range(k + 1, cap + 1):
        for rest in product(range(1, i0), repeat=k):
            v = (i0,) + rest
            if not valid(v):
                continue
            acc = (v[k] - 1 + delta) / tau * get(tuple(x - 1 for x in v))
            for m in range(k):
                c = (v[m] - 1 - k + m) * b[m] - (v[m + 1] - k + m + 1) * b[m + 1]
                w = tuple(x - 1 if j <= m else x for j, x in enumerate(v))
                acc += c / tau * get(w)
            if v == minimal:
                acc += 1
            p[v] = acc * tau / (tau + (v[0] - k) * b[0] + delta)
    return p


def one_step_outcomes(k: int) -> dict[int, dict[tuple, int]]:
    """Degree-vector counts after one step, for each choice of initial label."""
    out = {}
    for label in range(1, k + 3):
        c = SetComplex(k, 0.0)
        c.attach(label)
        vecs, counts = np.unique(c.all_degree_vectors(), axis=0, return_counts=True)
        out[label] = {tuple(int(x) for x in v): int(n) for v, n in zip(vecs, counts)}
    return out
