"""Growth of the preferential-attachment simplicial complex.

At each step a k-simplex is chosen with probability proportional to its
k-degree plus ``delta``, a new vertex is attached to it, and every nonempty
face of the chosen simplex gains one in degree.  The state is held in flat
arrays driven by compiled kernels; see ``_kernels`` for the layout.

Labels in this module are 1-based, in creation order.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from itertools import combinations
from pathlib import Path

import numpy as np

from . import _kernels as K
from ._textio import text_output
from .params import ModelParams
from .tables import PmfTable

SCHEMA = "simplex-pa/1"


class InvariantError(RuntimeError):
    """A counting identity failed during growth."""


def face_mask_table(k: int) -> np.ndarray:
    """``maptab[r, low]``: mask over the parent's positions for a mask over
    the first ``k`` positions of the child obtained by deleting position ``r``."""
    tab = np.zeros((k + 1, 1 << k), dtype=np.int64)
    for r in range(k + 1):
        for low in range(1 << k):
            out = 0
            for q in range(k):
                if low >> q & 1:
                    out |= 1 << (q if q < r else q + 1)
            tab[r, low] = out
    return tab


def suffix_masks(k: int) -> np.ndarray:
    """Mask of the youngest ``(m + 1)`` vertices, for ``m = 0..k``."""
    return np.array([((1 << (m + 1)) - 1) << (k - m) for m in range(k + 1)], dtype=np.int64)


@dataclass(frozen=True)
class _Template:
    verts: np.ndarray
    faces: np.ndarray
    fdeg: np.ndarray
    fen: np.ndarray
    maptab: np.ndarray
    suffix: np.ndarray


_TEMPLATES: dict[tuple[int, float], _Template] = {}


def _template(params: ModelParams) -> _Template:
    key = (params.k, params.delta)
    t = _TEMPLATES.get(key)
    if t is not None:
        return t
    k = params.k
    base = list(range(1, k + 3))
    # label j (1-based) omits vertex k + 3 - j
    verts = np.array([[v for v in base if v != k + 3 - j] for j in range(1, k + 3)], dtype=np.int64)
    ids: dict[tuple[int, ...], int] = {}
    fdeg = []
    for size in range(1, k + 2):
        for f in combinations(base, size):
            ids[f] = len(fdeg)
            fdeg.append(k + 2 - size)
    nmask = (1 << (k + 1)) - 1
    faces = np.zeros((k + 2, nmask), dtype=np.int64)
    for lab in range(k + 2):
        for M in range(1, nmask + 1):
            f = tuple(int(verts[lab, p]) for p in range(k + 1) if M >> p & 1)
            faces[lab, M - 1] = ids[f]
    fen = np.zeros(k + 3)
    for i in range(1, k + 3):
        K.fen_append(fen, i, 1.0 + params.delta)
    t = _Template(verts, faces, np.array(fdeg, dtype=np.int64), fen,
                  face_mask_table(k), suffix_masks(k))
    _TEMPLATES[key] = t
    return t


class GrowthState:
    """Mutable complex.  ``step`` and ``run`` update it in place."""

    def __init__(self, params: ModelParams, capacity: int = 64):
        self.params = params
        t = _template(params)
        k = params.k
        nmask = (1 << (k + 1)) - 1
        self._maptab = t.maptab
        self._suffix = t.suffix
        self._newid = np.zeros(nmask + 1, dtype=np.int64)
        self._ctr = np.array([0, k + 2, t.fdeg.size, k + 2], dtype=np.int64)
        self._alloc(max(int(capacity), 1))
        L0 = k + 2
        self._verts[:L0] = t.verts
        self._faces[:L0] = t.faces
        self._fdeg[: t.fdeg.size] = t.fdeg
        self._fen[: L0 + 1] = t.fen

    def _sizes(self, steps: int) -> tuple[int, int]:
        k = self.params.k
        return 1 + (steps + 1) * (k + 1), (1 << (k + 2)) - 2 + steps * ((1 << (k + 1)) - 1)

    def _alloc(self, steps: int) -> None:
        k = self.params.k
        L, F = self._sizes(steps)
        self._cap = steps
        self._verts = np.zeros((L, k + 1), dtype=np.int64)
        self._birth = np.zeros(L, dtype=np.int64)
        self._faces = np.zeros((L, (1 << (k + 1)) - 1), dtype=np.int64)
        self._fdeg = np.zeros(F, dtype=np.int64)
        self._fen = np.zeros(L + 1)
        self._chosen = np.full(steps + 1, -1, dtype=np.int64)

    def reserve(self, steps: int) -> None:
        """Make room for a total of ``steps`` steps."""
        if steps <= self._cap:
            return
        new = max(steps, 2 * self._cap)
        L, F = self.n_labels, self.n_faces
        old = (self._verts, self._birth, self._faces, self._fdeg, self._chosen)
        fen = self._fen
        self._alloc(new)
        self._verts[:L] = old[0][:L]
        self._birth[:L] = old[1][:L]
        self._faces[:L] = old[2][:L]
        self._fdeg[:F] = old[3][:F]
        self._chosen[: self.step + 1] = old[4][: self.step + 1]
        # Fenwick nodes depend only on their own range, so a prefix copy is valid
        self._fen[: L + 1] = fen[: L + 1]

    @property
    def step(self) -> int:
        return int(self._ctr[K.N_STEP])

    @property
    def n_labels(self) -> int:
        return int(self._ctr[K.N_LABELS])

    @property
    def n_faces(self) -> int:
        return int(self._ctr[K.N_FACES])

    @property
    def k_degree_sum(self) -> int:
        return int(self._ctr[K.K_DEGREE_SUM])

    def total_weight(self) -> float:
        """Current total selection weight read from the prefix-sum index."""
        return float(K.fen_prefix(self._fen, self.n_labels))

    def selection_probabilities(self) -> np.ndarray:
        """Probability of each label (index ``label - 1``) being chosen next."""
        w = self.k_degrees() + self.params.delta
        return w / self.params.total_weight(self.step)

    def k_degrees(self) -> np.ndarray:
        L = self.n_labels
        return self._fdeg[self._faces[:L, -1]].copy()

    def vertices(self, label: int) -> tuple[int, ...]:
        self._check_label(label)
        return tuple(int(v) for v in self._verts[label - 1])

    def birth_step(self, label: int) -> int:
        self._check_label(label)
        return int(self._birth[label - 1])

    def chosen_labels(self) -> np.ndarray:
        """1-based label chosen at steps ``1..n``."""
        return self._chosen[1 : self.step + 1] + 1

    def labels_born_at(self, n: int) -> range:
        k = self.params.k
        if n == 0:
            return range(1, k + 3)
        start = 1 + n * (k + 1) + 1
        return range(start, start + k + 1)

    def _check_label(self, label: int) -> None:
        if not 1 <= int(label) <= self.n_labels:
            raise KeyError(f"label {label} is not registered (have 1..{self.n_labels})")

    def all_degree_vectors(self) -> np.ndarray:
        L = self.n_labels
        return self._fdeg[self._faces[:L][:, self._suffix - 1]]

    def simplex_degree(self, vertices) -> int:
        """Degree of the simplex with the given vertex set (1 to k+1 vertices)."""
        want = sorted(int(v) for v in vertices)
        k = self.params.k
        if not 1 <= len(want) <= k + 1 or len(set(want)) != len(want):
            raise KeyError(f"not a simplex of dimension <= {k}: {vertices!r}")
        V = self._verts[: self.n_labels]
        hit = np.ones(V.shape[0], dtype=bool)
        for v in want:
            hit &= (V == v).any(axis=1)
        rows = np.flatnonzero(hit)
        if rows.size == 0:
            raise KeyError(f"simplex {tuple(want)} is not in the complex")
        lab = rows[0]
        mask = 0
        for p in range(k + 1):
            if V[lab, p] in want:
                mask |= 1 << p
        return int(self._fdeg[self._faces[lab, mask - 1]])

    def containing_labels(self, vertices) -> np.ndarray:
        """1-based labels of the k-simplices containing ``vertices``."""
        V = self._verts[: self.n_labels]
        hit = np.ones(V.shape[0], dtype=bool)
        for v in vertices:
            hit &= (V == int(v)).any(axis=1)
        return np.flatnonzero(hit) + 1

    def copy(self) -> "GrowthState":
        other = GrowthState.__new__(GrowthState)
        other.__dict__.update({a: (v.copy() if isinstance(v, np.ndarray) else v)
                               for a, v in self.__dict__.items()})
        return other


def new_complex(params: ModelParams) -> GrowthState:
    """Initial complex: one (k+1)-simplex on vertices ``1..k+2``."""
    return GrowthState(params)


def _advance(state: GrowthState, uniforms: np.ndarray, check: bool) -> GrowthState:
    uniforms = np.ascontiguousarray(uniforms, dtype=np.float64)
    state.reserve(state.step + uniforms.size)
    p = state.params
    bad = K.grow(uniforms, p.k, p.delta, state._verts, state._birth, state._faces,
                 state._fdeg, state._fen, state._ctr, state._maptab, state._newid,
                 state._chosen, check)
    if bad >= 0:
        raise InvariantError(f"counting identity violated at step {bad}")
    return state


def step(state: GrowthState, rng: np.random.Generator) -> GrowthState:
    """One attachment step (in place)."""
    return _advance(state, rng.random(1), True)


def run(state: GrowthState, steps: int, rng: np.random.Generator,
        check: bool = True) -> GrowthState:
    """``steps`` attachment steps (in place).  The stream consumption matches
    ``steps`` successive calls to ``step``."""
    steps = int(steps)
    if steps < 0:
        raise ValueError("steps must be nonnegative")
    return _advance(state, rng.random(steps), check)


def run_with_uniforms(state: GrowthState, uniforms, check: bool = True) -> GrowthState:
    """Drive growth by explicit selection uniforms in [0, 1)."""
    return _advance(state, np.asarray(uniforms), check)


def degree_vector(state: GrowthState, label: int) -> tuple[int, ...]:
    """Degrees of the youngest m-suffix of ``label`` for m = 0..k."""
    state._check_label(label)
    row = state._fdeg[state._faces[label - 1, state._suffix - 1]]
    return tuple(int(x) for x in row)


def degree_counts(state: GrowthState) -> PmfTable:
    """Number of k-simplices with each degree vector."""
    vecs, counts = np.unique(state.all_degree_vectors(), axis=0, return_counts=True)
    return PmfTable(state.params, vecs, counts.astype(np.float64))


def empirical_pmf(state: GrowthState) -> PmfTable:
    return degree_counts(state).normalized()


def invariant_report(state: GrowthState) -> dict:
    p = state.params
    n = state.step
    kdeg = state.k_degrees()
    vecs = state.all_degree_vectors()
    return {
        "n": n,
        "labels": state.n_labels,
        "labels_expected": p.n_simplices(n),
        "k_degree_sum": int(kdeg.sum()),
        "k_degree_sum_expected": p.degree_sum(n),
        "total_weight": state.total_weight(),
        "total_weight_expected": p.total_weight(n),
        "min_degree": int(vecs.min()),
        "ok": bool(state.n_labels == p.n_simplices(n) and int(kdeg.sum()) == p.degree_sum(n)
                   and abs(state.total_weight() - p.total_weight(n)) <= 1e-9 * p.total_weight(n)),
    }


def snapshot(state: GrowthState) -> dict:
    t = degree_counts(state).sorted()
    return {
        "schema": SCHEMA,
        "n": state.step,
        "k": state.params.k,
        "delta": state.params.delta,
        "counts": [{"vector": v, "count": int(c)} for v, c in zip(t.vectors.tolist(), t.values)],
    }


def write_snapshot(state: GrowthState, path) -> None:
    Path(path).write_text(json.dumps(snapshot(state), indent=1) + "\n")


def write_trajectory_csv(state: GrowthState, path) -> None:
    with text_output(path) as fh:
        w = csv.writer(fh)
        w.writerow(["step", "chosen_label", "new_labels"])
        for n, c in enumerate(state.chosen_labels().tolist(), start=1):
            w.writerow([n, c, " ".join(str(x) for x in state.labels_born_at(n))])


def label_vector_samples(params: ModelParams, n: int, label: int, uniforms: np.ndarray) -> np.ndarray:
    """Degree vector of ``label`` after ``n`` steps for each row of
    ``uniforms`` (shape ``(replicates, n)``)."""
    if not 1 <= label <= params.n_simplices(n):
        raise KeyError(f"label {label} does not exist at step {n}")
    uniforms = np.ascontiguousarray(uniforms, dtype=np.float64)
    if n == 0:
        return np.tile(np.array(params.minimal_vector(), dtype=np.int64), (uniforms.shape[0], 1))
    uniforms = uniforms.reshape(-1, n)
    t = _template(params)
    out = np.zeros((uniforms.shape[0], params.k + 1), dtype=np.int64)
    K.label_vectors_batch(uniforms, params.k, params.delta, t.verts, t.faces, t.fdeg,
                          t.fen, t.maptab, t.suffix, label - 1, out)
    return out
