"""Compiled inner loops for complex growth.

Every m-simplex of the complex gets an integer id when it is created.  A
k-simplex (a *label*) stores the ids of all its nonempty faces in
``faces[label, mask - 1]``, where bit ``p`` of ``mask`` selects the vertex in
sorted position ``p``.  Degrees live in ``fdeg[id]``.  All faces touched by an
attachment are faces of the chosen k-simplex or contain the new vertex, so no
hashing of vertex sets is required.

Counters are kept in a small int64 array ``ctr = [n, L, F, degree_sum]``.
Labels are 0-based here; the public API is 1-based.
"""

from __future__ import annotations

import numpy as np
from numba import njit

N_STEP, N_LABELS, N_FACES, K_DEGREE_SUM = 0, 1, 2, 3


@njit(cache=True, nogil=True)
def popcount(x):
    c = 0
    while x:
        x &= x - 1
        c += 1
    return c


@njit(cache=True, nogil=True)
def fen_add(fen, size, i, w):
    while i <= size:
        fen[i] += w
        i += i & -i


@njit(cache=True, nogil=True)
def fen_append(fen, i, w):
    # node i covers (i - lowbit(i), i]; its children are i-1, i-2, i-4, ...
    fen[i] = w
    lb = i & -i
    j = 1
    while j < lb:
        fen[i] += fen[i - j]
        j <<= 1


@njit(cache=True, nogil=True)
def fen_prefix(fen, i):
    s = 0.0
    while i > 0:
        s += fen[i]
        i -= i & -i
    return s


@njit(cache=True, nogil=True)
def fen_find(fen, size, target):
    """0-based index of the smallest prefix exceeding ``target``."""
    pos = 0
    mask = 1
    while mask * 2 <= size:
        mask *= 2
    while mask > 0:
        nxt = pos + mask
        if nxt <= size and fen[nxt] <= target:
            pos = nxt
            target -= fen[nxt]
        mask >>= 1
    if pos >= size:
        pos = size - 1
    return pos


@njit(cache=True, nogil=True)
def attach(c, k, delta, verts, birth, faces, fdeg, fen, ctr, maptab, newid):
    """Attach a new vertex to label ``c``; labels of new k-simplices follow
    the removal order sigma(k), sigma(k-1), ..., sigma(0)."""
    n = ctr[N_STEP] + 1
    L = ctr[N_LABELS]
    F = ctr[N_FACES]
    nmask = (1 << (k + 1)) - 1
    for M in range(1, nmask + 1):
        fdeg[faces[c, M - 1]] += 1
    ctr[K_DEGREE_SUM] += 1
    fen_add(fen, L, c + 1, 1.0)

    v = n + k + 2
    for P in range(nmask):
        newid[P] = F
        fdeg[F] = k + 1 - popcount(P)
        F += 1

    lowfull = (1 << k) - 1
    for i in range(k + 1):
        r = k - i
        lab = L
        q = 0
        for p in range(k + 1):
            if p != r:
                verts[lab, q] = verts[c, p]
                q += 1
        verts[lab, k] = v
        birth[lab] = n
        for Mp in range(1, nmask + 1):
            smask = maptab[r, Mp & lowfull]
            if Mp >> k:
                faces[lab, Mp - 1] = newid[smask]
            else:
                faces[lab, Mp - 1] = faces[c, smask - 1]
        L += 1
        fen_append(fen, L, 1.0 + delta)
        ctr[K_DEGREE_SUM] += 1

    ctr[N_STEP] = n
    ctr[N_LABELS] = L
    ctr[N_FACES] = F


@njit(cache=True, nogil=True)
def grow(uniforms, k, delta, verts, birth, faces, fdeg, fen, ctr, maptab,
         newid, chosen, check):
    """Run ``len(uniforms)`` proportional-selection steps.

    Returns -1, or the first step at which a counting identity failed when
    ``check`` is set.
    """
    for s in range(uniforms.shape[0]):
        n = ctr[N_STEP]
        total = (n + 1) * (k + 2) + delta * (1 + (n + 1) * (k + 1))
        c = fen_find(fen, ctr[N_LABELS], uniforms[s] * total)
        chosen[n + 1] = c
        attach(c, k, delta, verts, birth, faces, fdeg, fen, ctr, maptab, newid)
        if check:
            n1 = n + 1
            if ctr[N_LABELS] != 1 + (n1 + 1) * (k + 1):
                return n1
            if ctr[K_DEGREE_SUM] != (n1 + 1) * (k + 2):
                return n1
            tot = (n1 + 1) * (k + 2) + delta * (1 + (n1 + 1) * (k + 1))
            if abs(fen_prefix(fen, ctr[N_LABELS]) - tot) > 1e-9 * tot:
                return n1
    return -1


@njit(cache=True, nogil=True)
def heap_push(ht, hl, size, t, lab):
    i = size
    ht[i] = t
    hl[i] = lab
    while i > 0:
        p = (i - 1) >> 1
        if ht[p] <= ht[i]:
            break
        ht[p], ht[i] = ht[i], ht[p]
        hl[p], hl[i] = hl[i], hl[p]
        i = p
    return size + 1


@njit(cache=True, nogil=True)
def heap_pop(ht, hl, size):
    t = ht[0]
    lab = hl[0]
    size -= 1
    ht[0] = ht[size]
    hl[0] = hl[size]
    i = 0
    while True:
        l = 2 * i + 1
        if l >= size:
            break
        j = l
        if l + 1 < size and ht[l + 1] < ht[l]:
            j = l + 1
        if ht[i] <= ht[j]:
            break
        ht[j], ht[i] = ht[i], ht[j]
        hl[j], hl[i] = hl[i], hl[j]
        i = j
    return t, lab, size


@njit(cache=True, nogil=True)
def grow_clocks(expo, k, delta, verts, birth, faces, fdeg, fen, ctr, maptab,
                newid, chosen, values, ht, hl, hsize, jump_times):
    """Competing exponential clocks, one per live B.I. process.

    A process with value ``x`` jumps at rate ``x + delta``; ``values`` is
    updated here and never read from the degree ledger.  The heap holds the
    next scheduled jump of every live label.  ``expo`` must hold ``k + 2``
    standard exponentials per event.
    """
    nev = expo.shape[0] // (k + 2)
    e = 0
    size = hsize[0]
    for s in range(nev):
        t, c, size = heap_pop(ht, hl, size)
        n = ctr[N_STEP]
        chosen[n + 1] = c
        jump_times[n + 1] = t
        L0 = ctr[N_LABELS]
        attach(c, k, delta, verts, birth, faces, fdeg, fen, ctr, maptab, newid)
        values[c] += 1
        size = heap_push(ht, hl, size, t + expo[e] / (values[c] + delta), c)
        e += 1
        for lab in range(L0, ctr[N_LABELS]):
            values[lab] = 1
            size = heap_push(ht, hl, size, t + expo[e] / (1.0 + delta), lab)
            e += 1
    hsize[0] = size


@njit(cache=True, nogil=True)
def containment_dtilde(k, verts, values, L, label, out):
    """``out[m] = k - m + (sum of values over labels containing the m-suffix
    of ``label``) / (k - m + 1)``, by direct scan.  Returns False if a sum is
    not divisible."""
    ok = True
    for m in range(k + 1):
        tot = 0
        for lab in range(L):
            inside = True
            for q in range(k - m, k + 1):
                u = verts[label, q]
                found = False
                for p in range(k + 1):
                    if verts[lab, p] == u:
                        found = True
                        break
                if not found:
                    inside = False
                    break
            if inside:
                tot += values[lab]
        if tot % (k - m + 1) != 0:
            ok = False
        out[m] = k - m + tot // (k - m + 1)
    return ok


@njit(cache=True, nogil=True)
def label_vectors_batch(uniforms, k, delta, verts0, faces0, fdeg0, fen0,
                        maptab, suffix_masks, label, out):
    """Degree vector of ``label`` after ``uniforms.shape[1]`` steps, for each
    row of ``uniforms`` (one replicate per row)."""
    reps, steps = uniforms.shape
    nmask = (1 << (k + 1)) - 1
    L = 1 + (steps + 1) * (k + 1)
    F = (1 << (k + 2)) - 2 + steps * nmask
    verts = np.zeros((L, k + 1), np.int64)
    birth = np.zeros(L, np.int64)
    faces = np.zeros((L, nmask), np.int64)
    fdeg = np.zeros(F, np.int64)
    fen = np.zeros(L + 1)
    ctr = np.zeros(4, np.int64)
    newid = np.zeros(nmask + 1, np.int64)
    chosen = np.zeros(steps + 1, np.int64)
    L0 = verts0.shape[0]
    F0 = fdeg0.shape[0]
    for r in range(reps):
        verts[:L0] = verts0
        faces[:L0] = faces0
        fdeg[:F0] = fdeg0
        fen[:] = 0.0
        fen[:L0 + 1] = fen0
        birth[:] = 0
        ctr[N_STEP] = 0
        ctr[N_LABELS] = L0
        ctr[N_FACES] = F0
        ctr[K_DEGREE_SUM] = L0
        grow(uniforms[r], k, delta, verts, birth, faces, fdeg, fen, ctr,
             maptab, newid, chosen, False)
        for m in range(k + 1):
            out[r, m] = fdeg[faces[label, suffix_masks[m] - 1]]


@njit(cache=True, nogil=True)
def clock_dtilde_batch(expo, k, delta, verts0, faces0, fdeg0, fen0, maptab,
                       label, out):
    """Clock-driven replicates; row ``r`` of ``expo`` holds ``k + 2``
    exponentials for the initial clocks plus ``k + 2`` per event.  Writes the
    containment-sum vector of ``label`` to ``out[r]``.  Returns the number of
    replicates with a non-divisible containment sum."""
    reps = expo.shape[0]
    nev = expo.shape[1] // (k + 2) - 1
    nmask = (1 << (k + 1)) - 1
    L = 1 + (nev + 1) * (k + 1)
    F = (1 << (k + 2)) - 2 + nev * nmask
    verts = np.zeros((L, k + 1), np.int64)
    birth = np.zeros(L, np.int64)
    faces = np.zeros((L, nmask), np.int64)
    fdeg = np.zeros(F, np.int64)
    fen = np.zeros(L + 1)
    ctr = np.zeros(4, np.int64)
    newid = np.zeros(nmask + 1, np.int64)
    chosen = np.zeros(nev + 1, np.int64)
    values = np.zeros(L, np.int64)
    jt = np.zeros(nev + 1)
    ht = np.zeros(L)
    hl = np.zeros(L, np.int64)
    hsize = np.zeros(1, np.int64)
    L0 = verts0.shape[0]
    F0 = fdeg0.shape[0]
    bad = 0
    for r in range(reps):
        verts[:L0] = verts0
        faces[:L0] = faces0
        fdeg[:F0] = fdeg0
        fen[:] = 0.0
        fen[:L0 + 1] = fen0
        ctr[N_STEP] = 0
        ctr[N_LABELS] = L0
        ctr[N_FACES] = F0
        ctr[K_DEGREE_SUM] = L0
        size = 0
        for lab in range(L0):
            values[lab] = 1
            size = heap_push(ht, hl, size, expo[r, lab] / (1.0 + delta), lab)
        hsize[0] = size
        grow_clocks(expo[r, L0:], k, delta, verts, birth, faces, fdeg, fen,
                    ctr, maptab, newid, chosen, values, ht, hl, hsize, jt)
        if not containment_dtilde(k, verts, values, L, label, out[r]):
            bad += 1
    return bad
