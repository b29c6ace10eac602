# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: non-flat partition enumeration and k-hop path counting.

Semantics are identical to ``_fallback.py``.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp
from libc.stdint cimport uint64_t, int64_t, int8_t

cnp.import_array()

cdef enum:
    MAX_CELLS = 64

cdef uint64_t GOLDEN = 0x9E3779B97F4A7C15ULL


cdef inline uint64_t _mix64(uint64_t z) nogil:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef inline double _pair_uniform(uint64_t key, uint64_t i, uint64_t j) nogil:
    cdef uint64_t t
    if i > j:
        t = i
        i = j
        j = t
    cdef uint64_t z = _mix64(key ^ _mix64(((i << 32) | j) + GOLDEN))
    return <double>(z >> 11) * (1.0 / 9007199254740992.0)


def pair_uniform(uint64_t key, uint64_t i, uint64_t j):
    return _pair_uniform(key, i, j)


cdef class NonflatBatches:
    """Iterator over non-flat restricted-growth labelings, in batches.

    Each ``__next__`` returns an ``int8`` array of shape ``(<=batch, n*r)``
    holding 0-based block labels in lexicographic order.
    """
    cdef int n, r, size, pos, batch
    cdef bint done
    cdef int labels[MAX_CELLS]
    cdef int nblocks[MAX_CELLS + 1]
    cdef uint64_t masks[MAX_CELLS]

    def __cinit__(self, int n, int r, int batch=4096):
        if n < 1 or r < 1 or n * r > MAX_CELLS:
            raise ValueError("kernel supports 1 <= n*r <= %d" % MAX_CELLS)
        self.n = n
        self.r = r
        self.size = n * r
        self.batch = batch
        self.pos = 0
        self.done = False
        self.labels[0] = -1
        self.nblocks[0] = 0
        cdef int b
        for b in range(MAX_CELLS):
            self.masks[b] = 0

    def __iter__(self):
        return self

    cdef bint _advance(self) nogil:
        # Move to the next complete labeling; returns False when exhausted.
        cdef int pos = self.pos
        cdef int c, lim
        cdef uint64_t bit
        while pos >= 0:
            bit = (<uint64_t>1) << (pos // self.r)
            c = self.labels[pos]
            if c >= 0:
                self.masks[c] &= ~bit
            lim = self.nblocks[pos]
            c += 1
            while c < lim and (self.masks[c] & bit):
                c += 1
            if c > lim:
                self.labels[pos] = -1
                pos -= 1
                continue
            self.labels[pos] = c
            self.masks[c] |= bit
            self.nblocks[pos + 1] = lim + 1 if c == lim else lim
            if pos == self.size - 1:
                self.pos = pos
                return True
            pos += 1
            self.labels[pos] = -1
        self.pos = pos
        return False

    def __next__(self):
        if self.done:
            raise StopIteration
        cdef cnp.ndarray[int8_t, ndim=2] out = np.empty((self.batch, self.size), dtype=np.int8)
        cdef int filled = 0, i
        while filled < self.batch:
            if not self._advance():
                self.done = True
                break
            for i in range(self.size):
                out[filled, i] = <int8_t>self.labels[i]
            filled += 1
        if filled == 0:
            raise StopIteration
        return out[:filled]


def nonflat_count(int n, int r):
    cdef NonflatBatches it = NonflatBatches(n, r, 1)
    cdef int64_t total = 0
    while it._advance():
        total += 1
    return total


cdef int8_t _edge(int8_t[:, ::1] cache, double[:, ::1] nodes, int dim,
                  double beta, uint64_t key, int a, int b) nogil:
    cdef int8_t e = cache[a, b]
    cdef double acc, diff
    cdef int t
    if e < 0:
        acc = 0.0
        for t in range(dim):
            diff = nodes[a, t] - nodes[b, t]
            acc = acc + diff * diff
        e = 1 if _pair_uniform(key, a, b) < exp(-beta * acc) else 0
        cache[a, b] = e
        cache[b, a] = e
    return e


cdef void _dfs(int v, int depth, int m, int max_depth, int8_t[:, ::1] cache,
               double[:, ::1] nodes, int dim, double beta, uint64_t key,
               int8_t[::1] visited, int64_t[::1] counts) nogil:
    cdef int w
    if _edge(cache, nodes, dim, beta, key, v, m + 1):
        counts[depth + 1] += 1
    if depth == max_depth:
        return
    visited[v] = 1
    for w in range(m):
        if not visited[w] and _edge(cache, nodes, dim, beta, key, v, w):
            _dfs(w, depth + 1, m, max_depth, cache, nodes, dim, beta, key, visited, counts)
    visited[v] = 0


def count_paths(points, source, sink, double beta, uint64_t key, int kmax):
    """Lazy-edge DFS path counter; see ``_fallback.count_paths``."""
    pts = np.asarray(points, dtype=np.float64)
    cdef int m = pts.shape[0]
    cdef int dim = np.asarray(source).shape[0]
    cdef double[:, ::1] nodes = np.ascontiguousarray(
        np.vstack([pts.reshape(m, dim), np.asarray(source, dtype=np.float64)[None, :],
                   np.asarray(sink, dtype=np.float64)[None, :]]))
    counts_arr = np.zeros(kmax + 1, dtype=np.int64)
    cdef int64_t[::1] counts = counts_arr
    cdef int8_t[:, ::1] cache = np.full((m + 2, m + 2), -1, dtype=np.int8)
    cdef int8_t[::1] visited = np.zeros(max(m, 1), dtype=np.int8)
    cdef int v
    if kmax >= 1 and _edge(cache, nodes, dim, beta, key, m, m + 1):
        counts[1] = 1
    if kmax < 2 or m == 0:
        return counts_arr
    with nogil:
        for v in range(m):
            if _edge(cache, nodes, dim, beta, key, m, v):
                _dfs(v, 1, m, kmax - 1, cache, nodes, dim, beta, key, visited, counts)
    return counts_arr
