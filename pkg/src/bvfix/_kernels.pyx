# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops; contract identical to ``bvfix._fallback``."""
import numpy as np

from libc.math cimport INFINITY
from libc.stdlib cimport malloc, free

ctypedef long long i64


cpdef object perm_count(i64 m, i64 r):
    cdef object out = 1
    cdef i64 k
    if r < 0 or r > m:
        return 0
    for k in range(m - r + 1, m + 1):
        out *= k
    return out


def axiom_scan(const double[:, ::1] D, int v, double eps):
    cdef Py_ssize_t n = D.shape[0]
    cdef int u, w, depth, z, k
    cdef double worst = -1.0, lhs, path, r
    cdef i64 checked = 0, skipped = 0
    cdef int *chain = <int *> malloc(max(v, 1) * sizeof(int))
    cdef char *used = <char *> malloc(max(n, 1) * sizeof(char))
    cdef double *prefix = <double *> malloc(max(v, 1) * sizeof(double))
    cdef int *best = <int *> malloc((v + 2) * sizeof(int))
    cdef bint found = False, stop = False
    try:
        for z in range(n):
            used[z] = 0
        for u in range(n):
            if stop:
                break
            for w in range(u + 1, n):
                if stop:
                    break
                used[u] = 1
                used[w] = 1
                lhs = D[u, w]
                # iterative DFS: chain[depth] holds the candidate being tried
                depth = 0
                chain[0] = -1
                while depth >= 0:
                    if chain[depth] >= 0:
                        used[chain[depth]] = 0
                    z = chain[depth] + 1
                    while z < n and used[z]:
                        z += 1
                    if z >= n:
                        depth -= 1
                        continue
                    chain[depth] = z
                    used[z] = 1
                    if depth == 0:
                        prefix[0] = D[u, z]
                    else:
                        prefix[depth] = prefix[depth - 1] + D[chain[depth - 1], z]
                    if depth < v - 1:
                        depth += 1
                        chain[depth] = -1
                        continue
                    path = prefix[depth] + D[z, w]
                    checked += 1
                    if path <= eps:
                        if lhs <= eps:
                            skipped += 1
                            continue
                        r = INFINITY
                    else:
                        r = lhs / path
                    if r > worst:
                        worst = r
                        found = True
                        best[0] = u
                        best[1] = w
                        for k in range(v):
                            best[k + 2] = chain[k]
                        if r == INFINITY:
                            stop = True
                            break
                # release whatever the DFS left marked
                for k in range(v):
                    if 0 <= chain[k] < n:
                        used[chain[k]] = 0
                used[u] = 0
                used[w] = 0
        witness = tuple(best[k] for k in range(v + 2)) if found else None
        return worst, witness, checked, skipped
    finally:
        free(chain)
        free(used)
        free(prefix)
        free(best)


cdef inline double _chain_ratio(const double[:, ::1] D, int *tup, int v, double eps, bint *skip) nogil:
    cdef double path = D[tup[0], tup[2]]
    cdef double lhs = D[tup[0], tup[1]]
    cdef int k
    for k in range(2, v + 1):
        path = path + D[tup[k], tup[k + 1]]
    path = path + D[tup[v + 1], tup[1]]
    skip[0] = False
    if path <= eps:
        if lhs <= eps:
            skip[0] = True
            return 0.0
        return INFINITY
    return lhs / path


def decode_tuple(i64 index, int n, int v):
    cdef int *tup = <int *> malloc((v + 2) * sizeof(int))
    cdef int *rem = <int *> malloc(max(n, 1) * sizeof(int))
    cdef i64[::1] blocks = _blocks(n, v)
    try:
        _decode(index, n, v, blocks, tup, rem)
        return tuple(tup[k] for k in range(v + 2))
    finally:
        free(tup)
        free(rem)


cdef i64[::1] _blocks(int n, int v):
    # blocks[k] = P(n-2-k-1, v-k-1); blocks[v] = P(n-2, v) (chains per pair)
    cdef i64[::1] out = np.empty(v + 1, dtype=np.int64)
    cdef int k
    for k in range(v):
        out[k] = perm_count(n - 2 - k - 1, v - k - 1)
    out[v] = perm_count(n - 2, v)
    return out


cdef void _decode(i64 index, int n, int v, i64[::1] blocks, int *tup, int *rem) nogil:
    cdef i64 p = index // blocks[v]
    cdef i64 c = index % blocks[v]
    cdef i64 d
    cdef int u = 0, w, m, k, j, z
    while p >= n - 1 - u:
        p -= n - 1 - u
        u += 1
    w = <int> (u + 1 + p)
    tup[0] = u
    tup[1] = w
    m = 0
    for z in range(n):
        if z != u and z != w:
            rem[m] = z
            m += 1
    for k in range(v):
        d = c // blocks[k]
        c = c % blocks[k]
        tup[k + 2] = rem[d]
        for j in range(<int> d, m - 1):
            rem[j] = rem[j + 1]
        m -= 1


def axiom_scan_indices(const double[:, ::1] D, int v, const i64[::1] indices, double eps):
    cdef int n = D.shape[0]
    cdef Py_ssize_t t, k
    cdef double worst = -1.0, r
    cdef i64 checked = 0, skipped = 0
    cdef bint skip, found = False
    cdef i64[::1] blocks = _blocks(n, v)
    cdef int *tup = <int *> malloc((v + 2) * sizeof(int))
    cdef int *rem = <int *> malloc(max(n, 1) * sizeof(int))
    cdef int *best = <int *> malloc((v + 2) * sizeof(int))
    try:
        for t in range(indices.shape[0]):
            _decode(indices[t], n, v, blocks, tup, rem)
            checked += 1
            r = _chain_ratio(D, tup, v, eps, &skip)
            if skip:
                skipped += 1
            elif r > worst:
                worst = r
                found = True
                for k in range(v + 2):
                    best[k] = tup[k]
                if r == INFINITY:
                    break
        witness = tuple(best[k] for k in range(v + 2)) if found else None
        return worst, witness, checked, skipped
    finally:
        free(tup)
        free(rem)
        free(best)


def banach_scan(const double[:, ::1] D, const double[:, ::1] DS, double eps):
    cdef Py_ssize_t n = D.shape[0], i, j
    cdef double best = -1.0, r
    cdef Py_ssize_t bi = -1, bj = -1
    for i in range(n):
        for j in range(i + 1, n):
            if D[i, j] > eps:
                r = DS[i, j] / D[i, j]
            elif DS[i, j] > eps:
                return INFINITY, i, j
            else:
                continue
            if r > best:
                best = r
                bi = i
                bj = j
    return best, bi, bj


def kannan_scan(const double[:, ::1] DS, const double[::1] R, double eps):
    cdef Py_ssize_t n = DS.shape[0], i, j
    cdef double best = -1.0, r, den
    cdef Py_ssize_t bi = -1, bj = -1
    for i in range(n):
        for j in range(i + 1, n):
            den = R[i] + R[j]
            if den > eps:
                r = DS[i, j] / den
            elif DS[i, j] > eps:
                return INFINITY, i, j
            else:
                continue
            if r > best:
                best = r
                bi = i
                bj = j
    return best, bi, bj


def weak_scan(const double[:, ::1] D, const double[:, ::1] DS, const double[:, ::1] PHI, double eps):
    cdef Py_ssize_t n = D.shape[0], i, j
    cdef double low = INFINITY, low_rel = INFINITY, slack, rel
    cdef Py_ssize_t li = -1, lj = -1, ri = -1, rj = -1
    for i in range(n):
        for j in range(i + 1, n):
            slack = D[i, j] - PHI[i, j] - DS[i, j]
            if slack < low:
                low = slack
                li = i
                lj = j
            if D[i, j] > eps:
                rel = slack / D[i, j]
            elif slack < -eps:
                rel = -INFINITY
            else:
                rel = 0.0
            if rel < low_rel:
                low_rel = rel
                ri = i
                rj = j
    return low, li, lj, low_rel, ri, rj
