"""Hot loops without the compiled extension (plain loops plus row-wise numpy).

Mirrors ``_kernels.pyx`` function for function; selected at import when the
compiled module is unavailable (or forced with ``BVFIX_FORCE_PYTHON=1``).

Tuple order everywhere: ``(u, w, z_1, ..., z_v)`` with ``u < w`` and the
chain ``z`` enumerated as permutations of the remaining indices in
lexicographic order.  Ties keep the first tuple encountered.
"""
import math

import numpy as np


def perm_count(m, r):
    if r < 0 or r > m:
        return 0
    out = 1
    for k in range(m - r + 1, m + 1):
        out *= k
    return out


def _chains(n, v, u, w):
    """Injective chains of length v over range(n) avoiding u, w, lex order."""
    used = [False] * n
    used[u] = used[w] = True
    chain = [0] * v

    def rec(depth):
        if depth == v:
            yield chain
            return
        for z in range(n):
            if not used[z]:
                used[z] = True
                chain[depth] = z
                yield from rec(depth + 1)
                used[z] = False

    return rec(0)


def _score(rows, u, w, chain, eps):
    """Return ratio, or None for a skipped zero/zero tuple."""
    path = rows[u][chain[0]]
    for k in range(len(chain) - 1):
        path += rows[chain[k]][chain[k + 1]]
    path += rows[chain[-1]][w]
    lhs = rows[u][w]
    if path <= eps:
        return None if lhs <= eps else math.inf
    return lhs / path


def axiom_scan(D, v, eps):
    """Exhaustive polygon-inequality scan.

    Returns ``(worst_ratio, witness, checked, skipped)``; ``worst_ratio`` is
    -1.0 and ``witness`` None when no tuple produced a ratio.
    """
    rows = D.tolist()
    n = len(rows)
    worst, witness = -1.0, None
    checked = skipped = 0
    for u in range(n):
        for w in range(u + 1, n):
            for chain in _chains(n, v, u, w):
                checked += 1
                r = _score(rows, u, w, chain, eps)
                if r is None:
                    skipped += 1
                elif r > worst:
                    worst, witness = r, (u, w, *chain)
                    if r == math.inf:
                        return worst, witness, checked, skipped
    return worst, witness, checked, skipped


def decode_tuple(index, n, v):
    """Map a flat tuple index to ``(u, w, z_1..z_v)`` in enumeration order."""
    per_pair = perm_count(n - 2, v)
    p, c = divmod(index, per_pair)
    u = 0
    while p >= n - 1 - u:
        p -= n - 1 - u
        u += 1
    w = u + 1 + p
    remaining = [z for z in range(n) if z != u and z != w]
    chain = []
    m = n - 2
    for k in range(v):
        block = perm_count(m - k - 1, v - k - 1)
        d, c = divmod(c, block)
        chain.append(remaining.pop(d))
    return (u, w, *chain)


def axiom_scan_indices(D, v, indices, eps):
    """Scan only the tuples at the given flat indices (sampled mode)."""
    rows = D.tolist()
    n = len(rows)
    worst, witness = -1.0, None
    checked = skipped = 0
    for index in indices:
        u, w, *chain = decode_tuple(int(index), n, v)
        checked += 1
        r = _score(rows, u, w, chain, eps)
        if r is None:
            skipped += 1
        elif r > worst:
            worst, witness = r, (u, w, *chain)
            if r == math.inf:
                break
    return worst, witness, checked, skipped


# The pair scans work one row at a time with numpy: same arithmetic as the
# loops in _kernels.pyx, and argmax/argmin return the first extremum so
# witnesses tie-break identically.


def _ratio_scan(NUM, den_row, eps):
    n = NUM.shape[0]
    best, bi, bj = -1.0, -1, -1
    for i in range(n - 1):
        num, den = NUM[i, i + 1:], den_row(i)
        zero = den <= eps
        blow = np.flatnonzero(zero & (num > eps))
        if len(blow):
            return math.inf, i, i + 1 + int(blow[0])
        live = ~zero
        if not live.any():
            continue
        r = np.where(live, num / np.where(live, den, 1.0), -np.inf)
        k = int(np.argmax(r))
        if r[k] > best:
            best, bi, bj = float(r[k]), i, i + 1 + k
    return best, bi, bj


def banach_scan(D, DS, eps):
    D = np.asarray(D)
    return _ratio_scan(np.asarray(DS), lambda i: D[i, i + 1:], eps)


def kannan_scan(DS, R, eps):
    R = np.asarray(R)
    return _ratio_scan(np.asarray(DS), lambda i: R[i] + R[i + 1:], eps)


def weak_scan(D, DS, PHI, eps):
    """Minimum of ``d - phi(d) - ds`` (absolute and relative to ``d``)."""
    D, DS, PHI = np.asarray(D), np.asarray(DS), np.asarray(PHI)
    n = D.shape[0]
    low, li, lj = math.inf, -1, -1
    low_rel, ri, rj = math.inf, -1, -1
    for i in range(n - 1):
        d = D[i, i + 1:]
        slack = d - PHI[i, i + 1:] - DS[i, i + 1:]
        k = int(np.argmin(slack))
        if slack[k] < low:
            low, li, lj = float(slack[k]), i, i + 1 + k
        pos = d > eps
        rel = np.where(pos, slack / np.where(pos, d, 1.0), np.where(slack < -eps, -np.inf, 0.0))
        k = int(np.argmin(rel))
        if rel[k] < low_rel:
            low_rel, ri, rj = float(rel[k]), i, i + 1 + k
    return low, li, lj, low_rel, ri, rj
