"""Pure-Python/numpy versions of the compiled kernels.

Signatures and tie-breaking match ``_kernels.pyx`` exactly; the divisor
scan returns bit-identical results because both use :func:`signed_sum`.
"""
import math
from collections import Counter

import numpy as np


def poly_eval_grad(idx, coef, z, want_grad):
    nt, m = idx.shape
    if nt == 0:
        return 0j, np.zeros(z.shape[0], dtype=complex)
    vals = z[idx]
    pre = np.ones((nt, m + 1), dtype=complex)
    np.cumprod(vals, axis=1, out=pre[:, 1:])
    value = complex(np.dot(coef, pre[:, m]))
    grad = np.zeros(z.shape[0], dtype=complex)
    if want_grad:
        suf = np.ones((nt, m + 1), dtype=complex)
        np.cumprod(vals[:, ::-1], axis=1, out=suf[:, 1:])
        suf = suf[:, ::-1]  # suf[:, i] = prod of vals[:, i:]
        contrib = coef[:, None] * pre[:, :m] * suf[:, 1:]
        flat_idx = idx.ravel()
        flat = contrib.ravel()
        n = z.shape[0]
        grad = np.bincount(flat_idx, weights=flat.real, minlength=n) + 1j * np.bincount(
            flat_idx, weights=flat.imag, minlength=n
        )
    return value, grad


def _key(v):
    return (abs(v), v)


def signed_sum(values):
    """Sum after cancelling exactly opposite pairs, rest left to right in ``(|v|, v)`` order.

    The result depends only on the multiset of values, and a multiset made
    of opposite pairs sums to exactly 0.
    """
    cnt = Counter(values)
    total = 0.0
    for v in sorted(cnt, key=_key):
        for _ in range(cnt[v] - cnt.get(-v, 0)):
            total += v
    return total


def _resonant(sign, wsq, pick):
    r = len(pick)
    if r % 2:
        return False
    used = [False] * r
    for i in range(r):
        if used[i] or sign[pick[i]] < 0:
            continue
        for j in range(r):
            if not used[j] and j != i and sign[pick[j]] < 0 and wsq[pick[j]] == wsq[pick[i]]:
                used[i] = used[j] = True
                break
        else:
            return False
    return all(used)


def scan_min_divisor(sign, omega, wsq, vec, r, condition, ext_omega, ext_vec, lookup, box, dim):
    sign = [int(x) for x in sign]
    omega = [float(x) for x in omega]
    wsq = [int(x) for x in wsq]
    vec = [tuple(int(x) for x in row) for row in vec]
    ext_omega = [float(x) for x in ext_omega]
    ext_vec = [tuple(int(x) for x in row) for row in ext_vec]
    lookup = np.asarray(lookup)
    side = 2 * box + 1
    ns = len(sign)
    if r < 1 or ns == 0:
        return math.inf, [], [], 0

    def find(q):
        flat = 0
        for x in q:
            if x < -box or x > box:
                return -1
            flat = flat * side + (x + box)
        return int(lookup[flat])

    best = math.inf
    best_pick = None
    best_ext = []
    count = 0
    pick = [0] * r
    while True:
        mom = [0] * dim
        for p in pick:
            for k in range(dim):
                mom[k] += sign[p] * vec[p][k]
        interior = [sign[p] * omega[p] for p in pick]
        if condition == 1:
            if not _resonant(sign, wsq, pick):
                v = abs(signed_sum(interior))
                count += 1
                if v < best:
                    best, best_pick, best_ext = v, list(pick), []
        elif condition == 2:
            e1 = find([-x for x in mom])
            if e1 >= 0:
                v = abs(signed_sum(interior + [ext_omega[e1]]))
                count += 1
                if v < best:
                    best, best_pick, best_ext = v, list(pick), [e1]
        else:
            for e1 in range(len(ext_omega)):
                e2 = find([-x - y for x, y in zip(mom, ext_vec[e1])])
                if e2 < e1:
                    continue
                v = abs(signed_sum(interior + [ext_omega[e1], ext_omega[e2]]))
                count += 1
                if v < best:
                    best, best_pick, best_ext = v, list(pick), [e1, e2]
        i = r - 1
        while i >= 0 and pick[i] == ns - 1:
            i -= 1
        if i < 0:
            break
        pick[i] += 1
        for k in range(i + 1, r):
            pick[k] = pick[i]
    if best_pick is None:
        return math.inf, [], [], 0
    return best, best_pick, best_ext, count
