# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops: polynomial evaluation/gradient and divisor scans.

Both entry points mirror :mod:`birkhoff_nlw._pykernels` argument for
argument; :mod:`birkhoff_nlw._backend` picks one at import.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, INFINITY

cnp.import_array()

DEF MAXDEG = 64


def poly_eval_grad(const cnp.int64_t[:, ::1] idx, const double complex[::1] coef,
                   const double complex[::1] z, bint want_grad):
    """Return ``(sum_t c_t prod_i z[idx[t, i]], d/dz of that sum)``."""
    cdef Py_ssize_t nt = idx.shape[0]
    cdef Py_ssize_t m = idx.shape[1]
    cdef Py_ssize_t t, i
    cdef double complex pre[MAXDEG + 1]
    cdef double complex val = 0, suf, c
    if m > MAXDEG:
        raise ValueError("degree too large for compiled kernel")
    grad_arr = np.zeros(z.shape[0], dtype=np.complex128)
    cdef double complex[::1] grad = grad_arr
    for t in range(nt):
        pre[0] = 1
        for i in range(m):
            pre[i + 1] = pre[i] * z[idx[t, i]]
        c = coef[t]
        val = val + c * pre[m]
        if want_grad:
            suf = 1
            for i in range(m - 1, -1, -1):
                grad[idx[t, i]] = grad[idx[t, i]] + c * pre[i] * suf
                suf = suf * z[idx[t, i]]
    return val, grad_arr


cdef inline double _signed_sum(double* vals, int n) nogil:
    # cancel exactly opposite pairs, insertion sort the rest by (|v|, v), sum left to right
    cdef int used[MAXDEG + 2]
    cdef int i, j, m = 0
    cdef double x, s = 0.0
    for i in range(n):
        used[i] = 0
    for i in range(n):
        if used[i] or vals[i] <= 0:
            continue
        for j in range(n):
            if not used[j] and vals[j] == -vals[i]:
                used[i] = 1
                used[j] = 1
                break
    for i in range(n):
        if not used[i]:
            vals[m] = vals[i]
            m += 1
    for i in range(1, m):
        x = vals[i]
        j = i - 1
        while j >= 0 and (fabs(vals[j]) > fabs(x) or (fabs(vals[j]) == fabs(x) and vals[j] > x)):
            vals[j + 1] = vals[j]
            j -= 1
        vals[j + 1] = x
    for i in range(m):
        s += vals[i]
    return s


cdef inline bint _resonant(const cnp.int8_t[::1] sign, const cnp.int64_t[::1] wsq,
                           int* pick, int r) nogil:
    cdef int used[MAXDEG]
    cdef int i, j
    cdef bint found
    if r % 2:
        return False
    for i in range(r):
        used[i] = 0
    for i in range(r):
        if used[i] or sign[pick[i]] < 0:
            continue
        found = False
        for j in range(r):
            if not used[j] and j != i and sign[pick[j]] < 0 and wsq[pick[j]] == wsq[pick[i]]:
                used[i] = 1
                used[j] = 1
                found = True
                break
        if not found:
            return False
    for i in range(r):
        if not used[i]:
            return False
    return True


def scan_min_divisor(const cnp.int8_t[::1] sign, const double[::1] omega,
                     const cnp.int64_t[::1] wsq, const cnp.int64_t[:, ::1] vec,
                     int r, int condition,
                     const double[::1] ext_omega, const cnp.int64_t[:, ::1] ext_vec,
                     const cnp.int64_t[::1] lookup,
                     cnp.int64_t box, int dim):
    """Exhaustive minimum of ``|sum delta_i omega_i (+ exterior)|``.

    Interior tuples run over index-nondecreasing combinations of the signed
    modes; the first minimum in that order wins ties. ``lookup`` maps a
    momentum in ``[-box, box]^dim`` (row-major, offset ``box``) to an
    exterior position or ``-1``.

    Returns ``(best, witness_positions, exterior_positions, count)`` with
    ``best = inf`` when nothing was scanned.
    """
    cdef int ns = sign.shape[0]
    cdef int ne = ext_omega.shape[0]
    cdef int pick[MAXDEG]
    cdef int best_pick[MAXDEG]
    cdef int best_e1 = -1, best_e2 = -1
    cdef double vals[MAXDEG + 2]
    cdef long long mom[3]
    cdef long long q[3]
    cdef double best = INFINITY, v
    cdef long long count = 0
    cdef int i, k, e1, e2
    cdef long long flat, side = 2 * box + 1
    cdef bint inside
    if r < 1 or r > MAXDEG or ns == 0:
        return INFINITY, [], [], 0
    for i in range(r):
        pick[i] = 0
    while True:
        for k in range(dim):
            mom[k] = 0
        for i in range(r):
            for k in range(dim):
                mom[k] += sign[pick[i]] * vec[pick[i], k]
        if condition == 1:
            if not _resonant(sign, wsq, pick, r):
                for i in range(r):
                    vals[i] = sign[pick[i]] * omega[pick[i]]
                v = fabs(-_signed_sum(vals, r))
                count += 1
                if v < best:
                    best = v
                    for i in range(r):
                        best_pick[i] = pick[i]
        elif condition == 2:
            inside = True
            flat = 0
            for k in range(dim):
                q[k] = -mom[k]
                if q[k] < -box or q[k] > box:
                    inside = False
                flat = flat * side + (q[k] + box)
            if inside:
                e1 = lookup[flat]
                if e1 >= 0:
                    for i in range(r):
                        vals[i] = sign[pick[i]] * omega[pick[i]]
                    vals[r] = ext_omega[e1]
                    v = fabs(-_signed_sum(vals, r + 1))
                    count += 1
                    if v < best:
                        best = v
                        best_e1 = e1
                        for i in range(r):
                            best_pick[i] = pick[i]
        else:
            for e1 in range(ne):
                inside = True
                flat = 0
                for k in range(dim):
                    q[k] = -mom[k] - ext_vec[e1, k]
                    if q[k] < -box or q[k] > box:
                        inside = False
                    flat = flat * side + (q[k] + box)
                if not inside:
                    continue
                e2 = lookup[flat]
                if e2 < e1:
                    continue
                for i in range(r):
                    vals[i] = sign[pick[i]] * omega[pick[i]]
                vals[r] = ext_omega[e1]
                vals[r + 1] = ext_omega[e2]
                v = fabs(-_signed_sum(vals, r + 2))
                count += 1
                if v < best:
                    best = v
                    best_e1 = e1
                    best_e2 = e2
                    for i in range(r):
                        best_pick[i] = pick[i]
        # advance nondecreasing combination
        i = r - 1
        while i >= 0 and pick[i] == ns - 1:
            i -= 1
        if i < 0:
            break
        pick[i] += 1
        for k in range(i + 1, r):
            pick[k] = pick[i]
    wit = [best_pick[i] for i in range(r)] if best < INFINITY else []
    ext = []
    if best < INFINITY and best_e1 >= 0:
        ext.append(best_e1)
        if best_e2 >= 0:
            ext.append(best_e2)
    return best, wit, ext, count
