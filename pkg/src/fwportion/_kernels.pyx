# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
# distutils: language = c++
"""Compiled box kernels; same contract as ``_pykernels``."""
import numpy as np
cimport numpy as cnp
from libc.stdint cimport int64_t
from libcpp.vector cimport vector
from libc.string cimport memcpy

cnp.import_array()

cdef enum:
    NDIM = 6
    W = 12


cdef inline bint _meets(const int64_t* p, const int64_t* q) noexcept nogil:
    cdef int d
    for d in range(0, W, 2):
        if p[d] > q[d + 1] or q[d] > p[d + 1]:
            return False
    return True


cdef inline void _push(vector[int64_t]& out, const int64_t* p) noexcept nogil:
    cdef int d
    for d in range(W):
        out.push_back(p[d])


cdef void _carve(const int64_t* p, const int64_t* q, vector[int64_t]& out) noexcept nogil:
    cdef int64_t cur[W]
    cdef int64_t piece[W]
    cdef int d, e
    for d in range(W):
        cur[d] = p[d]
    for d in range(0, W, 2):
        if cur[d] < q[d]:
            for e in range(W):
                piece[e] = cur[e]
            piece[d + 1] = q[d] - 1
            _push(out, piece)
            cur[d] = q[d]
        if cur[d + 1] > q[d + 1]:
            for e in range(W):
                piece[e] = cur[e]
            piece[d] = q[d + 1] + 1
            _push(out, piece)
            cur[d + 1] = q[d + 1]


cdef _pack(vector[int64_t]& v):
    cdef Py_ssize_t n = v.size() // W
    out = np.empty((n, NDIM, 2), dtype=np.int64)
    cdef int64_t[:, :, ::1] o = out
    if n:
        memcpy(&o[0, 0, 0], v.data(), n * W * sizeof(int64_t))
    return out


def _flat(a):
    return np.ascontiguousarray(a, dtype=np.int64).reshape(-1, W)


def intersect(a, b):
    cdef const int64_t[:, ::1] A = _flat(a)
    cdef const int64_t[:, ::1] B = _flat(b)
    cdef vector[int64_t] out
    cdef Py_ssize_t i, j
    cdef int d
    cdef int64_t lo, hi
    cdef int64_t m[W]
    cdef bint ok
    with nogil:
        for i in range(A.shape[0]):
            for j in range(B.shape[0]):
                ok = True
                for d in range(0, W, 2):
                    lo = A[i, d] if A[i, d] > B[j, d] else B[j, d]
                    hi = A[i, d + 1] if A[i, d + 1] < B[j, d + 1] else B[j, d + 1]
                    if lo > hi:
                        ok = False
                        break
                    m[d] = lo
                    m[d + 1] = hi
                if ok:
                    _push(out, m)
    return _pack(out)


def subtract(a, b):
    cdef const int64_t[:, ::1] A = _flat(a)
    cdef const int64_t[:, ::1] B = _flat(b)
    cdef vector[int64_t] out, pieces, nxt
    cdef Py_ssize_t i, j, k, n
    with nogil:
        for i in range(A.shape[0]):
            pieces.clear()
            _push(pieces, &A[i, 0])
            for j in range(B.shape[0]):
                nxt.clear()
                n = pieces.size() // W
                for k in range(n):
                    if _meets(pieces.data() + k * W, &B[j, 0]):
                        _carve(pieces.data() + k * W, &B[j, 0], nxt)
                    else:
                        _push(nxt, pieces.data() + k * W)
                pieces.swap(nxt)
                if pieces.size() == 0:
                    break
            for k in range(<Py_ssize_t>pieces.size()):
                out.push_back(pieces[k])
    return _pack(out)


def overlapping_pairs(a, limit=100):
    cdef const int64_t[:, ::1] A = _flat(a)
    cdef cnp.int64_t[::1] order = np.argsort(np.asarray(A)[:, 2], kind="stable").astype(np.int64)
    cdef vector[Py_ssize_t] active, keep
    cdef Py_ssize_t idx, i, j, t
    cdef Py_ssize_t cap = limit
    pairs = []
    for idx in range(order.shape[0]):
        i = order[idx]
        keep.clear()
        for t in range(<Py_ssize_t>active.size()):
            if A[active[t], 3] >= A[i, 2]:
                keep.push_back(active[t])
        active.swap(keep)
        for t in range(<Py_ssize_t>active.size()):
            j = active[t]
            if _meets(&A[i, 0], &A[j, 0]):
                pairs.append((min(i, j), max(i, j)))
                if len(pairs) >= cap:
                    return sorted(pairs)
        active.push_back(i)
    return sorted(pairs)


def locate(a, point):
    cdef const int64_t[:, ::1] A = _flat(a)
    cdef int64_t pt[NDIM]
    cdef Py_ssize_t i
    cdef int d
    cdef bint inside
    for d in range(NDIM):
        pt[d] = int(point[d])
    for i in range(A.shape[0]):
        inside = True
        for d in range(NDIM):
            if pt[d] < A[i, 2 * d] or pt[d] > A[i, 2 * d + 1]:
                inside = False
                break
        if inside:
            return i
    return -1
