"""Pure-Python box kernels.

Boxes are ``int64`` arrays of shape ``(k, 6, 2)`` holding inclusive
``[lo, hi]`` bounds per dimension. Every function here has a compiled twin
in ``_kernels.pyx`` with identical outputs, box order included.
"""
import numpy as np

NDIM = 6


def _rows(a):
    return [tuple(r) for r in np.asarray(a, dtype=np.int64).reshape(-1, 2 * NDIM).tolist()]


def _pack(rows):
    if not rows:
        return np.empty((0, NDIM, 2), dtype=np.int64)
    return np.array(rows, dtype=np.int64).reshape(-1, NDIM, 2)


def _meet(p, q):
    out = []
    for d in range(0, 2 * NDIM, 2):
        lo = p[d] if p[d] > q[d] else q[d]
        hi = p[d + 1] if p[d + 1] < q[d + 1] else q[d + 1]
        if lo > hi:
            return None
        out.append(lo)
        out.append(hi)
    return tuple(out)


def _carve(p, q, out):
    """Append the pieces of ``p - q`` to ``out``; ``p`` and ``q`` must meet."""
    cur = list(p)
    for d in range(0, 2 * NDIM, 2):
        if cur[d] < q[d]:
            piece = list(cur)
            piece[d + 1] = q[d] - 1
            out.append(tuple(piece))
            cur[d] = q[d]
        if cur[d + 1] > q[d + 1]:
            piece = list(cur)
            piece[d] = q[d + 1] + 1
            out.append(tuple(piece))
            cur[d + 1] = q[d + 1]


def intersect(a, b):
    rb = _rows(b)
    out = []
    for p in _rows(a):
        for q in rb:
            m = _meet(p, q)
            if m is not None:
                out.append(m)
    return _pack(out)


def subtract(a, b):
    rb = _rows(b)
    out = []
    for p in _rows(a):
        pieces = [p]
        for q in rb:
            nxt = []
            for s in pieces:
                if _meet(s, q) is None:
                    nxt.append(s)
                else:
                    _carve(s, q, nxt)
            pieces = nxt
            if not pieces:
                break
        out.extend(pieces)
    return _pack(out)


def overlapping_pairs(a, limit=100):
    """Index pairs ``(i, j)``, ``i < j``, of boxes that share a point."""
    arr = np.asarray(a, dtype=np.int64).reshape(-1, NDIM, 2)
    los, his = arr[:, :, 0], arr[:, :, 1]
    order = np.lexsort((np.arange(len(arr)), los[:, 1]))
    pairs = []
    active = np.empty(0, dtype=np.int64)
    for i in order.tolist():
        active = active[his[active, 1] >= los[i, 1]]
        # sweep order is kept, so the first ``limit`` hits match the compiled kernel
        hit = active[np.all((los[active] <= his[i]) & (his[active] >= los[i]), axis=1)]
        for j in hit.tolist():
            pairs.append((min(i, j), max(i, j)))
            if len(pairs) >= limit:
                return sorted(pairs)
        active = np.append(active, i)
    return sorted(pairs)


def locate(a, point):
    """Index of the first box containing ``point`` or -1."""
    pt = [int(v) for v in point]
    for i, r in enumerate(_rows(a)):
        if all(r[2 * d] <= pt[d] <= r[2 * d + 1] for d in range(NDIM)):
            return i
    return -1
