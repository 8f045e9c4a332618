# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled diffusion hot loops.

Operation-for-operation mirror of ``_pykernels``; keep the two in sync.
"""

from libc.math cimport fabs
from libc.stdlib cimport malloc, realloc, free

ctypedef long long i64

cdef int ST_RUNNING = 0
cdef int ST_CONVERGED = 1
cdef int ST_EXHAUSTED = 2

cdef int NORM_WEIGHTED = 2
cdef int NORM_LINF = 1

cdef int MODE_ABS = 0
cdef int MODE_NEG = 1

BACKEND = "compiled"
RUNNING = 0
CONVERGED = 1
EXHAUSTED = 2


cdef struct Run:
    const i64* indptr
    const i64* indices
    const double* data
    double* F
    double* H
    const double* w
    i64 n
    double l1
    double sig
    double wl1
    i64 step
    i64 touched
    double theta
    i64 eligible


cdef inline void _write(Run* r, i64 j, double new) noexcept nogil:
    cdef double old = r.F[j]
    r.F[j] = new
    r.l1 += fabs(new) - fabs(old)
    r.sig += r.w[j] * (new - old)
    r.wl1 += r.w[j] * (fabs(new) - fabs(old))
    r.eligible += (fabs(new) > r.theta) - (fabs(old) > r.theta)


cdef inline void _refresh(Run* r) noexcept nogil:
    cdef double l1 = 0.0, sig = 0.0, wl1 = 0.0, f
    cdef i64 j
    for j in range(r.n):
        f = r.F[j]
        l1 += fabs(f)
        sig += r.w[j] * f
        wl1 += r.w[j] * fabs(f)
    r.l1 = l1
    r.sig = sig
    r.wl1 = wl1


cdef inline double _diffuse(Run* r, i64 i, double alpha) noexcept nogil:
    cdef double t = alpha * r.F[i]
    cdef i64 k, lo = r.indptr[i], hi = r.indptr[i + 1], j
    _write(r, i, r.F[i] - t)
    r.H[i] += t
    for k in range(lo, hi):
        j = r.indices[k]
        _write(r, j, r.F[j] + r.data[k] * t)
    r.step += 1
    r.touched += 1 + hi - lo
    if r.step % r.n == 0:
        _refresh(r)
    return t


cdef inline bint _converged(Run* r, double eps, int norm_kind) noexcept nogil:
    cdef double val, f
    cdef i64 j
    if eps <= 0.0:
        return False
    if norm_kind == NORM_WEIGHTED:
        val = r.wl1
    else:
        val = r.l1
    if val > eps and norm_kind == NORM_LINF and r.step % r.n == 0:
        val = 0.0
        for j in range(r.n):
            f = fabs(r.F[j])
            if f > val:
                val = f
        if val <= eps:
            return True
    if val <= eps:
        _refresh(r)
        val = r.wl1 if norm_kind == NORM_WEIGHTED else r.l1
        return val <= eps
    return False


cdef inline void _init(Run* r, const i64[::1] indptr, const i64[::1] indices,
                       const double[::1] data, double[::1] F, double[::1] H,
                       const double[::1] w, double[::1] acc, i64 step, double theta) noexcept:
    r.n = indptr.shape[0] - 1
    r.indptr = &indptr[0]
    r.indices = &indices[0] if indices.shape[0] else NULL
    r.data = &data[0] if data.shape[0] else NULL
    r.F = &F[0] if F.shape[0] else NULL
    r.H = &H[0] if H.shape[0] else NULL
    r.w = &w[0] if w.shape[0] else NULL
    r.l1 = acc[0]
    r.sig = acc[1]
    r.wl1 = acc[2]
    r.step = step
    r.touched = 0
    r.theta = theta
    r.eligible = 0


cdef inline void _count_eligible(Run* r) noexcept:
    cdef i64 j
    r.eligible = 0
    for j in range(r.n):
        if fabs(r.F[j]) > r.theta:
            r.eligible += 1


cdef inline void _flush(Run* r, double[::1] acc) noexcept:
    acc[0] = r.l1
    acc[1] = r.sig
    acc[2] = r.wl1


def run_schedule(const i64[::1] indptr, const i64[::1] indices, const double[::1] data,
                 double[::1] F, double[::1] H, const double[::1] w, double[::1] acc,
                 i64 step, const i64[::1] nodes, const double[::1] alphas,
                 double[::1] rec_amount, double[::1] rec_l1, double[::1] rec_sigma,
                 double[::1] rec_wl1):
    cdef Run r
    cdef i64 c, m = nodes.shape[0]
    cdef double t
    _init(&r, indptr, indices, data, F, H, w, acc, step, 0.0)
    with nogil:
        for c in range(m):
            t = _diffuse(&r, nodes[c], alphas[c])
            rec_amount[c] = t
            rec_l1[c] = r.l1
            rec_sigma[c] = r.sig
            rec_wl1[c] = r.wl1
    _flush(&r, acc)
    return r.step, r.touched


def run_sweep(const i64[::1] indptr, const i64[::1] indices, const double[::1] data,
              double[::1] F, double[::1] H, const double[::1] w, double[::1] acc,
              i64 step, const i64[::1] order, i64 pos, double theta, bint skip,
              i64 max_steps, double eps, int norm_kind, i64[::1] rec_node,
              double[::1] rec_amount, double[::1] rec_l1, double[::1] rec_sigma,
              double[::1] rec_wl1):
    cdef Run r
    cdef i64 m = order.shape[0], count = 0, i
    cdef int status = ST_RUNNING
    cdef double t
    _init(&r, indptr, indices, data, F, H, w, acc, step, theta)
    _count_eligible(&r)
    with nogil:
        while True:
            if _converged(&r, eps, norm_kind):
                status = ST_CONVERGED
                break
            if r.eligible == 0:
                status = ST_EXHAUSTED
                break
            if count >= max_steps:
                break
            i = order[pos]
            if skip:
                while fabs(r.F[i]) <= theta:
                    pos = (pos + 1) % m
                    i = order[pos]
            pos = (pos + 1) % m
            t = _diffuse(&r, i, 1.0)
            rec_node[count] = i
            rec_amount[count] = t
            rec_l1[count] = r.l1
            rec_sigma[count] = r.sig
            rec_wl1[count] = r.wl1
            count += 1
    _flush(&r, acc)
    return status, count, r.step, pos, r.touched


# -- max-heap ordered by (key desc, node asc) --------------------------------

cdef struct Heap:
    double* key
    i64* node
    i64 size
    i64 cap


cdef inline bint _before(Heap* h, i64 a, i64 b) noexcept nogil:
    return h.key[a] > h.key[b] or (h.key[a] == h.key[b] and h.node[a] < h.node[b])


cdef inline void _swap(Heap* h, i64 a, i64 b) noexcept nogil:
    cdef double k = h.key[a]
    cdef i64 v = h.node[a]
    h.key[a] = h.key[b]
    h.node[a] = h.node[b]
    h.key[b] = k
    h.node[b] = v


cdef inline void _sift_down(Heap* h, i64 pos) noexcept nogil:
    cdef i64 child, best
    while True:
        child = 2 * pos + 1
        if child >= h.size:
            return
        best = child
        if child + 1 < h.size and _before(h, child + 1, child):
            best = child + 1
        if _before(h, best, pos):
            _swap(h, best, pos)
            pos = best
        else:
            return


cdef inline int _push(Heap* h, double key, i64 node) noexcept nogil:
    cdef i64 pos, parent
    cdef double* nk
    cdef i64* nn
    if h.size == h.cap:
        nk = <double*> realloc(h.key, 2 * h.cap * sizeof(double))
        if nk == NULL:
            return -1
        h.key = nk
        nn = <i64*> realloc(h.node, 2 * h.cap * sizeof(i64))
        if nn == NULL:
            return -1
        h.node = nn
        h.cap *= 2
    pos = h.size
    h.key[pos] = key
    h.node[pos] = node
    h.size += 1
    while pos > 0:
        parent = (pos - 1) // 2
        if _before(h, pos, parent):
            _swap(h, pos, parent)
            pos = parent
        else:
            break
    return 0


cdef inline void _pop(Heap* h) noexcept nogil:
    h.size -= 1
    if h.size > 0:
        h.key[0] = h.key[h.size]
        h.node[0] = h.node[h.size]
        _sift_down(h, 0)


cdef inline double _key(int mode, double f) noexcept nogil:
    if mode == MODE_ABS:
        return fabs(f)
    if mode == MODE_NEG:
        return -f
    return f


cdef inline void _rebuild(Heap* h, Run* r, int mode) noexcept nogil:
    cdef i64 j, pos
    cdef double k
    h.size = 0
    for j in range(r.n):
        k = _key(mode, r.F[j])
        if k > r.theta:
            h.key[h.size] = k
            h.node[h.size] = j
            h.size += 1
    pos = h.size // 2
    while pos > 0:
        pos -= 1
        _sift_down(h, pos)


def run_priority(const i64[::1] indptr, const i64[::1] indices, const double[::1] data,
                 double[::1] F, double[::1] H, const double[::1] w, double[::1] acc,
                 i64 step, int mode, double theta, i64 max_steps, double eps, int norm_kind,
                 i64[::1] rec_node, double[::1] rec_amount, double[::1] rec_l1,
                 double[::1] rec_sigma, double[::1] rec_wl1):
    cdef Run r
    cdef Heap h
    cdef i64 count = 0, i, j, p
    cdef int status = ST_RUNNING, failed = 0
    cdef double t, k, popped_key = 0.0
    _init(&r, indptr, indices, data, F, H, w, acc, step, theta)
    h.cap = 4 * r.n + 128
    h.size = 0
    h.key = <double*> malloc(h.cap * sizeof(double))
    h.node = <i64*> malloc(h.cap * sizeof(i64))
    if h.key == NULL or h.node == NULL:
        free(h.key)
        free(h.node)
        raise MemoryError()
    try:
        with nogil:
            _rebuild(&h, &r, mode)
            while True:
                if _converged(&r, eps, norm_kind):
                    status = ST_CONVERGED
                    break
                i = -1
                while h.size > 0:
                    j = h.node[0]
                    popped_key = h.key[0]
                    _pop(&h)
                    if popped_key == _key(mode, r.F[j]):
                        i = j
                        break
                if i < 0:
                    status = ST_EXHAUSTED
                    break
                if count >= max_steps:
                    failed |= _push(&h, popped_key, i)
                    break
                t = _diffuse(&r, i, 1.0)
                rec_node[count] = i
                rec_amount[count] = t
                rec_l1[count] = r.l1
                rec_sigma[count] = r.sig
                rec_wl1[count] = r.wl1
                count += 1
                k = _key(mode, r.F[i])
                if k > theta:
                    failed |= _push(&h, k, i)
                for p in range(r.indptr[i], r.indptr[i + 1]):
                    j = r.indices[p]
                    k = _key(mode, r.F[j])
                    if k > theta:
                        failed |= _push(&h, k, j)
                if failed:
                    break
                if h.size > 4 * r.n + 64:
                    _rebuild(&h, &r, mode)
        if failed:
            raise MemoryError()
    finally:
        free(h.key)
        free(h.node)
    _flush(&r, acc)
    return status, count, r.step, r.touched
