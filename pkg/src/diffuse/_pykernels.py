"""Reference (pure Python) implementation of the diffusion hot loops.

``_kernels.pyx`` mirrors this module operation for operation, so both
backends produce bit-identical states and records. Arrays ``F``, ``H`` and
``acc`` are updated in place; ``acc`` holds ``[sum|F|, sum w*F, sum w*|F|]``.
"""

import heapq

RUNNING = 0
CONVERGED = 1
EXHAUSTED = 2

NORM_L1 = 0
NORM_LINF = 1
NORM_WEIGHTED = 2

MODE_ABS = 0
MODE_NEG = 1
MODE_POS = 2

BACKEND = "python"


class _Run:
    """Mutable working copy of one kernel invocation."""

    def __init__(self, indptr, indices, data, F, H, w, acc, step, theta=0.0):
        self.indptr = indptr.tolist()
        self.indices = indices.tolist()
        self.data = data.tolist()
        self.n = len(self.indptr) - 1
        self.F_arr, self.H_arr, self.acc_arr = F, H, acc
        self.F = F.tolist()
        self.H = H.tolist()
        self.w = w.tolist()
        self.l1, self.sig, self.wl1 = acc.tolist()
        self.step = step
        self.touched = 0
        self.theta = theta
        self.eligible = 0

    def count_eligible(self):
        theta = self.theta
        self.eligible = sum(1 for f in self.F if abs(f) > theta)

    def write(self, j, new):
        F, w = self.F, self.w
        old = F[j]
        F[j] = new
        self.l1 += abs(new) - abs(old)
        self.sig += w[j] * (new - old)
        self.wl1 += w[j] * (abs(new) - abs(old))
        theta = self.theta
        self.eligible += (abs(new) > theta) - (abs(old) > theta)

    def refresh(self):
        l1 = sig = wl1 = 0.0
        w = self.w
        for j, f in enumerate(self.F):
            l1 += abs(f)
            sig += w[j] * f
            wl1 += w[j] * abs(f)
        self.l1, self.sig, self.wl1 = l1, sig, wl1

    def diffuse(self, i, alpha):
        F = self.F
        t = alpha * F[i]
        self.write(i, F[i] - t)
        self.H[i] += t
        lo, hi = self.indptr[i], self.indptr[i + 1]
        indices, data = self.indices, self.data
        for k in range(lo, hi):
            j = indices[k]
            self.write(j, F[j] + data[k] * t)
        self.step += 1
        self.touched += 1 + hi - lo
        if self.step % self.n == 0:
            self.refresh()
        return t

    def converged(self, eps, norm_kind):
        if eps <= 0.0:
            return False
        if norm_kind == NORM_WEIGHTED:
            val = self.wl1
        else:
            val = self.l1
        if val > eps and norm_kind == NORM_LINF and self.step % self.n == 0:
            val = max(abs(f) for f in self.F) if self.n else 0.0
            if val <= eps:
                return True
        if val <= eps:
            self.refresh()
            val = self.wl1 if norm_kind == NORM_WEIGHTED else self.l1
            return val <= eps
        return False

    def record(self, c, rec_amount, rec_l1, rec_sigma, rec_wl1, t):
        rec_amount[c] = t
        rec_l1[c] = self.l1
        rec_sigma[c] = self.sig
        rec_wl1[c] = self.wl1

    def flush(self):
        self.F_arr[:] = self.F
        self.H_arr[:] = self.H
        self.acc_arr[:] = (self.l1, self.sig, self.wl1)


def run_schedule(indptr, indices, data, F, H, w, acc, step, nodes, alphas,
                 rec_amount, rec_l1, rec_sigma, rec_wl1):
    run = _Run(indptr, indices, data, F, H, w, acc, step)
    for c, (i, a) in enumerate(zip(nodes.tolist(), alphas.tolist())):
        t = run.diffuse(i, a)
        run.record(c, rec_amount, rec_l1, rec_sigma, rec_wl1, t)
    run.flush()
    return run.step, run.touched


def run_sweep(indptr, indices, data, F, H, w, acc, step, order, pos, theta, skip,
              max_steps, eps, norm_kind, rec_node, rec_amount, rec_l1, rec_sigma, rec_wl1):
    """Round-robin over ``order``.

    With ``skip`` false every node is emitted in turn (cyclic); with ``skip``
    true nodes with ``|F_i| <= theta`` are passed over (threshold sweep).
    The sweep is exhausted once no node has ``|F_i| > theta``.
    """
    run = _Run(indptr, indices, data, F, H, w, acc, step, theta)
    run.count_eligible()
    order = order.tolist()
    m = len(order)
    count = 0
    status = RUNNING
    while True:
        if run.converged(eps, norm_kind):
            status = CONVERGED
            break
        if run.eligible == 0:
            status = EXHAUSTED
            break
        if count >= max_steps:
            break
        i = order[pos]
        if skip:
            while abs(run.F[i]) <= theta:
                pos = (pos + 1) % m
                i = order[pos]
        pos = (pos + 1) % m
        t = run.diffuse(i, 1.0)
        rec_node[count] = i
        run.record(count, rec_amount, rec_l1, rec_sigma, rec_wl1, t)
        count += 1
    run.flush()
    return status, count, run.step, pos, run.touched


def _key(mode, f):
    if mode == MODE_ABS:
        return abs(f)
    if mode == MODE_NEG:
        return -f
    return f


def run_priority(indptr, indices, data, F, H, w, acc, step, mode, theta,
                 max_steps, eps, norm_kind, rec_node, rec_amount, rec_l1, rec_sigma, rec_wl1):
    """Greedy selection of the node with the largest key, lowest index on ties.

    Keys are ``|F_i|``, ``-F_i`` or ``F_i`` depending on ``mode``; only keys
    above ``theta`` are eligible. Heap entries are invalidated lazily: an
    entry whose recorded key differs from the live key is dropped on pop.
    """
    run = _Run(indptr, indices, data, F, H, w, acc, step, theta)
    n = run.n
    heap = [(-k, j) for j, k in ((j, _key(mode, f)) for j, f in enumerate(run.F)) if k > theta]
    heapq.heapify(heap)
    Fl = run.F
    ind, ptr = run.indices, run.indptr
    count = 0
    status = RUNNING
    while True:
        if run.converged(eps, norm_kind):
            status = CONVERGED
            break
        i = -1
        while heap:
            negk, j = heapq.heappop(heap)
            if -negk == _key(mode, Fl[j]):
                i = j
                break
        if i < 0:
            status = EXHAUSTED
            break
        if count >= max_steps:
            heapq.heappush(heap, (negk, i))
            break
        t = run.diffuse(i, 1.0)
        rec_node[count] = i
        run.record(count, rec_amount, rec_l1, rec_sigma, rec_wl1, t)
        count += 1
        k = _key(mode, Fl[i])
        if k > theta:
            heapq.heappush(heap, (-k, i))
        for p in range(ptr[i], ptr[i + 1]):
            j = ind[p]
            k = _key(mode, Fl[j])
            if k > theta:
                heapq.heappush(heap, (-k, j))
        if len(heap) > 4 * n + 64:
            heap = [(-k, j) for j, k in ((j, _key(mode, f)) for j, f in enumerate(Fl)) if k > theta]
            heapq.heapify(heap)
    run.flush()
    return status, count, run.step, run.touched
