# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled numerical kernels.

Same algorithms and return conventions as :mod:`otda._fallback`.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log, sqrt, fabs, INFINITY

cnp.import_array()

cdef enum:
    STATUS_OPTIMAL = 0
    STATUS_MAX_ITER = 1


cdef inline Py_ssize_t _tail(Py_ssize_t k, Py_ssize_t m, Py_ssize_t n,
                             Py_ssize_t n_real, Py_ssize_t root) noexcept nogil:
    if k < n_real:
        return k // n
    if k < n_real + m:
        return k - n_real
    return root


cdef inline Py_ssize_t _head(Py_ssize_t k, Py_ssize_t m, Py_ssize_t n,
                             Py_ssize_t n_real, Py_ssize_t root) noexcept nogil:
    if k < n_real:
        return m + k % n
    if k < n_real + m:
        return root
    return m + (k - n_real - m)


cdef void _rebuild(Py_ssize_t n_nodes, Py_ssize_t m, Py_ssize_t n,
                   Py_ssize_t n_real, Py_ssize_t root, double big_m,
                   const double[::1] cost, Py_ssize_t[::1] tree_arcs,
                   Py_ssize_t[::1] deg, Py_ssize_t[::1] start, Py_ssize_t[::1] adj,
                   Py_ssize_t[::1] parent, Py_ssize_t[::1] pred,
                   Py_ssize_t[::1] depth, double[::1] pi,
                   Py_ssize_t[::1] order) noexcept nogil:
    cdef Py_ssize_t x, y, k, t, h, e, lo, hi, p
    cdef double c
    for x in range(n_nodes):
        deg[x] = 0
    for e in range(n_nodes - 1):
        k = tree_arcs[e]
        deg[_tail(k, m, n, n_real, root)] += 1
        deg[_head(k, m, n, n_real, root)] += 1
    start[0] = 0
    for x in range(n_nodes):
        start[x + 1] = start[x] + deg[x]
        deg[x] = 0
    for e in range(n_nodes - 1):
        k = tree_arcs[e]
        t = _tail(k, m, n, n_real, root)
        h = _head(k, m, n, n_real, root)
        adj[start[t] + deg[t]] = k
        deg[t] += 1
        adj[start[h] + deg[h]] = k
        deg[h] += 1

    parent[root] = -1
    pred[root] = -1
    depth[root] = 0
    pi[root] = 0.0
    order[0] = root
    lo = 0
    hi = 1
    while lo < hi:
        x = order[lo]
        lo += 1
        for p in range(start[x], start[x + 1]):
            k = adj[p]
            if k == pred[x]:
                continue
            t = _tail(k, m, n, n_real, root)
            c = cost[k] if k < n_real else big_m
            if t == x:
                y = _head(k, m, n, n_real, root)
                pi[y] = pi[x] + c
            else:
                y = t
                pi[y] = pi[x] - c
            parent[y] = x
            pred[y] = k
            depth[y] = depth[x] + 1
            order[hi] = y
            hi += 1


def network_simplex(a, b, C, Py_ssize_t max_iter=0):
    cdef const double[::1] av = np.ascontiguousarray(a, dtype=np.float64)
    cdef const double[::1] bv = np.ascontiguousarray(b, dtype=np.float64)
    cdef cnp.ndarray Carr = np.ascontiguousarray(C, dtype=np.float64)
    cdef Py_ssize_t m = av.shape[0]
    cdef Py_ssize_t n = bv.shape[0]
    cdef const double[::1] cost = Carr.reshape(-1)
    cdef Py_ssize_t n_real = m * n
    cdef Py_ssize_t n_arcs = n_real + m + n
    cdef Py_ssize_t root = m + n
    cdef Py_ssize_t n_nodes = m + n + 1
    cdef double big_m = (float(Carr.max()) if n_real > 0 else 0.0) + 1.0
    cdef double tol = 1e-12 * big_m

    flow_arr = np.zeros(n_arcs, dtype=np.float64)
    in_tree_arr = np.zeros(n_arcs, dtype=np.uint8)
    tree_arr = np.empty(n_nodes - 1, dtype=np.intp)
    cdef double[::1] flow = flow_arr
    cdef unsigned char[::1] in_tree = in_tree_arr
    cdef Py_ssize_t[::1] tree_arcs = tree_arr
    cdef Py_ssize_t[::1] tree_pos = np.full(n_arcs, -1, dtype=np.intp)

    cdef Py_ssize_t[::1] deg = np.zeros(n_nodes, dtype=np.intp)
    cdef Py_ssize_t[::1] start = np.zeros(n_nodes + 1, dtype=np.intp)
    cdef Py_ssize_t[::1] adj = np.zeros(2 * (n_nodes - 1), dtype=np.intp)
    cdef Py_ssize_t[::1] parent = np.full(n_nodes, -1, dtype=np.intp)
    cdef Py_ssize_t[::1] pred = np.full(n_nodes, -1, dtype=np.intp)
    cdef Py_ssize_t[::1] depth = np.zeros(n_nodes, dtype=np.intp)
    pi_arr = np.zeros(n_nodes, dtype=np.float64)
    cdef double[::1] pi = pi_arr
    cdef Py_ssize_t[::1] order = np.zeros(n_nodes, dtype=np.intp)
    cdef Py_ssize_t[::1] path_u = np.zeros(n_nodes, dtype=np.intp)
    cdef Py_ssize_t[::1] path_v = np.zeros(n_nodes, dtype=np.intp)
    cdef double[::1] excess = np.zeros(n_nodes, dtype=np.float64)

    cdef Py_ssize_t i, j, k, x, y, u, v, nu, nv, idx, entering, leaving
    cdef Py_ssize_t block, next_arc, scanned, end, n_pivots = 0
    cdef int status = STATUS_OPTIMAL
    cdef double best, rc, theta, c

    for i in range(m):
        k = n_real + i
        flow[k] = av[i]
        in_tree[k] = 1
        tree_arcs[i] = k
        tree_pos[k] = i
    for j in range(n):
        k = n_real + m + j
        flow[k] = bv[j]
        in_tree[k] = 1
        tree_arcs[m + j] = k
        tree_pos[k] = m + j

    block = <Py_ssize_t>sqrt(<double>n_arcs)
    if block < 10:
        block = 10
    next_arc = 0

    with nogil:
        _rebuild(n_nodes, m, n, n_real, root, big_m, cost, tree_arcs, deg,
                 start, adj, parent, pred, depth, pi, order)
        while True:
            if max_iter and n_pivots >= max_iter:
                status = STATUS_MAX_ITER
                break
            entering = -1
            best = -tol
            scanned = 0
            k = next_arc
            while scanned < n_arcs:
                end = scanned + block
                if end > n_arcs:
                    end = n_arcs
                while scanned < end:
                    if not in_tree[k]:
                        c = cost[k] if k < n_real else big_m
                        rc = (c + pi[_tail(k, m, n, n_real, root)]
                              - pi[_head(k, m, n, n_real, root)])
                        if rc < best:
                            best = rc
                            entering = k
                    k += 1
                    if k == n_arcs:
                        k = 0
                    scanned += 1
                if entering >= 0:
                    break
            if entering < 0:
                break
            next_arc = k

            u = _tail(entering, m, n, n_real, root)
            v = _head(entering, m, n, n_real, root)
            nu = 0
            nv = 0
            x = u
            y = v
            while x != y:
                if depth[x] >= depth[y]:
                    path_u[nu] = x
                    nu += 1
                    x = parent[x]
                else:
                    path_v[nv] = y
                    nv += 1
                    y = parent[y]

            theta = INFINITY
            for idx in range(nv):
                x = path_v[idx]
                k = pred[x]
                if _tail(k, m, n, n_real, root) != x and flow[k] < theta:
                    theta = flow[k]
            for idx in range(nu):
                x = path_u[idx]
                k = pred[x]
                if _tail(k, m, n, n_real, root) == x and flow[k] < theta:
                    theta = flow[k]

            leaving = -1
            for idx in range(nv):
                x = path_v[idx]
                k = pred[x]
                if _tail(k, m, n, n_real, root) != x and flow[k] == theta:
                    leaving = k
            if leaving < 0:
                for idx in range(nu):
                    x = path_u[idx]
                    k = pred[x]
                    if _tail(k, m, n, n_real, root) == x and flow[k] == theta:
                        leaving = k
                        break

            if theta > 0.0:
                for idx in range(nv):
                    x = path_v[idx]
                    k = pred[x]
                    if _tail(k, m, n, n_real, root) == x:
                        flow[k] += theta
                    else:
                        flow[k] -= theta
                for idx in range(nu):
                    x = path_u[idx]
                    k = pred[x]
                    if _tail(k, m, n, n_real, root) == x:
                        flow[k] -= theta
                    else:
                        flow[k] += theta
            flow[entering] = theta
            flow[leaving] = 0.0
            in_tree[leaving] = 0
            in_tree[entering] = 1
            idx = tree_pos[leaving]
            tree_arcs[idx] = entering
            tree_pos[entering] = idx
            tree_pos[leaving] = -1
            _rebuild(n_nodes, m, n, n_real, root, big_m, cost, tree_arcs, deg,
                     start, adj, parent, pred, depth, pi, order)
            n_pivots += 1

        for i in range(m):
            excess[i] = av[i]
        for j in range(n):
            excess[m + j] = -bv[j]
        for idx in range(n_nodes - 1, 0, -1):
            x = order[idx]
            k = pred[x]
            if _tail(k, m, n, n_real, root) == x:
                flow[k] = excess[x]
            else:
                flow[k] = -excess[x]
            if flow[k] < 0.0:
                flow[k] = 0.0
            excess[parent[x]] += excess[x]

    plan = flow_arr[:n_real].reshape(m, n).copy()
    f = -pi_arr[:m].copy()
    g = pi_arr[m:m + n].copy()
    return plan, f, g, int(n_pivots), int(status)


cdef double _violation(const double[::1] log_a, const double[::1] log_b,
                       const double[:, ::1] C, double eps,
                       const double[::1] f, const double[::1] g,
                       double[::1] colsum) noexcept nogil:
    cdef Py_ssize_t m = C.shape[0]
    cdef Py_ssize_t n = C.shape[1]
    cdef Py_ssize_t i, j
    cdef double s, p, total = 0.0
    for j in range(n):
        colsum[j] = 0.0
    for i in range(m):
        s = 0.0
        for j in range(n):
            p = exp((f[i] + g[j] - C[i, j]) / eps)
            s += p
            colsum[j] += p
        total += fabs(s - exp(log_a[i]))
    for j in range(n):
        total += fabs(colsum[j] - exp(log_b[j]))
    return total


def sinkhorn_log(log_a, log_b, C, double eps, double[::1] f, double[::1] g,
                 Py_ssize_t max_iter, double tol, Py_ssize_t check_every=10):
    cdef const double[::1] la = np.ascontiguousarray(log_a, dtype=np.float64)
    cdef const double[::1] lb = np.ascontiguousarray(log_b, dtype=np.float64)
    cdef const double[:, ::1] Cv = np.ascontiguousarray(C, dtype=np.float64)
    cdef Py_ssize_t m = Cv.shape[0]
    cdef Py_ssize_t n = Cv.shape[1]
    cdef double[::1] colmax = np.empty(n, dtype=np.float64)
    cdef double[::1] colsum = np.empty(n, dtype=np.float64)
    cdef Py_ssize_t i, j, it = 0
    cdef double mx, s, z, violation = INFINITY
    cdef double inv = 1.0 / eps

    with nogil:
        while it < max_iter:
            for i in range(m):
                mx = -INFINITY
                for j in range(n):
                    z = (g[j] - Cv[i, j]) * inv
                    if z > mx:
                        mx = z
                s = 0.0
                for j in range(n):
                    s += exp((g[j] - Cv[i, j]) * inv - mx)
                f[i] = eps * la[i] - eps * (mx + log(s))
            for j in range(n):
                colmax[j] = -INFINITY
                colsum[j] = 0.0
            for i in range(m):
                for j in range(n):
                    z = (f[i] - Cv[i, j]) * inv
                    if z > colmax[j]:
                        colmax[j] = z
            for i in range(m):
                for j in range(n):
                    colsum[j] += exp((f[i] - Cv[i, j]) * inv - colmax[j])
            for j in range(n):
                g[j] = eps * lb[j] - eps * (colmax[j] + log(colsum[j]))
            it += 1
            if it % check_every == 0 or it == max_iter:
                violation = _violation(la, lb, Cv, eps, f, g, colsum)
                if violation <= tol:
                    break
    return int(it), float(violation)


def marginal_violation_log(log_a, log_b, C, double eps, f, g):
    cdef const double[:, ::1] Cv = np.ascontiguousarray(C, dtype=np.float64)
    cdef double[::1] colsum = np.empty(Cv.shape[1], dtype=np.float64)
    return float(_violation(np.ascontiguousarray(log_a, dtype=np.float64),
                            np.ascontiguousarray(log_b, dtype=np.float64),
                            Cv, eps,
                            np.ascontiguousarray(f, dtype=np.float64),
                            np.ascontiguousarray(g, dtype=np.float64),
                            colsum))
