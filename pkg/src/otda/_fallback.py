"""Pure-Python implementations of the numerical kernels.

These mirror ``otda._kernels`` line for line and are used when the compiled
extension is unavailable (or when ``OTDA_PURE_PYTHON=1``).
"""

import math

import numpy as np
from scipy.special import logsumexp

STATUS_OPTIMAL = 0
STATUS_MAX_ITER = 1


def network_simplex(a, b, C, max_iter=0):
    """Exact transportation LP by primal network simplex.

    The bipartite transport graph is augmented with an artificial root node
    joined to every row (supply) and column (demand) node by big-M arcs; the
    all-artificial starting tree is strongly feasible and Cunningham's
    leaving-arc rule keeps it so, which rules out cycling on degenerate
    pivots.

    Parameters
    ----------
    a : ndarray, shape (m,)
        Positive source weights.
    b : ndarray, shape (n,)
        Positive target weights, same total mass as ``a``.
    C : ndarray, shape (m, n)
        Nonnegative cost matrix.
    max_iter : int
        Pivot cap, 0 for unlimited.

    Returns
    -------
    flow : ndarray, shape (m, n)
    f, g : ndarray
        Dual potentials with ``f[i] + g[j] <= C[i, j]``.
    n_pivots : int
    status : int
        0 when optimal, 1 when the pivot cap was hit.
    """
    a = [float(x) for x in a]
    b = [float(x) for x in b]
    C = np.ascontiguousarray(C, dtype=np.float64)
    m, n = len(a), len(b)
    cost = C.ravel().tolist()
    n_real = m * n
    n_arcs = n_real + m + n
    root = m + n
    n_nodes = m + n + 1
    big_m = (max(cost) if cost else 0.0) + 1.0
    tol = 1e-12 * big_m

    def tail(k):
        if k < n_real:
            return k // n
        if k < n_real + m:
            return k - n_real
        return root

    def head(k):
        if k < n_real:
            return m + k % n
        if k < n_real + m:
            return root
        return m + (k - n_real - m)

    def arc_cost(k):
        return cost[k] if k < n_real else big_m

    flow = [0.0] * n_arcs
    in_tree = [False] * n_arcs
    tree_arcs = []
    for i in range(m):
        k = n_real + i
        flow[k] = a[i]
        in_tree[k] = True
        tree_arcs.append(k)
    for j in range(n):
        k = n_real + m + j
        flow[k] = b[j]
        in_tree[k] = True
        tree_arcs.append(k)

    parent = [-1] * n_nodes
    pred = [-1] * n_nodes
    depth = [0] * n_nodes
    pi = [0.0] * n_nodes
    order = [0] * n_nodes

    def rebuild():
        adj = [[] for _ in range(n_nodes)]
        for k in tree_arcs:
            adj[tail(k)].append(k)
            adj[head(k)].append(k)
        parent[root] = -1
        pred[root] = -1
        depth[root] = 0
        pi[root] = 0.0
        order[0] = root
        lo, hi = 0, 1
        while lo < hi:
            x = order[lo]
            lo += 1
            for k in adj[x]:
                if k == pred[x]:
                    continue
                t = tail(k)
                y = head(k) if t == x else t
                parent[y] = x
                pred[y] = k
                depth[y] = depth[x] + 1
                if t == x:
                    pi[y] = pi[x] + arc_cost(k)
                else:
                    pi[y] = pi[x] - arc_cost(k)
                order[hi] = y
                hi += 1

    rebuild()
    block = max(int(math.sqrt(n_arcs)), 10)
    next_arc = 0
    n_pivots = 0
    status = STATUS_OPTIMAL

    while True:
        if max_iter and n_pivots >= max_iter:
            status = STATUS_MAX_ITER
            break
        # block search pricing
        entering = -1
        best = -tol
        scanned = 0
        k = next_arc
        while scanned < n_arcs:
            end = min(scanned + block, n_arcs)
            while scanned < end:
                if not in_tree[k]:
                    rc = arc_cost(k) + pi[tail(k)] - pi[head(k)]
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

        u, v = tail(entering), head(entering)
        # climb to the apex
        path_u, path_v = [], []
        x, y = u, v
        while x != y:
            if depth[x] >= depth[y]:
                path_u.append(x)
                x = parent[x]
            else:
                path_v.append(y)
                y = parent[y]

        theta = math.inf
        for x in path_v:
            k = pred[x]
            if tail(k) != x and flow[k] < theta:
                theta = flow[k]
        for x in path_u:
            k = pred[x]
            if tail(k) == x and flow[k] < theta:
                theta = flow[k]

        # Cunningham: last blocking arc met when walking the cycle from the apex
        leaving = -1
        for x in path_v:
            k = pred[x]
            if tail(k) != x and flow[k] == theta:
                leaving = k
        if leaving < 0:
            for x in path_u:
                k = pred[x]
                if tail(k) == x and flow[k] == theta:
                    leaving = k
                    break

        if theta > 0.0:
            for x in path_v:
                k = pred[x]
                if tail(k) == x:
                    flow[k] += theta
                else:
                    flow[k] -= theta
            for x in path_u:
                k = pred[x]
                if tail(k) == x:
                    flow[k] -= theta
                else:
                    flow[k] += theta
        flow[entering] = theta
        flow[leaving] = 0.0
        in_tree[leaving] = False
        in_tree[entering] = True
        tree_arcs[tree_arcs.index(leaving)] = entering
        rebuild()
        n_pivots += 1

    # recompute tree flows from the marginals to shed accumulated rounding
    excess = [0.0] * n_nodes
    for i in range(m):
        excess[i] = a[i]
    for j in range(n):
        excess[m + j] = -b[j]
    for idx in range(n_nodes - 1, 0, -1):
        x = order[idx]
        k = pred[x]
        if tail(k) == x:
            flow[k] = excess[x]
        else:
            flow[k] = -excess[x]
        if flow[k] < 0.0:
            flow[k] = 0.0
        excess[parent[x]] += excess[x]

    plan = np.array(flow[:n_real], dtype=np.float64).reshape(m, n)
    f = -np.array(pi[:m], dtype=np.float64)
    g = np.array(pi[m:m + n], dtype=np.float64)
    return plan, f, g, n_pivots, status


def sinkhorn_log(log_a, log_b, C, eps, f, g, max_iter, tol, check_every=10):
    """Log-domain Sinkhorn sweeps on dual potentials.

    Updates ``f`` and ``g`` in place and stops once the L1 marginal
    violation (rows plus columns) falls to ``tol``.

    Returns
    -------
    n_iter : int
    violation : float
    """
    C = np.asarray(C, dtype=np.float64)
    violation = math.inf
    it = 0
    while it < max_iter:
        f[:] = eps * log_a - eps * logsumexp((g[None, :] - C) / eps, axis=1)
        g[:] = eps * log_b - eps * logsumexp((f[:, None] - C) / eps, axis=0)
        it += 1
        if it % check_every == 0 or it == max_iter:
            violation = marginal_violation_log(log_a, log_b, C, eps, f, g)
            if violation <= tol:
                break
    return it, violation


def marginal_violation_log(log_a, log_b, C, eps, f, g):
    P = np.exp((f[:, None] + g[None, :] - C) / eps)
    return float(np.abs(P.sum(axis=1) - np.exp(log_a)).sum()
                 + np.abs(P.sum(axis=0) - np.exp(log_b)).sum())
