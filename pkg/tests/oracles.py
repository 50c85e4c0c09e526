"""Independent reference solvers used by the tests.

None of these touch the package's solvers: transport problems are solved by
enumeration (permutations or basic feasible solutions) or by HiGHS.
"""

import itertools

import numpy as np
from scipy.optimize import linprog
from scipy.spatial.distance import cdist


def permutation_oracle(C):
    """Uniform square problem: the optimum is a permutation (Birkhoff)."""
    n = C.shape[0]
    perms = np.array(list(itertools.permutations(range(n))))
    totals = C[np.arange(n), perms].sum(axis=1)
    return float(totals.min()) / n


def _constraints(m, n):
    A = np.zeros((m + n, m * n))
    for i in range(m):
        A[i, i * n:(i + 1) * n] = 1.0
    for j in range(n):
        A[m + j, j::n] = 1.0
    return A


def vertex_oracle(a, b, C, tol=1e-12):
    """Minimum over every basic feasible solution of the transportation LP."""
    m, n = C.shape
    A = _constraints(m, n)[:-1]  # one equality is redundant
    rhs = np.r_[a, b][:-1]
    c = C.ravel()
    best = np.inf
    for basis in itertools.combinations(range(m * n), m + n - 1):
        B = A[:, basis]
        if abs(np.linalg.det(B)) < 1e-12:
            continue
        x = np.linalg.solve(B, rhs)
        if np.all(x >= -tol):
            best = min(best, float(c[list(basis)] @ x))
    return best


def highs_oracle(a, b, C):
    m, n = C.shape
    res = linprog(C.ravel(), A_eq=_constraints(m, n), b_eq=np.r_[a, b],
                  bounds=(0, None), method="highs",
                  options={"primal_feasibility_tolerance": 1e-10,
                           "dual_feasibility_tolerance": 1e-10})
    assert res.status == 0
    return float(res.fun)


def euclid(X, Y):
    return cdist(X, Y)


def in_convex_hull(points, hull_points):
    """LP feasibility: is each point a convex combination of hull_points?"""
    V = np.asarray(hull_points, dtype=float)
    k = V.shape[0]
    A_eq = np.vstack([V.T, np.ones((1, k))])
    out = []
    for p in np.asarray(points, dtype=float):
        res = linprog(np.zeros(k), A_eq=A_eq, b_eq=np.r_[p, 1.0],
                      bounds=(0, None), method="highs")
        out.append(res.status == 0)
    return np.array(out)
