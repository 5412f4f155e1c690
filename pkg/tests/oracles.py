"""Independent reference computations used by the tests.

None of these touch the package's transport solver.
"""

import itertools

import numpy as np
from scipy.optimize import linprog


def sq_costs(x, y):
    x, y = np.asarray(x, float), np.asarray(y, float)
    return ((x[:, None, :] - y[None, :, :]) ** 2).sum(-1)


def assignment_bruteforce(mu, nu):
    """Minimum over all n! matchings of two uniform n-atom measures."""
    n = mu.size
    C = sq_costs(mu.points, nu.points)
    return min(C[np.arange(n), list(p)].sum() for p in itertools.permutations(range(n))) / n


def lp_cost(mu, nu):
    """Transportation LP solved by HiGHS."""
    n, m = mu.size, nu.size
    C = sq_costs(mu.points, nu.points)
    A = np.zeros((n + m, n * m))
    for i in range(n):
        A[i, i * m:(i + 1) * m] = 1.0
    for j in range(m):
        A[n + j, j::m] = 1.0
    res = linprog(C.ravel(), A_eq=A, b_eq=np.concatenate([mu.weights, nu.weights]),
                  bounds=(0, None), method="highs")
    assert res.status == 0
    return float(res.fun)


def two_by_two_vertices(a, b, C):
    """Cost at every vertex of the 2x2 transportation polytope.

    The polytope is the segment p = pi[0,0] in [max(0, a0 - b1), min(a0, b0)].
    """
    out = []
    for p in (max(0.0, a[0] - b[1]), min(a[0], b[0])):
        P = np.array([[p, a[0] - p], [b[0] - p, b[1] - a[0] + p]])
        out.append((float((P * C).sum()), P))
    return out
