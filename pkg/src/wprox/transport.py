"""Exact quadratic-cost optimal transport between discrete measures.

The Kantorovich problem between two finitely supported measures is a
transportation LP.  :func:`solve_w2` solves it with a primal network simplex
on the bipartite row/column graph and certifies the result with the dual
potentials the simplex carries along.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import (
    DimensionMismatch,
    MarginalViolation,
    PlanNotOptimal,
    SolverFailure,
    TOutOfRange,
    ZeroWeightRow,
)
from .measures import DiscreteMeasure, PointMap, canonicalize

FEAS_TOL = 1e-9
GAP_TOL = 1e-9


def sq_dist_matrix(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Pairwise squared Euclidean distances, computed from differences."""
    diff = x[:, None, :] - y[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


@dataclass(frozen=True, eq=False)
class TransportPlan:
    """A coupling between ``source`` and ``target`` with its quadratic cost.

    ``u``/``v`` are dual potentials when the plan came out of the solver;
    ``gap`` is then the certified optimality gap (primal minus dual plus
    the largest dual infeasibility).
    """

    source: DiscreteMeasure
    target: DiscreteMeasure
    matrix: np.ndarray
    cost: float
    u: Optional[np.ndarray] = None
    v: Optional[np.ndarray] = None
    gap: Optional[float] = None

    def __post_init__(self):
        P = np.array(self.matrix, dtype=float)
        if P.shape != (self.source.size, self.target.size):
            raise DimensionMismatch(f"plan shape {P.shape} vs marginals {self.source.size}x{self.target.size}")
        if np.any(P < 0):
            raise MarginalViolation(f"negative plan entry {P.min()}")
        if np.max(np.abs(P.sum(axis=1) - self.source.weights)) > FEAS_TOL:
            raise MarginalViolation("row sums differ from source weights")
        if np.max(np.abs(P.sum(axis=0) - self.target.weights)) > FEAS_TOL:
            raise MarginalViolation("column sums differ from target weights")
        P.setflags(write=False)
        object.__setattr__(self, "matrix", P)
        recomputed = plan_cost(self.source, self.target, P)
        if abs(recomputed - self.cost) > FEAS_TOL:
            raise ValueError(f"declared cost {self.cost} but plan costs {recomputed}")

    @property
    def w2(self) -> float:
        return float(np.sqrt(max(self.cost, 0.0)))

    @property
    def certified(self) -> bool:
        return self.gap is not None and self.gap <= GAP_TOL * (1.0 + self.cost)

    def to_dict(self) -> dict:
        return {"cost": self.cost, "matrix": self.matrix.tolist()}


def plan_cost(mu: DiscreteMeasure, nu: DiscreteMeasure, P: np.ndarray) -> float:
    return float(np.sum(P * sq_dist_matrix(mu.points, nu.points)))


class _TransportSimplex:
    """Primal network simplex for ``min <C, X>`` over the transportation polytope.

    Nodes ``0..n-1`` are rows, ``n..n+m-1`` columns.  The basis is a spanning
    tree of ``n+m-1`` cells (degenerate zero-flow cells included).  Entering
    cells are chosen by Dantzig's rule.  Bases visited during a run of
    degenerate pivots are remembered; if one repeats, the solver switches
    for good to Bland's smallest-index rule for both the entering and the
    leaving cell, under which the simplex cannot cycle.
    """

    def __init__(self, a, b, C, max_pivots=None, bland=False):
        self.a, self.b, self.C = a, b, C
        self.n, self.m = C.shape
        self.max_pivots = max_pivots or 50 * (self.n + self.m) ** 2 + 1000
        self.bland = bland
        scale = 1.0 + float(np.max(C)) if C.size else 1.0
        self.eps = 1e-13 * scale
        self.X = np.zeros_like(C)
        self.basic = np.zeros(C.shape, dtype=bool)
        self.adj = [set() for _ in range(self.n + self.m)]
        self.pivots = 0
        self.switched_to_bland = False

    def _add(self, i, j):
        self.basic[i, j] = True
        self.adj[i].add(self.n + j)
        self.adj[self.n + j].add(i)

    def _remove(self, i, j):
        self.basic[i, j] = False
        self.adj[i].discard(self.n + j)
        self.adj[self.n + j].discard(i)

    def _northwest_corner(self):
        ra, rb = self.a.copy(), self.b.copy()
        i = j = 0
        n, m = self.n, self.m
        while True:
            q = min(ra[i], rb[j])
            self.X[i, j] = q
            self._add(i, j)
            ra[i] -= q
            rb[j] -= q
            if i == n - 1 and j == m - 1:
                break
            if i == n - 1:
                j += 1
            elif j == m - 1:
                i += 1
            elif ra[i] <= rb[j]:
                i += 1
            else:
                j += 1

    def _tree(self):
        """Potentials, parent pointers and depths from a BFS rooted at row 0."""
        N = self.n + self.m
        pot = np.zeros(N)
        parent = np.full(N, -1)
        depth = np.zeros(N, dtype=int)
        seen = np.zeros(N, dtype=bool)
        seen[0] = True
        queue = deque([0])
        while queue:
            p = queue.popleft()
            for q in self.adj[p]:
                if seen[q]:
                    continue
                seen[q] = True
                parent[q] = p
                depth[q] = depth[p] + 1
                # u_i + v_j = C_ij on basic cells
                i, j = (p, q - self.n) if p < self.n else (q, p - self.n)
                pot[q] = self.C[i, j] - pot[p]
                queue.append(q)
        if not seen.all():
            raise SolverFailure("basis is not a spanning tree")
        return pot[: self.n], pot[self.n:], parent, depth

    def _cycle(self, i, j, parent, depth):
        """Cells of the tree path from column ``j`` to row ``i``, in order."""
        left, right = self.n + j, i
        head, tail = [], []
        while left != right:
            if depth[left] >= depth[right]:
                head.append((left, parent[left]))
                left = parent[left]
            else:
                tail.append((parent[right], right))
                right = parent[right]
        edges = head + tail[::-1]
        cells = []
        for p, q in edges:
            cells.append((p, q - self.n) if p < self.n else (q, p - self.n))
        return cells

    def solve(self):
        self._northwest_corner()
        bland = self.bland
        degenerate_bases = set()
        while True:
            u, v, parent, depth = self._tree()
            R = self.C - u[:, None] - v[None, :]
            R[self.basic] = 0.0
            if bland:
                hits = np.flatnonzero(R.ravel() < -self.eps)
                if hits.size == 0:
                    break
                k = int(hits[0])
            else:
                k = int(np.argmin(R))
                if R.flat[k] >= -self.eps:
                    break
            if self.pivots >= self.max_pivots:
                raise SolverFailure(f"no optimum after {self.pivots} pivots")
            ei, ej = divmod(k, self.m)
            path = self._cycle(ei, ej, parent, depth)
            # path alternates -, +, -, ... starting next to the entering cell
            minus = path[0::2]
            plus = path[1::2]
            theta = min(self.X[c] for c in minus)
            ties = [c for c in minus if self.X[c] == theta]
            leave = min(ties) if bland else ties[0]
            for c in minus:
                self.X[c] -= theta
            for c in plus:
                self.X[c] += theta
            self.X[ei, ej] += theta
            self.X[leave] = 0.0
            self._remove(*leave)
            self._add(ei, ej)
            self.pivots += 1
            if theta == 0.0 and not bland:
                key = self.basic.tobytes()
                if key in degenerate_bases:
                    bland = self.switched_to_bland = True
                degenerate_bases.add(key)
            else:
                degenerate_bases.clear()
        u, v, _, _ = self._tree()
        return self.X, u, v


def solve_w2(mu: DiscreteMeasure, nu: DiscreteMeasure) -> TransportPlan:
    """Optimal plan for the squared-Euclidean cost; ``W2 = sqrt(plan.cost)``.

    The returned plan carries dual potentials and a certified gap.  A gap
    above ``1e-9 * (1 + cost)`` raises :class:`SolverFailure`.
    """
    if mu.dim != nu.dim:
        raise DimensionMismatch(f"R^{mu.dim} vs R^{nu.dim}")
    C = sq_dist_matrix(mu.points, nu.points)
    # Sorting both sides along the first coordinate makes the northwest
    # corner start exact in 1-d and a good start otherwise.
    ri = np.lexsort(mu.points.T[::-1])
    ci = np.lexsort(nu.points.T[::-1])
    simplex = _TransportSimplex(mu.weights[ri], nu.weights[ci], C[np.ix_(ri, ci)])
    Xs, us, vs = simplex.solve()
    X = np.empty_like(Xs)
    X[np.ix_(ri, ci)] = Xs
    u = np.empty_like(us)
    u[ri] = us
    v = np.empty_like(vs)
    v[ci] = vs
    cost = float(np.sum(X * C))
    dual = float(mu.weights @ u + nu.weights @ v)
    infeas = max(0.0, -float(np.min(C - u[:, None] - v[None, :])))
    gap = abs(cost - dual) + infeas
    if gap > GAP_TOL * (1.0 + cost):
        raise SolverFailure(f"duality gap {gap:.3e} exceeds tolerance at cost {cost:.6g}")
    u.setflags(write=False)
    v.setflags(write=False)
    return TransportPlan(mu, nu, X, cost, u=u, v=v, gap=gap)


def w2_squared(mu: DiscreteMeasure, nu: DiscreteMeasure) -> float:
    return solve_w2(mu, nu).cost


def w2(mu: DiscreteMeasure, nu: DiscreteMeasure) -> float:
    return solve_w2(mu, nu).w2


def map_induced_plan(mu: DiscreteMeasure, T: PointMap) -> TransportPlan:
    """The plan ``(Id, T)_# mu`` between ``mu`` and ``T_# mu``.

    Always feasible, not necessarily optimal.  The target keeps one atom per
    source atom (no merging), so the matrix is diagonal.
    """
    if T.dim != mu.dim:
        raise DimensionMismatch(f"map acts on R^{T.dim}, measure lives in R^{mu.dim}")
    images = np.array([T(p) for p in mu.points])
    target = DiscreteMeasure(images, mu.weights)
    P = np.diag(mu.weights)
    return TransportPlan(mu, target, P, plan_cost(mu, target, P))


def _require_optimal(plan: TransportPlan):
    if plan.certified:
        return
    best = solve_w2(plan.source, plan.target).cost
    if plan.cost > best + GAP_TOL * (1.0 + best):
        raise PlanNotOptimal(f"plan cost {plan.cost} exceeds optimum {best}")


def _check_t(t: float):
    if not 0.0 <= t <= 1.0:
        raise TOutOfRange(f"t={t} outside [0, 1]")


def geodesic(plan: TransportPlan, t: float) -> DiscreteMeasure:
    """Displacement interpolation ``((1-t) x + t y)_# plan`` along an optimal plan."""
    _check_t(t)
    _require_optimal(plan)
    i, j = np.nonzero(plan.matrix > 0)
    pts = (1.0 - t) * plan.source.points[i] + t * plan.target.points[j]
    w = plan.matrix[i, j]
    return canonicalize(DiscreteMeasure(pts, w / w.sum()))


def geodesic_between(mu: DiscreteMeasure, nu: DiscreteMeasure, t: float) -> DiscreteMeasure:
    return geodesic(solve_w2(mu, nu), t)


@dataclass(frozen=True, eq=False)
class ThreePlan:
    """Coupling of three measures whose (0,1) and (0,2) projections are optimal."""

    mu0: DiscreteMeasure
    mu1: DiscreteMeasure
    mu2: DiscreteMeasure
    tensor: np.ndarray

    def __post_init__(self):
        P = np.array(self.tensor, dtype=float)
        if P.shape != (self.mu0.size, self.mu1.size, self.mu2.size):
            raise DimensionMismatch(f"tensor shape {P.shape} does not match marginals")
        if np.any(P < 0):
            raise MarginalViolation("negative tensor entry")
        for axes, m in (((1, 2), self.mu0), ((0, 2), self.mu1), ((0, 1), self.mu2)):
            if np.max(np.abs(P.sum(axis=axes) - m.weights)) > FEAS_TOL:
                raise MarginalViolation(f"marginal over axes {axes} mismatch")
        P.setflags(write=False)
        object.__setattr__(self, "tensor", P)

    def projection(self, j: int, k: int) -> TransportPlan:
        measures = (self.mu0, self.mu1, self.mu2)
        drop = ({0, 1, 2} - {j, k}).pop()
        P = self.tensor.sum(axis=drop)
        if j > k:
            P = P.T
        return TransportPlan(measures[j], measures[k], P, plan_cost(measures[j], measures[k], P))

    def check_optimal_projections(self, tol: float = 1e-8) -> bool:
        for k in (1, 2):
            proj = self.projection(0, k)
            if abs(proj.cost - solve_w2(proj.source, proj.target).cost) > tol:
                return False
        return True


def build_three_plan(mu0: DiscreteMeasure, mu1: DiscreteMeasure, mu2: DiscreteMeasure) -> ThreePlan:
    """Glue two optimal plans over the common base ``mu0``.

    ``tensor[i, j, k] = p01[i, j] * p02[i, k] / w0[i]``: the conditional laws
    of the two other coordinates given the base atom are taken independent.
    """
    if not (mu0.dim == mu1.dim == mu2.dim):
        raise DimensionMismatch("all three measures must share a dimension")
    p01 = solve_w2(mu0, mu1).matrix
    p02 = solve_w2(mu0, mu2).matrix
    w0 = mu0.weights
    inv = np.divide(1.0, w0, out=np.zeros_like(w0), where=w0 > 0)
    tensor = p01[:, :, None] * p02[:, None, :] * inv[:, None, None]
    return ThreePlan(mu0, mu1, mu2, tensor)


def generalized_geodesic(three: ThreePlan, t: float) -> DiscreteMeasure:
    """Push the three-plan forward under ``(x0, x1, x2) -> (1-t) x1 + t x2``."""
    _check_t(t)
    P = three.tensor
    for axes, m in (((1, 2), three.mu0), ((0, 2), three.mu1), ((0, 1), three.mu2)):
        if np.max(np.abs(P.sum(axis=axes) - m.weights)) > FEAS_TOL:
            raise MarginalViolation(f"marginal over axes {axes} mismatch")
    _, j, k = np.nonzero(P > 0)
    w = P[P > 0]
    pts = (1.0 - t) * three.mu1.points[j] + t * three.mu2.points[k]
    return canonicalize(DiscreteMeasure(pts, w / w.sum()))


@dataclass(frozen=True, eq=False)
class Disintegration:
    """Conditional laws ``nu_{x_i}`` of a plan given each source atom."""

    plan: TransportPlan
    conditionals: dict  # source index -> DiscreteMeasure on target.points
    skipped: tuple  # zero-mass source indices

    def reassemble(self) -> np.ndarray:
        """Rebuild the plan matrix as ``w_i * nu_{x_i}(y_j)``."""
        P = np.zeros_like(self.plan.matrix)
        w = self.plan.source.weights
        for i, cond in self.conditionals.items():
            P[i] = w[i] * cond.weights
        return P

    def mass_in(self, member) -> dict:
        """``nu_{x_i}(S)`` per source atom for a membership predicate of ``S``."""
        inside = np.array([bool(member(y)) for y in self.plan.target.points])
        return {i: float(c.weights[inside].sum()) for i, c in self.conditionals.items()}


def disintegrate(plan: TransportPlan) -> Disintegration:
    """Normalize each row of the plan by its source weight.

    Conditionals are kept on the full target support (no canonicalization)
    so that reassembly is exact.  Zero-mass rows are skipped and listed in
    ``skipped``; a :class:`ZeroWeightRow` warning is issued for them.
    """
    import warnings

    w = plan.source.weights
    conds = {}
    skipped = []
    for i in range(plan.source.size):
        if w[i] <= 0.0:
            skipped.append(i)
            continue
        row = plan.matrix[i] / w[i]
        row = row / row.sum()
        conds[i] = DiscreteMeasure(plan.target.points, row)
    if skipped:
        warnings.warn(f"skipped zero-weight source atoms {skipped}", ZeroWeightRow, stacklevel=2)
    return Disintegration(plan, conds, tuple(skipped))
