"""Energy functionals on discrete measures.

Built-ins are the potential energy ``F(mu) = sum_i w_i V(x_i)`` and the
interaction energy ``F(mu) = 1/2 sum_ij w_i w_j W(x_i - x_j)``, plus finite
sums of these.  Every built-in is finite on all of P2 and bounded below.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import AsymmetricKernel, DeclaredBoundViolated, DimensionMismatch
from .measures import DiscreteMeasure, dirac
from .reports import CheckReport
from .transport import build_three_plan, generalized_geodesic, w2

GG_TOL = 1e-8
DEFAULT_T_GRID = tuple(np.round(np.linspace(0.0, 1.0, 11), 12))

Energy = Callable[[np.ndarray, np.ndarray], float]
PositionGrad = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True, eq=False)
class Functional:
    """An evaluatable energy with optional metadata.

    ``energy(points, weights)`` and ``position_grad(points, weights)`` act on
    raw atom arrays so that the prox solver can move atoms without building
    measures.  ``position_grad`` returns the derivative of the energy with
    respect to each atom position (shape ``(n, d)``).

    ``pointwise_prox(x, tau)`` is the Euclidean prox of the potential ``V``
    applied row-wise to an ``(n, d)`` array; only potential energies have one.
    ``argmin_witnesses(dim)`` lists known minimizers, when they are known.
    """

    kind: str
    energy: Energy
    position_grad: Optional[PositionGrad] = None
    lipschitz_bound: Optional[float] = None
    pointwise_prox: Optional[Callable[[np.ndarray, float], np.ndarray]] = None
    domain_note: str = "finite on all of P2"
    name: str = "custom"
    params: dict = field(default_factory=dict)
    parts: tuple = ()
    argmin_witnesses: Optional[Callable[[int], list]] = None

    def eval(self, mu: DiscreteMeasure) -> float:
        return float(self.energy(mu.points, mu.weights))

    __call__ = eval

    def to_spec(self) -> dict:
        if self.kind == "sum":
            return {"kind": "sum", "parts": [p.to_spec() for p in self.parts]}
        return {"kind": self.kind, "name": self.name, "params": _jsonable(self.params)}

    def __add__(self, other: "Functional") -> "Functional":
        return sum_functional([self, other])


def _jsonable(params: dict) -> dict:
    return {k: (v.tolist() if isinstance(v, np.ndarray) else v) for k, v in params.items()}


def _rowwise(f):
    def wrapped(x, *args):
        x = np.asarray(x, dtype=float)
        return np.array([f(row, *args) for row in x])

    return wrapped


def potential_energy(V, grad_V=None, pointwise_prox=None, *, lipschitz_bound=None,
                     vectorized=False, name="custom", params=None, argmin_witnesses=None,
                     domain_note="finite on all of P2") -> Functional:
    """``F(mu) = sum_i w_i V(x_i)``.

    With ``vectorized=False`` the callables take a single point (and ``tau``
    for the prox); otherwise they take an ``(n, d)`` array of points.
    """
    if not vectorized:
        V = _rowwise(V)
        grad_V = _rowwise(grad_V) if grad_V is not None else None
        pointwise_prox = _rowwise(pointwise_prox) if pointwise_prox is not None else None

    def energy(x, w):
        return float(w @ V(x))

    position_grad = None
    if grad_V is not None:
        def position_grad(x, w):
            return w[:, None] * grad_V(x)

    return Functional(
        kind="potential",
        energy=energy,
        position_grad=position_grad,
        lipschitz_bound=lipschitz_bound,
        pointwise_prox=pointwise_prox,
        domain_note=domain_note,
        name=name,
        params=params or {},
        argmin_witnesses=argmin_witnesses,
    )


def _check_even(W, vectorized: bool, n_samples: int = 16, seed: int = 0):
    rng = np.random.default_rng(seed)
    for d in (1, 2, 3):
        z = rng.normal(scale=2.0, size=(n_samples, d))
        try:
            if vectorized:
                a, b = np.asarray(W(z), dtype=float), np.asarray(W(-z), dtype=float)
            else:
                a = np.array([W(r) for r in z], dtype=float)
                b = np.array([W(-r) for r in z], dtype=float)
        except (ValueError, IndexError, TypeError):
            continue  # kernel defined for other dimensions only
        if not np.allclose(a, b, rtol=1e-12, atol=1e-12):
            k = int(np.argmax(np.abs(a - b)))
            raise AsymmetricKernel(f"W(z) != W(-z) at z={z[k].tolist()}: {a[k]} vs {b[k]}")


def interaction_energy(W, grad_W=None, *, vectorized=False, name="custom", params=None,
                       lipschitz_bound=None, argmin_witnesses=None) -> Functional:
    """``F(mu) = 1/2 sum_ij w_i w_j W(x_i - x_j)`` for an even kernel ``W``."""
    _check_even(W, vectorized)
    if not vectorized:
        W = _rowwise(W)
        grad_W = _rowwise(grad_W) if grad_W is not None else None

    def energy(x, w):
        n, d = x.shape
        z = (x[:, None, :] - x[None, :, :]).reshape(n * n, d)
        return float(0.5 * w @ W(z).reshape(n, n) @ w)

    position_grad = None
    if grad_W is not None:
        def position_grad(x, w):
            n, d = x.shape
            z = (x[:, None, :] - x[None, :, :]).reshape(n * n, d)
            g = grad_W(z).reshape(n, n, d)
            # W even => grad W odd, so both halves of the double sum agree
            return w[:, None] * np.einsum("l,jld->jd", w, g)

    return Functional(
        kind="interaction",
        energy=energy,
        position_grad=position_grad,
        lipschitz_bound=lipschitz_bound,
        name=name,
        params=params or {},
        argmin_witnesses=argmin_witnesses,
    )


def sum_functional(parts: Sequence[Functional]) -> Functional:
    parts = tuple(parts)
    if not parts:
        raise ValueError("empty sum")

    def energy(x, w):
        return float(sum(p.energy(x, w) for p in parts))

    position_grad = None
    if all(p.position_grad is not None for p in parts):
        def position_grad(x, w):
            return sum(p.position_grad(x, w) for p in parts)

    bounds = [p.lipschitz_bound for p in parts]
    bound = float(sum(bounds)) if all(b is not None for b in bounds) else None
    return Functional(
        kind="sum",
        energy=energy,
        position_grad=position_grad,
        lipschitz_bound=bound,
        pointwise_prox=parts[0].pointwise_prox if len(parts) == 1 else None,
        name="+".join(p.name for p in parts),
        parts=parts,
    )


def zero_functional() -> Functional:
    return Functional(
        kind="potential",
        energy=lambda x, w: 0.0,
        position_grad=lambda x, w: np.zeros_like(x),
        lipschitz_bound=0.0,
        pointwise_prox=lambda x, tau: np.array(x, dtype=float),
        name="zero",
    )


def constant_functional(c: float) -> Functional:
    return Functional(
        kind="potential",
        energy=lambda x, w: float(c),
        position_grad=lambda x, w: np.zeros_like(x),
        lipschitz_bound=0.0,
        pointwise_prox=lambda x, tau: np.array(x, dtype=float),
        name="constant",
        params={"c": float(c)},
    )


# -- built-ins ---------------------------------------------------------------

def quadratic_potential(a, A=None, radius=None) -> Functional:
    """``V(x) = 1/2 (x - a)^T A (x - a)`` with ``A`` symmetric PSD (default I).

    Passing ``radius`` declares the Lipschitz bound ``||A|| * radius``, valid
    for measures supported in the ball of that radius around ``a``.
    """
    a = np.atleast_1d(np.asarray(a, dtype=float))
    d = a.shape[0]
    A_ = np.eye(d) if A is None else np.asarray(A, dtype=float)
    if A_.shape != (d, d):
        raise DimensionMismatch(f"A must be {d}x{d}")
    if not np.allclose(A_, A_.T) or np.linalg.eigvalsh(A_).min() < -1e-12:
        raise ValueError("A must be symmetric positive semidefinite")
    a.setflags(write=False)
    A_.setflags(write=False)
    identity = A is None

    def V(x):
        r = x - a
        return 0.5 * np.einsum("ni,ij,nj->n", r, A_, r)

    def grad_V(x):
        return (x - a) @ A_

    def prox(x, tau):
        x = np.asarray(x, dtype=float)
        if identity:
            return (x + tau * a) / (1.0 + tau)
        M = np.eye(d) + tau * A_
        return np.linalg.solve(M, (x + tau * (A_ @ a)).T).T

    params = {"a": a.copy()}
    if not identity:
        params["A"] = A_.copy()
    bound = None
    note = "finite on all of P2"
    if radius is not None:
        params["radius"] = float(radius)
        bound = float(np.linalg.norm(A_, 2) * radius)
        note = f"Lipschitz bound valid on measures supported in the ball B(a, {radius})"
    return potential_energy(
        V, grad_V, prox, vectorized=True, lipschitz_bound=bound, name="quadratic",
        params=params, argmin_witnesses=lambda dim: [dirac(a)], domain_note=note,
    )


def distance_potential(a) -> Functional:
    """``V(x) = ||x - a||``; 1-Lipschitz, prox is shrinkage toward ``a``."""
    a = np.atleast_1d(np.asarray(a, dtype=float))
    a.setflags(write=False)

    def V(x):
        return np.linalg.norm(x - a, axis=-1)

    def grad_V(x):
        r = x - a
        nrm = np.linalg.norm(r, axis=-1, keepdims=True)
        return np.divide(r, nrm, out=np.zeros_like(r), where=nrm > 0)

    def prox(x, tau):
        r = np.asarray(x, dtype=float) - a
        nrm = np.linalg.norm(r, axis=-1, keepdims=True)
        scale = np.divide(np.maximum(nrm - tau, 0.0), nrm, out=np.zeros_like(nrm), where=nrm > 0)
        return a + scale * r

    return potential_energy(
        V, grad_V, prox, vectorized=True, lipschitz_bound=1.0, name="distance",
        params={"a": a.copy()}, argmin_witnesses=lambda dim: [dirac(a)],
    )


def _dirac_family(dim: int) -> list:
    pts = [np.zeros(dim)] + [np.eye(dim)[k] for k in range(dim)] + [np.full(dim, -1.5)]
    return [dirac(p) for p in pts]


def quadratic_interaction(scale: float = 1.0) -> Functional:
    """``W(z) = scale * ||z||^2``; the energy is ``scale`` times the variance.

    Every Dirac measure minimizes it.
    """
    if scale < 0:
        raise ValueError("scale must be nonnegative for convexity")

    def W(z):
        return scale * np.sum(z * z, axis=-1)

    def grad_W(z):
        return 2.0 * scale * z

    f = interaction_energy(W, grad_W, vectorized=True, name="quadratic",
                           params={"scale": float(scale)}, argmin_witnesses=_dirac_family)
    return f


BUILTINS = {
    ("potential", "quadratic"): lambda p: quadratic_potential(p["a"], p.get("A"), p.get("radius")),
    ("potential", "distance"): lambda p: distance_potential(p["a"]),
    ("interaction", "quadratic"): lambda p: quadratic_interaction(p.get("scale", 1.0)),
}


def functional_from_spec(spec: dict) -> Functional:
    """Build a functional from its JSON description.

    >>> functional_from_spec({"kind": "potential", "name": "distance", "params": {"a": [0]}}).name
    'distance'
    """
    kind = spec.get("kind")
    if kind == "sum":
        return sum_functional([functional_from_spec(p) for p in spec["parts"]])
    key = (kind, spec.get("name"))
    if key not in BUILTINS:
        raise KeyError(f"unknown functional {key}; known: {sorted(BUILTINS)}")
    return BUILTINS[key](spec.get("params", {}))


# -- checkers ----------------------------------------------------------------

@dataclass
class GGConvexityReport:
    """Outcome of a convexity test along one glued generalized geodesic.

    ``worst_violation`` is ``max_t F(mu_t) - [(1-t) F(mu1) + t F(mu2)]``;
    positive values are violations.  A violation is only conclusive for the
    glued plan: some other admissible three-plan might still satisfy the
    inequality.
    """

    holds: bool
    worst_violation: float
    worst_t: float
    t_grid: tuple
    values: list
    tol: float = GG_TOL
    conclusive_for_existence: bool = False

    def to_dict(self) -> dict:
        return {
            "holds": self.holds,
            "worst_violation": self.worst_violation,
            "worst_t": self.worst_t,
            "t_grid": list(self.t_grid),
            "values": self.values,
            "tol": self.tol,
            "note": "pass certifies the glued plan only; violations are inconclusive for the existential claim",
        }


def check_gg_convexity(F: Functional, mu0, mu1, mu2, t_grid=DEFAULT_T_GRID) -> GGConvexityReport:
    t_grid = tuple(float(t) for t in t_grid)
    if any(t < 0.0 or t > 1.0 for t in t_grid):
        raise ValueError("t_grid must lie in [0, 1]")
    three = build_three_plan(mu0, mu1, mu2)
    f1, f2 = F(mu1), F(mu2)
    values = []
    worst, worst_t = -np.inf, t_grid[0]
    for t in t_grid:
        ft = F(generalized_geodesic(three, t))
        viol = ft - ((1.0 - t) * f1 + t * f2)
        values.append(ft)
        if viol > worst:
            worst, worst_t = viol, t
    return GGConvexityReport(bool(worst <= GG_TOL), float(worst), worst_t, t_grid, values)


def lipschitz_probe(F: Functional, samples, tol: float = 1e-8) -> float:
    """Largest observed ``|F(mu) - F(nu)| / W2(mu, nu)`` over the sample pairs.

    Raises :class:`DeclaredBoundViolated` if it exceeds the declared bound.
    Pairs at distance zero are skipped.
    """
    best = 0.0
    for mu, nu in samples:
        d = w2(mu, nu)
        if d <= 1e-14:
            continue
        best = max(best, abs(F(mu) - F(nu)) / d)
    if F.lipschitz_bound is not None and best > F.lipschitz_bound + tol:
        raise DeclaredBoundViolated(f"observed {best:.6g} > declared {F.lipschitz_bound:.6g}")
    return best


def gg_convexity_report(F: Functional, triples, t_grid=DEFAULT_T_GRID) -> CheckReport:
    """Batch version of :func:`check_gg_convexity` as a slack report."""
    slacks = [-check_gg_convexity(F, *tr, t_grid=t_grid).worst_violation for tr in triples]
    return CheckReport(f"gg-convexity[{F.name}]", slacks, GG_TOL)
