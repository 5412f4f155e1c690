"""Finitely supported probability measures on R^d.

A :class:`DiscreteMeasure` is a list of atoms ``points[i]`` carrying mass
``weights[i]``.  All objects here are immutable: the underlying arrays are
flagged read-only after construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import (
    DimensionMismatch,
    NegativeWeight,
    ProjectionFailure,
    WeightSumOutOfTolerance,
)

WEIGHT_SUM_TOL = 1e-9
MERGE_TOL = 1e-12


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """Probability measure ``sum_i weights[i] * delta_{points[i]}``.

    Use :func:`make_discrete` to build one from raw lists; the constructor
    expects already-normalized arrays and only validates them.
    """

    points: np.ndarray  # (n, dim)
    weights: np.ndarray  # (n,)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        if pts.ndim != 2 or pts.shape[0] == 0 or pts.shape[1] == 0:
            raise DimensionMismatch(f"points must be a non-empty (n, d) array, got shape {pts.shape}")
        if w.shape != (pts.shape[0],):
            raise DimensionMismatch(f"{pts.shape[0]} points but weights of shape {w.shape}")
        if np.any(w < 0):
            raise NegativeWeight(f"negative weight {float(w.min())}")
        if abs(w.sum() - 1.0) > 1e-12:
            raise WeightSumOutOfTolerance(f"weights sum to {float(w.sum())!r}")
        if not np.all(np.isfinite(pts)):
            raise ValueError("points must be finite")
        object.__setattr__(self, "points", _frozen(pts))
        object.__setattr__(self, "weights", _frozen(w))

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def size(self) -> int:
        return self.points.shape[0]

    def __len__(self) -> int:
        return self.size

    def __repr__(self) -> str:
        atoms = ", ".join(
            f"{w:.4g}*δ{tuple(np.round(p, 6).tolist())}" for p, w in zip(self.points, self.weights)
        )
        return f"DiscreteMeasure({atoms})"

    def mean(self) -> np.ndarray:
        return self.weights @ self.points

    def canonical(self) -> "DiscreteMeasure":
        return canonicalize(self)

    def to_dict(self) -> dict:
        return {"dim": self.dim, "points": self.points.tolist(), "weights": self.weights.tolist()}

    def allclose(self, other: "DiscreteMeasure", atol: float = 1e-9) -> bool:
        """Compare canonical forms atom by atom."""
        a, b = canonicalize(self), canonicalize(other)
        if a.dim != b.dim or a.size != b.size:
            return False
        return bool(
            np.allclose(a.points, b.points, rtol=0, atol=atol)
            and np.allclose(a.weights, b.weights, rtol=0, atol=atol)
        )


def make_discrete(points, weights=None) -> DiscreteMeasure:
    """Build a measure from raw points and weights.

    Weights default to uniform.  A weight vector whose sum is within 1e-9
    of one is rescaled to sum to one; anything further off is rejected.

    >>> make_discrete([[0.0], [1.0]], [0.25, 0.75]).weights.tolist()
    [0.25, 0.75]
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.ndim != 2 or pts.shape[0] == 0:
        raise DimensionMismatch("at least one point of consistent dimension is required")
    n = pts.shape[0]
    if weights is None:
        w = np.full(n, 1.0 / n)
    else:
        w = np.asarray(weights, dtype=float).reshape(-1)
        if w.shape[0] != n:
            raise DimensionMismatch(f"{n} points but {w.shape[0]} weights")
        if np.any(w < 0):
            raise NegativeWeight(f"negative weight {float(w.min())}")
        total = w.sum()
        if abs(total - 1.0) > WEIGHT_SUM_TOL:
            raise WeightSumOutOfTolerance(f"weights sum to {float(total)!r}, not 1")
        w = w / total
    return DiscreteMeasure(pts, w)


def dirac(point) -> DiscreteMeasure:
    return make_discrete([np.atleast_1d(np.asarray(point, dtype=float))], [1.0])


def uniform(points) -> DiscreteMeasure:
    return make_discrete(points)


def canonicalize(mu: DiscreteMeasure, tol: float = MERGE_TOL) -> DiscreteMeasure:
    """Merge atoms closer than ``tol`` (sup-norm), drop empty atoms, sort.

    The first atom of each cluster is its representative, so merged points
    keep an existing coordinate rather than an average.  Representatives
    are pairwise more than ``tol`` apart, which makes the operation
    idempotent.
    """
    reps: list[np.ndarray] = []
    mass: list[float] = []
    for p, w in zip(mu.points, mu.weights):
        if w == 0.0:
            continue
        if reps:
            d = np.max(np.abs(np.asarray(reps) - p), axis=1)
            k = int(np.argmin(d))
            if d[k] <= tol:
                mass[k] += w
                continue
        reps.append(p)
        mass.append(w)
    pts = np.asarray(reps)
    w = np.asarray(mass)
    order = np.lexsort(pts.T[::-1])
    # merging only regroups the sum, so no renormalization (keeps this idempotent bit-for-bit)
    return DiscreteMeasure(pts[order], w[order])


def second_moment(mu: DiscreteMeasure) -> float:
    return float(mu.weights @ np.sum(mu.points**2, axis=1))


def total_mass(mu: DiscreteMeasure) -> float:
    return float(mu.weights.sum())


@dataclass(frozen=True)
class FixedSetWitness:
    """Closed convex set given by a membership test and its metric projection."""

    membership: Callable[[np.ndarray], bool]
    projection: Callable[[np.ndarray], np.ndarray]
    sample: Optional[tuple] = None
    label: str = ""


@dataclass(frozen=True)
class PointMap:
    """Deterministic map R^d -> R^d, optionally with a known fixed-point set."""

    dim: int
    apply: Callable[[np.ndarray], np.ndarray]
    fixed_set: Optional[FixedSetWitness] = None
    label: str = ""
    spec: Optional[dict] = field(default=None, repr=False)

    def __call__(self, x) -> np.ndarray:
        return np.asarray(self.apply(np.asarray(x, dtype=float)), dtype=float)


def singleton_witness(point) -> FixedSetWitness:
    c = np.array(point, dtype=float)
    c.setflags(write=False)
    return FixedSetWitness(
        membership=lambda x: bool(np.max(np.abs(np.asarray(x) - c)) <= 1e-12),
        projection=lambda x: c.copy(),
        sample=(c,),
        label=f"{{{c.tolist()}}}",
    )


def box_witness(lower, upper) -> FixedSetWitness:
    lo = np.array(lower, dtype=float)
    hi = np.array(upper, dtype=float)
    if np.any(lo > hi):
        raise ValueError("empty box")
    return FixedSetWitness(
        membership=lambda x: bool(np.all(np.asarray(x) >= lo - 1e-12) and np.all(np.asarray(x) <= hi + 1e-12)),
        projection=lambda x: np.clip(x, lo, hi),
        sample=(lo.copy(), hi.copy(), (lo + hi) / 2),
        label=f"box[{lo.tolist()}, {hi.tolist()}]",
    )


def whole_space_witness(dim: int) -> FixedSetWitness:
    return FixedSetWitness(
        membership=lambda x: True,
        projection=lambda x: np.array(x, dtype=float),
        sample=(np.zeros(dim),),
        label="R^d",
    )


def pushforward(mu: DiscreteMeasure, T: PointMap) -> DiscreteMeasure:
    """Image measure ``T_# mu``, canonicalized so coinciding images merge."""
    if T.dim != mu.dim:
        raise DimensionMismatch(f"map acts on R^{T.dim}, measure lives in R^{mu.dim}")
    images = np.array([T(p) for p in mu.points])
    if images.shape != mu.points.shape:
        raise DimensionMismatch(f"map returned shape {images.shape[1:]} for points of dim {mu.dim}")
    return canonicalize(DiscreteMeasure(images, mu.weights))


def projection_measure(mu: DiscreteMeasure, fix: FixedSetWitness) -> DiscreteMeasure:
    """Push ``mu`` forward under the metric projection onto ``fix``."""
    images = []
    for p in mu.points:
        q = np.asarray(fix.projection(p), dtype=float)
        if q.shape != p.shape:
            raise DimensionMismatch(f"projection returned shape {q.shape} for a point of shape {p.shape}")
        if not fix.membership(q):
            raise ProjectionFailure(f"projection of {p.tolist()} gave {q.tolist()}, not a member")
        images.append(q)
    return canonicalize(DiscreteMeasure(np.array(images), mu.weights))


def concat(measures: Sequence[DiscreteMeasure], coeffs: Sequence[float]) -> DiscreteMeasure:
    """Mixture ``sum_k coeffs[k] * measures[k]``."""
    pts = np.vstack([m.points for m in measures])
    w = np.concatenate([c * m.weights for m, c in zip(measures, coeffs)])
    return make_discrete(pts, w)
