"""Self-maps of discrete measures and the inequalities they satisfy.

A :class:`MeasureMap` wraps a function on measures together with a declared
quasi-firmness constant and a list of known fixed points.  Maps come from
three sources: the Wasserstein prox of a functional, the push-forward of a
point map, and composition of two maps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import (
    DeclaredBoundViolated,
    FixedPointWitnessError,
    MembershipCheckFailed,
    NoCommonFixedPoint,
    NoFixedPointWitness,
)
from .functionals import Functional, functional_from_spec
from .measures import (
    DiscreteMeasure,
    FixedSetWitness,
    PointMap,
    box_witness,
    dirac,
    make_discrete,
    projection_measure,
    pushforward,
    singleton_witness,
    whole_space_witness,
)
from .prox import ProxConfig, prox
from .reports import CheckReport
from .transport import TransportPlan, disintegrate, w2, w2_squared

FIXED_POINT_TOL = 1e-7
CHECK_TOL = 1e-7
FIRMNESS_SPOT_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class MeasureMap:
    """A map on discrete measures with an optional quasi-firmness constant.

    Every entry of ``fixed_points`` is checked on construction: the map
    must move it by at most 1e-7 in W2.
    """

    apply: Callable[[DiscreteMeasure], DiscreteMeasure]
    alpha: Optional[float] = None
    fixed_points: tuple = ()
    label: str = ""
    spec: Optional[dict] = field(default=None, repr=False)

    def __post_init__(self):
        if self.alpha is not None and not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        fps = tuple(self.fixed_points)
        object.__setattr__(self, "fixed_points", fps)
        for nu in fps:
            moved = w2(self.apply(nu), nu)
            if moved > FIXED_POINT_TOL:
                raise FixedPointWitnessError(
                    f"{self.label or 'operator'} moves declared fixed point {nu!r} by {moved:.3g}"
                )

    def __call__(self, mu: DiscreteMeasure) -> DiscreteMeasure:
        return self.apply(mu)


# -- constructors --------------------------------------------------------------

def _witness_dim(F: Functional) -> Optional[int]:
    for part in (F,) + tuple(F.parts):
        a = part.params.get("a")
        if a is not None:
            return int(np.atleast_1d(a).shape[0])
    return None


def prox_operator(F: Functional, cfg: ProxConfig, dim: Optional[int] = None) -> MeasureMap:
    """The prox of ``F`` as a quasi 1/2-firm map.

    Fixed points are the known minimizers of ``F`` in dimension ``dim``
    (inferred from a center parameter when possible).
    """
    dim = _witness_dim(F) if dim is None else dim
    fps = []
    if F.argmin_witnesses is not None and dim is not None:
        fps = list(F.argmin_witnesses(dim))
    spec = {"kind": "prox", "functional": F.to_spec(), "tau": cfg.tau}
    return MeasureMap(lambda mu: prox(F, cfg, mu), 0.5, tuple(fps), f"prox[{F.name}, tau={cfg.tau:g}]", spec)


def _probe_measures(dim: int, fix: FixedSetWitness) -> list:
    probes = [dirac(np.zeros(dim))]
    for k in range(dim):
        e = np.eye(dim)[k]
        probes += [dirac(e), dirac(-e)]
    for s in fix.sample or ():
        probes.append(dirac(s))
    probes.append(make_discrete(np.vstack([2.0 * np.ones(dim), -np.ones(dim)]), [0.5, 0.5]))
    return probes


def _dedup(measures: Sequence[DiscreteMeasure], tol: float = 1e-12) -> list:
    out: list[DiscreteMeasure] = []
    for m in measures:
        if not any(o.dim == m.dim and w2(o, m) <= tol for o in out):
            out.append(m)
    return out


def firmness_spot_check(T: PointMap, alpha: float, n_pairs: int = 64, seed: int = 0,
                        scale: float = 3.0) -> CheckReport:
    """Test ``|Tx-Ty|^2 <= |x-y|^2 - (1-a)/a |(x-Tx)-(y-Ty)|^2`` on random pairs."""
    rng = np.random.default_rng(seed)
    k = (1.0 - alpha) / alpha
    slacks = []
    for _ in range(n_pairs):
        x, y = rng.normal(scale=scale, size=(2, T.dim))
        tx, ty = T(x), T(y)
        r = (x - tx) - (y - ty)
        slacks.append(float(np.sum((x - y) ** 2) - k * np.sum(r * r) - np.sum((tx - ty) ** 2)))
    return CheckReport(f"firmness[{T.label}]", slacks, FIRMNESS_SPOT_TOL)


def pushforward_operator(T: PointMap, alpha: Optional[float] = None, *,
                         spot_check: bool = True) -> MeasureMap:
    """Lift a point map to measures via ``mu -> T_# mu``.

    When ``alpha`` is declared and ``T`` carries a fixed-set witness, fixed
    points are seeded by projecting a few probe measures onto that set.  A
    declared ``alpha`` is spot-checked on random point pairs first.
    """
    if alpha is not None and spot_check:
        rep = firmness_spot_check(T, alpha)
        if not rep.holds:
            raise DeclaredBoundViolated(
                f"{T.label or 'point map'} is not {alpha}-firmly nonexpansive "
                f"(worst slack {rep.worst_slack:.3g})"
            )
    fps = []
    if T.fixed_set is not None:
        fps = _dedup([projection_measure(p, T.fixed_set) for p in _probe_measures(T.dim, T.fixed_set)])
    spec = {"kind": "pushforward", "map": T.spec, "alpha": alpha}
    return MeasureMap(lambda mu: pushforward(mu, T), alpha, tuple(fps), f"push[{T.label}]", spec)


def composition_constant(alpha: float, beta: float) -> float:
    """Quasi-firmness constant of a composition: ``(a+b-2ab)/(1-ab)``."""
    return (alpha + beta - 2.0 * alpha * beta) / (1.0 - alpha * beta)


def compose(S: MeasureMap, T: MeasureMap) -> MeasureMap:
    """``T o S`` (apply ``S`` first), with the composed quasi-firmness constant.

    The fixed points of the result are the witnesses shared by both maps:
    a witness of one map counts when the other map also fixes it to 1e-7.
    """
    if S.alpha is None or T.alpha is None:
        raise ValueError("both operators need a declared alpha to be composed")
    common = [nu for nu in S.fixed_points if w2(T(nu), nu) <= FIXED_POINT_TOL]
    common += [nu for nu in T.fixed_points if w2(S(nu), nu) <= FIXED_POINT_TOL]
    common = _dedup(common, FIXED_POINT_TOL)
    if not common:
        raise NoCommonFixedPoint(f"{S.label} and {T.label} share no witnessed fixed point")
    gamma = composition_constant(S.alpha, T.alpha)
    spec = {"kind": "compose", "first": S.spec, "then": T.spec}
    return MeasureMap(lambda mu: T(S(mu)), gamma, tuple(common), f"{T.label} o {S.label}", spec)


# -- point maps ----------------------------------------------------------------

def _point_map(dim, f, fixed_set, label, spec) -> PointMap:
    return PointMap(dim, f, fixed_set, label, spec)


def identity_map(dim: int) -> PointMap:
    return _point_map(dim, lambda x: np.array(x, dtype=float), whole_space_witness(dim), "id",
                      {"name": "identity", "params": {"dim": dim}})


def scaling_map(c: float, center) -> PointMap:
    """``x -> center + c (x - center)``."""
    center = np.atleast_1d(np.asarray(center, dtype=float))
    fix = whole_space_witness(center.shape[0]) if c == 1.0 else singleton_witness(center)
    return _point_map(center.shape[0], lambda x: center + c * (x - center), fix, f"scale[{c:g}]",
                      {"name": "scaling", "params": {"c": c, "center": center.tolist()}})


def translation_map(b) -> PointMap:
    b = np.atleast_1d(np.asarray(b, dtype=float))
    fix = whole_space_witness(b.shape[0]) if not np.any(b) else None
    return _point_map(b.shape[0], lambda x: x + b, fix, f"shift[{b.tolist()}]",
                      {"name": "translation", "params": {"b": b.tolist()}})


def box_projection_map(lower, upper) -> PointMap:
    """Componentwise clamp onto ``[lower, upper]``; its fixed set is the box."""
    lo = np.atleast_1d(np.asarray(lower, dtype=float))
    hi = np.atleast_1d(np.asarray(upper, dtype=float))
    return _point_map(lo.shape[0], lambda x: np.clip(x, lo, hi), box_witness(lo, hi), "clamp",
                      {"name": "box_projection", "params": {"lower": lo.tolist(), "upper": hi.tolist()}})


def quadratic_prox_map(a, tau: float) -> PointMap:
    """Pointwise prox of ``|x - a|^2 / 2``: ``(x + tau a) / (1 + tau)``."""
    a = np.atleast_1d(np.asarray(a, dtype=float))
    return _point_map(a.shape[0], lambda x: (x + tau * a) / (1.0 + tau), singleton_witness(a),
                      f"prox_quad[tau={tau:g}]", {"name": "quadratic_prox", "params": {"a": a.tolist(), "tau": tau}})


def distance_prox_map(a, tau: float) -> PointMap:
    """Pointwise prox of ``|x - a|``: shrink toward ``a`` by ``tau``."""
    a = np.atleast_1d(np.asarray(a, dtype=float))

    def f(x):
        r = x - a
        n = float(np.linalg.norm(r))
        return a.copy() if n <= tau else a + (1.0 - tau / n) * r

    return _point_map(a.shape[0], f, singleton_witness(a), f"prox_dist[tau={tau:g}]",
                      {"name": "distance_prox", "params": {"a": a.tolist(), "tau": tau}})


POINT_MAPS = {
    "identity": lambda p: identity_map(int(p["dim"])),
    "scaling": lambda p: scaling_map(float(p["c"]), p["center"]),
    "translation": lambda p: translation_map(p["b"]),
    "box_projection": lambda p: box_projection_map(p["lower"], p["upper"]),
    "quadratic_prox": lambda p: quadratic_prox_map(p["a"], float(p["tau"])),
    "distance_prox": lambda p: distance_prox_map(p["a"], float(p["tau"])),
}


def point_map_from_spec(spec: dict) -> PointMap:
    name = spec.get("name")
    if name not in POINT_MAPS:
        raise KeyError(f"unknown point map {name!r}; known: {sorted(POINT_MAPS)}")
    return POINT_MAPS[name](spec.get("params", {}))


def operator_from_spec(spec: dict) -> MeasureMap:
    """Build an operator from JSON.

    ``{"kind": "prox", "functional": {...}, "tau": 1.0}``,
    ``{"kind": "pushforward", "map": {"name": ..., "params": {...}}, "alpha": 0.5}`` or
    ``{"kind": "compose", "first": {...}, "then": {...}}``.
    """
    kind = spec.get("kind")
    if kind == "prox":
        return prox_operator(functional_from_spec(spec["functional"]), ProxConfig(float(spec["tau"])),
                             spec.get("dim"))
    if kind == "pushforward":
        return pushforward_operator(point_map_from_spec(spec["map"]), spec.get("alpha"))
    if kind == "compose":
        return compose(operator_from_spec(spec["first"]), operator_from_spec(spec["then"]))
    raise KeyError(f"unknown operator kind {kind!r}")


# -- checkers ------------------------------------------------------------------

def check_nonexpansive(T: MeasureMap, pairs) -> CheckReport:
    """``W2(T mu, T nu) <= W2(mu, nu)`` on every pair."""
    slacks, ratios = [], []
    for mu, nu in pairs:
        d0 = w2(mu, nu)
        d1 = w2(T(mu), T(nu))
        slacks.append(d0 - d1)
        ratios.append(d1 / d0 if d0 > 0 else None)
    return CheckReport("nonexpansive", slacks, CHECK_TOL, {"ratios": ratios})


def check_quasi_afne(T: MeasureMap, alpha: Optional[float], mus) -> CheckReport:
    """Quasi alpha-firm inequality against every declared fixed point.

    ``W2(T mu, nu)^2 <= W2(mu, nu)^2 - (1-alpha)/alpha * W2(mu, T mu)^2``
    """
    if not T.fixed_points:
        raise NoFixedPointWitness(f"{T.label or 'operator'} has no declared fixed point")
    alpha = T.alpha if alpha is None else alpha
    if alpha is None or not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    k = (1.0 - alpha) / alpha
    mus = list(mus)
    slacks = []
    for mu in mus:
        tmu = T(mu)
        step2 = w2_squared(mu, tmu)
        for nu in T.fixed_points:
            slacks.append(w2_squared(mu, nu) - k * step2 - w2_squared(tmu, nu))
    return CheckReport(f"quasi-firm[alpha={alpha:g}]", slacks, CHECK_TOL,
                       {"n_measures": len(mus), "n_fixed_points": len(T.fixed_points)})


def check_pushforward_ineq(T: PointMap, alpha: float, pairs) -> CheckReport:
    """``W2(T#mu, T#nu)^2 <= W2(mu,nu)^2 - (1-a)/a W2((Id-T)#mu, (Id-T)#nu)^2``."""
    k = (1.0 - alpha) / alpha
    residual = PointMap(T.dim, lambda x: x - T(x), None, f"Id-{T.label}")
    slacks = []
    for mu, nu in pairs:
        lhs = w2_squared(pushforward(mu, T), pushforward(nu, T))
        rhs = w2_squared(mu, nu) - k * w2_squared(pushforward(mu, residual), pushforward(nu, residual))
        slacks.append(rhs - lhs)
    return CheckReport(f"pushforward[alpha={alpha:g}]", slacks, CHECK_TOL)


def improved_alpha(alpha: float, C: float) -> float:
    """``1 / (1 + C (1 - alpha) / alpha)``."""
    return 1.0 / (1.0 + C * (1.0 - alpha) / alpha)


def check_disintegration_condition(T: PointMap, fix: FixedSetWitness, plan: TransportPlan,
                                   alpha: Optional[float] = None) -> dict:
    """Smallest conditional mass that the rows of ``plan`` put in ``Fix T``.

    Target atoms flagged as members of ``fix`` must really be fixed by ``T``
    (to 1e-9); a row with no mass in the set makes the condition fail.
    Returns ``{"C_estimate": C}`` plus ``"alpha_hat"`` when ``alpha`` is given.
    """
    for y in plan.target.points:
        if fix.membership(y) and np.max(np.abs(T(y) - y)) > 1e-9:
            raise MembershipCheckFailed(f"{y.tolist()} is flagged as a member but T moves it")
    masses = disintegrate(plan).mass_in(fix.membership)
    C = min(masses.values())
    if C <= 0.0:
        bad = [i for i, m in masses.items() if m <= 0.0]
        raise MembershipCheckFailed(f"source atoms {bad} send no mass into the fixed set")
    out = {"C_estimate": C, "row_masses": [masses[i] for i in sorted(masses)]}
    if alpha is not None:
        out["alpha_hat"] = improved_alpha(alpha, C)
    return out


def find_fixed_point(T: MeasureMap, mu0: DiscreteMeasure, max_iter: int = 1000,
                     tol: float = 1e-10) -> tuple[DiscreteMeasure, bool]:
    """Picard iteration until a step shorter than ``tol``."""
    mu = mu0
    for _ in range(max_iter):
        nxt = T(mu)
        if w2(nxt, mu) <= tol:
            return nxt, True
        mu = nxt
    return mu, False


def check_fixed_point_intersection(S: MeasureMap, T: MeasureMap, candidates,
                                   detect_tol: float = 1e-8, tol: float = 1e-6) -> CheckReport:
    """Measures fixed by ``T o S`` must be fixed by ``S`` and by ``T``.

    Candidates moved by more than ``detect_tol`` under the composition are
    ignored.  For the rest the slack is ``tol - max(W2(S mu, mu), W2(T mu, mu))``.
    """
    slacks = []
    for mu in candidates:
        if w2(T(S(mu)), mu) > detect_tol:
            continue
        slacks.append(tol - max(w2(S(mu), mu), w2(T(mu), mu)))
    return CheckReport("fixed-point-intersection", slacks, 0.0, {"detected": len(slacks)})


def witness_distance(T: MeasureMap, mu: DiscreteMeasure) -> float:
    """W2 from ``mu`` to the nearest declared fixed point."""
    if not T.fixed_points:
        return math.inf
    return min(w2(mu, nu) for nu in T.fixed_points)
