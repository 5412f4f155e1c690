"""Named batch checks run by ``wprox check``.

Each suite draws its instances from ``numpy.random.default_rng(seed)`` and
returns a :class:`CheckReport`.  ``SUITES`` maps a suite name to a one-line
statement of the inequality it certifies and the function that runs it.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import instances as inst
from .functionals import check_gg_convexity, distance_potential, quadratic_potential
from .iterate import (
    Diminishing,
    StopRule,
    asymptotic_regularity,
    cyclic_ppa,
    cyclic_ppa_diminishing,
    fejer_monitor,
    ppa,
    quadratic_growth_check,
    step_bound_check,
)
from .measures import PointMap, dirac, make_discrete
from .operators import (
    check_fixed_point_intersection,
    check_pushforward_ineq,
    check_quasi_afne,
    compose,
    find_fixed_point,
    prox_operator,
    quadratic_prox_map,
)
from .prox import ProxConfig, check_eq1, check_eq2, prox
from .reports import CheckReport, merge
from .transport import geodesic, map_induced_plan, solve_w2, w2


@dataclass(frozen=True)
class Suite:
    name: str
    statement: str
    run: Callable[[int], CheckReport]


def _retol(rep: CheckReport, tol: Optional[float]) -> CheckReport:
    return rep if tol is None else CheckReport(rep.name, rep.slacks, tol, rep.details)


def two_point_suite(seed: int) -> CheckReport:
    mu = make_discrete([[0.0], [1.0]], [0.25, 0.75])
    nu = make_discrete([[0.0], [1.0]], [0.75, 0.25])
    cost = solve_w2(mu, nu).cost
    swap = map_induced_plan(mu, PointMap(1, lambda x: 1.0 - x)).cost
    return CheckReport("transport-two-point", [1e-9 - abs(cost - 0.5), 1e-12 - abs(swap - 1.0)], 0.0,
                       {"optimal_cost": cost, "map_cost": swap})


def bruteforce_suite(seed: int, count: int = 200) -> CheckReport:
    gen = inst.rng(seed)
    slacks = []
    for _ in range(count):
        n, d = int(gen.integers(1, 8)), int(gen.integers(1, 4))
        mu = inst.random_measure(gen, n, d, uniform=True)
        nu = inst.random_measure(gen, n, d, uniform=True)
        C = ((mu.points[:, None, :] - nu.points[None, :, :]) ** 2).sum(-1)
        best = min(C[np.arange(n), list(p)].sum() / n for p in itertools.permutations(range(n)))
        slacks.append(1e-9 - abs(solve_w2(mu, nu).cost - best))
    return CheckReport("transport-bruteforce", slacks, 0.0)


GEODESIC_GRID = (0.0, 0.2, 0.4, 0.6, 0.8, 1.0)


def geodesic_suite(seed: int, count: int = 50) -> CheckReport:
    gen = inst.rng(seed)
    slacks = []
    for _ in range(count):
        mu, nu = inst.random_pair(gen, n_max=8)
        plan = solve_w2(mu, nu)
        pts = {t: geodesic(plan, t) for t in GEODESIC_GRID}
        for t, s in itertools.combinations(GEODESIC_GRID, 2):
            slacks.append(-abs(w2(pts[t], pts[s]) - abs(t - s) * plan.w2))
    return CheckReport("geodesic-speed", slacks, 1e-7)


def _prox_batches(seed: int, count: int):
    """Yield (name, F, cfg, mu, nu) for every built-in functional."""
    for b, name in enumerate(inst.BUILTIN_NAMES):
        gen = inst.rng([seed, b])
        for _ in range(count):
            mu, nu = inst.random_pair(gen)
            F = inst.builtin_functional(name, gen, mu.dim)
            yield name, F, ProxConfig(inst.random_tau(gen)), mu, nu


def prox_inequality_suite(seed: int, count: int = 100) -> CheckReport:
    reports = []
    for _, F, cfg, mu, nu in _prox_batches(seed, count):
        p_mu, p_nu = prox(F, cfg, mu), prox(F, cfg, nu)
        reports.append(check_eq1(F, cfg, mu, nu, p=p_mu))
        reports.append(check_eq2(F, cfg, mu, nu, p_mu=p_mu, p_nu=p_nu))
    return merge("prox-inequalities", reports)


def quasi_firm_suite(seed: int, count: int = 100) -> CheckReport:
    reports = []
    for _, F, cfg, mu, _nu in _prox_batches(seed, count):
        reports.append(check_quasi_afne(prox_operator(F, cfg, mu.dim), 0.5, [mu]))
    return merge("prox-quasi-firm", reports)


def quadratic_growth_suite(seed: int, count: int = 100) -> CheckReport:
    reports = []
    for _, F, cfg, mu, nu in _prox_batches(seed, count):
        T = prox_operator(F, cfg, mu.dim)
        reports.append(quadratic_growth_check(T, F, 2.0 * cfg.tau, [(mu, nu)]))
    return merge("quadratic-growth", reports)


def pushforward_suite(seed: int, count: int = 100) -> CheckReport:
    gen = inst.rng(seed)
    slacks = []
    for _ in range(count):
        mu, nu = inst.random_pair(gen)
        T = quadratic_prox_map(gen.normal(size=mu.dim), inst.random_tau(gen))
        slacks += check_pushforward_ineq(T, 0.5, [(mu, nu)]).slacks
    return CheckReport("pushforward", slacks, 1e-7)


def composition_suite(seed: int, count: int = 20) -> CheckReport:
    gen = inst.rng(seed)
    reports = []
    for _ in range(count):
        d = int(gen.integers(1, 4))
        a = gen.normal(size=d)
        S = prox_operator(quadratic_potential(a), ProxConfig(inst.random_tau(gen)))
        T = prox_operator(distance_potential(a), ProxConfig(inst.random_tau(gen)))
        ST = compose(S, T)
        mus = [inst.random_measure(gen, int(gen.integers(1, 10)), d) for _ in range(3)]
        reports.append(check_quasi_afne(ST, 2.0 / 3.0, mus))
        fps = [find_fixed_point(ST, m)[0] for m in mus]
        reports.append(check_fixed_point_intersection(S, T, fps))
    return merge("composition", reports)


def ppa_rate_suite(seed: int) -> CheckReport:
    F = quadratic_potential([0.0])
    ref = dirac([0.0])
    tr = ppa(F, ProxConfig(1.0), dirac([2.0]), StopRule(max_iter=30, step_tol=0.0), refs=[ref])
    rate = [1e-7 - abs(s.dist_to_refs[0] / 2.0 * 2.0**s.index - 1.0) for s in tr.steps]
    return merge("ppa-rate", [CheckReport("rate", rate, 0.0), fejer_monitor(tr), asymptotic_regularity(tr)])


def cppa_common_suite(seed: int) -> CheckReport:
    gen = inst.rng(seed)
    d = int(gen.integers(1, 4))
    a = gen.normal(size=d)
    ref = dirac(a)
    mu0 = inst.random_measure(gen, 6, d, scale=3.0)
    tr = cyclic_ppa([quadratic_potential(a), distance_potential(a)], [ProxConfig(1.0), ProxConfig(0.5)],
                    mu0, StopRule(max_iter=200), refs=[ref])
    final = CheckReport("reach", [1e-5 - tr.steps[-1].dist_to_refs[0]], 0.0)
    return merge("cppa-common", [final, fejer_monitor(tr), asymptotic_regularity(tr)])


def cppa_diminishing_suite(seed: int) -> CheckReport:
    Fs = [distance_potential([-1.0]), distance_potential([1.0])]
    refs = [dirac([0.0]), dirac([-1.0]), dirac([1.0])]
    tr = cyclic_ppa_diminishing(Fs, Diminishing(1.0), dirac([5.0]), 500, refs=refs)
    final = tr.boundary_records()[-1].objective
    return merge("cppa-diminishing", [CheckReport("objective", [1e-2 - abs(final - 2.0)], 0.0),
                                      step_bound_check(tr), fejer_monitor(tr)])


def gg_convexity_suite(seed: int, count: int = 50) -> CheckReport:
    from .functionals import potential_energy

    slacks = []
    for b, name in enumerate(inst.BUILTIN_NAMES):
        gen = inst.rng([seed, 100 + b])
        for _ in range(count):
            mu0, mu1, mu2 = inst.random_triple(gen)
            F = inst.builtin_functional(name, gen, mu0.dim)
            slacks.append(-check_gg_convexity(F, mu0, mu1, mu2).worst_violation)
    concave = potential_energy(lambda x: -np.sum(x * x, axis=-1), vectorized=True, name="concave")
    rep = check_gg_convexity(concave, dirac([0.0]), dirac([-1.0]), dirac([1.0]))
    # the concave potential must be caught, and at t = 1/2
    slacks.append(1.0 if (not rep.holds and abs(rep.worst_t - 0.5) < 1e-12) else -1.0)
    return CheckReport("gg-convexity", slacks, 1e-8)


SUITES = {
    s.name: s
    for s in [
        Suite("transport-two-point",
              "Exact W2 of 1/4 d0 + 3/4 d1 against 3/4 d0 + 1/4 d1 is 0.5; the swap map's plan costs 1.0.",
              two_point_suite),
        Suite("transport-bruteforce",
              "For uniform measures with n <= 7 atoms, the LP optimum equals the best of all n! assignments.",
              bruteforce_suite),
        Suite("geodesic-speed",
              "Displacement interpolation has constant speed: W2(g(t), g(s)) = |t - s| W2(g(0), g(1)).",
              geodesic_suite),
        Suite("prox-inequalities",
              "Three-point inequality (W2(p,v)^2 - W2(m,v)^2)/2t <= F(v) - F(p) - W2(p,m)^2/2t for p = prox(m), "
              "and its two-prox symmetrized form.",
              prox_inequality_suite),
        Suite("prox-quasi-firm",
              "Quasi 1/2-firmness of prox: W2(Jm, v)^2 <= W2(m, v)^2 - W2(m, Jm)^2 for minimizers v.",
              quasi_firm_suite),
        Suite("quadratic-growth",
              "After one prox step: W2(Jm, v)^2 - W2(m, v)^2 <= 2t (F(v) - F(Jm)).",
              quadratic_growth_suite),
        Suite("pushforward",
              "For a 1/2-firm point map T: W2(T#m, T#v)^2 <= W2(m, v)^2 - W2((Id-T)#m, (Id-T)#v)^2.",
              pushforward_suite),
        Suite("composition",
              "Two quasi 1/2-firm prox maps compose to a quasi 2/3-firm map whose fixed points are shared.",
              composition_suite),
        Suite("ppa-rate",
              "Prox iteration of |x|^2/2 with t = 1 from d2 contracts by exactly 1/2 per step; distances to the "
              "minimizer never grow and squared steps sum to at most W2(m0, d0)^2.",
              ppa_rate_suite),
        Suite("cppa-common",
              "Cyclic prox of two functionals with a common minimizer reaches it within 1e-5 in 200 steps, "
              "with distances to it never growing.",
              cppa_common_suite),
        Suite("cppa-diminishing",
              "Cyclic prox of |x+1| and |x-1| with steps 1/(k+1) from d5: objective reaches 2, each step moves "
              "at most 2 t_k L, and cycle-boundary distances grow at most by the step-size slack.",
              cppa_diminishing_suite),
        Suite("gg-convexity",
              "Built-in functionals are convex along generalized geodesics; -|x|^2 fails at t = 1/2.",
              gg_convexity_suite),
    ]
}


def run_suite(name: str, seed: int, tol: Optional[float] = None) -> CheckReport:
    if name not in SUITES:
        raise KeyError(f"unknown suite {name!r}; known: {sorted(SUITES)}")
    return _retol(SUITES[name].run(seed), tol)


def list_checks() -> str:
    width = max(map(len, SUITES))
    return "".join(f"{n.ljust(width)}  {s.statement}\n" for n, s in SUITES.items())
