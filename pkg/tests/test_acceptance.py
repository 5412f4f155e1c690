"""Acceptance suite: one test per criterion, each at its stated tolerance.

Every test prints a ``criterion N: PASS|FAIL`` line; the lines are also
collected into the "acceptance criteria" section of the pytest summary.
"""

import itertools
import statistics
import time
import timeit

import numpy as np

from wprox import instances as inst
from wprox.functionals import check_gg_convexity, distance_potential, potential_energy, quadratic_potential
from wprox.iterate import (
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
from wprox.measures import PointMap, dirac, make_discrete
from wprox.operators import (
    check_fixed_point_intersection,
    check_pushforward_ineq,
    check_quasi_afne,
    compose,
    find_fixed_point,
    prox_operator,
    quadratic_prox_map,
)
from wprox.prox import ProxConfig, check_eq1, check_eq2, prox
from wprox.transport import geodesic, map_induced_plan, solve_w2, w2

from oracles import assignment_bruteforce, sq_costs, two_by_two_vertices

SEED = 20240611


def _builtin_batch(count=100, n_max=20, d_max=3):
    """(name, F, cfg, mu, nu) for ``count`` seeded instances of each built-in."""
    out = []
    for b, name in enumerate(inst.BUILTIN_NAMES):
        gen = inst.rng([SEED, b])
        for _ in range(count):
            mu, nu = inst.random_pair(gen, n_max, d_max)
            F = inst.builtin_functional(name, gen, mu.dim)
            out.append((name, F, ProxConfig(inst.random_tau(gen)), mu, nu))
    return out


_BATCH = {}


def builtin_batch():
    """Shared by criteria 4, 5 and 7; prox images are computed once."""
    if not _BATCH:
        for k, (name, F, cfg, mu, nu) in enumerate(_builtin_batch()):
            _BATCH[k] = (name, F, cfg, mu, nu, prox(F, cfg, mu), prox(F, cfg, nu))
    return list(_BATCH.values())


def test_c01_two_point_counterexample(acceptance):
    mu = make_discrete([[0.0], [1.0]], [0.25, 0.75])
    nu = make_discrete([[0.0], [1.0]], [0.75, 0.25])
    oracle = min(c for c, _ in two_by_two_vertices(mu.weights, nu.weights, sq_costs(mu.points, nu.points)))
    cost = solve_w2(mu, nu).cost
    swap = map_induced_plan(mu, PointMap(1, lambda x: 1.0 - x)).cost
    runtime = statistics.median(timeit.repeat(lambda: solve_w2(mu, nu), number=1, repeat=50))
    ok = abs(cost - 0.5) <= 1e-9 and abs(oracle - 0.5) <= 1e-15 and abs(swap - 1.0) <= 1e-12 \
        and swap > cost and runtime < 1e-3
    acceptance(1, ok, f"optimal cost {cost!r} (vertex oracle {oracle!r}), swap-map plan {swap!r}, "
                      f"median solve {runtime * 1e3:.3f} ms")
    assert ok


def test_c02_bruteforce_equivalence(acceptance):
    gen = inst.rng([SEED, 2])
    worst = 0.0
    t0 = time.perf_counter()
    for _ in range(200):
        n, d = int(gen.integers(1, 8)), int(gen.integers(1, 4))
        mu = inst.random_measure(gen, n, d, uniform=True)
        nu = inst.random_measure(gen, n, d, uniform=True)
        worst = max(worst, abs(solve_w2(mu, nu).cost - assignment_bruteforce(mu, nu)))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-9 and elapsed < 30.0
    acceptance(2, ok, f"200 pairs, worst |LP - brute force| = {worst:.2e}, {elapsed:.1f} s")
    assert ok


def test_c03_constant_speed_geodesics(acceptance):
    gen = inst.rng([SEED, 3])
    grid = [0.0, 0.2, 0.4, 0.6, 0.8, 1.0]
    worst = 0.0
    for _ in range(50):
        mu, nu = inst.random_pair(gen, n_max=10)
        plan = solve_w2(mu, nu)
        g = {t: geodesic(plan, t) for t in grid}
        for t, s in itertools.product(grid, grid):
            worst = max(worst, abs(w2(g[t], g[s]) - abs(t - s) * plan.w2))
    ok = worst <= 1e-7
    acceptance(3, ok, f"50 pairs on a 6-point grid, worst deviation {worst:.2e}")
    assert ok


def test_c04_prox_inequalities(acceptance):
    t0 = time.perf_counter()
    batch = builtin_batch()
    worst = {}
    for name, F, cfg, mu, nu, p_mu, p_nu in batch:
        s1 = check_eq1(F, cfg, mu, nu, p=p_mu).slack
        s2 = check_eq2(F, cfg, mu, nu, p_mu=p_mu, p_nu=p_nu).slack
        worst[name] = min(worst.get(name, np.inf), s1, s2)
    elapsed = time.perf_counter() - t0
    ok = all(v >= -1e-7 for v in worst.values()) and elapsed < 120.0
    detail = ", ".join(f"{k} {v:.2e}" for k, v in worst.items())
    acceptance(4, ok, f"worst slack per functional: {detail}; {elapsed:.1f} s")
    assert ok


def test_c05_prox_quasi_half_firm(acceptance):
    worst, checked = np.inf, 0
    for name, F, cfg, mu, nu, p_mu, p_nu in builtin_batch():
        T = prox_operator(F, cfg, mu.dim)
        rep = check_quasi_afne(T, 0.5, [mu])
        worst = min(worst, rep.worst_slack)
        checked += len(rep.slacks)
    ok = worst >= -1e-7
    acceptance(5, ok, f"{checked} (measure, minimizer) pairs, worst slack {worst:.2e}")
    assert ok


def test_c06_ppa_geometric_rate(acceptance):
    a = 0.0
    ref = dirac([a])
    tr = ppa(quadratic_potential([a]), ProxConfig(1.0), dirac([2.0]), StopRule(max_iter=30, step_tol=0.0), refs=[ref])
    d0 = tr.steps[0].dist_to_refs[0]
    worst = max(abs(s.dist_to_refs[0] / d0 - 2.0 ** -s.index) / 2.0 ** -s.index for s in tr.steps)
    fejer, reg = fejer_monitor(tr), asymptotic_regularity(tr, 0.5)
    ok = len(tr) == 31 and worst <= 1e-7 and fejer.holds and reg.holds
    acceptance(6, ok, f"n <= 30, worst relative rate error {worst:.2e}; Fejer {fejer.holds}, "
                      f"sum of squared steps {reg.details['sum_sq_steps']:.6f} <= 4")
    assert ok


def test_c07_quadratic_growth(acceptance):
    worst = {}
    for name, F, cfg, mu, nu, p_mu, _ in builtin_batch():
        T = prox_operator(F, cfg, mu.dim)
        s = quadratic_growth_check(T, F, 2.0 * cfg.tau, [(mu, nu)]).worst_slack
        worst[name] = min(worst.get(name, np.inf), s)
    ok = all(v >= -1e-7 for v in worst.values())
    acceptance(7, ok, "C = 2 tau, worst slack: " + ", ".join(f"{k} {v:.2e}" for k, v in worst.items()))
    assert ok


def test_c08_composition(acceptance):
    gen = inst.rng([SEED, 8])
    worst_firm, worst_common, detected = np.inf, np.inf, 0
    for _ in range(20):
        d = int(gen.integers(1, 4))
        a = gen.normal(size=d)
        S = prox_operator(quadratic_potential(a), ProxConfig(inst.random_tau(gen)))
        T = prox_operator(distance_potential(a), ProxConfig(inst.random_tau(gen)))
        ST = compose(S, T)
        mus = [inst.random_measure(gen, int(gen.integers(1, 12)), d, scale=2.0) for _ in range(5)]
        worst_firm = min(worst_firm, check_quasi_afne(ST, 2.0 / 3.0, mus).worst_slack)
        fps = [find_fixed_point(ST, m)[0] for m in mus]
        rep = check_fixed_point_intersection(S, T, fps)
        detected += rep.details["detected"]
        worst_common = min(worst_common, rep.worst_slack)
    ok = abs(ST.alpha - 2.0 / 3.0) <= 1e-15 and worst_firm >= -1e-7 and detected == 100 and worst_common >= 0.0
    acceptance(8, ok, f"gamma = {ST.alpha:.6f}, worst quasi-firm slack {worst_firm:.2e}, "
                      f"{detected} fixed points found, all common within 1e-6: {worst_common >= 0.0}")
    assert ok


def test_c09_pushforward_inequality(acceptance):
    gen = inst.rng([SEED, 9])
    worst = np.inf
    for _ in range(100):
        mu, nu = inst.random_pair(gen)
        T = quadratic_prox_map(gen.normal(size=mu.dim), inst.random_tau(gen))
        worst = min(worst, check_pushforward_ineq(T, 0.5, [(mu, nu)]).worst_slack)
    ok = worst >= -1e-7
    acceptance(9, ok, f"100 pairs, worst slack {worst:.2e}")
    assert ok


def test_c10_cyclic_common_minimizer(acceptance):
    gen = inst.rng([SEED, 10])
    d = 2
    a = gen.normal(size=d)
    ref = dirac(a)
    mu0 = inst.random_measure(gen, 8, d, scale=3.0)
    tr = cyclic_ppa([quadratic_potential(a), distance_potential(a)], [ProxConfig(1.0), ProxConfig(0.25)], mu0,
                    StopRule(max_iter=200, step_tol=0.0), refs=[ref])
    dists = [s.dist_to_refs[0] for s in tr.steps]
    first = next((s.index for s, dd in zip(tr.steps, dists) if dd < 1e-5), None)
    fejer = fejer_monitor(tr)
    ok = first is not None and first <= 200 and fejer.holds
    acceptance(10, ok, f"W2 to the common minimizer below 1e-5 at step {first}; Fejer {fejer.holds}")
    assert ok


def test_c11_diminishing_cyclic(acceptance):
    Fs = [distance_potential([-1.0]), distance_potential([1.0])]
    refs = [dirac([0.0]), dirac([-1.0]), dirac([1.0]), dirac([0.5])]
    t0 = time.perf_counter()
    tr = cyclic_ppa_diminishing(Fs, Diminishing(1.0), dirac([5.0]), 500, refs=refs)
    elapsed = time.perf_counter() - t0
    xs = np.linspace(-10.0, 10.0, 200001)
    oracle_min = float(np.min(np.abs(xs + 1.0) + np.abs(xs - 1.0)))
    final = tr.boundary_records()[-1].objective
    steps, near = step_bound_check(tr), fejer_monitor(tr)
    ok = abs(oracle_min - 2.0) <= 1e-12 and abs(final - oracle_min) <= 1e-2 and steps.holds and near.holds \
        and elapsed < 60.0
    acceptance(11, ok, f"objective at cycle 500 = {final!r} (grid oracle {oracle_min}), step bound "
                       f"{steps.holds}, near-Fejer {near.holds} over {near.details['n_cycles']} cycles, "
                       f"{elapsed:.1f} s")
    assert ok


def test_c12_gg_convexity(acceptance):
    fails = 0
    for b, name in enumerate(inst.BUILTIN_NAMES):
        gen = inst.rng([SEED, 120 + b])
        for _ in range(50):
            mu0, mu1, mu2 = inst.random_triple(gen, n_max=10)
            F = inst.builtin_functional(name, gen, mu0.dim)
            fails += not check_gg_convexity(F, mu0, mu1, mu2).holds
    concave = potential_energy(lambda x: -np.sum(x * x, axis=-1), vectorized=True)
    rep = check_gg_convexity(concave, dirac([0.0]), dirac([-1.0]), dirac([1.0]))
    # midpoint value 0 against the endpoint average -1
    caught = not rep.holds and rep.worst_t == 0.5 and abs(rep.worst_violation - 1.0) <= 1e-12
    ok = fails == 0 and caught
    acceptance(12, ok, f"150 triples over 3 built-ins, {fails} failures; concave potential flagged at "
                       f"t = {rep.worst_t} with violation {rep.worst_violation}")
    assert ok


if __name__ == "__main__":
    import sys

    import pytest

    sys.exit(pytest.main([__file__, "-q"]))
