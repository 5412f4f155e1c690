import warnings

import numpy as np
import pytest
from hypothesis import given

from wprox.errors import DimensionMismatch, PlanNotOptimal, TOutOfRange, ZeroWeightRow
from wprox.measures import PointMap, canonicalize, dirac, make_discrete
from wprox.transport import (
    TransportPlan,
    build_three_plan,
    disintegrate,
    generalized_geodesic,
    geodesic,
    map_induced_plan,
    plan_cost,
    solve_w2,
    w2,
)

from oracles import assignment_bruteforce, lp_cost, sq_costs, two_by_two_vertices
from strategies import measure_pairs, measure_triples, measures

MU_R = make_discrete([[0.0], [1.0]], [0.25, 0.75])
NU_R = make_discrete([[0.0], [1.0]], [0.75, 0.25])


def test_two_diracs():
    plan = solve_w2(dirac([0.0]), dirac([3.0]))
    assert plan.cost == 9.0 and plan.w2 == 3.0


def test_two_point_instance_against_vertex_enumeration():
    verts = two_by_two_vertices(MU_R.weights, NU_R.weights, sq_costs(MU_R.points, NU_R.points))
    best = min(c for c, _ in verts)
    assert best == 0.5  # frozen oracle output
    plan = solve_w2(MU_R, NU_R)
    assert abs(plan.cost - best) <= 1e-9
    assert plan.certified


def test_monotone_matching():
    plan = solve_w2(make_discrete([[0.0], [2.0]]), make_discrete([[1.0], [3.0]]))
    assert abs(plan.cost - 1.0) <= 1e-12


def test_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        solve_w2(dirac([0.0]), dirac([0.0, 1.0]))


def test_map_induced_plans():
    swap = map_induced_plan(MU_R, PointMap(1, lambda x: 1.0 - x))
    assert abs(swap.cost - 1.0) <= 1e-12
    assert swap.cost > solve_w2(MU_R, NU_R).cost
    assert canonicalize(swap.target).allclose(NU_R)
    assert map_induced_plan(MU_R, PointMap(1, lambda x: x)).cost == 0.0
    assert map_induced_plan(dirac([0.0]), PointMap(1, lambda x: x + 5)).cost == 25.0


def test_geodesic_examples():
    assert geodesic(solve_w2(dirac([0.0]), dirac([1.0])), 0.5).allclose(dirac([0.5]))
    plan = solve_w2(make_discrete([[0.0], [2.0]]), make_discrete([[1.0], [3.0]]))
    assert geodesic(plan, 0.5).allclose(make_discrete([[0.5], [2.5]]), atol=1e-12)
    assert geodesic(plan, 0.0).allclose(plan.source)
    assert geodesic(plan, 1.0).allclose(plan.target)


def test_geodesic_errors():
    plan = solve_w2(MU_R, NU_R)
    with pytest.raises(TOutOfRange):
        geodesic(plan, 1.5)
    swap = map_induced_plan(MU_R, PointMap(1, lambda x: 1.0 - x))
    with pytest.raises(PlanNotOptimal):
        geodesic(swap, 0.5)


def test_generalized_geodesic_examples():
    three = build_three_plan(dirac([0.0]), dirac([1.0]), dirac([3.0]))
    assert generalized_geodesic(three, 0.5).allclose(dirac([2.0]))
    a = dirac([1.5, -2.0])
    for t in (0.0, 0.3, 1.0):
        assert generalized_geodesic(build_three_plan(a, a, a), t).allclose(a)


def test_three_plan_examples():
    three = build_three_plan(dirac([0.0]), make_discrete([[1.0], [2.0]]), dirac([5.0]))
    assert np.allclose(three.tensor, [[[0.5], [0.5]]])
    u = make_discrete([[0.0], [1.0]])
    t = build_three_plan(u, u, u).tensor
    expected = np.zeros((2, 2, 2))
    expected[0, 0, 0] = expected[1, 1, 1] = 0.5
    assert np.allclose(t, expected)
    assert build_three_plan(dirac([0.0]), dirac([1.0]), dirac([2.0])).tensor.tolist() == [[[1.0]]]


def test_disintegration_examples():
    mu, nu = make_discrete([[0.0], [1.0]]), make_discrete([[5.0], [6.0], [7.0]], [0.2, 0.3, 0.5])
    prod = np.outer(mu.weights, nu.weights)
    d = disintegrate(TransportPlan(mu, nu, prod, plan_cost(mu, nu, prod)))
    assert all(np.allclose(c.weights, nu.weights) for c in d.conditionals.values())
    diag = disintegrate(solve_w2(mu, mu))
    assert [c.weights.tolist() for c in diag.conditionals.values()] == [[1.0, 0.0], [0.0, 1.0]]
    rem = disintegrate(solve_w2(MU_R, NU_R))
    assert np.allclose(rem.conditionals[0].weights, [1.0, 0.0])
    assert np.allclose(rem.conditionals[1].weights, [2 / 3, 1 / 3], atol=1e-12)


def test_disintegration_skips_zero_rows():
    mu = make_discrete([[0.0], [1.0], [2.0]], [0.5, 0.0, 0.5])
    with warnings.catch_warnings(record=True) as rec:
        warnings.simplefilter("always")
        d = disintegrate(solve_w2(mu, make_discrete([[0.0], [3.0]])))
    assert d.skipped == (1,)
    assert any(issubclass(r.category, ZeroWeightRow) for r in rec)


@given(measure_pairs())
def test_matches_linprog(pair):
    mu, nu = pair
    plan = solve_w2(mu, nu)
    assert abs(plan.cost - lp_cost(mu, nu)) <= 1e-9 * (1 + plan.cost)
    assert plan.certified


@given(measures(dim=2, max_atoms=6, uniform=True), measures(dim=2, max_atoms=6, uniform=True))
def test_matches_bruteforce_when_sizes_agree(mu, nu):
    if mu.size != nu.size:
        nu = make_discrete(nu.points[: mu.size]) if nu.size > mu.size else nu
        mu = make_discrete(mu.points[: nu.size])
    assert abs(solve_w2(mu, nu).cost - assignment_bruteforce(mu, nu)) <= 1e-9


@given(measure_pairs())
def test_symmetry(pair):
    mu, nu = pair
    assert abs(solve_w2(mu, nu).cost - solve_w2(nu, mu).cost) <= 1e-9 * (1 + solve_w2(mu, nu).cost)


@given(measures())
def test_zero_distance_to_self(mu):
    assert solve_w2(mu, mu).cost <= 1e-12


def test_positive_distance_between_different_measures():
    assert solve_w2(make_discrete([[0.0], [1.0]]), make_discrete([[0.0], [1.0 + 1e-3]])).cost > 0


@given(measure_triples())
def test_triangle_inequality(tr):
    a, b, c = tr
    assert w2(a, c) <= w2(a, b) + w2(b, c) + 1e-9


@given(measure_pairs())
def test_map_plan_never_beats_optimum(pair):
    mu, _ = pair
    T = PointMap(mu.dim, lambda x: x[::-1] * 1.5 - 0.3)
    mp = map_induced_plan(mu, T)
    assert mp.cost >= solve_w2(mu, mp.target).cost - 1e-9


@given(measure_pairs(max_atoms=5))
def test_constant_speed(pair):
    mu, nu = pair
    plan = solve_w2(mu, nu)
    grid = [0.0, 0.2, 0.4, 0.6, 0.8, 1.0]
    g = {t: geodesic(plan, t) for t in grid}
    for t in grid:
        for s in grid:
            assert abs(w2(g[t], g[s]) - abs(t - s) * plan.w2) <= 1e-7


@given(measure_pairs(max_atoms=5))
def test_generalized_geodesic_with_base_equal_to_start(pair):
    mu1, mu2 = pair
    three = build_three_plan(mu1, mu1, mu2)
    assert three.check_optimal_projections()
    for t in (0.25, 0.5, 0.75):
        gg = generalized_geodesic(three, t)
        assert abs(w2(gg, mu1) - t * w2(mu1, mu2)) <= 1e-7
    assert generalized_geodesic(three, 0.0).allclose(mu1, atol=1e-12)
    assert generalized_geodesic(three, 1.0).allclose(mu2, atol=1e-12)


@given(measure_pairs())
def test_disintegration_reassembles(pair):
    plan = solve_w2(*pair)
    assert np.max(np.abs(disintegrate(plan).reassemble() - plan.matrix)) <= 1e-12


def test_degenerate_uniform_grid_is_fast_and_exact():
    rng = np.random.default_rng(3)
    pts = rng.integers(0, 4, size=(60, 2)).astype(float)
    mu, nu = make_discrete(pts), make_discrete(pts[::-1] + 1.0)
    plan = solve_w2(mu, nu)
    assert abs(plan.cost - lp_cost(mu, nu)) <= 1e-9 * (1 + plan.cost)
