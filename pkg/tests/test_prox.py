import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from wprox.errors import InnerSolverStall
from wprox.functionals import distance_potential, quadratic_interaction, quadratic_potential
from wprox.instances import BUILTIN_NAMES, builtin_functional
from wprox.measures import dirac, make_discrete
from wprox.prox import ProxConfig, check_eq1, check_eq2, certify_prox, prox, prox_result, verify_argmin_fix
from wprox.transport import w2, w2_squared

from strategies import measure_pairs, measures

taus = st.floats(0.05, 3.0)


def _interaction_closed_form(mu, tau, scale=1.0):
    m = mu.mean()
    return make_discrete(m + (mu.points - m) / (1.0 + 2.0 * scale * tau), mu.weights)


def test_prox_examples():
    assert prox(quadratic_potential([0.0]), ProxConfig(1.0), dirac([2.0])).allclose(dirac([1.0]), atol=0.0)
    a = dirac([0.7, -1.1])
    assert prox(quadratic_potential([0.7, -1.1]), ProxConfig(0.8), a).allclose(a, atol=0.0)
    assert prox(distance_potential([0.0]), ProxConfig(0.5), dirac([2.0])).allclose(dirac([1.5]), atol=0.0)


def test_prox_of_minimizer_for_every_builtin():
    for F, mu in ((distance_potential([1.0, 1.0]), dirac([1.0, 1.0])), (quadratic_interaction(), dirac([3.0]))):
        assert w2(prox(F, ProxConfig(1.3), mu), mu) <= 1e-12


@given(measures(), taus)
def test_quadratic_prox_closed_form(mu, tau):
    a = np.linspace(-1.0, 1.0, mu.dim)
    expected = make_discrete((mu.points + tau * a) / (1.0 + tau), mu.weights)
    res = prox_result(quadratic_potential(a), ProxConfig(tau), mu)
    assert res.exact and res.certified
    assert np.max(np.abs(res.measure.points - expected.points)) <= 1e-12


@given(measures(max_atoms=8), taus, st.floats(0.2, 2.0))
def test_interaction_prox_closed_form(mu, tau, scale):
    res = prox_result(quadratic_interaction(scale), ProxConfig(tau), mu)
    expected = _interaction_closed_form(mu, tau, scale)
    assert np.max(np.abs(res.measure.points - expected.points)) <= 1e-8
    assert res.certified


@given(measures(), taus)
def test_pointwise_and_descent_paths_agree(mu, tau):
    a = np.full(mu.dim, 0.3)
    F = quadratic_potential(a)
    fast = prox(F, ProxConfig(tau), mu)
    slow = prox(F, ProxConfig(tau, use_pointwise=False), mu)
    assert w2(fast, slow) <= 1e-6


def test_eq1_closed_form_instance():
    F, cfg = quadratic_potential([0.0]), ProxConfig(1.0)
    rep = check_eq1(F, cfg, dirac([2.0]), dirac([0.0]))
    # p = d1: lhs = (1 - 4)/2, rhs = 0 - 1/2 - 1/2
    assert rep.details["lhs"] == -1.5 and rep.details["rhs"] == -1.0
    assert rep.holds and rep.slack == 0.5


def test_eq1_equality_at_minimizer():
    F = quadratic_potential([1.0])
    rep = check_eq1(F, ProxConfig(1.0), dirac([1.0]), dirac([1.0]))
    assert rep.slack == 0.0


def test_eq2_closed_form_instance():
    F, cfg = quadratic_potential([0.0]), ProxConfig(1.0)
    rep = check_eq2(F, cfg, dirac([2.0]), dirac([4.0]))
    # prox images d1 and d2; rhs = (0 + 9 - 1 - 4) / 2
    assert rep.details["lhs"] == 1.0 and rep.details["rhs"] == 2.0
    assert rep.holds


def test_eq2_equal_inputs():
    mu = make_discrete([[0.0, 1.0], [2.0, -1.0]], [0.3, 0.7])
    rep = check_eq2(distance_potential([0.0, 0.0]), ProxConfig(0.4), mu, mu)
    assert abs(rep.slack) <= 1e-12


@pytest.mark.parametrize("name", BUILTIN_NAMES)
@given(pair=measure_pairs(), tau=taus, seed=st.integers(0, 2**16))
def test_prox_inequalities_hold(name, pair, tau, seed):
    mu, nu = pair
    F = builtin_functional(name, np.random.default_rng(seed), mu.dim)
    cfg = ProxConfig(tau)
    assert check_eq1(F, cfg, mu, nu).holds
    assert check_eq2(F, cfg, mu, nu).holds


@pytest.mark.parametrize("name", BUILTIN_NAMES)
@given(mu=measures(), tau=taus, seed=st.integers(0, 2**16))
def test_objective_never_increases(name, mu, tau, seed):
    F = builtin_functional(name, np.random.default_rng(seed), mu.dim)
    p = prox(F, ProxConfig(tau), mu)
    assert F(p) + w2_squared(p, mu) / (2 * tau) <= F(mu) + 1e-12


@pytest.mark.parametrize("name", BUILTIN_NAMES)
@given(mu=measures(), tau=taus, seed=st.integers(0, 2**16))
def test_quasi_half_firm_against_minimizers(name, mu, tau, seed):
    F = builtin_functional(name, np.random.default_rng(seed), mu.dim)
    p = prox(F, ProxConfig(tau), mu)
    for nu in F.argmin_witnesses(mu.dim):
        assert w2_squared(p, nu) <= w2_squared(mu, nu) - w2_squared(mu, p) + 1e-7


@given(measures())
def test_small_step_moves_little(mu):
    tau = 1e-6
    for F in (distance_potential(np.zeros(mu.dim)), distance_potential(np.ones(mu.dim))):
        assert w2(prox(F, ProxConfig(tau), mu), mu) <= 2 * tau * F.lipschitz_bound + 1e-12


def test_argmin_equals_fixed_points():
    F, cfg = quadratic_potential([1.0]), ProxConfig(0.7)
    rep = verify_argmin_fix(F, cfg, [dirac([1.0]), dirac([3.0]), make_discrete([[0.0], [2.0]])])
    assert rep.holds
    assert [e.fixed for e in rep.entries] == [True, False, False]
    moved = prox(F, cfg, dirac([3.0])).points[0, 0]
    assert 1.0 < moved < 3.0
    assert verify_argmin_fix(distance_potential([0.0]), cfg, [dirac([0.0]), dirac([2.0])]).holds


def test_stall_is_a_warning_with_uncertified_result():
    mu = make_discrete([[0.0], [1.0], [5.0]])
    with pytest.warns(InnerSolverStall):
        res = prox_result(quadratic_interaction(), ProxConfig(1.0, outer_max=1, inner_max=1), mu)
    assert not res.certified
    assert res.objective <= res.start_objective


def test_certify_prox_batch():
    rng = np.random.default_rng(5)
    F, cfg = quadratic_interaction(), ProxConfig(0.6)
    mu = make_discrete(rng.normal(size=(7, 2)))
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        p = prox(F, cfg, mu)
    comps = [make_discrete(rng.normal(size=(4, 2))) for _ in range(10)]
    assert certify_prox(F, cfg, mu, p, comps).holds
    assert not certify_prox(F, cfg, mu, mu, comps + [p]).holds


def test_config_validation():
    for bad in (dict(tau=0.0), dict(tau=1.0, tol=0.0), dict(tau=1.0, line_search_shrink=1.0)):
        with pytest.raises(ValueError):
            ProxConfig(**bad)
