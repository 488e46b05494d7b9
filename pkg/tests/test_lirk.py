import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from adann.grid import GridSpec
from adann.lirk import (CRANK_NICOLSON, ButcherTableau, LirkParams, OdeSystem, check_order2_conditions,
                        crank_nicolson_midpoint_step, general_lirk_step, lirk_step2, order2_tableau, rollout)
from adann.problems import NONLINEARITIES

RD = NONLINEARITIES["reaction_diffusion"]
params = st.floats(0.05, 2.0)


def heat_system(n=35, f=None):
    return OdeSystem(GridSpec(1, n, "dirichlet", 0.01).laplacian(), f or NONLINEARITIES["zero"])


def scalar_system(a, f):
    return OdeSystem(np.array([[a]]), f)


def test_lirk_params_validation():
    with pytest.raises(ValueError):
        LirkParams(0.0, 0.5)
    with pytest.raises(ValueError):
        LirkParams(0.5, -1.0)
    assert tuple(LirkParams(0.2, 0.3)) == (0.2, 0.3)


def test_tableau_examples():
    t = order2_tableau(LirkParams(0.5, 0.5))
    np.testing.assert_array_equal(t.b, [0, 1])
    assert t.beta[1, 0] == 0
    t = order2_tableau(LirkParams(1.0, 0.5))
    np.testing.assert_array_equal(t.b, [0.5, 0.5])
    assert t.beta[1, 0] == 0
    t = order2_tableau(LirkParams(0.5, 0.25))
    assert t.beta[1, 0] == pytest.approx(0.25)
    np.testing.assert_array_equal(t.b, [0, 1])
    assert t.alpha[1, 0] == 0.5 and t.beta[0, 0] == t.beta[1, 1] == 0.25
    assert t.stages == 2


@settings(max_examples=100, deadline=None)
@given(p1=params, p2=params)
def test_order2_tableau_satisfies_conditions(p1, p2):
    ok, res = check_order2_conditions(order2_tableau(LirkParams(p1, p2)))
    assert ok, res


def test_order_conditions_detect_failures():
    euler = ButcherTableau(np.zeros((1, 1)), np.zeros((1, 1)), np.array([1.0]))
    ok, res = check_order2_conditions(euler)
    assert not ok
    assert res[1] == pytest.approx(-0.5)
    tampered = ButcherTableau(np.array([[0, 0], [0.5, 0]]), np.array([[1.0, 0], [0, 1]]), np.array([0.5, 0.5]))
    ok, res = check_order2_conditions(tampered)
    assert not ok and res[1] == pytest.approx(0.5)
    with pytest.raises(ValueError):
        ButcherTableau(np.zeros((2, 2)), np.zeros((1, 1)), np.ones(2))


@pytest.mark.parametrize("step", [
    lambda s, U: lirk_step2(LirkParams(0.3, 0.7), s, 0.0, U),
    lambda s, U: crank_nicolson_midpoint_step(s, 0.0, U),
    lambda s, U: general_lirk_step(s, order2_tableau(LirkParams(0.3, 0.7)), 0.0, U),
])
def test_zero_step_is_identity(step):
    U = np.random.default_rng(0).standard_normal(35)
    np.testing.assert_array_equal(step(heat_system(f=RD), U), U)


def test_hand_evaluated_midpoint():
    ident = NONLINEARITIES["zero"].__class__("id", lambda u: u, np.ones_like)
    sys_ = scalar_system(0.0, ident)
    assert lirk_step2(CRANK_NICOLSON, sys_, 1.0, np.array([1.0]))[0] == pytest.approx(2.5)
    t = order2_tableau(CRANK_NICOLSON)
    assert general_lirk_step(sys_, t, 1.0, np.array([1.0]))[0] == pytest.approx(2.5)
    one = NONLINEARITIES["zero"].__class__("one", np.ones_like, np.zeros_like)
    assert crank_nicolson_midpoint_step(scalar_system(0.0, one), 1.0, np.array([0.0]))[0] == pytest.approx(1.0)


@settings(max_examples=30, deadline=None)
@given(p1=params, p2=params, h=st.floats(0.01, 0.5), seed=st.integers(0, 2**32 - 1))
def test_general_step_matches_lirk_step2(p1, p2, h, seed):
    p = LirkParams(p1, p2)
    sys_ = heat_system(f=RD)
    U = np.random.default_rng(seed).standard_normal((4, 35))
    np.testing.assert_allclose(general_lirk_step(sys_, order2_tableau(p), h, U), lirk_step2(p, sys_, h, U),
                               rtol=0, atol=1e-12)


@settings(max_examples=20, deadline=None)
@given(p1=params, h=st.floats(0.01, 1.0), seed=st.integers(0, 2**32 - 1))
def test_zero_operator_reduces_to_explicit_rk2(p1, h, seed):
    sys_ = OdeSystem(np.zeros((6, 6)), RD)
    U = np.random.default_rng(seed).standard_normal(6)
    fU = RD(U)
    expected = U + h * ((1 - 1 / (2 * p1)) * fU + (1 / (2 * p1)) * RD(U + h * p1 * fU))
    np.testing.assert_allclose(lirk_step2(LirkParams(p1, 0.4), sys_, h, U), expected, rtol=1e-13, atol=1e-13)


def test_linear_step_is_classic_crank_nicolson():
    sys_ = heat_system()
    A, h = sys_.A, 0.1
    U = np.random.default_rng(3).standard_normal(35)
    I = np.eye(35)
    expected = np.linalg.solve(I - h / 2 * A, (I + h / 2 * A) @ U)
    np.testing.assert_allclose(lirk_step2(CRANK_NICOLSON, sys_, h, U), expected, rtol=0, atol=1e-12)


@pytest.mark.parametrize("f", ["reaction_diffusion", "sine", "sqrt_one_plus_sq"])
def test_closed_form_matches_cn_member(f):
    sys_ = heat_system(f=NONLINEARITIES[f])
    U = 3 * np.random.default_rng(4).standard_normal((50, 35))
    np.testing.assert_allclose(crank_nicolson_midpoint_step(sys_, 0.2, U), lirk_step2(CRANK_NICOLSON, sys_, 0.2, U),
                               rtol=0, atol=1e-12)


def test_rollout_single_step_and_validation():
    sys_ = heat_system(f=RD)
    U = np.random.default_rng(5).standard_normal(35)
    p = LirkParams(0.7, 0.6)
    np.testing.assert_array_equal(rollout(p, sys_, 0.4, 1, U), lirk_step2(p, sys_, 0.4, U))
    with pytest.raises(ValueError):
        rollout(p, sys_, 1.0, 0, U)


def test_rollout_heat_decay_oracle():
    sys_ = heat_system()
    x = GridSpec(1, 35, "dirichlet").nodes()
    exact = np.exp(-np.pi**2 / 100) * np.sin(np.pi * x)
    assert np.exp(-np.pi**2 / 100) == pytest.approx(0.90602, abs=5e-6)
    for M in (20, 40):
        assert np.abs(rollout(CRANK_NICOLSON, sys_, 1.0, M, np.sin(np.pi * x)) - exact).max() <= 2e-3


def test_rollout_non_expansive():
    sys_ = heat_system()
    U = np.random.default_rng(6).standard_normal((20, 35))
    out = rollout(CRANK_NICOLSON, sys_, 1.0, 7, U)
    assert np.all(np.linalg.norm(out, axis=1) <= np.linalg.norm(U, axis=1))


@pytest.mark.parametrize("p", [CRANK_NICOLSON, LirkParams(0.3, 0.7), LirkParams(1.0, 0.5)])
def test_richardson_ratio_is_four(p):
    sys_ = heat_system(f=RD)
    x = GridSpec(1, 35, "dirichlet").nodes()
    g = np.sin(np.pi * x) + 0.5 * np.sin(2 * np.pi * x)
    ref = rollout(p, sys_, 1.0, 512, g)
    err = [np.abs(rollout(p, sys_, 1.0, M, g) - ref).max() for M in (8, 16, 32, 64)]
    slope = -np.polyfit(np.log([8, 16, 32, 64]), np.log(err), 1)[0]
    assert 1.8 <= slope <= 2.2


def test_solver_cache_reused():
    sys_ = heat_system(f=RD)
    rollout(LirkParams(0.3, 0.7), sys_, 1.0, 10, np.ones(35))
    assert list(sys_._solvers) == [0.1 * 0.7]
