"""Solution structure: regimes, thresholds, value function, strategy."""
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from divbarrier.closed_form import (
    Regime, benchmark_no_uncertainty, classify, solve, strategy,
)
from divbarrier.errors import BranchError, DivBarrierError
from divbarrier.goldens import (
    AMBIGUITY_TABLE, BASE_CONFIG, SYMMETRIC_TABLE, TOL_BSTAR, TOL_W0,
    table_rows,
)
from divbarrier.params import params_from_config

PARAM_DRAW = dict(
    mu1=st.floats(0.1, 10), mu2=st.floats(0.1, 10),
    sigma1=st.floats(0.1, 5), sigma2=st.floats(0.1, 5),
    rho=st.floats(-0.9, 0.9), delta=st.floats(0.05, 5),
    a1=st.floats(0.1, 0.9),
    b1=st.floats(0.0, 20), b2=st.floats(0.0, 20),
)


@pytest.mark.parametrize("table,rows", [("ambiguity", AMBIGUITY_TABLE),
                                        ("symmetric", SYMMETRIC_TABLE)])
def test_reference_rows(table, rows):
    for cfg, w0_ref, bstar_ref in table_rows(table):
        sol = solve(params_from_config(cfg))
        assert abs(sol.thresholds.w0 - w0_ref) <= TOL_W0
        assert abs(sol.bstar - bstar_ref) <= TOL_BSTAR


def test_base_solution_shape(base_sol):
    th = base_sol.thresholds
    assert base_sol.regime is Regime.GeneralInterior_NeqCase
    assert 0 < th.w0 == min(th.w1, th.w2) < base_sol.bstar
    assert 0 < base_sol.gamma1 < 1
    assert base_sol.gamma2_minus < 0 < base_sol.gamma2_plus
    assert base_sol.K2 > 0 and base_sol.K4 > 0
    # K4 is the reciprocal marginal slope at the barrier
    assert base_sol.v_bstar == pytest.approx(base_sol.v(base_sol.bstar),
                                             rel=1e-12)
    assert base_sol.K4 == pytest.approx(1.0 / base_sol.v_bstar, rel=1e-12)


def test_value_function_pastes_and_caps(base_sol):
    sol = base_sol
    w0, b = sol.thresholds.w0, sol.bstar
    a2 = sol.params.a2
    assert sol.g(0.0) == 0.0
    # first-order fit at both free boundaries
    assert sol.g(w0 - 1e-11) == pytest.approx(sol.g(w0 + 1e-11), rel=1e-8)
    assert sol.g_prime(w0 - 1e-11) == pytest.approx(sol.g_prime(w0 + 1e-11),
                                                    rel=1e-6)
    assert sol.g(b - 1e-9) == pytest.approx(sol.g(b + 1e-9), rel=1e-8)
    assert sol.g_prime(b) == pytest.approx(a2, rel=1e-9)
    assert sol.g_second(b + 1e-9) == 0.0
    # marginal value never falls below the payout weight before the barrier
    xs = np.linspace(1e-6, b, 300)
    assert (sol.g_prime(xs) >= a2 - 1e-9).all()
    # linear continuation with unit slope times a2
    assert sol.g(b + 2.0) == pytest.approx(sol.g(b) + 2.0 * a2, rel=1e-12)


def test_region2_ode_and_riccati(base_sol):
    sol, th = base_sol, base_sol.thresholds
    xs = np.linspace(th.w0 * 1.001, sol.bstar * 0.999, 23)
    g, gp, gpp = sol.g(xs), sol.g_prime(xs), sol.g_second(xs)
    res = th.N1 * gpp + th.N2 * gp - sol.params.delta * g - th.N3 * gp ** 2 / g
    assert np.max(np.abs(res)) <= 1e-10 * np.max(np.abs(g))
    # gp = v g and gpp = (v^2 + v') g tie the chain to the derivatives
    v = np.array([sol.v(x) for x in xs])
    vp = np.array([sol.v_prime(x) for x in xs])
    assert gp == pytest.approx(v * g, rel=1e-10)
    assert gpp == pytest.approx((v * v + vp) * g, rel=1e-8)
    # barrier condition: v^2 + v' = 0 exactly at b*
    assert sol.v(sol.bstar) ** 2 + sol.v_prime(sol.bstar) == pytest.approx(
        0.0, abs=1e-10)


def test_distortion_identity(base_sol):
    # theta_i = beta_i sigma_i pi_i g'/g everywhere the strategy is defined
    sol, p = base_sol, base_sol.params
    for x in (0.2, 0.5, 0.8, 1.5, sol.bstar + 0.7):
        pt = strategy(sol, x)
        gog = sol.g_prime(x) / sol.g(x)
        assert pt.theta1 == pytest.approx(p.beta1 * p.sigma1 * pt.pi1 * gog,
                                          rel=1e-9)
        assert pt.theta2 == pytest.approx(p.beta2 * p.sigma2 * pt.pi2 * gog,
                                          rel=1e-9)
        ent = 0.5 * (pt.theta1 ** 2
                     + (pt.theta2 - p.rho * pt.theta1) ** 2 / (1 - p.rho ** 2))
        assert pt.entropy_rate == pytest.approx(ent, rel=1e-12)


def test_strategy_regions(base_sol):
    th = base_sol.thresholds
    below = strategy(base_sol, 0.5 * th.w0)
    at = strategy(base_sol, th.w0 * 1.0000001)
    above = strategy(base_sol, base_sol.bstar + 1.0)
    assert below.region == 1 and at.region == 2 and above.region == 3
    assert below.pi1 == pytest.approx(0.5 * th.w0 / th.w1)
    # retention is full for the binding line from w0 on, capped at 1
    assert at.pi1 == pytest.approx(1.0, abs=1e-6)
    assert above.pi1 == pytest.approx(th.w0 / th.w1)
    assert above.pi2 == pytest.approx(th.w0 / th.w2)
    assert 0 < above.pi2 < 1


def test_degenerate_solution(degenerate_sol):
    sol = degenerate_sol
    assert sol.regime is Regime.Degenerate
    assert sol.bstar == 0.0 and sol.thresholds is None
    assert sol.g(1.3) == pytest.approx(sol.params.a2 * 1.3)
    assert sol.g_prime(2.0) == sol.params.a2
    with pytest.raises(BranchError):
        strategy(sol, 1.0)
    pt = strategy(sol, 1.0, allow_sentinel=True)
    assert pt.irrelevant and math.isnan(pt.pi1)
    with pytest.raises(BranchError):
        sol.v(1.0)


def test_equal_diffusion_branch():
    sol = solve(params_from_config(dict(BASE_CONFIG, rho=0.0,
                                        beta1=1.0, beta2=1.0)))
    assert sol.eq_branch
    th = sol.thresholds
    assert abs(th.N1 - th.N3) <= 1e-9 * max(abs(th.N1), abs(th.N3))
    assert 0.495 <= th.w0 <= 0.505
    assert 1.855 <= sol.bstar <= 1.870


def test_swap_invariance():
    cfg = dict(BASE_CONFIG, beta1=1.0, beta2=0.3)
    mirror = dict(mu1=cfg["mu2"], mu2=cfg["mu1"], sigma1=cfg["sigma2"],
                  sigma2=cfg["sigma1"], rho=cfg["rho"], delta=cfg["delta"],
                  a1=cfg["a2"], a2=cfg["a1"], beta1=cfg["beta2"],
                  beta2=cfg["beta1"])
    a, b = solve(params_from_config(cfg)), solve(params_from_config(mirror))
    assert b.swapped and not a.swapped
    assert a.bstar == b.bstar
    assert a.thresholds.w0 == b.thresholds.w0
    ra, rb = a.report_dict(), b.report_dict()
    assert ra["w1"] == rb["w2"] and ra["w2"] == rb["w1"]
    for x in (0.3, 1.0, 2.5):
        assert a.g(x) == b.g(x)
        pa, pb = strategy(a, x), strategy(b, x)
        assert (pa.pi1, pa.pi2) == (pb.pi2, pb.pi1)
        assert (pa.theta1, pa.theta2) == (pb.theta2, pb.theta1)


def test_full_cession_labels_follow_caller_order():
    cfg = dict(BASE_CONFIG, mu1=0.2, beta1=0.05, beta2=0.05)
    sol = solve(params_from_config(cfg))
    rep = sol.report_dict()
    assert rep["regime"] == "Line1FullCession"
    assert rep["w1"] is not None and math.isinf(rep["w1"])
    assert math.isfinite(rep["w2"])
    pt = strategy(sol, 2.0 * sol.thresholds.w0)
    assert pt.pi1 == 0.0 and pt.theta1 == 0.0 and pt.pi2 > 0.0


def test_classify_matches_solve(base_params):
    doc = classify(base_params)
    sol = solve(base_params)
    assert doc["regime"] == sol.report_dict()["regime"]
    assert doc["gamma1"] == sol.gamma1
    assert doc["psi_coeffs"] == list(sol.psi_coeffs)


def test_root_policy_is_recorded(base_params):
    sol = solve(base_params, root_policy="smallest")
    assert sol.root_policy == "smallest"
    assert sol.gamma1 in sol.gamma1_roots


def test_benchmark_requires_zero_preferences(base_params):
    with pytest.raises(DivBarrierError):
        benchmark_no_uncertainty(base_params)
    p0 = params_from_config(dict(BASE_CONFIG, beta1=0.0, beta2=0.0))
    gamma, w1, w2, hint = benchmark_no_uncertainty(p0)
    assert 0 < gamma < 1 and w1 > 0 and w2 > 0 and hint is None


@given(**PARAM_DRAW)
@settings(max_examples=60, deadline=None)
def test_solution_invariants_hold_or_fail_loudly(mu1, mu2, sigma1, sigma2,
                                                 rho, delta, a1, b1, b2):
    cfg = dict(mu1=mu1, mu2=mu2, sigma1=sigma1, sigma2=sigma2, rho=rho,
               delta=delta, a1=a1, beta1=b1, beta2=b2)
    try:
        sol = solve(params_from_config(cfg))
    except DivBarrierError:
        return
    if sol.regime is Regime.Degenerate:
        assert sol.bstar == 0.0
        return
    th = sol.thresholds
    assert 0.0 < th.w0 <= sol.bstar
    assert th.w0 == min(th.w1, th.w2)
    assert sol.g(0.0) == 0.0
    xs = np.linspace(1e-9, sol.bstar, 50)
    gs = sol.g(xs)
    assert (np.diff(gs) >= 0).all() and gs[-1] > gs[0]
    assert sol.g_prime(sol.bstar) == pytest.approx(sol.params.a2, rel=1e-6)
