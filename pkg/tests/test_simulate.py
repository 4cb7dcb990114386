"""Monte Carlo engine: exact cases, determinism, and the two-line identity."""
import csv

import numpy as np
import pytest

from divbarrier.closed_form import solve
from divbarrier.errors import ConfigError
from divbarrier.goldens import BASE_CONFIG
from divbarrier.params import params_from_config
from divbarrier.simulate import (
    SimConfig, challenge_objective, refinement_pair, simulate_aggregate,
    simulate_two_lines, write_path_csv,
)

SMALL = dict(dt=1e-2, n_paths=128, t_max=2.0, seed=11)


def test_degenerate_payout_is_exact(degenerate_sol):
    res = simulate_aggregate(degenerate_sol,
                             SimConfig(x0=2.0, **SMALL))
    assert res.j_hat == degenerate_sol.params.a2 * 2.0
    assert res.std_err == 0.0
    assert res.ruined_fraction == 1.0
    assert res.paths_truncated == 0
    assert res.dividends_mean == 2.0 and res.penalty_mean == 0.0


def test_zero_start_is_exact(base_sol):
    res = simulate_aggregate(base_sol, SimConfig(x0=0.0, **SMALL))
    assert res.j_hat == 0.0 and res.std_err == 0.0


def test_deterministic_given_seed(base_sol):
    a = simulate_aggregate(base_sol, SimConfig(x0=1.0, **SMALL))
    b = simulate_aggregate(base_sol, SimConfig(x0=1.0, **SMALL))
    c = simulate_aggregate(base_sol, SimConfig(x0=1.0, **dict(SMALL, seed=12)))
    assert a.j_hat == b.j_hat and a.std_err == b.std_err
    assert a.j_hat != c.j_hat


def test_initial_excess_is_paid_immediately(base_sol):
    b = base_sol.bstar
    at = simulate_aggregate(base_sol, SimConfig(x0=b, **SMALL))
    above = simulate_aggregate(base_sol, SimConfig(x0=b + 2.0, **SMALL))
    # the overshoot is a time-zero dividend; the residual path is identical
    assert above.j_hat == pytest.approx(
        at.j_hat + base_sol.params.a2 * 2.0, rel=1e-12)
    assert above.dividends_mean == pytest.approx(at.dividends_mean + 2.0,
                                                 rel=1e-12)


def test_antithetic_needs_even_paths(base_sol):
    with pytest.raises(ConfigError):
        simulate_aggregate(base_sol, SimConfig(
            x0=1.0, dt=1e-2, n_paths=127, t_max=1.0, antithetic=True))
    res = simulate_aggregate(base_sol, SimConfig(
        x0=1.0, dt=1e-2, n_paths=128, t_max=1.0, antithetic=True))
    assert res.n_paths == 128 and np.isfinite(res.std_err)


@pytest.mark.parametrize("bad", [
    dict(x0=1.0, dt=0.0),
    dict(x0=1.0, n_paths=0),
    dict(x0=1.0, t_max=-1.0),
    dict(x0=-0.5),
    dict(x0=1.0, dtype="float16"),
    dict(x0=1.0, penalty_stride=0),
    dict(x0=1.0, policy={"pi": (0.5,)}),
    dict(x0=1.0, policy={"gamma": (0.5, 0.5)}),
    dict(x0=1.0, policy="Optimul"),
    dict(),
])
def test_config_validation(base_sol, bad):
    with pytest.raises(ConfigError):
        simulate_aggregate(base_sol, SimConfig(**bad))


def test_theta_override_needs_zero_on_zero_preference_line():
    sol = solve(params_from_config(dict(BASE_CONFIG, beta1=0.0, beta2=1.0)))
    with pytest.raises(ConfigError):
        simulate_aggregate(sol, SimConfig(
            x0=1.0, policy={"theta": (0.5, 0.5)}, **SMALL))
    res = simulate_aggregate(sol, SimConfig(
        x0=1.0, policy={"theta": (0.0, 0.5)}, **SMALL))
    assert np.isfinite(res.j_hat)


def test_zero_retention_challenge_is_exactly_zero(base_sol):
    res = challenge_objective(base_sol, SimConfig(
        x0=1.0, policy={"pi": (0.0, 0.0)}, **SMALL))
    # no retention: no drift, no noise, no distortion, never reaches the barrier
    assert res.j_hat == 0.0 and res.std_err == 0.0
    assert res.ruined_fraction == 0.0


def test_challenge_requires_an_override(base_sol):
    with pytest.raises(ConfigError):
        challenge_objective(base_sol, SimConfig(x0=1.0, **SMALL))


def test_two_line_needs_both_starts_and_optimal_policy(base_sol):
    with pytest.raises(ConfigError):
        simulate_two_lines(base_sol, SimConfig(x1=1.0, mode="TwoLine",
                                               **SMALL))
    with pytest.raises(ConfigError):
        simulate_two_lines(base_sol, SimConfig(
            x1=0.5, x2=0.5, mode="TwoLine", policy={"pi": (0.5, 0.5)},
            **SMALL))


def test_two_line_time_zero_cascade(base_sol):
    b = base_sol.bstar
    res = simulate_two_lines(base_sol, SimConfig(
        x1=b + 1.0, x2=0.0, mode="TwoLine", **SMALL))
    # line 1 immediately sheds its excess and the aggregate pays it out
    assert res.l1_mean >= 1.0
    assert res.dividends_mean >= 1.0
    assert res.j_hat > base_sol.params.a2


def test_two_line_matches_aggregate_pathwise(base_sol):
    cfg = dict(dt=1e-2, n_paths=64, t_max=1.5, seed=3, dtype="float64",
               trace=True)
    agg = simulate_aggregate(base_sol, SimConfig(x0=1.0, **cfg))
    two = simulate_two_lines(base_sol, SimConfig(x1=0.6, x2=0.4,
                                                 mode="TwoLine", **cfg))
    assert agg.trace.shape == two.trace.shape
    # the pair (X1, X2) aggregates to the one-dimensional reflected state
    assert np.max(np.abs(agg.trace - two.trace)) < 1e-10
    assert agg.j_hat == pytest.approx(two.j_hat, rel=1e-12)
    assert two.l1_mean is not None and two.l2_mean is not None


def test_per_path_csv(base_sol, tmp_path):
    res = simulate_aggregate(base_sol, SimConfig(
        x0=1.0, dt=1e-2, n_paths=32, t_max=1.0, seed=5, keep_paths=True))
    out = tmp_path / "paths.csv"
    write_path_csv(str(out), res)
    with open(out) as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 32
    assert set(rows[0]) == {"path_id", "ruin_time", "discounted_dividends",
                            "discounted_penalty"}
    divs = [float(r["discounted_dividends"]) for r in rows]
    pens = [float(r["discounted_penalty"]) for r in rows]
    assert all(d >= 0 for d in divs) and all(p >= 0 for p in pens)
    recon = base_sol.params.a2 * np.mean(divs) + np.mean(pens)
    assert recon == pytest.approx(res.j_hat, rel=1e-9)

    bare = simulate_aggregate(base_sol, SimConfig(
        x0=1.0, dt=1e-2, n_paths=8, t_max=1.0))
    with pytest.raises(ConfigError):
        write_path_csv(str(out), bare)


def test_result_dict_shape(base_sol):
    res = simulate_aggregate(base_sol, SimConfig(x0=1.0, **SMALL))
    doc = res.as_dict()
    assert "trace" not in doc and "per_path" not in doc
    assert "l1_mean" not in doc
    assert doc["j_hat"] == res.j_hat
    two = simulate_two_lines(base_sol, SimConfig(x1=0.4, x2=0.6,
                                                 mode="TwoLine", **SMALL))
    assert "l1_mean" in two.as_dict()


def test_refinement_pair_is_coupled(base_sol):
    out = refinement_pair(base_sol, x0=1.0, dt=4e-2, n_paths=256, seed=9,
                          t_max=2.0, refine=4)
    assert out["dt"] == 4e-2 and out["dt_fine"] == 1e-2
    assert out["n_paths"] == 256
    assert out["diff"] == pytest.approx(out["j_fine"] - out["j_coarse"],
                                        abs=1e-14)
    # common random numbers: the pair difference is far tighter than either leg
    assert out["se_diff"] < 0.5 * max(out["se_coarse"], out["se_fine"])
    again = refinement_pair(base_sol, x0=1.0, dt=4e-2, n_paths=256, seed=9,
                            t_max=2.0, refine=4)
    assert again["j_coarse"] == out["j_coarse"]
    assert again["j_fine"] == out["j_fine"]


def test_dtype_controls_precision_not_mean(base_sol):
    cfg32 = SimConfig(x0=1.0, dt=1e-2, n_paths=512, t_max=2.0, seed=21)
    cfg64 = SimConfig(x0=1.0, dt=1e-2, n_paths=512, t_max=2.0, seed=21,
                      dtype="float64")
    r32 = simulate_aggregate(base_sol, cfg32)
    r64 = simulate_aggregate(base_sol, cfg64)
    # different draw kernels, same distribution: means within joint noise
    assert abs(r32.j_hat - r64.j_hat) < 4 * (r32.std_err + r64.std_err)
