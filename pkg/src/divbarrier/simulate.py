"""Monte Carlo validation of the closed-form value function.

Simulates the controlled aggregate reserve under the worst-case measure
(drift adjusted by -sigma_i theta_i per unit of retained exposure; no
likelihood weighting) and estimates the robust objective

    j = a2 * sum of discounted dividends
        + int e^{-delta t} g(X_t) [theta1^2/(2 beta1) + theta2^2/(2 beta2)] dt,

whose exact value is g(x0).  Also simulates the two-line pair (X1, X2)
with the capital-transfer rules; its aggregate follows the same
one-dimensional dynamics path by path.

Numerics: synchronous Euler-Maruyama with a compacting active set;
float32 state (configurable) with float64 accumulators; reflection at b*
by projection, the overshoot paid as a dividend; absorption at 0.
State-dependent coefficients (v(x), g(x), the penalty rate) come from
polynomial fits of the closed forms on [w0, b*] whose sup-norm error is
verified when the kernel is built; below w0 the exact power-law forms
are used.

Randomness: Philox streams keyed by (seed, block, role), a block being a
fixed span of 2^15 path columns; results are bit-reproducible for a
given seed and config.  Antithetic variates mirror each column's
Gaussian draws; standard errors then come from pair means.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import chebyshev as _cheb

from .closed_form import ClosedFormSolution, Regime
from .errors import ConfigError

__all__ = ["SimConfig", "SimResult", "simulate_aggregate",
           "simulate_two_lines", "challenge_objective", "refinement_pair",
           "write_path_csv"]

_BLOCK = 1 << 15
_COMPACT_EVERY = 256
_COMPACT_BELOW = 0.6


@dataclass
class SimConfig:
    x0: float | None = None
    x1: float | None = None
    x2: float | None = None
    dt: float = 1e-3
    n_paths: int = 10_000
    t_max: float | None = None      # defaults to 40 / delta
    seed: int = 0
    mode: str = "Aggregate"         # "Aggregate" | "TwoLine"
    policy: object = "Optimal"      # or {"pi": (p1, p2)} / {"theta": (t1, t2)}
    antithetic: bool = False
    penalty_stride: int = 1
    dtype: str = "float32"
    trace: bool = False             # record the aggregate path (small runs)
    keep_paths: bool = False        # retain per-path outcomes for CSV dump


@dataclass
class SimResult:
    j_hat: float
    std_err: float
    ruined_fraction: float
    mean_ruin_time: float
    paths_truncated: int
    n_paths: int
    dividends_mean: float = 0.0
    penalty_mean: float = 0.0
    l1_mean: float | None = None
    l2_mean: float | None = None
    trace: object = None
    per_path: object = None

    def as_dict(self) -> dict:
        out = {
            "j_hat": self.j_hat,
            "std_err": self.std_err,
            "ruined_fraction": self.ruined_fraction,
            "mean_ruin_time": self.mean_ruin_time,
            "paths_truncated": self.paths_truncated,
            "n_paths": self.n_paths,
            "dividends_mean": self.dividends_mean,
            "penalty_mean": self.penalty_mean,
        }
        if self.l1_mean is not None:
            out["l1_mean"] = self.l1_mean
            out["l2_mean"] = self.l2_mean
        return out


def _check_cfg(sol: ClosedFormSolution, cfg: SimConfig, mode: str) -> float:
    if cfg.dt <= 0.0:
        raise ConfigError("dt must be > 0")
    if cfg.n_paths < 1:
        raise ConfigError("n_paths must be >= 1")
    if cfg.antithetic and cfg.n_paths % 2:
        raise ConfigError("antithetic pairing needs an even n_paths")
    if cfg.penalty_stride < 1:
        raise ConfigError("penalty_stride must be >= 1")
    if cfg.dtype not in ("float32", "float64"):
        raise ConfigError("dtype must be float32 or float64")
    t_max = cfg.t_max if cfg.t_max is not None else 40.0 / sol.params.delta
    if t_max <= 0.0:
        raise ConfigError("t_max must be > 0")
    if mode == "Aggregate":
        if cfg.x0 is None or cfg.x0 < 0.0:
            raise ConfigError("Aggregate mode needs x0 >= 0")
    else:
        if cfg.x1 is None or cfg.x2 is None or cfg.x1 < 0.0 or cfg.x2 < 0.0:
            raise ConfigError("TwoLine mode needs x1 >= 0 and x2 >= 0")
    if isinstance(cfg.policy, dict):
        keys = set(cfg.policy)
        if keys not in ({"pi"}, {"theta"}):
            raise ConfigError("policy override must be {'pi': ...} or {'theta': ...}")
        try:
            vals = tuple(float(v) for v in next(iter(cfg.policy.values())))
        except (TypeError, ValueError):
            raise ConfigError("policy override needs two finite numbers") from None
        if len(vals) != 2 or not all(math.isfinite(v) for v in vals):
            raise ConfigError("policy override needs two finite numbers")
        if "pi" in keys and not all(0.0 <= v <= 1.0 for v in vals):
            raise ConfigError("pi override must lie in [0,1]^2")
        if "theta" in keys:
            p = sol.params
            for beta, tv in zip((p.beta1, p.beta2), vals):
                if beta == 0.0 and tv != 0.0:
                    raise ConfigError(
                        "theta override must be 0 for a line with beta = 0 "
                        "(its distortion penalty is infinite otherwise)")
    elif cfg.policy != "Optimal":
        raise ConfigError("policy must be 'Optimal' or an override dict")
    return t_max


def _gen(seed: int, block: int, role: int) -> np.random.Generator:
    # 128-bit Philox key: one word for the user seed, one packing the
    # block index and stream role
    return np.random.Generator(np.random.Philox(key=np.array(
        [seed & 0xFFFFFFFFFFFFFFFF, (block << 4) | role], dtype=np.uint64)))


def _normals(gen: np.random.Generator, m: int, dtype) -> np.ndarray:
    # float32 runs draw single-precision normals (twice the throughput);
    # float64 runs draw doubles so the two-line consistency check sees
    # the identical stream.
    if dtype == np.float32:
        return gen.standard_normal(m, dtype=np.float32)
    return gen.standard_normal(m)


def _horner(coefs: np.ndarray, t: np.ndarray) -> np.ndarray:
    """Evaluate an ascending-coefficient power series at t, in t's dtype."""
    r = np.full_like(t, coefs[-1])
    for c in coefs[-2::-1]:
        r *= t
        r += c
    return r


class _Coeffs:
    """Per-step coefficient evaluators for one solution + policy.

    Region 1 (x < w0): drift and volatility are linear in x; the penalty
    rate is proportional to g(x) = K2 (x/w0)^gamma1, fitted as a
    Chebyshev series in sqrt(x/w0) (fractional power, so the fit is only
    ~1e-4 absolute; it enters nothing but the small penalty rate there).
    Region 2 (w0 <= x <= b*): constant volatility coefficients, drift
    N2 - 2 N3 v(x), penalty rate N3 v(x)^2 g(x); these are fitted on
    [w0, b*], the fit checked against the closed forms, and converted to
    power series in the scaled variable for cheap Horner evaluation.
    """

    def __init__(self, sol: ClosedFormSolution, policy, dtype):
        p = sol.params
        th = sol.thresholds
        self.dtype = dtype
        self.w0 = th.w0
        self.bstar = sol.bstar
        self.gamma1 = sol.gamma1
        self.k2 = sol.K2
        r1 = th.w0 / th.w1 if math.isfinite(th.w1) else 0.0
        r2 = th.w0 / th.w2 if math.isfinite(th.w2) else 0.0
        s1, s2 = p.sigma1, p.sigma2
        c1 = 1.0 / th.w1 if math.isfinite(th.w1) else 0.0
        c2 = 1.0 / th.w2 if math.isfinite(th.w2) else 0.0
        # scaled variable t = kmap x + cmap maps [w0, b*] to [-1, 1]
        self.kmap = 2.0 / (self.bstar - self.w0)
        self.cmap = -(self.bstar + self.w0) / (self.bstar - self.w0)

        if isinstance(policy, dict) and "pi" in policy:
            q1, q2 = (float(v) for v in policy["pi"])
            self.mode = "pi_override"
            self.pi_c = (q1, q2)
            self.drift_mu = p.mu1 * q1 + p.mu2 * q2
            # the drift reduction and the penalty rate both carry
            # B = beta1 s1^2 q1^2 + beta2 s2^2 q2^2 through gog = g'/g
            self.bq = p.beta1 * s1 ** 2 * q1 ** 2 + p.beta2 * s2 ** 2 * q2 ** 2
        else:
            th1_0 = p.beta1 * s1 * sol.gamma1 * c1
            th2_0 = p.beta2 * s2 * sol.gamma1 * c2
            if isinstance(policy, dict):
                self.mode = "theta_override"
                th1_0, th2_0 = (float(v) for v in policy["theta"])
                # region-2 drift is constant when theta is pinned
                self.dr2 = (p.mu1 - s1 * th1_0) * r1 + (p.mu2 - s2 * th2_0) * r2
            else:
                self.mode = "optimal"
                self.n2 = th.N2
                self.n3x2 = 2.0 * th.N3
            self.cw1, self.cw2 = s1 * c1, s2 * c2
            self.d1 = (p.mu1 - s1 * th1_0) * c1 + (p.mu2 - s2 * th2_0) * c2
            self.p1 = (th1_0 ** 2 / (2 * p.beta1) if p.beta1 > 0 else 0.0) \
                + (th2_0 ** 2 / (2 * p.beta2) if p.beta2 > 0 else 0.0)
        self._fit(sol, th)

    def _fit_checked(self, xs, ys, what):
        scale = float(np.max(np.abs(ys))) or 1.0
        for deg in (8, 12, 16, 20, 24):
            ch = _cheb.Chebyshev.fit(xs, ys, deg, domain=[self.w0, self.bstar])
            err = float(np.max(np.abs(ch(xs) - ys)))
            if err <= 1e-8 * scale:
                break
        else:
            raise ConfigError(
                "region-2 %s fit error %.2e exceeds tolerance" % (what, err))
        return ch, _cheb.cheb2poly(ch.coef)

    def _fit(self, sol, th):
        xs = np.linspace(self.w0, self.bstar, 2001)
        v = np.asarray(sol.v(xs), dtype=float)
        g2 = sol.g(xs)
        self.fit_v, self.pow_v = self._fit_checked(xs, v, "v")
        self.fit_g2, self.pow_g2 = self._fit_checked(xs, g2, "g")
        self.fit_pen2, self.pow_pen2 = self._fit_checked(
            xs, th.N3 * v * v * g2, "penalty")
        if self.mode == "optimal":
            _, self.pow_drift2 = self._fit_checked(
                xs, th.N2 - 2.0 * th.N3 * v, "drift")
        elif self.mode == "pi_override":
            _, self.pow_pen_pi = self._fit_checked(
                xs, 0.5 * self.bq * v * v * g2, "penalty")
        # region-1 value g(x) = K2 (x/w0)^gamma as a series in sqrt(x/w0)
        ys = np.linspace(0.0, 1.0, 2001)
        ref1 = self.k2 * ys ** (2.0 * self.gamma1)
        self.fit_g1 = _cheb.Chebyshev.fit(ys, ref1, 40, domain=[0.0, 1.0])
        self.g1_abs_err = float(np.max(np.abs(self.fit_g1(ys) - ref1)))

    # float64 evaluators; inputs may sit anywhere in [0, bstar] ----------

    def v_of(self, x):
        return self.fit_v(np.clip(x, self.w0, self.bstar))

    def g_of(self, x):
        out = self.fit_g2(np.clip(x, self.w0, self.bstar))
        r1 = x < self.w0
        if r1.any():
            y = np.sqrt(np.clip(x[r1] / self.w0, 0.0, 1.0))
            out[r1] = self.fit_g1(y)
        return out

    def pen_of(self, x):
        """Penalty rate under the optimal feedback (or pinned theta)."""
        if self.mode == "theta_override":
            return self.p1 * self.g_of(x)
        out = self.fit_pen2(np.clip(x, self.w0, self.bstar))
        r1 = x < self.w0
        if r1.any():
            y = np.sqrt(np.clip(x[r1] / self.w0, 0.0, 1.0))
            out[r1] = self.p1 * self.fit_g1(y)
        return out

    def gog_of(self, x):
        """g'/g: gamma1/x below w0, v(x) from w0 up."""
        out = self.fit_v(np.clip(x, self.w0, self.bstar))
        r1 = x < self.w0
        if r1.any():
            out[r1] = self.gamma1 / np.maximum(x[r1], 1e-300)
        return out


def _trivial_result(sol, cfg, x_total: float, n: int,
                    with_lines: bool = False) -> SimResult:
    j = sol.params.a2 * x_total
    per = None
    if cfg.keep_paths:
        per = {"ruin_time": np.zeros(n), "dividends": np.full(n, float(x_total)),
               "penalty": np.zeros(n)}
    return SimResult(j_hat=j, std_err=0.0, ruined_fraction=1.0,
                     mean_ruin_time=0.0, paths_truncated=0, n_paths=n,
                     dividends_mean=float(x_total), penalty_mean=0.0,
                     l1_mean=0.0 if with_lines else None,
                     l2_mean=0.0 if with_lines else None, per_path=per)


def _finalize(sol, cfg, n, div_acc, pen_acc, ruin_t, n_units,
              l1=None, l2=None) -> SimResult:
    j = sol.params.a2 * div_acc + pen_acc
    if cfg.antithetic:
        pair = 0.5 * (j[:n_units] + j[n_units:])
        j_hat = float(pair.mean())
        se = float(pair.std(ddof=1) / math.sqrt(n_units)) if n_units > 1 else 0.0
    else:
        j_hat = float(j.mean())
        se = float(j.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    ruined = ~np.isnan(ruin_t)
    res = SimResult(
        j_hat=j_hat, std_err=se, ruined_fraction=float(ruined.mean()),
        mean_ruin_time=float(ruin_t[ruined].mean()) if ruined.any() else 0.0,
        paths_truncated=int((~ruined).sum()), n_paths=n,
        dividends_mean=float(div_acc.mean()), penalty_mean=float(pen_acc.mean()),
        l1_mean=None if l1 is None else float(l1.mean()),
        l2_mean=None if l2 is None else float(l2.mean()))
    if cfg.keep_paths:
        res.per_path = {"ruin_time": ruin_t, "dividends": div_acc,
                        "penalty": pen_acc}
    return res


def simulate_aggregate(sol: ClosedFormSolution, cfg: SimConfig) -> SimResult:
    """Estimate the robust objective from the one-dimensional aggregate."""
    t_max = _check_cfg(sol, cfg, "Aggregate")
    x0 = float(cfg.x0)
    if sol.regime is Regime.Degenerate:
        return _trivial_result(sol, cfg, x0, cfg.n_paths)
    if x0 == 0.0:
        return _trivial_result(sol, cfg, 0.0, cfg.n_paths)

    lump = max(x0 - sol.bstar, 0.0)
    x_start = min(x0, sol.bstar)
    n = cfg.n_paths
    rows = 2 if cfg.antithetic else 1
    n_units = n // rows
    dtype = np.float32 if cfg.dtype == "float32" else np.float64
    co = _Coeffs(sol, cfg.policy, dtype)

    div_acc = np.zeros(n)
    pen_acc = np.zeros(n)
    ruin_t = np.full(n, np.nan)
    traces = [] if cfg.trace else None

    for bi, b0 in enumerate(range(0, n_units, _BLOCK)):
        m = min(_BLOCK, n_units - b0)
        bdiv, bpen, brt = _run_block_aggregate(
            sol, co, cfg, t_max, x_start, rows, m,
            _gen(cfg.seed, bi, 0), _gen(cfg.seed, bi, 1), traces)
        for r in range(rows):
            sl = slice(r * n_units + b0, r * n_units + b0 + m)
            div_acc[sl] = bdiv[r]
            pen_acc[sl] = bpen[r]
            ruin_t[sl] = brt[r]

    div_acc += lump
    res = _finalize(sol, cfg, n, div_acc, pen_acc, ruin_t, n_units)
    if cfg.trace:
        res.trace = np.array(traces)
    return res


def _run_block_aggregate(sol, co, cfg, t_max, x_start, rows, m, gen1, gen2,
                         traces):
    p = sol.params
    dtype = co.dtype
    dt = cfg.dt
    n_steps = int(round(t_max / dt))
    stride = cfg.penalty_stride
    pi_mode = co.mode == "pi_override"
    has_pen = p.beta_tilde1 > 0.0 or p.beta_tilde2 > 0.0
    if co.mode == "theta_override" and co.p1 == 0.0:
        has_pen = False
    if pi_mode and co.bq == 0.0:
        has_pen = False
    signs = np.array([1.0, -1.0][:rows], dtype=dtype)[:, None]
    rho_f = dtype(p.rho)
    rhoc_f = dtype(math.sqrt(1.0 - p.rho ** 2))
    dt_f = dtype(dt)
    sdt_f = dtype(math.sqrt(dt))
    w0_f = dtype(co.w0)
    bstar_f = dtype(co.bstar)
    zero_f = dtype(0)
    kmap_f = dtype(co.kmap)
    cmap_f = dtype(co.cmap)
    gamma_f = dtype(co.gamma1)
    pen_w = dt * stride
    if pi_mode:
        q1, q2 = co.pi_c
        volz1 = dtype(p.sigma1 * q1)
        volz2 = dtype(p.sigma2 * q2)
        mu_f = dtype(co.drift_mu)
        bq_f = dtype(co.bq)
        pow_pen = co.pow_pen_pi.astype(dtype) if has_pen else None
        pen_r1_c = 0.5 * co.bq * co.gamma1 ** 2     # times g(x)/x^2 below w0
    else:
        d1_f = dtype(co.d1)
        cw1_f = dtype(co.cw1)
        cw2_f = dtype(co.cw2)
        if co.mode == "optimal":
            pow_drift2 = co.pow_drift2.astype(dtype)
            pow_pen = co.pow_pen2.astype(dtype)
        else:
            dr2_f = dtype(co.dr2)
            pow_pen = (co.p1 * co.pow_g2).astype(dtype)
        pen_r1_c = co.p1
    pow_v = co.pow_v.astype(dtype)

    # full-block result arrays; working arrays compact as columns die
    div_full = np.zeros((rows, m))
    pen_full = np.zeros((rows, m))
    rt_full = np.full((rows, m), np.nan)
    x = np.full((rows, m), dtype(x_start), dtype=dtype)
    alive = np.ones((rows, m), dtype=bool)
    div = np.zeros((rows, m))
    pen = np.zeros((rows, m))
    rt = np.full((rows, m), np.nan)
    col = np.arange(m)

    for step in range(n_steps):
        if not alive.any():
            break
        t = step * dt
        disc = math.exp(-p.delta * t)
        ts = kmap_f * x + cmap_f          # scaled position, [-1,1] in region 2
        r1m = x < w0_f
        any_r1 = bool(r1m.any())

        if has_pen and step % stride == 0:
            rate = _horner(pow_pen, ts)
            if any_r1:
                y = np.sqrt(np.maximum(x[r1m], zero_f) / w0_f)
                g1v = co.fit_g1(y.astype(float))
                if pi_mode:
                    xr = np.maximum(x[r1m].astype(float), 1e-30)
                    rate[r1m] = pen_r1_c * g1v / (xr * xr)
                else:
                    rate[r1m] = pen_r1_c * g1v
            pen += np.where(alive, (disc * pen_w) * rate.astype(float, copy=False), 0.0)

        mcur = x.shape[1]
        u1 = _normals(gen1, mcur, dtype)
        u2 = _normals(gen2, mcur, dtype)
        z1 = signs * u1
        z2 = signs * (rho_f * u1 + rhoc_f * u2)

        if pi_mode:
            if co.bq != 0.0:
                gog = _horner(pow_v, ts)
                if any_r1:
                    gog[r1m] = gamma_f / np.maximum(x[r1m], dtype(1e-30))
                drift = mu_f - bq_f * gog
            else:
                drift = mu_f
            dx = drift * dt_f + sdt_f * (volz1 * z1 + volz2 * z2)
        else:
            if co.mode == "optimal":
                drift = _horner(pow_drift2, ts)
            else:
                drift = np.full_like(x, dr2_f)
            drift = np.where(r1m, d1_f * x, drift)
            volc = np.minimum(x, w0_f)
            dx = drift * dt_f + volc * (cw1_f * z1 + cw2_f * z2) * sdt_f

        xn = x + dx
        over = np.maximum(xn - bstar_f, zero_f)
        div += np.where(alive, disc * over.astype(float, copy=False), 0.0)
        xn = np.minimum(xn, bstar_f)
        dead_now = alive & (xn <= 0)
        if dead_now.any():
            rt[dead_now] = t + dt
            alive &= ~dead_now
        x = np.where(alive, xn, zero_f)

        if traces is not None:
            full = np.zeros((rows, m))
            full[:, col] = x.astype(float)
            traces.append(full)
        elif step % _COMPACT_EVERY == _COMPACT_EVERY - 1:
            keep = alive.any(axis=0)
            if keep.mean() < _COMPACT_BELOW:
                drop = ~keep
                cd = col[drop]
                div_full[:, cd] = div[:, drop]
                pen_full[:, cd] = pen[:, drop]
                rt_full[:, cd] = rt[:, drop]
                x = np.ascontiguousarray(x[:, keep])
                alive = np.ascontiguousarray(alive[:, keep])
                div = np.ascontiguousarray(div[:, keep])
                pen = np.ascontiguousarray(pen[:, keep])
                rt = np.ascontiguousarray(rt[:, keep])
                col = col[keep]

    div_full[:, col] = div
    pen_full[:, col] = pen
    rt_full[:, col] = rt
    return div_full, pen_full, rt_full


def simulate_two_lines(sol: ClosedFormSolution, cfg: SimConfig) -> SimResult:
    """Joint simulation of (X1, X2) with the transfer/dividend rules.

    Rules applied each step (and once at t=0), with b = b*:
      ruin when X1 + X2 <= 0;
      if x1 > b: transfer x1 - b from Line 1 to Line 2;
      if x1 + x2 > b: Line 2 pays x1 + x2 - b as the dividend;
      a negative component is topped up to 0 by the other line.
    The aggregate X1 + X2 then follows the dynamics of
    simulate_aggregate step for step (same Philox streams, float64).
    """
    t_max = _check_cfg(sol, cfg, "TwoLine")
    p = sol.params
    x1_0, x2_0 = float(cfg.x1), float(cfg.x2)
    n = cfg.n_paths
    if sol.regime is Regime.Degenerate:
        return _trivial_result(sol, cfg, x1_0 + x2_0, n, with_lines=True)
    if x1_0 + x2_0 == 0.0:
        return _trivial_result(sol, cfg, 0.0, n, with_lines=True)
    if isinstance(cfg.policy, dict):
        raise ConfigError("TwoLine mode supports only the Optimal policy")

    rows = 2 if cfg.antithetic else 1
    n_units = n // rows
    co = _Coeffs(sol, "Optimal", np.float64)
    th = sol.thresholds
    dt, sdt = cfg.dt, math.sqrt(cfg.dt)
    rho_c = math.sqrt(1.0 - p.rho ** 2)
    n_steps = int(round(t_max / dt))
    stride = cfg.penalty_stride
    has_pen = p.beta_tilde1 > 0.0 or p.beta_tilde2 > 0.0
    bstar, w0 = sol.bstar, th.w0
    iw1 = 1.0 / th.w1 if math.isfinite(th.w1) else 0.0
    iw2 = 1.0 / th.w2 if math.isfinite(th.w2) else 0.0
    s1, s2 = p.sigma1, p.sigma2
    b1s1, b2s2 = p.beta1 * s1, p.beta2 * s2
    th1_c = b1s1 * sol.gamma1 * iw1
    th2_c = b2s2 * sol.gamma1 * iw2

    div_all = np.zeros(n)
    pen_all = np.zeros(n)
    l1_all = np.zeros(n)
    l2_all = np.zeros(n)
    rt_all = np.full(n, np.nan)
    traces = [] if cfg.trace else None

    def apply_rules(x1, x2, alive):
        """Returns updated states, the newly-dead mask, the amounts
        leaving each line, and the dividend, all masked to live paths."""
        dead = alive & (x1 + x2 <= 0.0)
        live = alive & ~dead
        tr_a = np.where(live & (x1 > bstar), x1 - bstar, 0.0)
        x1 = x1 - tr_a
        x2 = x2 + tr_a
        ov = np.where(live, np.maximum(x1 + x2 - bstar, 0.0), 0.0)
        x2 = x2 - ov
        up1 = np.where(live & (x1 < 0.0), -x1, 0.0)   # line 2 tops up line 1
        x1 = x1 + up1
        x2 = x2 - up1
        up2 = np.where(live & (x2 < 0.0), -x2, 0.0)   # line 1 tops up line 2
        x2 = x2 + up2
        x1 = x1 - up2
        return x1, x2, dead, tr_a + up2, up1, ov

    for bi, b0 in enumerate(range(0, n_units, _BLOCK)):
        m = min(_BLOCK, n_units - b0)
        gen1, gen2 = _gen(cfg.seed, bi, 0), _gen(cfg.seed, bi, 1)
        signs = np.array([1.0, -1.0][:rows])[:, None]
        x1 = np.full((rows, m), x1_0)
        x2 = np.full((rows, m), x2_0)
        alive = np.ones((rows, m), dtype=bool)
        div = np.zeros((rows, m))
        pen = np.zeros((rows, m))
        l1s = np.zeros((rows, m))
        l2s = np.zeros((rows, m))
        rt = np.full((rows, m), np.nan)
        div_full = np.zeros((rows, m))
        pen_full = np.zeros((rows, m))
        l1_full = np.zeros((rows, m))
        l2_full = np.zeros((rows, m))
        rt_full = np.full((rows, m), np.nan)
        col = np.arange(m)

        # time-0 cascade: initial transfers plus the lump dividend
        x1, x2, dead0, from1, from2, ov0 = apply_rules(x1, x2, alive)
        div += ov0
        l1s += from1
        l2s += from2
        if dead0.any():
            rt[dead0] = 0.0
            alive &= ~dead0
        x1 = np.where(alive, x1, 0.0)
        x2 = np.where(alive, x2, 0.0)

        for step in range(n_steps):
            if not alive.any():
                break
            t = step * dt
            disc = math.exp(-p.delta * t)
            agg = x1 + x2

            if has_pen and step % stride == 0:
                pen += np.where(alive, (disc * dt * stride) * co.pen_of(agg), 0.0)

            mcur = x1.shape[1]
            u1 = gen1.standard_normal(mcur)
            u2 = gen2.standard_normal(mcur)
            z1 = signs * u1
            z2 = signs * (p.rho * u1 + rho_c * u2)

            r1m = agg < w0
            scale = np.minimum(agg, w0)
            pi1 = scale * iw1
            pi2 = scale * iw2
            gog = co.v_of(agg)
            th1 = np.where(r1m, th1_c, b1s1 * pi1 * gog)
            th2 = np.where(r1m, th2_c, b2s2 * pi2 * gog)
            dx1 = pi1 * ((p.mu1 - s1 * th1) * dt + s1 * sdt * z1)
            dx2 = pi2 * ((p.mu2 - s2 * th2) * dt + s2 * sdt * z2)
            x1 = x1 + np.where(alive, dx1, 0.0)
            x2 = x2 + np.where(alive, dx2, 0.0)

            x1, x2, dead_now, from1, from2, ov = apply_rules(x1, x2, alive)
            div += disc * ov
            l1s += from1
            l2s += from2
            if dead_now.any():
                rt[dead_now] = t + dt
                alive &= ~dead_now
            x1 = np.where(alive, x1, 0.0)
            x2 = np.where(alive, x2, 0.0)

            if traces is not None:
                full = np.zeros((rows, m))
                full[:, col] = x1 + x2
                traces.append(full)
            elif step % _COMPACT_EVERY == _COMPACT_EVERY - 1:
                keep = alive.any(axis=0)
                if keep.mean() < _COMPACT_BELOW:
                    drop = ~keep
                    cd = col[drop]
                    div_full[:, cd] = div[:, drop]
                    pen_full[:, cd] = pen[:, drop]
                    l1_full[:, cd] = l1s[:, drop]
                    l2_full[:, cd] = l2s[:, drop]
                    rt_full[:, cd] = rt[:, drop]
                    x1 = np.ascontiguousarray(x1[:, keep])
                    x2 = np.ascontiguousarray(x2[:, keep])
                    alive = np.ascontiguousarray(alive[:, keep])
                    div = np.ascontiguousarray(div[:, keep])
                    pen = np.ascontiguousarray(pen[:, keep])
                    l1s = np.ascontiguousarray(l1s[:, keep])
                    l2s = np.ascontiguousarray(l2s[:, keep])
                    rt = np.ascontiguousarray(rt[:, keep])
                    col = col[keep]

        div_full[:, col] = div
        pen_full[:, col] = pen
        l1_full[:, col] = l1s
        l2_full[:, col] = l2s
        rt_full[:, col] = rt
        for r in range(rows):
            sl = slice(r * n_units + b0, r * n_units + b0 + m)
            div_all[sl] = div_full[r]
            pen_all[sl] = pen_full[r]
            l1_all[sl] = l1_full[r]
            l2_all[sl] = l2_full[r]
            rt_all[sl] = rt_full[r]

    res = _finalize(sol, cfg, n, div_all, pen_all, rt_all, n_units,
                    l1=l1_all, l2=l2_all)
    if cfg.trace:
        res.trace = np.array(traces)
    return res


def challenge_objective(sol: ClosedFormSolution, cfg: SimConfig) -> SimResult:
    """Objective estimate with one side overridden, the other optimal.

    A pinned theta plays against the optimal feedback retention; a
    pinned retention plays against the analytic adversary response
    theta_i = beta_i sigma_i pi_i g'(X)/g(X).  The dividend barrier
    stays at b*.
    """
    if not isinstance(cfg.policy, dict):
        raise ConfigError("challenge_objective needs a policy override")
    return simulate_aggregate(sol, cfg)


def refinement_pair(sol: ClosedFormSolution, x0: float, dt: float,
                    n_paths: int, seed: int = 0, t_max: float = None,
                    refine: int = 4) -> dict:
    """Common-random-number estimate of j at step dt and dt/refine.

    The coarse path consumes the scaled sums of `refine` fine Gaussian
    increments, so the difference of the two estimates isolates the
    time-discretization bias with far less noise than independent runs.
    """
    p = sol.params
    if t_max is None:
        t_max = 40.0 / p.delta
    co = _Coeffs(sol, "Optimal", np.float64)
    lump = max(x0 - sol.bstar, 0.0)
    x_start = min(x0, sol.bstar)
    dtf = dt / refine
    sdtf = math.sqrt(dtf)
    sdtc = math.sqrt(dt)
    rho_c = math.sqrt(1.0 - p.rho ** 2)
    n_coarse = int(round(t_max / dt))
    w0, bstar, delta = co.w0, sol.bstar, p.delta
    root_r = math.sqrt(refine)

    jc = np.zeros(n_paths)
    jf = np.zeros(n_paths)

    def step_state(x, alive, z1, z2, h, sh, disc, div, pen, col):
        pen[col] += np.where(alive, (disc * h) * co.pen_of(x), 0.0)
        r1m = x < w0
        drift = np.where(r1m, co.d1 * x, co.n2 - co.n3x2 * co.v_of(x))
        volc = np.minimum(x, w0)
        xn = x + drift * h + volc * (co.cw1 * z1 + co.cw2 * z2) * sh
        over = np.maximum(xn - bstar, 0.0)
        div[col] += np.where(alive, disc * over, 0.0)
        xn = np.minimum(xn, bstar)
        alive = alive & (xn > 0.0)
        return np.where(alive, xn, 0.0), alive

    for bi, b0 in enumerate(range(0, n_paths, _BLOCK)):
        m = min(_BLOCK, n_paths - b0)
        gen1, gen2 = _gen(seed, bi, 2), _gen(seed, bi, 3)
        xc = np.full(m, x_start)
        xf = np.full(m, x_start)
        alive_c = np.ones(m, dtype=bool)
        alive_f = np.ones(m, dtype=bool)
        divc = np.zeros(m)
        penc = np.zeros(m)
        divf = np.zeros(m)
        penf = np.zeros(m)
        col = np.arange(m)

        for kc in range(n_coarse):
            if not (alive_c.any() or alive_f.any()):
                break
            mcur = xc.shape[0]
            s1acc = np.zeros(mcur)
            s2acc = np.zeros(mcur)
            for kf in range(refine):
                disc = math.exp(-delta * (kc * dt + kf * dtf))
                u1 = gen1.standard_normal(mcur)
                u2 = gen2.standard_normal(mcur)
                s1acc += u1
                s2acc += u2
                z2 = p.rho * u1 + rho_c * u2
                xf, alive_f = step_state(xf, alive_f, u1, z2, dtf, sdtf,
                                         disc, divf, penf, col)
            disc = math.exp(-delta * kc * dt)
            z1c = s1acc / root_r
            z2c = (p.rho * s1acc + rho_c * s2acc) / root_r
            xc, alive_c = step_state(xc, alive_c, z1c, z2c, dt, sdtc,
                                     disc, divc, penc, col)
            if kc % _COMPACT_EVERY == _COMPACT_EVERY - 1:
                keep = alive_c | alive_f
                if keep.mean() < _COMPACT_BELOW:
                    xc, xf = xc[keep], xf[keep]
                    alive_c, alive_f = alive_c[keep], alive_f[keep]
                    col = col[keep]

        jc[b0:b0 + m] = p.a2 * (divc + lump) + penc
        jf[b0:b0 + m] = p.a2 * (divf + lump) + penf

    d = jf - jc
    return {
        "j_coarse": float(jc.mean()),
        "se_coarse": float(jc.std(ddof=1) / math.sqrt(n_paths)),
        "j_fine": float(jf.mean()),
        "se_fine": float(jf.std(ddof=1) / math.sqrt(n_paths)),
        "diff": float(d.mean()),
        "se_diff": float(d.std(ddof=1) / math.sqrt(n_paths)),
        "dt": dt, "dt_fine": dtf, "n_paths": n_paths,
    }


def write_path_csv(path: str, res: SimResult) -> None:
    """Per-path dump: path_id, ruin_time, discounted dividends, penalty."""
    if res.per_path is None:
        raise ConfigError("per-path data not retained; set keep_paths")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["path_id", "ruin_time", "discounted_dividends",
                    "discounted_penalty"])
        rtv = res.per_path["ruin_time"]
        dv = res.per_path["dividends"]
        pv = res.per_path["penalty"]
        for i in range(len(rtv)):
            rt = "" if math.isnan(float(rtv[i])) else repr(float(rtv[i]))
            w.writerow([i, rt, repr(float(dv[i])), repr(float(pv[i]))])
