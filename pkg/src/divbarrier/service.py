"""HTTP service exposing the solver.

FastAPI app with pydantic request/response models wrapping the core
package: classification, closed-form solving, curve evaluation,
dynamic-programming verification, Monte Carlo simulation, and reference
table reproduction.  The CLI offers the same operations for local use;
this module is the programmatic surface.

JSON cannot carry IEEE infinities portably, so non-finite numbers
(e.g. w1 for a full-cession regime) are serialized as null.
"""
from __future__ import annotations

import math
from typing import Literal

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from . import __version__
from .closed_form import classify, solve, strategy
from .errors import DivBarrierError, ValidationError, ConfigError
from .goldens import TOL_BSTAR, TOL_W0, table_rows
from .params import params_from_config
from .simulate import SimConfig, simulate_aggregate, simulate_two_lines
from .verify import run_verify

app = FastAPI(title="divbarrier", version=__version__)


class ParamsIn(BaseModel):
    mu1: float
    mu2: float
    sigma1: float
    sigma2: float
    rho: float
    delta: float
    a1: float
    a2: float | None = None
    beta1: float = Field(ge=0)
    beta2: float = Field(ge=0)

    def to_model(self):
        doc = self.model_dump()
        if doc["a2"] is None:
            doc.pop("a2")
        try:
            return params_from_config(doc)
        except (ValidationError, ConfigError) as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc


def _clean(value):
    """Replace non-finite floats with None so the JSON body stays portable."""
    if isinstance(value, float):
        return value if math.isfinite(value) else None
    if isinstance(value, dict):
        return {k: _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    return value


def _solve_or_422(params, root_policy):
    try:
        return solve(params, root_policy=root_policy)
    except DivBarrierError as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc


class ClassifyOut(BaseModel):
    regime: str
    gamma1: float | None
    gamma1_roots: list[float]
    psi_variant: str | None
    psi_coeffs: list[float] | None
    swapped: bool


class SolutionOut(BaseModel):
    regime: str
    gamma1: float | None
    gamma1_roots: list[float]
    w1: float | None
    w2: float | None
    w0: float | None
    N1: float | None
    N2: float | None
    N3: float | None
    gamma2_plus: float | None
    gamma2_minus: float | None
    eq_branch: bool | None
    K2: float | None
    K3: float | None
    K4: float | None
    bstar: float
    v_bstar: float | None
    psi_variant: str | None
    swapped: bool
    root_policy: str
    params: dict


class SolveRequest(BaseModel):
    params: ParamsIn
    root_policy: Literal["smallest", "largest", "table"] = "smallest"


@app.get("/health")
def health() -> dict:
    return {"status": "ok", "version": __version__}


@app.post("/classify", response_model=ClassifyOut)
def post_classify(req: SolveRequest):
    params = req.params.to_model()
    try:
        doc = classify(params, root_policy=req.root_policy)
    except DivBarrierError as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc
    return _clean(doc)


@app.post("/solve", response_model=SolutionOut)
def post_solve(req: SolveRequest):
    sol = _solve_or_422(req.params.to_model(), req.root_policy)
    return _clean(sol.report_dict())


class EvalRequest(BaseModel):
    params: ParamsIn
    x: list[float]
    root_policy: Literal["smallest", "largest", "table"] = "smallest"


class EvalPoint(BaseModel):
    x: float
    g: float
    g_prime: float | None
    pi1: float | None
    pi2: float | None
    theta1: float | None
    theta2: float | None
    entropy_rate: float | None


@app.post("/eval", response_model=list[EvalPoint])
def post_eval(req: EvalRequest):
    sol = _solve_or_422(req.params.to_model(), req.root_policy)
    out = []
    for x in req.x:
        if x < 0:
            raise HTTPException(status_code=422, detail="x must be >= 0")
        pt = strategy(sol, x, allow_sentinel=True)
        rec = {"x": x, "g": float(sol.g(x)), "g_prime": float(sol.g_prime(x))}
        if pt.irrelevant:
            rec.update(pi1=None, pi2=None, theta1=None, theta2=None,
                       entropy_rate=None)
        else:
            rec.update(pi1=pt.pi1, pi2=pt.pi2, theta1=pt.theta1,
                       theta2=pt.theta2, entropy_rate=pt.entropy_rate)
        out.append(_clean(rec))
    return out


class VerifyRequest(BaseModel):
    params: ParamsIn
    grid_n: int = Field(default=512, ge=16, le=8192)


@app.post("/verify")
def post_verify(req: VerifyRequest) -> dict:
    try:
        report = run_verify(req.params.to_model(), n_grid=req.grid_n)
    except DivBarrierError as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc
    return _clean(report.as_dict())


class SimulateRequest(BaseModel):
    params: ParamsIn
    x0: float | None = None
    x1: float | None = None
    x2: float | None = None
    dt: float = Field(default=1e-3, gt=0)
    n_paths: int = Field(default=10_000, ge=1, le=2_000_000)
    t_max: float | None = None
    seed: int = 0
    mode: Literal["Aggregate", "TwoLine"] = "Aggregate"
    policy_pi: tuple[float, float] | None = None
    policy_theta: tuple[float, float] | None = None
    antithetic: bool = False
    penalty_stride: int = Field(default=1, ge=1)
    dtype: Literal["float32", "float64"] = "float32"


class SimulateOut(BaseModel):
    j_hat: float
    std_err: float
    ruined_fraction: float
    mean_ruin_time: float
    paths_truncated: int
    n_paths: int
    dividends_mean: float
    penalty_mean: float
    l1_mean: float | None = None
    l2_mean: float | None = None
    g_exact: float


@app.post("/simulate", response_model=SimulateOut)
def post_simulate(req: SimulateRequest):
    sol = _solve_or_422(req.params.to_model(), "smallest")
    policy: object = "Optimal"
    if req.policy_pi is not None and req.policy_theta is not None:
        raise HTTPException(status_code=422,
                            detail="give at most one policy override")
    if req.policy_pi is not None:
        policy = {"pi": req.policy_pi}
    elif req.policy_theta is not None:
        policy = {"theta": req.policy_theta}
    cfg = SimConfig(x0=req.x0, x1=req.x1, x2=req.x2, dt=req.dt,
                    n_paths=req.n_paths, t_max=req.t_max, seed=req.seed,
                    mode=req.mode, policy=policy, antithetic=req.antithetic,
                    penalty_stride=req.penalty_stride, dtype=req.dtype)
    try:
        if req.mode == "TwoLine":
            res = simulate_two_lines(sol, cfg)
            x_ref = float(req.x1) + float(req.x2)
        else:
            res = simulate_aggregate(sol, cfg)
            x_ref = float(req.x0)
    except DivBarrierError as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc
    doc = res.as_dict()
    doc["g_exact"] = float(sol.g(x_ref))
    if "l1_mean" not in doc:
        doc["l1_mean"] = None
        doc["l2_mean"] = None
    return doc


class ReproduceRow(BaseModel):
    beta1: float
    beta2: float
    w0: float
    w0_ref: float
    bstar: float
    bstar_ref: float
    ok: bool


class ReproduceOut(BaseModel):
    table: str
    rows: list[ReproduceRow]
    passed: bool


@app.get("/reproduce/{table}", response_model=ReproduceOut)
def get_reproduce(table: str):
    try:
        rows = table_rows(table)
    except KeyError:
        raise HTTPException(status_code=404,
                            detail=f"unknown table {table!r}") from None
    out = []
    passed = True
    for cfg, w0_ref, bstar_ref in rows:
        sol = solve(params_from_config(cfg))
        ok = (abs(sol.thresholds.w0 - w0_ref) <= TOL_W0
              and abs(sol.bstar - bstar_ref) <= TOL_BSTAR)
        passed &= ok
        out.append(ReproduceRow(
            beta1=cfg["beta1"], beta2=cfg["beta2"], w0=sol.thresholds.w0,
            w0_ref=w0_ref, bstar=sol.bstar, bstar_ref=bstar_ref, ok=ok))
    return ReproduceOut(table=table, rows=out, passed=passed)
