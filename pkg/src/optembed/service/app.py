"""FastAPI service wrapping the embedding core.

Stateless: every request carries the predictor JSON and input box; responses
carry artifacts as text. Domain errors map to HTTP 400 with a structured
body, so thin clients can translate them into exit codes.
"""

from __future__ import annotations

import math

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__
from ..bounds import attach_bounds, propagate
from ..errors import DimensionError, OptEmbedError, ParseError, UnboundedInput
from ..export import lp_text, model_json_text
from ..formulate import add_predictor, entry_value, witness_assignment
from ..graybox import make_oracle
from ..ir import Interval, Model
from ..predictors import (
    FormulationConfig,
    Predictor,
    ReluVariant,
    dims,
    parse_predictor,
    predict,
)
from .schemas import (
    BoundsRequest,
    BoundsResponse,
    CheckRequest,
    CheckResponse,
    DimsRequest,
    DimsResponse,
    EmbedRequest,
    EmbedResponse,
    OracleRequest,
    OracleResponse,
    PredictRequest,
    PredictResponse,
)

app = FastAPI(title="optembed", version=__version__)


@app.exception_handler(OptEmbedError)
async def _domain_error(request: Request, exc: OptEmbedError) -> JSONResponse:
    return JSONResponse(
        status_code=400, content={"error": type(exc).__name__, "detail": str(exc)}
    )


def _load(obj: dict) -> Predictor:
    p = parse_predictor(obj)
    dims(p)  # force pipeline consistency checks
    return p


def _to_bound(v, what: str) -> float:
    if isinstance(v, str):
        if v == "inf":
            return math.inf
        if v == "-inf":
            return -math.inf
        raise ParseError(what, f"bounds must be numbers or 'inf'/'-inf', got {v!r}")
    return float(v)


def _resolve_box(spec) -> list[Interval]:
    if isinstance(spec, int):
        if spec < 1:
            raise DimensionError("input count must be at least 1")
        return [Interval(0.0, 1.0) for _ in range(spec)]
    return [
        Interval(_to_bound(lo, f"inputs[{i}]"), _to_bound(hi, f"inputs[{i}]"))
        for i, (lo, hi) in enumerate(spec)
    ]


def _config(formulation: str, relu: str, with_hessian: bool) -> FormulationConfig:
    return FormulationConfig(
        relu_variant=ReluVariant(relu),
        reduced_space=formulation == "reduced",
        gray_box=formulation == "graybox",
        with_hessian=with_hessian,
    )


def _build(predictor: dict, inputs, formulation: str, relu: str, with_hessian: bool):
    p = _load(predictor)
    box = _resolve_box(inputs)
    model = Model()
    x = [model.add_variable(iv) for iv in box]
    y, form = add_predictor(model, p, x, _config(formulation, relu, with_hessian))
    attach_bounds(model, form, box)
    return model, p, x, y, form, box


@app.get("/health")
def health() -> dict:
    return {"status": "ok", "version": __version__}


@app.post("/embed", response_model=EmbedResponse)
def embed(req: EmbedRequest) -> EmbedResponse:
    model, _, _, y, _, _ = _build(
        req.predictor, req.inputs, req.formulation, req.relu, req.with_hessian
    )
    artifact = lp_text(model) if req.format == "lp" else model_json_text(model)
    return EmbedResponse(
        vars=model.num_variables,
        cons=model.num_constraints,
        outputs=len(y),
        oracles=len(model.oracles),
        artifact=artifact,
    )


@app.post("/check", response_model=CheckResponse)
def check(req: CheckRequest) -> CheckResponse:
    model, p, x, y, form, box = _build(
        req.predictor, req.inputs, req.formulation, req.relu, req.with_hessian
    )
    for iv in box:
        if not iv.is_finite:
            raise UnboundedInput("witness sampling requires finite input bounds")
    lo = np.array([iv.lo for iv in box])
    hi = np.array([iv.hi for iv in box])
    rng = np.random.default_rng(req.seed)
    max_violation = 0.0
    max_output_error = 0.0
    for _ in range(req.samples):
        x0 = rng.uniform(lo, hi)
        assignment = witness_assignment(model, form, x, x0)
        report = model.check_feasible(assignment, 0.0)
        max_violation = max(max_violation, report.max_violation)
        truth = predict(p, x0)
        for i, entry in enumerate(y):
            err = abs(entry_value(entry, assignment) - float(truth[i]))
            max_output_error = max(max_output_error, err)
    return CheckResponse(
        max_violation=max_violation,
        max_output_error=max_output_error,
        ok=max_violation <= req.tol and max_output_error <= req.tol,
        samples=req.samples,
    )


@app.post("/bounds", response_model=BoundsResponse)
def output_bounds(req: BoundsRequest) -> BoundsResponse:
    p = _load(req.predictor)
    box = _resolve_box(req.inputs)
    out = propagate(p, box)

    def enc(v: float):
        if v == math.inf:
            return "inf"
        if v == -math.inf:
            return "-inf"
        return v

    return BoundsResponse(intervals=[(enc(iv.lo), enc(iv.hi)) for iv in out])


@app.post("/oracle", response_model=OracleResponse)
def oracle(req: OracleRequest) -> OracleResponse:
    p = _load(req.predictor)
    handle = make_oracle(p, FormulationConfig(gray_box=True, with_hessian=req.mode == "hess"))
    x = np.asarray(req.x, dtype=float)
    if req.mode == "eval":
        rows = [handle.eval(x).tolist()]
    elif req.mode == "jac":
        rows = handle.jacobian(x).tolist()
    else:
        rows = handle.hess_lagrangian(x, np.asarray(req.lam, dtype=float)).tolist()
    return OracleResponse(rows=rows)


@app.post("/predict", response_model=PredictResponse)
def forward(req: PredictRequest) -> PredictResponse:
    p = _load(req.predictor)
    return PredictResponse(y=predict(p, np.asarray(req.x, dtype=float)).tolist())


@app.post("/dims", response_model=DimsResponse)
def predictor_dims(req: DimsRequest) -> DimsResponse:
    d = dims(_load(req.predictor))
    return DimsResponse(n_in=d.n_in, n_out=d.n_out)
