"""Pydantic request/response models for the embedding service.

Input boxes are given either as a count (defaulting every input to [0, 1])
or as explicit [lo, hi] pairs where infinite ends are the strings
"inf" / "-inf".
"""

from typing import Literal

from pydantic import BaseModel, Field, model_validator

Bound = float | str
BoxSpec = int | list[tuple[Bound, Bound]]

Formulation = Literal["full", "reduced", "graybox"]
ReluName = Literal["nonsmooth", "bigm", "sos1", "quadratic"]


class EmbedRequest(BaseModel):
    predictor: dict
    inputs: BoxSpec
    formulation: Formulation = "full"
    relu: ReluName = "nonsmooth"
    format: Literal["lp", "json"] = "json"
    with_hessian: bool = True


class EmbedResponse(BaseModel):
    vars: int
    cons: int
    outputs: int
    oracles: int
    artifact: str


class CheckRequest(BaseModel):
    predictor: dict
    inputs: BoxSpec
    formulation: Formulation = "full"
    relu: ReluName = "nonsmooth"
    samples: int = Field(default=100, ge=1)
    tol: float = Field(default=1e-8, gt=0.0)
    seed: int = 0
    with_hessian: bool = True


class CheckResponse(BaseModel):
    max_violation: float
    max_output_error: float
    ok: bool
    samples: int


class BoundsRequest(BaseModel):
    predictor: dict
    inputs: BoxSpec


class BoundsResponse(BaseModel):
    intervals: list[tuple[Bound, Bound]]


class OracleRequest(BaseModel):
    predictor: dict
    x: list[float]
    mode: Literal["eval", "jac", "hess"]
    lam: list[float] | None = None

    @model_validator(mode="after")
    def _hess_needs_multipliers(self) -> "OracleRequest":
        if self.mode == "hess" and self.lam is None:
            raise ValueError("mode 'hess' requires the multiplier vector 'lam'")
        return self


class OracleResponse(BaseModel):
    rows: list[list[float]]


class PredictRequest(BaseModel):
    predictor: dict
    x: list[float]


class PredictResponse(BaseModel):
    y: list[float]


class DimsRequest(BaseModel):
    predictor: dict


class DimsResponse(BaseModel):
    n_in: int | None
    n_out: int | None


class ErrorBody(BaseModel):
    error: str
    detail: str
