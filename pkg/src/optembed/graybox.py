"""Gray-box formulation: callback oracles instead of algebra.

Forward evaluation reuses the reference predict; Jacobians come from reverse
mode (one backward sweep per output row); the Hessian-of-the-Lagrangian is
computed by composing the predictor with a trailing 1xP affine map holding
the multipliers, then running forward-over-reverse Hessian-vector products
against unit directions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from . import bounds as bounds_mod
from .errors import (
    DimensionError,
    HessianUnavailable,
    InvalidConfig,
    NonDifferentiablePredictor,
)
from .formulate import Formulation
from .ir import Interval, Model, OracleConstraint, Var, VariableRef
from .predictors import (
    Affine,
    FormulationConfig,
    Pipeline,
    Predictor,
    ReLU,
    Sigmoid,
    SoftPlus,
    Tanh,
    dims,
    output_len,
    predict,
)

_Layer = Union[Affine, ReLU, Sigmoid, Tanh, SoftPlus]


def _flatten(p: Predictor) -> tuple[_Layer, ...]:
    if isinstance(p, (Affine, ReLU, Sigmoid, Tanh, SoftPlus)):
        return (p,)
    if isinstance(p, Pipeline):
        out: list[_Layer] = []
        for layer in p.layers:
            out.extend(_flatten(layer))
        return tuple(out)
    raise NonDifferentiablePredictor(
        f"{type(p).__name__} is not supported by the derivative oracle engine"
    )


def _sigmoid(z: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        return 1.0 / (1.0 + np.exp(-z))


def _act_d(layer: _Layer, z: np.ndarray) -> np.ndarray:
    """First derivative of the element-wise activation at pre-activation z."""
    if isinstance(layer, ReLU):
        return (z > 0.0).astype(float)  # derivative fixed to 0 at the kink
    if isinstance(layer, Sigmoid):
        s = _sigmoid(z)
        return s * (1.0 - s)
    if isinstance(layer, Tanh):
        t = np.tanh(z)
        return 1.0 - t * t
    if isinstance(layer, SoftPlus):
        return _sigmoid(layer.beta * z)
    raise TypeError(type(layer).__name__)


def _act_dd(layer: _Layer, z: np.ndarray) -> np.ndarray:
    """Second derivative of the element-wise activation at z."""
    if isinstance(layer, ReLU):
        return np.zeros_like(z)
    if isinstance(layer, Sigmoid):
        s = _sigmoid(z)
        return s * (1.0 - s) * (1.0 - 2.0 * s)
    if isinstance(layer, Tanh):
        t = np.tanh(z)
        return -2.0 * t * (1.0 - t * t)
    if isinstance(layer, SoftPlus):
        s = _sigmoid(layer.beta * z)
        return layer.beta * s * (1.0 - s)
    raise TypeError(type(layer).__name__)


@dataclass
class Tape:
    """Recorded forward pass: the input seen by each layer, plus the output."""

    layer_inputs: list[np.ndarray]
    output: np.ndarray


def record_tape(layers: Sequence[_Layer], x: np.ndarray) -> Tape:
    inputs = []
    for layer in layers:
        inputs.append(x)
        x = predict(layer, x)
    return Tape(inputs, x)


def replay_tape(layers: Sequence[_Layer], tape: Tape) -> np.ndarray:
    """Recompute the forward pass from the recorded first-layer input."""
    x = tape.layer_inputs[0] if tape.layer_inputs else tape.output
    for layer in layers:
        x = predict(layer, x)
    return x


def _pullback(layers: Sequence[_Layer], tape: Tape, seed: np.ndarray) -> np.ndarray:
    g = seed
    for layer, z in zip(reversed(layers), reversed(tape.layer_inputs)):
        if isinstance(layer, Affine):
            g = layer.A.T @ g
        else:
            g = _act_d(layer, z) * g
    return g


def _hvp(layers: Sequence[_Layer], x: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Hessian-vector product of the scalar composition at x along v."""
    zs: list[np.ndarray] = []
    dzs: list[np.ndarray] = []
    a, da = x, v
    for layer in layers:
        zs.append(a)
        dzs.append(da)
        if isinstance(layer, Affine):
            a, da = layer.A @ a + layer.b, layer.A @ da
        else:
            a, da = predict(layer, a), _act_d(layer, a) * da
    if a.shape != (1,):
        raise DimensionError(f"Hessian composition must be scalar, got {a.shape}")
    g = np.ones(1)
    dg = np.zeros(1)
    for layer, z, dz in zip(reversed(layers), reversed(zs), reversed(dzs)):
        if isinstance(layer, Affine):
            g, dg = layer.A.T @ g, layer.A.T @ dg
        else:
            d1 = _act_d(layer, z)
            g, dg = d1 * g, _act_dd(layer, z) * dz * g + d1 * dg
    return dg


@dataclass(frozen=True)
class OracleHandle:
    """Callback bundle: value, Jacobian and (optionally) Hessian-of-Lagrangian."""

    predictor: Predictor
    n_in: int | None
    n_out: int | None
    with_hessian: bool
    layers: tuple[_Layer, ...]

    def eval(self, x) -> np.ndarray:
        return predict(self.predictor, x)

    def jacobian(self, x) -> np.ndarray:
        x = self._check_input(x)
        tape = record_tape(self.layers, x)
        p, n = tape.output.shape[0], x.shape[0]
        jac = np.empty((p, n))
        for i in range(p):
            seed = np.zeros(p)
            seed[i] = 1.0
            jac[i] = _pullback(self.layers, tape, seed)
        return jac

    def hess_lagrangian(self, x, lam) -> np.ndarray:
        if not self.with_hessian:
            raise HessianUnavailable("oracle was built with with_hessian=False")
        x = self._check_input(x)
        lam = np.asarray(lam, dtype=float)
        p = output_len(self.predictor, x.shape[0])
        if lam.shape != (p,):
            raise DimensionError(f"expected {p} multipliers, got shape {lam.shape}")
        # the Lagrangian as a predictor: a trailing 1xP affine with row lam
        composed = self.layers + (Affine(lam.reshape(1, p), np.zeros(1)),)
        n = x.shape[0]
        hess = np.empty((n, n))
        for j in range(n):
            e = np.zeros(n)
            e[j] = 1.0
            hess[:, j] = _hvp(composed, x, e)
        return (hess + hess.T) / 2.0

    def _check_input(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim != 1 or (self.n_in is not None and x.shape[0] != self.n_in):
            raise DimensionError(f"oracle expects {self.n_in} inputs, got shape {x.shape}")
        return x


def make_oracle(p: Predictor, cfg: FormulationConfig | None = None) -> OracleHandle:
    """Build the callback bundle for a differentiable predictor."""
    cfg = cfg if cfg is not None else FormulationConfig(gray_box=True)
    layers = _flatten(p)
    d = dims(p)
    return OracleHandle(p, d.n_in, d.n_out, cfg.with_hessian, layers)


def jacobian(handle: OracleHandle, x) -> np.ndarray:
    return handle.jacobian(x)


def hessian_lagrangian(handle: OracleHandle, x, lam) -> np.ndarray:
    return handle.hess_lagrangian(x, lam)


@dataclass(frozen=True)
class OracleExpr:
    """Reduced-space stand-in for one output of an oracle-backed predictor."""

    handle: OracleHandle
    inputs: tuple[VariableRef, ...]
    index: int

    def evaluate(self, assignment: Sequence[float]) -> float:
        x = np.array([float(assignment[r.id]) for r in self.inputs])
        return float(self.handle.eval(x)[self.index])


def add_gray_box(
    model: Model, p: Predictor, x: Sequence, cfg: FormulationConfig
) -> tuple[list, Formulation]:
    """Register F(x) - y = 0 as an oracle constraint (full-space), or return
    oracle expressions (reduced-space)."""
    refs: list[VariableRef] = []
    for e in x:
        if isinstance(e, VariableRef):
            refs.append(e)
        elif isinstance(e, Var):
            refs.append(e.ref)
        else:
            raise InvalidConfig("gray-box inputs must be model variables, not expressions")

    handle = make_oracle(p, cfg)
    n_out = output_len(p, len(refs))

    if cfg.reduced_space:
        ys = [OracleExpr(handle, tuple(refs), i) for i in range(n_out)]
        return ys, Formulation(p, [], [])

    box = [model.bounds(r) for r in refs]
    out_box = bounds_mod.propagate(p, box)
    ys = [model.add_variable(iv) for iv in out_box]
    model.add_oracle(OracleConstraint(tuple(refs), tuple(ys), handle.eval, p))

    def witness(x0: np.ndarray) -> dict[int, float]:
        vals = handle.eval(x0)
        return {ys[i].id: float(vals[i]) for i in range(n_out)}

    def bounder(mdl: Model, b: list[Interval]) -> None:
        for ref, iv in zip(ys, bounds_mod.propagate(p, b)):
            mdl.tighten_bounds(ref, iv)

    return list(ys), Formulation(p, list(ys), [], [], witness, bounder)
