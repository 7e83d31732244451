"""Shared test fixtures: the truth-function tree, random predictor corpus,
and witness-checking utilities."""

from __future__ import annotations

import numpy as np

import optembed as oe

# x1 <= 0.5 ? -2 : (x2 <= 0.3 ? 3 : 4)
TRUTH_TREE = oe.BinaryDecisionTree(
    oe.Split(0, 0.5, oe.Leaf(-2.0), oe.Split(1, 0.3, oe.Leaf(3.0), oe.Leaf(4.0))),
    n_inputs=2,
)


def truth(x) -> float:
    return -2.0 if x[0] <= 0.5 else (3.0 if x[1] <= 0.3 else 4.0)


def section3_network(rng: np.random.Generator) -> oe.Pipeline:
    """10 -> 16 -> ReLU -> 2, random weights."""
    return oe.Pipeline(
        (
            oe.Affine(rng.uniform(-0.5, 0.5, (16, 10)), rng.uniform(-0.5, 0.5, 16)),
            oe.ReLU(),
            oe.Affine(rng.uniform(-0.5, 0.5, (2, 16)), rng.uniform(-0.5, 0.5, 2)),
        )
    )


def _activation(name: str, rng: np.random.Generator) -> oe.Predictor:
    if name == "relu":
        return oe.ReLU()
    if name == "sigmoid":
        return oe.Sigmoid()
    if name == "tanh":
        return oe.Tanh()
    if name == "softplus":
        return oe.SoftPlus(float(rng.choice([0.5, 1.0, 2.0])))
    if name == "softmax":
        return oe.SoftMax()
    raise ValueError(name)


ACTIVATIONS = ("relu", "sigmoid", "tanh", "softplus", "softmax")
SMOOTH_ACTIVATIONS = ("sigmoid", "tanh", "softplus")


def random_pipeline(
    rng: np.random.Generator,
    n_in: int | None = None,
    max_depth: int = 3,
    max_width: int = 8,
    activations=ACTIVATIONS,
) -> tuple[oe.Pipeline, list[oe.Interval]]:
    """Random affine/activation pipeline plus an input box in [-1, 1]."""
    if n_in is None:
        n_in = int(rng.integers(1, 6))
    depth = int(rng.integers(1, max_depth + 1))
    layers: list[oe.Predictor] = []
    cur = n_in
    for _ in range(depth):
        w = int(rng.integers(1, max_width + 1))
        layers.append(
            oe.Affine(rng.uniform(-1.0, 1.0, (w, cur)), rng.uniform(-0.5, 0.5, w))
        )
        cur = w
        layers.append(_activation(str(rng.choice(activations)), rng))
    box = [oe.Interval(-1.0, 1.0) for _ in range(n_in)]
    return oe.Pipeline(tuple(layers)), box


def random_tree(rng: np.random.Generator, n_inputs: int, depth: int) -> oe.BinaryDecisionTree:
    def build(d: int):
        if d == 0 or rng.random() < 0.3:
            return oe.Leaf(float(rng.uniform(-5.0, 5.0)))
        return oe.Split(
            int(rng.integers(0, n_inputs)),
            float(rng.uniform(0.0, 1.0)),
            build(d - 1),
            build(d - 1),
        )

    return oe.BinaryDecisionTree(build(depth), n_inputs)


def embed_fresh(p, box, cfg=None):
    """New model with one input variable per box entry, predictor embedded."""
    model = oe.Model()
    x = [model.add_variable(iv) for iv in box]
    y, form = oe.add_predictor(model, p, x, cfg)
    return model, x, y, form


def sample_box(rng: np.random.Generator, box) -> np.ndarray:
    return rng.uniform([iv.lo for iv in box], [iv.hi for iv in box])


def witness_report(model, p, x, y, form, x0, tol=1e-9):
    """check_feasible report plus the worst |y - predict| over outputs."""
    a = oe.witness_assignment(model, form, x, x0)
    report = model.check_feasible(a, tol)
    truth_y = oe.predict(p, x0)
    err = max(
        abs(oe.entry_value(e, a) - float(truth_y[i])) for i, e in enumerate(y)
    )
    return report, err
