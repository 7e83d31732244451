"""Immutable predictor data model, portable JSON schema, forward evaluation.

A predictor is a trained function F: R^n -> R^p. Scalar activations applied
to vectors act element-wise; every predictor consumes and returns vectors,
even for scalar input/output.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, IO, Mapping, Union

import numpy as np

from .errors import DimensionError, InvalidConfig, ParseError


class Predictor:
    """Base class of the predictor union."""

    __slots__ = ()


class ReluVariant(Enum):
    NONSMOOTH = "nonsmooth"
    BIGM = "bigm"
    SOS1 = "sos1"
    QUADRATIC = "quadratic"


def _frozen_array(a, ndim: int) -> np.ndarray:
    arr = np.asarray(a, dtype=float)
    if arr.ndim != ndim:
        raise DimensionError(f"expected {ndim}-dimensional array, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Affine(Predictor):
    """x -> A x + b"""

    A: np.ndarray
    b: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "A", _frozen_array(self.A, 2))
        object.__setattr__(self, "b", _frozen_array(self.b, 1))
        if self.A.shape[0] != self.b.shape[0]:
            raise DimensionError(
                f"A has {self.A.shape[0]} rows but b has {self.b.shape[0]} entries"
            )


@dataclass(frozen=True)
class ReLU(Predictor):
    """x -> max(0, x) element-wise.

    `variant` optionally pins the algebraic reformulation used when this
    activation is embedded, overriding the config-wide choice.
    """

    variant: ReluVariant | None = None


@dataclass(frozen=True)
class Sigmoid(Predictor):
    """x -> 1 / (1 + e^-x) element-wise."""


@dataclass(frozen=True)
class Tanh(Predictor):
    """x -> tanh(x) element-wise."""


@dataclass(frozen=True)
class SoftPlus(Predictor):
    """x -> log(1 + e^(beta x)) / beta element-wise."""

    beta: float = 1.0

    def __post_init__(self) -> None:
        if not (self.beta > 0.0 and math.isfinite(self.beta)):
            raise ValueError(f"softplus beta must be a positive real, got {self.beta}")


@dataclass(frozen=True)
class SoftMax(Predictor):
    """x -> e^x / ||e^x||_1"""


@dataclass(frozen=True)
class Pipeline(Predictor):
    """Left-to-right composition of predictors."""

    layers: tuple[Predictor, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "layers", tuple(self.layers))
        if not self.layers:
            raise DimensionError("pipeline must contain at least one layer")
        dims(self)  # adjacent layers must agree wherever dimensions are fixed


@dataclass(frozen=True)
class Leaf:
    value: float


@dataclass(frozen=True)
class Split:
    """Internal node: x[feature] <= threshold goes left, else right."""

    feature: int
    threshold: float
    left: "TreeNode"
    right: "TreeNode"


TreeNode = Union[Leaf, Split]


def _tree_features(node: TreeNode):
    if isinstance(node, Split):
        yield node.feature
        yield from _tree_features(node.left)
        yield from _tree_features(node.right)


@dataclass(frozen=True)
class BinaryDecisionTree(Predictor):
    root: TreeNode
    n_inputs: int

    def __post_init__(self) -> None:
        if self.n_inputs < 1:
            raise DimensionError(f"tree must have at least one input, got {self.n_inputs}")
        for f in _tree_features(self.root):
            if not 0 <= f < self.n_inputs:
                raise DimensionError(f"tree tests feature {f} but has {self.n_inputs} inputs")


@dataclass(frozen=True)
class RandomForest(Predictor):
    """Mean of member tree outputs."""

    trees: tuple[BinaryDecisionTree, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "trees", tuple(self.trees))
        if not self.trees:
            raise DimensionError("forest must contain at least one tree")
        n = self.trees[0].n_inputs
        if any(t.n_inputs != n for t in self.trees):
            raise DimensionError("forest trees disagree on input count")


@dataclass(frozen=True)
class GradientBoostedTrees(Predictor):
    """base_score plus the sum of member tree outputs."""

    trees: tuple[BinaryDecisionTree, ...]
    base_score: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "trees", tuple(self.trees))
        if not self.trees:
            raise DimensionError("ensemble must contain at least one tree")
        n = self.trees[0].n_inputs
        if any(t.n_inputs != n for t in self.trees):
            raise DimensionError("ensemble trees disagree on input count")


def logistic_regression(A, b) -> Pipeline:
    """sigmoid(A x + b), expressed as the pipeline it is."""
    return Pipeline((Affine(A, b), Sigmoid()))


# ---------------------------------------------------------------------------
# Dimensions


@dataclass(frozen=True)
class Dims:
    """Input/output arity; None marks a dimension any size fits (element-wise)."""

    n_in: int | None
    n_out: int | None


_ELEMENTWISE = (ReLU, Sigmoid, Tanh, SoftPlus)


def dims(p: Predictor) -> Dims:
    if isinstance(p, Affine):
        return Dims(p.A.shape[1], p.A.shape[0])
    if isinstance(p, _ELEMENTWISE) or isinstance(p, SoftMax):
        return Dims(None, None)
    if isinstance(p, BinaryDecisionTree):
        return Dims(p.n_inputs, 1)
    if isinstance(p, (RandomForest, GradientBoostedTrees)):
        return Dims(p.trees[0].n_inputs, 1)
    if isinstance(p, Pipeline):
        n_in: int | None = None
        cur: int | None = None
        for layer in p.layers:
            d = dims(layer)
            if d.n_in is not None:
                if cur is not None and cur != d.n_in:
                    raise DimensionError(
                        f"pipeline layer expects {d.n_in} inputs but receives {cur}"
                    )
                if n_in is None and cur is None:
                    n_in = d.n_in
                cur = d.n_in
            if d.n_out is not None:
                cur = d.n_out
        return Dims(n_in, cur)
    raise TypeError(f"not a predictor: {type(p).__name__}")


def check_input_len(p: Predictor, n: int) -> None:
    if n < 1:
        raise DimensionError("input vector must have at least one entry")
    d = dims(p)
    if d.n_in is not None and d.n_in != n:
        raise DimensionError(f"predictor expects {d.n_in} inputs, got {n}")


def output_len(p: Predictor, n_in: int) -> int:
    """Concrete output length for an input of length n_in."""
    d = dims(p)
    if d.n_out is not None:
        return d.n_out
    if isinstance(p, Pipeline):
        cur = n_in
        for layer in p.layers:
            cur = output_len(layer, cur)
        return cur
    return n_in  # element-wise


# ---------------------------------------------------------------------------
# Forward evaluation


def _descend(node: TreeNode, x: np.ndarray) -> float:
    while isinstance(node, Split):
        node = node.left if x[node.feature] <= node.threshold else node.right
    return node.value


def predict(p: Predictor, x) -> np.ndarray:
    """Exact forward evaluation of the predictor at a numeric point."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise DimensionError(f"input must be a vector, got shape {x.shape}")
    check_input_len(p, x.shape[0])

    if isinstance(p, Affine):
        return p.A @ x + p.b
    if isinstance(p, ReLU):
        return np.maximum(0.0, x)
    if isinstance(p, Sigmoid):
        with np.errstate(over="ignore"):
            return 1.0 / (1.0 + np.exp(-x))
    if isinstance(p, Tanh):
        return np.tanh(x)
    if isinstance(p, SoftPlus):
        return np.logaddexp(0.0, p.beta * x) / p.beta
    if isinstance(p, SoftMax):
        shifted = np.exp(x - np.max(x))
        return shifted / np.sum(shifted)
    if isinstance(p, Pipeline):
        for layer in p.layers:
            x = predict(layer, x)
        return x
    if isinstance(p, BinaryDecisionTree):
        return np.array([_descend(p.root, x)])
    if isinstance(p, RandomForest):
        return np.array([float(np.mean([_descend(t.root, x) for t in p.trees]))])
    if isinstance(p, GradientBoostedTrees):
        return np.array([p.base_score + float(np.sum([_descend(t.root, x) for t in p.trees]))])
    raise TypeError(f"not a predictor: {type(p).__name__}")


# ---------------------------------------------------------------------------
# Tree paths


@dataclass(frozen=True)
class TreePath:
    """Root-to-leaf path: the relations that must hold, and the leaf value."""

    conditions: tuple[tuple[int, float, bool], ...]  # (feature, threshold, goes_left)
    value: float


def enumerate_paths(root: TreeNode) -> list[TreePath]:
    """All root-to-leaf paths in left-first depth-first order."""
    out: list[TreePath] = []

    def walk(node: TreeNode, conds: tuple[tuple[int, float, bool], ...]) -> None:
        if isinstance(node, Leaf):
            out.append(TreePath(conds, node.value))
            return
        walk(node.left, conds + ((node.feature, node.threshold, True),))
        walk(node.right, conds + ((node.feature, node.threshold, False),))

    walk(root, ())
    return out


def path_taken(root: TreeNode, x: np.ndarray) -> int:
    """Index (in enumerate_paths order) of the path predict descends for x."""

    def walk(node: TreeNode, x) -> tuple[int, int]:
        # returns (leaf count, taken index within subtree)
        if isinstance(node, Leaf):
            return 1, 0
        nl, il = walk(node.left, x)
        nr, ir = walk(node.right, x)
        if x[node.feature] <= node.threshold:
            return nl + nr, il
        return nl + nr, nl + ir

    return walk(root, x)[1]


# ---------------------------------------------------------------------------
# Formulation configuration


@dataclass(frozen=True)
class FormulationConfig:
    relu_variant: ReluVariant = ReluVariant.NONSMOOTH
    substitutions: Mapping[str, Predictor] = field(default_factory=dict)
    reduced_space: bool = False
    gray_box: bool = False
    with_hessian: bool = True

    def __post_init__(self) -> None:
        if self.gray_box and self.relu_variant is not ReluVariant.NONSMOOTH:
            raise InvalidConfig(
                "gray-box formulations evaluate the true ReLU; "
                f"relu_variant={self.relu_variant.value} cannot apply"
            )
        for key in self.substitutions:
            if key not in _ACTIVATION_TAGS:
                raise InvalidConfig(f"substitution target must be an activation kind, got {key!r}")


_ACTIVATION_TAGS = {"relu", "sigmoid", "tanh", "softplus", "softmax"}


def kind_tag(p: Predictor) -> str:
    """Portable JSON type tag of the predictor."""
    for cls, tag in _TAGS.items():
        if isinstance(p, cls):
            return tag
    raise TypeError(f"not a predictor: {type(p).__name__}")


def apply_config(p: Predictor, cfg: FormulationConfig) -> Predictor:
    """Rewrite the predictor, replacing substituted activation kinds everywhere."""
    if not cfg.substitutions:
        return p
    if isinstance(p, Pipeline):
        return Pipeline(tuple(apply_config(layer, cfg) for layer in p.layers))
    tag = kind_tag(p)
    if tag in _ACTIVATION_TAGS and tag in cfg.substitutions:
        return cfg.substitutions[tag]
    return p


# ---------------------------------------------------------------------------
# Portable JSON


_TAGS: dict[type, str] = {
    Affine: "affine",
    ReLU: "relu",
    Sigmoid: "sigmoid",
    Tanh: "tanh",
    SoftPlus: "softplus",
    SoftMax: "softmax",
    Pipeline: "pipeline",
    BinaryDecisionTree: "decision_tree",
    RandomForest: "random_forest",
    GradientBoostedTrees: "gbt",
}


def _want_object(obj: Any, path: str) -> dict:
    if not isinstance(obj, dict):
        raise ParseError(path, f"expected object, got {type(obj).__name__}")
    return obj


def _want_number(obj: Any, path: str) -> float:
    if isinstance(obj, bool) or not isinstance(obj, (int, float)):
        raise ParseError(path, f"expected number, got {type(obj).__name__}")
    return float(obj)


def _want_int(obj: Any, path: str) -> int:
    if isinstance(obj, bool) or not isinstance(obj, int):
        raise ParseError(path, f"expected integer, got {type(obj).__name__}")
    return obj


def _want_array(obj: Any, path: str) -> list:
    if not isinstance(obj, list):
        raise ParseError(path, f"expected array, got {type(obj).__name__}")
    return obj


def _number_vector(obj: Any, path: str) -> list[float]:
    return [_want_number(v, f"{path}[{i}]") for i, v in enumerate(_want_array(obj, path))]


def _parse_tree_node(obj: Any, path: str) -> TreeNode:
    node = _want_object(obj, path)
    if "value" in node:
        return Leaf(_want_number(node["value"], f"{path}.value"))
    for key in ("feature", "threshold", "left", "right"):
        if key not in node:
            raise ParseError(path, f"tree node missing {key!r}")
    return Split(
        _want_int(node["feature"], f"{path}.feature"),
        _want_number(node["threshold"], f"{path}.threshold"),
        _parse_tree_node(node["left"], f"{path}.left"),
        _parse_tree_node(node["right"], f"{path}.right"),
    )


def _parse_decision_tree(obj: dict, path: str) -> BinaryDecisionTree:
    if "n_inputs" not in obj or "root" not in obj:
        raise ParseError(path, "decision_tree requires n_inputs and root")
    return BinaryDecisionTree(
        _parse_tree_node(obj["root"], f"{path}.root"),
        _want_int(obj["n_inputs"], f"{path}.n_inputs"),
    )


def parse_predictor(obj: Any, path: str = "$") -> Predictor:
    """Build a validated Predictor from parsed portable JSON."""
    node = _want_object(obj, path)
    tag = node.get("type")
    if not isinstance(tag, str):
        raise ParseError(path, "missing or non-string 'type'")

    if tag == "affine":
        rows = _want_array(node.get("A"), f"{path}.A")
        A = [_number_vector(r, f"{path}.A[{i}]") for i, r in enumerate(rows)]
        if not A:
            raise ParseError(f"{path}.A", "matrix must have at least one row")
        if len({len(r) for r in A}) > 1:
            raise DimensionError(f"{path}.A: rows have differing lengths")
        b = _number_vector(node.get("b"), f"{path}.b")
        return Affine(A, b)
    if tag == "relu":
        return ReLU()
    if tag == "sigmoid":
        return Sigmoid()
    if tag == "tanh":
        return Tanh()
    if tag == "softplus":
        beta = _want_number(node.get("beta", 1.0), f"{path}.beta")
        if beta <= 0.0:
            raise ParseError(f"{path}.beta", f"must be positive, got {beta}")
        return SoftPlus(beta)
    if tag == "softmax":
        return SoftMax()
    if tag == "pipeline":
        layers = _want_array(node.get("layers"), f"{path}.layers")
        if not layers:
            raise ParseError(f"{path}.layers", "pipeline must have at least one layer")
        return Pipeline(
            tuple(parse_predictor(l, f"{path}.layers[{i}]") for i, l in enumerate(layers))
        )
    if tag == "decision_tree":
        return _parse_decision_tree(node, path)
    if tag == "random_forest":
        trees = _want_array(node.get("trees"), f"{path}.trees")
        return RandomForest(
            tuple(
                _parse_decision_tree(_want_object(t, f"{path}.trees[{i}]"), f"{path}.trees[{i}]")
                for i, t in enumerate(trees)
            )
        )
    if tag == "gbt":
        trees = _want_array(node.get("trees"), f"{path}.trees")
        return GradientBoostedTrees(
            tuple(
                _parse_decision_tree(_want_object(t, f"{path}.trees[{i}]"), f"{path}.trees[{i}]")
                for i, t in enumerate(trees)
            ),
            _want_number(node.get("base_score", 0.0), f"{path}.base_score"),
        )
    raise ParseError(f"{path}.type", f"unknown predictor type {tag!r}")


def _reject_constant(token: str):
    raise ParseError("$", f"non-finite number literal {token!r} is not valid JSON")


def load_predictor(source: Union[bytes, str, IO]) -> Predictor:
    """Parse and validate a predictor from portable JSON text or a stream."""
    if isinstance(source, bytes):
        text = source.decode("utf-8")
    elif isinstance(source, str):
        text = source
    else:
        text = source.read()
        if isinstance(text, bytes):
            text = text.decode("utf-8")
    try:
        obj = json.loads(text, parse_constant=_reject_constant)
    except json.JSONDecodeError as e:
        raise ParseError("$", f"invalid JSON: {e}") from None
    p = parse_predictor(obj)
    dims(p)  # force pipeline consistency checks
    return p


def _tree_node_json(node: TreeNode) -> dict:
    if isinstance(node, Leaf):
        return {"value": node.value}
    return {
        "feature": node.feature,
        "threshold": node.threshold,
        "left": _tree_node_json(node.left),
        "right": _tree_node_json(node.right),
    }


def predictor_json(p: Predictor) -> dict:
    """Portable JSON object form (the inverse of parse_predictor)."""
    if isinstance(p, Affine):
        return {"type": "affine", "A": [list(row) for row in p.A], "b": list(p.b)}
    if isinstance(p, ReLU):
        return {"type": "relu"}
    if isinstance(p, Sigmoid):
        return {"type": "sigmoid"}
    if isinstance(p, Tanh):
        return {"type": "tanh"}
    if isinstance(p, SoftPlus):
        return {"type": "softplus", "beta": p.beta}
    if isinstance(p, SoftMax):
        return {"type": "softmax"}
    if isinstance(p, Pipeline):
        return {"type": "pipeline", "layers": [predictor_json(l) for l in p.layers]}
    if isinstance(p, BinaryDecisionTree):
        return {"type": "decision_tree", "n_inputs": p.n_inputs, "root": _tree_node_json(p.root)}
    if isinstance(p, RandomForest):
        return {
            "type": "random_forest",
            "trees": [
                {"n_inputs": t.n_inputs, "root": _tree_node_json(t.root)} for t in p.trees
            ],
        }
    if isinstance(p, GradientBoostedTrees):
        return {
            "type": "gbt",
            "trees": [
                {"n_inputs": t.n_inputs, "root": _tree_node_json(t.root)} for t in p.trees
            ],
            "base_score": p.base_score,
        }
    raise TypeError(f"not a predictor: {type(p).__name__}")


def dump_predictor(p: Predictor) -> str:
    return json.dumps(predictor_json(p))
