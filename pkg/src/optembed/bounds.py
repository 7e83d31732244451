"""Interval bound propagation through predictors.

Used to bound formulation output variables and to derive big-M constants.
All rules are sound over-approximations; monotone element-wise activations
and affine maps propagate to attainable endpoints.
"""

from __future__ import annotations

import math
from typing import Sequence

from .errors import DimensionError
from .ir import Interval
from .predictors import (
    Affine,
    BinaryDecisionTree,
    GradientBoostedTrees,
    Leaf,
    Pipeline,
    Predictor,
    RandomForest,
    ReLU,
    Sigmoid,
    SoftMax,
    SoftPlus,
    Tanh,
    TreeNode,
    check_input_len,
)


def _sigmoid(t: float) -> float:
    if t >= 0.0:
        return 1.0 / (1.0 + math.exp(-t))
    e = math.exp(t)
    return e / (1.0 + e)


def _softplus(t: float, beta: float) -> float:
    bt = beta * t
    if bt > 700.0:
        return t
    return math.log1p(math.exp(bt)) / beta


def _affine_rows(A, b, box: Sequence[Interval]) -> list[Interval]:
    out = []
    for i in range(A.shape[0]):
        lo = hi = float(b[i])
        for j in range(A.shape[1]):
            a = float(A[i, j])
            if a == 0.0:
                continue
            p, q = a * box[j].lo, a * box[j].hi
            lo += min(p, q)
            hi += max(p, q)
        # -inf + inf only arises from degenerate one-point infinite boxes
        if math.isnan(lo):
            lo = -math.inf
        if math.isnan(hi):
            hi = math.inf
        out.append(Interval(lo, hi))
    return out


def _exp_or_inf(t: float) -> float:
    # conservative: indeterminate or overflowing exponents widen the bound
    if math.isnan(t) or t > 700.0:
        return math.inf
    return math.exp(t)


def _softmax_box(box: Sequence[Interval]) -> list[Interval]:
    # y_i = 1 / (1 + sum_{j!=i} exp(x_j - x_i)): increasing in x_i,
    # decreasing in every x_j, so the extremes sit at box corners.
    out = []
    for i, iv in enumerate(box):
        s_lo = 0.0  # sum exp(u_j - l_i)
        s_hi = 0.0  # sum exp(l_j - u_i)
        for j, other in enumerate(box):
            if j == i:
                continue
            s_lo += _exp_or_inf(other.hi - iv.lo)
            s_hi += _exp_or_inf(other.lo - iv.hi)
        lo = 0.0 if math.isinf(s_lo) else 1.0 / (1.0 + s_lo)
        hi = 1.0 if math.isinf(s_hi) else 1.0 / (1.0 + s_hi)
        out.append(Interval(lo, hi).intersect(Interval(0.0, 1.0)))
    return out


def _tree_hull(node: TreeNode, box: list[Interval]) -> tuple[float, float]:
    """Hull of leaves reachable from `node` given the input box."""
    if isinstance(node, Leaf):
        return node.value, node.value
    f, t = node.feature, node.threshold
    iv = box[f]
    lo, hi = math.inf, -math.inf
    if iv.lo <= t:  # left branch reachable (ties go left)
        box[f] = Interval(iv.lo, min(iv.hi, t))
        l, h = _tree_hull(node.left, box)
        lo, hi = min(lo, l), max(hi, h)
        box[f] = iv
    if iv.hi > t:  # right branch reachable
        box[f] = Interval(max(iv.lo, t), iv.hi)
        l, h = _tree_hull(node.right, box)
        lo, hi = min(lo, l), max(hi, h)
        box[f] = iv
    return lo, hi


def propagate(p: Predictor, input: Sequence[Interval]) -> list[Interval]:
    """Sound output intervals of the predictor over the input box."""
    box = list(input)
    check_input_len(p, len(box))

    if isinstance(p, Affine):
        return _affine_rows(p.A, p.b, box)
    if isinstance(p, ReLU):
        return [Interval(max(0.0, iv.lo), max(0.0, iv.hi)) for iv in box]
    if isinstance(p, Sigmoid):
        return [Interval(_sigmoid(iv.lo), _sigmoid(iv.hi)) for iv in box]
    if isinstance(p, Tanh):
        return [Interval(math.tanh(iv.lo), math.tanh(iv.hi)) for iv in box]
    if isinstance(p, SoftPlus):
        return [Interval(_softplus(iv.lo, p.beta), _softplus(iv.hi, p.beta)) for iv in box]
    if isinstance(p, SoftMax):
        return _softmax_box(box)
    if isinstance(p, Pipeline):
        for layer in p.layers:
            box = propagate(layer, box)
        return box
    if isinstance(p, BinaryDecisionTree):
        lo, hi = _tree_hull(p.root, box)
        return [Interval(lo, hi)]
    if isinstance(p, RandomForest):
        hulls = [_tree_hull(t.root, box) for t in p.trees]
        n = len(hulls)
        return [Interval(sum(h[0] for h in hulls) / n, sum(h[1] for h in hulls) / n)]
    if isinstance(p, GradientBoostedTrees):
        hulls = [_tree_hull(t.root, box) for t in p.trees]
        return [
            Interval(
                p.base_score + sum(h[0] for h in hulls),
                p.base_score + sum(h[1] for h in hulls),
            )
        ]
    raise TypeError(f"not a predictor: {type(p).__name__}")


def attach_bounds(model, formulation, input: Sequence[Interval]) -> None:
    """Tighten every formulation-added variable to its propagated interval.

    Intersection-only, so repeated application is idempotent and existing
    tighter bounds survive.
    """
    formulation.apply_bounds(model, [Interval(iv.lo, iv.hi) for iv in input])
