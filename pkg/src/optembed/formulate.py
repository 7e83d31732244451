"""Embedding predictors into optimization models.

Full-space formulations add output variables and constraints per layer;
reduced-space formulations return expressions and only add variables where a
layer has no expression form (trees, ensembles, and the big-M / SOS1 /
quadratic ReLU variants fall back to full-space locally inside pipelines).

Every formulation carries a witness evaluator: given an in-box input point it
produces values for all added variables under which every added constraint
is feasible and the outputs equal the predictor's forward evaluation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence, Union

import numpy as np

from . import bounds as bounds_mod
from . import ir
from .errors import (
    DimensionError,
    InvalidConfig,
    UnboundedInput,
    UnsupportedReducedSpace,
)
from .ir import (
    AffineComb,
    Constant,
    ConstraintRef,
    Expr,
    Interval,
    LinearEq,
    LinearIneq,
    Model,
    NonlinearEq,
    NonlinearIneq,
    Sense,
    Var,
    VariableRef,
    as_expr,
)
from .predictors import (
    Affine,
    BinaryDecisionTree,
    FormulationConfig,
    GradientBoostedTrees,
    Pipeline,
    Predictor,
    RandomForest,
    ReLU,
    ReluVariant,
    Sigmoid,
    SoftMax,
    SoftPlus,
    Tanh,
    apply_config,
    check_input_len,
    enumerate_paths,
    path_taken,
    predict,
)

Entry = Union[VariableRef, Expr]

_NONNEG = Interval(0.0, math.inf)
_DENOM_FLOOR = float(np.finfo(float).tiny)


@dataclass
class Formulation:
    """Record of what embedding one predictor added to a model."""

    predictor: Predictor
    added_vars: list[VariableRef]
    added_cons: list[ConstraintRef]
    children: list["Formulation"] = field(default_factory=list)
    _witness: Callable[[np.ndarray], dict[int, float]] | None = None
    _bounder: Callable[[Model, list[Interval]], None] | None = None

    def witness(self, x0) -> dict[int, float]:
        """Values of every added variable consistent with the input point."""
        x0 = np.asarray(x0, dtype=float)
        if self.children:
            out: dict[int, float] = {}
            xi = x0
            for child in self.children:
                out.update(child.witness(xi))
                xi = predict(child.predictor, xi)
            return out
        return self._witness(x0) if self._witness is not None else {}

    def all_vars(self) -> list[VariableRef]:
        out = list(self.added_vars)
        for child in self.children:
            out.extend(child.all_vars())
        return out

    def all_cons(self) -> list[ConstraintRef]:
        out = list(self.added_cons)
        for child in self.children:
            out.extend(child.all_cons())
        return out

    def apply_bounds(self, model: Model, box: list[Interval]) -> None:
        if self._bounder is not None:
            self._bounder(model, box)
        cur = box
        for child in self.children:
            child.apply_bounds(model, cur)
            cur = bounds_mod.propagate(child.predictor, cur)


class _Recorder:
    """Collects the variables/constraints one formulation adds to a model."""

    def __init__(self, model: Model):
        self.model = model
        self.vars: list[VariableRef] = []
        self.cons: list[ConstraintRef] = []

    def var(self, bounds: Interval = ir.REALS, binary: bool = False) -> VariableRef:
        ref = self.model.add_variable(bounds, binary)
        self.vars.append(ref)
        return ref

    def con(self, c) -> ConstraintRef:
        cref = self.model.add_constraint(c)
        self.cons.append(cref)
        return cref

    def done(self, predictor, witness=None, bounder=None) -> Formulation:
        return Formulation(predictor, self.vars, self.cons, [], witness, bounder)


def _linear_row(terms: Iterable[tuple[VariableRef, float]]) -> tuple[tuple[VariableRef, float], ...]:
    acc: dict[int, list] = {}
    for ref, c in terms:
        slot = acc.get(ref.id)
        if slot is None:
            acc[ref.id] = [ref, float(c)]
        else:
            slot[1] += float(c)
    return tuple((ref, c) for ref, c in acc.values() if c != 0.0)


def _as_linear(e: Expr) -> tuple[dict[int, list], float] | None:
    """Decompose into (terms by variable id, offset), or None if nonlinear."""
    if isinstance(e, Constant):
        return {}, e.value
    if isinstance(e, Var):
        return {e.ref.id: [e.ref, 1.0]}, 0.0
    if isinstance(e, AffineComb):
        acc: dict[int, list] = {}
        offset = e.offset
        for c, child in e.terms:
            sub = _as_linear(child)
            if sub is None:
                return None
            terms, off = sub
            offset += c * off
            for ref, k in terms.values():
                slot = acc.get(ref.id)
                if slot is None:
                    acc[ref.id] = [ref, c * k]
                else:
                    slot[1] += c * k
        return acc, offset
    return None


def _entry_interval(model: Model, e: Entry) -> Interval:
    if isinstance(e, VariableRef):
        return model.bounds(e)
    if isinstance(e, Var):
        return model.bounds(e.ref)
    if isinstance(e, Constant):
        return Interval(e.value, e.value)
    return ir.REALS


def _default_box(
    model: Model, x: Sequence[Entry], input_bounds: Sequence[Interval] | None
) -> list[Interval]:
    if input_bounds is not None:
        return list(input_bounds)
    return [_entry_interval(model, e) for e in x]


def _materialize(
    rec: _Recorder, entries: Sequence[Entry], box: Sequence[Interval]
) -> tuple[list[VariableRef], list[int]]:
    """Bind expression entries to fresh variables; passes refs through."""
    refs: list[VariableRef] = []
    made: list[int] = []
    for i, e in enumerate(entries):
        if isinstance(e, VariableRef):
            refs.append(e)
        elif isinstance(e, Var):
            refs.append(e.ref)
        else:
            v = rec.var(box[i])
            lin = _as_linear(e)
            if lin is not None:
                terms, off = lin
                row = _linear_row([(r, c) for r, c in terms.values()] + [(v, -1.0)])
                rec.con(LinearEq(row, -off))
            else:
                rec.con(NonlinearEq(e - v))
            refs.append(v)
            made.append(i)
    return refs, made


def _all_refs(entries: Sequence[Entry]) -> list[VariableRef] | None:
    refs = []
    for e in entries:
        if isinstance(e, VariableRef):
            refs.append(e)
        elif isinstance(e, Var):
            refs.append(e.ref)
        else:
            return None
    return refs


# ---------------------------------------------------------------------------
# Per-kind formulations


def formulate_affine(
    model: Model, A, b, x: Sequence[Entry], reduced: bool = False
) -> tuple[list[Entry], Formulation]:
    aff = Affine(A, b)
    n, m = aff.A.shape
    if len(x) != m:
        raise DimensionError(f"affine expects {m} inputs, got {len(x)}")

    if reduced:
        ys: list[Entry] = [
            AffineComb(
                tuple(
                    (float(aff.A[i, j]), as_expr(x[j]))
                    for j in range(m)
                    if aff.A[i, j] != 0.0
                ),
                float(aff.b[i]),
            )
            for i in range(n)
        ]
        return ys, Formulation(aff, [], [])

    rec = _Recorder(model)
    refs = _all_refs(x)
    ys = []
    for i in range(n):
        y = rec.var()
        if refs is not None:
            row = _linear_row([(refs[j], float(aff.A[i, j])) for j in range(m)] + [(y, -1.0)])
            rec.con(LinearEq(row, -float(aff.b[i])))
        else:
            comb = AffineComb(
                tuple((float(aff.A[i, j]), as_expr(x[j])) for j in range(m) if aff.A[i, j] != 0.0),
                float(aff.b[i]),
            )
            rec.con(NonlinearEq(comb - y))
        ys.append(y)

    y_ids = [y.id for y in ys]

    def witness(x0: np.ndarray) -> dict[int, float]:
        vals = aff.A @ x0 + aff.b
        return {y_ids[i]: float(vals[i]) for i in range(n)}

    def bounder(mdl: Model, box: list[Interval]) -> None:
        for ref, iv in zip(ys, bounds_mod.propagate(aff, box)):
            mdl.tighten_bounds(ref, iv)

    return list(ys), rec.done(aff, witness, bounder)


def formulate_relu(
    model: Model,
    x: Sequence[Entry],
    variant: ReluVariant,
    input_bounds: Sequence[Interval] | None = None,
) -> tuple[list[Entry], Formulation]:
    """Full-space ReLU under the requested variant. Bounds default to the
    model intervals of the input entries."""
    rec = _Recorder(model)
    box = _default_box(model, x, input_bounds)
    n = len(x)

    ys: list[VariableRef] = []
    zs: list[VariableRef] = []
    sigmas: list[VariableRef] = []
    extras: list[tuple[VariableRef, int]] = []

    if variant is ReluVariant.NONSMOOTH:
        for i in range(n):
            y = rec.var(_NONNEG)
            rec.con(NonlinearEq(Var(y) - ir.maximum(0.0, as_expr(x[i]))))
            ys.append(y)
    elif variant is ReluVariant.BIGM:
        for i in range(n):
            if not box[i].is_finite:
                raise UnboundedInput(
                    f"big-M ReLU needs finite input bounds, entry {i} has {box[i]}"
                )
        refs, made = _materialize(rec, x, box)
        extras = [(refs[i], i) for i in made]
        for i in range(n):
            lo, hi = box[i].lo, box[i].hi
            y = rec.var(Interval(0.0, max(0.0, hi)))
            s = rec.var(ir.UNIT, binary=True)
            rec.con(LinearIneq(_linear_row([(refs[i], 1.0), (y, -1.0)]), 0.0, Sense.LE))
            rec.con(LinearIneq(_linear_row([(y, 1.0), (refs[i], -1.0), (s, -lo)]), -lo, Sense.LE))
            rec.con(LinearIneq(_linear_row([(y, 1.0), (s, -hi)]), 0.0, Sense.LE))
            ys.append(y)
            sigmas.append(s)
    elif variant in (ReluVariant.QUADRATIC, ReluVariant.SOS1):
        refs, made = _materialize(rec, x, box)
        extras = [(refs[i], i) for i in made]
        for i in range(n):
            y = rec.var(_NONNEG)
            z = rec.var(_NONNEG)
            if variant is ReluVariant.QUADRATIC:
                rec.con(LinearEq(_linear_row([(y, 1.0), (refs[i], -1.0), (z, -1.0)]), 0.0))
                rec.con(NonlinearIneq(Var(y) * Var(z)))
            else:
                rec.con(LinearEq(_linear_row([(y, 1.0), (z, -1.0), (refs[i], -1.0)]), 0.0))
                rec.con(ir.SOS1((y, z), (1.0, 2.0)))
            ys.append(y)
            zs.append(z)
    else:
        raise InvalidConfig(f"unknown ReLU variant {variant!r}")

    def witness(x0: np.ndarray) -> dict[int, float]:
        out = {ref.id: float(x0[i]) for ref, i in extras}
        for i in range(n):
            xi = float(x0[i])
            out[ys[i].id] = max(0.0, xi)
            if zs:
                out[zs[i].id] = max(0.0, -xi)
            if sigmas:
                out[sigmas[i].id] = 1.0 if xi > 0.0 else 0.0
        return out

    def bounder(mdl: Model, b: list[Interval]) -> None:
        for ref, i in extras:
            mdl.tighten_bounds(ref, b[i])
        for i in range(n):
            mdl.tighten_bounds(ys[i], Interval(max(0.0, b[i].lo), max(0.0, b[i].hi)))
            if zs:
                mdl.tighten_bounds(zs[i], Interval(max(0.0, -b[i].hi), max(0.0, -b[i].lo)))

    pred = ReLU(None if variant is ReluVariant.NONSMOOTH else variant)
    return list(ys), rec.done(pred, witness, bounder)


def _activation_expr(act: Predictor, e: Entry) -> Expr:
    xe = as_expr(e)
    if isinstance(act, Sigmoid):
        return Constant(1.0) / (Constant(1.0) + ir.exp(-xe))
    if isinstance(act, Tanh):
        return ir.tanh(xe)
    if isinstance(act, SoftPlus):
        if act.beta == 1.0:
            return ir.log1pexp(xe)
        return (1.0 / act.beta) * ir.log1pexp(act.beta * xe)
    raise TypeError(f"not a smooth element-wise activation: {type(act).__name__}")


_SMOOTH_RANGE = {
    Sigmoid: Interval(0.0, 1.0),
    Tanh: Interval(-1.0, 1.0),
    SoftPlus: _NONNEG,
}


def formulate_smooth_activation(
    model: Model, act: Predictor, x: Sequence[Entry], reduced: bool = False
) -> tuple[list[Entry], Formulation]:
    if reduced:
        return [_activation_expr(act, e) for e in x], Formulation(act, [], [])

    rec = _Recorder(model)
    rng = _SMOOTH_RANGE[type(act)]
    ys = [rec.var(rng) for _ in x]
    for y, e in zip(ys, x):
        rec.con(NonlinearEq(Var(y) - _activation_expr(act, e)))
    y_ids = [y.id for y in ys]

    def witness(x0: np.ndarray) -> dict[int, float]:
        vals = predict(act, x0)
        return {y_ids[i]: float(vals[i]) for i in range(len(y_ids))}

    def bounder(mdl: Model, box: list[Interval]) -> None:
        for ref, iv in zip(ys, bounds_mod.propagate(act, box)):
            mdl.tighten_bounds(ref, iv)

    return list(ys), rec.done(act, witness, bounder)


def formulate_softmax(
    model: Model, x: Sequence[Entry], reduced: bool = False
) -> tuple[list[Entry], Formulation]:
    n = len(x)
    exps = [ir.exp(as_expr(e)) for e in x]
    if reduced:
        denom = AffineComb(tuple((1.0, t) for t in exps), 0.0)
        return [exps[i] / denom for i in range(n)], Formulation(SoftMax(), [], [])

    rec = _Recorder(model)
    d = rec.var(Interval(n * _DENOM_FLOOR, math.inf))
    rec.con(NonlinearEq(Var(d) - AffineComb(tuple((1.0, t) for t in exps), 0.0)))
    ys = [rec.var(ir.UNIT) for _ in range(n)]
    for i in range(n):
        rec.con(NonlinearEq(Var(ys[i]) * Var(d) - exps[i]))
    rec.con(LinearEq(_linear_row([(y, 1.0) for y in ys]), 1.0))

    def witness(x0: np.ndarray) -> dict[int, float]:
        vals = predict(SoftMax(), x0)
        out = {d.id: float(np.sum(np.exp(x0)))}
        out.update({ys[i].id: float(vals[i]) for i in range(n)})
        return out

    def bounder(mdl: Model, box: list[Interval]) -> None:
        for ref, iv in zip(ys, bounds_mod.propagate(SoftMax(), box)):
            mdl.tighten_bounds(ref, iv)
        lo = sum(math.exp(min(iv.lo, 700.0)) for iv in box)
        hi = sum(bounds_mod._exp_or_inf(iv.hi) for iv in box)
        mdl.tighten_bounds(d, Interval(lo, hi))

    return list(ys), rec.done(SoftMax(), witness, bounder)


def formulate_tree(
    model: Model,
    tree: BinaryDecisionTree,
    x: Sequence[Entry],
    input_bounds: Sequence[Interval] | None = None,
) -> tuple[list[Entry], Formulation]:
    if len(x) != tree.n_inputs:
        raise DimensionError(f"tree expects {tree.n_inputs} inputs, got {len(x)}")
    box = _default_box(model, x, input_bounds)
    paths = enumerate_paths(tree.root)
    used = {f for p in paths for f, _, _ in p.conditions}
    for f in sorted(used):
        if not box[f].is_finite:
            raise UnboundedInput(
                f"tree implication big-M needs finite bounds on input {f}, got {box[f]}"
            )

    rec = _Recorder(model)
    refs, made = _materialize(rec, x, box)
    extras = [(refs[i], i) for i in made]
    deltas = [rec.var(ir.UNIT, binary=True) for _ in paths]
    leaf_values = [p.value for p in paths]
    y = rec.var(Interval(min(leaf_values), max(leaf_values)))

    for p_i, path in enumerate(paths):
        for f, t, goes_left in path.conditions:
            lo, hi = box[f].lo, box[f].hi
            if goes_left:
                # delta => x_f <= t, linearized with M = hi - t
                rec.con(
                    LinearIneq(_linear_row([(refs[f], 1.0), (deltas[p_i], hi - t)]), hi, Sense.LE)
                )
            else:
                # delta => x_f >= t (non-strict relaxation), M = t - lo
                rec.con(
                    LinearIneq(_linear_row([(refs[f], -1.0), (deltas[p_i], t - lo)]), -lo, Sense.LE)
                )
    rec.con(LinearEq(_linear_row([(dv, 1.0) for dv in deltas]), 1.0))
    rec.con(
        LinearEq(
            _linear_row([(y, 1.0)] + [(deltas[i], -leaf_values[i]) for i in range(len(paths))]),
            0.0,
        )
    )

    root = tree.root

    def witness(x0: np.ndarray) -> dict[int, float]:
        out = {ref.id: float(x0[i]) for ref, i in extras}
        taken = path_taken(root, x0)
        for k, dv in enumerate(deltas):
            out[dv.id] = 1.0 if k == taken else 0.0
        out[y.id] = leaf_values[taken]
        return out

    def bounder(mdl: Model, b: list[Interval]) -> None:
        for ref, i in extras:
            mdl.tighten_bounds(ref, b[i])
        mdl.tighten_bounds(y, bounds_mod.propagate(tree, b)[0])

    return [y], rec.done(tree, witness, bounder)


def formulate_ensemble(
    model: Model,
    ensemble: Union[RandomForest, GradientBoostedTrees],
    x: Sequence[Entry],
    input_bounds: Sequence[Interval] | None = None,
) -> tuple[list[Entry], Formulation]:
    trees = ensemble.trees
    if isinstance(ensemble, RandomForest):
        coeff, offset = 1.0 / len(trees), 0.0
    else:
        coeff, offset = 1.0, ensemble.base_score

    rec = _Recorder(model)
    box = _default_box(model, x, input_bounds)
    refs, made = _materialize(rec, x, box)
    extras = [(refs[i], i) for i in made]

    member_forms: list[Formulation] = []
    member_ys: list[VariableRef] = []
    for t in trees:
        (ty,), tf = formulate_tree(model, t, refs, box)
        member_forms.append(tf)
        member_ys.append(ty)

    agg = bounds_mod.propagate(ensemble, [ir.REALS] * trees[0].n_inputs)[0]
    y = rec.var(agg)
    rec.con(LinearEq(_linear_row([(y, 1.0)] + [(ty, -coeff) for ty in member_ys]), offset))

    all_vars = rec.vars[:-1] + [v for f in member_forms for v in f.added_vars] + [y]
    all_cons = rec.cons[:-1] + [c for f in member_forms for c in f.added_cons] + [rec.cons[-1]]

    def witness(x0: np.ndarray) -> dict[int, float]:
        out = {ref.id: float(x0[i]) for ref, i in extras}
        for f in member_forms:
            out.update(f.witness(x0))
        out[y.id] = float(predict(ensemble, x0)[0])
        return out

    def bounder(mdl: Model, b: list[Interval]) -> None:
        for ref, i in extras:
            mdl.tighten_bounds(ref, b[i])
        for f in member_forms:
            f.apply_bounds(mdl, b)
        mdl.tighten_bounds(y, bounds_mod.propagate(ensemble, b)[0])

    return [y], Formulation(ensemble, all_vars, all_cons, [], witness, bounder)


def formulate_pipeline(
    model: Model,
    pipe: Pipeline,
    x: Sequence[Entry],
    cfg: FormulationConfig,
    input_bounds: Sequence[Interval],
) -> tuple[list[Entry], Formulation]:
    children: list[Formulation] = []
    cur: Sequence[Entry] = x
    box = list(input_bounds)
    for layer in pipe.layers:
        cur, child = _embed(model, layer, cur, cfg, box, top_level=False)
        children.append(child)
        box = bounds_mod.propagate(layer, box)
    return list(cur), Formulation(pipe, [], [], children)


# ---------------------------------------------------------------------------
# Dispatch


def _embed(
    model: Model,
    p: Predictor,
    x: Sequence[Entry],
    cfg: FormulationConfig,
    box: list[Interval],
    top_level: bool,
) -> tuple[list[Entry], Formulation]:
    if isinstance(p, Pipeline):
        return formulate_pipeline(model, p, x, cfg, box)
    if isinstance(p, Affine):
        return formulate_affine(model, p.A, p.b, x, reduced=cfg.reduced_space)
    if isinstance(p, ReLU):
        variant = p.variant if p.variant is not None else cfg.relu_variant
        if cfg.reduced_space and variant is ReluVariant.NONSMOOTH:
            ys = [ir.maximum(0.0, as_expr(e)) for e in x]
            return ys, Formulation(p, [], [])
        if cfg.reduced_space and top_level:
            raise UnsupportedReducedSpace(
                f"ReLU variant {variant.value} has no reduced-space form"
            )
        return formulate_relu(model, x, variant, box)
    if isinstance(p, (Sigmoid, Tanh, SoftPlus)):
        return formulate_smooth_activation(model, p, x, reduced=cfg.reduced_space)
    if isinstance(p, SoftMax):
        return formulate_softmax(model, x, reduced=cfg.reduced_space)
    if isinstance(p, BinaryDecisionTree):
        if cfg.reduced_space and top_level:
            raise UnsupportedReducedSpace("decision trees have no reduced-space form")
        return formulate_tree(model, p, x, box)
    if isinstance(p, (RandomForest, GradientBoostedTrees)):
        if cfg.reduced_space and top_level:
            raise UnsupportedReducedSpace("tree ensembles have no reduced-space form")
        return formulate_ensemble(model, p, x, box)
    raise TypeError(f"not a predictor: {type(p).__name__}")


def add_predictor(
    model: Model,
    p: Predictor,
    x: Sequence[Entry],
    cfg: FormulationConfig | None = None,
) -> tuple[list[Entry], Formulation]:
    """Embed y = F(x) into the model; returns output entries and the record."""
    cfg = cfg if cfg is not None else FormulationConfig()
    entries = list(x)
    if not entries:
        raise DimensionError("input vector must have at least one entry")
    p = apply_config(p, cfg)
    check_input_len(p, len(entries))
    if cfg.gray_box:
        from . import graybox

        return graybox.add_gray_box(model, p, entries, cfg)
    box = [_entry_interval(model, e) for e in entries]
    return _embed(model, p, entries, cfg, box, top_level=True)


# ---------------------------------------------------------------------------
# Witness utilities (shared by the service, CLI and tests)


def witness_assignment(
    model: Model, formulation: Formulation, x: Sequence[VariableRef], x0
) -> np.ndarray:
    """Full assignment vector: input values plus the formulation witness."""
    x0 = np.asarray(x0, dtype=float)
    values = np.zeros(model.num_variables)
    for ref, v in zip(x, x0):
        values[ref.id] = v
    for vid, v in formulation.witness(x0).items():
        values[vid] = v
    return values


def entry_value(entry, assignment: Sequence[float]) -> float:
    """Numeric value of an output entry under a full assignment."""
    if isinstance(entry, VariableRef):
        return float(assignment[entry.id])
    if isinstance(entry, Expr):
        return ir.eval_expr(entry, assignment)
    evaluate = getattr(entry, "evaluate", None)
    if evaluate is not None:
        return float(evaluate(assignment))
    raise TypeError(f"not an output entry: {type(entry).__name__}")
