"""Model serialization: LP format for MILP-representable models, and a
lossless JSON dump for diffing and round-trip tests.

Both writers are deterministic: variable order is id order, constraint order
is insertion order, and numbers are emitted with full double precision.
"""

from __future__ import annotations

import json
import math
from typing import IO, Union

from .errors import NonlinearNotExportable, OracleNotExportable, ParseError
from .ir import (
    AffineComb,
    Binary,
    Constant,
    Constraint,
    Expr,
    Integrality,
    Interval,
    LinearEq,
    LinearIneq,
    Model,
    NonlinearEq,
    NonlinearIneq,
    OracleConstraint,
    Sense,
    SOS1,
    Unary,
    Var,
    VariableRef,
)
from .predictors import parse_predictor, predictor_json

FORMAT_VERSION = 1


def _num(v: float) -> str:
    if v == 0.0:
        return "0"  # normalize -0.0
    return format(v, ".17g")


def _write(sink: IO, text: str) -> None:
    try:
        sink.write(text)
    except TypeError:
        sink.write(text.encode("utf-8"))


# ---------------------------------------------------------------------------
# LP format


def _lp_terms(row) -> str:
    if not row:
        return "0"
    parts = []
    for k, (ref, c) in enumerate(row):
        if k == 0:
            parts.append(f"{_num(c)} x{ref.id}")
        elif c < 0 or (c == 0 and math.copysign(1.0, c) < 0):
            parts.append(f"- {_num(-c)} x{ref.id}")
        else:
            parts.append(f"+ {_num(c)} x{ref.id}")
    return " ".join(parts)


def lp_text(model: Model) -> str:
    """Render the model in LP format (constant-zero objective)."""
    if model.oracles:
        raise OracleNotExportable("model has oracle constraints; use the JSON exporter")
    nonlinear = [
        i
        for i, c in enumerate(model.constraints)
        if isinstance(c, (NonlinearEq, NonlinearIneq))
    ]
    if nonlinear:
        raise NonlinearNotExportable(nonlinear)

    lines = ["Minimize", " obj: 0", "Subject To"]
    for i, con in enumerate(model.constraints):
        if isinstance(con, LinearEq):
            lines.append(f" c{i}: {_lp_terms(con.row)} = {_num(con.rhs)}")
        elif isinstance(con, LinearIneq):
            op = "<=" if con.sense is Sense.LE else ">="
            lines.append(f" c{i}: {_lp_terms(con.row)} {op} {_num(con.rhs)}")

    lines.append("Bounds")
    for i, iv in enumerate(model.variable_bounds()):
        lo_f, hi_f = math.isfinite(iv.lo), math.isfinite(iv.hi)
        if lo_f and hi_f:
            lines.append(f" {_num(iv.lo)} <= x{i} <= {_num(iv.hi)}")
        elif lo_f:
            lines.append(f" x{i} >= {_num(iv.lo)}")
        elif hi_f:
            lines.append(f" -infinity <= x{i} <= {_num(iv.hi)}")
        else:
            lines.append(f" x{i} free")

    binaries = {i for i in range(model.num_variables) if model.is_binary(model.ref(i))}
    binaries.update(c.var.id for c in model.constraints if isinstance(c, Integrality))
    if binaries:
        lines.append("Binary")
        for i in sorted(binaries):
            lines.append(f" x{i}")

    sos = [(i, c) for i, c in enumerate(model.constraints) if isinstance(c, SOS1)]
    if sos:
        lines.append("SOS")
        for k, (_, c) in enumerate(sos):
            members = " ".join(f"x{r.id}:{_num(w)}" for r, w in zip(c.vars, c.weights))
            lines.append(f" s{k}: S1 :: {members}")

    lines.append("End")
    return "\n".join(lines) + "\n"


def write_lp(model: Model, sink: IO) -> None:
    _write(sink, lp_text(model))


# ---------------------------------------------------------------------------
# Model JSON


def _bound_json(v: float):
    if v == math.inf:
        return "inf"
    if v == -math.inf:
        return "-inf"
    return v


def _bound_from_json(v, path: str) -> float:
    if v == "inf":
        return math.inf
    if v == "-inf":
        return -math.inf
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ParseError(path, f"expected number or 'inf'/'-inf', got {v!r}")
    return float(v)


def _expr_json(e: Expr) -> dict:
    if isinstance(e, Constant):
        return {"op": "const", "value": e.value}
    if isinstance(e, Var):
        return {"op": "var", "id": e.ref.id}
    if isinstance(e, AffineComb):
        return {
            "op": "affine",
            "terms": [[c, _expr_json(child)] for c, child in e.terms],
            "offset": e.offset,
        }
    if isinstance(e, Unary):
        return {"op": "unary", "fn": e.op, "arg": _expr_json(e.arg)}
    if isinstance(e, Binary):
        return {"op": "binary", "fn": e.op, "lhs": _expr_json(e.lhs), "rhs": _expr_json(e.rhs)}
    raise TypeError(f"not an Expr node: {type(e).__name__}")


def _expr_from_json(obj, model: Model, path: str) -> Expr:
    if not isinstance(obj, dict) or "op" not in obj:
        raise ParseError(path, "expected expression object with 'op'")
    op = obj["op"]
    if op == "const":
        return Constant(float(obj["value"]))
    if op == "var":
        return Var(_ref(model, obj["id"], path))
    if op == "affine":
        terms = tuple(
            (float(c), _expr_from_json(child, model, f"{path}.terms[{i}]"))
            for i, (c, child) in enumerate(obj["terms"])
        )
        return AffineComb(terms, float(obj["offset"]))
    if op == "unary":
        if obj["fn"] not in ("exp", "tanh", "neg", "log1pexp"):
            raise ParseError(f"{path}.fn", f"unknown unary op {obj['fn']!r}")
        return Unary(obj["fn"], _expr_from_json(obj["arg"], model, f"{path}.arg"))
    if op == "binary":
        if obj["fn"] not in ("add", "sub", "mul", "div", "pow", "max"):
            raise ParseError(f"{path}.fn", f"unknown binary op {obj['fn']!r}")
        return Binary(
            obj["fn"],
            _expr_from_json(obj["lhs"], model, f"{path}.lhs"),
            _expr_from_json(obj["rhs"], model, f"{path}.rhs"),
        )
    raise ParseError(f"{path}.op", f"unknown expression op {op!r}")


def _constraint_json(con: Constraint) -> dict:
    if isinstance(con, LinearEq):
        return {"kind": "linear_eq", "row": [[r.id, c] for r, c in con.row], "rhs": con.rhs}
    if isinstance(con, LinearIneq):
        return {
            "kind": "linear_ineq",
            "row": [[r.id, c] for r, c in con.row],
            "rhs": con.rhs,
            "sense": con.sense.value,
        }
    if isinstance(con, NonlinearEq):
        return {"kind": "nonlinear_eq", "expr": _expr_json(con.expr)}
    if isinstance(con, NonlinearIneq):
        return {"kind": "nonlinear_ineq", "expr": _expr_json(con.expr)}
    if isinstance(con, SOS1):
        return {
            "kind": "sos1",
            "vars": [r.id for r in con.vars],
            "weights": list(con.weights),
        }
    if isinstance(con, Integrality):
        return {"kind": "integrality", "var": con.var.id}
    raise TypeError(f"unknown constraint kind: {type(con).__name__}")


def model_json_obj(model: Model) -> dict:
    """Canonical JSON object form of the model (used for structural equality)."""
    return {
        "format_version": FORMAT_VERSION,
        "variables": [
            {"lo": _bound_json(iv.lo), "hi": _bound_json(iv.hi), "binary": binary}
            for iv, binary in (
                (model.bounds(model.ref(i)), model.is_binary(model.ref(i)))
                for i in range(model.num_variables)
            )
        ],
        "constraints": [_constraint_json(c) for c in model.constraints],
        "oracles": [
            {
                "inputs": [r.id for r in rec.inputs],
                "outputs": [r.id for r in rec.outputs],
                "predictor": predictor_json(rec.predictor) if rec.predictor is not None else None,
            }
            for rec in model.oracles
        ],
    }


def model_json_text(model: Model) -> str:
    return json.dumps(model_json_obj(model), indent=1, sort_keys=True, allow_nan=False) + "\n"


def write_model_json(model: Model, sink: IO) -> None:
    _write(sink, model_json_text(model))


def _ref(model: Model, vid, path: str) -> VariableRef:
    if isinstance(vid, bool) or not isinstance(vid, int) or not 0 <= vid < model.num_variables:
        raise ParseError(path, f"invalid variable id {vid!r}")
    return model.ref(vid)


def read_model_json(source: Union[bytes, str, IO]) -> Model:
    """Rebuild a Model from its JSON dump.

    Oracle records carrying a predictor are re-bound to a fresh evaluation
    callback; records without one are kept but marked unverifiable.
    """
    if isinstance(source, bytes):
        text = source.decode("utf-8")
    elif isinstance(source, str):
        text = source
    else:
        text = source.read()
        if isinstance(text, bytes):
            text = text.decode("utf-8")
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError("$", f"invalid JSON: {e}") from None

    if not isinstance(obj, dict) or obj.get("format_version") != FORMAT_VERSION:
        raise ParseError("$.format_version", f"expected {FORMAT_VERSION}")

    model = Model()
    for i, v in enumerate(obj.get("variables", [])):
        path = f"$.variables[{i}]"
        if not isinstance(v, dict):
            raise ParseError(path, "expected object")
        model.add_variable(
            Interval(_bound_from_json(v.get("lo"), path), _bound_from_json(v.get("hi"), path)),
            binary=bool(v.get("binary", False)),
        )

    for i, c in enumerate(obj.get("constraints", [])):
        path = f"$.constraints[{i}]"
        if not isinstance(c, dict):
            raise ParseError(path, "expected object")
        kind = c.get("kind")
        if kind == "linear_eq":
            row = tuple((_ref(model, vid, path), float(k)) for vid, k in c["row"])
            model.add_constraint(LinearEq(row, float(c["rhs"])))
        elif kind == "linear_ineq":
            row = tuple((_ref(model, vid, path), float(k)) for vid, k in c["row"])
            sense = Sense.LE if c.get("sense") == "<=" else Sense.GE
            model.add_constraint(LinearIneq(row, float(c["rhs"]), sense))
        elif kind == "nonlinear_eq":
            model.add_constraint(NonlinearEq(_expr_from_json(c["expr"], model, f"{path}.expr")))
        elif kind == "nonlinear_ineq":
            model.add_constraint(NonlinearIneq(_expr_from_json(c["expr"], model, f"{path}.expr")))
        elif kind == "sos1":
            model.add_constraint(
                SOS1(
                    tuple(_ref(model, vid, path) for vid in c["vars"]),
                    tuple(float(w) for w in c["weights"]),
                )
            )
        elif kind == "integrality":
            model.add_constraint(Integrality(_ref(model, c["var"], path)))
        else:
            raise ParseError(f"{path}.kind", f"unknown constraint kind {kind!r}")

    for i, rec in enumerate(obj.get("oracles", [])):
        path = f"$.oracles[{i}]"
        inputs = tuple(_ref(model, vid, path) for vid in rec.get("inputs", []))
        outputs = tuple(_ref(model, vid, path) for vid in rec.get("outputs", []))
        pred_obj = rec.get("predictor")
        if pred_obj is None:
            model.add_oracle(OracleConstraint(inputs, outputs, None, None))
        else:
            from .graybox import make_oracle

            p = parse_predictor(pred_obj, f"{path}.predictor")
            model.add_oracle(OracleConstraint(inputs, outputs, make_oracle(p).eval, p))

    return model


def models_structurally_equal(a: Model, b: Model) -> bool:
    return model_json_obj(a) == model_json_obj(b)
