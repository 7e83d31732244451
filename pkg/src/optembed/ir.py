"""Optimization-model intermediate representation.

Variables with interval bounds, expression trees, six constraint kinds, and
witness-based feasibility checking. Models are single-owner mutable while
being built; everything else (intervals, expressions, constraints) is an
immutable value.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from enum import Enum
from typing import Any, Callable, Iterator, Sequence, Union

from .errors import (
    ForeignVariable,
    IncompleteAssignment,
    InvalidBounds,
    InvalidSOS,
)

_model_tags = itertools.count(1)


@dataclass(frozen=True)
class Interval:
    """Closed extended-real range. lo may be -inf, hi may be +inf."""

    lo: float = -math.inf
    hi: float = math.inf

    def __post_init__(self) -> None:
        lo, hi = float(self.lo), float(self.hi)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        if math.isnan(lo) or math.isnan(hi) or lo > hi:
            raise InvalidBounds(f"invalid interval [{lo}, {hi}]")

    @property
    def is_finite(self) -> bool:
        return math.isfinite(self.lo) and math.isfinite(self.hi)

    def contains(self, x: float, tol: float = 0.0) -> bool:
        return self.lo - tol <= x <= self.hi + tol

    def intersect(self, other: "Interval") -> "Interval":
        return Interval(max(self.lo, other.lo), min(self.hi, other.hi))


REALS = Interval()
UNIT = Interval(0.0, 1.0)


class _Algebra:
    """Operator sugar shared by Expr and VariableRef, producing Expr nodes."""

    __slots__ = ()

    def __add__(self, other):
        return Binary("add", as_expr(self), as_expr(other))

    def __radd__(self, other):
        return Binary("add", as_expr(other), as_expr(self))

    def __sub__(self, other):
        return Binary("sub", as_expr(self), as_expr(other))

    def __rsub__(self, other):
        return Binary("sub", as_expr(other), as_expr(self))

    def __mul__(self, other):
        return Binary("mul", as_expr(self), as_expr(other))

    def __rmul__(self, other):
        return Binary("mul", as_expr(other), as_expr(self))

    def __truediv__(self, other):
        return Binary("div", as_expr(self), as_expr(other))

    def __rtruediv__(self, other):
        return Binary("div", as_expr(other), as_expr(self))

    def __pow__(self, other):
        return Binary("pow", as_expr(self), as_expr(other))

    def __neg__(self):
        return Unary("neg", as_expr(self))


@dataclass(frozen=True)
class VariableRef(_Algebra):
    """Dense index into the owning Model's variable table."""

    id: int
    owner: int


class Expr(_Algebra):
    """Base class of expression-tree nodes."""

    __slots__ = ()


@dataclass(frozen=True, slots=True)
class Constant(Expr):
    value: float


@dataclass(frozen=True, slots=True)
class Var(Expr):
    ref: VariableRef


@dataclass(frozen=True, slots=True)
class AffineComb(Expr):
    """offset + sum of coefficient * sub-expression."""

    terms: tuple[tuple[float, Expr], ...]
    offset: float


@dataclass(frozen=True, slots=True)
class Unary(Expr):
    op: str  # exp | tanh | neg | log1pexp
    arg: Expr


@dataclass(frozen=True, slots=True)
class Binary(Expr):
    op: str  # add | sub | mul | div | pow | max
    lhs: Expr
    rhs: Expr


def as_expr(x: Union["Expr", VariableRef, float, int]) -> Expr:
    if isinstance(x, Expr):
        return x
    if isinstance(x, VariableRef):
        return Var(x)
    if isinstance(x, (int, float)):
        return Constant(float(x))
    raise TypeError(f"cannot coerce {type(x).__name__} to Expr")


def exp(x) -> Unary:
    return Unary("exp", as_expr(x))


def tanh(x) -> Unary:
    return Unary("tanh", as_expr(x))


def log1pexp(x) -> Unary:
    return Unary("log1pexp", as_expr(x))


def maximum(a, b) -> Binary:
    return Binary("max", as_expr(a), as_expr(b))


def affine(terms: Sequence[tuple[float, Union[Expr, VariableRef]]], offset: float = 0.0) -> AffineComb:
    return AffineComb(tuple((float(c), as_expr(e)) for c, e in terms), float(offset))


def _exp_scalar(t: float) -> float:
    try:
        return math.exp(t)
    except OverflowError:
        return math.inf


def _log1pexp_scalar(t: float) -> float:
    # log(1 + e^t), stable for large |t|
    if t > 700.0:
        return t
    return math.log1p(_exp_scalar(t))


def _div_scalar(a: float, b: float) -> float:
    if b == 0.0:
        if a == 0.0 or math.isnan(a):
            return math.nan
        return math.copysign(math.inf, a) * math.copysign(1.0, b)
    return a / b


def _pow_scalar(a: float, b: float) -> float:
    try:
        r = a**b
    except ZeroDivisionError:
        return math.inf
    except OverflowError:
        # small magnitudes underflow silently, so overflow is always +-inf
        negative = a < 0.0 and float(b).is_integer() and int(b) % 2 == 1
        return -math.inf if negative else math.inf
    if isinstance(r, complex):
        return math.nan  # negative base, non-integer exponent
    return r


def _max_scalar(a: float, b: float) -> float:
    if math.isnan(a) or math.isnan(b):
        return math.nan
    return a if a > b else b


_UNARY_OPS: dict[str, Callable[[float], float]] = {
    "exp": _exp_scalar,
    "tanh": math.tanh,
    "neg": lambda t: -t,
    "log1pexp": _log1pexp_scalar,
}

_BINARY_OPS: dict[str, Callable[[float, float], float]] = {
    "add": lambda a, b: a + b,
    "sub": lambda a, b: a - b,
    "mul": lambda a, b: a * b,
    "div": _div_scalar,
    "pow": _pow_scalar,
    "max": _max_scalar,
}


def eval_expr(e: Expr, assignment: Sequence[float]) -> float:
    """Evaluate an expression tree against values indexed by variable id.

    NaN propagates; division by zero follows IEEE-754 semantics. A variable
    id outside the assignment (or mapped to None) raises IncompleteAssignment.
    """
    t = type(e)
    if t is Constant:
        return e.value
    if t is Var:
        i = e.ref.id
        if i >= len(assignment):
            raise IncompleteAssignment(f"no value for variable {i}")
        v = assignment[i]
        if v is None:
            raise IncompleteAssignment(f"no value for variable {i}")
        return float(v)
    if t is AffineComb:
        acc = e.offset
        for c, child in e.terms:
            acc += c * eval_expr(child, assignment)
        return acc
    if t is Unary:
        return _UNARY_OPS[e.op](eval_expr(e.arg, assignment))
    if t is Binary:
        return _BINARY_OPS[e.op](eval_expr(e.lhs, assignment), eval_expr(e.rhs, assignment))
    raise TypeError(f"not an Expr node: {e!r}")


def expr_variables(e: Expr) -> Iterator[VariableRef]:
    """Yield every VariableRef appearing in the tree (with repetition)."""
    stack = [e]
    while stack:
        node = stack.pop()
        t = type(node)
        if t is Var:
            yield node.ref
        elif t is AffineComb:
            stack.extend(child for _, child in node.terms)
        elif t is Unary:
            stack.append(node.arg)
        elif t is Binary:
            stack.append(node.lhs)
            stack.append(node.rhs)


# ---------------------------------------------------------------------------
# Constraints

LinearTerm = tuple[VariableRef, float]


class Sense(Enum):
    LE = "<="
    GE = ">="


def _check_row(row: tuple[LinearTerm, ...]) -> None:
    seen = set()
    for ref, _ in row:
        if ref.id in seen:
            raise ValueError(f"linear row references variable {ref.id} more than once")
        seen.add(ref.id)


@dataclass(frozen=True)
class LinearEq:
    """row . x == rhs"""

    row: tuple[LinearTerm, ...]
    rhs: float

    def __post_init__(self) -> None:
        _check_row(self.row)


@dataclass(frozen=True)
class LinearIneq:
    """row . x <= rhs (Sense.LE) or row . x >= rhs (Sense.GE)"""

    row: tuple[LinearTerm, ...]
    rhs: float
    sense: Sense

    def __post_init__(self) -> None:
        _check_row(self.row)


@dataclass(frozen=True)
class NonlinearEq:
    """expr == 0"""

    expr: Expr


@dataclass(frozen=True)
class NonlinearIneq:
    """expr <= 0"""

    expr: Expr


@dataclass(frozen=True)
class SOS1:
    """At most one member variable may be nonzero."""

    vars: tuple[VariableRef, ...]
    weights: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.vars) != len(self.weights):
            raise InvalidSOS("vars and weights differ in length")
        if any(w <= 0 or not math.isfinite(w) for w in self.weights):
            raise InvalidSOS(f"weights must be positive finite reals: {self.weights}")
        if len(set(self.weights)) != len(self.weights):
            raise InvalidSOS(f"weights must be pairwise distinct: {self.weights}")


@dataclass(frozen=True)
class Integrality:
    """var must take a value in {0, 1}."""

    var: VariableRef


Constraint = Union[LinearEq, LinearIneq, NonlinearEq, NonlinearIneq, SOS1, Integrality]


@dataclass(frozen=True)
class ConstraintRef:
    index: int
    owner: int


@dataclass(frozen=True)
class OracleConstraint:
    """Callback-backed constraint F(inputs) - outputs == 0.

    evaluator is None for records re-read from JSON that were marked
    external; those cannot be checked and are skipped by check_feasible.
    """

    inputs: tuple[VariableRef, ...]
    outputs: tuple[VariableRef, ...]
    evaluator: Callable[[Sequence[float]], Sequence[float]] | None
    predictor: Any = None


# ---------------------------------------------------------------------------
# Feasibility


@dataclass(frozen=True)
class Violation:
    kind: str
    where: str
    amount: float

    def __str__(self) -> str:
        return f"{self.kind} {self.where}: violated by {self.amount:.6g}"


@dataclass(frozen=True)
class FeasibilityReport:
    violations: tuple[Violation, ...]

    @property
    def feasible(self) -> bool:
        return not self.violations

    @property
    def max_violation(self) -> float:
        return max((v.amount for v in self.violations), default=0.0)


@dataclass
class _VarInfo:
    bounds: Interval
    binary: bool


class Model:
    """Mutable optimization-model container.

    Variables and constraints are append-only; ids are dense and stable.
    """

    def __init__(self) -> None:
        self._tag = next(_model_tags)
        self._vars: list[_VarInfo] = []
        self._cons: list[Constraint] = []
        self._oracles: list[OracleConstraint] = []

    # -- variables

    def add_variable(self, bounds: Interval = REALS, binary: bool = False) -> VariableRef:
        if binary and not (bounds.lo >= 0.0 and bounds.hi <= 1.0):
            raise InvalidBounds(f"binary variable bounds {bounds} not within [0, 1]")
        self._vars.append(_VarInfo(bounds, binary))
        return VariableRef(len(self._vars) - 1, self._tag)

    def add_variables(self, n: int, bounds: Interval = REALS, binary: bool = False) -> list[VariableRef]:
        return [self.add_variable(bounds, binary) for _ in range(n)]

    @property
    def num_variables(self) -> int:
        return len(self._vars)

    def ref(self, i: int) -> VariableRef:
        if not 0 <= i < len(self._vars):
            raise ForeignVariable(f"no variable with id {i}")
        return VariableRef(i, self._tag)

    def bounds(self, ref: VariableRef) -> Interval:
        self._own(ref)
        return self._vars[ref.id].bounds

    def is_binary(self, ref: VariableRef) -> bool:
        self._own(ref)
        return self._vars[ref.id].binary

    def variable_bounds(self) -> list[Interval]:
        return [info.bounds for info in self._vars]

    def tighten_bounds(self, ref: VariableRef, bounds: Interval) -> None:
        """Intersect the variable's interval with `bounds`; never loosens."""
        self._own(ref)
        info = self._vars[ref.id]
        info.bounds = info.bounds.intersect(bounds)

    # -- constraints

    def add_constraint(self, con: Constraint) -> ConstraintRef:
        for ref in _constraint_variables(con):
            self._own(ref)
        self._cons.append(con)
        return ConstraintRef(len(self._cons) - 1, self._tag)

    @property
    def constraints(self) -> tuple[Constraint, ...]:
        return tuple(self._cons)

    @property
    def num_constraints(self) -> int:
        return len(self._cons)

    # -- oracle constraints

    def add_oracle(self, rec: OracleConstraint) -> int:
        for ref in (*rec.inputs, *rec.outputs):
            self._own(ref)
        self._oracles.append(rec)
        return len(self._oracles) - 1

    @property
    def oracles(self) -> tuple[OracleConstraint, ...]:
        return tuple(self._oracles)

    # -- checking

    def check_feasible(self, assignment: Sequence[float], tol: float) -> FeasibilityReport:
        """Check the assignment against bounds, integrality and all constraints.

        Equations use |lhs - rhs| <= tol, inequalities a one-sided tol, SOS1
        allows at most one member with |value| > tol, binary variables must be
        within tol of {0, 1}. Oracle constraints are checked through their
        callbacks (componentwise). Running with tol=0 reports every nonzero
        residual, which is how callers observe the true maximum violation.
        """
        if len(assignment) < len(self._vars):
            raise IncompleteAssignment(
                f"assignment has {len(assignment)} values for {len(self._vars)} variables"
            )
        out: list[Violation] = []

        for i, info in enumerate(self._vars):
            v = float(assignment[i])
            gap = max(info.bounds.lo - v, v - info.bounds.hi)
            if gap > tol:
                out.append(Violation("bounds", f"x{i}", gap))
            if info.binary:
                off = min(abs(v), abs(v - 1.0))
                if off > tol:
                    out.append(Violation("binary", f"x{i}", off))

        for idx, con in enumerate(self._cons):
            amount = _constraint_residual(con, assignment, tol)
            if amount > tol:
                out.append(Violation(_kind_name(con), f"c{idx}", amount))

        for idx, rec in enumerate(self._oracles):
            if rec.evaluator is None:
                continue
            fx = rec.evaluator([float(assignment[r.id]) for r in rec.inputs])
            for k, yref in enumerate(rec.outputs):
                amount = abs(float(fx[k]) - float(assignment[yref.id]))
                if amount > tol:
                    out.append(Violation("oracle", f"o{idx}[{k}]", amount))

        return FeasibilityReport(tuple(out))

    def _own(self, ref: VariableRef) -> None:
        if ref.owner != self._tag or not 0 <= ref.id < len(self._vars):
            raise ForeignVariable(f"variable {ref.id} does not belong to this model")


def _constraint_variables(con: Constraint) -> Iterator[VariableRef]:
    if isinstance(con, (LinearEq, LinearIneq)):
        for ref, _ in con.row:
            yield ref
    elif isinstance(con, (NonlinearEq, NonlinearIneq)):
        yield from expr_variables(con.expr)
    elif isinstance(con, SOS1):
        yield from con.vars
    elif isinstance(con, Integrality):
        yield con.var
    else:
        raise TypeError(f"unknown constraint kind: {type(con).__name__}")


def _kind_name(con: Constraint) -> str:
    return {
        LinearEq: "linear_eq",
        LinearIneq: "linear_ineq",
        NonlinearEq: "nonlinear_eq",
        NonlinearIneq: "nonlinear_ineq",
        SOS1: "sos1",
        Integrality: "integrality",
    }[type(con)]


def _dot(row: tuple[LinearTerm, ...], assignment: Sequence[float]) -> float:
    acc = 0.0
    for ref, c in row:
        acc += c * float(assignment[ref.id])
    return acc


def _constraint_residual(con: Constraint, assignment: Sequence[float], tol: float) -> float:
    if isinstance(con, LinearEq):
        return abs(_dot(con.row, assignment) - con.rhs)
    if isinstance(con, LinearIneq):
        lhs = _dot(con.row, assignment)
        gap = lhs - con.rhs if con.sense is Sense.LE else con.rhs - lhs
        return max(gap, 0.0)
    if isinstance(con, NonlinearEq):
        return abs(eval_expr(con.expr, assignment))
    if isinstance(con, NonlinearIneq):
        return max(eval_expr(con.expr, assignment), 0.0)
    if isinstance(con, SOS1):
        magnitudes = sorted((abs(float(assignment[r.id])) for r in con.vars), reverse=True)
        return magnitudes[1] if len(magnitudes) > 1 else 0.0
    if isinstance(con, Integrality):
        v = float(assignment[con.var.id])
        return min(abs(v), abs(v - 1.0))
    raise TypeError(f"unknown constraint kind: {type(con).__name__}")
