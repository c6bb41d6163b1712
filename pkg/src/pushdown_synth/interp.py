"""Concrete evaluator for DSL expressions, folds, and Lift semantics."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .syntax import (
    BinOp, Cond, CoerceSome, Expr, Index, Insert, IsNone, ListExpr, Lit,
    Match, Name, Not, SliceFrom, SomeVal, TupleExpr,
)
from .values import (
    NEG_INF, NONE, EvalError, Some, Value, num_le, num_lt, values_equal,
)

BOTTOM = object()  # distinguished undefined result of empty folds

UNDEF = object()  # payload of a None value; absorbed by guarding connectives


@dataclass
class LiftResult:
    value: object  # Value or BOTTOM

    @property
    def is_bottom(self) -> bool:
        return self.value is BOTTOM

    def __eq__(self, other):
        if not isinstance(other, LiftResult):
            return NotImplemented
        if self.is_bottom or other.is_bottom:
            return self.is_bottom and other.is_bottom
        return values_equal(self.value, other.value)

    def __repr__(self):
        return "Bottom" if self.is_bottom else f"Defined({self.value!r})"


def eval_expr(expr: Expr, env: dict) -> Value:
    if isinstance(expr, Lit):
        if expr.kind == "int":
            return int(expr.value)
        if expr.kind == "float":
            return Fraction(expr.value)
        if expr.kind == "neginf":
            return NEG_INF
        if expr.kind == "bool":
            return bool(expr.value)
        if expr.kind == "str":
            return str(expr.value)
        if expr.kind == "none":
            return NONE
        raise EvalError(f"bad literal kind {expr.kind}")
    if isinstance(expr, Name):
        try:
            return env[expr.ident]
        except KeyError:
            raise EvalError(f"unbound name {expr.ident!r} at {expr.span}")
    if isinstance(expr, Not):
        val = eval_expr(expr.operand, env)
        return UNDEF if val is UNDEF else not val
    if isinstance(expr, BinOp):
        op = expr.op
        if op in ("and", "or"):
            left = eval_expr(expr.left, env)
            right = eval_expr(expr.right, env)
            if op == "and":
                if left is False or right is False:
                    return False
                if left is UNDEF or right is UNDEF:
                    return UNDEF
                return bool(left) and bool(right)
            if left is True or right is True:
                return True
            if left is UNDEF or right is UNDEF:
                return UNDEF
            return bool(left) or bool(right)
        left = eval_expr(expr.left, env)
        right = eval_expr(expr.right, env)
        if left is UNDEF or right is UNDEF:
            return UNDEF
        if op == "==":
            return values_equal(left, right)
        if op == ">":
            return num_lt(right, left)
        if op == ">=":
            return num_le(right, left)
        if op == "<":
            return num_lt(left, right)
        if op == "<=":
            return num_le(left, right)
        if left is NEG_INF or right is NEG_INF:
            raise EvalError("arithmetic on -inf")
        if op == "+":
            return left + right
        if op == "-":
            return left - right
        if op == "*":
            return left * right
        if op == "/":
            if right == 0:
                raise EvalError("division by zero")
            return Fraction(left) / Fraction(right)
        raise EvalError(f"bad operator {op}")
    if isinstance(expr, Cond):
        test = eval_expr(expr.test, env)
        if test is UNDEF:
            return UNDEF
        if test:
            return eval_expr(expr.then, env)
        return eval_expr(expr.other, env)
    if isinstance(expr, Match):
        scrutinee = eval_expr(expr.scrutinee, env)
        none_case = next(c for c in expr.cases if c.pattern is None)
        bind_case = next(c for c in expr.cases if c.pattern is not None)
        if scrutinee is NONE:
            return eval_expr(none_case.body, env)
        if not isinstance(scrutinee, Some):
            raise EvalError("match scrutinee is not Optional")
        inner = dict(env)
        inner[bind_case.pattern] = scrutinee.value
        return eval_expr(bind_case.body, inner)
    if isinstance(expr, TupleExpr):
        return tuple(eval_expr(e, env) for e in expr.items)
    if isinstance(expr, ListExpr):
        return [eval_expr(e, env) for e in expr.items]
    if isinstance(expr, Index):
        base = eval_expr(expr.base, env)
        if isinstance(base, tuple):
            return base[expr.index]
        if isinstance(base, list):
            try:
                return base[expr.index]
            except IndexError:
                raise EvalError(f"list index {expr.index} out of range")
        raise EvalError("cannot index non-sequence")
    if isinstance(expr, SliceFrom):
        base = eval_expr(expr.base, env)
        if not isinstance(base, list):
            raise EvalError("cannot slice non-list")
        return base[expr.start :]
    if isinstance(expr, Insert):
        target = eval_expr(expr.target, env)
        item = eval_expr(expr.item, env)
        if not isinstance(target, list):
            raise EvalError("insert target is not a list")
        out = list(target)
        lo = 0
        while lo < len(out) and num_lt(out[lo], item):
            lo += 1
        out.insert(lo, item)
        return out
    if isinstance(expr, CoerceSome):
        return Some(eval_expr(expr.operand, env))
    if isinstance(expr, SomeVal):
        val = eval_expr(expr.operand, env)
        if not isinstance(val, Some):
            return UNDEF
        return val.value
    if isinstance(expr, IsNone):
        return eval_expr(expr.operand, env) is NONE
    raise EvalError(f"cannot evaluate {type(expr).__name__}")


def eval_atom(expr: Expr, env: dict) -> bool:
    """Ground truth value of a predicate; well-guarded atoms never stay UNDEF."""
    val = eval_expr(expr, env)
    if val is UNDEF:
        raise EvalError("atom is undefined under the given assignment")
    return bool(val)


def eval_fold(task, dataframe) -> LiftResult:
    """Left fold of the task's accumulator over the rows; empty input is Bottom."""
    if not dataframe:
        return LiftResult(BOTTOM)
    acc: Value = task.init_values
    for row in dataframe:
        if len(row) != task.n_columns:
            raise EvalError("row does not conform to schema")
        acc = eval_expr(task.f_body, {"a": acc, "r": tuple(row)})
    return LiftResult(acc)


def eval_pred(pred_exprs, acc: Value, var: str = "a") -> bool:
    """Conjunction of predicate expressions over the accumulator variable."""
    return all(eval_atom(p, {var: acc}) for p in pred_exprs)


def lift_eval(pred_exprs, result: LiftResult, var: str = "a") -> LiftResult:
    if result.is_bottom:
        return result
    if eval_pred(pred_exprs, result.value, var):
        return result
    return LiftResult(BOTTOM)


def filter_rows(pred_exprs, dataframe):
    return [
        row
        for row in dataframe
        if all(eval_atom(p, {"r": tuple(row)}) for p in pred_exprs)
    ]


def run_pipeline(task, dataframe) -> LiftResult:
    """Execute a typechecked pipeline (prefilters, fold, post-filter) on rows."""
    rows = dataframe
    if task.prefilters:
        rows = filter_rows(task.prefilters, rows)
    result = eval_fold(task, rows)
    if task.post_pred is not None:
        result = lift_eval([task.post_pred], result)
    return result
