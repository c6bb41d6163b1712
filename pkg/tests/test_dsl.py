"""Parser, pretty-printer, and typechecker behavior."""

import pytest

from pushdown_synth.lexer import DslSyntaxError
from pushdown_synth.parser import parse, parse_expression
from pushdown_synth.pretty import fmt_expr, fmt_program
from pushdown_synth.syntax import (
    FLOAT, Fold, Match, TFloat, TInt, TOpt, structurally_equal, walk,
)
from pushdown_synth.typecheck import DslTypeError, typecheck

from conftest import fixture_source, make_task

ALL_FIXTURES = ["top2", "discount", "case_a", "case_b", "count_taut"]


def test_top2_parses_to_one_fold():
    program = parse(fixture_source("top2"))
    folds = [n for s in program.stmts for n in walk(s.expr) if isinstance(n, Fold)]
    assert len(folds) == 1
    cond = folds[0].fn.body
    # two-branch conditional: the else arm is itself a conditional
    from pushdown_synth.syntax import Cond

    assert isinstance(cond, Cond) and isinstance(cond.other, Cond)


def test_empty_program_is_a_syntax_error():
    with pytest.raises(DslSyntaxError) as exc:
        parse("   # just a comment\n")
    assert "empty program" in str(exc.value)
    assert exc.value.expected  # expected-token set is reported


def test_syntax_error_carries_location_and_expectations():
    with pytest.raises(DslSyntaxError) as exc:
        parse("x = (1 +")
    assert exc.value.span.line == 1


def test_match_program_parses_with_two_cases():
    program = parse(fixture_source("case_b"))
    matches = [
        n for s in program.stmts for n in walk(s.expr) if isinstance(n, Match)
    ]
    assert matches and all(len(m.cases) == 2 for m in matches)


@pytest.mark.parametrize("name", ALL_FIXTURES)
def test_pretty_roundtrip(name):
    program = parse(fixture_source(name))
    reparsed = parse(fmt_program(program))
    assert len(program.stmts) == len(reparsed.stmts)
    for a, b in zip(program.stmts, reparsed.stmts):
        assert a.name == b.name
        assert structurally_equal(a.expr, b.expr)


def test_typecheck_top2():
    task = make_task("top2")
    assert task.schema == (FLOAT,)
    assert tuple(task.acc_type.elems) == (FLOAT, FLOAT)
    assert [fmt_expr(c) for c in task.post_conjuncts] == [
        "a[0] > 90.0", "a[1] > 90.0",
    ]


def test_typecheck_case_b_accumulator_type():
    task = make_task("case_b")
    elems = tuple(task.acc_type.elems)
    assert isinstance(elems[0], TFloat)
    assert elems[1] == TOpt(TInt())
    assert isinstance(elems[2], TFloat)
    assert elems[3] == TOpt(TInt())


def test_type_mismatch_int_vs_float():
    source = """
df = (float,)
agg = fold(df, (0.5,), lambda a, r: (a[0] + 1,))
out = filter(agg, lambda a: a[0] >= 0.0)
"""
    with pytest.raises(DslTypeError) as exc:
        typecheck(parse(source))
    assert "mismatch" in str(exc.value)


def test_missing_fold():
    with pytest.raises(DslTypeError) as exc:
        typecheck(parse("df = (float,)\n"))
    assert "no fold" in str(exc.value)


def test_multiple_folds():
    source = """
df = (float,)
a1 = fold(df, (0.0,), lambda a, r: (a[0],))
a2 = fold(df, (0.0,), lambda a, r: (a[0],))
"""
    with pytest.raises(DslTypeError) as exc:
        typecheck(parse(source))
    assert "multiple folds" in str(exc.value)


def test_post_filter_must_be_boolean():
    source = """
df = (float,)
agg = fold(df, (0.0,), lambda a, r: (r[0],))
out = filter(agg, lambda a: a[0] + 1.0)
"""
    with pytest.raises(DslTypeError):
        typecheck(parse(source))


def test_non_exhaustive_match():
    source = """
df = (int,)
agg = fold(df, (None,), lambda a, r: (match a[0]: case None: r[0],))
out = filter(agg, lambda a: True)
"""
    with pytest.raises(DslTypeError) as exc:
        typecheck(parse(source))
    assert "match" in str(exc.value)


def test_fix_lambda_is_rejected():
    source = """
df = (float,)
agg = fold(df, (0.0,), fix a, r: (r[0],))
out = filter(agg, lambda a: a[0] > 0.0)
"""
    with pytest.raises(DslTypeError) as exc:
        typecheck(parse(source))
    assert "fix" in str(exc.value)


def test_division_by_non_constant_rejected():
    source = """
df = (float,)
agg = fold(df, (1.0,), lambda a, r: (r[0] / a[0],))
out = filter(agg, lambda a: a[0] > 0.0)
"""
    with pytest.raises(DslTypeError) as exc:
        typecheck(parse(source))
    assert "divisor" in str(exc.value)


def test_arithmetic_on_possible_sentinel_rejected():
    source = """
df = (float,)
agg = fold(df, (-inf,), lambda a, r: (a[0] + r[0],))
out = filter(agg, lambda a: a[0] > 0.0)
"""
    with pytest.raises(DslTypeError) as exc:
        typecheck(parse(source))
    assert "-inf" in str(exc.value)


def test_typecheck_is_deterministic():
    t1 = make_task("case_a")
    t2 = make_task("case_a")
    assert [fmt_expr(c) for c in t1.post_conjuncts] == [
        fmt_expr(c) for c in t2.post_conjuncts
    ]


def test_parse_expression_rejects_trailing_tokens():
    with pytest.raises(DslSyntaxError):
        parse_expression("a[0] > 1.0 extra")
