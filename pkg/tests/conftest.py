import importlib.resources

import pytest

from pushdown_synth.analysis import build_universes
from pushdown_synth.encode import TaskContext
from pushdown_synth.parser import parse
from pushdown_synth.smt import SolverConfig, start_session
from pushdown_synth.typecheck import typecheck

FIXTURES = importlib.resources.files("pushdown_synth") / "fixtures"


def fixture_source(name: str) -> str:
    return (FIXTURES / f"{name}.pdsl").read_text()


def make_task(name: str):
    return typecheck(parse(fixture_source(name)), name)


def make_context(source: str, name: str = "task", extra_q=(), extra_residual=(),
                 extra_psi=(), timeout_ms: int = 30000):
    """Independent context; optional extra atoms extend the universes."""
    from pushdown_synth.parser import parse_expression
    from pushdown_synth.syntax import TTuple
    from pushdown_synth.typecheck import type_predicate

    task = typecheck(parse(source), name)
    universes = build_universes(task)
    row_env = {"r": TTuple(tuple(task.schema))}
    acc_env = {"a": task.acc_type}
    psi_env = {"a1": task.acc_type, "a2": task.acc_type}
    for text in extra_q:
        universes.u_q.add(type_predicate(parse_expression(text), row_env))
    for text in extra_residual:
        universes.u_residual.add(type_predicate(parse_expression(text), acc_env))
    for text in extra_psi:
        universes.u_psi.add(type_predicate(parse_expression(text), psi_env))
    session = start_session(SolverConfig(timeout_ms=timeout_ms))
    return TaskContext(task, universes, session)


@pytest.fixture(scope="session")
def taskbank():
    cache = {}

    def get(name: str):
        if name not in cache:
            cache[name] = make_context(fixture_source(name), name)
        return cache[name]

    yield get
    for ctx in cache.values():
        ctx.session.close()


def atom_index(universe, text: str) -> int:
    from pushdown_synth.pretty import fmt_expr

    for atom in universe:
        if fmt_expr(atom.expr) == text or fmt_expr(atom.display) == text:
            return atom.index
    raise KeyError(
        f"{text!r} not among " + ", ".join(fmt_expr(a.expr) for a in universe)
    )
