"""Recursive-descent parser producing the DSL AST."""

from __future__ import annotations

from .lexer import DslSyntaxError, Token, tokenize
from .syntax import (
    BOOL, FLOAT, INT, STR,
    BinOp, Case, Cond, Expr, Filter, Fold, Index, Insert, Lambda, ListExpr,
    Lit, Match, Name, Not, Program, SliceFrom, Stmt, TList, TOpt, TTuple,
    TupleExpr, TypeTuple,
)

TYPE_KEYWORDS = {"bool", "int", "float", "str", "List", "Optional"}


class _Parser:
    def __init__(self, tokens):
        self.tokens = tokens
        self.pos = 0

    def peek(self, ahead=0) -> Token:
        return self.tokens[min(self.pos + ahead, len(self.tokens) - 1)]

    def advance(self) -> Token:
        tok = self.tokens[self.pos]
        if tok.kind != "EOF":
            self.pos += 1
        return tok

    def expect(self, kind) -> Token:
        tok = self.peek()
        if tok.kind != kind:
            raise DslSyntaxError(
                f"unexpected token {tok.text or 'EOF'!r}", tok.span, {kind}
            )
        return self.advance()

    # -- program ------------------------------------------------------------

    def parse_program(self, source="") -> Program:
        stmts = []
        if self.peek().kind == "EOF":
            raise DslSyntaxError(
                "empty program", self.peek().span, {"IDENT"}
            )
        while self.peek().kind != "EOF":
            stmts.append(self.parse_stmt())
        return Program(stmts, source=source)

    def parse_stmt(self) -> Stmt:
        name_tok = self.expect("IDENT")
        annot = None
        if self.peek().kind == ":":
            self.advance()
            self.expect("(")
            annot = TTuple(tuple(self.parse_types()))
            self.expect(")")
        self.expect("=")
        expr = self.parse_expr()
        return Stmt(name_tok.text, expr, annot=annot, span=name_tok.span)

    # -- types --------------------------------------------------------------

    def parse_types(self):
        types = [self.parse_type()]
        while self.peek().kind == ",":
            self.advance()
            if self.peek().kind == ")":
                break
            types.append(self.parse_type())
        return types

    def parse_type(self):
        tok = self.peek()
        if tok.kind == "bool":
            self.advance()
            return BOOL
        if tok.kind == "int":
            self.advance()
            return INT
        if tok.kind == "float":
            self.advance()
            return FLOAT
        if tok.kind == "str":
            self.advance()
            return STR
        if tok.kind == "List":
            self.advance()
            self.expect("[")
            elem = self.parse_type()
            self.expect("]")
            return TList(elem)
        if tok.kind == "Optional":
            self.advance()
            self.expect("[")
            elem = self.parse_type()
            self.expect("]")
            return TOpt(elem)
        raise DslSyntaxError(
            f"unexpected token {tok.text!r} in type", tok.span, TYPE_KEYWORDS
        )

    # -- expressions ----------------------------------------------------------
    # precedence: conditional < or < and < not < comparison < +- < */ < postfix

    def parse_expr(self) -> Expr:
        if self.peek().kind == "match":
            return self.parse_match()
        expr = self.parse_or()
        if self.peek().kind == "if":
            span = self.advance().span
            test = self.parse_or()
            self.expect("else")
            other = self.parse_expr()
            return Cond(span=span, then=expr, test=test, other=other)
        return expr

    def parse_match(self) -> Match:
        span = self.expect("match").span
        scrutinee = self.parse_or()
        self.expect(":")
        cases = []
        while self.peek().kind == "case":
            case_span = self.advance().span
            pat_tok = self.peek()
            if pat_tok.kind == "None":
                self.advance()
                pattern = None
            elif pat_tok.kind == "IDENT":
                self.advance()
                pattern = pat_tok.text
            else:
                raise DslSyntaxError(
                    f"unsupported match pattern {pat_tok.text!r}",
                    pat_tok.span,
                    {"None", "IDENT"},
                )
            self.expect(":")
            body = self.parse_expr()
            cases.append(Case(pattern=pattern, body=body, span=case_span))
        if not cases:
            tok = self.peek()
            raise DslSyntaxError("match requires at least one case", tok.span, {"case"})
        return Match(span=span, scrutinee=scrutinee, cases=cases)

    def parse_or(self) -> Expr:
        left = self.parse_and()
        while self.peek().kind == "or":
            span = self.advance().span
            right = self.parse_and()
            left = BinOp(span=span, op="or", left=left, right=right)
        return left

    def parse_and(self) -> Expr:
        left = self.parse_not()
        while self.peek().kind == "and":
            span = self.advance().span
            right = self.parse_not()
            left = BinOp(span=span, op="and", left=left, right=right)
        return left

    def parse_not(self) -> Expr:
        if self.peek().kind == "not":
            span = self.advance().span
            return Not(span=span, operand=self.parse_not())
        return self.parse_comparison()

    def parse_comparison(self) -> Expr:
        left = self.parse_additive()
        if self.peek().kind in ("==", ">=", ">", "<=", "<"):
            op = self.advance()
            right = self.parse_additive()
            return BinOp(span=op.span, op=op.kind, left=left, right=right)
        return left

    def parse_additive(self) -> Expr:
        left = self.parse_multiplicative()
        while self.peek().kind in ("+", "-"):
            op = self.advance()
            right = self.parse_multiplicative()
            left = BinOp(span=op.span, op=op.kind, left=left, right=right)
        return left

    def parse_multiplicative(self) -> Expr:
        left = self.parse_postfix()
        while self.peek().kind in ("*", "/"):
            op = self.advance()
            right = self.parse_postfix()
            left = BinOp(span=op.span, op=op.kind, left=left, right=right)
        return left

    def parse_postfix(self) -> Expr:
        expr = self.parse_atom()
        while self.peek().kind == "[":
            span = self.advance().span
            idx_tok = self.expect("INT")
            if self.peek().kind == ":":
                self.advance()
                self.expect("]")
                expr = SliceFrom(span=span, base=expr, start=idx_tok.value)
            else:
                self.expect("]")
                expr = Index(span=span, base=expr, index=idx_tok.value)
        return expr

    def parse_lambda(self) -> Lambda:
        tok = self.peek()
        if tok.kind not in ("lambda", "fix"):
            raise DslSyntaxError(
                f"expected lambda, got {tok.text!r}", tok.span, {"lambda", "fix"}
            )
        self.advance()
        params = []
        if self.peek().kind == "IDENT":
            params.append(self.advance().text)
            while self.peek().kind == ",":
                self.advance()
                params.append(self.expect("IDENT").text)
        self.expect(":")
        body = self.parse_expr()
        return Lambda(span=tok.span, params=params, body=body, is_fix=tok.kind == "fix")

    def parse_atom(self) -> Expr:
        tok = self.peek()
        if tok.kind == "INT":
            self.advance()
            return Lit(span=tok.span, kind="int", value=tok.value)
        if tok.kind == "FLOAT":
            self.advance()
            return Lit(span=tok.span, kind="float", value=tok.value)
        if tok.kind == "NEGINF":
            self.advance()
            return Lit(span=tok.span, kind="neginf", value=None)
        if tok.kind == "STRING":
            self.advance()
            return Lit(span=tok.span, kind="str", value=tok.value)
        if tok.kind in ("True", "False"):
            self.advance()
            return Lit(span=tok.span, kind="bool", value=tok.kind == "True")
        if tok.kind == "None":
            self.advance()
            return Lit(span=tok.span, kind="none", value=None)
        if tok.kind == "IDENT":
            self.advance()
            return Name(span=tok.span, ident=tok.text)
        if tok.kind == "fold":
            self.advance()
            self.expect("(")
            source = self.parse_expr()
            self.expect(",")
            init = self.parse_expr()
            self.expect(",")
            fn = self.parse_lambda()
            self.expect(")")
            return Fold(span=tok.span, source=source, init=init, fn=fn)
        if tok.kind == "filter":
            self.advance()
            self.expect("(")
            source = self.parse_expr()
            self.expect(",")
            fn = self.parse_lambda()
            self.expect(")")
            return Filter(span=tok.span, source=source, fn=fn)
        if tok.kind == "insert":
            self.advance()
            self.expect("(")
            target = self.parse_expr()
            self.expect(",")
            item = self.parse_expr()
            self.expect(")")
            return Insert(span=tok.span, target=target, item=item)
        if tok.kind == "[":
            self.advance()
            items = []
            if self.peek().kind != "]":
                items.append(self.parse_expr())
                while self.peek().kind == ",":
                    self.advance()
                    if self.peek().kind == "]":
                        break
                    items.append(self.parse_expr())
            self.expect("]")
            return ListExpr(span=tok.span, items=items)
        if tok.kind == "(":
            self.advance()
            if self.peek().kind in TYPE_KEYWORDS:
                types = self.parse_types()
                self.expect(")")
                return TypeTuple(span=tok.span, types=tuple(types))
            if self.peek().kind == ")":
                self.advance()
                return TupleExpr(span=tok.span, items=[])
            first = self.parse_expr()
            if self.peek().kind == ",":
                items = [first]
                while self.peek().kind == ",":
                    self.advance()
                    if self.peek().kind == ")":
                        break
                    items.append(self.parse_expr())
                self.expect(")")
                return TupleExpr(span=tok.span, items=items)
            self.expect(")")
            return first
        raise DslSyntaxError(
            f"unexpected token {tok.text or 'EOF'!r}",
            tok.span,
            {"literal", "IDENT", "(", "[", "fold", "filter", "insert"},
        )


def parse(source: str) -> Program:
    parser = _Parser(tokenize(source))
    return parser.parse_program(source)


def parse_expression(source: str) -> Expr:
    """Parse a single expression (used for atoms supplied to `verify`)."""
    parser = _Parser(tokenize(source))
    expr = parser.parse_expr()
    tok = parser.peek()
    if tok.kind != "EOF":
        raise DslSyntaxError(f"trailing input {tok.text!r}", tok.span)
    return expr
