import re

from app.core.exceptions import ParseError, PemRiskError
from app.services.stl.formula import (
    Always,
    And,
    Eventually,
    Formula,
    Interval,
    Not,
    Or,
    Pred,
    Predicate,
    TrueF,
    Until,
)

_TOKEN = re.compile(r"\s*(\(|\)|[^\s()]+)")

_ARITY = {"not": 1, "and": 2, "or": 2}
_TEMPORAL = {"always": 1, "eventually": 1, "until": 2}


def _tokenize(text: str) -> list[str]:
    tokens: list[str] = []
    pos = 0
    stripped = text.rstrip()
    while pos < len(stripped):
        match = _TOKEN.match(stripped, pos)
        if match is None:
            raise ParseError(f"unexpected character at offset {pos}")
        tokens.append(match.group(1))
        pos = match.end()
    return tokens


class _Parser:
    def __init__(self, tokens: list[str]):
        self.tokens = tokens
        self.pos = 0

    def _next(self) -> str:
        if self.pos >= len(self.tokens):
            raise ParseError("unexpected end of formula")
        token = self.tokens[self.pos]
        self.pos += 1
        return token

    def _expect(self, token: str) -> None:
        found = self._next()
        if found != token:
            raise ParseError(f"expected '{token}', found '{found}'")

    def _number(self, kind: type[int] | type[float]) -> int | float:
        token = self._next()
        try:
            return kind(token)
        except ValueError as exc:
            raise ParseError(f"expected {kind.__name__}, found '{token}'") from exc

    def formula(self) -> Formula:
        self._expect("(")
        op = self._next().lower()
        node: Formula
        if op == "true":
            node = TrueF()
        elif op in ("geq", "leq"):
            channel = self._next()
            bound = float(self._number(float))
            scale = None
            if self.tokens[self.pos : self.pos + 1] != [")"]:
                scale = float(self._number(float))
            node = Pred(Predicate(channel, bound, op, scale))  # type: ignore[arg-type]
        elif op in _ARITY:
            args = [self.formula() for _ in range(_ARITY[op])]
            node = Not(args[0]) if op == "not" else (And if op == "and" else Or)(*args)
        elif op in _TEMPORAL:
            interval = Interval(int(self._number(int)), int(self._number(int)))
            args = [self.formula() for _ in range(_TEMPORAL[op])]
            if op == "always":
                node = Always(interval, args[0])
            elif op == "eventually":
                node = Eventually(interval, args[0])
            else:
                node = Until(interval, args[0], args[1])
        else:
            raise ParseError(f"unknown operator '{op}'")
        self._expect(")")
        return node


def parse_formula(text: str) -> Formula:
    """Parse prefix notation such as ``(always 0 99 (geq dist_m 2.0))``."""
    tokens = _tokenize(text)
    if not tokens:
        raise ParseError("empty formula")
    parser = _Parser(tokens)
    try:
        formula = parser.formula()
    except ParseError:
        raise
    except PemRiskError as exc:
        raise ParseError(exc.detail) from exc
    if parser.pos != len(tokens):
        rest = " ".join(tokens[parser.pos :])
        raise ParseError(f"trailing input after formula: '{rest}'")
    return formula


def format_formula(formula: Formula) -> str:
    if isinstance(formula, TrueF):
        return "(true)"
    if isinstance(formula, Pred):
        p = formula.predicate
        scale = "" if p.scale is None else f" {p.scale!r}"
        return f"({p.direction} {p.channel} {p.bound!r}{scale})"
    if isinstance(formula, Not):
        return f"(not {format_formula(formula.operand)})"
    if isinstance(formula, And | Or):
        op = "and" if isinstance(formula, And) else "or"
        return f"({op} {format_formula(formula.left)} {format_formula(formula.right)})"
    if isinstance(formula, Always | Eventually):
        op = "always" if isinstance(formula, Always) else "eventually"
        iv = formula.interval
        return f"({op} {iv.lo} {iv.hi} {format_formula(formula.operand)})"
    if isinstance(formula, Until):
        iv = formula.interval
        return (
            f"(until {iv.lo} {iv.hi} "
            f"{format_formula(formula.left)} {format_formula(formula.right)})"
        )
    raise ParseError(f"cannot format {type(formula).__name__}")
