"""
Expression core
---------------

A small symbolic expression language: parsing, printing, differentiation,
substitution, evaluation, randomized zero-testing and (extended) Poisson
brackets.

Grammar::

    expr   := term (('+'|'-') term)*
    term   := unary (('*'|'/') unary)*
    unary  := '-' unary | power
    power  := atom ('^' unary)?
    atom   := NUMBER | IDENT | IDENT '(' expr (',' expr)* ')' | '(' expr ')'

``^`` is right-associative and unary minus binds looser than ``^``, so
``-x^2`` is ``-(x^2)`` and ``2^3^2`` is ``2^(3^2)``.

Expressions are immutable trees and compare structurally.  Zero-testing is
numeric: an expression is declared zero when it vanishes (relative to the
magnitude of its additive terms) at seeded random sample points.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, NamedTuple, Sequence, Union

import numpy as np

__all__ = [
    "Expr", "Number", "Symbol", "Add", "Sub", "Mul", "Div", "Neg", "Pow", "Call",
    "Definition", "Interval", "ZeroTest",
    "ExprError", "ParseError", "DifferentiationError", "CyclicDefinitionError",
    "SubstitutionError", "EvaluationError", "MissingBindingError",
    "DivisionByZeroError", "DomainError",
    "BUILTINS", "parse", "to_string", "differentiate", "substitute", "evaluate",
    "lambdify", "free_symbols", "function_names", "is_zero", "poisson_bracket",
    "is_identifier", "fold",
]

BUILTINS = ("sin", "cos", "exp", "sqrt")

Bindings = Mapping[str, float]
ConjugatePairs = Sequence[tuple[str, str]]

_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")


def is_identifier(name: str) -> bool:
    return isinstance(name, str) and _IDENT.match(name) is not None


# ---------------------------------------------------------------------------
# errors

class ExprError(Exception):
    pass


class ParseError(ExprError):
    """Syntax error; ``column`` is 1-based."""

    def __init__(self, message: str, column: int, text: str = ""):
        self.column = column
        self.text = text
        super().__init__(f"{message} at column {column}")


class DifferentiationError(ExprError):
    pass


class SubstitutionError(ExprError):
    pass


class CyclicDefinitionError(SubstitutionError):
    pass


class EvaluationError(ExprError):
    pass


class MissingBindingError(EvaluationError, KeyError):
    def __init__(self, symbol: str):
        self.symbol = symbol
        super().__init__(f"no binding for symbol '{symbol}'")

    def __str__(self) -> str:
        return self.args[0]


class DivisionByZeroError(EvaluationError, ZeroDivisionError):
    pass


class DomainError(EvaluationError, ValueError):
    pass


# ---------------------------------------------------------------------------
# nodes

class Expr:
    """Base class of all expression nodes."""

    __slots__ = ()
    precedence = 5

    def __str__(self) -> str:
        return to_string(self)


@dataclass(frozen=True, repr=False)
class Number(Expr):
    value: float

    def __post_init__(self):
        object.__setattr__(self, "value", float(self.value))

    @property
    def precedence(self) -> int:
        return 3 if self.value < 0 or str(self.value).startswith("-") else 5

    def __repr__(self) -> str:
        return f"Number({self.value!r})"


@dataclass(frozen=True, repr=False)
class Symbol(Expr):
    name: str

    def __repr__(self) -> str:
        return f"Symbol({self.name!r})"


@dataclass(frozen=True, repr=False)
class Neg(Expr):
    arg: Expr
    precedence = 3

    def __repr__(self) -> str:
        return f"Neg({self.arg!r})"


@dataclass(frozen=True, repr=False)
class _Binary(Expr):
    left: Expr
    right: Expr
    op = "?"

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.left!r}, {self.right!r})"


class Add(_Binary):
    op = "+"
    precedence = 1


class Sub(_Binary):
    op = "-"
    precedence = 1


class Mul(_Binary):
    op = "*"
    precedence = 2


class Div(_Binary):
    op = "/"
    precedence = 2


class Pow(_Binary):
    op = "^"
    precedence = 4


@dataclass(frozen=True, repr=False)
class Call(Expr):
    name: str
    args: tuple[Expr, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "args", tuple(self.args))

    def __repr__(self) -> str:
        return f"Call({self.name!r}, {list(self.args)!r})"


ZERO = Number(0.0)
ONE = Number(1.0)


class Definition(NamedTuple):
    """User definition; ``params`` are formal argument names (may be empty)."""

    params: tuple[str, ...]
    body: Expr


# ---------------------------------------------------------------------------
# parsing

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op>[-+*/^(),]))"
)


class _Token(NamedTuple):
    kind: str
    text: str
    column: int


def _tokenize(text: str) -> list[_Token]:
    tokens = []
    pos = 0
    n = len(text)
    while pos < n:
        if text[pos].isspace():
            pos += 1
            continue
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            raise ParseError(f"unknown character {text[pos]!r}", pos + 1, text)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append(_Token(kind, m.group(kind), start + 1))
        pos = m.end()
    tokens.append(_Token("end", "", n + 1))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self) -> _Token:
        return self.tokens[self.i]

    def take(self) -> _Token:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, text: str) -> _Token:
        tok = self.peek()
        if tok.text != text or tok.kind != "op":
            found = "end of input" if tok.kind == "end" else repr(tok.text)
            raise ParseError(f"expected {text!r}, found {found}", tok.column, self.text)
        return self.take()

    def parse(self) -> Expr:
        e = self.expr()
        tok = self.peek()
        if tok.kind != "end":
            raise ParseError(f"unexpected {tok.text!r}", tok.column, self.text)
        return e

    def expr(self) -> Expr:
        e = self.term()
        while self.peek().kind == "op" and self.peek().text in "+-":
            op = self.take().text
            rhs = self.term()
            e = Add(e, rhs) if op == "+" else Sub(e, rhs)
        return e

    def term(self) -> Expr:
        e = self.unary()
        while self.peek().kind == "op" and self.peek().text in "*/":
            op = self.take().text
            rhs = self.unary()
            e = Mul(e, rhs) if op == "*" else Div(e, rhs)
        return e

    def unary(self) -> Expr:
        if self.peek().kind == "op" and self.peek().text == "-":
            self.take()
            return Neg(self.unary())
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.peek().kind == "op" and self.peek().text == "^":
            self.take()
            return Pow(base, self.unary())
        return base

    def atom(self) -> Expr:
        tok = self.take()
        if tok.kind == "num":
            return Number(float(tok.text))
        if tok.kind == "ident":
            if self.peek().kind == "op" and self.peek().text == "(":
                self.take()
                args = [self.expr()]
                while self.peek().kind == "op" and self.peek().text == ",":
                    self.take()
                    args.append(self.expr())
                self.expect(")")
                return Call(tok.text, tuple(args))
            return Symbol(tok.text)
        if tok.kind == "op" and tok.text == "(":
            e = self.expr()
            self.expect(")")
            return e
        found = "end of input" if tok.kind == "end" else repr(tok.text)
        raise ParseError(f"unexpected {found}", tok.column, self.text)


def parse(text: str) -> Expr:
    """Parse ``text`` into an expression tree.

    >>> parse("-x^2")
    Neg(Pow(Symbol('x'), Number(2.0)))
    """
    if not isinstance(text, str):
        raise TypeError(f"expected str, got {type(text).__name__}")
    return _Parser(text).parse()


# ---------------------------------------------------------------------------
# printing

def _format_number(v: float) -> str:
    if not math.isfinite(v):
        raise ValueError(f"cannot print non-finite number {v!r}")
    if v.is_integer() and abs(v) < 1e15:
        return str(int(v))
    return repr(v)


def _wrap(e: Expr, min_prec: int) -> str:
    s = to_string(e)
    return f"({s})" if e.precedence < min_prec else s


def to_string(e: Expr) -> str:
    """Print ``e`` so that :func:`parse` rebuilds the same tree."""
    if isinstance(e, Number):
        return _format_number(e.value)
    if isinstance(e, Symbol):
        return e.name
    if isinstance(e, Neg):
        return "-" + _wrap(e.arg, 3)
    if isinstance(e, Pow):
        # base must be an atom; the exponent may be any unary
        return f"{_wrap(e.left, 5)}^{_wrap(e.right, 3)}"
    if isinstance(e, _Binary):
        p = e.precedence
        return f"{_wrap(e.left, p)}{e.op}{_wrap(e.right, p + 1)}"
    if isinstance(e, Call):
        return f"{e.name}({','.join(to_string(a) for a in e.args)})"
    raise TypeError(f"not an expression: {e!r}")


# ---------------------------------------------------------------------------
# structure queries

def free_symbols(e: Expr) -> frozenset[str]:
    out: set[str] = set()
    stack = [e]
    while stack:
        node = stack.pop()
        if isinstance(node, Symbol):
            out.add(node.name)
        elif isinstance(node, Neg):
            stack.append(node.arg)
        elif isinstance(node, _Binary):
            stack.extend((node.left, node.right))
        elif isinstance(node, Call):
            stack.extend(node.args)
    return frozenset(out)


def function_names(e: Expr) -> frozenset[str]:
    out: set[str] = set()
    stack = [e]
    while stack:
        node = stack.pop()
        if isinstance(node, Neg):
            stack.append(node.arg)
        elif isinstance(node, _Binary):
            stack.extend((node.left, node.right))
        elif isinstance(node, Call):
            out.add(node.name)
            stack.extend(node.args)
    return frozenset(out)


def _depends(e: Expr, var: str) -> bool:
    return var in free_symbols(e)


# ---------------------------------------------------------------------------
# folding constructors (literal folding plus identity elements)

def _num(e: Expr) -> float | None:
    return e.value if isinstance(e, Number) else None


def _add(a: Expr, b: Expr) -> Expr:
    va, vb = _num(a), _num(b)
    if va is not None and vb is not None:
        return Number(va + vb)
    if va == 0.0:
        return b
    if vb == 0.0:
        return a
    if isinstance(b, Neg):
        return Sub(a, b.arg)
    return Add(a, b)


def _sub(a: Expr, b: Expr) -> Expr:
    va, vb = _num(a), _num(b)
    if va is not None and vb is not None:
        return Number(va - vb)
    if vb == 0.0:
        return a
    if va == 0.0:
        return _neg(b)
    return Sub(a, b)


def _mul(a: Expr, b: Expr) -> Expr:
    va, vb = _num(a), _num(b)
    if va is not None and vb is not None:
        return Number(va * vb)
    if va == 0.0 or vb == 0.0:
        return ZERO
    if va == 1.0:
        return b
    if vb == 1.0:
        return a
    if va == -1.0:
        return _neg(b)
    if vb == -1.0:
        return _neg(a)
    return Mul(a, b)


def _div(a: Expr, b: Expr) -> Expr:
    va, vb = _num(a), _num(b)
    if va is not None and vb is not None and vb != 0.0:
        return Number(va / vb)
    if va == 0.0:
        return ZERO
    if vb == 1.0:
        return a
    return Div(a, b)


def _neg(a: Expr) -> Expr:
    if isinstance(a, Number):
        return Number(-a.value)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def _pow(a: Expr, b: Expr) -> Expr:
    vb = _num(b)
    if vb == 1.0:
        return a
    if vb == 0.0:
        return ONE
    va = _num(a)
    if va is not None and vb is not None:
        try:
            return Number(math.pow(va, vb))
        except (ValueError, OverflowError, ZeroDivisionError):
            pass
    return Pow(a, b)


_FOLD = {Add: _add, Sub: _sub, Mul: _mul, Div: _div, Pow: _pow}


def fold(e: Expr) -> Expr:
    """Rebuild ``e`` bottom-up through the folding constructors: literal
    subtrees are evaluated and identity elements dropped."""
    if isinstance(e, Neg):
        return _neg(fold(e.arg))
    if isinstance(e, _Binary):
        return _FOLD[type(e)](fold(e.left), fold(e.right))
    if isinstance(e, Call):
        args = tuple(fold(a) for a in e.args)
        if e.name in BUILTINS and len(args) == 1 and isinstance(args[0], Number):
            try:
                return Number(_call_builtin(e.name, args[0].value))
            except EvaluationError:
                pass
        return Call(e.name, args)
    return e


# ---------------------------------------------------------------------------
# differentiation

def differentiate(e: Expr, var: str) -> Expr:
    """Partial derivative of ``e`` with respect to the symbol ``var``."""
    if isinstance(e, Number):
        return ZERO
    if isinstance(e, Symbol):
        return ONE if e.name == var else ZERO
    if isinstance(e, Neg):
        return _neg(differentiate(e.arg, var))
    if isinstance(e, Add):
        return _add(differentiate(e.left, var), differentiate(e.right, var))
    if isinstance(e, Sub):
        return _sub(differentiate(e.left, var), differentiate(e.right, var))
    if isinstance(e, Mul):
        return _add(_mul(differentiate(e.left, var), e.right),
                    _mul(e.left, differentiate(e.right, var)))
    if isinstance(e, Div):
        dr = differentiate(e.right, var)
        if isinstance(dr, Number) and dr.value == 0.0:
            # denominator independent of var: (f/g)' = f'/g
            return _div(differentiate(e.left, var), e.right)
        num = _sub(_mul(differentiate(e.left, var), e.right),
                   _mul(e.left, differentiate(e.right, var)))
        if isinstance(num, Number) and num.value == 0.0:
            return ZERO
        return _div(num, _pow(e.right, Number(2.0)))
    if isinstance(e, Pow):
        base, expo = e.left, e.right
        if not _depends(expo, var):
            db = differentiate(base, var)
            if isinstance(db, Number) and db.value == 0.0:
                return ZERO
            return _mul(_mul(expo, _pow(base, _sub(expo, ONE))), db)
        if not _depends(base, var):
            if isinstance(base, Number) and base.value > 0.0:
                return _mul(_mul(e, Number(math.log(base.value))), differentiate(expo, var))
            raise DifferentiationError(
                f"cannot differentiate {to_string(e)!r}: variable exponent needs a positive literal base")
        raise DifferentiationError(
            f"cannot differentiate {to_string(e)!r}: both base and exponent depend on {var!r}")
    if isinstance(e, Call):
        if e.name not in BUILTINS:
            raise DifferentiationError(f"function {e.name!r} is not differentiable; substitute it first")
        if len(e.args) != 1:
            raise DifferentiationError(f"{e.name} takes exactly one argument")
        u = e.args[0]
        du = differentiate(u, var)
        if isinstance(du, Number) and du.value == 0.0:
            return ZERO
        if e.name == "sin":
            outer = Call("cos", (u,))
        elif e.name == "cos":
            outer = Neg(Call("sin", (u,)))
        elif e.name == "exp":
            outer = e
        else:
            outer = Div(ONE, Mul(Number(2.0), e))
        return _mul(outer, du)
    raise TypeError(f"not an expression: {e!r}")


# ---------------------------------------------------------------------------
# substitution

_MAX_EXPANSION_DEPTH = 64


def _rebuild(e: Expr, fn: Callable[[Expr], Expr | None]) -> Expr:
    """Bottom-up rewrite; ``fn`` returns a replacement or None."""
    if isinstance(e, Neg):
        e = Neg(_rebuild(e.arg, fn))
    elif isinstance(e, _Binary):
        e = type(e)(_rebuild(e.left, fn), _rebuild(e.right, fn))
    elif isinstance(e, Call):
        e = Call(e.name, tuple(_rebuild(a, fn) for a in e.args))
    r = fn(e)
    return e if r is None else r


def _as_definition(d) -> Definition:
    if isinstance(d, Definition):
        return d
    if isinstance(d, Expr):
        return Definition((), d)
    if isinstance(d, (int, float)):
        return Definition((), Number(d))
    if isinstance(d, str):
        return Definition((), parse(d))
    raise TypeError(f"cannot use {d!r} as a definition")


def _expand_once(e: Expr, defs: Mapping[str, Definition]) -> Expr:
    def fn(node: Expr) -> Expr | None:
        if isinstance(node, Symbol) and node.name in defs:
            d = defs[node.name]
            if d.params:
                raise SubstitutionError(f"{node.name!r} expects {len(d.params)} argument(s)")
            return d.body
        if isinstance(node, Call) and node.name in defs:
            d = defs[node.name]
            if not d.params:
                return d.body
            if len(d.params) != len(node.args):
                raise SubstitutionError(
                    f"{node.name!r} expects {len(d.params)} argument(s), got {len(node.args)}")
            actual = dict(zip(d.params, node.args))
            return _rebuild(d.body, lambda n: actual.get(n.name) if isinstance(n, Symbol) else None)
        return None

    return _rebuild(e, fn)


def substitute(e: Expr, defs: Mapping[str, object]) -> Expr:
    """Expand every symbol or call named in ``defs`` until none remain.

    Values of ``defs`` may be :class:`Definition`, :class:`Expr`, numbers or
    expression strings.  A call to a definition without formal parameters is
    replaced by the body; with formal parameters the arguments are bound.
    """
    table = {k: _as_definition(v) for k, v in defs.items()}
    names = set(table)
    for _ in range(_MAX_EXPANSION_DEPTH):
        if not (free_symbols(e) | function_names(e)) & names:
            return e
        e = _expand_once(e, table)
    pending = sorted((free_symbols(e) | function_names(e)) & names)
    raise CyclicDefinitionError(f"cyclic definition involving {', '.join(pending)}")


# ---------------------------------------------------------------------------
# evaluation

def _call_builtin(name: str, x: float) -> float:
    if name == "sin":
        return math.sin(x)
    if name == "cos":
        return math.cos(x)
    if name == "exp":
        try:
            return math.exp(x)
        except OverflowError as exc:
            raise DomainError(f"exp overflow at {x!r}") from exc
    if x < 0.0:
        raise DomainError(f"sqrt of negative value {x!r}")
    return math.sqrt(x)


def evaluate(e: Expr, b: Bindings) -> float:
    """Evaluate ``e`` in double precision with symbol values from ``b``."""
    if isinstance(e, Number):
        return e.value
    if isinstance(e, Symbol):
        try:
            return float(b[e.name])
        except KeyError:
            raise MissingBindingError(e.name) from None
    if isinstance(e, Neg):
        return -evaluate(e.arg, b)
    if isinstance(e, Add):
        return evaluate(e.left, b) + evaluate(e.right, b)
    if isinstance(e, Sub):
        return evaluate(e.left, b) - evaluate(e.right, b)
    if isinstance(e, Mul):
        return evaluate(e.left, b) * evaluate(e.right, b)
    if isinstance(e, Div):
        num, den = evaluate(e.left, b), evaluate(e.right, b)
        if den == 0.0:
            raise DivisionByZeroError(f"division by zero in {to_string(e)!r}")
        return num / den
    if isinstance(e, Pow):
        base, expo = evaluate(e.left, b), evaluate(e.right, b)
        try:
            return math.pow(base, expo)
        except ZeroDivisionError as exc:
            raise DivisionByZeroError(f"zero to a negative power in {to_string(e)!r}") from exc
        except (ValueError, OverflowError) as exc:
            if base == 0.0 and expo < 0:
                raise DivisionByZeroError(f"zero to a negative power in {to_string(e)!r}") from exc
            raise DomainError(f"invalid power {base!r}^{expo!r}") from exc
    if isinstance(e, Call):
        if e.name not in BUILTINS:
            raise EvaluationError(f"undefined function {e.name!r}")
        if len(e.args) != 1:
            raise EvaluationError(f"{e.name} takes exactly one argument")
        return _call_builtin(e.name, evaluate(e.args[0], b))
    raise TypeError(f"not an expression: {e!r}")


def _pysource(e: Expr, names: Mapping[str, str]) -> str:
    if isinstance(e, Number):
        return repr(e.value)
    if isinstance(e, Symbol):
        try:
            return names[e.name]
        except KeyError:
            raise MissingBindingError(e.name) from None
    if isinstance(e, Neg):
        return f"(-{_pysource(e.arg, names)})"
    if isinstance(e, Pow):
        return f"_pow({_pysource(e.left, names)}, {_pysource(e.right, names)})"
    if isinstance(e, _Binary):
        return f"({_pysource(e.left, names)} {e.op} {_pysource(e.right, names)})"
    if isinstance(e, Call):
        if e.name not in BUILTINS or len(e.args) != 1:
            raise EvaluationError(f"cannot compile call to {e.name!r}")
        return f"_{e.name}({_pysource(e.args[0], names)})"
    raise TypeError(f"not an expression: {e!r}")


def lambdify(exprs: Sequence[Expr], argnames: Sequence[str]) -> Callable[..., tuple[float, ...]]:
    """Compile ``exprs`` into ``f(*values) -> tuple`` over positional ``argnames``.

    Used on hot paths (integrators).  Division by zero raises
    ``ZeroDivisionError``; invalid ``sqrt``/power raises ``ValueError``.
    """
    names = {n: f"_a{i}" for i, n in enumerate(argnames)}
    body = ", ".join(_pysource(e, names) for e in exprs)
    src = f"def _f({', '.join(names.values())}):\n    return ({body}{',' if len(exprs) == 1 else ''})\n"
    env = {"_pow": math.pow, "_sin": math.sin, "_cos": math.cos,
           "_exp": math.exp, "_sqrt": math.sqrt}
    exec(compile(src, "<hjflow.lambdify>", "exec"), env)
    return env["_f"]


# ---------------------------------------------------------------------------
# zero testing

class Interval(NamedTuple):
    """Sampling interval ``[lo, hi]`` minus the band ``|x| < exclude_abs_below``."""

    lo: float
    hi: float
    exclude_abs_below: float = 0.0

    def sample(self, rng: np.random.Generator, max_tries: int = 10_000) -> float:
        for _ in range(max_tries):
            x = float(rng.uniform(self.lo, self.hi))
            if abs(x) >= self.exclude_abs_below:
                return x
        raise ValueError(f"interval {self} has no admissible points")


@dataclass(frozen=True)
class ZeroTest:
    verdict: bool
    witness: dict[str, float] | None
    max_ratio: float
    samples: int

    def __bool__(self) -> bool:
        return self.verdict


def _additive_terms(e: Expr) -> list[Expr]:
    terms, stack = [], [e]
    while stack:
        node = stack.pop()
        if isinstance(node, (Add, Sub)):
            stack.extend((node.left, node.right))
        elif isinstance(node, Neg):
            stack.append(node.arg)
        else:
            terms.append(node)
    return terms


def is_zero(
    e: Expr,
    domain: Mapping[str, Interval | tuple],
    samples: int = 20,
    seed: int = 0,
    tol: float = 1e-9,
    dependent: Mapping[str, Expr] | None = None,
) -> ZeroTest:
    """Decide numerically whether ``e`` vanishes identically on ``domain``.

    Each free symbol is drawn from its interval; symbols in ``dependent`` are
    instead computed from the drawn ones (e.g. to sample on a constraint
    surface).  A point passes when ``|e| < tol * (1 + scale)``, where
    ``scale`` is the largest absolute value among the top-level additive
    terms of ``e``.  The first failing point is returned as the witness.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    dependent = dict(dependent or {})
    dom = {k: v if isinstance(v, Interval) else Interval(*v) for k, v in domain.items()}
    needed = set(free_symbols(e))
    for d in dependent.values():
        needed |= free_symbols(d)
    needed -= set(dependent)
    missing = sorted(needed - set(dom))
    if missing:
        raise ValueError(f"no sampling interval for {', '.join(missing)}")
    order = sorted(needed)
    terms = _additive_terms(e)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(samples):
        point = {name: dom[name].sample(rng) for name in order}
        try:
            for name, d in dependent.items():
                point[name] = evaluate(d, point)
            value = evaluate(e, point)
            scale = max(abs(evaluate(t, point)) for t in terms)
        except EvaluationError as exc:
            raise EvaluationError(f"{exc} at sample point {point}") from exc
        ratio = abs(value) / (1.0 + scale)
        worst = max(worst, ratio)
        if not ratio < tol:
            return ZeroTest(False, point, worst, samples)
    return ZeroTest(True, None, worst, samples)


# ---------------------------------------------------------------------------
# brackets

def poisson_bracket(F: Expr, G: Expr, pairs: ConjugatePairs) -> Expr:
    """Sum over ``(q, p)`` pairs of ``dF/dq dG/dp - dF/dp dG/dq``."""
    seen: set[str] = set()
    for q, p in pairs:
        for s in (q, p):
            if not is_identifier(s):
                raise ValueError(f"invalid symbol {s!r} in conjugate pairs")
            if s in seen:
                raise ValueError(f"symbol {s!r} appears twice in conjugate pairs")
            seen.add(s)
    out: Expr = ZERO
    for q, p in pairs:
        term = _sub(_mul(differentiate(F, q), differentiate(G, p)),
                    _mul(differentiate(F, p), differentiate(G, q)))
        out = _add(out, term)
    return out


ExprLike = Union[Expr, str]


def as_expr(e: ExprLike) -> Expr:
    return parse(e) if isinstance(e, str) else e
