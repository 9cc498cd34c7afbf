"""A small expression language with exact symbolic differentiation.

Grammar (whitespace is insignificant; ``^`` is right-associative)::

    expr     = term , { ("+" | "-") , term } ;
    term     = unary , { ("*" | "/") , unary } ;
    unary    = ("-" | "+") , unary | power ;
    power    = atom , [ "^" , unary ] ;
    atom     = number | variable | parameter | "e"
             | function , "(" , expr , ")" | "(" , expr , ")" ;
    variable = "x" , digit , { digit } ;        (* x1 .. xn *)
    parameter = ( letter | "_" ) , { letter | digit | "_" } ;  (* declared names only *)
    function = "sin" | "cos" | "exp" | "ln" | "sqrt" | "tanh" ;
    number   = ( digit , { digit } , [ "." , { digit } ] | "." , digit , { digit } ) ,
               [ ("e" | "E") , [ "+" | "-" ] , digit , { digit } ] ;

``e^u`` is read as ``exp(u)``; a bare ``e`` is Euler's number unless a
parameter of that name is declared. ``**`` is accepted for ``^`` and the
Unicode minus sign for ``-``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence, Union

import numpy as np

from .core import DGError, EvaluationDomainError, InvalidArgumentError, ScalarField, VectorField

FUNCTIONS = ("sin", "cos", "exp", "ln", "sqrt", "tanh")


class ParseError(DGError, ValueError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{message} (line {line}, column {column})")
        self.line = line
        self.column = column


class UnknownIdentifierError(ParseError):
    pass


class VariableIndexError(ParseError):
    pass


class UnboundParameterError(InvalidArgumentError):
    pass


# --------------------------------------------------------------------------- AST


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Param:
    name: str


@dataclass(frozen=True)
class Var:
    index: int  # 1-based


@dataclass(frozen=True)
class Neg:
    arg: "Expression"


@dataclass(frozen=True)
class Bin:
    op: str
    left: "Expression"
    right: "Expression"


@dataclass(frozen=True)
class Call:
    fn: str
    arg: "Expression"


Expression = Union[Num, Param, Var, Neg, Bin, Call]

ZERO = Num(0.0)
ONE = Num(1.0)


def num(v: float) -> Expression:
    """Literal node; negative values become Neg(Num) so literals stay >= 0."""
    v = float(v)
    if v < 0:
        return Neg(Num(-v))
    return Num(v + 0.0)


def _const(e: Expression) -> float | None:
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Neg) and isinstance(e.arg, Num):
        return -e.arg.value
    return None


# ------------------------------------------------------------------- tokenizer

_TOKEN = re.compile(r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>\*\*|[-+*/^(),−])
""", re.VERBOSE)


@dataclass(frozen=True)
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(source: str) -> list[_Tok]:
    toks = []
    pos, line, line_start = 0, 1, 0
    while pos < len(source):
        m = _TOKEN.match(source, pos)
        if m is None:
            raise ParseError(f"unexpected character {source[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        text = m.group()
        if kind == "ws":
            nl = text.count("\n")
            if nl:
                line += nl
                line_start = pos + text.rfind("\n") + 1
        else:
            if text == "−":
                text = "-"
            elif text == "**":
                text = "^"
            toks.append(_Tok(kind, text, line, pos - line_start + 1))
        pos = m.end()
    toks.append(_Tok("end", "", line, pos - line_start + 1))
    return toks


class _Parser:
    def __init__(self, source: str, n: int, parameter_names: Iterable[str]):
        self.toks = _tokenize(source)
        self.i = 0
        self.n = n
        self.params = frozenset(parameter_names)

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def error(self, msg, tok=None, cls=ParseError):
        tok = tok or self.tok
        raise cls(msg, tok.line, tok.col)

    def accept(self, text) -> bool:
        if self.tok.kind == "op" and self.tok.text == text:
            self.i += 1
            return True
        return False

    def expect(self, text):
        if not self.accept(text):
            found = self.tok.text or "end of input"
            self.error(f"expected {text!r}, found {found!r}")

    def parse(self) -> Expression:
        if self.tok.kind == "end":
            self.error("empty expression")
        e = self.expr()
        if self.tok.kind != "end":
            self.error(f"unexpected {self.tok.text!r}")
        return e

    def expr(self):
        e = self.term()
        while self.tok.kind == "op" and self.tok.text in "+-":
            op = self.tok.text
            self.i += 1
            e = Bin(op, e, self.term())
        return e

    def term(self):
        e = self.unary()
        while self.tok.kind == "op" and self.tok.text in ("*", "/"):
            op = self.tok.text
            self.i += 1
            e = Bin(op, e, self.unary())
        return e

    def unary(self):
        if self.accept("-"):
            return Neg(self.unary())
        if self.accept("+"):
            return self.unary()
        return self.power()

    def power(self):
        tok = self.tok
        base = self.atom()
        if self.accept("^"):
            exponent = self.unary()
            if tok.kind == "ident" and tok.text == "e" and "e" not in self.params \
                    and base == Num(math.e):
                return Call("exp", exponent)
            return Bin("^", base, exponent)
        return base

    def atom(self):
        tok = self.tok
        if tok.kind == "number":
            self.i += 1
            return Num(float(tok.text))
        if tok.kind == "ident":
            self.i += 1
            name = tok.text
            if name in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Call(name, arg)
            if name in self.params:
                return Param(name)
            m = re.fullmatch(r"x(\d+)", name)
            if m:
                k = int(m.group(1))
                if not 1 <= k <= self.n:
                    self.error(f"variable {name} out of range for dimension {self.n}", tok,
                               VariableIndexError)
                return Var(k)
            if name == "e":
                return Num(math.e)
            self.error(f"unknown identifier {name!r}", tok, UnknownIdentifierError)
        if self.accept("("):
            e = self.expr()
            self.expect(")")
            return e
        found = tok.text or "end of input"
        self.error(f"unexpected {found!r}")


def parse(source: str, n: int, parameter_names: Iterable[str] = ()) -> Expression:
    """Parse ``source`` into an AST over variables ``x1..xn``."""
    if not source or not source.strip():
        raise ParseError("empty expression", 1, 1)
    names = list(parameter_names)
    for p in names:
        if p in FUNCTIONS or re.fullmatch(r"x\d+", p) or not re.fullmatch(r"[A-Za-z_]\w*", p):
            raise InvalidArgumentError(f"invalid parameter name {p!r}")
    return _Parser(source, n, names).parse()


# -------------------------------------------------------------------- printing

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "^": 4}
_UNARY = 3


def _prec(e) -> int:
    if isinstance(e, Bin):
        return _PREC[e.op]
    if isinstance(e, Neg):
        return _UNARY
    return 5


def _fmt_num(v: float) -> str:
    if v.is_integer() and abs(v) < 1e15:
        return str(int(v))
    return repr(v)


def to_source(e: Expression) -> str:
    """Render an AST so that ``parse(to_source(e))`` rebuilds it exactly."""
    if isinstance(e, Num):
        return _fmt_num(e.value)
    if isinstance(e, Param):
        return e.name
    if isinstance(e, Var):
        return f"x{e.index}"
    if isinstance(e, Call):
        return f"{e.fn}({to_source(e.arg)})"
    if isinstance(e, Neg):
        inner = to_source(e.arg)
        return f"-({inner})" if _prec(e.arg) < _UNARY else f"-{inner}"
    p = _PREC[e.op]
    left, right = to_source(e.left), to_source(e.right)
    if e.op == "^":
        if _prec(e.left) <= p:
            left = f"({left})"
        if _prec(e.right) < _UNARY:
            right = f"({right})"
    else:
        if _prec(e.left) < p:
            left = f"({left})"
        if _prec(e.right) <= p:
            right = f"({right})"
    return f"{left} {e.op} {right}"


# ------------------------------------------------------------------ evaluation


def _apply(fn: str, a: float) -> float:
    if fn == "sin":
        return math.sin(a)
    if fn == "cos":
        return math.cos(a)
    if fn == "exp":
        return math.exp(a)
    if fn == "ln":
        return math.log(a)
    if fn == "sqrt":
        return math.sqrt(a)
    return math.tanh(a)


def _eval(e, x, params):
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Var):
        return x[e.index - 1]
    if isinstance(e, Param):
        try:
            return params[e.name]
        except KeyError:
            raise UnboundParameterError(f"parameter {e.name!r} is not bound") from None
    if isinstance(e, Neg):
        return -_eval(e.arg, x, params)
    if isinstance(e, Call):
        return _apply(e.fn, _eval(e.arg, x, params))
    a = _eval(e.left, x, params)
    b = _eval(e.right, x, params)
    if e.op == "+":
        return a + b
    if e.op == "-":
        return a - b
    if e.op == "*":
        return a * b
    if e.op == "/":
        return a / b
    return math.pow(a, b)


def evaluate(e: Expression, x, params: Mapping[str, float] | None = None) -> float:
    """Evaluate ``e`` at state ``x``; domain violations raise instead of giving NaN."""
    xs = [float(v) for v in np.atleast_1d(x)]
    try:
        out = _eval(e, xs, params or {})
    except UnboundParameterError:
        raise
    except (ValueError, ZeroDivisionError, OverflowError) as exc:
        raise EvaluationDomainError(f"{to_source(e)}: {exc}") from None
    if not math.isfinite(out):
        raise EvaluationDomainError(f"{to_source(e)}: non-finite result")
    return out


def free_parameters(e: Expression) -> set[str]:
    if isinstance(e, Param):
        return {e.name}
    if isinstance(e, (Neg, Call)):
        return free_parameters(e.arg)
    if isinstance(e, Bin):
        return free_parameters(e.left) | free_parameters(e.right)
    return set()


def _py(e, pindex) -> str:
    if isinstance(e, Num):
        return repr(e.value)
    if isinstance(e, Var):
        return f"x[{e.index - 1}]"
    if isinstance(e, Param):
        return f"c[{pindex[e.name]}]"
    if isinstance(e, Neg):
        return f"(-{_py(e.arg, pindex)})"
    if isinstance(e, Call):
        fn = "log" if e.fn == "ln" else e.fn
        return f"_m.{fn}({_py(e.arg, pindex)})"
    a, b = _py(e.left, pindex), _py(e.right, pindex)
    if e.op == "^":
        return f"_m.pow({a}, {b})"
    return f"({a} {e.op} {b})"


def compile_expressions(exprs: Sequence[Expression], params: Mapping[str, float] | None = None):
    """Compile ASTs into one fast callable ``x -> tuple of floats``.

    Same semantics as :func:`evaluate`, including domain errors.
    """
    params = dict(params or {})
    names = sorted(set().union(*(free_parameters(e) for e in exprs)) if exprs else set())
    missing = [p for p in names if p not in params]
    if missing:
        raise UnboundParameterError(f"unbound parameters: {', '.join(missing)}")
    pindex = {p: k for k, p in enumerate(names)}
    body = ", ".join(_py(e, pindex) for e in exprs)
    code = f"lambda x: ({body},)"
    fn = eval(code, {"_m": math, "c": [float(params[p]) for p in names]})  # noqa: S307
    label = "; ".join(to_source(e) for e in exprs)

    def run(x):
        xs = x.tolist() if isinstance(x, np.ndarray) else [float(v) for v in x]
        try:
            out = fn(xs)
        except (ValueError, ZeroDivisionError, OverflowError) as exc:
            raise EvaluationDomainError(f"{label}: {exc}") from None
        except IndexError:
            raise InvalidArgumentError("state has too few components") from None
        if not all(math.isfinite(v) for v in out):
            raise EvaluationDomainError(f"{label}: non-finite result")
        return out

    return run


# ------------------------------------------------------------- differentiation


def _add(a, b):
    ca, cb = _const(a), _const(b)
    if ca is not None and cb is not None:
        return num(ca + cb)
    if ca == 0:
        return b
    if cb == 0:
        return a
    return Bin("+", a, b)


def _sub(a, b):
    ca, cb = _const(a), _const(b)
    if ca is not None and cb is not None:
        return num(ca - cb)
    if cb == 0:
        return a
    if ca == 0:
        return _neg(b)
    return Bin("-", a, b)


def _neg(a):
    ca = _const(a)
    if ca is not None:
        return num(-ca)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def _mul(a, b):
    ca, cb = _const(a), _const(b)
    if ca is not None and cb is not None:
        return num(ca * cb)
    if ca == 0 or cb == 0:
        return ZERO
    if ca == 1:
        return b
    if cb == 1:
        return a
    if ca == -1:
        return _neg(b)
    if cb == -1:
        return _neg(a)
    return Bin("*", a, b)


def _div(a, b):
    ca, cb = _const(a), _const(b)
    if ca is not None and cb is not None and cb != 0:
        return num(ca / cb)
    if ca == 0:
        return ZERO
    if cb == 1:
        return a
    return Bin("/", a, b)


def _pow(a, b):
    ca, cb = _const(a), _const(b)
    if ca is not None and cb is not None:
        try:
            v = math.pow(ca, cb)
        except (ValueError, OverflowError, ZeroDivisionError):
            v = None
        if v is not None and math.isfinite(v):
            return num(v)
    if cb == 1:
        return a
    if cb == 0:
        return ONE
    return Bin("^", a, b)


def _call(fn, a):
    ca = _const(a)
    if ca is not None:
        try:
            v = _apply(fn, ca)
        except (ValueError, OverflowError):
            v = None
        if v is not None and math.isfinite(v):
            return num(v)
    return Call(fn, a)


def differentiate(e: Expression, i: int) -> Expression:
    """Exact partial derivative of ``e`` with respect to ``x_i`` (1-based)."""
    if i < 1:
        raise InvalidArgumentError("variable index must be >= 1")
    if isinstance(e, (Num, Param)):
        return ZERO
    if isinstance(e, Var):
        return ONE if e.index == i else ZERO
    if isinstance(e, Neg):
        return _neg(differentiate(e.arg, i))
    if isinstance(e, Call):
        a = e.arg
        da = differentiate(a, i)
        if _const(da) == 0:
            return ZERO
        if e.fn == "sin":
            outer = _call("cos", a)
        elif e.fn == "cos":
            outer = _neg(_call("sin", a))
        elif e.fn == "exp":
            outer = e
        elif e.fn == "ln":
            return _div(da, a)
        elif e.fn == "sqrt":
            return _div(da, _mul(Num(2.0), e))
        else:  # tanh
            outer = _sub(ONE, _pow(e, Num(2.0)))
        return _mul(outer, da)
    a, b = e.left, e.right
    da, db = differentiate(a, i), differentiate(b, i)
    if e.op == "+":
        return _add(da, db)
    if e.op == "-":
        return _sub(da, db)
    if e.op == "*":
        return _add(_mul(da, b), _mul(a, db))
    if e.op == "/":
        return _div(_sub(_mul(da, b), _mul(a, db)), _pow(b, Num(2.0)))
    # power
    if _const(db) == 0:
        return _mul(_mul(b, _pow(a, _sub(b, ONE))), da)
    if _const(da) == 0:
        return _mul(_mul(e, _call("ln", a)), db)
    return _mul(e, _add(_mul(db, _call("ln", a)), _div(_mul(b, da), a)))


def gradient(e: Expression, n: int) -> list[Expression]:
    return [differentiate(e, i) for i in range(1, n + 1)]


# ------------------------------------------------------- field construction


def scalar_field(source: str | Expression, n: int, params: Mapping[str, float] | None = None,
                 name: str = "V") -> ScalarField:
    """Build a :class:`ScalarField` whose gradient is the symbolic one."""
    params = dict(params or {})
    e = parse(source, n, params) if isinstance(source, str) else source
    value = compile_expressions([e], params)
    grad = compile_expressions(gradient(e, n), params)
    return ScalarField(n, lambda x: value(x)[0], lambda x: np.array(grad(x)), name=name)


def vector_field(sources: Sequence[str | Expression], params: Mapping[str, float] | None = None,
                 name: str = "f") -> VectorField:
    params = dict(params or {})
    n = len(sources)
    exprs = [parse(s, n, params) if isinstance(s, str) else s for s in sources]
    fn = compile_expressions(exprs, params)
    return VectorField(n, lambda x: np.array(fn(x)), name=name)
