"""A small arithmetic language for coefficient functions of ``(t, x, mu)``.

Grammar (EBNF), lowest precedence first::

    expr   = term , { ("+" | "-") , term } ;
    term   = unary , { ("*" | "/") , unary } ;
    unary  = "-" , unary | power ;
    power  = atom , [ "^" , unary ] ;          (* right associative *)
    atom   = number | variable | func , "(" , expr , ")" | "(" , expr , ")" ;
    number = digits , [ "." , [ digits ] ] , [ exponent ] | "." , digits , [ exponent ] ;
    exponent = ( "e" | "E" ) , [ "+" | "-" ] , digits ;
    variable = "t" | "x" | "mu" ;
    func   = "exp" | "log" | "sin" | "cos" | "tanh" | "abs" | "sqrt" ;

So ``-x^2`` is ``-(x^2)``, ``2^-1`` is legal and ``a^b^c`` is ``a^(b^c)``.
There is no implicit multiplication: ``2t`` is rejected.

Parsed trees are immutable.  :func:`eval_expr` is the checked evaluator and
reports non-finite intermediate values with the path of the offending node;
:func:`compile_expr` returns a fast unchecked Python callable for inner
loops (the integrator), which signals problems through ordinary Python
arithmetic exceptions or a non-finite return value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Union

from .errors import NonautoBifError, NonFiniteResult

__all__ = [
    "Num", "Var", "Neg", "BinOp", "Call", "Expression",
    "ExprError", "UnexpectedToken", "UnbalancedParenthesis", "UnknownIdentifier",
    "EmptyInput", "parse_expr", "eval_expr", "to_source", "compile_expr",
    "free_vars", "VARIABLES", "FUNCTIONS", "ipow",
]

VARIABLES = ("t", "x", "mu")
FUNCTIONS = ("exp", "log", "sin", "cos", "tanh", "abs", "sqrt")
BINARY_OPS = ("+", "-", "*", "/", "^")


# -- AST ---------------------------------------------------------------------

@dataclass(frozen=True)
class Num:
    value: float

    def __post_init__(self):
        if not math.isfinite(self.value) or self.value < 0:
            raise ValueError(f"literal must be finite and non-negative, got {self.value!r}")


@dataclass(frozen=True)
class Var:
    name: str

    def __post_init__(self):
        if self.name not in VARIABLES:
            raise ValueError(f"unknown variable {self.name!r}")


@dataclass(frozen=True)
class Neg:
    operand: "Expression"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expression"
    right: "Expression"

    def __post_init__(self):
        if self.op not in BINARY_OPS:
            raise ValueError(f"unknown operator {self.op!r}")


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Expression"

    def __post_init__(self):
        if self.func not in FUNCTIONS:
            raise ValueError(f"unknown function {self.func!r}")


Expression = Union[Num, Var, Neg, BinOp, Call]


# -- errors ------------------------------------------------------------------

class ExprError(NonautoBifError, ValueError):
    """Malformed expression source.  ``offset`` is a byte offset into it."""

    def __init__(self, message, offset=0, expected=()):
        self.offset = offset
        self.expected = frozenset(expected)
        detail = f" (expected one of: {', '.join(sorted(self.expected))})" if self.expected else ""
        super().__init__(f"{message} at offset {offset}{detail}")


class UnexpectedToken(ExprError):
    pass


class UnbalancedParenthesis(ExprError):
    pass


class UnknownIdentifier(ExprError):
    pass


class EmptyInput(ExprError):
    pass


# -- lexer -------------------------------------------------------------------

@dataclass(frozen=True)
class _Token:
    kind: str  # "num", "ident", "op", "end"
    text: str
    offset: int


def _tokenize(source: str) -> list[_Token]:
    tokens = []
    i, n = 0, len(source)
    # byte offsets differ from str indices only for non-ASCII input
    boff = lambda k: len(source[:k].encode("utf-8"))  # noqa: E731
    while i < n:
        c = source[i]
        if c.isspace():
            i += 1
            continue
        if c.isdigit() or (c == "." and i + 1 < n and source[i + 1].isdigit()):
            j = i
            while j < n and source[j].isdigit():
                j += 1
            if j < n and source[j] == ".":
                j += 1
                while j < n and source[j].isdigit():
                    j += 1
            if j < n and source[j] in "eE":
                k = j + 1
                if k < n and source[k] in "+-":
                    k += 1
                if k < n and source[k].isdigit():
                    while k < n and source[k].isdigit():
                        k += 1
                    j = k
            tokens.append(_Token("num", source[i:j], boff(i)))
            i = j
        elif c.isalpha() or c == "_":
            j = i
            while j < n and (source[j].isalnum() or source[j] == "_"):
                j += 1
            tokens.append(_Token("ident", source[i:j], boff(i)))
            i = j
        elif c in "+-*/^()":
            tokens.append(_Token("op", c, boff(i)))
            i += 1
        else:
            raise UnexpectedToken(f"unexpected character {c!r}", boff(i),
                                  ("number", "identifier", "operator"))
    tokens.append(_Token("end", "", boff(n)))
    return tokens


# -- parser ------------------------------------------------------------------

_ATOM_START = ("number", "t", "x", "mu", "(", "-") + FUNCTIONS


class _Parser:
    def __init__(self, source: str):
        self.tokens = _tokenize(source)
        self.pos = 0
        self.depth = 0

    @property
    def tok(self) -> _Token:
        return self.tokens[self.pos]

    def advance(self) -> _Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def at(self, text: str) -> bool:
        return self.tok.kind == "op" and self.tok.text == text

    def parse(self) -> Expression:
        node = self.expr()
        if self.tok.kind != "end":
            if self.at(")"):
                raise UnbalancedParenthesis("unmatched ')'", self.tok.offset)
            raise UnexpectedToken(f"unexpected {self.tok.text!r}", self.tok.offset,
                                  ("+", "-", "*", "/", "^", "end of input"))
        return node

    def expr(self) -> Expression:
        node = self.term()
        while self.at("+") or self.at("-"):
            op = self.advance().text
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Expression:
        node = self.unary()
        while self.at("*") or self.at("/"):
            op = self.advance().text
            node = BinOp(op, node, self.unary())
        return node

    def unary(self) -> Expression:
        if self.at("-"):
            self.advance()
            return Neg(self.unary())
        return self.power()

    def power(self) -> Expression:
        base = self.atom()
        if self.at("^"):
            self.advance()
            return BinOp("^", base, self.unary())
        return base

    def atom(self) -> Expression:
        tok = self.tok
        if tok.kind == "num":
            self.advance()
            return Num(float(tok.text))
        if tok.kind == "ident":
            self.advance()
            if tok.text in VARIABLES:
                return Var(tok.text)
            if tok.text in FUNCTIONS:
                if not self.at("("):
                    raise UnexpectedToken(f"expected '(' after {tok.text}", self.tok.offset, ("(",))
                return Call(tok.text, self.group())
            raise UnknownIdentifier(f"unknown identifier {tok.text!r}", tok.offset,
                                    VARIABLES + FUNCTIONS)
        if self.at("("):
            return self.group()
        if tok.kind == "end":
            if self.depth:
                raise UnbalancedParenthesis("missing ')'", tok.offset, (")",))
            raise UnexpectedToken("unexpected end of input", tok.offset, _ATOM_START)
        if self.at(")"):
            raise UnbalancedParenthesis("unexpected ')'", tok.offset, _ATOM_START)
        raise UnexpectedToken(f"unexpected {tok.text!r}", tok.offset, _ATOM_START)

    def group(self) -> Expression:
        self.advance()  # "("
        self.depth += 1
        node = self.expr()
        if not self.at(")"):
            if self.tok.kind == "end":
                raise UnbalancedParenthesis("missing ')'", self.tok.offset, (")",))
            raise UnexpectedToken(f"unexpected {self.tok.text!r}", self.tok.offset,
                                  (")", "+", "-", "*", "/", "^"))
        self.advance()
        self.depth -= 1
        return node


def parse_expr(source: str) -> Expression:
    """Parse ``source`` into an expression tree.

    >>> parse_expr("2*t^2")
    BinOp(op='*', left=Num(value=2.0), right=BinOp(op='^', left=Var(name='t'), right=Num(value=2.0)))
    """
    if not source or not source.strip():
        raise EmptyInput("empty expression", 0)
    return _Parser(source).parse()


# -- printing ----------------------------------------------------------------

_ADD, _MUL, _UNARY, _POW, _ATOM = range(1, 6)


def _prec(node: Expression) -> int:
    if isinstance(node, BinOp):
        return {"+": _ADD, "-": _ADD, "*": _MUL, "/": _MUL, "^": _POW}[node.op]
    if isinstance(node, Neg):
        return _UNARY
    return _ATOM


def _wrap(node: Expression, minimum: int) -> str:
    text = to_source(node)
    return f"({text})" if _prec(node) < minimum else text


def to_source(node: Expression) -> str:
    """Print ``node`` in the expression language; re-parsing gives an equal tree."""
    if isinstance(node, Num):
        v = node.value
        return str(int(v)) if v.is_integer() and v < 1e15 else repr(v)
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Neg):
        return "-" + _wrap(node.operand, _UNARY)
    if isinstance(node, Call):
        return f"{node.func}({to_source(node.arg)})"
    if node.op in "+-":
        return f"{_wrap(node.left, _ADD)} {node.op} {_wrap(node.right, _MUL)}"
    if node.op in "*/":
        return f"{_wrap(node.left, _MUL)}{node.op}{_wrap(node.right, _UNARY)}"
    return f"{_wrap(node.left, _ATOM)}^{_wrap(node.right, _UNARY)}"


def free_vars(node: Expression) -> frozenset:
    if isinstance(node, Var):
        return frozenset((node.name,))
    if isinstance(node, Num):
        return frozenset()
    if isinstance(node, (Neg,)):
        return free_vars(node.operand)
    if isinstance(node, Call):
        return free_vars(node.arg)
    return free_vars(node.left) | free_vars(node.right)


# -- evaluation --------------------------------------------------------------

def ipow(base: float, k: int) -> float:
    """``base**k`` for integer ``k`` by repeated squaring (exact sign for base < 0)."""
    if k < 0:
        return 1.0 / ipow(base, -k)
    result = 1.0
    while k:
        if k & 1:
            result *= base
        base *= base
        k >>= 1
    return result


def _pow(base: float, e: float) -> float:
    if e.is_integer() and abs(e) <= 4096:
        return ipow(base, int(e))
    if base < 0:
        raise ValueError("non-integer power of a negative number")
    if base == 0 and e < 0:
        raise ZeroDivisionError("zero to a negative power")
    return math.pow(base, e)


def _log(v: float) -> float:
    if v <= 0:
        raise ValueError("log of non-positive number")
    return math.log(v)


_FUNC_IMPL: dict[str, Callable[[float], float]] = {
    "exp": math.exp,
    "log": _log,
    "sin": math.sin,
    "cos": math.cos,
    "tanh": math.tanh,
    "abs": abs,
    "sqrt": math.sqrt,
}


def _walk(node: Expression, env: dict, path: str) -> float:
    """Checked tree-walking evaluation; raises NonFiniteResult at the first bad node."""
    try:
        if isinstance(node, Num):
            return node.value
        if isinstance(node, Var):
            value = env[node.name]
        elif isinstance(node, Neg):
            value = -_walk(node.operand, env, path + ".operand")
        elif isinstance(node, Call):
            arg = _walk(node.arg, env, path + ".arg")
            value = _FUNC_IMPL[node.func](arg)
        else:
            a = _walk(node.left, env, path + ".left")
            b = _walk(node.right, env, path + ".right")
            op = node.op
            if op == "+":
                value = a + b
            elif op == "-":
                value = a - b
            elif op == "*":
                value = a * b
            elif op == "/":
                value = a / b
            else:
                value = _pow(a, b)
    except NonFiniteResult:
        raise
    except (ArithmeticError, ValueError) as exc:
        raise NonFiniteResult(f"{to_source(node)}: {exc}", path, to_source(node)) from None
    if not math.isfinite(value):
        raise NonFiniteResult(f"{to_source(node)} evaluated to {value!r}", path, to_source(node))
    return value


def _to_python(node: Expression) -> str:
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Neg):
        return f"(-{_to_python(node.operand)})"
    if isinstance(node, Call):
        return f"_{node.func}({_to_python(node.arg)})"
    a, b = _to_python(node.left), _to_python(node.right)
    if node.op == "^":
        if isinstance(node.right, Num) and node.right.value.is_integer():
            return f"_ipow({a}, {int(node.right.value)})"
        if isinstance(node.right, Neg) and isinstance(node.right.operand, Num) \
                and node.right.operand.value.is_integer():
            return f"_ipow({a}, {-int(node.right.operand.value)})"
        return f"_pow({a}, {b})"
    return f"({a} {node.op} {b})"


_CODEGEN_GLOBALS = {"__builtins__": {}, "_ipow": ipow, "_pow": _pow,
                    **{f"_{k}": v for k, v in _FUNC_IMPL.items()}}


@lru_cache(maxsize=512)
def compile_expr(node: Expression, params: tuple = VARIABLES) -> Callable[..., float]:
    """Compile to a Python function of ``params`` (default ``(t, x, mu)``).

    The result is unchecked: bad arithmetic raises ZeroDivisionError,
    OverflowError or ValueError, and overflow in products can return inf.
    """
    missing = free_vars(node) - set(params)
    if missing:
        raise ValueError(f"expression uses {sorted(missing)} not among parameters {params}")
    code = f"lambda {', '.join(params)}: {_to_python(node)}"
    return eval(code, dict(_CODEGEN_GLOBALS))  # noqa: S307 - source generated from a validated AST


def python_source(node: Expression) -> str:
    """Python source for ``node`` using the helper names of the codegen namespace."""
    return _to_python(node)


def codegen_namespace() -> dict:
    return dict(_CODEGEN_GLOBALS)


def eval_expr(node: Expression, t: float = 0.0, x: float = 0.0, mu: float = 0.0) -> float:
    """Evaluate with bindings; non-finite results raise :class:`NonFiniteResult`.

    >>> eval_expr(parse_expr("2*t^2"), t=3)
    18.0
    """
    fn = compile_expr(node)
    try:
        value = fn(t, x, mu)
        if math.isfinite(value):
            return value
    except (ArithmeticError, ValueError):
        pass
    # slow path only to locate the failure
    return _walk(node, {"t": t, "x": x, "mu": mu}, "root")
