"""Small arithmetic expression language for metric components.

Grammar (recursive descent, positions reported on error):

    expr    := term  (('+' | '-') term)*
    term    := factor (('*' | '/') factor)*
    factor  := '-' factor | power
    power   := atom ('^' ['-'] INTEGER)?
    atom    := NUMBER | NAME | NAME '(' expr (',' expr)* ')' | '(' expr ')'

Variables are x1..xn, plus declared parameter names and the constant pi.
Functions: sqrt, sin, cos, atan2.  Exponents must be integer literals.
Expressions evaluate on floats, numpy arrays, or Dual numbers alike.
"""

from __future__ import annotations

import math

from . import dual
from .errors import MetricConfigError

_FUNCTIONS = {
    "sqrt": (dual.sqrt, 1),
    "sin": (dual.sin, 1),
    "cos": (dual.cos, 1),
    "atan2": (dual.atan2, 2),
}

_CONSTANTS = {"pi": math.pi}


class _Token:
    __slots__ = ("kind", "text", "pos")

    def __init__(self, kind, text, pos):
        self.kind = kind
        self.text = text
        self.pos = pos


def _tokenize(src):
    tokens = []
    i = 0
    n = len(src)
    while i < n:
        c = src[i]
        if c in " \t\r\n":
            i += 1
            continue
        if c.isdigit() or (c == "." and i + 1 < n and src[i + 1].isdigit()):
            j = i
            seen_dot = False
            seen_exp = False
            while j < n:
                ch = src[j]
                if ch.isdigit():
                    j += 1
                elif ch == "." and not seen_dot and not seen_exp:
                    seen_dot = True
                    j += 1
                elif ch in "eE" and not seen_exp and j > i:
                    if j + 1 < n and (src[j + 1].isdigit() or src[j + 1] in "+-"):
                        seen_exp = True
                        j += 2 if src[j + 1] in "+-" else 1
                    else:
                        break
                else:
                    break
            tokens.append(_Token("number", src[i:j], i))
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (src[j].isalnum() or src[j] == "_"):
                j += 1
            tokens.append(_Token("name", src[i:j], i))
            i = j
            continue
        if c in "+-*/^(),":
            tokens.append(_Token(c, c, i))
            i += 1
            continue
        raise MetricConfigError(f"unexpected character {c!r} at position {i}", position=i)
    tokens.append(_Token("end", "", n))
    return tokens


class _Parser:
    def __init__(self, src, n_vars, param_names):
        self.src = src
        self.tokens = _tokenize(src)
        self.k = 0
        self.n_vars = n_vars
        self.param_names = frozenset(param_names)
        self.names_used = set()

    def peek(self):
        return self.tokens[self.k]

    def eat(self, kind=None):
        tok = self.tokens[self.k]
        if kind is not None and tok.kind != kind:
            raise MetricConfigError(
                f"expected {kind!r} but found {tok.text or 'end of input'!r} "
                f"at position {tok.pos}",
                position=tok.pos,
            )
        self.k += 1
        return tok

    def fail(self, tok, what):
        raise MetricConfigError(
            f"{what} at position {tok.pos}: {tok.text or 'end of input'!r}",
            position=tok.pos,
        )

    # expr := term (('+'|'-') term)*
    def expr(self):
        f = self.term()
        while self.peek().kind in ("+", "-"):
            op = self.eat().kind
            g = self.term()
            if op == "+":
                f = _binop_add(f, g)
            else:
                f = _binop_sub(f, g)
        return f

    def term(self):
        f = self.factor()
        while self.peek().kind in ("*", "/"):
            op = self.eat().kind
            g = self.factor()
            if op == "*":
                f = _binop_mul(f, g)
            else:
                f = _binop_div(f, g)
        return f

    def factor(self):
        if self.peek().kind == "-":
            self.eat()
            g = self.factor()
            return lambda env: -g(env)
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek().kind != "^":
            return base
        self.eat()
        sign = 1
        if self.peek().kind == "-":
            self.eat()
            sign = -1
        tok = self.peek()
        if tok.kind != "number" or ("." in tok.text or "e" in tok.text or "E" in tok.text):
            self.fail(tok, "exponent must be an integer literal")
        self.eat()
        k = sign * int(tok.text)
        return lambda env: base(env) ** k

    def atom(self):
        tok = self.peek()
        if tok.kind == "number":
            self.eat()
            c = float(tok.text)
            return lambda env: c
        if tok.kind == "(":
            self.eat()
            inner = self.expr()
            self.eat(")")
            return inner
        if tok.kind == "name":
            self.eat()
            name = tok.text
            if self.peek().kind == "(":
                if name not in _FUNCTIONS:
                    raise MetricConfigError(
                        f"unknown function {name!r} at position {tok.pos}",
                        position=tok.pos,
                    )
                fn, arity = _FUNCTIONS[name]
                self.eat("(")
                args = [self.expr()]
                while self.peek().kind == ",":
                    self.eat()
                    args.append(self.expr())
                self.eat(")")
                if len(args) != arity:
                    raise MetricConfigError(
                        f"function {name!r} takes {arity} argument(s), got {len(args)} "
                        f"at position {tok.pos}",
                        position=tok.pos,
                    )
                if arity == 1:
                    a0 = args[0]
                    return lambda env: fn(a0(env))
                a0, a1 = args
                return lambda env: fn(a0(env), a1(env))
            if name in _CONSTANTS:
                c = _CONSTANTS[name]
                return lambda env: c
            if name.startswith("x") and name[1:].isdigit():
                idx = int(name[1:])
                if not 1 <= idx <= self.n_vars:
                    raise MetricConfigError(
                        f"variable {name!r} out of range for {self.n_vars} spatial "
                        f"coordinates at position {tok.pos}",
                        position=tok.pos,
                    )
                self.names_used.add(name)
                return lambda env: env[name]
            if name in self.param_names:
                self.names_used.add(name)
                return lambda env: env[name]
            raise MetricConfigError(
                f"unknown name {name!r} at position {tok.pos}", position=tok.pos
            )
        self.fail(tok, "unexpected token")


class Expression:
    """A parsed component expression, callable on coordinate values."""

    def __init__(self, src, n_vars, param_names=()):
        self.src = src
        self.n_vars = n_vars
        p = _Parser(src, n_vars, param_names)
        self._fn = p.expr()
        tok = p.peek()
        if tok.kind != "end":
            p.fail(tok, "unexpected token")
        self.names_used = frozenset(p.names_used)

    def __call__(self, xs, params=None):
        env = {f"x{i + 1}": x for i, x in enumerate(xs)}
        if params:
            env.update(params)
        return self._fn(env)

    def __repr__(self):
        return f"Expression({self.src!r})"


def parse_expression(src, n_vars, param_names=()):
    """Parse ``src`` into an Expression over x1..x{n_vars} and the given parameters."""
    if not isinstance(src, str) or not src.strip():
        raise MetricConfigError("empty expression")
    return Expression(src, n_vars, param_names)


def _binop_add(f, g):
    return lambda env: f(env) + g(env)


def _binop_sub(f, g):
    return lambda env: f(env) - g(env)


def _binop_mul(f, g):
    return lambda env: f(env) * g(env)


def _binop_div(f, g):
    return lambda env: f(env) / g(env)
