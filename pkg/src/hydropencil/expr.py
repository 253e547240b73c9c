"""Exact rational functions over QQ in a fixed set of coordinates.

An :class:`Expr` is a quotient of two sparse polynomials with rational
coefficients.  It is always stored in canonical form: numerator and
denominator coprime, denominator monic with respect to the graded
lexicographic order of the context's variables (coordinates first, then
parameters).  Canonical form makes equality structural and ``is_zero``
exact.

Polynomial arithmetic and gcd cancellation are delegated to FLINT's
multivariate ``fmpq_mpoly`` type (through python-flint); everything visible
(parsing, printing, the quotient rule, substitution, numeric evaluation) is
defined here.

Grammar accepted by :func:`parse`::

    expr   := term (("+" | "-") term)*
    term   := unary (("*" | "/") unary)*
    unary  := ("+" | "-") unary | power
    power  := atom ("^" INTEGER)?
    atom   := NUMBER | IDENT | "(" expr ")"
    NUMBER := digits ("." digits)?

Identifiers must be coordinates or parameters of the context.  ``**`` is
accepted as a synonym for ``^``.
"""

from __future__ import annotations

import functools
import math
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Sequence, Union

import numpy as np
import flint

from .errors import (
    ContextMismatch,
    DivisionByZero,
    DivisionByZeroConstant,
    ExprSyntaxError,
    NumericPole,
    SubstitutionPole,
    UnknownIdentifier,
)

__all__ = [
    "Context",
    "Expr",
    "parse",
    "arith",
    "diff",
    "is_zero",
    "substitute",
    "eval_numeric",
    "as_expr",
]

Scalar = Union[int, Fraction]
_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")


Poly = flint.fmpq_mpoly


@functools.lru_cache(maxsize=None)
def _ring(names: tuple[str, ...]) -> flint.fmpq_mpoly_ctx:
    return flint.fmpq_mpoly_ctx.get(names, "deglex")


def _q(value) -> flint.fmpq:
    f = Fraction(value)
    return flint.fmpq(f.numerator, f.denominator)


def _frac(q: flint.fmpq) -> Fraction:
    return Fraction(int(q.p), int(q.q))


def _const_poly(ring, value) -> Poly:
    if value == 0:
        return ring.from_dict({})
    return ring.from_dict({(0,) * ring.nvars(): value})


@dataclass(frozen=True)
class Context:
    """Ordered coordinates plus optional constant parameters (e.g. ``lambda``)."""

    coords: tuple[str, ...]
    params: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "coords", tuple(self.coords))
        object.__setattr__(self, "params", tuple(self.params))
        if not self.coords:
            raise ValueError("a context needs at least one coordinate")
        names = self.coords + self.params
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate variable names in {names}")
        for name in names:
            if not _IDENT.match(name):
                raise ValueError(f"invalid identifier {name!r}")

    @classmethod
    def standard(cls, n: int, prefix: str = "v", params: Sequence[str] = ()) -> "Context":
        return cls(tuple(f"{prefix}{i + 1}" for i in range(n)), tuple(params))

    @property
    def dim(self) -> int:
        return len(self.coords)

    @property
    def names(self) -> tuple[str, ...]:
        return self.coords + self.params

    @property
    def ring(self) -> flint.fmpq_mpoly_ctx:
        return _ring(self.names)

    def with_params(self, *params: str) -> "Context":
        extra = tuple(p for p in params if p not in self.params)
        return Context(self.coords, self.params + extra)

    def const(self, value: Scalar) -> "Expr":
        ring = self.ring
        return Expr._raw(self, _const_poly(ring, _q(value)), _const_poly(ring, 1))

    def zero(self) -> "Expr":
        ring = self.ring
        return Expr._raw(self, _const_poly(ring, 0), _const_poly(ring, 1))

    def one(self) -> "Expr":
        ring = self.ring
        return Expr._raw(self, _const_poly(ring, 1), _const_poly(ring, 1))

    def var(self, name: str) -> "Expr":
        try:
            idx = self.names.index(name)
        except ValueError:
            raise UnknownIdentifier(f"{name!r} is not a variable of {self.names}") from None
        ring = self.ring
        return Expr._raw(self, ring.gens()[idx], _const_poly(ring, 1))

    def coord_vars(self) -> list["Expr"]:
        return [self.var(c) for c in self.coords]

    def parse(self, text: str) -> "Expr":
        return parse(text, self)


class Expr:
    """Immutable canonical rational function bound to a :class:`Context`."""

    __slots__ = ("ctx", "num", "den", "_numeric", "_hash")

    def __init__(self, ctx: Context, num: Poly, den: Poly | None = None):
        ring = ctx.ring
        if den is None:
            den = _const_poly(ring, 1)
        if num.context() is not ring or den.context() is not ring:
            raise ContextMismatch("polynomials do not belong to the context ring")
        if den.is_zero():
            raise DivisionByZero("denominator is the zero polynomial")
        if num.is_zero():
            self._set(ctx, num, _const_poly(ring, 1))
            return
        if den.is_constant():
            self._set(ctx, num / den.leading_coefficient(), _const_poly(ring, 1))
            return
        g = num.gcd(den)
        if not g.is_one():
            num, den = num / g, den / g
        lc = den.leading_coefficient()
        if lc != 1:
            num, den = num / lc, den / lc
        self._set(ctx, num, den)

    def _set(self, ctx, num, den):
        object.__setattr__(self, "ctx", ctx)
        object.__setattr__(self, "num", num)
        object.__setattr__(self, "den", den)
        object.__setattr__(self, "_numeric", None)
        object.__setattr__(self, "_hash", None)

    @classmethod
    def _raw(cls, ctx: Context, num: Poly, den: Poly) -> "Expr":
        # caller guarantees canonical form
        obj = cls.__new__(cls)
        obj._set(ctx, num, den)
        return obj

    def __setattr__(self, key, value):
        raise AttributeError("Expr is immutable")

    # --- coercion ----------------------------------------------------------

    def _coerce(self, other) -> "Expr":
        if isinstance(other, Expr):
            if other.ctx != self.ctx:
                raise ContextMismatch(f"cannot combine expressions over {self.ctx.names} and {other.ctx.names}")
            return other
        if isinstance(other, (int, Fraction)):
            return self.ctx.const(other)
        return NotImplemented

    # --- arithmetic ----------------------------------------------------------

    def __add__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        if o.num.is_zero():
            return self
        if self.num.is_zero():
            return o
        if self.den == o.den:
            return Expr(self.ctx, self.num + o.num, self.den)
        return Expr(self.ctx, self.num * o.den + o.num * self.den, self.den * o.den)

    __radd__ = __add__

    def __neg__(self):
        return Expr._raw(self.ctx, -self.num, self.den)

    def __pos__(self):
        return self

    def __sub__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return self + (-o)

    def __rsub__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return o + (-self)

    def __mul__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        if self.num.is_zero() or o.num.is_zero():
            return self.ctx.zero()
        if self.den.is_one() and o.den.is_one():
            return Expr._raw(self.ctx, self.num * o.num, self.den)
        return Expr(self.ctx, self.num * o.num, self.den * o.den)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        if o.num.is_zero():
            raise DivisionByZero(f"division of {self} by an expression that is identically zero")
        return Expr(self.ctx, self.num * o.den, self.den * o.num)

    def __rtruediv__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return o / self

    def __pow__(self, k: int):
        if not isinstance(k, int):
            return NotImplemented
        if k < 0:
            return self.ctx.one() / (self ** (-k))
        return Expr._raw(self.ctx, self.num ** k, self.den ** k)

    # --- comparison ----------------------------------------------------------

    def __eq__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return NotImplemented
        return self.num == o.num and self.den == o.den

    def __hash__(self):
        h = self._hash
        if h is None:
            h = hash((self.ctx, tuple(self.num.to_dict().items()), tuple(self.den.to_dict().items())))
            object.__setattr__(self, "_hash", h)
        return h

    def __bool__(self):
        return not self.num.is_zero()

    # --- queries ----------------------------------------------------------

    def is_zero(self) -> bool:
        return self.num.is_zero()

    def is_polynomial(self) -> bool:
        return self.den.is_one()

    def is_constant(self) -> bool:
        return self.num.is_constant() and self.den.is_one()

    def constant_value(self) -> Fraction:
        if not self.is_constant():
            raise ValueError(f"{self} is not constant")
        if self.num.is_zero():
            return Fraction(0)
        return _frac(self.num.leading_coefficient())

    def free_names(self) -> set[str]:
        used = set()
        for poly in (self.num, self.den):
            for monom in poly.monoms():
                used.update(n for n, e in zip(self.ctx.names, monom) if e)
        return used

    def degree(self) -> int:
        """Total degree of the numerator (polynomials only in practice)."""
        if self.num.is_zero():
            return -1
        return int(self.num.total_degree())

    # --- calculus ----------------------------------------------------------

    def diff(self, coord: str) -> "Expr":
        if coord not in self.ctx.coords:
            if coord in self.ctx.params:
                raise UnknownIdentifier(f"{coord!r} is a parameter, not a coordinate")
            raise UnknownIdentifier(f"{coord!r} is not a coordinate of {self.ctx.coords}")
        x = self.ctx.names.index(coord)
        dn = self.num.derivative(x)
        if self.den.is_one():
            return Expr._raw(self.ctx, dn, self.den)
        dd = self.den.derivative(x)
        # the result's denominator divides den^2; cancel against den only
        top = dn * self.den - self.num * dd
        return Expr(self.ctx, top, self.den ** 2)

    def lift(self, ctx: Context) -> "Expr":
        """Re-express in a context that contains all variables used here."""
        if ctx == self.ctx:
            return self
        missing = self.free_names() - set(ctx.names)
        if missing:
            raise ContextMismatch(f"variables {sorted(missing)} are not available in {ctx.names}")
        ring = ctx.ring
        num, den = self.num.project_to_context(ring), self.den.project_to_context(ring)
        # the monic normalisation depends on the variable order
        if den.is_one() or den.leading_coefficient() == 1:
            return Expr._raw(ctx, num, den)
        return Expr(ctx, num, den)

    def substitute(self, bindings: Mapping[str, "Expr"], ctx: Context | None = None) -> "Expr":
        return substitute(self, bindings, ctx)

    # --- numerics ----------------------------------------------------------

    def numeric(self) -> "NumericForm":
        cached = self._numeric
        if cached is None:
            cached = NumericForm(self)
            object.__setattr__(self, "_numeric", cached)
        return cached

    def __call__(self, *point, eps: float = 1e-12):
        return self.numeric()(point, eps=eps)

    # --- text ----------------------------------------------------------

    def __str__(self):
        return format_expr(self)

    def __repr__(self):
        return f"Expr({format_expr(self)!r})"


def as_expr(value, ctx: Context) -> Expr:
    if isinstance(value, Expr):
        if value.ctx != ctx:
            return value.lift(ctx)
        return value
    if isinstance(value, str):
        return parse(value, ctx)
    if isinstance(value, (int, Fraction)):
        return ctx.const(value)
    raise TypeError(f"cannot interpret {value!r} as an expression")


# --- formatting ------------------------------------------------------------

def _fmt_coeff(q) -> str:
    num, den = int(q.p), int(q.q)
    return str(num) if den == 1 else f"{num}/{den}"


def _fmt_monom(names, monom) -> str:
    parts = []
    for name, e in zip(names, monom):
        if e == 1:
            parts.append(name)
        elif e > 1:
            parts.append(f"{name}^{e}")
    return "*".join(parts)


def _fmt_poly(names, poly: Poly) -> str:
    if poly.is_zero():
        return "0"
    out = []
    for i, (monom, coeff) in enumerate(poly.terms()):
        neg = coeff < 0
        c = -coeff if neg else coeff
        mono = _fmt_monom(names, monom)
        if not mono:
            body = _fmt_coeff(c)
        elif c == 1:
            body = mono
        else:
            body = f"{_fmt_coeff(c)}*{mono}"
        if i == 0:
            out.append(f"-{body}" if neg else body)
        else:
            out.append(f" - {body}" if neg else f" + {body}")
    return "".join(out)


def _single_power(poly: Poly) -> bool:
    if len(poly) != 1:
        return False
    monom, coeff = next(iter(poly.terms()))
    return coeff == 1 and sum(1 for e in monom if e) == 1


def format_expr(e: Expr) -> str:
    """Canonical text; ``parse(format_expr(e), e.ctx) == e``."""
    names = e.ctx.names
    if e.den.is_one():
        return _fmt_poly(names, e.num)
    # print integer numerator coefficients; the denominator absorbs the scale
    scale = 1
    for _, c in e.num.terms():
        scale = math.lcm(scale, int(c.q))
    num_poly, den_poly = e.num, e.den
    if scale != 1:
        num_poly, den_poly = num_poly * scale, den_poly * scale
    num = _fmt_poly(names, num_poly)
    if len(num_poly) > 1:
        num = f"({num})"
    den = _fmt_poly(names, den_poly)
    if not _single_power(den_poly):
        den = f"({den})"
    return f"{num}/{den}"


# --- parsing ----------------------------------------------------------------

_TOKEN = re.compile(r"\s*(?:(\d+(?:\.\d+)?)|([A-Za-z_][A-Za-z0-9_]*)|(\*\*|[-+*/^()]))")


def _tokenize(text: str):
    pos = 0
    tokens = []
    while True:
        while pos < len(text) and text[pos].isspace():
            pos += 1
        if pos >= len(text):
            break
        m = _TOKEN.match(text, pos)
        if not m:
            raise ExprSyntaxError(f"unexpected character {text[pos]!r}", text, pos)
        start = m.start(m.lastindex)
        if m.group(1) is not None:
            tokens.append(("num", m.group(1), start))
        elif m.group(2) is not None:
            tokens.append(("ident", m.group(2), start))
        else:
            op = "^" if m.group(3) == "**" else m.group(3)
            tokens.append(("op", op, start))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str, ctx: Context):
        self.text = text
        self.ctx = ctx
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def error(self, message, tok=None):
        tok = tok or self.peek()
        return ExprSyntaxError(message, self.text, tok[2])

    def parse(self) -> Expr:
        e = self.expr()
        tok = self.peek()
        if tok[0] != "end":
            raise self.error(f"unexpected {tok[1]!r}")
        return e

    def expr(self) -> Expr:
        e = self.term()
        while self.peek()[:2] in (("op", "+"), ("op", "-")):
            op = self.advance()[1]
            rhs = self.term()
            e = e + rhs if op == "+" else e - rhs
        return e

    def term(self) -> Expr:
        e = self.unary()
        while self.peek()[:2] in (("op", "*"), ("op", "/")):
            op_tok = self.advance()
            rhs_tok = self.peek()
            rhs = self.unary()
            if op_tok[1] == "*":
                e = e * rhs
            else:
                if rhs.is_zero():
                    if rhs_tok[0] == "num":
                        raise DivisionByZeroConstant(
                            f"literal zero denominator at position {rhs_tok[2]} in {self.text!r}")
                    raise DivisionByZero(
                        f"denominator starting at position {rhs_tok[2]} is identically zero in {self.text!r}")
                e = e / rhs
        return e

    def unary(self) -> Expr:
        tok = self.peek()
        if tok[:2] == ("op", "-"):
            self.advance()
            return -self.unary()
        if tok[:2] == ("op", "+"):
            self.advance()
            return self.unary()
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.peek()[:2] == ("op", "^"):
            self.advance()
            tok = self.peek()
            if tok[0] != "num" or "." in tok[1]:
                raise self.error("exponent must be a nonnegative integer literal")
            self.advance()
            if self.peek()[:2] == ("op", "^"):
                raise self.error("chained exponents are ambiguous; use parentheses")
            return base ** int(tok[1])
        return base

    def atom(self) -> Expr:
        tok = self.advance()
        kind, value, pos = tok
        if kind == "num":
            return self.ctx.const(Fraction(value))
        if kind == "ident":
            if self.peek()[:2] == ("op", "("):
                raise UnknownIdentifier(
                    f"function {value!r} at position {pos}: only rational expressions are supported")
            if value not in self.ctx.names:
                raise UnknownIdentifier(
                    f"unknown identifier {value!r} at position {pos}; expected one of {list(self.ctx.names)}")
            return self.ctx.var(value)
        if (kind, value) == ("op", "("):
            e = self.expr()
            close = self.advance()
            if close[:2] != ("op", ")"):
                raise self.error("expected ')'", close)
            return e
        if kind == "end":
            raise self.error("unexpected end of input", tok)
        raise self.error(f"unexpected {value!r}", tok)


def parse(text: str, ctx: Context) -> Expr:
    return _Parser(text, ctx).parse()


# --- functional API -----------------------------------------------------------

def arith(a: Expr, b: Expr, op: str) -> Expr:
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    if op == "div":
        return a / b
    raise ValueError(f"unknown operation {op!r}")


def diff(e: Expr, coord: str) -> Expr:
    return e.diff(coord)


def is_zero(e: Expr) -> bool:
    return e.is_zero()


def _poly_at(poly: Poly, values: Sequence[Expr], one: Expr) -> Expr:
    # power tables avoid recomputing x^k for every monomial
    powers: list[dict[int, Expr]] = [{0: one, 1: v} for v in values]

    def pw(i, k):
        table = powers[i]
        if k not in table:
            table[k] = pw(i, k - 1) * values[i]
        return table[k]

    total = one.ctx.zero()
    for monom, coeff in poly.terms():
        term = one.ctx.const(_frac(coeff))
        for i, e in enumerate(monom):
            if e:
                term = term * pw(i, e)
        total = total + term
    return total


def substitute(e: Expr, bindings: Mapping[str, Expr], ctx: Context | None = None) -> Expr:
    """Simultaneous substitution of variables by expressions of a target context.

    Variables of ``e`` that are not bound pass through unchanged, which
    requires the target context to have a variable of the same name.
    """
    for name in bindings:
        if name not in e.ctx.names:
            raise UnknownIdentifier(f"{name!r} is not a variable of {e.ctx.names}")
    targets = {b.ctx for b in bindings.values() if isinstance(b, Expr)}
    if ctx is None:
        if len(targets) > 1:
            raise ContextMismatch("bindings live in different contexts")
        ctx = targets.pop() if targets else e.ctx
    values = []
    for name in e.ctx.names:
        if name in bindings:
            values.append(as_expr(bindings[name], ctx))
        elif name in ctx.names:
            values.append(ctx.var(name))
        else:
            used = name in e.free_names()
            values.append(ctx.zero() if not used else None)
            if used:
                raise UnknownIdentifier(f"no binding for {name!r} and the target context lacks it")
    if all(v.is_polynomial() for v in values):
        # exact polynomial composition in C
        ring = ctx.ring
        num_p = e.num.compose(*(v.num for v in values), ctx=ring)
        den_p = e.den.compose(*(v.num for v in values), ctx=ring)
        if den_p.is_zero():
            raise SubstitutionPole(f"denominator of {e} vanishes identically after substitution")
        return Expr(ctx, num_p, den_p)
    one = ctx.one()
    num = _poly_at(e.num, values, one)
    den = _poly_at(e.den, values, one)
    if den.is_zero():
        raise SubstitutionPole(f"denominator of {e} vanishes identically after substitution")
    return num / den


# --- numeric evaluation -------------------------------------------------------

class _Horner:
    """Nested Horner scheme: outermost variable first, descending exponents."""

    __slots__ = ("var", "chunks", "const")

    def __init__(self, terms: dict[tuple[int, ...], float], nvars: int, var: int = 0):
        self.var = var
        if var == nvars or not terms:
            self.const = sum(terms.values()) if terms else 0.0
            self.chunks = None
            return
        groups: dict[int, dict] = {}
        for monom, c in terms.items():
            groups.setdefault(monom[var], {})[monom] = c
        if list(groups) == [0]:
            inner = _Horner(terms, nvars, var + 1)
            self.var, self.chunks, self.const = inner.var, inner.chunks, inner.const
            return
        self.const = None
        self.chunks = [(k, _Horner(groups[k], nvars, var + 1)) for k in sorted(groups, reverse=True)]

    def __call__(self, point):
        if self.chunks is None:
            return self.const
        x = point[self.var]
        chunks = self.chunks
        acc = chunks[0][1](point)
        prev = chunks[0][0]
        for k, sub in chunks[1:]:
            acc = acc * x ** (prev - k) + sub(point)
            prev = k
        if prev:
            acc = acc * x ** prev
        return acc


class NumericForm:
    """Compiled evaluator; works on floats and numpy arrays.

    Coefficients are rounded once to ``dtype`` (double by default).
    """

    def __init__(self, e: Expr, dtype=float):
        n = len(e.ctx.names)
        self.nvars = n

        def coeff(c):
            if dtype is float:
                return float(c)
            return dtype(int(c.p)) / dtype(int(c.q))

        self.num = _Horner({tuple(map(int, m)): coeff(c) for m, c in e.num.terms()}, n)
        self.den = _Horner({tuple(map(int, m)): coeff(c) for m, c in e.den.terms()}, n)
        self.den_is_one = e.den.is_one()
        self.text = str(e)

    def __call__(self, point, eps: float = 1e-12):
        point = tuple(point)
        if len(point) != self.nvars:
            raise ValueError(f"expected {self.nvars} values, got {len(point)}")
        num = self.num(point)
        if self.den_is_one:
            return num
        den = self.den(point)
        if np.any(np.abs(den) <= eps):
            raise NumericPole(f"denominator of {self.text} is below {eps:g} at the evaluation point")
        return num / den


def eval_numeric(e: Expr, point: Iterable[float], eps: float = 1e-12) -> float:
    value = e.numeric()(tuple(float(p) for p in point), eps=eps)
    return float(value) + 0.0
