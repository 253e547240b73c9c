"""Exact integration of polynomial gradients (closed 1-forms) on R^N."""

from __future__ import annotations

from typing import Sequence

import flint

from .errors import NonPolynomial, NotExact
from .expr import Expr


def _restrict_integrate(e: Expr, k: int) -> Expr:
    """int_0^{v_k} e(v_1, .., v_{k-1}, t, 0, .., 0) dt for a polynomial e."""
    ctx = e.ctx
    ring = ctx.ring
    n = ctx.dim
    terms = {}
    for monom, coeff in e.num.terms():
        if any(monom[i] for i in range(k + 1, n)):
            continue
        new = list(monom)
        new[k] += 1
        terms[tuple(new)] = coeff / flint.fmpq(new[k])
    return Expr(ctx, ring.from_dict(terms))


def integrate_gradient(w: Sequence[Expr]) -> Expr:
    """Potential F with dF/dv^k = w[k] and F(0) = 0.

    Raises NotExact when the mixed partials of ``w`` disagree and
    NonPolynomial when some component has a nontrivial denominator.
    """
    if not w:
        raise ValueError("empty covector")
    ctx = w[0].ctx
    n = ctx.dim
    if len(w) != n:
        raise ValueError(f"expected {n} components, got {len(w)}")
    for k, x in enumerate(w):
        if not x.is_polynomial():
            raise NonPolynomial(f"component {k + 1} ({x}) is not polynomial")
    c = ctx.coords
    for k in range(n):
        for l in range(k + 1, n):
            if w[k].diff(c[l]) != w[l].diff(c[k]):
                raise NotExact(
                    f"d_{l + 1} w_{k + 1} = {w[k].diff(c[l])} differs from d_{k + 1} w_{l + 1} = {w[l].diff(c[k])}")
    total = ctx.zero()
    for k in range(n):
        total = total + _restrict_integrate(w[k], k)
    return total
