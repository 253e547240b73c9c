"""Tensor calculus over exact rational functions.

Index conventions (all arrays are nested tuples, indices 0-based):

* ``ContraMetric.g[i][j]`` is g^{ij}; :func:`invert_metric` returns g_{ij}.
* ``Connection.gamma_low[i][j][k]`` is Gamma^i_{jk} (symmetric in j, k) and
  ``Connection.gamma_contra[i][j][k]`` is Gamma^{ij}_k = g^{is} Gamma^j_{sk}.
* ``Curvature.R[i][j][k][l]`` is
  R^i_{jkl} = d_k Gamma^i_{lj} - d_l Gamma^i_{kj}
              + Gamma^i_{ks} Gamma^s_{lj} - Gamma^i_{ls} Gamma^s_{kj}.
"""

from __future__ import annotations

import functools
import itertools
import warnings
from dataclasses import dataclass, field
from typing import Callable, Iterator, Sequence

from .errors import ContextMismatch, DegenerateMetric, InvalidMap, NotFlat
from .expr import Context, Expr, as_expr, substitute

Matrix = tuple[tuple[Expr, ...], ...]
Tensor3 = tuple[tuple[tuple[Expr, ...], ...], ...]


class NotFlatWarning(UserWarning):
    pass


def _rng(n):
    return range(n)


def to_matrix(rows: Sequence[Sequence], ctx: Context) -> Matrix:
    m = tuple(tuple(as_expr(x, ctx) for x in row) for row in rows)
    if any(len(row) != len(m) for row in m):
        raise ValueError("matrix must be square")
    return m


def zeros3(ctx: Context, n: int) -> Tensor3:
    z = ctx.zero()
    return tuple(tuple(tuple(z for _ in _rng(n)) for _ in _rng(n)) for _ in _rng(n))


def matmul(a: Matrix, b: Matrix) -> Matrix:
    n = len(a)
    return tuple(
        tuple(sum((a[i][s] * b[s][j] for s in _rng(n)), a[0][0].ctx.zero()) for j in _rng(len(b[0])))
        for i in _rng(n)
    )


def transpose(a: Matrix) -> Matrix:
    return tuple(zip(*a))


def identity(ctx: Context, n: int | None = None) -> Matrix:
    n = ctx.dim if n is None else n
    return tuple(tuple(ctx.one() if i == j else ctx.zero() for j in _rng(n)) for i in _rng(n))


def determinant(a: Matrix) -> Expr:
    """Laplace expansion with memoised minors; keeps polynomial entries polynomial."""
    n = len(a)
    ctx = a[0][0].ctx
    memo: dict[tuple[int, tuple[int, ...]], Expr] = {}

    def minor(row: int, cols: tuple[int, ...]) -> Expr:
        if row == n:
            return ctx.one()
        key = (row, cols)
        if key not in memo:
            total = ctx.zero()
            for pos, c in enumerate(cols):
                entry = a[row][c]
                if entry.is_zero():
                    continue
                term = entry * minor(row + 1, cols[:pos] + cols[pos + 1:])
                total = total - term if pos % 2 else total + term
            memo[key] = total
        return memo[key]

    return minor(0, tuple(_rng(n)))


def inverse(a: Matrix) -> Matrix:
    n = len(a)
    det = determinant(a)
    if det.is_zero():
        raise DegenerateMetric("matrix is singular (determinant vanishes identically)")
    if n == 1:
        return ((1 / a[0][0],),)
    cof = [[None] * n for _ in _rng(n)]
    for i in _rng(n):
        for j in _rng(n):
            sub = tuple(tuple(a[r][c] for c in _rng(n) if c != j) for r in _rng(n) if r != i)
            m = determinant(sub)
            cof[i][j] = -m if (i + j) % 2 else m
    return tuple(tuple(cof[j][i] / det for j in _rng(n)) for i in _rng(n))


@dataclass(frozen=True)
class ContraMetric:
    """Contravariant metric g^{ij}."""

    g: Matrix

    def __post_init__(self):
        n = len(self.g)
        if n == 0 or any(len(row) != n for row in self.g):
            raise ValueError("metric must be a nonempty square matrix")
        ctx = self.g[0][0].ctx
        if any(x.ctx != ctx for row in self.g for x in row):
            raise ContextMismatch("metric entries live in different contexts")
        if n != ctx.dim:
            raise ValueError(f"{n}x{n} metric over {ctx.dim} coordinates")

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence], ctx: Context) -> "ContraMetric":
        return cls(to_matrix(rows, ctx))

    @classmethod
    def from_covariant(cls, rows: Sequence[Sequence], ctx: Context) -> "ContraMetric":
        return cls(inverse(to_matrix(rows, ctx)))

    @property
    def ctx(self) -> Context:
        return self.g[0][0].ctx

    @property
    def dim(self) -> int:
        return len(self.g)

    def is_symmetric(self) -> bool:
        n = self.dim
        return all(self.g[i][j] == self.g[j][i] for i in _rng(n) for j in _rng(i))

    def det(self) -> Expr:
        return determinant(self.g)

    def lift(self, ctx: Context) -> "ContraMetric":
        return ContraMetric(tuple(tuple(x.lift(ctx) for x in row) for row in self.g))

    def __add__(self, other: "ContraMetric") -> "ContraMetric":
        n = self.dim
        return ContraMetric(tuple(tuple(self.g[i][j] + other.g[i][j] for j in _rng(n)) for i in _rng(n)))

    def scaled(self, c) -> "ContraMetric":
        return ContraMetric(tuple(tuple(x * c for x in row) for row in self.g))


@dataclass(frozen=True)
class VectorField:
    components: tuple[Expr, ...]

    @classmethod
    def from_list(cls, items: Sequence, ctx: Context) -> "VectorField":
        return cls(tuple(as_expr(x, ctx) for x in items))

    @property
    def ctx(self) -> Context:
        return self.components[0].ctx

    def __len__(self):
        return len(self.components)

    def __getitem__(self, i) -> Expr:
        return self.components[i]

    def __iter__(self):
        return iter(self.components)

    def __neg__(self) -> "VectorField":
        return VectorField(tuple(-x for x in self.components))

    def is_zero(self) -> bool:
        return all(x.is_zero() for x in self.components)


@dataclass(frozen=True)
class Connection:
    gamma_low: Tensor3
    gamma_contra: Tensor3
    metric: ContraMetric
    g_low: Matrix


@dataclass(frozen=True)
class Curvature:
    R: tuple

    def is_zero(self) -> bool:
        return all(x.is_zero() for x in itertools.chain.from_iterable(
            itertools.chain.from_iterable(itertools.chain.from_iterable(self.R))))


@dataclass(frozen=True)
class Flatness:
    flat: bool
    witness: tuple[int, int, int, int, Expr] | None = None

    def __bool__(self):
        return self.flat

    def describe(self) -> str:
        if self.flat:
            return "flat"
        i, j, k, l, value = self.witness
        return f"R^{i + 1}_{j + 1}{k + 1}{l + 1} = {value}"


# --- connection and curvature ------------------------------------------------------

def invert_metric(g: ContraMetric) -> Matrix:
    try:
        return inverse(g.g)
    except DegenerateMetric:
        raise DegenerateMetric("metric is degenerate: det g^{ij} vanishes identically") from None


def christoffel(g: ContraMetric) -> Connection:
    """Levi-Civita connection, computed directly from the contravariant metric.

    Gamma^{ij}_k = 1/2 g_{ks} (A^{jsi} - A^{sij} - A^{isj}) with
    A^{abc} = g^{at} d_t g^{bc}; this needs one matrix inverse and no
    derivatives of it.
    """
    ctx, n = g.ctx, g.dim
    low = invert_metric(g)
    dg = [[[g.g[b][c].diff(ctx.coords[t]) for t in _rng(n)] for c in _rng(n)] for b in _rng(n)]
    A = [[[sum((g.g[a][t] * dg[b][c][t] for t in _rng(n)), ctx.zero())
           for c in _rng(n)] for b in _rng(n)] for a in _rng(n)]
    half = ctx.const(1) / 2
    S = [[[(A[k][i][j] - A[i][k][j] - A[j][k][i]) * half
           for k in _rng(n)] for j in _rng(n)] for i in _rng(n)]
    # S[s][i][j] = g^{st} Gamma^{ij}_t  (symmetric in s, i)
    contra = tuple(tuple(tuple(sum((low[k][s] * S[s][i][j] for s in _rng(n)), ctx.zero())
                               for k in _rng(n)) for j in _rng(n)) for i in _rng(n))
    gamma = tuple(tuple(tuple(sum((low[j][s] * contra[s][i][k] for s in _rng(n)), ctx.zero())
                              for k in _rng(n)) for j in _rng(n)) for i in _rng(n))
    return Connection(gamma, contra, g, low)


def _curvature_components(conn: Connection) -> Iterator[tuple[int, int, int, int, Callable[[], Expr], bool]]:
    """Yields R^i_{jkl} for k < l in lexicographic (i, j, k, l) order.

    Work happens on polynomial numerators over the common denominator D of
    the Christoffel symbols, so R D^2 is a polynomial and no gcd is needed
    until a component is actually materialised.  Each item carries a thunk
    building the component and a flag telling whether it vanishes.
    """
    G = conn.gamma_low
    n = len(G)
    ctx = conn.metric.ctx
    D = None
    for x in itertools.chain.from_iterable(itertools.chain.from_iterable(G)):
        if D is None:
            D = x.den
        elif not x.den.is_one():
            D = D * (x.den / D.gcd(x.den))
    N = [[[x.num * (D / x.den) for x in row] for row in plane] for plane in G]
    dD = [D.derivative(k) for k in _rng(n)]
    D2 = D * D
    dN: dict[tuple[int, int, int, int], object] = {}

    def d(k, i, l, j):
        key = (k, i, l, j)
        if key not in dN:
            dN[key] = N[i][l][j].derivative(k)
        return dN[key]

    for i, j, k in itertools.product(_rng(n), repeat=3):
        for l in range(k + 1, n):
            top = D * (d(k, i, l, j) - d(l, i, k, j)) - N[i][l][j] * dD[k] + N[i][k][j] * dD[l]
            for s in _rng(n):
                top = top + N[i][k][s] * N[s][l][j] - N[i][l][s] * N[s][k][j]
            yield i, j, k, l, functools.partial(Expr, ctx, top, D2), top.is_zero()


def riemann(g: ContraMetric, conn: Connection | None = None) -> Curvature:
    conn = conn or christoffel(g)
    n = g.dim
    zero = g.ctx.zero()
    R = [[[[zero] * n for _ in _rng(n)] for _ in _rng(n)] for _ in _rng(n)]
    for i, j, k, l, build, vanishes in _curvature_components(conn):
        value = zero if vanishes else build()
        R[i][j][k][l] = value
        R[i][j][l][k] = -value
    return Curvature(tuple(tuple(tuple(tuple(r) for r in rk) for rk in rj) for rj in R))


def is_flat(g: ContraMetric, conn: Connection | None = None) -> Flatness:
    conn = conn or christoffel(g)
    for i, j, k, l, build, vanishes in _curvature_components(conn):
        if not vanishes:
            return Flatness(False, (i, j, k, l, build()))
    return Flatness(True)


# --- Lie derivatives -----------------------------------------------------------------

def lie_metric(g: ContraMetric, X: VectorField) -> Matrix:
    ctx, n = g.ctx, g.dim
    c = ctx.coords
    dX = [[X[i].diff(c[s]) for s in _rng(n)] for i in _rng(n)]
    out = []
    for i in _rng(n):
        row = []
        for j in _rng(n):
            value = ctx.zero()
            for s in _rng(n):
                value = value + X[s] * g.g[i][j].diff(c[s]) - g.g[s][j] * dX[i][s] - g.g[i][s] * dX[j][s]
            row.append(value)
        out.append(tuple(row))
    return tuple(out)


def lie_bracket(X: VectorField, Y: VectorField) -> VectorField:
    ctx = X.ctx
    n = len(X)
    c = ctx.coords
    return VectorField(tuple(
        sum((X[s] * Y[i].diff(c[s]) - Y[s] * X[i].diff(c[s]) for s in _rng(n)), ctx.zero())
        for i in _rng(n)
    ))


# --- coordinate changes ----------------------------------------------------------------

@dataclass(frozen=True)
class CoordinateMap:
    """Change of coordinates old -> new with both directions supplied.

    ``forward[s]`` expresses the new coordinate s in terms of the old
    coordinates; ``inverse[i]`` expresses old coordinate i in terms of the
    new ones.  Construction verifies both round trips and the Jacobian.
    """

    old: Context
    new: Context
    forward: tuple[Expr, ...]
    inverse: tuple[Expr, ...]
    jacobian: Matrix = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        fwd = tuple(as_expr(x, self.old) for x in self.forward)
        inv = tuple(as_expr(x, self.new) for x in self.inverse)
        object.__setattr__(self, "forward", fwd)
        object.__setattr__(self, "inverse", inv)
        n = self.old.dim
        if self.new.dim != n or len(fwd) != n or len(inv) != n:
            raise InvalidMap("coordinate map dimensions do not match")
        to_new = dict(zip(self.old.coords, inv))
        to_old = dict(zip(self.new.coords, fwd))
        for s, f in enumerate(fwd):
            if substitute(f, to_new, self.new) != self.new.var(self.new.coords[s]):
                raise InvalidMap(f"forward∘inverse is not the identity in component {s + 1}")
        for i, v in enumerate(inv):
            if substitute(v, to_old, self.old) != self.old.var(self.old.coords[i]):
                raise InvalidMap(f"inverse∘forward is not the identity in component {i + 1}")
        jac = tuple(tuple(f.diff(c) for c in self.old.coords) for f in fwd)
        if determinant(jac).is_zero():
            raise InvalidMap("Jacobian determinant vanishes identically")
        object.__setattr__(self, "jacobian", jac)

    @classmethod
    def from_strings(cls, old: Context, new: Context, forward: Sequence[str], inverse: Sequence[str]):
        return cls(old, new, tuple(as_expr(x, old) for x in forward), tuple(as_expr(x, new) for x in inverse))

    def to_new(self, e: Expr) -> Expr:
        """Rewrite an old-coordinate expression in new coordinates."""
        return substitute(e, dict(zip(self.old.coords, self.inverse)), self.new)

    def inverse_jacobian(self) -> Matrix:
        """d old^k / d new^q as expressions in the new coordinates."""
        return tuple(tuple(v.diff(c) for c in self.new.coords) for v in self.inverse)

    def reversed(self) -> "CoordinateMap":
        return CoordinateMap(self.new, self.old, self.inverse, self.forward)


def pushforward_metric(g: ContraMetric, phi: CoordinateMap) -> ContraMetric:
    if g.ctx != phi.old:
        raise ContextMismatch("metric is not expressed in the map's old coordinates")
    J = phi.jacobian
    G = matmul(matmul(J, g.g), transpose(J))
    return ContraMetric(tuple(tuple(phi.to_new(x) for x in row) for row in G))


def pushforward_vector(X: VectorField, phi: CoordinateMap) -> VectorField:
    J = phi.jacobian
    n = len(X)
    ctx = phi.old
    return VectorField(tuple(
        phi.to_new(sum((J[s][i] * X[i].lift(ctx) for i in _rng(n)), ctx.zero())) for s in _rng(n)
    ))


# --- second covariant derivative -------------------------------------------------------

def covariant_hessian(g2: ContraMetric, f: VectorField, conn: Connection | None = None,
                      check_flat: bool = True) -> Tensor3:
    """H[i][j][k] = nabla^i nabla^j f^k with indices raised by g2."""
    ctx, n = g2.ctx, g2.dim
    c = ctx.coords
    conn = conn or christoffel(g2)
    if check_flat and not is_flat(g2, conn):
        warnings.warn("covariant_hessian: metric is not flat", NotFlatWarning, stacklevel=2)
    G = conn.gamma_low
    zero = ctx.zero()
    # T[k][s] = nabla_s f^k
    T = [[f[k].diff(c[s]) + sum((G[k][s][a] * f[a] for a in _rng(n)), zero) for s in _rng(n)]
         for k in _rng(n)]
    # U[k][p][s] = nabla_p nabla_s f^k
    U = [[[T[k][s].diff(c[p])
           + sum((G[k][p][a] * T[a][s] for a in _rng(n)), zero)
           - sum((G[a][p][s] * T[k][a] for a in _rng(n)), zero)
           for s in _rng(n)] for p in _rng(n)] for k in _rng(n)]
    gg = g2.g
    out = []
    for i in _rng(n):
        plane = []
        for j in _rng(n):
            row = []
            for k in _rng(n):
                value = zero
                for p in _rng(n):
                    if gg[i][p].is_zero():
                        continue
                    for s in _rng(n):
                        value = value + gg[i][p] * gg[j][s] * U[k][p][s]
                row.append(value)
            plane.append(tuple(row))
        out.append(tuple(plane))
    return tuple(out)


def require_flat(g: ContraMetric, name: str = "metric", conn: Connection | None = None) -> None:
    flat = is_flat(g, conn)
    if not flat:
        raise NotFlat(f"{name} is not flat: {flat.describe()}")
