"""Recursion operator hierarchy of hydrodynamic-type flows.

A flow ``v^i_t = M^i_k(v) v^k_x`` is a :class:`HydroFlow`.  Every flow of
the hierarchy built here is in conservation form, ``v_t = (F(v))_x``, and
carries its potential ``F``; the inverse of ``d/dx`` is only ever applied
to such x-exact arguments and with integration constant zero.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .errors import NonPolynomial, NotExact
from .expr import Context, Expr
from .geometry import ContraMetric, Matrix, VectorField, inverse
from .operators import DNOperator, _check_eta, from_h
from .polyint import integrate_gradient


def _rng(n):
    return range(n)


@dataclass(frozen=True)
class HydroFlow:
    M: Matrix
    potential: VectorField | None = None

    def __post_init__(self):
        if self.potential is not None:
            c = self.ctx.coords
            for i, Fi in enumerate(self.potential):
                for k in _rng(len(self.M)):
                    if Fi.diff(c[k]) != self.M[i][k]:
                        raise ValueError(f"potential component {i + 1} does not generate row {i + 1} of M")

    @property
    def ctx(self) -> Context:
        return self.M[0][0].ctx

    @property
    def dim(self) -> int:
        return len(self.M)

    def is_zero(self) -> bool:
        return all(x.is_zero() for row in self.M for x in row)

    def same_matrix(self, other: "HydroFlow") -> bool:
        return all(a == b for ra, rb in zip(self.M, other.M) for a, b in zip(ra, rb))

    def rows(self) -> list[list[str]]:
        return [[str(x) for x in row] for row in self.M]


@dataclass(frozen=True)
class Density:
    """Zeroth-order density rho(v) of the functional int rho dx."""

    rho: Expr


def variational_derivative(density: Density | Expr) -> list[Expr]:
    rho = density.rho if isinstance(density, Density) else density
    return [rho.diff(c) for c in rho.ctx.coords]


def apply_dn(P: DNOperator, phi: Sequence[Expr]) -> HydroFlow:
    """The flow P^{ij} phi_j for a covector phi(v)."""
    n, ctx = P.dim, P.ctx
    c = ctx.coords
    zero = ctx.zero()
    dphi = [[phi[j].diff(c[k]) for k in _rng(n)] for j in _rng(n)]
    M = tuple(tuple(sum((P.g[i][j] * dphi[j][k] + P.b[i][j][k] * phi[j] for j in _rng(n)), zero)
                    for k in _rng(n)) for i in _rng(n))
    return HydroFlow(M)


def integrate_flow(M: Matrix) -> VectorField:
    """Potential F with dF^i/dv^k = M^i_k and F(0) = 0."""
    out = []
    for i, row in enumerate(M):
        try:
            out.append(integrate_gradient(list(row)))
        except NotExact as exc:
            raise NotExact(f"row {i + 1} of the flow is not x-exact: {exc}") from None
        except NonPolynomial as exc:
            raise NonPolynomial(f"row {i + 1}: {exc}") from None
    return VectorField(tuple(out))


def _lower(eta_low: Matrix, F: Sequence[Expr]) -> list[Expr]:
    n = len(F)
    zero = F[0].ctx.zero()
    return [sum((eta_low[j][l] * F[l] for l in _rng(n)), zero) for j in _rng(n)]


def translation_potential(ctx: Context) -> VectorField:
    return VectorField(tuple(ctx.coord_vars()))


def recursion_step(eta: ContraMetric, h: VectorField, F: VectorField) -> HydroFlow:
    """Recursion operator applied to the flow (F)_x: P1 applied to eta_{jl} F^l."""
    eta_low = _check_eta(eta)
    return apply_dn(from_h(eta, h), _lower(eta_low, list(F)))


def first_flow_closed_form(eta: ContraMetric, h: VectorField) -> HydroFlow:
    eta_low = _check_eta(eta)
    n, ctx = eta.dim, eta.ctx
    c = ctx.coords
    zero = ctx.zero()
    v = ctx.coord_vars()
    dh = [[h[j].diff(c[s]) for s in _rng(n)] for j in _rng(n)]
    # w_s = (d h^j / d v^s) eta_{jl} v^l
    w = [sum((dh[j][s] * eta_low[j][l] * v[l] for j in _rng(n) for l in _rng(n)), zero) for s in _rng(n)]
    F = tuple(h[i] + sum((eta.g[i][s] * w[s] for s in _rng(n)), zero) for i in _rng(n))
    M = tuple(tuple(F[i].diff(c[k]) for k in _rng(n)) for i in _rng(n))
    return HydroFlow(M, VectorField(F))


def second_flow_closed_form(eta: ContraMetric, h: VectorField) -> HydroFlow:
    """The t2 flow written out in terms of h and its first two derivatives."""
    eta_low = _check_eta(eta)
    n, ctx = eta.dim, eta.ctx
    c = ctx.coords
    zero = ctx.zero()
    v = ctx.coord_vars()
    e, el = eta.g, eta_low
    R = _rng(n)
    dh = [[h[j].diff(c[s]) for s in R] for j in R]
    d2 = [[[dh[j][s].diff(c[k]) for k in R] for s in R] for j in R]
    # G^{ij} = eta^{is} d_s h^j + eta^{js} d_s h^i
    A = [[sum((e[i][s] * dh[j][s] for s in R), zero) for j in R] for i in R]
    G = [[A[i][j] + A[j][i] for j in R] for i in R]
    # X_{jk} = eta_{jl} d_k h^l + eta_{rk} d_j h^r + eta_{rq} v^q d_j d_k h^r
    ev = [sum((el[r][q] * v[q] for q in R), zero) for r in R]
    X = [[sum((el[j][l] * dh[l][k] for l in R), zero) + sum((el[r][k] * dh[r][j] for r in R), zero)
          + sum((ev[r] * d2[r][j][k] for r in R), zero) for k in R] for j in R]
    # Y_j = eta_{jl} h^l + eta_{rq} v^q d_j h^r
    Y = [sum((el[j][l] * h[l] for l in R), zero) + sum((ev[r] * dh[r][j] for r in R), zero) for j in R]
    # B^{ij}_k = eta^{is} d_s d_k h^j
    M = tuple(tuple(
        sum((G[i][j] * X[j][k] for j in R), zero)
        + sum((e[i][s] * d2[j][s][k] * Y[j] for j in R for s in R), zero)
        for k in R) for i in R)
    return HydroFlow(M)


@dataclass(frozen=True)
class Hierarchy:
    flows: tuple[HydroFlow, ...]
    failed_step: int | None = None
    reason: str | None = None

    @property
    def complete(self) -> bool:
        return self.failed_step is None


def build_hierarchy(eta: ContraMetric, h: VectorField, n: int) -> Hierarchy:
    """Flows t_1..t_n by repeated recursion from the translation flow.

    Each new flow must be x-exact for the next step to be defined; the
    first step where that fails is returned in ``failed_step``.
    """
    if n < 1:
        raise ValueError("need at least one flow")
    F = translation_potential(eta.ctx)
    flows = []
    for step in range(1, n + 1):
        flow = recursion_step(eta, h, F)
        try:
            F = integrate_flow(flow.M)
        except (NotExact, NonPolynomial) as exc:
            return Hierarchy(tuple(flows), step, str(exc))
        flows.append(HydroFlow(flow.M, F))
    return Hierarchy(tuple(flows))


# --- bi-Hamiltonian certificates ---------------------------------------------------------

@dataclass(frozen=True)
class BiHamiltonianReport:
    p2_ok: bool
    p1_ok: bool | None  # None when the P1 representation was not attempted
    h2_density: Expr | None
    h1_density: Expr | None
    note: str = ""

    @property
    def verdict(self) -> bool:
        return self.p2_ok and self.p1_ok is not False


def h1_density(eta: ContraMetric) -> Expr:
    eta_low = inverse(eta.g)
    v = eta.ctx.coord_vars()
    n = eta.dim
    return sum((eta_low[j][l] * v[j] * v[l] for j in _rng(n) for l in _rng(n)), eta.ctx.zero()) / 2


def h2_density(eta: ContraMetric, h: VectorField) -> Expr:
    eta_low = inverse(eta.g)
    v = eta.ctx.coord_vars()
    n = eta.dim
    return sum((eta_low[j][k] * h[k] * v[j] for j in _rng(n) for k in _rng(n)), eta.ctx.zero())


def recover_p2_density(flow: HydroFlow, eta: ContraMetric) -> Expr | None:
    """Density rho with flow = eta d/dx (grad rho), or None if there is none.

    With F the potential, this asks for grad rho = eta^{-1} F, which a
    polynomial rho (of degree at most deg F + 1) solves exactly when the
    covector is closed.
    """
    F = flow.potential or integrate_flow(flow.M)
    w = _lower(inverse(eta.g), list(F))
    try:
        return integrate_gradient(w)
    except (NotExact, NonPolynomial):
        return None


def bihamiltonian_check(flow: HydroFlow, eta: ContraMetric, h: VectorField, first: bool = True) -> BiHamiltonianReport:
    """Certify the two Hamiltonian representations of a hierarchy flow.

    For the first flow both the P2 (H2 density) and the P1 (H1 density)
    representations are checked.  For later flows only a P2 representation
    is searched for, with a recovered density.
    """
    if flow.potential is None:
        flow = HydroFlow(flow.M, integrate_flow(flow.M))
    P2 = DNOperator.constant(eta)
    if first:
        d2 = h2_density(eta, h)
        d1 = h1_density(eta)
        p2 = apply_dn(P2, variational_derivative(d2)).same_matrix(flow)
        p1 = apply_dn(from_h(eta, h), variational_derivative(d1)).same_matrix(flow)
        return BiHamiltonianReport(p2, p1, d2, d1)
    rho = recover_p2_density(flow, eta)
    if rho is None:
        return BiHamiltonianReport(False, None, None, None, "NotFound: no polynomial P2 density")
    ok = apply_dn(P2, variational_derivative(rho)).same_matrix(flow)
    return BiHamiltonianReport(ok, None, rho, None, "P1 representation not attempted beyond the first flow")
