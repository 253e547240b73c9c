"""First-order Hamiltonian operators of hydrodynamic type.

An operator ``P = g^{ij} d/dx + b^{ij}_k u^k_x`` is stored as the pair
``(g, b)`` with ``b[i][j][k] = b^{ij}_k``.  The functions here decide
Hamiltonicity, compatibility with a constant operator ``eta d/dx`` and of
pairs of metrics, and compute Lie derivatives of operators along vector
fields.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

from .errors import (
    DegenerateMetric,
    DegeneratePencil,
    GMismatch,
    NonConstantEta,
    NonPolynomial,
    NotExact,
    NotIntegrable,
)
from .expr import Context, Expr
from .geometry import (
    ContraMetric,
    CoordinateMap,
    Matrix,
    Tensor3,
    VectorField,
    christoffel,
    covariant_hessian,
    inverse,
    is_flat,
    lie_bracket,
    lie_metric,
    require_flat,
)
from .polyint import integrate_gradient

LAMBDA = "lambda"


def _rng(n):
    return range(n)


@dataclass(frozen=True)
class DNOperator:
    g: Matrix
    b: Tensor3

    @property
    def ctx(self) -> Context:
        return self.g[0][0].ctx

    @property
    def dim(self) -> int:
        return len(self.g)

    @property
    def metric(self) -> ContraMetric:
        return ContraMetric(self.g)

    @classmethod
    def constant(cls, eta: ContraMetric) -> "DNOperator":
        n = eta.dim
        z = eta.ctx.zero()
        return cls(eta.g, tuple(tuple(tuple(z for _ in _rng(n)) for _ in _rng(n)) for _ in _rng(n)))

    def is_zero(self) -> bool:
        return all(x.is_zero() for x in self.entries())

    def entries(self):
        yield from itertools.chain.from_iterable(self.g)
        for plane in self.b:
            for row in plane:
                yield from row

    def __add__(self, other: "DNOperator") -> "DNOperator":
        n = self.dim
        return DNOperator(
            tuple(tuple(self.g[i][j] + other.g[i][j] for j in _rng(n)) for i in _rng(n)),
            tuple(tuple(tuple(self.b[i][j][k] + other.b[i][j][k] for k in _rng(n))
                        for j in _rng(n)) for i in _rng(n)),
        )

    def __sub__(self, other: "DNOperator") -> "DNOperator":
        return self + other.scaled(-1)

    def scaled(self, c) -> "DNOperator":
        return DNOperator(
            tuple(tuple(x * c for x in row) for row in self.g),
            tuple(tuple(tuple(x * c for x in row) for row in plane) for plane in self.b),
        )

    def differences(self, other: "DNOperator") -> list[tuple[str, Expr]]:
        """Named nonzero entries of ``self - other``."""
        n = self.dim
        out = []
        for i, j in itertools.product(_rng(n), repeat=2):
            d = self.g[i][j] - other.g[i][j]
            if not d.is_zero():
                out.append((f"g^{i + 1}{j + 1}", d))
        for i, j, k in itertools.product(_rng(n), repeat=3):
            d = self.b[i][j][k] - other.b[i][j][k]
            if not d.is_zero():
                out.append((f"b^{i + 1}{j + 1}_{k + 1}", d))
        return out


def _tensor3(fn, n) -> Tensor3:
    return tuple(tuple(tuple(fn(i, j, k) for k in _rng(n)) for j in _rng(n)) for i in _rng(n))


# --- Hamiltonicity of a single operator ----------------------------------------------------

@dataclass(frozen=True)
class HamiltonianReport:
    symmetric: bool
    skew_ok: bool
    nondegenerate: bool
    torsionless_compatible: bool | None
    flat: bool | None
    witnesses: tuple[str, ...] = ()

    @property
    def verdict(self) -> bool | None:
        """True/False, or None when the operator is degenerate (undecided here)."""
        if not (self.symmetric and self.skew_ok):
            return False
        if not self.nondegenerate:
            return None
        return bool(self.torsionless_compatible and self.flat)

    @property
    def decided(self) -> bool:
        return self.verdict is not None


def from_metric(g: ContraMetric) -> DNOperator:
    conn = christoffel(g)
    return DNOperator(g.g, _tensor3(lambda i, j, k: -conn.gamma_contra[i][j][k], g.dim))


def is_hamiltonian(P: DNOperator) -> HamiltonianReport:
    n, ctx = P.dim, P.ctx
    witnesses = []
    symmetric = True
    for i in _rng(n):
        for j in range(i + 1, n):
            if P.g[i][j] != P.g[j][i]:
                symmetric = False
                witnesses.append(f"g^{i + 1}{j + 1} - g^{j + 1}{i + 1} = {P.g[i][j] - P.g[j][i]}")
                break
        if not symmetric:
            break
    skew_ok = True
    for i, j, k in itertools.product(_rng(n), repeat=3):
        r = P.b[i][j][k] + P.b[j][i][k] - P.g[i][j].diff(ctx.coords[k])
        if not r.is_zero():
            skew_ok = False
            witnesses.append(f"b^{i + 1}{j + 1}_{k + 1} + b^{j + 1}{i + 1}_{k + 1} - d_{k + 1} g^{i + 1}{j + 1} = {r}")
            break
    metric = ContraMetric(P.g)
    nondegenerate = not metric.det().is_zero()
    if not nondegenerate:
        witnesses.append("det g vanishes identically: the Dubrovin-Novikov criterion does not apply")
        return HamiltonianReport(symmetric, skew_ok, False, None, None, tuple(witnesses))
    conn = christoffel(metric)
    compatible = True
    for i, j, k in itertools.product(_rng(n), repeat=3):
        r = P.b[i][j][k] + conn.gamma_contra[i][j][k]
        if not r.is_zero():
            compatible = False
            witnesses.append(f"b^{i + 1}{j + 1}_{k + 1} + g^{i + 1}s Gamma^{j + 1}_s{k + 1} = {r}")
            break
    flat = is_flat(metric, conn)
    if not flat:
        witnesses.append(f"curvature {flat.describe()}")
    return HamiltonianReport(symmetric, skew_ok, True, compatible, flat.flat, tuple(witnesses))


# --- operators in flat coordinates of eta --------------------------------------------------

def _check_eta(eta: ContraMetric) -> Matrix:
    if any(not x.is_constant() for row in eta.g for x in row):
        raise NonConstantEta("eta must have constant entries")
    if not eta.is_symmetric():
        raise NonConstantEta("eta must be symmetric")
    if eta.det().is_zero():
        raise DegenerateMetric("eta is degenerate")
    return inverse(eta.g)


def from_h(eta: ContraMetric, h: VectorField) -> DNOperator:
    """Operator with g = eta dh + (eta dh)^T and b^{ij}_k = eta^{is} d_s d_k h^j."""
    _check_eta(eta)
    n, c = eta.dim, eta.ctx.coords
    dh = [[h[j].diff(c[s]) for s in _rng(n)] for j in _rng(n)]
    e = eta.g
    zero = eta.ctx.zero()
    A = [[sum((e[i][s] * dh[j][s] for s in _rng(n)), zero) for j in _rng(n)] for i in _rng(n)]
    g = tuple(tuple(A[i][j] + A[j][i] for j in _rng(n)) for i in _rng(n))
    b = _tensor3(lambda i, j, k: sum((e[i][s] * dh[j][s].diff(c[k]) for s in _rng(n)), zero), n)
    return DNOperator(g, b)


def lie_operator(P: DNOperator, xi: VectorField) -> DNOperator:
    n, ctx = P.dim, P.ctx
    c = ctx.coords
    zero = ctx.zero()
    dxi = [[xi[i].diff(c[s]) for s in _rng(n)] for i in _rng(n)]
    ddxi = [[[dxi[j][s].diff(c[k]) for k in _rng(n)] for s in _rng(n)] for j in _rng(n)]
    g, b = P.g, P.b

    def g_part(i, j):
        v = zero
        for s in _rng(n):
            v = v + xi[s] * g[i][j].diff(c[s]) - g[s][j] * dxi[i][s] - g[i][s] * dxi[j][s]
        return v

    def b_part(i, j, k):
        v = zero
        for s in _rng(n):
            v = (v + xi[s] * b[i][j][k].diff(c[s]) - b[s][j][k] * dxi[i][s] - b[i][s][k] * dxi[j][s]
                 + b[i][j][s] * dxi[s][k] - g[i][s] * ddxi[j][s][k])
        return v

    return DNOperator(tuple(tuple(g_part(i, j) for j in _rng(n)) for i in _rng(n)), _tensor3(b_part, n))


def lie2_vanishes(P: DNOperator, xi: VectorField) -> bool:
    return lie_operator(lie_operator(P, xi), xi).is_zero()


@dataclass(frozen=True)
class HResiduals:
    quadratic: tuple  # [j][i][k][l]
    mixed: tuple  # [i][j][r]

    @property
    def all_zero(self) -> bool:
        return not self.nonzero(1)

    def nonzero(self, limit: int | None = None) -> list[tuple[str, Expr]]:
        out = []
        n = len(self.mixed)
        for j, i, k, l in itertools.product(_rng(n), repeat=4):
            x = self.quadratic[j][i][k][l]
            if not x.is_zero():
                out.append((f"quadratic[j={j + 1},i={i + 1},k={k + 1},l={l + 1}]", x))
                if limit and len(out) >= limit:
                    return out
        for i, j, r in itertools.product(_rng(n), repeat=3):
            x = self.mixed[i][j][r]
            if not x.is_zero():
                out.append((f"mixed[i={i + 1},j={j + 1},r={r + 1}]", x))
                if limit and len(out) >= limit:
                    return out
        return out


def hamiltonicity_residuals(eta: ContraMetric, h: VectorField) -> HResiduals:
    """Left minus right sides of the two Hamiltonicity conditions for from_h(eta, h)."""
    _check_eta(eta)
    n, c = eta.dim, eta.ctx.coords
    zero = eta.ctx.zero()
    e = eta.g
    dh = [[h[j].diff(c[s]) for s in _rng(n)] for j in _rng(n)]
    d2 = [[[dh[j][s].diff(c[k]) for k in _rng(n)] for s in _rng(n)] for j in _rng(n)]

    def q(j, i, k, l):
        # eta^{sr} d_s d_i h^j  d_l d_r h^k
        return sum((e[s][r] * d2[j][s][i] * d2[k][l][r]
                    for s in _rng(n) for r in _rng(n) if not e[s][r].is_zero()), zero)

    quadratic = tuple(tuple(tuple(tuple(q(j, i, k, l) - q(k, i, j, l) for l in _rng(n))
                            for k in _rng(n)) for i in _rng(n)) for j in _rng(n))
    # C[i][s] = eta^{ip} d_p h^s + eta^{sp} d_p h^i ;  W[j][s][r] = eta^{jl} d_l d_s h^r
    C = [[sum((e[i][p] * dh[s][p] + e[s][p] * dh[i][p] for p in _rng(n)), zero) for s in _rng(n)]
         for i in _rng(n)]
    W = [[[sum((e[j][l] * d2[r][l][s] for l in _rng(n)), zero) for r in _rng(n)] for s in _rng(n)]
         for j in _rng(n)]

    def t(i, j, r):
        return sum((C[i][s] * W[j][s][r] for s in _rng(n)), zero)

    mixed = _tensor3(lambda i, j, r: t(i, j, r) - t(j, i, r), n)
    return HResiduals(quadratic, mixed)


# --- pencils -------------------------------------------------------------------------------

@dataclass(frozen=True)
class PencilReport:
    lambda_flat: bool
    gamma_linear: bool
    witnesses: tuple[str, ...] = ()

    @property
    def verdict(self) -> bool:
        return self.lambda_flat and self.gamma_linear


def compat_pencil_check(g1: ContraMetric, g2: ContraMetric) -> PencilReport:
    """Flat-pencil test for g1 + lambda g2 with lambda symbolic."""
    if g1.ctx != g2.ctx:
        g1, g2 = g1, g2.lift(g1.ctx)
    if not (g1.is_symmetric() and g2.is_symmetric()):
        raise DegeneratePencil("pencil metrics must be symmetric")
    ctx = g1.ctx.with_params(LAMBDA)
    lam = ctx.var(LAMBDA)
    pencil = g1.lift(ctx) + g2.lift(ctx).scaled(lam)
    if pencil.det().is_zero():
        raise DegeneratePencil("g1 + lambda g2 is degenerate for generic lambda")
    c1, c2 = christoffel(g1), christoffel(g2)
    cp = christoffel(pencil)
    n = g1.dim
    witnesses = []
    gamma_linear = True
    for i, j, k in itertools.product(_rng(n), repeat=3):
        r = cp.gamma_contra[i][j][k] - c1.gamma_contra[i][j][k].lift(ctx) - lam * c2.gamma_contra[i][j][k].lift(ctx)
        if not r.is_zero():
            gamma_linear = False
            witnesses.append(f"Gamma^{i + 1}{j + 1}_{k + 1}(lambda) - Gamma1 - lambda Gamma2 = {r}")
            break
    flat = is_flat(pencil, cp)
    if not flat:
        witnesses.append(f"pencil curvature {flat.describe()}")
    return PencilReport(flat.flat, gamma_linear, tuple(witnesses))


# --- Dubrovin's tensor and flat pencils from a vector field ----------------------------------

def _lower_first(g2_low: Matrix, T: Tensor3) -> Tensor3:
    """T^{ij}_k = g2_{ks} T^{sij}."""
    n = len(T)
    zero = g2_low[0][0].ctx.zero()
    return _tensor3(lambda i, j, k: sum((g2_low[k][s] * T[s][i][j] for s in _rng(n)), zero), n)


@dataclass(frozen=True)
class DeltaTensor:
    upper: Tensor3  # Delta^{ijk}
    lowered: Tensor3  # Delta^{ij}_k


def dubrovin_delta(g1: ContraMetric, g2: ContraMetric) -> DeltaTensor:
    n = g1.dim
    c1, c2 = christoffel(g1), christoffel(g2)
    zero = g1.ctx.zero()
    # Gamma2^k_{ps} - Gamma1^k_{ps}
    D = [[[c2.gamma_low[k][p][s] - c1.gamma_low[k][p][s] for s in _rng(n)] for p in _rng(n)] for k in _rng(n)]

    def delta(i, j, k):
        v = zero
        for s in _rng(n):
            if g1.g[i][s].is_zero():
                continue
            for p in _rng(n):
                if not g2.g[j][p].is_zero():
                    v = v + g1.g[i][s] * g2.g[j][p] * D[k][p][s]
        return v

    upper = _tensor3(delta, n)
    return DeltaTensor(upper, _lower_first(c2.g_low, upper))


@dataclass(frozen=True)
class FlatPencilResult:
    g1: ContraMetric
    hessian: Tensor3  # nabla^i nabla^j f^k
    delta_product_ok: bool
    hessian_balance_ok: bool
    nondegenerate: bool
    pencil: PencilReport | None
    witnesses: tuple[str, ...] = ()

    @property
    def checks_pass(self) -> bool:
        return self.delta_product_ok and self.hessian_balance_ok

    @property
    def verdict(self) -> bool:
        return self.checks_pass and self.nondegenerate and bool(self.pencil and self.pencil.verdict)


def flat_pencil_from_f(g2: ContraMetric, f: VectorField, c=0, run_pencil_check: bool = True) -> FlatPencilResult:
    """g1 = nabla^i f^j + nabla^j f^i + c g2, plus the two conditions on f."""
    n, ctx = g2.dim, g2.ctx
    zero = ctx.zero()
    conn = christoffel(g2)
    require_flat(g2, "g2", conn)
    H = covariant_hessian(g2, f, conn, check_flat=False)
    low = conn.g_low
    G = conn.gamma_low
    cs = ctx.coords
    # nabla^i f^j = g2^{is} (d_s f^j + Gamma^j_{sa} f^a)
    grad = [[f[j].diff(cs[s]) + sum((G[j][s][a] * f[a] for a in _rng(n)), zero) for s in _rng(n)]
            for j in _rng(n)]
    up = [[sum((g2.g[i][s] * grad[j][s] for s in _rng(n)), zero) for j in _rng(n)] for i in _rng(n)]
    cc = c if isinstance(c, Expr) else ctx.const(c)
    g1 = ContraMetric(tuple(tuple(up[i][j] + up[j][i] + cc * g2.g[i][j] for j in _rng(n)) for i in _rng(n)))

    witnesses = []
    Dl = _lower_first(low, H)  # Delta^{ij}_k = nabla_k nabla^i f^j
    delta_product = True
    for i, j, k, l in itertools.product(_rng(n), repeat=4):
        r = sum((Dl[i][j][s] * Dl[s][k][l] - Dl[i][k][s] * Dl[s][j][l] for s in _rng(n)), zero)
        if not r.is_zero():
            delta_product = False
            witnesses.append(f"Delta^{i + 1}{j + 1}_s Delta^s{k + 1}_{l + 1} - Delta^{i + 1}{k + 1}_s Delta^s{j + 1}_{l + 1} = {r}")
            break
    # nabla_s nabla_p f^k = g2_{sa} g2_{pb} H^{abk}
    cov = [[[sum((low[s][a] * low[p][b] * H[a][b][k] for a in _rng(n) for b in _rng(n)), zero)
             for k in _rng(n)] for p in _rng(n)] for s in _rng(n)]
    hessian_balance = True
    for i, j, k in itertools.product(_rng(n), repeat=3):
        r = zero
        for s in _rng(n):
            for p in _rng(n):
                coeff = g1.g[i][s] * g2.g[j][p] - g2.g[i][s] * g1.g[j][p]
                if not coeff.is_zero():
                    r = r + coeff * cov[s][p][k]
        if not r.is_zero():
            hessian_balance = False
            witnesses.append(f"(g1^{i + 1}s g2^{j + 1}p - g2^{i + 1}s g1^{j + 1}p) nabla_s nabla_p f^{k + 1} = {r}")
            break
    nondegenerate = not g1.det().is_zero()
    pencil = None
    if run_pencil_check and nondegenerate and delta_product and hessian_balance:
        pencil = compat_pencil_check(g1, g2)
        witnesses.extend(pencil.witnesses)
    return FlatPencilResult(g1, H, delta_product, hessian_balance, nondegenerate, pencil, tuple(witnesses))


# --- quasihomogeneity -----------------------------------------------------------------------

@dataclass(frozen=True)
class QuasihomReport:
    e: VectorField
    E: VectorField
    degree: Expr
    cond1: bool
    cond2: bool
    cond3: bool
    cond4: bool

    @property
    def verdict(self) -> bool:
        return self.cond1 and self.cond2 and self.cond3 and self.cond4

    def conditions(self) -> dict[str, bool]:
        return {"[e,E]=e": self.cond1, "L_E g1=(d-1) g1": self.cond2,
                "L_e g1=g2": self.cond3, "L_e g2=0": self.cond4}


def quasihomogeneous_check(g1: ContraMetric, g2: ContraMetric, tau: Expr, d) -> QuasihomReport:
    for name, g in (("g1", g1), ("g2", g2)):
        if g.det().is_zero():
            raise DegenerateMetric(f"{name} is degenerate")
    n, ctx = g1.dim, g1.ctx
    zero = ctx.zero()
    dtau = [tau.diff(c) for c in ctx.coords]
    E = VectorField(tuple(sum((g1.g[i][s] * dtau[s] for s in _rng(n)), zero) for i in _rng(n)))
    e = VectorField(tuple(sum((g2.g[i][s] * dtau[s] for s in _rng(n)), zero) for i in _rng(n)))
    dd = d if isinstance(d, Expr) else ctx.const(d)

    def same(a: Matrix, b: Matrix) -> bool:
        return all(a[i][j] == b[i][j] for i in _rng(n) for j in _rng(n))

    cond1 = lie_bracket(e, E) == e
    cond2 = same(lie_metric(g1, E), tuple(tuple(x * (dd - 1) for x in row) for row in g1.g))
    cond3 = same(lie_metric(g1, e), g2.g)
    cond4 = all(x.is_zero() for row in lie_metric(g2, e) for x in row)
    return QuasihomReport(e, E, dd, cond1, cond2, cond3, cond4)


# --- recovering h from an operator compatible with eta d/dx ---------------------------------

@dataclass(frozen=True)
class RecoveredH:
    h: VectorField
    null_directions: int  # dimension of the unobservable (Killing) freedom in h


def h_from_operator(P1: DNOperator, eta: ContraMetric) -> RecoveredH:
    """Invert from_h: find h with h(0) = 0 such that from_h(eta, h) == P1."""
    eta_low = _check_eta(eta)
    n, ctx = P1.dim, P1.ctx
    zero = ctx.zero()
    for x in P1.entries():
        if not x.is_polynomial():
            raise NonPolynomial(f"operator entry {x} is not polynomial")
    # Hs[j][s][k] = d_s d_k h^j = eta_{si} b^{ij}_k
    Hs = [[[sum((eta_low[s][i] * P1.b[i][j][k] for i in _rng(n)), zero) for k in _rng(n)]
           for s in _rng(n)] for j in _rng(n)]
    for j, s, k in itertools.product(_rng(n), repeat=3):
        if k > s and Hs[j][s][k] != Hs[j][k][s]:
            raise NotIntegrable(
                f"d_{s + 1} d_{k + 1} h^{j + 1} is not symmetric: {Hs[j][s][k]} vs {Hs[j][k][s]}")
    grads = []
    for j in _rng(n):
        rows = []
        for s in _rng(n):
            try:
                rows.append(integrate_gradient([Hs[j][s][k] for k in _rng(n)]))
            except NotExact as exc:
                raise NotIntegrable(f"second derivatives of h^{j + 1} are not integrable: {exc}") from None
        grads.append(rows)  # grads[j][s] = d_s h^j up to a constant
    # fix the constant part of d_s h^j from the g-part
    e = eta.g
    A = [[sum((e[i][s] * grads[j][s] for s in _rng(n)), zero) for j in _rng(n)] for i in _rng(n)]
    C = [[P1.g[i][j] - A[i][j] - A[j][i] for j in _rng(n)] for i in _rng(n)]
    for i, j in itertools.product(_rng(n), repeat=2):
        if not C[i][j].is_constant():
            raise GMismatch(f"g^{i + 1}{j + 1} is not of the form eta dh + (eta dh)^T; residual {C[i][j]}")
        if C[i][j] != C[j][i]:
            raise GMismatch(f"g is not symmetric at ({i + 1},{j + 1})")
    half = ctx.const(1) / 2
    # B = eta A_const with B + B^T = C; the antisymmetric part of B is unobservable
    const = [[sum((eta_low[s][i] * C[i][j] * half for i in _rng(n)), zero) for s in _rng(n)] for j in _rng(n)]
    h = []
    for j in _rng(n):
        try:
            h.append(integrate_gradient([grads[j][s] + const[j][s] for s in _rng(n)]))
        except NotExact as exc:
            raise NotIntegrable(f"gradient of h^{j + 1} is not integrable: {exc}") from None
    hv = VectorField(tuple(h))
    rebuilt = from_h(eta, hv)
    diffs = rebuilt.differences(P1)
    if diffs:
        name, value = diffs[0]
        raise GMismatch(f"operator is not of the form from_h(eta, h): {name} differs by {value}")
    return RecoveredH(hv, n * (n - 1) // 2)


# --- coordinate changes of operators -------------------------------------------------------------

def pushforward_operator(P: DNOperator, phi: CoordinateMap) -> DNOperator:
    n = P.dim
    old = phi.old
    zero = old.zero()
    J = phi.jacobian  # J[s][i] = d new^s / d old^i
    dJ = [[[J[r][j].diff(old.coords[k]) for k in _rng(n)] for j in _rng(n)] for r in _rng(n)]
    K = phi.inverse_jacobian()  # K[k][q] = d old^k / d new^q
    g, b = P.g, P.b
    gt = tuple(tuple(phi.to_new(sum((J[s][i] * g[i][j] * J[r][j] for i in _rng(n) for j in _rng(n)), zero))
                     for r in _rng(n)) for s in _rng(n))

    def T(s, r, k):
        v = zero
        for i in _rng(n):
            if J[s][i].is_zero():
                continue
            for j in _rng(n):
                v = v + J[s][i] * (J[r][j] * b[i][j][k] + g[i][j] * dJ[r][j][k])
        return v

    Tn = _tensor3(lambda s, r, k: phi.to_new(T(s, r, k)), n)
    nz = phi.new.zero()
    bt = _tensor3(lambda s, r, q: sum((Tn[s][r][k] * K[k][q] for k in _rng(n)), nz), n)
    return DNOperator(gt, bt)
