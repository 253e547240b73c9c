import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import gen
from hydropencil.errors import NotExact
from hydropencil.expr import Context
from hydropencil.geometry import ContraMetric, VectorField, identity, inverse, matmul, to_matrix, transpose
from hydropencil.hierarchy import (
    Density,
    HydroFlow,
    apply_dn,
    bihamiltonian_check,
    build_hierarchy,
    first_flow_closed_form,
    h1_density,
    h2_density,
    integrate_flow,
    recursion_step,
    second_flow_closed_form,
    translation_potential,
    variational_derivative,
)
from hydropencil.operators import DNOperator, from_h, hamiltonicity_residuals

C1 = Context.standard(1)
C2 = Context.standard(2)
ETA1 = ContraMetric.from_rows([["1"]], C1)
H1 = VectorField.from_list(["v1^2/2"], C1)


def vf(items, ctx=C2):
    return VectorField.from_list(items, ctx)


def strs(xs):
    return [str(x) for x in xs]


def compatible_instances(seed, count, dims=(1, 2, 3)):
    rnd = random.Random(seed)
    out = []
    while len(out) < count:
        n = rnd.choice(dims)
        eta, h = gen.separable_instance(rnd, n) if n > 1 else gen.generic_instance(rnd, n)
        if hamiltonicity_residuals(eta, h).all_zero:
            out.append((eta, h))
    return out


# --- densities and operators ---------------------------------------------------------------

def test_variational_derivative_examples():
    eta = ContraMetric.from_rows([["2", "1"], ["1", "1"]], C2)
    low = inverse(eta.g)
    grad = variational_derivative(Density(h1_density(eta)))
    v = C2.coord_vars()
    assert grad == [low[i][0] * v[0] + low[i][1] * v[1] for i in range(2)]
    assert strs(variational_derivative(C2.const(5))) == ["0", "0"]
    assert strs(variational_derivative(C1.parse("v1^3/2"))) == ["3/2*v1^2"]


def test_apply_dn_examples():
    eta = ContraMetric.from_rows([["2", "1"], ["1", "1"]], C2)
    phi = variational_derivative(h1_density(eta))
    assert apply_dn(DNOperator.constant(eta), phi).M == identity(C2)
    assert apply_dn(DNOperator.constant(eta), [C2.zero()] * 2).is_zero()
    P = from_h(ETA1, H1)
    assert apply_dn(P, [C1.var("v1")]).rows() == [["3*v1"]]


def test_integrate_flow_examples():
    assert integrate_flow(identity(C2)) == translation_potential(C2)
    assert strs(integrate_flow(to_matrix([["3*v1"]], C1))) == ["3/2*v1^2"]
    with pytest.raises(NotExact):
        integrate_flow(to_matrix([["v2", "0"], ["0", "1"]], C2))


def test_flow_potential_is_validated():
    with pytest.raises(ValueError):
        HydroFlow(to_matrix([["3*v1"]], C1), VectorField.from_list(["v1^2"], C1))


# --- first and second flows ------------------------------------------------------------------

def test_recursion_step_examples():
    first = recursion_step(ETA1, H1, translation_potential(C1))
    assert first.same_matrix(first_flow_closed_form(ETA1, H1))
    assert recursion_step(ETA1, vf([0], C1), vf(["v1^3"], C1)).is_zero()
    assert recursion_step(ETA1, H1, vf(["3/2*v1^2"], C1)).rows() == [["15/2*v1^2"]]


def test_first_flow_examples():
    assert first_flow_closed_form(ETA1, H1).rows() == [["3*v1"]]
    assert first_flow_closed_form(ETA1, vf([0], C1)).is_zero()


def test_linear_h_gives_constant_flows():
    eta = ContraMetric.from_rows([["2", "1"], ["1", "1"]], C2)
    A = to_matrix([["1", "2"], ["-1", "3"]], C2)
    v = C2.coord_vars()
    h = VectorField(tuple(A[i][0] * v[0] + A[i][1] * v[1] for i in range(2)))
    M1 = first_flow_closed_form(eta, h).M
    expected = matmul(matmul(eta.g, transpose(A)), inverse(eta.g))
    assert M1 == tuple(tuple(A[i][j] + expected[i][j] for j in range(2)) for i in range(2))
    # with b = 0 the recursion operator is the constant matrix M1 itself
    assert second_flow_closed_form(eta, h).M == matmul(M1, M1)


def test_second_flow_examples():
    assert second_flow_closed_form(ETA1, H1).rows() == [["15/2*v1^2"]]
    assert second_flow_closed_form(ETA1, vf([0], C1)).is_zero()


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 100_000))
def test_closed_forms_match_recursion(seed):
    (eta, h), = compatible_instances(seed, 1)
    first = first_flow_closed_form(eta, h)
    assert first.same_matrix(recursion_step(eta, h, translation_potential(eta.ctx)))
    assert integrate_flow(first.M) == first.potential
    assert second_flow_closed_form(eta, h).same_matrix(recursion_step(eta, h, first.potential))


# --- the hierarchy ------------------------------------------------------------------------------

def test_build_hierarchy_examples():
    H = build_hierarchy(ETA1, H1, 1)
    assert H.complete and [f.rows() for f in H.flows] == [[["3*v1"]]]
    H = build_hierarchy(ETA1, H1, 2)
    assert [f.rows() for f in H.flows] == [[["3*v1"]], [["15/2*v1^2"]]]
    H = build_hierarchy(ETA1, vf([0], C1), 4)
    assert H.complete and len(H.flows) == 4 and all(f.is_zero() for f in H.flows)
    with pytest.raises(ValueError):
        build_hierarchy(ETA1, H1, 0)


def test_scalar_hierarchy_third_flow():
    # P1 = (2v, 1) on phi = F gives (2 v F' + F)_x; from F = (5/2) v^3 the next flow is 35/2 v^3 v_x
    H = build_hierarchy(ETA1, H1, 3)
    assert H.flows[2].rows() == [["35/2*v1^3"]]


def test_incompatible_h_stops_with_failed_step():
    eta = ContraMetric(identity(C2))
    h = vf(["v1*v2", "v1^2 + v2^3"])
    assert not hamiltonicity_residuals(eta, h).all_zero
    H = build_hierarchy(eta, h, 3)
    # the first flow is always exact; later steps may fail and are then reported
    assert len(H.flows) >= 1
    assert H.complete or (H.failed_step == len(H.flows) + 1 and "not x-exact" in H.reason)


# --- bi-Hamiltonian certificates ------------------------------------------------------------------

def test_bihamiltonian_examples():
    rep = bihamiltonian_check(first_flow_closed_form(ETA1, H1), ETA1, H1)
    assert rep.verdict and rep.p1_ok and rep.p2_ok
    assert str(rep.h2_density) == "1/2*v1^3" and str(rep.h1_density) == "1/2*v1^2"
    eta = ContraMetric.from_rows([["2", "1"], ["1", "1"]], C2)
    h = vf(["v1 - v2", "2*v2"])
    assert bihamiltonian_check(first_flow_closed_form(eta, h), eta, h).verdict
    zero = vf([0], C1)
    rep = bihamiltonian_check(first_flow_closed_form(ETA1, zero), ETA1, zero)
    assert rep.verdict and rep.h2_density.is_zero()


def test_densities():
    assert str(h1_density(ContraMetric.from_rows([["2"]], C1))) == "1/4*v1^2"
    assert str(h2_density(ETA1, H1)) == "1/2*v1^3"


@settings(max_examples=12, deadline=None)
@given(st.integers(0, 100_000))
def test_first_flow_is_bihamiltonian_when_compatible(seed):
    (eta, h), = compatible_instances(seed, 1)
    rep = bihamiltonian_check(first_flow_closed_form(eta, h), eta, h)
    assert rep.p1_ok and rep.p2_ok


def test_later_flows_have_p2_densities():
    H = build_hierarchy(ETA1, H1, 3)
    for flow in H.flows[1:]:
        rep = bihamiltonian_check(flow, ETA1, H1, first=False)
        assert rep.p2_ok and rep.p1_ok is None
    rep = bihamiltonian_check(H.flows[1], ETA1, H1, first=False)
    assert str(rep.h2_density) == "5/8*v1^4"


def test_missing_p2_density_is_not_a_refutation():
    # a flow whose potential is not a gradient after lowering with eta
    flow = HydroFlow(to_matrix([["0", "1"], ["0", "0"]], C2))
    rep = bihamiltonian_check(flow, ContraMetric(identity(C2)), vf([0, 0]), first=False)
    assert not rep.p2_ok and rep.p1_ok is None and "NotFound" in rep.note
