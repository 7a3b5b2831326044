import pytest
from hypothesis import given, settings

from conftest import algebras, base_projection, close, rng_of, seeds
from wgroupoid import algebroid as ag
from wgroupoid import poisson as ps
from wgroupoid import suites as S
from wgroupoid.algebra import AlgebraDescriptor, AlgebraElement, corner_dim, random_element
from wgroupoid.bundle import random_bundle_point, random_bundle_point_in_chart
from wgroupoid.errors import CornerError


def ctx(desc, seed, n=2):
    rng = rng_of(seed)
    return S.Context(desc, base_projection(desc, rng), rng, n)


@pytest.mark.parametrize("name", ["M2", "C+M2", "M3", "M2+M2"])
def test_fibre_dimensions_add_up(name, rng):
    desc = AlgebraDescriptor.parse(name)
    q = base_projection(desc, rng)
    one = AlgebraElement.identity(desc)
    assert corner_dim(one, q) == corner_dim(q, q) + corner_dim(one - q, q)


def test_atiyah_maps_check_corners(rng):
    desc = AlgebraDescriptor.parse("M3")
    q = base_projection(desc, rng)
    with pytest.raises(CornerError):
        ag.atiyah_iota(random_element(desc, rng), q)
    x = random_element(desc, rng) @ q
    assert (q @ ag.atiyah_a(x, q)).norm() <= 1e-12


def test_constant_chart_section_round_trip(rng):
    desc = AlgebraDescriptor.parse("M3")
    p0 = base_projection(desc, rng)
    p = base_projection(desc, rng)
    one = AlgebraElement.identity(desc)
    a0, b0 = (one - p) @ random_element(desc, rng) @ p, p @ random_element(desc, rng) @ p
    X = ag.ChartSection(p, lambda y: a0, lambda y: b0)
    V = ag.section_convert(X)
    z0 = p @ random_element(desc, rng) @ p0
    back = ag.section_convert(V, p, z0)
    eta = random_bundle_point_in_chart(p, p0, rng, 0.4)
    y = eta @ ag.partial_inverse(p @ eta) - p
    a, b = back(y)
    assert close(a, a0, 1e-9) and close(b, b0, 1e-9)


def test_linear_section_bracket(rng):
    desc = AlgebraDescriptor.parse("M3")
    p0 = base_projection(desc, rng)
    w1, w2 = random_element(desc, rng), random_element(desc, rng)
    eta = random_bundle_point(p0, rng)
    V = ag.bracket_global(ag.linear_section(w1, p0), ag.linear_section(w2, p0))
    assert close(V(eta), (w2 @ w1 - w1 @ w2) @ eta, 1e-9)


def test_f_V_rho_linear_and_rho_terms(rng):
    desc = AlgebraDescriptor.parse("M3")
    p0 = base_projection(desc, rng)
    V1, V2 = (ag.linear_section(random_element(desc, rng), p0) for _ in range(2))
    rho = ag.invariant_ratio(random_element(desc, rng), random_element(desc, rng), p0)
    env = {"phi": p0 @ random_element(desc, rng), "eta": random_bundle_point(p0, rng)}
    lhs = ps.pbracket(ag.f_V_rho(V1, None, p0), ag.f_V_rho(V2, None, p0), env)
    assert abs(lhs - ag.f_V_rho(ag.bracket_global(V1, V2), None, p0)(env)) <= 1e-9 * max(1, abs(lhs))
    mixed = ps.pbracket(ag.f_V_rho(V1, None, p0), ag.f_V_rho(None, rho, p0), env)
    expected = ag.derivative_along(V1, rho)(env)
    assert abs(mixed - expected) <= 1e-9 * max(1, abs(expected))


@settings(max_examples=10)
@given(algebras, seeds)
def test_bracket_jacobi(desc, seed):
    assert S.algebroid_jacobi(ctx(desc, seed)).residual <= 1e-8


@settings(max_examples=10)
@given(algebras, seeds)
def test_anchor_is_a_morphism(desc, seed):
    assert S.algebroid_anchor_morphism(ctx(desc, seed)).residual <= 1e-6


@settings(max_examples=10)
@given(algebras, seeds)
def test_leibniz_rule(desc, seed):
    assert S.algebroid_leibniz(ctx(desc, seed)).residual <= 1e-8


@settings(max_examples=10)
@given(algebras, seeds)
def test_chart_and_global_brackets_agree(desc, seed):
    assert S.algebroid_cross_representation(ctx(desc, seed)).residual <= 1e-7
