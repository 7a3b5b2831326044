from hypothesis import given, strategies as st

from conftest import algebras, base_projection, close, e, rng_of, seeds
from wgroupoid.algebra import AlgebraElement, as_projection, corner_dim, partial_inverse, random_element
from wgroupoid.bundle import random_bundle_point, random_bundle_point_in_chart, random_group_element
from wgroupoid.groupoid import GroupoidElement, chart_phi_inv, lattice_transition
from wgroupoid.tangent import (
    FlowGenerator,
    central_fd,
    cocycle,
    flow_base,
    flow_translate,
    horizontal_project,
    horizontal_project2,
    semidirect_product,
    t_chart,
    t_chart_inv,
    t_transition,
    tangent_action,
    vertical_inject,
    vertical_inject2,
)


def test_t_chart_example():
    p = as_projection(e(1, 1))
    quad = t_chart(p, e(2, 1), e(1, 1))
    assert close(quad.a, e(2, 1)) and quad.b.norm() == 0


def _point(desc, rng):
    p0 = base_projection(desc, rng)
    p = base_projection(desc, rng)
    eta = random_bundle_point_in_chart(p, p0, rng, 0.5)
    return p0, p, eta


@given(algebras, seeds)
def test_t_chart_round_trip(desc, seed):
    rng = rng_of(seed)
    p0, p, eta = _point(desc, rng)
    v = random_element(desc, rng) @ p0
    v2, eta2 = t_chart_inv(t_chart(p, v, eta))
    assert close(v2, v, 1e-9) and close(eta2, eta, 1e-9)


@given(algebras, seeds)
def test_vertical_vectors_have_zero_a(desc, seed):
    rng = rng_of(seed)
    p0, p, eta = _point(desc, rng)
    v, _ = vertical_inject(p0 @ random_element(desc, rng) @ p0, eta)
    assert t_chart(p, v, eta).a.norm() <= 1e-9 * max(1.0, v.norm())


@given(algebras, seeds)
def test_t_transition_matches_fd(desc, seed):
    rng = rng_of(seed)
    p0, p, eta = _point(desc, rng)
    p2 = as_projection(chart_phi_inv(p, 0.1 * (AlgebraElement.identity(desc) - p) @ random_element(desc, rng) @ p))
    v = random_element(desc, rng) @ p0
    quad = t_chart(p, v, eta)
    moved = t_transition(quad, p2)
    fd = central_fd(lambda t: lattice_transition(p, p2, quad.y + t * quad.a), 1e-5)
    assert (moved.a - fd).norm() <= 1e-6 * max(1.0, fd.norm())
    direct = t_chart(p2, v, eta)
    assert close(moved.b, direct.b, 1e-8) and close(moved.a, direct.a, 1e-8)


@given(algebras, seeds)
def test_atiyah_exactness_dimensions(desc, seed):
    rng = rng_of(seed)
    p0 = base_projection(desc, rng)
    eta = random_bundle_point(p0, rng)
    q = as_projection(eta @ partial_inverse(eta))
    one = AlgebraElement.identity(desc)
    assert corner_dim(one, p0) == corner_dim(p0, p0) + corner_dim(one - q, p0)
    v, _ = vertical_inject(p0 @ random_element(desc, rng) @ p0, eta)
    assert horizontal_project(v, eta).norm() <= 1e-9 * max(1.0, v.norm())


@given(algebras, seeds)
def test_pair_projection_kills_diagonal_vertical(desc, seed):
    rng = rng_of(seed)
    p0 = base_projection(desc, rng)
    eta, xi = random_bundle_point(p0, rng), random_bundle_point(p0, rng)
    x = p0 @ random_element(desc, rng) @ p0
    v, _, w, _ = vertical_inject2(x, eta, xi)
    a, b = horizontal_project2(v, eta, w, xi)
    assert a.norm() + b.norm() <= 1e-9 * max(1.0, v.norm() + w.norm())


@given(algebras, seeds)
def test_tangent_action_is_an_action(desc, seed):
    rng = rng_of(seed)
    p0 = base_projection(desc, rng)
    eta = random_bundle_point(p0, rng)
    theta = random_element(desc, rng) @ p0
    x, y = (p0 @ random_element(desc, rng) @ p0 for _ in range(2))
    g, h = random_group_element(p0, rng), random_group_element(p0, rng)
    step = tangent_action(*tangent_action(theta, eta, x, g), y, h)
    once = tangent_action(theta, eta, *semidirect_product(x, g, y, h))
    assert close(step[0], once[0], 1e-8) and close(step[1], once[1], 1e-8)


def _flow_case(desc, rng):
    p0 = base_projection(desc, rng)
    p = base_projection(desc, rng)
    q = chart_phi_inv(p, 0.3 * (AlgebraElement.identity(desc) - p) @ random_element(desc, rng) @ p)
    w = FlowGenerator(0.2 * random_element(desc, rng))
    return p0, p, q, w


@given(algebras, seeds, st.floats(-0.5, 0.5), st.floats(-0.5, 0.5))
def test_cocycle_law(desc, seed, t, s):
    rng = rng_of(seed)
    _, p, q, w = _flow_case(desc, rng)
    lhs = cocycle(w, p, q, t + s)
    rhs = cocycle(w, p, flow_base(w, p, q, t), s) @ cocycle(w, p, q, t)
    assert (lhs - rhs).norm() <= 1e-8 * max(1.0, rhs.norm())


@given(algebras, seeds, st.floats(-1, 1))
def test_flow_keeps_source(desc, seed, t):
    rng = rng_of(seed)
    x = GroupoidElement.of(random_element(desc, rng) @ base_projection(desc, rng))
    y = flow_translate(0.3 * random_element(desc, rng), t, x)
    assert close(GroupoidElement.of(y.x).src, x.src, 1e-10)


@given(algebras, seeds)
def test_cocycle_generator_is_b_p(desc, seed):
    rng = rng_of(seed)
    p0, p, _, w = _flow_case(desc, rng)
    eta = random_bundle_point_in_chart(p, p0, rng, 0.3)
    qq = as_projection(eta @ partial_inverse(eta))
    fd = central_fd(lambda t: cocycle(w, p, qq, t), 1e-5)
    b = t_chart(p, w.w @ eta, eta).b
    assert (fd - b).norm() <= 1e-6 * max(1.0, b.norm())

