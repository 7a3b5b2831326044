import numpy as np
import pytest
from hypothesis import given

from conftest import algebras, close, e, rng_of, seeds, M2
from wgroupoid.algebra import (
    AlgebraDescriptor,
    AlgebraElement,
    as_projection,
    central_projections,
    is_central,
    left_support,
    random_element,
    random_projection,
    random_rank_vector,
)
from wgroupoid.errors import NonComposable, NotInChart
from wgroupoid.groupoid import (
    GroupoidChartTriple,
    GroupoidElement,
    chart_phi,
    chart_phi_inv,
    chart_psi,
    chart_psi_inv,
    chart_sigma,
    component_labels,
    component_of,
    compose,
    groupoid_transition,
    identity_at,
    in_pi,
    inverse,
    lattice_transition,
    pi_is_singleton,
)


def q_of(t):
    return as_projection(AlgebraElement(M2(), [np.array([[1, t], [t, t * t]], complex) / (1 + t * t)]))


def test_compose_2e12_3e21():
    xy = compose(GroupoidElement.of(2 * e(1, 2)), GroupoidElement.of(3 * e(2, 1)))
    assert close(xy.x, 6 * e(1, 1))
    assert close(xy.src, e(1, 1)) and close(xy.tgt, e(1, 1))


def test_noncomposable():
    with pytest.raises(NonComposable):
        compose(GroupoidElement.of(e(1, 2)), GroupoidElement.of(e(1, 2)))


def test_in_pi_example():
    assert in_pi(as_projection(e(1, 1)), q_of(1.0))
    assert not in_pi(as_projection(e(1, 1)), as_projection(e(2, 2)))


def test_chart_phi_at_t_equal_one():
    p = as_projection(e(1, 1))
    assert close(chart_sigma(p, q_of(1.0)), AlgebraElement(M2(), [np.array([[1, 0], [1, 0]], complex)]))
    assert close(chart_phi(p, q_of(1.0)), e(2, 1))


@pytest.mark.parametrize("t", [0.1, 0.5, 1.0, 3.0, 10.0])
def test_chart_phi_general_t(t):
    p = as_projection(e(1, 1))
    q = q_of(t)
    sigma = chart_sigma(p, q)
    assert close(sigma, p + t * e(2, 1))
    assert close(p @ q @ sigma, p) and close(sigma @ p @ q, q)
    assert close(chart_phi(p, q), t * e(2, 1))
    assert close(chart_phi_inv(p, t * e(2, 1)), q)


def test_lattice_transition_example():
    p, p2 = as_projection(e(1, 1)), as_projection(e(2, 2))
    y2 = lattice_transition(p, p2, e(2, 1))
    assert close(y2, e(1, 2))
    assert close(y2, chart_phi(p2, chart_phi_inv(p, e(2, 1))))


def test_not_in_chart():
    with pytest.raises(NotInChart):
        chart_phi(as_projection(e(1, 1)), as_projection(e(2, 2)))


def test_chart_psi_of_2e12():
    tr = chart_psi(as_projection(e(1, 1)), as_projection(e(2, 2)), 2 * e(1, 2))
    assert tr.y.norm() == 0 and tr.yt.norm() == 0
    assert close(tr.z, 2 * e(1, 2))


def test_groupoid_transition_rank_one_example():
    # the arrow [[0, 2], [0, 1]] moved from the charts (e11, e22) to (e22, q(1))
    x = AlgebraElement(M2(), [np.array([[0, 2], [0, 1]], complex)])
    p, pt = as_projection(e(1, 1)), as_projection(e(2, 2))
    p2, pt2 = as_projection(e(2, 2)), q_of(1.0)
    tr = chart_psi(p, pt, x)
    moved = groupoid_transition(tr, p2, pt2)
    direct = chart_psi(p2, pt2, x)
    for a, b in ((moved.y, direct.y), (moved.z, direct.z), (moved.yt, direct.yt)):
        assert close(a, b, 1e-12)
    assert close(chart_psi_inv(moved).x, x)


def test_components_of_C_plus_M2():
    d = AlgebraDescriptor.parse("C+M2")
    labels = component_labels(d)
    assert sorted(labels) == [(0, 0), (0, 1), (0, 2), (1, 0), (1, 1), (1, 2)]
    comp = component_of(random_projection(d, (1, 1), 0))
    assert comp.has_projection(random_projection(d, (1, 1), 1))
    assert not comp.has_projection(random_projection(d, (0, 1), 1))


def test_commutative_lattice_is_discrete():
    d = AlgebraDescriptor.parse("C+C+C")
    for p in central_projections(d):
        assert pi_is_singleton(as_projection(p))


def test_pi_singleton_iff_central_on_C_plus_M2(rng):
    d = AlgebraDescriptor.parse("C+M2")
    cases = [as_projection(p) for p in central_projections(d)]
    cases += [random_projection(d, random_rank_vector(d, rng, nonzero=False), rng) for _ in range(200)]
    assert sum(pi_is_singleton(p) != is_central(p) for p in cases) == 0


def _composable(desc, rng):
    rv = random_rank_vector(desc, rng)
    p1, p2, p3 = (random_projection(desc, rv, rng) for _ in range(3))
    x = GroupoidElement.of(p1 @ random_element(desc, rng) @ p2)
    y = GroupoidElement.of(x.src @ random_element(desc, rng) @ p3)
    return x, y


@given(algebras, seeds)
def test_associativity_unit_inverse(desc, seed):
    rng = rng_of(seed)
    x, y = _composable(desc, rng)
    z = GroupoidElement.of(y.src @ random_element(desc, rng) @ random_projection(desc, x.src.rank_vector, rng))
    lhs = compose(compose(x, y), z).x
    rhs = compose(x, compose(y, z)).x
    assert (lhs - rhs).norm() <= 1e-9 * max(1.0, rhs.norm())
    assert close(compose(identity_at(x.tgt), x).x, x.x, 1e-9)
    assert close(compose(x, identity_at(x.src)).x, x.x, 1e-9)
    assert close(compose(x, inverse(x)).x, x.tgt, 1e-9)
    assert close(compose(inverse(x), x).x, x.src, 1e-9)


@given(algebras, seeds)
def test_lattice_chart_round_trip(desc, seed):
    rng = rng_of(seed)
    p = random_projection(desc, random_rank_vector(desc, rng), rng)
    one = AlgebraElement.identity(desc)
    y = (one - p) @ random_element(desc, rng) @ p
    q = chart_phi_inv(p, y)
    assert close(chart_phi(p, q), y, 1e-9)
    assert close(chart_phi_inv(p, chart_phi(p, q)), q, 1e-9)


@given(algebras, seeds)
def test_chart_psi_round_trip(desc, seed):
    rng = rng_of(seed)
    rv = random_rank_vector(desc, rng)
    p, pt = random_projection(desc, rv, rng), random_projection(desc, rv, rng)
    one = AlgebraElement.identity(desc)
    tr = GroupoidChartTriple(p, pt, 0.5 * (one - p) @ random_element(desc, rng) @ p,
                             p @ random_element(desc, rng) @ pt, 0.5 * (one - pt) @ random_element(desc, rng) @ pt)
    x = chart_psi_inv(tr)
    back = chart_psi(p, pt, x)
    for a, b in ((back.y, tr.y), (back.z, tr.z), (back.yt, tr.yt)):
        assert close(a, b, 1e-8)
    assert left_support(x.x).rank_vector == rv
