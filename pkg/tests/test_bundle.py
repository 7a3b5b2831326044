import pytest
from hypothesis import given

from conftest import algebras, base_projection, close, e, rng_of, seeds
from wgroupoid.algebra import as_projection, partial_inverse
from wgroupoid.bundle import (
    BundlePoint,
    act,
    action_groupoid_embed,
    bundle_chart,
    bundle_chart_inv,
    gauge_arrow,
    gauge_base,
    random_bundle_point,
    random_bundle_point_in_chart,
    random_group_element,
)
from wgroupoid.errors import CornerError, RankError
from wgroupoid.groupoid import compose

P0 = as_projection(e(1, 1))


def test_act_example():
    assert close(act(e(1, 1) + e(2, 1), 2 * e(1, 1)), 2 * e(1, 1) + 2 * e(2, 1))


def test_gauge_base_example():
    assert close(gauge_base(e(1, 1) + e(2, 1)), 0.5 * (e(1, 1) + e(1, 2) + e(2, 1) + e(2, 2)))


def test_gauge_arrow_example():
    assert close(gauge_arrow(e(1, 1) + e(2, 1), e(1, 1)).x, e(1, 1) + e(2, 1))


@pytest.mark.parametrize("t", [0.0, 0.3, 2.0])
def test_bundle_chart_example(t):
    y, z = bundle_chart(P0, e(1, 1) + t * e(2, 1))
    assert close(y, t * e(2, 1))
    assert close(z, e(1, 1))


def test_bundle_point_validation():
    with pytest.raises(CornerError):
        BundlePoint(e(1, 2), P0)
    with pytest.raises(RankError):
        BundlePoint(0 * e(1, 1), P0)


@given(algebras, seeds)
def test_gauge_invariance(desc, seed):
    rng = rng_of(seed)
    p0 = base_projection(desc, rng)
    eta, xi = random_bundle_point(p0, rng), random_bundle_point(p0, rng)
    g = random_group_element(p0, rng)
    assert close(gauge_base(act(eta, g)), gauge_base(eta), 1e-9)
    assert close(gauge_arrow(act(eta, g), act(xi, g)).x, gauge_arrow(eta, xi).x, 1e-8)
    zeta = random_bundle_point(p0, rng)
    prod = compose(gauge_arrow(eta, xi), gauge_arrow(xi, zeta)).x
    assert close(prod, gauge_arrow(eta, zeta).x, 1e-8)


@given(algebras, seeds)
def test_bundle_chart_round_trip_and_equivariance(desc, seed):
    rng = rng_of(seed)
    p0 = base_projection(desc, rng)
    p = base_projection(desc, rng)
    eta = random_bundle_point_in_chart(p, p0, rng, 0.5)
    y, z = bundle_chart(p, eta)
    assert close(bundle_chart_inv(p, y, z), eta, 1e-9)
    assert close(z, p @ eta, 1e-12)
    g = random_group_element(p0, rng)
    y2, z2 = bundle_chart(p, act(eta, g))
    assert close(y2, y, 1e-8) and close(z2, z @ g, 1e-8)


@given(algebras, seeds)
def test_action_groupoid_embedding(desc, seed):
    rng = rng_of(seed)
    p0 = base_projection(desc, rng)
    eta, g = random_bundle_point(p0, rng), random_group_element(p0, rng)
    tgt, src = action_groupoid_embed(eta, g)
    # the arrow between the two points lies in the inner subgroupoid: it is eta g eta^-1
    arrow = gauge_arrow(tgt, src).x
    assert close(arrow, eta @ g @ partial_inverse(eta), 1e-8)
    assert close(gauge_base(tgt), gauge_base(src), 1e-9)
