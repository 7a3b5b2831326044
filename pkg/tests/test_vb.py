import pytest
from hypothesis import given, settings

from conftest import algebras, base_projection, rng_of, seeds
from wgroupoid import suites as S
from wgroupoid import vb
from wgroupoid import vbpoisson as vp
from wgroupoid.algebra import AlgebraDescriptor, random_element
from wgroupoid.bundle import random_bundle_point


def p0_of(name, seed=0):
    desc = AlgebraDescriptor.parse(name)
    return base_projection(desc, rng_of(seed))


def ctx(desc, seed, n=4):
    rng = rng_of(seed)
    return S.Context(desc, base_projection(desc, rng), rng, n)


@pytest.mark.parametrize("name", sorted(vb.CATALOGUE))
def test_catalogue_axioms(name):
    r = vb.vb_check(vb.CATALOGUE[name](p0_of("C+M2")), 10, seed=1)
    assert r["passed"], r


def test_core_dimensions():
    p0 = p0_of("M3")
    assert vb.core_compute(vb.action_spec(p0)).dim == 0
    d = sum(n * r for n, r in zip(p0.desc.block_dims, p0.rank_vector))
    for name in ("tangent-pair", "tangent-quotient"):
        core = vb.core_compute(vb.CATALOGUE[name](p0))
        assert core.matches and core.dim == d


@pytest.mark.parametrize("primal", sorted(vb.DUAL_PAIRS))
def test_dualize_matches_hand_dual(primal):
    p0 = p0_of("C+M2", 2)
    hand = vb.CATALOGUE[vb.DUAL_PAIRS[primal]](p0)
    assert vb.compare_specs(hand, vb.dualize(vb.CATALOGUE[primal](p0)), 5, seed=3) <= 1e-10


def test_dualize_involutive():
    spec = vb.action_spec(p0_of("M2"))
    assert vb.compare_specs(spec, vb.dualize(vb.dualize(spec)), 3, seed=0) <= 1e-10


def test_exact_sequences():
    r = vb.exact_sequence_check(p0_of("M3"), 10, seed=4)
    assert r["passed"] and r["morphism_residual"] <= 1e-10


def test_sharp_is_morphism():
    r = vp.sharp_morphism_check(p0_of("M3"), 30, seed=5)
    assert r["max_residual"] <= 1e-12


def test_J2_vanishes_on_units(rng):
    p0 = p0_of("M3")
    spec = vb.CATALOGUE["pair-cotangent"](p0)
    for _ in range(10):
        phi, eta = p0 @ random_element(p0.desc, rng), random_bundle_point(p0, rng)
        u = spec.unit(vb.VBPoint((phi,), (eta,)))
        assert vp.momentum_J2(u).norm() <= 1e-12 * max(1, phi.norm() * eta.norm())


@pytest.mark.parametrize("kind", ["middle", "gauge-cotangent", "rightmost"])
def test_coordinate_jacobi(kind):
    assert vp.jacobi_check(p0_of("M3"), kind, 5, seed=6) <= 1e-9


@pytest.mark.parametrize("gid", vp.SUB_POISSON_GROUPOIDS)
def test_sub_poisson_groupoids(gid):
    assert vp.sub_poisson_groupoid_check(gid, p0_of("C+M2"), 10, seed=7)["passed"]


@pytest.mark.parametrize("gid", vp.SUB_POISSON_GROUPOIDS)
def test_sub_poisson_negative_controls_fail(gid):
    assert not vp.sub_poisson_negative_control(gid, p0_of("C+M2"), 10, seed=7)["passed"]


def test_corrupted_spec_fails():
    assert not vb.vb_check(vb.corrupted(vb.pair_cotangent_spec(p0_of("M3"))), 10, seed=8)["passed"]


@settings(max_examples=8)
@given(algebras, seeds)
def test_momenta_invariants(desc, seed):
    assert S.vb_momenta(ctx(desc, seed)).residual <= 1e-9


@settings(max_examples=8)
@given(algebras, seeds)
def test_pair_bracket_invariants(desc, seed):
    assert S.vb_pair_bracket(ctx(desc, seed, 3)).residual <= 1e-8


@settings(max_examples=8)
@given(algebras, seeds)
def test_quotient_morphism(desc, seed):
    assert S.vb_quotient_morphism(ctx(desc, seed)).residual <= 1e-9
