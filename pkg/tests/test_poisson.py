import numpy as np
from hypothesis import given, settings

from conftest import algebras, base_projection, close, e, rng_of, seeds, M2
from wgroupoid import poisson as ps
from wgroupoid import suites as S
from wgroupoid.algebra import AlgebraDescriptor, AlgebraElement, as_projection, pairing, random_element
from wgroupoid.bundle import random_bundle_point, random_bundle_point_in_chart
from wgroupoid.traceword import const, random_trace_word


def ctx(desc, seed, n=2):
    rng = rng_of(seed)
    return S.Context(desc, base_projection(desc, rng), rng, n)


def _setup(rng, name="M3"):
    desc = AlgebraDescriptor.parse(name)
    p0 = base_projection(desc, rng)
    env = {"phi": p0 @ random_element(desc, rng), "eta": random_bundle_point(p0, rng)}
    return desc, p0, env


def test_bracket_of_constant_pairings(rng):
    desc, p0, env = _setup(rng)
    phi, eta = ps.cotangent_vars(p0)
    v0, phi0 = random_element(desc, rng) @ p0, p0 @ random_element(desc, rng)
    f, g = (phi @ const(v0)).trace(), (const(phi0) @ eta).trace()
    for _ in range(3):
        env = {"phi": p0 @ random_element(desc, rng), "eta": random_bundle_point(p0, rng)}
        assert abs(ps.pbracket(f, g, env) - pairing(phi0, v0)) <= 1e-12 * max(1, abs(pairing(phi0, v0)))


def test_hamiltonian_field_of_linear_function(rng):
    desc, p0, env = _setup(rng)
    phi, _ = ps.cotangent_vars(p0)
    v0 = random_element(desc, rng) @ p0
    X = ps.hamiltonian_field((phi @ const(v0)).trace(), env)
    assert X.theta.norm() == 0 and close(X.v, v0)


def test_momentum_example():
    assert close(ps.momentum_J0(e(1, 1), e(1, 1) + e(2, 1)), e(1, 1))


def test_lie_poisson_example():
    one = as_projection(AlgebraElement.identity(M2()))
    b = ps.beta_var(one)
    F, G = (b @ const(e(1, 1))).trace(), (b @ const(e(1, 2))).trace()
    assert abs(ps.lp_bracket(F, G, {"beta": e(2, 1)}) - 1) <= 1e-14


def test_casimir(rng):
    desc = AlgebraDescriptor.parse("M3")
    p0 = base_projection(desc, rng)
    b = ps.beta_var(p0)
    G = random_trace_word(desc, {"beta": (p0, p0)}, rng, degree=3)
    for _ in range(5):
        beta = p0 @ random_element(desc, rng) @ p0
        assert abs(ps.lp_bracket((b @ b).trace(), G, {"beta": beta})) <= 1e-10 * max(1, beta.norm() ** 2)


def test_canonical_pair_in_chart(rng):
    desc = AlgebraDescriptor.parse("M3")
    p0, p = base_projection(desc, rng), base_projection(desc, rng)
    one = AlgebraElement.identity(desc)
    alpha, _, y, _ = ps.chart_vars(p, p0)
    h = (one - p) @ random_element(desc, rng) @ p
    k = p @ random_element(desc, rng) @ (one - p)
    eta = random_bundle_point_in_chart(p, p0, rng, 0.4)
    env = ps.chart_env(ps.cotangent_chart(p, p0 @ random_element(desc, rng), eta))
    value = ps.reduced_bracket((alpha @ const(h)).trace(), (const(k) @ y).trace(), env)
    assert abs(value - pairing(k, h)) <= 1e-12 * max(1, abs(value))


def test_sub_anchor_is_hamiltonian_field(rng):
    desc, p0, env = _setup(rng)
    f = random_trace_word(desc, {"phi": (p0, AlgebraElement.identity(desc)),
                                 "eta": (AlgebraElement.identity(desc), p0)}, rng)
    fphi, feta = ps.differential(f, env)
    A, X = ps.sub_anchor_1(fphi, feta, env["phi"], env["eta"]), ps.hamiltonian_field(f, env)
    assert close(A.theta, X.theta, 1e-10) and close(A.v, X.v, 1e-10)


def test_cotangent_chart_round_trip_and_momentum(rng):
    desc = AlgebraDescriptor.parse("C+M2")
    p0, p = base_projection(desc, rng), base_projection(desc, rng)
    for _ in range(10):
        phi, eta = p0 @ random_element(desc, rng), random_bundle_point_in_chart(p, p0, rng, 0.5)
        q = ps.cotangent_chart(p, phi, eta)
        phi2, eta2 = ps.cotangent_chart_inv(q)
        assert close(phi2, phi, 1e-9) and close(eta2, eta, 1e-9)
        assert close(ps.momentum_J1_coords(q), ps.momentum_J0(phi, eta), 1e-9)


def test_check_J1_poisson_linear_and_quadratic(rng):
    desc = AlgebraDescriptor.parse("M3")
    p0 = base_projection(desc, rng)
    b = ps.beta_var(p0)
    x, y = (p0 @ random_element(desc, rng) @ p0 for _ in range(2))
    pts = [(p0 @ random_element(desc, rng), random_bundle_point(p0, rng)) for _ in range(200)]
    assert ps.check_J1_poisson((b @ const(x)).trace(), (b @ const(y)).trace(), pts, p0)["passed"]
    F, G = (random_trace_word(desc, {"beta": (p0, p0)}, rng, degree=2) for _ in range(2))
    assert ps.check_J1_poisson(F, G, pts, p0)["passed"]


def test_reduction_image_in_zero_level(rng):
    desc = AlgebraDescriptor.parse("M3")
    p = base_projection(desc, rng)
    one = AlgebraElement.identity(desc)
    eta_ref = p @ random_element(desc, rng) @ base_projection(desc, rng)
    samples = [((p @ random_element(desc, rng) @ (one - p)), 0.5 * (one - p) @ random_element(desc, rng) @ p,
                p @ random_element(desc, rng) @ (one - p), (one - p) @ random_element(desc, rng) @ p)
               for _ in range(20)]
    r = ps.mw_reduction_check(p, eta_ref, samples)
    assert r["J1_residual"] <= 1e-12 and r["pullback_residual"] <= 1e-8


def test_full_jacobian_rank(rng):
    desc, p0, env = _setup(rng, "C+M2")
    rank, dim = ps.J1_jacobian_rank(env["phi"], env["eta"], p0)
    assert rank == dim and dim == int(np.sum(np.array(p0.rank_vector) ** 2))


@settings(max_examples=10)
@given(algebras, seeds)
def test_pbracket_jacobi_antisymmetry_leibniz(desc, seed):
    assert S.poisson_algebra(ctx(desc, seed)).residual <= 1e-9


@settings(max_examples=10)
@given(algebras, seeds)
def test_chart_bracket_matches_canonical(desc, seed):
    assert S.poisson_chart_bracket(ctx(desc, seed)).residual <= 1e-9


@settings(max_examples=10)
@given(algebras, seeds)
def test_polarity(desc, seed):
    assert S.poisson_polarity(ctx(desc, seed)).residual <= 1e-9


@settings(max_examples=10)
@given(algebras, seeds)
def test_iota_star_compatibility(desc, seed):
    assert S.poisson_iota_star(ctx(desc, seed)).residual <= 1e-9


@settings(max_examples=10)
@given(algebras, seeds)
def test_cotangent_atlas(desc, seed):
    out = S.poisson_cotangent_atlas(ctx(desc, seed, 3))
    assert out.residual <= 1e-8
