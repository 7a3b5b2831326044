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
    mvn_equivalent,
    pairing,
    partial_inverse,
    polar_decompose,
    random_element,
    random_projection,
    random_rank_vector,
    random_unitary,
    rank_vector,
    right_support,
)
from wgroupoid.errors import DescriptorError, RankError


def test_descriptor_parsing():
    assert AlgebraDescriptor.parse("C+M2").block_dims == (1, 2)
    assert AlgebraDescriptor.parse("M2+M2").block_dims == (2, 2)
    assert AlgebraDescriptor.parse("1,3").block_dims == (1, 3)
    assert repr(AlgebraDescriptor((1, 2))) == "C+M2"
    with pytest.raises(DescriptorError):
        AlgebraDescriptor.parse("N4")
    with pytest.raises(DescriptorError):
        AlgebraDescriptor(())


def test_pairing_matches_entrywise_sum(rng):
    d = AlgebraDescriptor.parse("M3")
    rho, x = random_element(d, rng), random_element(d, rng)
    r, m = rho.blocks[0], x.blocks[0]
    brute = sum(r[i, j] * m[j, i] for i in range(3) for j in range(3))
    assert abs(pairing(rho, x) - brute) <= 1e-12 * max(1, abs(brute))


def test_pairing_has_no_conjugation():
    x = 1j * e(1, 1)
    assert pairing(x, e(1, 1)) == 1j


def test_polar_of_2e12():
    pd = polar_decompose(2 * e(1, 2))
    assert close(pd.u, e(1, 2))
    assert close(pd.abs, 2 * e(2, 2))
    assert close(pd.support, e(2, 2))


def test_supports_of_2e12():
    assert close(left_support(2 * e(1, 2)), e(1, 1))
    assert close(right_support(2 * e(1, 2)), e(2, 2))


def test_partial_inverse_of_2e12():
    x = 2 * e(1, 2)
    g = partial_inverse(x)
    assert close(g, 0.5 * e(2, 1))
    assert close(x @ g, e(1, 1))
    assert close(g @ x, e(2, 2))


def test_central_projections_of_C_plus_M2():
    cps = list(central_projections(AlgebraDescriptor.parse("C+M2")))
    assert len(cps) == 4
    assert all(is_central(p) for p in cps)


def test_non_central_projection():
    q = as_projection(AlgebraElement(M2(), [0.5 * np.ones((2, 2))]))
    assert not is_central(q)


def test_unitary_conjugates_are_equivalent(rng):
    d = AlgebraDescriptor.parse("C+M2")
    for _ in range(20):
        p = random_projection(d, random_rank_vector(d, rng), rng)
        u = random_unitary(d, rng)
        assert mvn_equivalent(p, as_projection(u @ p @ u.H))


def test_inequivalent_ranks():
    d = AlgebraDescriptor.parse("M3")
    assert not mvn_equivalent(random_projection(d, (1,), 0), random_projection(d, (2,), 0))


def test_random_projections_are_projections(rng):
    d = AlgebraDescriptor.parse("M3")
    for _ in range(1000):
        p = random_projection(d, (int(rng.integers(0, 4)),), rng)
        assert (p @ p - p).norm() <= 1e-12


def test_rank_error_for_non_projection():
    with pytest.raises(RankError):
        as_projection(2 * e(1, 1))


@given(algebras, seeds)
def test_penrose_identities(desc, seed):
    rng = rng_of(seed)
    rv = random_rank_vector(desc, rng)
    x = random_projection(desc, rv, rng) @ random_element(desc, rng) @ random_projection(desc, rv, rng)
    g = partial_inverse(x)
    s = max(1.0, x.norm() * g.norm())
    assert (x @ g @ x - x).norm() <= 1e-9 * s * max(1.0, x.norm())
    assert (g @ x @ g - g).norm() <= 1e-9 * s * max(1.0, g.norm())
    assert ((x @ g).H - x @ g).norm() <= 1e-9 * s
    assert ((g @ x).H - g @ x).norm() <= 1e-9 * s


@given(algebras, seeds)
def test_polar_identities(desc, seed):
    rng = rng_of(seed)
    x = random_element(desc, rng)
    pd = polar_decompose(x)
    assert (pd.u @ pd.abs - x).norm() <= 1e-10 * max(1.0, x.norm())
    assert (pd.u.H @ pd.u - pd.support).norm() <= 1e-10
    assert rank_vector(pd.support) == rank_vector(left_support(x))


@given(algebras, seeds)
def test_pairing_is_bilinear_and_cyclic(desc, seed):
    rng = rng_of(seed)
    a, b, c = (random_element(desc, rng) for _ in range(3))
    z = complex(rng.standard_normal(), rng.standard_normal())
    assert abs(pairing(a, z * b + c) - (z * pairing(a, b) + pairing(a, c))) <= 1e-10 * (1 + abs(z)) * 10
    assert abs(pairing(a @ b, c) - pairing(b, c @ a)) <= 1e-10 * max(1.0, abs(pairing(a @ b, c)))
