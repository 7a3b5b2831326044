import numpy as np
import pytest
from hypothesis import given, settings

from conftest import algebras, base_projection, close, e, rng_of, seeds
from wgroupoid import involution as inv
from wgroupoid import suites as S
from wgroupoid.algebra import (
    AlgebraDescriptor,
    AlgebraElement,
    as_projection,
    left_support,
    random_element,
    random_projection,
    random_rank_vector,
)
from wgroupoid.errors import LogBranchError


def ctx(desc, seed, n=5):
    rng = rng_of(seed)
    return S.Context(desc, base_projection(desc, rng), rng, n)


def test_examples():
    assert close(inv.j_involution(e(1, 2)), e(1, 2))
    assert close(inv.j_involution(2 * e(1, 2)), 0.5 * e(1, 2))


def test_fixed_points_classified(rng):
    wrong = 0
    for name in ("M2", "C+M2", "M3"):
        desc = AlgebraDescriptor.parse(name)
        for k in range(334):
            src = random_projection(desc, random_rank_vector(desc, rng, nonzero=False), rng)
            u = inv.random_partial_isometry(desc, rng, src=src)
            x, truth = (u, True) if k % 2 == 0 else (u + 1e-3 * random_element(desc, rng), False)
            wrong += inv.is_j_fixed(x) != truth
    assert wrong == 0


@pytest.mark.parametrize("theta", [-3.0, -1.0, 0.0, 0.5, 2.9])
def test_log_branch(theta):
    e11 = e(1, 1)
    p = as_projection(e11)
    c = inv.unitary_chart(p, p, e11, complex(np.exp(1j * theta)) * e11)
    assert close(c.h, theta * e11, 1e-12) and close(c.h, c.h.H)


def test_log_outside_branch():
    e11 = e(1, 1)
    p = as_projection(e11)
    with pytest.raises(LogBranchError):
        inv.unitary_chart(p, p, e11, -1.0 * e11)


@pytest.mark.parametrize("t", [0.1, 1.0, 10.0])
def test_perp_t_family(t):
    p = as_projection(e(1, 1))
    y = t * e(2, 1)
    yp = inv.perp_transition(p, y)
    assert (yp - (-t) * e(1, 2)).norm() <= 1e-12 * max(1, t)
    # e22 + y_perp spans the orthocomplement of range(p + y)
    q = left_support(p + y)
    assert (q @ (inv.perp(p) + yp)).norm() <= 1e-12 * max(1, t)


def test_perp_involutive(rng):
    desc = AlgebraDescriptor.parse("M3")
    one = AlgebraElement.identity(desc)
    for _ in range(20):
        p = base_projection(desc, rng)
        y = 0.5 * (one - p) @ random_element(desc, rng) @ p
        yp = inv.perp_transition(p, y)
        assert close(inv.perp_transition(inv.perp(p), yp), y, 1e-9)
        assert close(yp, inv.perp_oracle(p, y), 1e-9)


@settings(max_examples=10)
@given(algebras, seeds)
def test_automorphism(desc, seed):
    assert S.involution_automorphism(ctx(desc, seed)).residual <= 1e-9


@settings(max_examples=10)
@given(algebras, seeds)
def test_unitary_chart(desc, seed):
    assert S.involution_unitary_chart(ctx(desc, seed)).residual <= 1e-8


@settings(max_examples=10)
@given(algebras, seeds)
def test_gauge_arrows_fixed(desc, seed):
    assert S.involution_gauge(ctx(desc, seed)).residual <= 1e-10
