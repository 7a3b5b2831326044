import numpy as np
import pytest
from hypothesis import HealthCheck, settings, strategies as st

from wgroupoid.algebra import AlgebraDescriptor, AlgebraElement, random_projection

settings.register_profile(
    "default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

ALGEBRAS = ("M2", "C+M2", "M3", "M2+M2")

algebras = st.sampled_from(ALGEBRAS).map(AlgebraDescriptor.parse)
seeds = st.integers(min_value=0, max_value=2**32 - 1)


def rng_of(seed):
    return np.random.default_rng(seed)


def half_rank(desc):
    return tuple(max(1, n // 2) for n in desc.block_dims)


def base_projection(desc, rng):
    return random_projection(desc, half_rank(desc), rng)


def M2():
    return AlgebraDescriptor.parse("M2")


def e(i, j, desc=None):
    """Matrix unit e_ij (1-based) of M2."""
    return AlgebraElement.unit(desc or M2(), 0, i - 1, j - 1)


def close(a, b, tol=1e-12):
    return (a - b).norm() <= tol * max(1.0, b.norm())


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
