"""The principal bundle P0 = S^{-1}(p0) with structure group G0 = G(p0 M p0)."""
from __future__ import annotations

from dataclasses import dataclass

from .algebra import (
    AlgebraElement,
    ProjectionElement,
    _rng,
    left_support,
    partial_inverse,
    random_element,
    random_projection,
    rank_vector,
    singular_values,
)
from .errors import CornerError, RankError
from .groupoid import GroupoidElement, _require_chart


@dataclass(frozen=True)
class BundlePoint:
    eta: AlgebraElement
    p0: ProjectionElement

    def __post_init__(self):
        check_bundle_point(self.eta, self.p0)


def check_bundle_point(eta, p0, tol=1e-10):
    if (eta @ p0 - eta).norm() > tol * max(1.0, eta.norm()):
        raise CornerError("eta is not supported in M p0")
    if rank_vector(left_support(eta)) != rank_vector(p0):
        raise RankError("eta does not have full corner rank")


def check_group_element(g, p0, tol=1e-10):
    if (p0 @ g @ p0 - g).norm() > tol * max(1.0, g.norm()):
        raise CornerError("g is not in p0 M p0")
    if rank_vector(left_support(g)) != rank_vector(p0):
        raise RankError("g is not invertible in p0 M p0")


def act(eta: AlgebraElement, g: AlgebraElement) -> AlgebraElement:
    """Free right action of G0 on P0."""
    return eta @ g


def gauge_base(eta: AlgebraElement) -> ProjectionElement:
    """eta eta^{-1}, the target of eta; labels the G0-orbit of eta."""
    return left_support(eta)


def gauge_arrow(eta: AlgebraElement, xi: AlgebraElement) -> GroupoidElement:
    """eta xi^{-1}; labels the diagonal G0-orbit of (eta, xi)."""
    return GroupoidElement.of(eta @ partial_inverse(xi))


def bundle_chart(p: ProjectionElement, eta: AlgebraElement):
    _require_chart(p, gauge_base(eta))
    z = p @ eta
    return eta @ partial_inverse(z) - p, z


def bundle_chart_inv(p, y, z) -> AlgebraElement:
    return (p + y) @ z


def action_groupoid_embed(eta, g):
    return act(eta, g), eta


def random_bundle_point(p0: ProjectionElement, seed=None) -> AlgebraElement:
    """Generic element of M p0; full corner rank with probability one."""
    rng = _rng(seed)
    return random_element(p0.desc, rng) @ p0


def random_group_element(p0: ProjectionElement, seed=None, cond=1e3) -> AlgebraElement:
    """Element of p0 M p0, invertible there, with bounded condition number."""
    rng = _rng(seed)
    while True:
        g = p0 @ random_element(p0.desc, rng) @ p0
        s = [v[:r] for v, r in zip(singular_values(g), p0.rank_vector) if r]
        if not s or min(v[-1] for v in s) * cond > max(v[0] for v in s):
            return g


def random_bundle_point_in_chart(p: ProjectionElement, p0: ProjectionElement, seed=None, scale=1.0):
    """eta = (p + y) z with y in (1-p)Mp of size ``scale`` and z in p M p0 of full rank."""
    rng = _rng(seed)
    one = AlgebraElement.identity(p.desc)
    y = scale * (one - p) @ random_element(p.desc, rng) @ p
    while True:
        z = p @ random_element(p.desc, rng) @ p0
        s = [v[:r] for v, r in zip(singular_values(z), p.rank_vector) if r]
        if not s or min(v[-1] for v in s) > 1e-2 * max(v[0] for v in s):
            break
    return (p + y) @ z


def same_rank_projection(p0: ProjectionElement, seed=None) -> ProjectionElement:
    return random_projection(p0.desc, p0.rank_vector, seed)
