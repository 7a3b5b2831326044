"""The groupoid G(M) of partially invertible elements over the projection lattice.

Target and source of x are its left and right supports.  Charts on the lattice
are centred at a projection p and defined on the set of projections q for which
pq has the same rank as p; charts on G(M) are products of two of those.
"""
from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass

import numpy as np

from .algebra import (
    AlgebraElement,
    ProjectionElement,
    _same,
    left_support,
    matrix_units,
    partial_inverse,
    polar_decompose,
    rank_tolerance,
    rank_vector,
    singular_values,
)
from .errors import ConditionWarning, NonComposable, NotInChart

TAU_MATCH = 1e-8
# pq with smallest nonzero singular value below this is flagged as near the chart boundary
TAU_COND = 1e-6


@dataclass(frozen=True)
class GroupoidElement:
    x: AlgebraElement
    src: ProjectionElement
    tgt: ProjectionElement

    @classmethod
    def of(cls, x: AlgebraElement, tol=None) -> "GroupoidElement":
        pd = polar_decompose(x, tol)
        return cls(x, pd.support, pd.left)


def as_arrow(x) -> GroupoidElement:
    return x if isinstance(x, GroupoidElement) else GroupoidElement.of(x)


def source(x) -> ProjectionElement:
    return as_arrow(x).src


def target(x) -> ProjectionElement:
    return as_arrow(x).tgt


def identity_at(p: ProjectionElement) -> GroupoidElement:
    return GroupoidElement(p, p, p)


def compose(x, y, tol=TAU_MATCH) -> GroupoidElement:
    x, y = as_arrow(x), as_arrow(y)
    if (x.src - y.tgt).norm() > tol:
        raise NonComposable(f"source/target mismatch {(x.src - y.tgt).norm():.2e}")
    return GroupoidElement(x.x @ y.x, y.src, x.tgt)


def inverse(x) -> GroupoidElement:
    x = as_arrow(x)
    return GroupoidElement(partial_inverse(x.x), x.tgt, x.src)


@dataclass(frozen=True)
class TransitionBlocks:
    a: AlgebraElement
    b: AlgebraElement
    c: AlgebraElement
    d: AlgebraElement

    @classmethod
    def of(cls, p, p2) -> "TransitionBlocks":
        one = AlgebraElement.identity(p.desc)
        return cls(p2 @ p, (one - p2) @ p, p2 @ (one - p), (one - p2) @ (one - p))


def _pq_smin(p, q):
    """Smallest of the top rank(p) singular values of pq, block by block."""
    out = np.inf
    for s, r in zip(singular_values(p @ q), rank_vector(p)):
        if r:
            out = min(out, s[r - 1])
    return out


def in_pi(p: ProjectionElement, q: ProjectionElement, tol=None) -> bool:
    _same(p, q)
    rv = rank_vector(p)
    if rv != rank_vector(q):
        return False
    pq = p @ q
    t = rank_tolerance(pq, tol)
    ok = True
    for s, r in zip(singular_values(pq), rv):
        if r and s[r - 1] <= t:
            ok = False
    return ok


def _require_chart(p, q, tol=None):
    if not in_pi(p, q, tol):
        raise NotInChart("projection outside the chart domain")
    if _pq_smin(p, q) < TAU_COND:
        warnings.warn("chart evaluated near its boundary", ConditionWarning, stacklevel=3)


def chart_sigma(p: ProjectionElement, q: ProjectionElement) -> AlgebraElement:
    """Section (pq)^{-1}; its target is q and its source is p."""
    _require_chart(p, q)
    return partial_inverse(p @ q)


def chart_phi(p: ProjectionElement, q: ProjectionElement) -> AlgebraElement:
    return chart_sigma(p, q) - p


def chart_phi_inv(p: ProjectionElement, y: AlgebraElement) -> ProjectionElement:
    return left_support(p + y)


def lattice_transition(p, p2, y, check=True) -> AlgebraElement:
    """Coordinate change y_p -> y_p2 on the overlap of the two lattice charts."""
    if check:
        _require_chart(p2, chart_phi_inv(p, y))
    tb = TransitionBlocks.of(p, p2)
    return (tb.b + tb.d @ y) @ partial_inverse(tb.a + tb.c @ y)


@dataclass(frozen=True)
class GroupoidChartTriple:
    p: ProjectionElement
    pt: ProjectionElement
    y: AlgebraElement
    z: AlgebraElement
    yt: AlgebraElement


def chart_psi(p, pt, x) -> GroupoidChartTriple:
    x = as_arrow(x)
    _require_chart(p, x.tgt)
    _require_chart(pt, x.src)
    sig_t = partial_inverse(p @ x.tgt)
    sig_s = partial_inverse(pt @ x.src)
    z = partial_inverse(sig_t) @ x.x @ sig_s
    return GroupoidChartTriple(p, pt, sig_t - p, z, sig_s - pt)


def chart_psi_inv(tr: GroupoidChartTriple) -> GroupoidElement:
    x = (tr.p + tr.y) @ tr.z @ partial_inverse(tr.pt + tr.yt)
    return GroupoidElement.of(x)


def groupoid_transition(tr: GroupoidChartTriple, p2, pt2, check=True) -> GroupoidChartTriple:
    if check:
        _require_chart(p2, chart_phi_inv(tr.p, tr.y))
        _require_chart(pt2, chart_phi_inv(tr.pt, tr.yt))
    tb = TransitionBlocks.of(tr.p, p2)
    tbt = TransitionBlocks.of(tr.pt, pt2)
    A = tb.a + tb.c @ tr.y
    At = tbt.a + tbt.c @ tr.yt
    return GroupoidChartTriple(
        p2,
        pt2,
        (tb.b + tb.d @ tr.y) @ partial_inverse(A),
        A @ tr.z @ partial_inverse(At),
        (tbt.b + tbt.d @ tr.yt) @ partial_inverse(At),
    )


class Component:
    """Transitive component of the groupoid labelled by a rank vector."""

    def __init__(self, p0: ProjectionElement):
        self.p0 = p0
        self.rank_vector = rank_vector(p0)

    def has_projection(self, q) -> bool:
        return rank_vector(q) == self.rank_vector

    def __contains__(self, x) -> bool:
        x = as_arrow(x)
        return self.has_projection(x.src) and self.has_projection(x.tgt)


def component_of(p0: ProjectionElement) -> Component:
    return Component(p0)


def component_labels(desc):
    """Rank vectors indexing the transitive components."""
    return list(itertools.product(*(range(n + 1) for n in desc.block_dims)))


def pi_is_singleton(p: ProjectionElement, tol=1e-10) -> bool:
    """True iff (1-p)Mp = 0, i.e. the lattice chart at p is a single point."""
    one = AlgebraElement.identity(p.desc)
    q = one - p
    return all((q @ e @ p).norm() <= tol for e in matrix_units(p.desc))
