"""Tangent bundle of P0 and of the groupoid in chart coordinates.

A tangent vector at eta in P0 is a pair (v, eta) with v in M p0.  In the chart
centred at p it becomes (a_p, b_p, y_p, z_pp0) where a_p is the velocity of
y_p and b_p the velocity of z_pp0 multiplied by z_pp0^{-1}.
"""
from __future__ import annotations

from dataclasses import dataclass

from scipy.linalg import expm

from .algebra import AlgebraElement, ProjectionElement, left_support, partial_inverse
from .bundle import bundle_chart
from .groupoid import (
    GroupoidChartTriple,
    GroupoidElement,
    TransitionBlocks,
    _require_chart,
    as_arrow,
    groupoid_transition,
)


@dataclass(frozen=True)
class TangentChartQuad:
    p: ProjectionElement
    a: AlgebraElement
    b: AlgebraElement
    y: AlgebraElement
    z: AlgebraElement


def t_chart(p, v, eta) -> TangentChartQuad:
    y, z = bundle_chart(p, eta)
    zi = partial_inverse(z)
    a = (v - eta @ zi @ v) @ zi
    b = p @ v @ zi
    return TangentChartQuad(p, a, b, y, z)


def t_chart_inv(q: TangentChartQuad):
    """Return (v, eta)."""
    x = q.p + q.y
    return (q.a + x @ q.b) @ q.z, x @ q.z


def t_transition(q: TangentChartQuad, p2, check=True) -> TangentChartQuad:
    if check:
        _require_chart(p2, left_support(q.p + q.y))
    tb = TransitionBlocks.of(q.p, p2)
    A = tb.a + tb.c @ q.y
    Ai = partial_inverse(A)
    y2 = (tb.b + tb.d @ q.y) @ Ai
    a2 = (tb.d - y2) @ q.a @ Ai
    b2 = (tb.c @ q.a + A @ q.b) @ Ai
    return TangentChartQuad(p2, a2, b2, y2, A @ q.z)


@dataclass(frozen=True)
class TangentGroupoidCoords:
    """Velocities (a_p, b_ppt, at_pt) of (y_p, z_ppt, yt_pt) at a base triple."""

    a: AlgebraElement
    b: AlgebraElement
    at: AlgebraElement
    base: GroupoidChartTriple


def tangent_groupoid_transition(c: TangentGroupoidCoords, p2, pt2, check=True) -> TangentGroupoidCoords:
    tr = c.base
    tb = TransitionBlocks.of(tr.p, p2)
    tbt = TransitionBlocks.of(tr.pt, pt2)
    A = tb.a + tb.c @ tr.y
    At = tbt.a + tbt.c @ tr.yt
    Ai, Ati = partial_inverse(A), partial_inverse(At)
    a2 = tb.d @ c.a @ Ai - (tb.b + tb.d @ tr.y) @ Ai @ tb.c @ c.a @ Ai
    b2 = (
        tb.c @ c.a @ tr.z @ Ati
        + A @ c.b @ Ati
        - A @ tr.z @ Ati @ tbt.c @ c.at @ Ati
    )
    at2 = tbt.d @ c.at @ Ati - (tbt.b + tbt.d @ tr.yt) @ Ati @ tbt.c @ c.at @ Ati
    return TangentGroupoidCoords(a2, b2, at2, groupoid_transition(tr, p2, pt2, check))


def vertical_inject(x, eta):
    """I(x, eta) = (eta x, eta)."""
    return eta @ x, eta


def horizontal_project(v, eta) -> AlgebraElement:
    """Canonical representative (1 - eta eta^{-1}) v of the coset v + eta p0 M p0."""
    return v - left_support(eta) @ v


def vertical_inject2(x, eta, xi):
    return eta @ x, eta, xi @ x, xi


def horizontal_project2(v, eta, w, xi):
    """Representative of (v, w) modulo the diagonal vertical space {(eta x, xi x)}.

    The representative is the component orthogonal (Frobenius inner product)
    to the diagonal space, obtained from the normal equations
    (eta* eta + xi* xi) x = -(eta* v + xi* w).
    """
    gram = eta.H @ eta + xi.H @ xi
    x = -(partial_inverse(gram) @ (eta.H @ v + xi.H @ w))
    return v + eta @ x, w + xi @ x


def tangent_action(theta, eta, x, g):
    """Action of TG0 = p0Mp0 x G0 on TP0: (theta g + eta x g, eta g)."""
    return theta @ g + eta @ x @ g, eta @ g


def semidirect_product(x, g, y, h):
    """(x, g)(y, h) = (x + g y g^{-1}, g h) in TG0."""
    return x + g @ y @ partial_inverse(g), g @ h


class FlowGenerator:
    """Left translations L_t(x) = exp(t w) x."""

    def __init__(self, w: AlgebraElement):
        self.w = w

    def group(self, t) -> AlgebraElement:
        return AlgebraElement(self.w.desc, [expm(t * b) for b in self.w.blocks])

    def __call__(self, t, x):
        return self.group(t) @ x


def flow_translate(w, t, x) -> GroupoidElement:
    """exp(t w) x; the source is unchanged by construction."""
    fl = w if isinstance(w, FlowGenerator) else FlowGenerator(w)
    x = as_arrow(x)
    y = fl(t, x.x)
    return GroupoidElement(y, x.src, left_support(y))


def flow_base(w, p, q, t) -> ProjectionElement:
    """Induced motion of the target: T(L_t(sigma_p(q)))."""
    fl = w if isinstance(w, FlowGenerator) else FlowGenerator(w)
    _require_chart(p, q)
    return left_support(fl(t, partial_inverse(p @ q)))


def cocycle(w, p, q, t) -> AlgebraElement:
    """c_p(q, t) = p L_t(sigma_p(q)), an invertible element of pMp."""
    fl = w if isinstance(w, FlowGenerator) else FlowGenerator(w)
    _require_chart(p, q)
    c = p @ fl(t, partial_inverse(p @ q))
    _require_chart(p, left_support(fl(t, partial_inverse(p @ q))))
    return c


def central_fd(f, h=1e-5):
    """Central difference of a map t -> AlgebraElement (or complex) at t = 0."""
    return (f(h) - f(-h)) / (2 * h)
