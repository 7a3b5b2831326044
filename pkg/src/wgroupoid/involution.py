"""The involution J(x) = iota(x)*, partial isometries and the orthocomplement on the lattice.

Charts on the partial isometries use the isometric corner component
z = w_t^* x w_s, where w_t and w_s are the polar parts of q p and q~ p~
(q, q~ the target and source of x).  For a partial isometry this z is a
unitary from p~M to pM, and J acts on it as J; with the section (pq)^{-1}
in place of w_t that would fail away from q = p.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm, schur

from .algebra import (
    AlgebraDescriptor,
    AlgebraElement,
    ProjectionElement,
    _rng,
    as_projection,
    left_support,
    partial_inverse,
    polar_decompose,
    random_element,
    random_unitary,
    rank_vector,
)
from .errors import CornerError, LogBranchError
from .groupoid import GroupoidElement, _require_chart, as_arrow, chart_phi, chart_phi_inv, chart_psi

ISOMETRY_TOL = 1e-10
# eigenvalues of the corner unitary closer than this to -1 are on the branch cut
BRANCH_TOL = 1e-8


def j_involution(x):
    """J(x) = iota(x)^*; accepts algebra or groupoid elements."""
    if isinstance(x, GroupoidElement):
        return GroupoidElement(partial_inverse(x.x).H, x.src, x.tgt)
    return partial_inverse(x).H


def isometry_defect(x: AlgebraElement) -> float:
    return (x @ x.H @ x - x).norm()


def is_partial_isometry(x: AlgebraElement, tol=1e-8) -> bool:
    return isometry_defect(x) <= tol * max(1.0, x.norm())


def is_j_fixed(x: AlgebraElement, tol=1e-8) -> bool:
    return (j_involution(x) - x).norm() <= tol * max(1.0, x.norm())


@dataclass(frozen=True)
class PartialIsometry:
    u: AlgebraElement

    def __post_init__(self):
        if isometry_defect(self.u) > ISOMETRY_TOL * max(1.0, self.u.norm()):
            raise CornerError("u u* u differs from u")

    @property
    def source(self) -> ProjectionElement:
        return as_projection(self.u.H @ self.u)

    @property
    def target(self) -> ProjectionElement:
        return as_projection(self.u @ self.u.H)


def random_partial_isometry(desc, seed=None, src=None, tgt=None) -> AlgebraElement:
    """Polar part of a random element of tgt M src."""
    rng = _rng(seed)
    x = random_element(desc, rng)
    if tgt is not None:
        x = tgt @ x
    if src is not None:
        x = x @ src
    return polar_decompose(x).u


# ---------------------------------------------------------------- unitary charts

def _isometric_sections(p, pt, x):
    tr = chart_psi(p, pt, x)
    wt = polar_decompose(chart_phi_inv(p, tr.y) @ p).u
    ws = polar_decompose(chart_phi_inv(pt, tr.yt) @ pt).u
    return tr, wt, ws


def isometric_component(p, pt, x) -> AlgebraElement:
    _, wt, ws = _isometric_sections(p, pt, x)
    return wt.H @ as_arrow(x).x @ ws


def _corner_frames(pt):
    """Orthonormal bases of the ranges of pt, block by block."""
    out = []
    for b, r in zip(pt.blocks, rank_vector(pt)):
        w, V = np.linalg.eigh(b)
        out.append(V[:, np.argsort(w)[::-1][:r]])
    return out


def corner_log(u: AlgebraElement, pt: ProjectionElement) -> AlgebraElement:
    """-i log u for a unitary u of the corner pt M pt, principal branch."""
    blocks = []
    for b, V in zip(u.blocks, _corner_frames(pt)):
        n = b.shape[0]
        if V.shape[1] == 0:
            blocks.append(np.zeros((n, n), complex))
            continue
        T, Q = schur(V.conj().T @ b @ V, output="complex")
        lam = np.diag(T)
        if np.any(np.abs(lam + 1) < BRANCH_TOL):
            raise LogBranchError("corner unitary has spectrum on the branch cut")
        h = Q @ np.diag(-1j * np.log(lam)) @ Q.conj().T
        blocks.append(V @ h @ V.conj().T)
    return AlgebraElement(u.desc, blocks)


def corner_exp(h: AlgebraElement, pt: ProjectionElement) -> AlgebraElement:
    """exp(i h) inside the corner pt M pt."""
    blocks = []
    for b, V in zip(h.blocks, _corner_frames(pt)):
        n = b.shape[0]
        if V.shape[1] == 0:
            blocks.append(np.zeros((n, n), complex))
            continue
        blocks.append(V @ expm(1j * (V.conj().T @ b @ V)) @ V.conj().T)
    return AlgebraElement(h.desc, blocks)


@dataclass(frozen=True)
class UnitaryChartTriple:
    p: ProjectionElement
    pt: ProjectionElement
    y: AlgebraElement
    h: AlgebraElement
    yt: AlgebraElement


def unitary_chart(p, pt, z0, x) -> UnitaryChartTriple:
    """(y_p, -i log(z0^{-1} z), y~_p~) for a partial isometry x in the chart domain.

    z0 is a reference partial isometry from p~ to p supplied by the caller.
    """
    u = as_arrow(x).x
    if not is_partial_isometry(u):
        raise CornerError("x is not a partial isometry")
    tr, wt, ws = _isometric_sections(p, pt, x)
    z = wt.H @ u @ ws
    h = corner_log(partial_inverse(z0) @ z, pt)
    return UnitaryChartTriple(p, pt, tr.y, h, tr.yt)


def unitary_chart_inv(c: UnitaryChartTriple, z0) -> AlgebraElement:
    q = chart_phi_inv(c.p, c.y)
    qt = chart_phi_inv(c.pt, c.yt)
    wt = polar_decompose(q @ c.p).u
    ws = polar_decompose(qt @ c.pt).u
    return wt @ z0 @ corner_exp(c.h, c.pt) @ ws.H


# ---------------------------------------------------------------- orthocomplement

def perp(p: ProjectionElement) -> ProjectionElement:
    return p.complement()


def perp_transition(p: ProjectionElement, y: AlgebraElement) -> AlgebraElement:
    """y_{p-perp} = [(1-p)(1 - (p+y)(p+y)^{-1})]^{-1} - (1-p)."""
    one = AlgebraElement.identity(p.desc)
    q = left_support(p + y)
    _require_chart(perp(p), as_projection(one - q))
    return partial_inverse((one - p) @ (one - q)) - (one - p)


def perp_oracle(p: ProjectionElement, y: AlgebraElement) -> AlgebraElement:
    """The same coordinate via the lattice charts: phi_{p-perp}(1 - phi_p^{-1}(y))."""
    one = AlgebraElement.identity(p.desc)
    return chart_phi(perp(p), as_projection(one - chart_phi_inv(p, y)))


def t_family(t: float):
    """M2, p = e11, y = t e21; returns (p, y, expected y_perp = -t e12)."""
    d = AlgebraDescriptor.parse("M2")
    e11 = AlgebraElement.unit(d, 0, 0, 0)
    p = as_projection(e11)
    return p, t * AlgebraElement.unit(d, 0, 1, 0), -t * AlgebraElement.unit(d, 0, 0, 1)


def unitary_gauge_arrow_check(p0: ProjectionElement, seed=None) -> float:
    """Gauge arrows of P0 intersected with the partial isometries are J-fixed and U0-invariant."""
    rng = _rng(seed)
    eta = random_partial_isometry(p0.desc, rng, src=p0)
    xi = random_partial_isometry(p0.desc, rng, src=p0)
    g = polar_decompose(p0 @ random_unitary(p0.desc, rng) @ p0).u
    x = eta @ partial_inverse(xi)
    xg = (eta @ g) @ partial_inverse(xi @ g)
    return max((j_involution(x) - x).norm(), (xg - x).norm())
