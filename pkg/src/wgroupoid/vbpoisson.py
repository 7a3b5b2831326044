"""Poisson side of the VB-groupoid tower over the pair groupoid of P0.

Momentum maps and flat anchors of the pair-cotangent groupoid, the
morphism identities for the sharp maps, coset representatives for the
G0-quotients, and the coordinate layer on the quotients: the brackets in
the invariant coordinates (alpha, beta, y, Z, alpha~, beta~, y~), the
embedding a*_2 of the annihilator quotient and the projection iota*_2 to
the right groupoid quotient.

G0 acts by g.(phi, eta, psi, xi) = (g^-1 phi, eta g, g^-1 psi, xi g), on
right-groupoid arrows by (g^-1 chi g, eta g, xi g); flats transform
contragrediently so that the trace pairing is preserved.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .algebra import AlgebraElement, ProjectionElement, _rng, partial_inverse, polar_decompose, random_element
from .bundle import (
    random_bundle_point,
    random_bundle_point_in_chart,
    random_group_element,
    same_rank_projection,
)
from .errors import NonComposable, UnknownCheck
from .poisson import _g, cotangent_chart, transport_to_global
from .traceword import Observable, TraceWordObservable, jacobiator, random_trace_word, var
from .vb import (
    VBPoint,
    base_distance,
    dual_prolongation_spec,
    dual_tangent_right_spec,
    point_distance,
    sample_composable,
    tangent_prolongation_spec,
    tangent_right_spec,
)

EXACT_TOL = 1e-12
LINEAR_TOL = 1e-10


def _one(x):
    return AlgebraElement.identity(x.desc)


def _zero(x):
    return AlgebraElement.zero(x.desc)


def _rel(a, b):
    return (a - b).norm() / max(1.0, a.norm(), b.norm())


# ---------------------------------------------------------------- momenta

def momentum_J2(arrow) -> AlgebraElement:
    """phi eta + psi xi for a pair-cotangent arrow (a PairCotangentArrow or a VBPoint)."""
    if isinstance(arrow, VBPoint):
        (phi, psi), (eta, xi) = arrow.fiber, arrow.base
    else:
        phi, eta, psi, xi = arrow.phi, arrow.eta, arrow.psi, arrow.xi
    return phi @ eta + psi @ xi


def in_annihilator(arrow, tol=1e-10) -> bool:
    """Membership in J2^{-1}(0)."""
    J = momentum_J2(arrow)
    if isinstance(arrow, VBPoint):
        scale = max(1.0, *(x.norm() for x in arrow.fiber + arrow.base))
    else:
        scale = max(1.0, arrow.phi.norm(), arrow.psi.norm(), arrow.eta.norm(), arrow.xi.norm())
    return J.norm() <= tol * scale**2


def ad_star(x, beta):
    """Trace representative of b -> <beta, [x, b]>, namely [beta, x]."""
    return beta @ x - x @ beta


def J1_flat(phi_c, eta_c, phi, eta):
    return eta_c @ eta - phi @ phi_c


def J2_flat(phi_c, eta_c, psi_c, xi_c, phi, eta, psi, xi):
    return eta_c @ eta - phi @ phi_c + xi_c @ xi - psi @ psi_c


def J_flat(chi_c, chi, phi, eta, psi, xi):
    return ad_star(chi_c, chi) + phi @ eta + psi @ xi


# ---------------------------------------------------------------- flat anchors

def flat_anchor_1(X: VBPoint) -> VBPoint:
    """(phi°, eta° | phi, eta) -> (-eta°, phi° | phi, eta)."""
    phi_c, eta_c = X.fiber
    return VBPoint((-eta_c, phi_c), X.base)


def flat_anchor_2(X: VBPoint) -> VBPoint:
    """(phi°, eta°, psi°, xi° | base) -> (-eta°, phi°, -xi°, psi° | base)."""
    phi_c, eta_c, psi_c, xi_c = X.fiber
    return VBPoint((-eta_c, phi_c, -xi_c, psi_c), X.base)


def anchor_right(X: VBPoint) -> VBPoint:
    """(chi°, phi, psi | chi, eta, xi) -> (-ad*_{chi°} chi, 0, 0 | chi, eta, xi)."""
    chi_c = X.fiber[0]
    chi = X.base[0]
    z = _zero(chi)
    return VBPoint((-ad_star(chi_c, chi), z, z), X.base)


def a_star_right(e: VBPoint) -> VBPoint:
    """(chi°, phi | eta) -> (0 | eta)."""
    return VBPoint((_zero(e.base[0]),), e.base)


# ---------------------------------------------------------------- pair bracket

def pair_vars(p0: ProjectionElement):
    one = _one(p0)
    d = p0.desc
    return var(d, "phi", p0, one), var(d, "eta", one, p0), var(d, "psi", p0, one), var(d, "xi", one, p0)


def pair_bracket(f, g, env) -> complex:
    """Sum of the cotangent brackets of the two legs (phi, eta) and (psi, xi)."""
    out = 0j
    for a, b in (("phi", "eta"), ("psi", "xi")):
        out += (_g(g, b, env) @ _g(f, a, env)).trace() - (_g(f, b, env) @ _g(g, a, env)).trace()
    return out


def pair_hamiltonian(f, env) -> dict:
    """Hamiltonian field as the image of df under the flat anchor."""
    X = flat_anchor_2(VBPoint(tuple(_g(f, n, env) for n in ("phi", "eta", "psi", "xi")), ()))
    return dict(zip(("phi", "eta", "psi", "xi"), X.fiber))


def pair_jacobi(f, g, h, env):
    return jacobiator(pair_bracket, pair_hamiltonian, f, g, h, env)


def invariant_pair_word(p0: ProjectionElement, seed=None, degree=3, n_terms=3, legs=2) -> TraceWordObservable:
    """Random G0-invariant trace polynomial: a word in eta phi, eta psi, xi phi, xi psi."""
    phi, eta, psi, xi = pair_vars(p0)
    one = _one(p0)
    blocks = {"A": eta @ phi}
    if legs == 2:
        blocks.update({"B": eta @ psi, "C": xi @ phi, "D": xi @ psi})
    w = random_trace_word(p0.desc, {k: (one, one) for k in blocks}, seed, degree, n_terms)
    return w.subs(blocks)


def sample_pair_env(p0: ProjectionElement, seed=None) -> dict:
    rng = _rng(seed)
    return {
        "phi": p0 @ random_element(p0.desc, rng),
        "eta": random_bundle_point(p0, rng),
        "psi": p0 @ random_element(p0.desc, rng),
        "xi": random_bundle_point(p0, rng),
    }


def annihilator_env(p0: ProjectionElement, seed=None) -> dict:
    """Random point of J2^{-1}(0): phi solved from phi eta = -psi xi."""
    rng = _rng(seed)
    env = sample_pair_env(p0, rng)
    eta = env["eta"]
    ei = partial_inverse(eta)
    free = p0 @ random_element(p0.desc, rng) @ (_one(p0) - eta @ ei)
    env["phi"] = -env["psi"] @ env["xi"] @ ei + free
    return env


def tangency_check(f, env, h=1e-6) -> float:
    """Central difference of J2 along the Hamiltonian field of f, relative to the field size."""
    X = pair_hamiltonian(f, env)

    def J(t):
        return momentum_J2(VBPoint((env["phi"] + t * X["phi"], env["psi"] + t * X["psi"]),
                                   (env["eta"] + t * X["eta"], env["xi"] + t * X["xi"])))

    d = (J(h) - J(-h)) * (1 / (2 * h))
    return d.norm() / max(1.0, *(x.norm() for x in X.values()))


# ---------------------------------------------------------------- morphism identities

def morphism_check(dom, cod, F, f_base, pairs) -> dict:
    """Residuals of the four identities making (F, f_base) a VB-groupoid morphism.

    target(F X) = f_base(target X), source(F X) = f_base(source X),
    F(inverse X) = inverse(F X), F(X Y) = F(X) F(Y).
    """
    res = {"target": 0.0, "source": 0.0, "inverse": 0.0, "product": 0.0}
    for X, Y in pairs:
        FX = F(X)
        res["target"] = max(res["target"], point_distance(cod.target(FX), f_base(dom.target(X))))
        res["source"] = max(res["source"], point_distance(cod.source(FX), f_base(dom.source(X))))
        res["inverse"] = max(res["inverse"], point_distance(F(dom.inverse(X)), cod.inverse(FX)))
        try:
            prod = point_distance(F(dom.product(X, Y)), cod.product(FX, F(Y)))
        except NonComposable:
            prod = np.inf
        res["product"] = max(res["product"], prod)
    return res


def sharp_morphism_check(p0: ProjectionElement, n_samples=100, seed=0, sharp2=flat_anchor_2,
                         sharp1=flat_anchor_1, tol=EXACT_TOL) -> dict:
    """The flat anchors (#1, #2) as a morphism from the dual prolongation to the tangent prolongation."""
    rng = _rng(seed)
    dom, cod = dual_prolongation_spec(p0), tangent_prolongation_spec(p0)
    pairs = [tuple(sample_composable(dom, rng, 2)) for _ in range(n_samples)]
    res = morphism_check(dom, cod, sharp2, sharp1, pairs)
    worst = max(res.values())
    return {"residuals": res, "max_residual": worst, "samples": n_samples, "tol": tol, "passed": worst <= tol}


# ---------------------------------------------------------------- G0 action

def act_pair(g, gi, base):
    phi, eta, psi, xi = base
    return (gi @ phi, eta @ g, gi @ psi, xi @ g)


def act_tangent_pair(g, gi, X: VBPoint) -> VBPoint:
    a, b, c, d = X.fiber
    return VBPoint((gi @ a, b @ g, gi @ c, d @ g), act_pair(g, gi, X.base))


def act_flat_pair(g, gi, X: VBPoint) -> VBPoint:
    a, b, c, d = X.fiber
    return VBPoint((a @ g, gi @ b, c @ g, gi @ d), act_pair(g, gi, X.base))


def act_right(g, gi, base):
    chi, eta, xi = base
    return (gi @ chi @ g, eta @ g, xi @ g)


def act_tangent_right(g, gi, X: VBPoint) -> VBPoint:
    c, v, w = X.fiber
    return VBPoint((gi @ c @ g, v @ g, w @ g), act_right(g, gi, X.base))


def act_flat_right(g, gi, X: VBPoint) -> VBPoint:
    c, phi, psi = X.fiber
    return VBPoint((gi @ c @ g, gi @ phi, gi @ psi), act_right(g, gi, X.base))


def _group_element(p0, rng):
    g = random_group_element(p0, rng)
    return g, partial_inverse(g)


# ---------------------------------------------------------------- coset representatives

def vertical(base, x):
    """Infinitesimal gauge direction of x in p0Mp0 at a pair-cotangent point."""
    phi, eta, psi, xi = base
    return (-x @ phi, eta @ x, -x @ psi, xi @ x)


def q1_rep(phi_dot, eta_dot, phi, eta):
    """Representative of (phi', eta') modulo (-x phi, eta x) with eta' + eta x of least norm."""
    x = -(partial_inverse(eta) @ eta_dot)
    return phi_dot - x @ phi, eta_dot + eta @ x


def q2_gauge(eta_dot, xi_dot, eta, xi):
    gram = eta.H @ eta + xi.H @ xi
    return -(partial_inverse(gram) @ (eta.H @ eta_dot + xi.H @ xi_dot))


def q2_rep(X: VBPoint) -> VBPoint:
    """Representative of a tangent-prolongation vector modulo the diagonal gauge directions."""
    a, b, c, d = X.fiber
    _, eta, _, xi = X.base
    x = q2_gauge(b, d, eta, xi)
    v = vertical(X.base, x)
    return VBPoint(tuple(u + w for u, w in zip(X.fiber, v)), X.base)


def q_equal(X: VBPoint, Y: VBPoint, tol=1e-9):
    """Whether X - Y is a gauge direction; returns (flag, x) with x solving it."""
    if base_distance(X.base, Y.base) > tol:
        return False, None
    _, eta, _, xi = X.base
    d = [u - w for u, w in zip(X.fiber, Y.fiber)]
    x = -q2_gauge(d[1], d[3], eta, xi)
    v = vertical(X.base, x)
    ok = max(_rel(a, b) for a, b in zip(d, v)) <= tol
    return ok, x


def qt1_rep(v, eta):
    """Representative of v modulo eta p0Mp0."""
    return v - eta @ partial_inverse(eta) @ v


def qt2_rep(X: VBPoint) -> VBPoint:
    """Representative of a tangent-right vector (chi', v, w | chi, eta, xi) modulo gauge directions."""
    c, v, w = X.fiber
    chi, eta, xi = X.base
    x = q2_gauge(v, w, eta, xi)
    return VBPoint((c + chi @ x - x @ chi, v + eta @ x, w + xi @ x), X.base)


def quotient_morphism_check(p0: ProjectionElement, n_samples=50, seed=0, tol=1e-9) -> dict:
    """The tangent prolongation descends to the gauge quotient.

    Structural maps commute with the gauge directions, the class of a product
    does not depend on representatives, and coset equality recovers x.
    """
    rng = _rng(seed)
    T = tangent_prolongation_spec(p0)
    res = {"equivariance": 0.0, "class_product": 0.0, "coset_recovery": 0.0, "target_class": 0.0}
    for _ in range(n_samples):
        X, Y = sample_composable(T, rng, 2)
        x = p0 @ random_element(p0.desc, rng) @ p0

        def shift(P):
            return VBPoint(tuple(u + w for u, w in zip(P.fiber, vertical(P.base, x))), P.base)

        XY = T.product(X, Y)
        res["equivariance"] = max(res["equivariance"], point_distance(T.product(shift(X), shift(Y)), shift(XY)))
        res["equivariance"] = max(res["equivariance"], point_distance(T.inverse(shift(X)), shift(T.inverse(X))))
        res["class_product"] = max(res["class_product"],
                                   point_distance(q2_rep(T.product(shift(X), shift(Y))), q2_rep(XY)))
        ok, xr = q_equal(shift(X), X, tol)
        res["coset_recovery"] = max(res["coset_recovery"], np.inf if not ok else _rel(xr, x))
        t1, t2 = T.target(X), T.target(shift(X))
        r1 = q1_rep(*t1.fiber, *t1.base)
        r2 = q1_rep(*t2.fiber, *t2.base)
        res["target_class"] = max(res["target_class"], max(_rel(a, b) for a, b in zip(r1, r2)))
    worst = max(res.values())
    return {"residuals": res, "max_residual": worst, "tol": tol, "passed": worst <= tol}


# ---------------------------------------------------------------- quotient coordinate layer

@dataclass(frozen=True)
class QuotientCharts:
    """Chart pair (p, p~) and the base projection p0 of the quotient coordinates."""

    p: ProjectionElement
    pt: ProjectionElement
    p0: ProjectionElement


def quotient_vars(c: QuotientCharts) -> dict:
    one = _one(c.p)
    q, qt = one - c.p, one - c.pt
    d = c.p.desc
    corners = {
        "alpha": (c.p, q), "beta": (c.p, c.p), "y": (q, c.p), "Z": (c.p, c.pt),
        "alphat": (c.pt, qt), "betat": (c.pt, c.pt), "yt": (qt, c.pt),
        "B": (c.pt, c.p), "chi": (c.p, c.p),
    }
    return {k: var(d, k, *v) for k, v in corners.items()}


def quotient_corners(c: QuotientCharts, names) -> dict:
    vs = quotient_vars(c)
    return {n: vs[n].corners[n] for n in names}


MIDDLE = ("alpha", "beta", "y", "Z", "alphat", "betat", "yt")
GAUGE_COTANGENT = ("alpha", "B", "alphat", "y", "Z", "yt")
RIGHTMOST = ("chi", "y", "Z", "yt")


def _pairs_term(f, g, env, pairs):
    out = 0j
    for q, p in pairs:
        out += (_g(g, q, env) @ _g(f, p, env)).trace() - (_g(f, q, env) @ _g(g, p, env)).trace()
    return out


def _lp(x, a, b):
    return (x @ (a @ b - b @ a)).trace()


def bracket_middle(f, g, env) -> complex:
    """Bracket on the quotient of the pair-cotangent groupoid in (alpha, beta, y, Z, alpha~, beta~, y~)."""
    out = _pairs_term(f, g, env, (("y", "alpha"), ("yt", "alphat")))
    fb, gb = _g(f, "beta", env), _g(g, "beta", env)
    fbt, gbt = _g(f, "betat", env), _g(g, "betat", env)
    Z = env["Z"]
    out += _lp(env["beta"], gb, fb) + _lp(env["betat"], gbt, fbt)
    out += (_g(g, "Z", env) @ (fb @ Z - Z @ fbt)).trace() - (_g(f, "Z", env) @ (gb @ Z - Z @ gbt)).trace()
    return out


def hamiltonian_middle(f, env) -> dict:
    fb, fbt, fZ = _g(f, "beta", env), _g(f, "betat", env), _g(f, "Z", env)
    b, bt, Z = env["beta"], env["betat"], env["Z"]
    return {
        "alpha": -_g(f, "y", env),
        "beta": fb @ b - b @ fb - Z @ fZ,
        "y": _g(f, "alpha", env),
        "Z": fb @ Z - Z @ fbt,
        "alphat": -_g(f, "yt", env),
        "betat": fbt @ bt - bt @ fbt + fZ @ Z,
        "yt": _g(f, "alphat", env),
    }


def bracket_gauge_cotangent(f, g, env) -> complex:
    """Canonical bracket on the annihilator quotient in (alpha, B, alpha~, y, Z, y~)."""
    return _pairs_term(f, g, env, (("y", "alpha"), ("yt", "alphat"), ("Z", "B")))


def hamiltonian_gauge_cotangent(f, env) -> dict:
    return {
        "alpha": -_g(f, "y", env), "B": -_g(f, "Z", env), "alphat": -_g(f, "yt", env),
        "y": _g(f, "alpha", env), "Z": _g(f, "B", env), "yt": _g(f, "alphat", env),
    }


def bracket_rightmost(F, G, env) -> complex:
    """-<chi, [F_chi, G_chi]>; y, Z and y~ are Casimirs."""
    return -_lp(env["chi"], _g(F, "chi", env), _g(G, "chi", env))


def hamiltonian_rightmost(F, env) -> dict:
    Fc, chi = _g(F, "chi", env), env["chi"]
    z = {k: _zero(env[k]) for k in ("y", "Z", "yt")}
    return {"chi": Fc @ chi - chi @ Fc, **z}


BRACKETS = {
    "middle": (bracket_middle, hamiltonian_middle, MIDDLE),
    "gauge-cotangent": (bracket_gauge_cotangent, hamiltonian_gauge_cotangent, GAUGE_COTANGENT),
    "rightmost": (bracket_rightmost, hamiltonian_rightmost, RIGHTMOST),
}


def coordinate_jacobi(kind, f, g, h, env):
    br, ham, _ = BRACKETS[kind]
    return jacobiator(br, ham, f, g, h, env)


def hamiltonian_consistency(kind, f, g, env) -> float:
    """|{f, g} - dg(X_f)| for the coordinate anchor of ``kind``."""
    br, ham, names = BRACKETS[kind]
    X = ham(f, env)
    dg = sum((_g(g, n, env) @ X[n]).trace() for n in names)
    return abs(br(f, g, env) - dg)


def random_coordinate_word(c: QuotientCharts, kind, seed=None, degree=3, n_terms=3) -> TraceWordObservable:
    names = BRACKETS[kind][2]
    return random_trace_word(c.p.desc, quotient_corners(c, names), seed, degree, n_terms)


def random_coordinate_env(c: QuotientCharts, kind, seed=None, scale=1.0) -> dict:
    rng = _rng(seed)
    out = {}
    for n, (l, r) in quotient_corners(c, BRACKETS[kind][2]).items():
        out[n] = scale * (l @ random_element(c.p.desc, rng) @ r)
    if "Z" in out:
        out["Z"] = _well_conditioned(c.p, c.pt, rng)
    return out


def _well_conditioned(p, pt, rng):
    """Invertible element of pMp~ with singular values in [1/2, 2]."""
    while True:
        Z = p @ random_element(p.desc, rng) @ pt
        u = polar_decompose(Z).u
        w = pt @ random_element(p.desc, rng) @ pt
        h = 0.25 * (w + w.H)
        Z = u @ (pt + h)
        s = [np.linalg.svd(b, compute_uv=False) for b in (Z.blocks)]
        nz = np.concatenate([v[v > 1e-12] for v in s])
        if nz.size and nz.min() > 0.5 and nz.max() < 2:
            return Z


def a_star_2(env: dict) -> dict:
    """Annihilator quotient -> pair-cotangent quotient: beta = Z B, beta~ = -B Z."""
    Z, B = env["Z"], env["B"]
    return {"alpha": env["alpha"], "beta": Z @ B, "y": env["y"], "Z": Z,
            "alphat": env["alphat"], "betat": -(B @ Z), "yt": env["yt"]}


def a_star_2_subs(f: TraceWordObservable, c: QuotientCharts) -> TraceWordObservable:
    v = quotient_vars(c)
    return f.subs({"beta": v["Z"] @ v["B"], "betat": -(v["B"] @ v["Z"])})


def iota_star_2(env: dict) -> dict:
    """Pair-cotangent quotient -> right groupoid quotient: chi = beta + Z beta~ Z^{-1}."""
    Z = env["Z"]
    return {"chi": env["beta"] + Z @ env["betat"] @ partial_inverse(Z),
            "y": env["y"], "Z": Z, "yt": env["yt"]}


def pullback_iota_star_2(F) -> Observable:
    """F o iota*_2 as an observable in the middle coordinates with exact gradients."""

    def grads(env):
        e = iota_star_2(env)
        Fc = _g(F, "chi", e)
        Z, bt = env["Z"], env["betat"]
        Zi = partial_inverse(Z)
        return {
            "alpha": _zero(Z), "alphat": _zero(Z),
            "beta": Fc,
            "betat": Zi @ Fc @ Z,
            "Z": _g(F, "Z", e) + bt @ Zi @ Fc - Zi @ Fc @ Z @ bt @ Zi,
            "y": _g(F, "y", e), "yt": _g(F, "yt", e),
        }

    return Observable(
        lambda env: F(iota_star_2(env)),
        {n: (lambda env, n=n: grads(env)[n]) for n in MIDDLE},
    )


def quotient_pair_coords(c: QuotientCharts, phi, eta, psi, xi) -> dict:
    """Invariant coordinates of a pair-cotangent point; NotInChart outside the chart pair."""
    q1 = cotangent_chart(c.p, phi, eta)
    q2 = cotangent_chart(c.pt, psi, xi)
    return {"alpha": q1.alpha, "beta": q1.beta, "y": q1.y, "Z": q1.z @ partial_inverse(q2.z),
            "alphat": q2.alpha, "betat": q2.beta, "yt": q2.y}


def transport_pair(f, c: QuotientCharts) -> Observable:
    """f o (invariant coordinates) as an observable in (phi, eta, psi, xi)."""

    def legs(env):
        q1 = cotangent_chart(c.p, env["phi"], env["eta"])
        q2 = cotangent_chart(c.pt, env["psi"], env["xi"])
        zti = partial_inverse(q2.z)
        Z = q1.z @ zti
        qe = {"alpha": q1.alpha, "beta": q1.beta, "y": q1.y, "Z": Z,
              "alphat": q2.alpha, "betat": q2.beta, "yt": q2.y}
        fZ = _g(f, "Z", qe)
        leg1 = Observable(lambda ce: f(qe), {
            "alpha": lambda ce: _g(f, "alpha", qe), "beta": lambda ce: _g(f, "beta", qe),
            "y": lambda ce: _g(f, "y", qe), "z": lambda ce: zti @ fZ,
        })
        leg2 = Observable(lambda ce: f(qe), {
            "alpha": lambda ce: _g(f, "alphat", qe), "beta": lambda ce: _g(f, "betat", qe),
            "y": lambda ce: _g(f, "yt", qe), "z": lambda ce: -(zti @ fZ @ Z),
        })
        return qe, leg1, leg2

    def grad(name):
        def g(env):
            _, leg1, leg2 = legs(env)
            if name in ("phi", "eta"):
                return transport_to_global(leg1, c.p, c.p0).grad(name)({"phi": env["phi"], "eta": env["eta"]})
            key = "phi" if name == "psi" else "eta"
            return transport_to_global(leg2, c.pt, c.p0).grad(key)({"phi": env["psi"], "eta": env["xi"]})
        return g

    return Observable(lambda env: f(legs(env)[0]), {n: grad(n) for n in ("phi", "eta", "psi", "xi")})


def sample_chart_pair_env(c: QuotientCharts, seed=None, scale=0.5) -> dict:
    """Pair-cotangent point whose legs lie in the charts p and p~."""
    rng = _rng(seed)
    return {
        "phi": c.p0 @ random_element(c.p.desc, rng),
        "eta": random_bundle_point_in_chart(c.p, c.p0, rng, scale),
        "psi": c.p0 @ random_element(c.p.desc, rng),
        "xi": random_bundle_point_in_chart(c.pt, c.p0, rng, scale),
    }


def random_charts(p0: ProjectionElement, seed=None) -> QuotientCharts:
    rng = _rng(seed)
    return QuotientCharts(same_rank_projection(p0, rng), same_rank_projection(p0, rng), p0)


# quotient structural maps on (alpha, beta, y, Z, alpha~, beta~, y~)

def quotient_source(w: dict) -> dict:
    return {"alpha": -w["alphat"], "beta": -w["betat"], "y": w["yt"]}


def quotient_target(w: dict) -> dict:
    return {"alpha": w["alpha"], "beta": w["beta"], "y": w["y"]}


def quotient_unit(e: dict, p) -> dict:
    return {"alpha": e["alpha"], "beta": e["beta"], "y": e["y"], "Z": AlgebraElement(p.desc, p.blocks),
            "alphat": -e["alpha"], "betat": -e["beta"], "yt": e["y"]}


def quotient_product(w: dict, v: dict) -> dict:
    for a, b in (("alphat", "alpha"), ("betat", "beta")):
        if _rel(-w[a], v[b]) > 1e-8:
            raise NonComposable("quotient arrows are not composable")
    if _rel(w["yt"], v["y"]) > 1e-8:
        raise NonComposable("quotient arrows are not composable")
    return {"alpha": w["alpha"], "beta": w["beta"], "y": w["y"], "Z": w["Z"] @ v["Z"],
            "alphat": v["alphat"], "betat": v["betat"], "yt": v["yt"]}


def quotient_inverse(w: dict) -> dict:
    """Inverse, expressed in the swapped chart pair (p~, p)."""
    return {"alpha": -w["alphat"], "beta": -w["betat"], "y": w["yt"], "Z": partial_inverse(w["Z"]),
            "alphat": -w["alpha"], "betat": -w["beta"], "yt": w["y"]}


def _dict_distance(a: dict, b: dict) -> float:
    return max(_rel(a[k], b[k]) for k in a)


def quotient_structure_check(p0: ProjectionElement, n_samples=20, seed=0) -> float:
    """Coordinate structural maps against the maps of the pair-cotangent groupoid."""
    rng = _rng(seed)
    worst = 0.0
    for _ in range(n_samples):
        p, pt, ph = (same_rank_projection(p0, rng) for _ in range(3))
        c1, c2 = QuotientCharts(p, pt, p0), QuotientCharts(pt, ph, p0)
        e1 = sample_chart_pair_env(c1, rng)
        e2 = sample_chart_pair_env(c2, rng)
        # second arrow starts where the first one ends
        e2["phi"], e2["eta"] = -e1["psi"], e1["xi"]
        w = quotient_pair_coords(c1, e1["phi"], e1["eta"], e1["psi"], e1["xi"])
        v = quotient_pair_coords(c2, e2["phi"], e2["eta"], e2["psi"], e2["xi"])
        wv = quotient_pair_coords(QuotientCharts(p, ph, p0), e1["phi"], e1["eta"], e2["psi"], e2["xi"])
        worst = max(worst, _dict_distance(quotient_product(w, v), wv))
        inv = quotient_pair_coords(QuotientCharts(pt, p, p0), -e1["psi"], e1["xi"], -e1["phi"], e1["eta"])
        worst = max(worst, _dict_distance(quotient_inverse(w), inv))
        src = cotangent_chart(pt, -e1["psi"], e1["xi"])
        worst = max(worst, _dict_distance(quotient_source(w), {"alpha": src.alpha, "beta": src.beta, "y": src.y}))
        tgt = cotangent_chart(p, e1["phi"], e1["eta"])
        worst = max(worst, _dict_distance(quotient_target(w), {"alpha": tgt.alpha, "beta": tgt.beta, "y": tgt.y}))
        unit = quotient_pair_coords(QuotientCharts(p, p, p0), e1["phi"], e1["eta"], -e1["phi"], e1["eta"])
        worst = max(worst, _dict_distance(quotient_unit(quotient_target(w), p), unit))
    return worst


# cross-checks of the coordinate layer

def middle_vs_pair_check(p0: ProjectionElement, n_samples=10, seed=0) -> float:
    """Middle coordinate bracket against the pair bracket of transported observables."""
    rng = _rng(seed)
    worst = 0.0
    for _ in range(n_samples):
        c = random_charts(p0, rng)
        f, g = (random_coordinate_word(c, "middle", rng) for _ in range(2))
        env = sample_chart_pair_env(c, rng)
        qe = quotient_pair_coords(c, env["phi"], env["eta"], env["psi"], env["xi"])
        lhs = bracket_middle(f, g, qe)
        rhs = pair_bracket(transport_pair(f, c), transport_pair(g, c), env)
        worst = max(worst, abs(lhs - rhs) / max(1.0, abs(lhs)))
    return worst


def exactness_check(p0: ProjectionElement, n_samples=20, seed=0) -> float:
    """chi-part of iota*_2 o a*_2, relative to the size of the input."""
    rng = _rng(seed)
    worst = 0.0
    for _ in range(n_samples):
        c = random_charts(p0, rng)
        env = random_coordinate_env(c, "gauge-cotangent", rng)
        chi = iota_star_2(a_star_2(env))["chi"]
        worst = max(worst, chi.norm() / max(1.0, env["B"].norm() * env["Z"].norm()))
    return worst


def a_star_2_poisson_check(p0: ProjectionElement, n_samples=10, seed=0) -> float:
    """a*_2 intertwines the annihilator-quotient and middle brackets."""
    rng = _rng(seed)
    worst = 0.0
    for _ in range(n_samples):
        c = random_charts(p0, rng)
        f, g = (random_coordinate_word(c, "middle", rng) for _ in range(2))
        env = random_coordinate_env(c, "gauge-cotangent", rng)
        lhs = bracket_gauge_cotangent(a_star_2_subs(f, c), a_star_2_subs(g, c), env)
        rhs = bracket_middle(f, g, a_star_2(env))
        worst = max(worst, abs(lhs - rhs) / max(1.0, abs(rhs)))
    return worst


def iota_star_2_poisson_check(p0: ProjectionElement, n_samples=10, seed=0) -> float:
    """iota*_2 intertwines the middle and rightmost brackets."""
    rng = _rng(seed)
    worst = 0.0
    for _ in range(n_samples):
        c = random_charts(p0, rng)
        F, G = (random_coordinate_word(c, "rightmost", rng) for _ in range(2))
        env = random_coordinate_env(c, "middle", rng)
        lhs = bracket_middle(pullback_iota_star_2(F), pullback_iota_star_2(G), env)
        rhs = bracket_rightmost(F, G, iota_star_2(env))
        worst = max(worst, abs(lhs - rhs) / max(1.0, abs(rhs)))
    return worst


def jacobi_check(p0: ProjectionElement, kind="rightmost", n_samples=10, seed=0) -> float:
    rng = _rng(seed)
    worst = 0.0
    for _ in range(n_samples):
        c = random_charts(p0, rng)
        f, g, h = (random_coordinate_word(c, kind, rng) for _ in range(3))
        env = random_coordinate_env(c, kind, rng)
        total, scale = coordinate_jacobi(kind, f, g, h, env)
        worst = max(worst, abs(total) / max(1.0, scale))
    return worst


# ---------------------------------------------------------------- sub-Poisson groupoids

SUB_POISSON_GROUPOIDS = ("pair-cotangent-quotient", "cotangent-of-gauge", "rightmost")


def _annihilator_flat_pair(p0, rng):
    """Composable flats X, Y over arrows of J2^{-1}(0) with J2_flat(X) = J2_flat(Y) = 0."""
    one = _one(p0)
    d = p0.desc

    def r(left, right):
        return left @ random_element(d, rng) @ right

    env = annihilator_env(p0, rng)
    phi, eta, psi, xi = env["phi"], env["eta"], env["psi"], env["xi"]
    zeta = random_bundle_point(p0, rng)
    zi = partial_inverse(zeta)
    lam = psi @ xi @ zi + r(p0, one) @ (one - zeta @ zi)

    phi_c, psi_c, xi_c = r(one, p0), r(one, p0), r(p0, one)
    ei = partial_inverse(eta)
    R = phi @ phi_c - xi_c @ xi + psi @ psi_c
    eta_c = R @ ei + r(p0, one) @ (one - eta @ ei)
    X = VBPoint((phi_c, eta_c, psi_c, xi_c), (phi, eta, psi, xi))

    Bx = xi_c @ xi - psi @ psi_c
    sig_c = r(one, p0)
    lam_c = (Bx + lam @ sig_c) @ zi + r(p0, one) @ (one - zeta @ zi)
    Y = VBPoint((psi_c, -xi_c, sig_c, lam_c), (-psi, xi, lam, zeta))
    return X, Y


def _right_flat_pair(p0, rng):
    dom = dual_tangent_right_spec(p0)
    return tuple(sample_composable(dom, rng, 2))


def _flip(sharp):
    def bad(X):
        out = sharp(X)
        return VBPoint((-out.fiber[0],) + tuple(out.fiber[1:]), out.base)
    return bad


def sub_poisson_groupoid_check(groupoid_id: str, p0: ProjectionElement, n_samples=30, seed=0,
                               sharp=None, tol=LINEAR_TOL) -> dict:
    """Verify that the anchor pair is a VB-groupoid morphism for the chosen groupoid.

    The identities are checked upstairs, before dividing by G0, together with
    G0-equivariance of the anchor (so that it descends) and consistency of the
    coordinate anchor on the quotient with its bracket.  For the
    cotangent-of-gauge groupoid samples are restricted to J2 = 0 and
    J2_flat = 0 and the anchor must be tangent to J2^{-1}(0).
    """
    if groupoid_id not in SUB_POISSON_GROUPOIDS:
        raise UnknownCheck(groupoid_id)
    rng = _rng(seed)
    res = {}
    if groupoid_id == "rightmost":
        dom, cod = dual_tangent_right_spec(p0), tangent_right_spec(p0)
        F = anchor_right if sharp is None else sharp
        pairs = [_right_flat_pair(p0, rng) for _ in range(n_samples)]
        res.update(morphism_check(dom, cod, F, a_star_right, pairs))
        act_dom, act_cod, kind = act_flat_right, act_tangent_right, "rightmost"
    else:
        dom, cod = dual_prolongation_spec(p0), tangent_prolongation_spec(p0)
        F = flat_anchor_2 if sharp is None else sharp
        if groupoid_id == "cotangent-of-gauge":
            pairs = [_annihilator_flat_pair(p0, rng) for _ in range(n_samples)]
            tang = 0.0
            for X, Y in pairs:
                for P in (X, Y, dom.product(X, Y)):
                    V = F(P)
                    phi, eta, psi, xi = P.base
                    a, b, c, d = V.fiber
                    dJ = a @ eta + phi @ b + c @ xi + psi @ d
                    tang = max(tang, dJ.norm() / max(1.0, *(u.norm() for u in V.fiber + P.base)) ** 2)
            res["tangency"] = tang
            kind = "gauge-cotangent"
        else:
            pairs = [tuple(sample_composable(dom, rng, 2)) for _ in range(n_samples)]
            kind = "middle"
        res.update(morphism_check(dom, cod, F, flat_anchor_1, pairs))
        act_dom, act_cod = act_flat_pair, act_tangent_pair
    eq = 0.0
    for X, _ in pairs:
        g, gi = _group_element(p0, rng)
        eq = max(eq, point_distance(F(act_dom(g, gi, X)), act_cod(g, gi, F(X))))
    res["equivariance"] = eq
    cons = 0.0
    for _ in range(max(1, n_samples // 10)):
        c = random_charts(p0, rng)
        f, g = (random_coordinate_word(c, kind, rng) for _ in range(2))
        env = random_coordinate_env(c, kind, rng)
        cons = max(cons, hamiltonian_consistency(kind, f, g, env) / max(1.0, abs(BRACKETS[kind][0](f, g, env))))
    res["coordinate_anchor"] = cons
    worst = max(res.values())
    return {"groupoid": groupoid_id, "residuals": res, "max_residual": worst,
            "samples": n_samples, "tol": tol, "passed": worst <= tol}


def _leaky_right(X: VBPoint) -> VBPoint:
    out = anchor_right(X)
    chi_c, eta = X.fiber[0], X.base[1]
    return VBPoint((out.fiber[0], eta @ chi_c, out.fiber[2]), out.base)


def sub_poisson_negative_control(groupoid_id: str, p0: ProjectionElement, n_samples=10, seed=0) -> dict:
    """The check with a corrupted anchor; expected to fail.

    Every map linear in chi is a morphism of the right groupoids, so there the
    corruption adds an eta-leg instead of flipping a sign.
    """
    bad = _leaky_right if groupoid_id == "rightmost" else _flip(flat_anchor_2)
    return sub_poisson_groupoid_check(groupoid_id, p0, n_samples, seed, sharp=bad)
