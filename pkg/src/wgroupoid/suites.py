"""Sample-based checks of every identity the library implements.

Each check takes a :class:`Context` (algebra, base projection p0, generator,
sample budget) and returns an :class:`Outcome` carrying the largest relative
residual seen.  The harness decides PASS/FAIL against its tolerance table.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import algebroid as ag
from . import involution as inv
from . import poisson as ps
from . import vb
from . import vbpoisson as vp
from .algebra import (
    AlgebraDescriptor,
    AlgebraElement,
    ProjectionElement,
    as_projection,
    central_projections,
    corner_basis,
    corner_dim,
    is_central,
    left_support,
    matrix_units,
    pairing,
    partial_inverse,
    polar_decompose,
    random_element,
    random_projection,
    random_rank_vector,
    rank_vector,
    right_support,
)
from .bundle import (
    action_groupoid_embed,
    act,
    bundle_chart,
    bundle_chart_inv,
    gauge_arrow,
    gauge_base,
    random_bundle_point,
    random_group_element,
    random_bundle_point_in_chart,
)
from .errors import LogBranchError, NonComposable, NotInChart
from .groupoid import (
    GroupoidChartTriple,
    GroupoidElement,
    _pq_smin,
    chart_phi,
    chart_phi_inv,
    chart_psi,
    chart_psi_inv,
    component_labels,
    component_of,
    compose,
    groupoid_transition,
    identity_at,
    inverse,
    lattice_transition,
    pi_is_singleton,
)
from .tangent import (
    FlowGenerator,
    TangentGroupoidCoords,
    central_fd,
    cocycle,
    flow_base,
    flow_translate,
    horizontal_project,
    horizontal_project2,
    semidirect_product,
    t_chart,
    t_chart_inv,
    t_transition,
    tangent_action,
    tangent_groupoid_transition,
    vertical_inject,
    vertical_inject2,
)
from .traceword import const, random_trace_word, var

FD_STEP = 1e-5
# charts whose smallest relevant singular value falls below this are resampled
OVERLAP_FLOOR = 0.05


@dataclass
class Context:
    desc: AlgebraDescriptor
    p0: ProjectionElement
    rng: np.random.Generator
    n: int

    @property
    def rv(self):
        return self.p0.rank_vector

    @property
    def one(self):
        return AlgebraElement.identity(self.desc)


@dataclass
class Outcome:
    residual: float
    samples: int
    skipped: int = 0
    detail: dict = field(default_factory=dict)


class Worst:
    """Running max of named residuals."""

    def __init__(self, *names):
        self.r = {n: 0.0 for n in names}

    def __call__(self, name, value):
        v = float(value)
        self.r[name] = max(self.r.get(name, 0.0), v if np.isfinite(v) else np.inf)

    def outcome(self, samples, skipped=0):
        return Outcome(max(self.r.values(), default=0.0), samples, skipped, dict(self.r))


def rel(a, b) -> float:
    return (a - b).norm() / max(1.0, b.norm())


def crel(a, b) -> float:
    return abs(a - b) / max(1.0, abs(b))


# ---------------------------------------------------------------- sampling

def _corner(ctx, left, right, scale=1.0):
    return scale * (left @ random_element(ctx.desc, ctx.rng) @ right)


def _scale(ctx, lo=0.2, hi=1.0):
    return float(ctx.rng.uniform(lo, hi))


def _y(ctx, p, lo=0.2, hi=1.0):
    return _corner(ctx, ctx.one - p, p, _scale(ctx, lo, hi))


def _projection(ctx, rv=None):
    return random_projection(ctx.desc, ctx.rv if rv is None else rv, ctx.rng)


def _near(ctx, p, lo=0.05, hi=0.4):
    """A projection in the chart at p, at moderate distance."""
    return chart_phi_inv(p, _y(ctx, p, lo, hi))


def _overlapping(ctx, q, k, tries=50):
    """k chart centres p_i with q well inside every chart."""
    out = []
    for _ in range(tries):
        p = _near(ctx, q)
        if _pq_smin(p, q) > OVERLAP_FLOOR:
            out.append(p)
            if len(out) == k:
                return out
    raise NotInChart("could not sample overlapping charts")


def _arrow(ctx, rv=None):
    """Random element with the given support ranks."""
    rv = random_rank_vector(ctx.desc, ctx.rng) if rv is None else rv
    q = random_projection(ctx.desc, rv, ctx.rng)
    return random_element(ctx.desc, ctx.rng) @ q @ random_element(ctx.desc, ctx.rng)


def _well_conditioned(x, bound=1e4):
    s = np.concatenate([v for v in (np.linalg.svd(b, compute_uv=False) for b in x.blocks)])
    s = s[s > 1e-9 * max(1.0, s.max())]
    return s.size == 0 or s.max() / s.min() < bound


# ================================================================ algebra

def algebra_penrose(ctx):
    w = Worst("xgx", "gxg", "supports", "double")
    for _ in range(ctx.n):
        x = _arrow(ctx)
        g = partial_inverse(x)
        w("xgx", rel(x @ g @ x, x))
        w("gxg", rel(g @ x @ g, g))
        w("supports", max(rel(x @ g, left_support(x)), rel(g @ x, right_support(x))))
        if _well_conditioned(x, 1e3):
            w("double", rel(partial_inverse(g), x))
    return w.outcome(ctx.n)


def _literal_inverse(x):
    """|x|^{-1} u* with |x|^{-1} from the eigen-decomposition of x* x."""
    pd = polar_decompose(x)
    blocks = []
    for b, s in zip(x.blocks, pd.support.blocks):
        w, V = np.linalg.eigh(b.conj().T @ b)
        keep = w > 1e-20 * max(1.0, w.max(initial=0.0))
        keep &= np.abs(np.diag(V.conj().T @ s @ V)) > 0.5
        inv_abs = (V[:, keep] / np.sqrt(w[keep])) @ V[:, keep].conj().T
        blocks.append(inv_abs)
    return AlgebraElement(x.desc, blocks) @ pd.u.H


def algebra_literal_inverse(ctx):
    w = Worst("literal")
    for _ in range(ctx.n):
        x = _arrow(ctx)
        if not _well_conditioned(x, 1e3):
            continue
        w("literal", rel(partial_inverse(x), _literal_inverse(x)))
    return w.outcome(ctx.n)


def algebra_polar(ctx):
    w = Worst("product", "isometry", "absorb")
    for _ in range(ctx.n):
        x = _arrow(ctx)
        pd = polar_decompose(x)
        w("product", rel(pd.u @ pd.abs, x))
        w("isometry", rel(pd.u.H @ pd.u, pd.support))
        w("absorb", max(rel(left_support(x) @ x, x), rel(x @ right_support(x), x)))
    return w.outcome(ctx.n)


def algebra_pairing(ctx):
    w = Worst("gram", "entrywise")
    units = list(matrix_units(ctx.desc))
    G = np.array([[pairing(a, b) for b in units] for a in units])
    perm = (np.abs(G - np.round(G.real)) < 1e-15).all() and (np.round(G.real).sum(0) == 1).all() \
        and (np.round(G.real).sum(1) == 1).all()
    w("gram", 0.0 if perm else np.inf)
    for _ in range(ctx.n):
        r, x = random_element(ctx.desc, ctx.rng), random_element(ctx.desc, ctx.rng)
        brute = sum(rb[i, j] * xb[j, i] for rb, xb in zip(r.blocks, x.blocks)
                    for i in range(rb.shape[0]) for j in range(rb.shape[0]))
        w("entrywise", crel(pairing(r, x), brute))
    return w.outcome(ctx.n)


def algebra_central(ctx):
    mism = 0
    cases = list(central_projections(ctx.desc))
    cases += [_projection(ctx, random_rank_vector(ctx.desc, ctx.rng, nonzero=False)) for _ in range(ctx.n)]
    for p in cases:
        killed = all(((ctx.one - p) @ e @ p).norm() <= 1e-10 for e in matrix_units(ctx.desc))
        mism += int(killed != is_central(p))
    return Outcome(float(mism), len(cases))


# ================================================================ groupoid

def groupoid_axioms(ctx, pairs=None, triples=None):
    pairs = ctx.n if pairs is None else pairs
    triples = max(1, ctx.n * 3 // 10) if triples is None else triples
    w = Worst("associativity", "unit", "inverse", "supports")
    for _ in range(pairs):
        y = GroupoidElement.of(_arrow(ctx))
        x = GroupoidElement.of(random_element(ctx.desc, ctx.rng) @ y.tgt)
        xy = compose(x, y)
        w("supports", max(rel(GroupoidElement.of(xy.x).src, y.src), rel(GroupoidElement.of(xy.x).tgt, x.tgt)))
        w("unit", max(rel(compose(x, identity_at(x.src)).x, x.x), rel(compose(identity_at(x.tgt), x).x, x.x)))
        xi = inverse(x)
        w("inverse", max(rel(compose(x, xi).x, x.tgt), rel(compose(xi, x).x, x.src)))
    for _ in range(triples):
        z = GroupoidElement.of(_arrow(ctx))
        y = GroupoidElement.of(random_element(ctx.desc, ctx.rng) @ z.tgt)
        x = GroupoidElement.of(random_element(ctx.desc, ctx.rng) @ y.tgt)
        a = compose(compose(x, y), z).x
        b = compose(x, compose(y, z)).x
        w("associativity", (a - b).norm() / max(1.0, x.x.norm() * y.x.norm() * z.x.norm()))
    return w.outcome(pairs + triples)


def groupoid_noncomposable(ctx):
    """Mismatched supports must be rejected."""
    bad = 0
    for _ in range(ctx.n):
        p, q = _projection(ctx), _projection(ctx)
        if (p - q).norm() < 1e-3:
            continue
        try:
            compose(GroupoidElement.of(random_element(ctx.desc, ctx.rng) @ p), GroupoidElement.of(q))
            bad += 1
        except NonComposable:
            pass
    return Outcome(float(bad), ctx.n)


def groupoid_chart_round_trip(ctx):
    w = Worst("phi_inv_phi", "phi_phi_inv", "sigma")
    for _ in range(ctx.n):
        p = _projection(ctx)
        y = _y(ctx, p)
        q = chart_phi_inv(p, y)
        w("phi_phi_inv", rel(chart_phi(p, q), y))
        q2 = _near(ctx, p, 0.2, 1.0)
        w("phi_inv_phi", rel(chart_phi_inv(p, chart_phi(p, q2)), q2))
        s = chart_phi(p, q2) + p
        w("sigma", max(rel((p @ q2) @ s, p), rel(s @ (p @ q2), q2)))
    return w.outcome(ctx.n)


def groupoid_lattice_transition(ctx):
    w = Worst("recompute", "cocycle")
    skipped = 0
    for _ in range(ctx.n):
        q = _projection(ctx)
        try:
            p1, p2, p3 = _overlapping(ctx, q, 3)
        except NotInChart:
            skipped += 1
            continue
        y1 = chart_phi(p1, q)
        y2 = lattice_transition(p1, p2, y1)
        w("recompute", rel(y2, chart_phi(p2, q)))
        w("cocycle", rel(lattice_transition(p2, p3, y2), lattice_transition(p1, p3, y1)))
    return w.outcome(ctx.n - skipped, skipped)


def _random_triple(ctx, p, pt, lo=0.1, hi=0.6):
    z = p @ random_element(ctx.desc, ctx.rng) @ pt
    return GroupoidChartTriple(p, pt, _y(ctx, p, lo, hi), z, _y(ctx, pt, lo, hi))


def _groupoid_point(ctx):
    """Arrow x with both supports of rank p0 and well-conditioned z."""
    while True:
        p, pt = _projection(ctx), _projection(ctx)
        tr = _random_triple(ctx, p, pt)
        if _well_conditioned(tr.z, 1e2):
            return tr, chart_psi_inv(tr)


def groupoid_psi_round_trip(ctx):
    w = Worst("psi_inv_psi", "psi_psi_inv")
    for _ in range(ctx.n):
        tr, x = _groupoid_point(ctx)
        back = chart_psi(tr.p, tr.pt, x)
        w("psi_psi_inv", max(rel(back.y, tr.y), rel(back.z, tr.z), rel(back.yt, tr.yt)))
        w("psi_inv_psi", rel(chart_psi_inv(back).x, x.x))
    return w.outcome(ctx.n)


def _triple_distance(a, b):
    return max(rel(a.y, b.y), rel(a.z, b.z), rel(a.yt, b.yt))


def groupoid_psi_transition(ctx):
    w = Worst("recompute", "cocycle")
    skipped = 0
    for _ in range(ctx.n):
        tr, x = _groupoid_point(ctx)
        try:
            a1, a2 = _overlapping(ctx, x.tgt, 2)
            b1, b2 = _overlapping(ctx, x.src, 2)
        except NotInChart:
            skipped += 1
            continue
        t1 = groupoid_transition(tr, a1, b1)
        w("recompute", _triple_distance(t1, chart_psi(a1, b1, x)))
        w("cocycle", _triple_distance(groupoid_transition(t1, a2, b2), groupoid_transition(tr, a2, b2)))
    return w.outcome(ctx.n - skipped, skipped)


def groupoid_pi_singleton(ctx):
    mism = 0
    cases = list(central_projections(ctx.desc))
    cases += [_projection(ctx, random_rank_vector(ctx.desc, ctx.rng, nonzero=False)) for _ in range(ctx.n)]
    for p in cases:
        mism += int(pi_is_singleton(p) != is_central(p))
    return Outcome(float(mism), len(cases))


def groupoid_components(ctx):
    """Every projection lies in exactly one component; inverses stay in the component."""
    bad = 0
    labels = component_labels(ctx.desc)
    comps = [component_of(ProjectionElement(ctx.desc, [np.diag([1.0] * r + [0.0] * (n - r)).astype(complex)
                                                       for n, r in zip(ctx.desc.block_dims, rv)], rv))
             for rv in labels]
    for _ in range(ctx.n):
        q = _projection(ctx, random_rank_vector(ctx.desc, ctx.rng, nonzero=False))
        bad += int(sum(c.has_projection(q) for c in comps) != 1)
        x = GroupoidElement.of(random_element(ctx.desc, ctx.rng) @ q @ random_element(ctx.desc, ctx.rng))
        c = component_of(x.src)
        bad += int(not (x in c and inverse(x) in c))
    return Outcome(float(bad), ctx.n)


# ================================================================ bundle

def _eta(ctx):
    return random_bundle_point(ctx.p0, ctx.rng)


def bundle_gauge(ctx):
    w = Worst("functor", "base_invariance", "arrow_invariance", "orbit", "inner")
    for _ in range(ctx.n):
        eta, xi, zeta = _eta(ctx), _eta(ctx), _eta(ctx)
        g = random_group_element(ctx.p0, ctx.rng)
        w("functor", rel(gauge_arrow(eta, xi).x @ gauge_arrow(xi, zeta).x, gauge_arrow(eta, zeta).x))
        w("base_invariance", rel(gauge_base(act(eta, g)), gauge_base(eta)))
        w("arrow_invariance", rel(gauge_arrow(act(eta, g), act(xi, g)).x, gauge_arrow(eta, xi).x))
        # equal arrows come from one orbit: g = xi^{-1} xi' carries both legs
        e2, x2 = act(eta, g), act(xi, g)
        h = partial_inverse(xi) @ x2
        w("orbit", max(rel(act(eta, h), e2), rel(act(xi, h), x2)))
        a, b = action_groupoid_embed(eta, g)
        arr = gauge_arrow(a, b)
        w("inner", max(rel(arr.src, arr.tgt), rel(arr.tgt, gauge_base(eta))))
    return w.outcome(ctx.n)


def bundle_chart_check(ctx):
    w = Worst("round_trip", "equivariance", "action")
    for _ in range(ctx.n):
        p = _projection(ctx)
        eta = random_bundle_point_in_chart(p, ctx.p0, ctx.rng, _scale(ctx))
        g, h = random_group_element(ctx.p0, ctx.rng), random_group_element(ctx.p0, ctx.rng)
        y, z = bundle_chart(p, eta)
        w("round_trip", rel(bundle_chart_inv(p, y, z), eta))
        y2, z2 = bundle_chart(p, act(eta, g))
        w("equivariance", max(rel(y2, y), rel(z2, z @ g)))
        w("action", rel(act(act(eta, g), h), act(eta, g @ h)))
    return w.outcome(ctx.n)


# ================================================================ tangent

def _tangent_point(ctx, p):
    eta = random_bundle_point_in_chart(p, ctx.p0, ctx.rng, _scale(ctx))
    return random_element(ctx.desc, ctx.rng) @ ctx.p0, eta


def _quad_distance(a, b):
    return max(rel(a.a, b.a), rel(a.b, b.b), rel(a.y, b.y), rel(a.z, b.z))


def tangent_chart_round_trip(ctx):
    w = Worst("round_trip", "vertical")
    for _ in range(ctx.n):
        p = _projection(ctx)
        v, eta = _tangent_point(ctx, p)
        quad = t_chart(p, v, eta)
        v2, eta2 = t_chart_inv(quad)
        w("round_trip", max(rel(v2, v), rel(eta2, eta)))
        x = ctx.p0 @ random_element(ctx.desc, ctx.rng) @ ctx.p0
        w("vertical", t_chart(p, *vertical_inject(x, eta)).a.norm())
    return w.outcome(ctx.n)


def tangent_transition(ctx):
    w = Worst("recompute", "cocycle", "fd")
    skipped = 0
    for _ in range(ctx.n):
        p = _projection(ctx)
        v, eta = _tangent_point(ctx, p)
        try:
            p1, p2 = _overlapping(ctx, gauge_base(eta), 2)
        except NotInChart:
            skipped += 1
            continue
        quad = t_chart(p, v, eta)
        q1 = t_transition(quad, p1)
        w("recompute", _quad_distance(q1, t_chart(p1, v, eta)))
        w("cocycle", _quad_distance(t_transition(q1, p2), t_transition(quad, p2)))
        fd = central_fd(lambda h: lattice_transition(p, p1, quad.y + h * quad.a), FD_STEP)
        w("fd", rel(q1.a, fd))
    return w.outcome(ctx.n - skipped, skipped)


def tangent_groupoid_fd(ctx):
    """Velocities transform as the derivative of the groupoid chart transition."""
    w = Worst("fd", "linearity")
    skipped = 0
    for _ in range(ctx.n):
        tr, x = _groupoid_point(ctx)
        try:
            (a1,), (b1,) = _overlapping(ctx, x.tgt, 1), _overlapping(ctx, x.src, 1)
        except NotInChart:
            skipped += 1
            continue
        vel = TangentGroupoidCoords(_y(ctx, tr.p), tr.p @ random_element(ctx.desc, ctx.rng) @ tr.pt,
                                    _y(ctx, tr.pt), tr)
        new = tangent_groupoid_transition(vel, a1, b1)

        def moved(h):
            return groupoid_transition(
                GroupoidChartTriple(tr.p, tr.pt, tr.y + h * vel.a, tr.z + h * vel.b, tr.yt + h * vel.at),
                a1, b1, check=False)

        fp, fm = moved(FD_STEP), moved(-FD_STEP)
        d = [(getattr(fp, k) - getattr(fm, k)) / (2 * FD_STEP) for k in ("y", "z", "yt")]
        w("fd", max(rel(new.a, d[0]), rel(new.b, d[1]), rel(new.at, d[2])))
        vel2 = TangentGroupoidCoords(2 * vel.a, 2 * vel.b, 2 * vel.at, tr)
        new2 = tangent_groupoid_transition(vel2, a1, b1)
        w("linearity", max(rel(new2.a, 2 * new.a), rel(new2.b, 2 * new.b), rel(new2.at, 2 * new.at)))
    return w.outcome(ctx.n - skipped, skipped)


def _rank(mat, tol=1e-9):
    if mat.size == 0:
        return 0
    s = np.linalg.svd(mat, compute_uv=False)
    return int(np.sum(s > tol * max(1.0, s[0])))


def _coords(vectors, basis):
    return np.array([[pairing(b.H, v) for b in basis] for v in vectors]).T


def tangent_atiyah_exactness(ctx):
    """im I = ker A at each eta (single and pair versions), by ranks and residuals."""
    w = Worst("single", "pair", "equivariance")
    one, p0 = ctx.one, ctx.p0
    Mp0 = corner_basis(one, p0)
    g0 = corner_basis(p0, p0)
    for _ in range(ctx.n):
        eta, xi = _eta(ctx), _eta(ctx)
        I = _coords([vertical_inject(x, eta)[0] for x in g0], Mp0)
        A = _coords([horizontal_project(v, eta) for v in Mp0], Mp0)
        q = gauge_base(eta)
        ok = _rank(I) == len(g0) and _rank(A) == corner_dim(one - q, p0) and np.abs(A @ I).max(initial=0) < 1e-9
        ok = ok and _rank(I) + _rank(A) == len(Mp0)
        w("single", 0.0 if ok else np.inf)
        pair_basis = [(b, None) for b in Mp0] + [(None, b) for b in Mp0]

        def flat2(u, v):
            return np.concatenate([[pairing(b.H, u) for b in Mp0], [pairing(b.H, v) for b in Mp0]])

        I2 = np.array([flat2(*vertical_inject2(x, eta, xi)[0::2]) for x in g0]).T
        A2 = np.array([flat2(*horizontal_project2(
            u if u is not None else AlgebraElement.zero(ctx.desc), eta,
            v if v is not None else AlgebraElement.zero(ctx.desc), xi)) for u, v in pair_basis]).T
        ok2 = _rank(I2) == len(g0) and _rank(I2) + _rank(A2) == 2 * len(Mp0) and np.abs(A2 @ I2).max(initial=0) < 1e-9
        w("pair", 0.0 if ok2 else np.inf)
        # I commutes with the tangent group action
        x = p0 @ random_element(ctx.desc, ctx.rng) @ p0
        g = random_group_element(p0, ctx.rng)
        lhs = tangent_action(eta @ x, eta, AlgebraElement.zero(ctx.desc), g)[0]
        rhs = vertical_inject(partial_inverse(g) @ x @ g, act(eta, g))[0]
        w("equivariance", rel(lhs, rhs))
    return w.outcome(ctx.n)


def tangent_action_law(ctx):
    """((theta, eta).(x, g)).(y, h) = (theta, eta).((x, g)(y, h))."""
    w = Worst("action")
    p0 = ctx.p0
    for _ in range(ctx.n):
        eta = _eta(ctx)
        theta = random_element(ctx.desc, ctx.rng) @ p0
        x, y = (p0 @ random_element(ctx.desc, ctx.rng) @ p0 for _ in range(2))
        g, h = random_group_element(p0, ctx.rng), random_group_element(p0, ctx.rng)
        lhs = tangent_action(*tangent_action(theta, eta, x, g), y, h)
        rhs = tangent_action(theta, eta, *semidirect_product(x, g, y, h))
        w("action", max(rel(lhs[0], rhs[0]), rel(lhs[1], rhs[1])))
    return w.outcome(ctx.n)


def _flow(ctx):
    w = random_element(ctx.desc, ctx.rng)
    return FlowGenerator(w / max(1.0, w.norm()))


def tangent_cocycle_law(ctx):
    w = Worst("cocycle", "colift", "source")
    skipped = 0
    for _ in range(ctx.n):
        fl = _flow(ctx)
        p = _projection(ctx)
        q = _near(ctx, p, 0.1, 0.5)
        t, s = ctx.rng.uniform(-0.2, 0.2, 2)
        try:
            lam = flow_base(fl, p, q, t)
            lhs = cocycle(fl, p, q, t + s)
            rhs = cocycle(fl, p, lam, s) @ cocycle(fl, p, q, t)
            sig = partial_inverse(p @ q)
            colift = partial_inverse(p @ lam) @ cocycle(fl, p, q, t)
        except NotInChart:
            skipped += 1
            continue
        w("cocycle", rel(lhs, rhs))
        w("colift", rel(fl(t, sig), colift))
        x = GroupoidElement.of(_arrow(ctx, ctx.rv))
        w("source", rel(flow_translate(fl, t, x).src, x.src))
    return w.outcome(ctx.n - skipped, skipped)


def tangent_cocycle_frames(ctx):
    """c = z(t) z^{-1}; b_p = dc/dt at 0; dz_ppt/dt at 0 = b_p z_ppt."""
    w = Worst("frame", "generator", "groupoid_frame")
    skipped = 0
    for _ in range(ctx.n):
        fl = _flow(ctx)
        p = _projection(ctx)
        eta = random_bundle_point_in_chart(p, ctx.p0, ctx.rng, _scale(ctx, 0.1, 0.5))
        q = gauge_base(eta)
        t = float(ctx.rng.uniform(-0.2, 0.2))
        try:
            z0 = bundle_chart(p, eta)[1]
            zt = bundle_chart(p, fl(t, eta))[1]
            c = cocycle(fl, p, q, t)
        except NotInChart:
            skipped += 1
            continue
        w("frame", rel(c, zt @ partial_inverse(z0)))
        b = t_chart(p, fl.w @ eta, eta).b
        w("generator", rel(b, central_fd(lambda h: cocycle(fl, p, q, h), FD_STEP)))
        pt = _projection(ctx)
        x = GroupoidElement.of(eta @ partial_inverse(random_bundle_point_in_chart(pt, ctx.p0, ctx.rng, 0.3)))
        try:
            z = chart_psi(p, pt, x).z
            dz = central_fd(lambda h: chart_psi(p, pt, GroupoidElement(fl(h, x.x), x.src, left_support(fl(h, x.x)))).z,
                            FD_STEP)
        except NotInChart:
            skipped += 1
            continue
        w("groupoid_frame", rel(dz, b @ z))
    return w.outcome(ctx.n - skipped, skipped)


# ================================================================ algebroid

def _poly_coefficient(ctx, y, left, right, degree):
    def c():
        return const(random_element(ctx.desc, ctx.rng))

    W = c()
    if degree >= 1:
        W = W + c() @ y @ c()
    if degree >= 2:
        W = W + c() @ y @ c() @ y @ c()
    return const(left) @ W @ const(right)


def _poly_section(ctx, p, degree=2):
    y = ag.chart_var(p)
    return ag.ChartSection(
        p,
        _poly_coefficient(ctx, y, ctx.one - p, p, degree),
        _poly_coefficient(ctx, y, p, p, degree),
    )


def _section_distance(u, v):
    return max(rel(u[0], v[0]), rel(u[1], v[1]))


def algebroid_jacobi(ctx):
    w = Worst("jacobi")
    for _ in range(ctx.n):
        p = _projection(ctx)
        X1, X2, X3 = (_poly_section(ctx, p, 1) for _ in range(3))
        y = _y(ctx, p)
        terms = [ag.bracket_chart(ag.bracket_chart(A, B), C)(y)
                 for A, B, C in ((X1, X2, X3), (X2, X3, X1), (X3, X1, X2))]
        scale = max(1.0, *(t.norm() for pair in terms for t in pair))
        w("jacobi", max(sum((t[k] for t in terms[1:]), terms[0][k]).norm() for k in (0, 1)) / scale)
    return w.outcome(ctx.n)


def algebroid_anchor_morphism(ctx):
    w = Worst("anchor")
    for _ in range(ctx.n):
        p = _projection(ctx)
        X1, X2 = _poly_section(ctx, p), _poly_section(ctx, p)
        y = _y(ctx, p)
        lhs = ag.anchor(ag.bracket_chart(X1, X2))(y)
        rhs = ag.vector_field_commutator(ag.anchor(X1), ag.anchor(X2), y)
        w("anchor", rel(lhs, rhs))
    return w.outcome(ctx.n)


def algebroid_leibniz(ctx):
    w = Worst("leibniz")
    for _ in range(ctx.n):
        p = _projection(ctx)
        X1, X2 = _poly_section(ctx, p), _poly_section(ctx, p)
        f = random_trace_word(ctx.desc, {"y": (ctx.one - p, p)}, ctx.rng, degree=2, n_terms=2)
        y = _y(ctx, p)
        lhs = ag.bracket_chart(X1, X2.scaled(f))(y)
        fy = f({"y": y})
        df = f.directional({"y": y}, "y", X1(y)[0])
        base = ag.bracket_chart(X1, X2)(y)
        x2 = X2(y)
        rhs = (fy * base[0] + df * x2[0], fy * base[1] + df * x2[1])
        w("leibniz", _section_distance(lhs, rhs))
    return w.outcome(ctx.n)


def algebroid_cross_representation(ctx):
    w = Worst("chart_vs_global", "linear", "round_trip", "global_jacobi")
    p0 = ctx.p0
    for _ in range(ctx.n):
        w1, w2, w3 = (random_element(ctx.desc, ctx.rng) for _ in range(3))
        V1, V2, V3 = (ag.linear_section(x, p0) for x in (w1, w2, w3))
        p = _projection(ctx)
        z0 = p @ random_element(ctx.desc, ctx.rng) @ p0
        y = _y(ctx, p)
        lhs = ag.bracket_chart(ag.section_to_chart(V1, p, z0), ag.section_to_chart(V2, p, z0))(y)
        rhs = ag.section_to_chart(ag.bracket_global(V1, V2), p, z0)(y)
        w("chart_vs_global", _section_distance(lhs, rhs))
        eta = _eta(ctx)
        w("linear", rel(ag.bracket_global(V1, V2)(eta), (w2 @ w1 - w1 @ w2) @ eta))
        X = ag.section_to_chart(V1, p, z0)
        eta_c = (p + y) @ z0
        w("round_trip", rel(ag.section_from_chart(X)(eta_c), V1(eta_c)))
        terms = [ag.bracket_global(ag.bracket_global(A, B), C)(eta)
                 for A, B, C in ((V1, V2, V3), (V2, V3, V1), (V3, V1, V2))]
        w("global_jacobi", (terms[0] + terms[1] + terms[2]).norm() / max(1.0, *(t.norm() for t in terms)))
    return w.outcome(ctx.n)


def algebroid_atiyah(ctx):
    bad = 0
    for _ in range(ctx.n):
        q = _projection(ctx)
        one = ctx.one
        iso, fib = corner_basis(q, q), corner_basis(one, q)
        tan = corner_basis(one - q, q)
        bad += int(len(fib) != len(iso) + len(tan))
        bad += int(max((ag.atiyah_a(ag.atiyah_iota(x, q), q).norm() for x in iso), default=0.0) > 1e-12)
        A = _coords([ag.atiyah_a(x, q) for x in fib], corner_basis(one, q))
        bad += int(_rank(A) != len(tan))
    return Outcome(float(bad), ctx.n)


def _cotangent_env(ctx):
    return {"phi": ctx.p0 @ random_element(ctx.desc, ctx.rng), "eta": _eta(ctx)}


def algebroid_f_V_rho(ctx):
    """{f_V1, f_V2} = f_[V1,V2]; with rho-terms the extra part is V1(rho2) - V2(rho1)."""
    w = Worst("linear", "rho_terms", "invariance")
    p0 = ctx.p0
    for _ in range(ctx.n):
        V1, V2 = (ag.linear_section(random_element(ctx.desc, ctx.rng), p0) for _ in range(2))
        r1, r2 = (ag.invariant_ratio(random_element(ctx.desc, ctx.rng), random_element(ctx.desc, ctx.rng), p0)
                  for _ in range(2))
        env = _cotangent_env(ctx)
        f1, f2 = ag.f_V_rho(V1, None, p0), ag.f_V_rho(V2, None, p0)
        f12 = ag.f_V_rho(ag.bracket_global(V1, V2), None, p0)
        w("linear", crel(ps.pbracket(f1, f2, env), f12(env)))
        g1, g2 = ag.f_V_rho(V1, r1, p0), ag.f_V_rho(V2, r2, p0)
        expected = f12(env) + ag.derivative_along(V1, r2)(env) - ag.derivative_along(V2, r1)(env)
        w("rho_terms", crel(ps.pbracket(g1, g2, env), expected))
        g = random_group_element(p0, ctx.rng)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            w("invariance", ps.check_invariance(lambda e: r1({"eta": e["eta"]}),
                                                p0, env["eta"], g) / max(1.0, abs(r1(env))))
    return w.outcome(ctx.n)


# ================================================================ poisson

def _cotangent_words(ctx, k=3, degree=3):
    one, p0 = ctx.one, ctx.p0
    corners = {"phi": (p0, one), "eta": (one, p0)}
    return [random_trace_word(ctx.desc, corners, ctx.rng, degree=degree, n_terms=3) for _ in range(k)]


def poisson_algebra(ctx):
    """Antisymmetry, Leibniz and Jacobi for the canonical bracket."""
    w = Worst("jacobi", "antisymmetry", "leibniz")
    for _ in range(ctx.n):
        f, g, h = _cotangent_words(ctx)
        env = _cotangent_env(ctx)
        total, scale = ps.pbracket_jacobi(f, g, h, env)
        w("jacobi", abs(total) / max(1.0, scale))
        fg = ps.pbracket(f, g, env)
        w("antisymmetry", crel(-ps.pbracket(g, f, env), fg))
        lhs = ps.pbracket(f, g * h, env)
        rhs = fg * h(env) + g(env) * ps.pbracket(f, h, env)
        w("leibniz", crel(lhs, rhs))
    return w.outcome(ctx.n)


def _tangent_at(ctx, env):
    return ps.TangentAtCotangent(ctx.p0 @ random_element(ctx.desc, ctx.rng),
                                 random_element(ctx.desc, ctx.rng) @ ctx.p0, env["phi"], env["eta"])


def poisson_forms(ctx):
    """omega(X_f, .) = -df, X_f = #1(df), flat o # = id, d gamma = omega."""
    w = Worst("hamiltonian", "anchor", "flat", "two_form_fd", "bracket_field")
    for _ in range(ctx.n):
        f, g = _cotangent_words(ctx, 2)
        env = _cotangent_env(ctx)
        X = ps.hamiltonian_field(f, env)
        xi = _tangent_at(ctx, env)
        fphi, feta = ps.differential(f, env)
        df = pairing(fphi, xi.theta) + pairing(feta, xi.v)
        w("hamiltonian", crel(ps.symplectic_two_form(X, xi), -df))
        A = ps.sub_anchor_1(fphi, feta, env["phi"], env["eta"])
        w("anchor", max(rel(A.theta, X.theta), rel(A.v, X.v)))
        back = ps.flat(A)
        w("flat", max(rel(back[0], fphi), rel(back[1], feta)))
        gphi, geta = ps.differential(g, env)
        w("bracket_field", crel(pairing(gphi, X.theta) + pairing(geta, X.v), ps.pbracket(f, g, env)))
        x1, x2 = xi, _tangent_at(ctx, env)
        h = FD_STEP

        def gamma_along(base_shift, vec):
            return ps.canonical_one_form(ps.TangentAtCotangent(vec.theta, vec.v, env["phi"] + base_shift, env["eta"]))

        d12 = (gamma_along(h * x1.theta, x2) - gamma_along(-h * x1.theta, x2)) / (2 * h)
        d21 = (gamma_along(h * x2.theta, x1) - gamma_along(-h * x2.theta, x1)) / (2 * h)
        w("two_form_fd", crel(d12 - d21, ps.symplectic_two_form(x1, x2)))
    return w.outcome(ctx.n)


def poisson_momentum(ctx):
    """J0 equivariance, and the generator of phi -> g^{-1} phi, eta -> eta g is X_<J0, x>."""
    from scipy.linalg import expm
    w = Worst("equivariance", "flow", "coords")
    p0 = ctx.p0
    phi_v, eta_v = ps.cotangent_vars(p0)
    for _ in range(ctx.n):
        env = _cotangent_env(ctx)
        g = random_group_element(p0, ctx.rng)
        gi = partial_inverse(g)
        J = ps.momentum_J0(env["phi"], env["eta"])
        w("equivariance", rel(ps.momentum_J0(gi @ env["phi"], env["eta"] @ g), gi @ J @ g))
        x = p0 @ random_element(ctx.desc, ctx.rng) @ p0
        f = (phi_v @ eta_v @ const(x)).trace()
        X = ps.hamiltonian_field(f, env)

        def flow(t):
            e = AlgebraElement(ctx.desc, [expm(t * b) for b in x.blocks])
            ei = AlgebraElement(ctx.desc, [expm(-t * b) for b in x.blocks])
            return p0 @ ei @ env["phi"], env["eta"] @ p0 @ e @ p0 + env["eta"] @ (ctx.one - p0)

        dphi = central_fd(lambda t: flow(t)[0], FD_STEP)
        deta = central_fd(lambda t: flow(t)[1], FD_STEP)
        w("flow", max(rel(X.theta, dphi), rel(X.v, deta)))
        p = _projection(ctx)
        eta = random_bundle_point_in_chart(p, p0, ctx.rng, _scale(ctx))
        quad = ps.cotangent_chart(p, env["phi"], eta)
        w("coords", rel(ps.momentum_J1_coords(quad), ps.momentum_J0(env["phi"], eta)))
    return w.outcome(ctx.n)


def _beta_words(ctx, p0):
    b = ps.beta_var(p0)
    x, y = (p0 @ random_element(ctx.desc, ctx.rng) @ p0 for _ in range(2))
    lin = [(b @ const(x)).trace(), (b @ const(y)).trace()]
    quad = [random_trace_word(ctx.desc, {"beta": (p0, p0)}, ctx.rng, degree=2, n_terms=3) for _ in range(2)]
    return lin, quad


def poisson_J1(ctx):
    """{F o J1, G o J1} = {F, G}_LP o J1 for linear and quadratic F, G."""
    w = Worst("linear", "quadratic")
    p0 = ctx.p0
    lin, quad = _beta_words(ctx, p0)
    points = [(ctx.p0 @ random_element(ctx.desc, ctx.rng), _eta(ctx)) for _ in range(ctx.n)]
    w("linear", ps.check_J1_poisson(*lin, points, p0)["residual"])
    w("quadratic", ps.check_J1_poisson(*quad, points, p0)["residual"])
    return w.outcome(ctx.n)


def poisson_polarity(ctx):
    """Pullbacks by J1 commute with G0-invariant observables."""
    w = Worst("polarity")
    p0, one = ctx.p0, ctx.one
    phi, eta = ps.cotangent_vars(p0)
    for _ in range(ctx.n):
        F = random_trace_word(ctx.desc, {"beta": (p0, p0)}, ctx.rng, degree=2, n_terms=3)
        f = ps.pull_back(F, "J1", p0)
        g = random_trace_word(ctx.desc, {"m": (one, one)}, ctx.rng, degree=2, n_terms=3).subs({"m": eta @ phi})
        env = _cotangent_env(ctx)
        fphi, feta = ps.differential(f, env)
        gphi, geta = ps.differential(g, env)
        scale = max(1.0, fphi.norm() * geta.norm() + feta.norm() * gphi.norm())
        w("polarity", abs(ps.pbracket(f, g, env)) / scale)
    return w.outcome(ctx.n)


def poisson_J1_rank(ctx):
    bad = 0
    for _ in range(ctx.n):
        env = _cotangent_env(ctx)
        r, d = ps.J1_jacobian_rank(env["phi"], env["eta"], ctx.p0)
        bad += int(r != d)
    # surjectivity witness J1(beta, p0) = beta
    beta = ctx.p0 @ random_element(ctx.desc, ctx.rng) @ ctx.p0
    sur = rel(ps.momentum_J0(beta, ctx.p0), beta)
    return Outcome(float(bad) + sur, ctx.n)


def poisson_left_right(ctx):
    """With p0 = 1: J_L is Poisson, J_R anti-Poisson, and the two commute."""
    w = Worst("JL", "JR", "commute")
    one = as_projection(ctx.one)
    F, G = (random_trace_word(ctx.desc, {"beta": (one, one)}, ctx.rng, degree=2, n_terms=3) for _ in range(2))
    points = [(random_element(ctx.desc, ctx.rng), random_element(ctx.desc, ctx.rng)) for _ in range(ctx.n)]
    w("JL", ps.check_J1_poisson(F, G, points, one, momentum="JL", sign=1)["residual"])
    w("JR", ps.check_J1_poisson(F, G, points, one, momentum="JR", sign=-1)["residual"])
    f, g = ps.pull_back(F, "JL", one), ps.pull_back(G, "JR", one)
    for phi, eta in points:
        env = {"phi": phi, "eta": eta}
        w("commute", abs(ps.pbracket(f, g, env)) / max(1.0, abs(f(env) * g(env))))
    return w.outcome(ctx.n)


def _cotangent_point_in_chart(ctx, p):
    eta = random_bundle_point_in_chart(p, ctx.p0, ctx.rng, _scale(ctx))
    return ctx.p0 @ random_element(ctx.desc, ctx.rng), eta


def _cquad_distance(a, b):
    return max(rel(a.alpha, b.alpha), rel(a.beta, b.beta), rel(a.y, b.y), rel(a.z, b.z))


def poisson_cotangent_atlas(ctx):
    w = Worst("round_trip", "recompute", "cocycle", "duality", "duality_transition")
    skipped = 0
    for _ in range(ctx.n):
        p = _projection(ctx)
        phi, eta = _cotangent_point_in_chart(ctx, p)
        quad = ps.cotangent_chart(p, phi, eta)
        phi2, eta2 = ps.cotangent_chart_inv(quad)
        w("round_trip", max(rel(phi2, phi), rel(eta2, eta)))
        v = random_element(ctx.desc, ctx.rng) @ ctx.p0
        tq = t_chart(p, v, eta)
        w("duality", crel(pairing(quad.alpha, tq.a) + pairing(quad.beta, tq.b), pairing(phi, v)))
        try:
            p1, p2 = _overlapping(ctx, gauge_base(eta), 2)
        except NotInChart:
            skipped += 1
            continue
        q1 = ps.cotangent_transition(quad, p1)
        w("recompute", _cquad_distance(q1, ps.cotangent_chart(p1, phi, eta)))
        w("cocycle", _cquad_distance(ps.cotangent_transition(q1, p2), ps.cotangent_transition(quad, p2)))
        t1 = t_transition(tq, p1)
        w("duality_transition", crel(pairing(q1.alpha, t1.a) + pairing(q1.beta, t1.b), pairing(phi, v)))
    return w.outcome(ctx.n - skipped, skipped)


def _chart_words(ctx, p, k=2, degree=3):
    one, p0 = ctx.one, ctx.p0
    corners = {"alpha": (p, one - p), "beta": (p, p), "y": (one - p, p), "z": (p, p0)}
    return [random_trace_word(ctx.desc, corners, ctx.rng, degree=degree, n_terms=3) for _ in range(k)]


def poisson_chart_bracket(ctx):
    """Chart bracket equals the transported canonical bracket, and satisfies Jacobi."""
    w = Worst("transport", "jacobi", "canonical_pair", "lie_poisson")
    p0 = ctx.p0
    for _ in range(ctx.n):
        p = _projection(ctx)
        f, g, h = _chart_words(ctx, p, 3)
        phi, eta = _cotangent_point_in_chart(ctx, p)
        env = {"phi": phi, "eta": eta}
        quad = ps.cotangent_chart(p, phi, eta)
        ce = ps.chart_env(quad)
        lhs = ps.chart_bracket(f, g, ce)
        rhs = ps.pbracket(ps.transport_to_global(f, p, p0), ps.transport_to_global(g, p, p0), env)
        w("transport", crel(lhs, rhs))
        total, scale = ps.chart_jacobi(f, g, h, ce)
        w("jacobi", abs(total) / max(1.0, scale))
        hh = (ctx.one - p) @ random_element(ctx.desc, ctx.rng) @ p
        kk = p @ random_element(ctx.desc, ctx.rng) @ (ctx.one - p)
        al, _, yv, _ = ps.chart_vars(p, p0)
        fa, gy = (al @ const(hh)).trace(), (const(kk) @ yv).trace()
        w("canonical_pair", crel(ps.reduced_bracket(fa, gy, ce), pairing(kk, hh)))
        b = ps.beta_var(p)
        x, y = (p @ random_element(ctx.desc, ctx.rng) @ p for _ in range(2))
        Fb, Gb = (b @ const(x)).trace(), (b @ const(y)).trace()
        w("lie_poisson", crel(ps.reduced_bracket(Fb, Gb, ce), ps.lp_bracket(Fb, Gb, ce)))
    return w.outcome(ctx.n)


def poisson_lie_poisson(ctx):
    w = Worst("jacobi", "linear", "casimir")
    p0 = ctx.p0
    b = ps.beta_var(p0)
    for _ in range(ctx.n):
        F, G, H = (random_trace_word(ctx.desc, {"beta": (p0, p0)}, ctx.rng, degree=3, n_terms=3) for _ in range(3))
        env = {"beta": p0 @ random_element(ctx.desc, ctx.rng) @ p0}
        total, scale = ps.lp_jacobi(F, G, H, env)
        w("jacobi", abs(total) / max(1.0, scale))
        x, y = (p0 @ random_element(ctx.desc, ctx.rng) @ p0 for _ in range(2))
        lin = ps.lp_bracket((b @ const(x)).trace(), (b @ const(y)).trace(), env)
        w("linear", crel(lin, pairing(env["beta"], x @ y - y @ x)))
        cas = (b @ b).trace()
        w("casimir", abs(ps.lp_bracket(cas, G, env)) / max(1.0, env["beta"].norm() ** 2 * G.grad("beta")(env).norm()))
    return w.outcome(ctx.n)


def _invariant_function(ctx):
    p0, one = ctx.p0, ctx.one
    beta, eta, K = var(ctx.desc, "beta", p0, p0), var(ctx.desc, "eta", one, p0), var(ctx.desc, "K", p0, p0)

    def c():
        return const(random_element(ctx.desc, ctx.rng))

    P = (c() @ beta).trace() + 0.5 * (c() @ beta @ beta).trace() + (c() @ eta @ beta @ K).trace() \
        + 0.5 * (c() @ eta @ K @ c() @ eta @ beta @ K).trace()
    return ps.InvariantFunction(P, random_element(ctx.desc, ctx.rng), p0)


def poisson_iota_star(ctx):
    """{F o iota_*, G o iota_*} = {F, G}_sP o iota_* for G0-invariant F, G."""
    w = Worst("compatibility", "invariance")
    for _ in range(ctx.n):
        F, G = _invariant_function(ctx), _invariant_function(ctx)
        env = _cotangent_env(ctx)
        lhs = ps.pbracket(ps.compose_I_star(F), ps.compose_I_star(G), env)
        rhs = ps.sp_bracket(F, G, {"beta": env["phi"] @ env["eta"], "eta": env["eta"]})
        w("compatibility", crel(lhs, rhs))
        beta = env["phi"] @ env["eta"]
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            r = ps.check_invariance(F, beta, env["eta"], random_group_element(ctx.p0, ctx.rng))
        w("invariance", r / max(1.0, abs(F({"beta": beta, "eta": env["eta"]}))))
    return w.outcome(ctx.n)


def poisson_reduction(ctx):
    p = _projection(ctx)
    eta_ref = p @ random_element(ctx.desc, ctx.rng) @ ctx.p0
    one = ctx.one
    samples = [(_corner(ctx, p, one - p), _y(ctx, p), _corner(ctx, p, one - p), _corner(ctx, one - p, p))
               for _ in range(ctx.n)]
    r = ps.mw_reduction_check(p, eta_ref, samples)
    # the J1 part must vanish exactly; fold it in as a hard failure
    resid = r["pullback_residual"] if r["J1_residual"] <= 1e-12 else np.inf
    return Outcome(resid, ctx.n, 0, {"J1": r["J1_residual"], "pullback": r["pullback_residual"]})


# ================================================================ vb

def vb_axioms(name):
    def check(ctx):
        r = vb.vb_check(vb.CATALOGUE[name](ctx.p0), ctx.n, ctx.rng)
        return Outcome(r["max_residual"] if r["skipped"] * 2 <= ctx.n else np.inf,
                       r["samples"], r["skipped"], r["residuals"])
    return check


def vb_core(name):
    def check(ctx):
        spec = vb.CATALOGUE[name](ctx.p0)
        core = vb.core_compute(spec, ctx.rng)
        expected = vb.CORE_DIMS[name](ctx.p0)
        bad = abs(core.dim - expected) + abs(core.declared_dim - expected)
        return Outcome(float(bad) + core.residual, 1, 0, {"dim": core.dim, "expected": expected})
    return check


def vb_dualize(primal):
    def check(ctx):
        spec = vb.CATALOGUE[primal](ctx.p0)
        hand = vb.CATALOGUE[vb.DUAL_PAIRS[primal]](ctx.p0)
        return Outcome(vb.compare_specs(hand, vb.dualize(spec), ctx.n, ctx.rng), ctx.n)
    return check


def vb_double_dual(primal):
    def check(ctx):
        spec = vb.CATALOGUE[primal](ctx.p0)
        return Outcome(vb.compare_specs(spec, vb.dualize(vb.dualize(spec)), ctx.n, ctx.rng), ctx.n)
    return check


def vb_exact_sequence(ctx):
    r = vb.exact_sequence_check(ctx.p0, ctx.n, ctx.rng)
    return Outcome(r["morphism_residual"] + (np.inf if r["exactness_failures"] else 0.0), ctx.n)


def vb_momenta(ctx):
    """J2 vanishes on units; invariant words have J1_flat(df) = 0; J_flat reduces to J2."""
    w = Worst("units", "invariant_flat", "reduction")
    p0 = ctx.p0
    spec = vb.CATALOGUE["pair-cotangent"](p0)
    for _ in range(ctx.n):
        phi, eta = p0 @ random_element(ctx.desc, ctx.rng), _eta(ctx)
        u = spec.unit(vb.VBPoint((phi,), (eta,)))
        w("units", vp.momentum_J2(u).norm() / max(1.0, phi.norm() * eta.norm()))
        f = vp.invariant_pair_word(p0, ctx.rng, legs=1)
        env = {"phi": phi, "eta": eta}
        fphi, feta = f.grad("phi")(env), f.grad("eta")(env)
        w("invariant_flat", vp.J1_flat(fphi, feta, phi, eta).norm() / max(1.0, fphi.norm() * feta.norm()))
        psi, xi = p0 @ random_element(ctx.desc, ctx.rng), _eta(ctx)
        chi = p0 @ random_element(ctx.desc, ctx.rng) @ p0
        z = AlgebraElement.zero(ctx.desc)
        w("reduction", rel(vp.J_flat(z, chi, phi, eta, psi, xi), phi @ eta + psi @ xi))
    return w.outcome(ctx.n)


def vb_sharp(ctx):
    r = vp.sharp_morphism_check(ctx.p0, ctx.n, ctx.rng)
    return Outcome(r["max_residual"], ctx.n, 0, r["residuals"])


def vb_quotient_morphism(ctx):
    r = vp.quotient_morphism_check(ctx.p0, ctx.n, ctx.rng)
    return Outcome(r["max_residual"], ctx.n, 0, r["residuals"])


def vb_scalar(fn, *args):
    def check(ctx):
        return Outcome(fn(ctx.p0, *args, n_samples=ctx.n, seed=ctx.rng), ctx.n)
    return check


def vb_sub_poisson(gid):
    def check(ctx):
        r = vp.sub_poisson_groupoid_check(gid, ctx.p0, ctx.n, ctx.rng)
        return Outcome(r["max_residual"], ctx.n, 0, r["residuals"])
    return check


def vb_pair_bracket(ctx):
    """Pair bracket: Jacobi, X_f = #2(df), and #2 tangent to J2^{-1}(0) on annihilator data."""
    w = Worst("jacobi", "tangency")
    p0 = ctx.p0
    for _ in range(ctx.n):
        f, g, h = (vp.invariant_pair_word(p0, ctx.rng) for _ in range(3))
        env = vp.sample_pair_env(p0, ctx.rng)
        total, scale = vp.pair_jacobi(f, g, h, env)
        w("jacobi", abs(total) / max(1.0, scale))
        w("tangency", vp.tangency_check(f, vp.annihilator_env(p0, ctx.rng)))
    return w.outcome(ctx.n)


# ================================================================ involution

def involution_fixed_points(ctx):
    """J(x) = x exactly for partial isometries; constructed non-isometries are not fixed."""
    wrong = 0
    for k in range(ctx.n):
        src = _projection(ctx, random_rank_vector(ctx.desc, ctx.rng, nonzero=False))
        tgt = random_projection(ctx.desc, src.rank_vector, ctx.rng)
        u = inv.random_partial_isometry(ctx.desc, ctx.rng, src=src, tgt=tgt)
        kind = k % 4
        if kind == 0:
            x, truth = u, True
        elif kind == 1:
            x, truth = float(ctx.rng.choice([0.5, 2.0, 1.01])) * u, not any(src.rank_vector)
        elif kind == 2:
            x, truth = u + 1e-3 * random_element(ctx.desc, ctx.rng), False
        else:
            x, truth = _arrow(ctx), False
        wrong += int(inv.is_j_fixed(x, 1e-8) != truth)
    return Outcome(float(wrong), ctx.n)


def involution_automorphism(ctx):
    w = Worst("involutive", "product", "examples")
    for _ in range(ctx.n):
        y = GroupoidElement.of(_arrow(ctx))
        x = GroupoidElement.of(random_element(ctx.desc, ctx.rng) @ y.tgt)
        if not (_well_conditioned(x.x, 1e3) and _well_conditioned(y.x, 1e3)):
            continue
        w("involutive", rel(inv.j_involution(inv.j_involution(x.x)), x.x))
        w("product", rel(inv.j_involution(x.x @ y.x), inv.j_involution(x.x) @ inv.j_involution(y.x)))
    d = AlgebraDescriptor.parse("M2")
    e12 = AlgebraElement.unit(d, 0, 0, 1)
    w("examples", max(rel(inv.j_involution(e12), e12), rel(inv.j_involution(2 * e12), 0.5 * e12)))
    return w.outcome(ctx.n)


def involution_unitary_chart(ctx):
    w = Worst("hermitian", "round_trip", "unit", "isometric", "j_compatible")
    skipped = 0
    for _ in range(ctx.n):
        p, pt = _projection(ctx), _projection(ctx)
        q, qt = _near(ctx, p, 0.05, 0.3), _near(ctx, pt, 0.05, 0.3)
        x = inv.random_partial_isometry(ctx.desc, ctx.rng, src=qt, tgt=q)
        z0 = inv.random_partial_isometry(ctx.desc, ctx.rng, src=pt, tgt=p)
        try:
            c = inv.unitary_chart(p, pt, z0, x)
        except (NotInChart, LogBranchError):
            skipped += 1
            continue
        w("hermitian", rel(c.h, c.h.H))
        w("round_trip", rel(inv.unitary_chart_inv(c, z0), x))
        zu = inv.isometric_component(p, pt, x)
        w("isometric", rel(zu @ zu.H, p))
        w("j_compatible", rel(inv.j_involution(zu), zu))
        w("unit", inv.unitary_chart(p, pt, z0, inv.unitary_chart_inv(
            inv.UnitaryChartTriple(p, pt, c.y, AlgebraElement.zero(ctx.desc), c.yt), z0)).h.norm())
    return w.outcome(ctx.n - skipped, skipped)


def involution_log_examples(ctx):
    """M2, p = p~ = z0 = e11, z = e^{i theta} e11 gives h = theta e11."""
    d = AlgebraDescriptor.parse("M2")
    e11 = AlgebraElement.unit(d, 0, 0, 0)
    p = as_projection(e11)
    worst = 0.0
    for th in ctx.rng.uniform(-3.0, 3.0, ctx.n):
        c = inv.unitary_chart(p, p, e11, complex(np.exp(1j * th)) * e11)
        worst = max(worst, rel(c.h, float(th) * e11))
    return Outcome(worst, ctx.n)


def involution_perp(ctx):
    """y_perp agrees with the direct chart and lands in the right chart; perp is involutive."""
    w = Worst("oracle", "corner", "range", "involutive", "ranks")
    for _ in range(ctx.n):
        p = _projection(ctx)
        y = _y(ctx, p)
        yp = inv.perp_transition(p, y)
        w("oracle", rel(yp, inv.perp_oracle(p, y)))
        pp = inv.perp(p)
        one = ctx.one
        w("corner", rel((one - pp) @ yp @ pp, yp))
        # range(p_perp + y_perp) is the orthocomplement of range(p + y)
        q = left_support(p + y)
        x = pp + yp
        w("range", max(rel((one - q) @ x, x), (q @ x).norm()))
        w("ranks", float(np.abs(np.array(rank_vector(pp)) + np.array(p.rank_vector)
                                - np.array(ctx.desc.block_dims)).sum()))
        w("involutive", rel(inv.perp_transition(pp, yp), y))
    return w.outcome(ctx.n)


def involution_t_family(ctx):
    worst = 0.0
    for t in (0.1, 1.0, 10.0):
        p, y, expected = inv.t_family(t)
        worst = max(worst, (inv.perp_transition(p, y) - expected).norm() / max(1.0, t))
    return Outcome(worst, 3)


def involution_gauge(ctx):
    worst = max(inv.unitary_gauge_arrow_check(ctx.p0, ctx.rng) for _ in range(ctx.n))
    return Outcome(worst, ctx.n)


# ================================================================ negative controls

def negative_vb(ctx):
    r = vb.vb_check(vb.corrupted(vb.CATALOGUE["pair-cotangent"](ctx.p0)), ctx.n, ctx.rng)
    return Outcome(r["max_residual"], r["samples"], r["skipped"], r["residuals"])


def negative_sharp(ctx):
    r = vp.sharp_morphism_check(ctx.p0, ctx.n, ctx.rng, sharp2=vp._flip(vp.flat_anchor_2))
    return Outcome(r["max_residual"], ctx.n, 0, r["residuals"])


def negative_sub_poisson(gid):
    def check(ctx):
        r = vp.sub_poisson_negative_control(gid, ctx.p0, ctx.n, ctx.rng)
        return Outcome(r["max_residual"], ctx.n, 0, r["residuals"])
    return check


def negative_core(ctx):
    spec = vb.corrupted(vb.CATALOGUE["tangent-pair"](ctx.p0))
    core = vb.core_compute(spec, ctx.rng)
    r = vb.vb_check(spec, ctx.n, ctx.rng)
    return Outcome(max(r["max_residual"], abs(core.dim - vb.CORE_DIMS["tangent-pair"](ctx.p0))), ctx.n)


def negative_perp(ctx):
    """A sign-flipped perp formula against the t-family."""
    worst = 0.0
    for t in (0.1, 1.0, 10.0):
        p, y, expected = inv.t_family(t)
        worst = max(worst, (inv.perp_transition(p, -y) - expected).norm() / max(1.0, t))
    return Outcome(worst, 3)
