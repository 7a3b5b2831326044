"""VB-groupoids over the pair groupoid of P0, their cores and duals.

A point of a VB-groupoid is a ``VBPoint``: a tuple of fibre components, each
living in a fixed corner of M, sitting over a point of the side groupoid.  A
``VBGroupoidSpec`` bundles the structural maps as callables, so one checker
and one dualizer serve every concrete groupoid.  Fibres are paired with their
duals through Tr, so the dual of a corner lMr is the corner rMl.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np
from scipy.linalg import null_space

from .algebra import (
    AlgebraElement,
    ProjectionElement,
    _gauss,
    _rng,
    corner_basis,
    corner_dim,
    left_support,
    partial_inverse,
    random_element,
)
from .bundle import random_bundle_point
from .errors import CornerError, DegeneratePairing, NonComposable, SamplingError
from .groupoid import TAU_MATCH

LINEAR_TOL = 1e-10


@dataclass(frozen=True)
class VBPoint:
    fiber: tuple
    base: tuple


def _one(x):
    return AlgebraElement.identity(x.desc)


def _zero(x):
    return AlgebraElement.zero(x.desc)


def _rel(a, b):
    return (a - b).norm() / max(1.0, a.norm(), b.norm())


def _match(a, b, what="middle entries"):
    if _rel(a, b) > TAU_MATCH:
        raise NonComposable(f"{what} do not match")


def _check_corner(x, left, right, tol=1e-10):
    if (left @ x @ right - x).norm() > tol * max(1.0, x.norm()):
        raise CornerError("element outside the required corner")


def point_distance(a: VBPoint, b: VBPoint) -> float:
    """Largest relative difference over fibre and base components."""
    if len(a.fiber) != len(b.fiber) or len(a.base) != len(b.base):
        return np.inf
    return max([0.0] + [_rel(x, y) for x, y in zip(a.fiber + a.base, b.fiber + b.base)])


def base_distance(a: tuple, b: tuple) -> float:
    return max([0.0] + [_rel(x, y) for x, y in zip(a, b)])


# ---------------------------------------------------------------- coordinate frames

_BASIS_CACHE: dict = {}


def _key(*xs) -> tuple:
    return tuple(x.to_vector().tobytes() for x in xs)


def _cached_basis(left, right):
    k = _key(left, right)
    if k not in _BASIS_CACHE:
        if len(_BASIS_CACHE) > 4096:
            _BASIS_CACHE.clear()
        _BASIS_CACHE[k] = corner_basis(left, right)
    return _BASIS_CACHE[k]


class Frame:
    """Orthonormal basis of a product of corners, and its trace-dual frame."""

    def __init__(self, corners, bases=None):
        self.corners = tuple(corners)
        self.bases = bases if bases is not None else [_cached_basis(l, r) for l, r in self.corners]
        self.dim = sum(len(b) for b in self.bases)

    def coords(self, fiber) -> np.ndarray:
        out = [(e.H @ x).trace() for x, b in zip(fiber, self.bases) for e in b]
        return np.array(out, dtype=complex)

    def fiber(self, c) -> tuple:
        out, k = [], 0
        for (l, r), b in zip(self.corners, self.bases):
            x = _zero(l)
            for e in b:
                x = x + e * complex(c[k])
                k += 1
            out.append(x)
        return tuple(out)

    def basis(self):
        eye = np.eye(self.dim)
        return [self.fiber(eye[i]) for i in range(self.dim)]

    def dual(self) -> "Frame":
        """Frame of the transposed corners whose basis pairs to the identity under Tr."""
        return Frame([(r, l) for l, r in self.corners], [[e.H for e in b] for b in self.bases])

    def random(self, rng, scale=1.0) -> tuple:
        return self.fiber(scale * _gauss(rng, self.dim))

    def zero(self) -> tuple:
        return self.fiber(np.zeros(self.dim))


def fiber_pairing(phi, w) -> complex:
    return sum((a @ b).trace() for a, b in zip(phi, w))


def _matrix(fn, frame_in: Frame, frame_out: Frame) -> np.ndarray:
    cols = [frame_out.coords(fn(b)) for b in frame_in.basis()]
    if not cols:
        return np.zeros((frame_out.dim, 0), complex)
    return np.array(cols).T.reshape(frame_out.dim, frame_in.dim)


# ---------------------------------------------------------------- side groupoids

@dataclass(frozen=True)
class SideGroupoid:
    name: str
    source: Callable
    target: Callable
    unit: Callable
    product: Callable
    inverse: Callable
    sample_object: Callable
    sample_arrow_to: Callable

    def sample_arrow(self, rng):
        return self.sample_arrow_to(self.sample_object(rng), rng)


def pair_groupoid(p0: ProjectionElement) -> SideGroupoid:
    """P0 x P0 over P0: arrows (eta, xi) from xi to eta."""

    def product(g, h):
        _match(g[1], h[0])
        return (g[0], h[1])

    return SideGroupoid(
        "pair",
        source=lambda g: (g[1],),
        target=lambda g: (g[0],),
        unit=lambda m: (m[0], m[0]),
        product=product,
        inverse=lambda g: (g[1], g[0]),
        sample_object=lambda rng: (random_bundle_point(p0, rng),),
        sample_arrow_to=lambda m, rng: (m[0], random_bundle_point(p0, rng)),
    )


def right_groupoid(p0: ProjectionElement) -> SideGroupoid:
    """p0 M_* p0 x P0 x P0 over {0} x P0: (chi, eta, xi)(Y, xi, zeta) = (chi + Y, eta, zeta)."""

    def product(g, h):
        _match(g[2], h[1])
        return (g[0] + h[0], g[1], h[2])

    return SideGroupoid(
        "right",
        source=lambda g: (g[2],),
        target=lambda g: (g[1],),
        unit=lambda m: (_zero(m[0]), m[0], m[0]),
        product=product,
        inverse=lambda g: (-g[0], g[2], g[1]),
        sample_object=lambda rng: (random_bundle_point(p0, rng),),
        sample_arrow_to=lambda m, rng: (
            p0 @ random_element(p0.desc, rng) @ p0,
            m[0],
            random_bundle_point(p0, rng),
        ),
    )


def pair_cotangent_groupoid(p0: ProjectionElement) -> SideGroupoid:
    """T_*P0 x T_*P0 over T_*P0 with (phi, eta, psi, xi)(-psi, xi, lam, zeta) = (phi, eta, lam, zeta)."""

    def product(g, h):
        _match(-g[2], h[0])
        _match(g[3], h[1])
        return (g[0], g[1], h[2], h[3])

    def obj(rng):
        return (p0 @ random_element(p0.desc, rng), random_bundle_point(p0, rng))

    return SideGroupoid(
        "pair-cotangent",
        source=lambda g: (-g[2], g[3]),
        target=lambda g: (g[0], g[1]),
        unit=lambda m: (m[0], m[1], -m[0], m[1]),
        product=product,
        inverse=lambda g: (-g[2], g[3], -g[0], g[1]),
        sample_object=obj,
        sample_arrow_to=lambda m, rng: (m[0], m[1]) + obj(rng),
    )


# ---------------------------------------------------------------- specs

@dataclass(frozen=True)
class VBGroupoidSpec:
    """Structural maps of a VB-groupoid Omega over E, with side groupoid Gamma over M.

    ``fiber_corners(arrow)`` and ``base_fiber_corners(obj)`` describe the
    fibres of Omega and E.  ``core_corners(obj)`` with the linear map
    ``core_embed(obj, fibre)`` is an explicit parametrization of the core.
    ``canon``/``base_canon`` are linear projections onto canonical
    representatives when fibres are quotients or subspaces of the corners.
    """

    name: str
    side: SideGroupoid
    fiber_corners: Callable
    base_fiber_corners: Callable
    source: Callable
    target: Callable
    unit: Callable
    product: Callable
    inverse: Callable
    core_corners: Callable
    core_embed: Callable
    canon: Optional[Callable] = None
    base_canon: Optional[Callable] = None

    def frame(self, arrow) -> Frame:
        return Frame(self.fiber_corners(arrow))

    def base_frame(self, obj) -> Frame:
        return Frame(self.base_fiber_corners(obj))

    def core_frame(self, obj) -> Frame:
        return Frame(self.core_corners(obj))

    def proj(self, w: VBPoint):
        return w.base

    def base_proj(self, e: VBPoint):
        return e.base

    def zero(self, arrow) -> VBPoint:
        return VBPoint(self.frame(arrow).zero(), tuple(arrow))

    def base_zero(self, obj) -> VBPoint:
        return VBPoint(self.base_frame(obj).zero(), tuple(obj))

    def normal(self, w: VBPoint) -> VBPoint:
        if self.canon is None:
            return w
        return VBPoint(tuple(self.canon(w.fiber, w.base)), w.base)

    def base_normal(self, e: VBPoint) -> VBPoint:
        if self.base_canon is None:
            return e
        return VBPoint(tuple(self.base_canon(e.fiber, e.base)), e.base)

    def distance(self, a: VBPoint, b: VBPoint) -> float:
        return point_distance(self.normal(a), self.normal(b))

    def base_distance(self, a: VBPoint, b: VBPoint) -> float:
        return point_distance(self.base_normal(a), self.base_normal(b))


def _lin(a, x: VBPoint, b=0.0, y: VBPoint = None) -> VBPoint:
    if y is None:
        return VBPoint(tuple(a * u for u in x.fiber), x.base)
    return VBPoint(tuple(a * u + b * v for u, v in zip(x.fiber, y.fiber)), x.base)


# ---------------------------------------------------------------- sampling

def sample_point(spec: VBGroupoidSpec, rng, arrow=None) -> VBPoint:
    arrow = spec.side.sample_arrow(rng) if arrow is None else arrow
    return spec.normal(VBPoint(spec.frame(arrow).random(rng), tuple(arrow)))


def sample_base_point(spec: VBGroupoidSpec, rng, obj=None) -> VBPoint:
    obj = spec.side.sample_object(rng) if obj is None else obj
    return spec.base_normal(VBPoint(spec.base_frame(obj).random(rng), tuple(obj)))


def sample_with_target(spec: VBGroupoidSpec, arrow, e: VBPoint, rng) -> VBPoint:
    """Random point over ``arrow`` whose target is the E-point ``e``."""
    fr = spec.frame(arrow)
    efr = spec.base_frame(spec.side.target(arrow))

    def tgt(f):
        return spec.base_normal(spec.target(spec.normal(VBPoint(f, tuple(arrow))))).fiber

    T = _matrix(tgt, fr, efr)
    rhs = efr.coords(spec.base_normal(e).fiber)
    c, *_ = np.linalg.lstsq(T, rhs, rcond=None)
    if np.linalg.norm(T @ c - rhs) > 1e-9 * max(1.0, np.linalg.norm(rhs)):
        raise SamplingError(f"{spec.name}: target map is not onto at the sampled arrow")
    N = null_space(T) if T.size else np.eye(fr.dim)
    if N.shape[1]:
        c = c + N @ _gauss(rng, N.shape[1])
    return spec.normal(VBPoint(fr.fiber(c), tuple(arrow)))


def sample_composable(spec: VBGroupoidSpec, rng, k=2):
    """k points w1, ..., wk with source(w_i) = target(w_{i+1})."""
    pts = [sample_point(spec, rng)]
    for _ in range(k - 1):
        prev = pts[-1]
        arrow = spec.side.sample_arrow_to(spec.side.source(prev.base), rng)
        pts.append(sample_with_target(spec, arrow, spec.source(prev), rng))
    return pts


# ---------------------------------------------------------------- checker

def vb_check(spec: VBGroupoidSpec, n_samples=20, seed=0, tol=LINEAR_TOL) -> dict:
    """Verify the VB-groupoid axioms on random samples.

    Reports the largest relative residual per axiom: groupoid laws of Omega,
    fibrewise linearity of the structural maps, the projection and the zero
    section as groupoid morphisms, the interchange law and surjectivity of
    the double source map.
    """
    rng = _rng(seed)
    side = spec.side
    res = {k: 0.0 for k in (
        "groupoid_laws", "linearity", "projection_morphism",
        "zero_morphism", "interchange", "double_source",
    )}

    def bump(key, val):
        res[key] = max(res[key], float(val))

    skipped = 0
    for _ in range(n_samples):
        try:
            w, v, u = sample_composable(spec, rng, 3)
        except SamplingError:
            skipped += 1
            continue
        try:
            _check_sample(spec, side, rng, w, v, u, bump)
        except NonComposable:
            bump("groupoid_laws", np.inf)

    report = {
        "spec": spec.name,
        "residuals": res,
        "samples": n_samples - skipped,
        "skipped": skipped,
        "tol": tol,
    }
    report["max_residual"] = max(res.values())
    report["passed"] = report["max_residual"] <= tol and skipped * 2 <= n_samples
    return report


def _check_sample(spec, side, rng, w, v, u, bump):
    wv = spec.product(w, v)
    bump("groupoid_laws", spec.base_distance(spec.source(wv), spec.source(v)))
    bump("groupoid_laws", spec.base_distance(spec.target(wv), spec.target(w)))
    bump("groupoid_laws", spec.distance(spec.product(wv, u), spec.product(w, spec.product(v, u))))
    bump("groupoid_laws", spec.distance(spec.product(spec.unit(spec.target(w)), w), w))
    bump("groupoid_laws", spec.distance(spec.product(w, spec.unit(spec.source(w))), w))
    wi = spec.inverse(w)
    bump("groupoid_laws", spec.distance(spec.product(w, wi), spec.unit(spec.target(w))))
    bump("groupoid_laws", spec.distance(spec.product(wi, w), spec.unit(spec.source(w))))
    e = spec.source(w)
    bump("groupoid_laws", spec.base_distance(spec.source(spec.unit(e)), e))
    bump("groupoid_laws", spec.base_distance(spec.target(spec.unit(e)), e))

    # fibrewise linearity of source, target, inverse, unit and product
    w2 = sample_point(spec, rng, w.base)
    a, b = complex(*rng.standard_normal(2)), complex(*rng.standard_normal(2))
    comb = _lin(a, w, b, w2)
    for fn, dist in ((spec.source, spec.base_distance), (spec.target, spec.base_distance),
                     (spec.inverse, spec.distance)):
        bump("linearity", dist(fn(comb), _lin(a, fn(w), b, fn(w2))))
    e2 = sample_base_point(spec, rng, e.base)
    bump("linearity", spec.distance(spec.unit(_lin(a, e, b, e2)),
                                    _lin(a, spec.unit(e), b, spec.unit(e2))))
    bump("linearity", spec.distance(spec.product(_lin(a, w), _lin(a, v)), _lin(a, wv)))

    # projection and zero sections are groupoid morphisms
    bump("projection_morphism", base_distance(wv.base, side.product(w.base, v.base)))
    bump("projection_morphism", base_distance(spec.source(w).base, side.source(w.base)))
    bump("projection_morphism", base_distance(spec.target(w).base, side.target(w.base)))
    bump("projection_morphism", base_distance(wi.base, side.inverse(w.base)))
    bump("projection_morphism", base_distance(spec.unit(e).base, side.unit(e.base)))
    zw, zv = spec.zero(w.base), spec.zero(v.base)
    bump("zero_morphism", spec.distance(spec.product(zw, zv), spec.zero(wv.base)))
    bump("zero_morphism", spec.base_distance(spec.source(zw), spec.base_zero(side.source(w.base))))
    bump("zero_morphism", spec.base_distance(spec.target(zw), spec.base_zero(side.target(w.base))))
    bump("zero_morphism", spec.distance(spec.inverse(zw), spec.zero(side.inverse(w.base))))
    bump("zero_morphism", spec.distance(spec.unit(spec.base_zero(e.base)), spec.zero(side.unit(e.base))))

    # interchange law (w1 + w2)(v1 + v2) = w1 v1 + w2 v2
    v2 = sample_with_target(spec, v.base, spec.source(w2), rng)
    lhs = spec.product(_lin(1.0, w, 1.0, w2), _lin(1.0, v, 1.0, v2))
    rhs = _lin(1.0, wv, 1.0, spec.product(w2, v2))
    bump("interchange", spec.distance(lhs, rhs))

    # the double source map is onto: source restricted to a fibre is onto
    fr, efr = spec.frame(w.base), spec.base_frame(side.source(w.base))
    S = _matrix(lambda f: spec.base_normal(spec.source(spec.normal(VBPoint(f, w.base)))).fiber, fr, efr)
    target_rank = _rank(_matrix(lambda f: spec.base_normal(VBPoint(f, e.base)).fiber, efr, efr))
    bump("double_source", abs(_rank(S) - target_rank))


def _rank(A, tol=1e-9) -> int:
    if A.size == 0:
        return 0
    s = np.linalg.svd(A, compute_uv=False)
    return int(np.sum(s > tol * max(1.0, s[0])))


def corrupted(spec: VBGroupoidSpec) -> VBGroupoidSpec:
    """Negative control: the product flips sign depending on the left factor."""

    def product(w, v):
        out = spec.product(w, v)
        s = -1.0 if w.fiber and w.fiber[0].trace().real < 0 else 1.0
        return _lin(s, out)

    return replace(spec, name=spec.name + "-corrupted", product=product)


# ---------------------------------------------------------------- core

@dataclass(frozen=True)
class CoreBundle:
    """Core over a sampled base point: declared and solved fibre dimensions."""

    spec: str
    obj: tuple
    dim: int
    declared_dim: int
    embed: Callable
    residual: float

    @property
    def matches(self) -> bool:
        return self.dim == self.declared_dim and self.residual <= LINEAR_TOL


def core_dimension(spec: VBGroupoidSpec, obj) -> int:
    """Dimension of {w over 1_m : source(w) = 0_m}, counted modulo ``canon``."""
    unit_arrow = spec.side.unit(obj)
    fr, efr = spec.frame(unit_arrow), spec.base_frame(obj)

    def src(f):
        return spec.base_normal(spec.source(spec.normal(VBPoint(f, unit_arrow)))).fiber

    S = _matrix(src, fr, efr)
    N = null_space(S, rcond=1e-10) if S.size else np.eye(fr.dim)
    C = _matrix(lambda f: spec.normal(VBPoint(f, unit_arrow)).fiber, fr, fr)
    return _rank(C @ N) if N.shape[1] else 0


def core_compute(spec: VBGroupoidSpec, seed=0, obj=None) -> CoreBundle:
    rng = _rng(seed)
    obj = spec.side.sample_object(rng) if obj is None else obj
    dim = core_dimension(spec, obj)
    kfr = spec.core_frame(obj)
    unit_arrow = spec.side.unit(obj)
    resid = 0.0
    embedded = []
    for b in kfr.basis():
        k = spec.normal(spec.core_embed(obj, b))
        resid = max(resid, base_distance(k.base, unit_arrow))
        s = spec.base_normal(spec.source(k))
        resid = max(resid, max([0.0] + [x.norm() for x in s.fiber]))
        embedded.append(spec.frame(unit_arrow).coords(k.fiber))
    rank = _rank(np.array(embedded).T) if embedded else 0
    if rank != kfr.dim:
        resid = max(resid, 1.0)
    return CoreBundle(spec.name, tuple(obj), dim, kfr.dim, lambda f: spec.core_embed(obj, f), resid)


# ---------------------------------------------------------------- dualization

def dualize(spec: VBGroupoidSpec) -> VBGroupoidSpec:
    """The dual VB-groupoid Omega* over K*, built by linear solves against Tr.

    source*:  <source*(phi), k> = <phi, -0_gamma k^{-1}>
    target*:  <target*(phi), k> = <phi, k 0_gamma>
    product:  <phi psi, w v>    = <phi, w> + <psi, v>
    unit*:    <unit*(lam), w>   = <lam, w - unit(source(w))>
    inverse*: <inverse*(phi), w> = -<phi, inverse(w)>
    The core of the dual is parametrized by E*, through <kappa, unit(e)> = <eps, e>.
    """
    if spec.canon is not None or spec.base_canon is not None:
        raise TypeError("dualize needs fibres given by full corners")
    side = spec.side

    def fcorners(arrow):
        return spec.frame(arrow).dual().corners

    def dframe(arrow):
        return spec.frame(arrow).dual()

    def kdual(obj):
        return spec.core_frame(obj).dual()

    cache: dict = {}

    def memo(tag, obj, build):
        k = (tag,) + _key(*obj)
        if k not in cache:
            if len(cache) > 4096:
                cache.clear()
            cache[k] = build()
        return cache[k]

    def core_points(obj):
        return memo("core", obj, lambda: [spec.core_embed(obj, b) for b in spec.core_frame(obj).basis()])

    def source(phi: VBPoint) -> VBPoint:
        m = side.source(phi.base)
        z = spec.zero(phi.base)
        vals = [-fiber_pairing(phi.fiber, spec.product(z, spec.inverse(k)).fiber) for k in core_points(m)]
        return VBPoint(kdual(m).fiber(vals), tuple(m))

    def target(phi: VBPoint) -> VBPoint:
        n = side.target(phi.base)
        z = spec.zero(phi.base)
        vals = [fiber_pairing(phi.fiber, spec.product(k, z).fiber) for k in core_points(n)]
        return VBPoint(kdual(n).fiber(vals), tuple(n))

    def inverse(phi: VBPoint) -> VBPoint:
        arrow = side.inverse(phi.base)
        fr = spec.frame(arrow)
        vals = [-fiber_pairing(phi.fiber, spec.inverse(VBPoint(b, tuple(arrow))).fiber) for b in fr.basis()]
        return VBPoint(fr.dual().fiber(vals), tuple(arrow))

    def _core_coords(obj, k: VBPoint):
        fr = spec.frame(side.unit(obj))

        def build():
            pts = core_points(obj)
            E = np.array([fr.coords(p.fiber) for p in pts]).reshape(len(pts), fr.dim).T
            return E, np.linalg.pinv(E)

        E, Ei = memo("coords", obj, build)
        x = fr.coords(k.fiber)
        c = Ei @ x
        if np.linalg.norm(E @ c - x) > 1e-9 * max(1.0, np.linalg.norm(x)):
            raise DegeneratePairing(f"{spec.name}: element is not in the declared core")
        return c

    def unit(lam: VBPoint) -> VBPoint:
        obj = lam.base
        unit_arrow = side.unit(obj)
        fr = spec.frame(unit_arrow)
        eps = kdual(obj).coords(lam.fiber)
        vals = []
        for b in fr.basis():
            w = VBPoint(b, tuple(unit_arrow))
            u = spec.unit(spec.source(w))
            k = VBPoint(tuple(x - y for x, y in zip(w.fiber, u.fiber)), w.base)
            vals.append(eps @ _core_coords(obj, k))
        return VBPoint(fr.dual().fiber(vals), tuple(unit_arrow))

    def product(phi: VBPoint, psi: VBPoint) -> VBPoint:
        a, b = source(phi), target(psi)
        if base_distance(a.base, b.base) > TAU_MATCH or point_distance(a, b) > 1e-8:
            raise NonComposable(f"{spec.name}*: source and target differ")
        g, h = phi.base, psi.base
        gh = side.product(g, h)
        fg, fh, fgh = spec.frame(g), spec.frame(h), spec.frame(gh)
        efr = spec.base_frame(side.source(g))
        nb = fg.dim + fh.dim

        def split(c):
            return VBPoint(fg.fiber(c[: fg.dim]), tuple(g)), VBPoint(fh.fiber(c[fg.dim:]), tuple(h))

        eye = np.eye(nb)
        cols = []
        for i in range(nb):
            w, v = split(eye[i])
            cols.append(efr.coords(spec.source(w).fiber) - efr.coords(spec.target(v).fiber))
        D = np.array(cols).T.reshape(efr.dim, nb) if cols else np.zeros((efr.dim, nb))
        N = null_space(D) if D.size else np.eye(nb)
        rows, rhs = [], []
        for j in range(N.shape[1]):
            w, v = split(N[:, j])
            rows.append(fgh.coords(spec.product(w, v).fiber))
            rhs.append(fiber_pairing(phi.fiber, w.fiber) + fiber_pairing(psi.fiber, v.fiber))
        A = np.array(rows).reshape(len(rows), fgh.dim)
        if _rank(A) < fgh.dim:
            raise DegeneratePairing(f"{spec.name}: products do not span the fibre")
        c, *_ = np.linalg.lstsq(A, np.array(rhs), rcond=None)
        return VBPoint(fgh.dual().fiber(c), tuple(gh))

    def core_embed(obj, eps_fiber) -> VBPoint:
        unit_arrow = tuple(side.unit(obj))
        dfr = spec.frame(unit_arrow).dual()
        kd = kdual(obj)
        efr = spec.base_frame(obj)

        def build():
            fr = spec.frame(unit_arrow)
            S = _matrix(lambda f: source(VBPoint(f, unit_arrow)).fiber, dfr, kd)
            U = np.array([fr.coords(spec.unit(VBPoint(b, tuple(obj))).fiber) for b in efr.basis()])
            A = np.vstack([S, U.reshape(efr.dim, fr.dim)])
            if _rank(A) < dfr.dim:
                raise DegeneratePairing(f"{spec.name}: core of the dual is not determined")
            return np.linalg.pinv(A)

        Ai = memo("embed", obj, build)
        rhs = np.concatenate([np.zeros(kd.dim), efr.dual().coords(eps_fiber)])
        return VBPoint(dfr.fiber(Ai @ rhs), unit_arrow)

    return VBGroupoidSpec(
        name=spec.name + "*",
        side=side,
        fiber_corners=fcorners,
        base_fiber_corners=lambda obj: kdual(obj).corners,
        source=source,
        target=target,
        unit=unit,
        product=product,
        inverse=inverse,
        core_corners=lambda obj: spec.base_frame(obj).dual().corners,
        core_embed=core_embed,
    )


def compare_specs(a: VBGroupoidSpec, b: VBGroupoidSpec, n_samples=10, seed=0) -> float:
    """Largest disagreement of the structural maps of two specs on shared samples.

    Both specs must share side groupoid and fibre corners; samples are drawn
    from ``a``.
    """
    rng = _rng(seed)
    worst = 0.0
    for _ in range(n_samples):
        w, v = sample_composable(a, rng, 2)
        worst = max(worst, point_distance(a.source(w), b.source(w)))
        worst = max(worst, point_distance(a.target(w), b.target(w)))
        worst = max(worst, point_distance(a.inverse(w), b.inverse(w)))
        worst = max(worst, point_distance(a.product(w, v), b.product(w, v)))
        e = sample_base_point(a, rng, a.side.source(w.base))
        worst = max(worst, point_distance(a.unit(e), b.unit(e)))
    return worst


# ---------------------------------------------------------------- concrete groupoids

def _corners_Mp0(p0):
    return (_one(p0), p0)


def _corners_p0M(p0):
    return (p0, _one(p0))


def action_spec(p0: ProjectionElement) -> VBGroupoidSpec:
    """p0Mp0 x P0 x P0 over p0Mp0 x P0: (x, eta, xi)(x, xi, zeta) = (x, eta, zeta)."""
    side = pair_groupoid(p0)

    def product(w, v):
        _match(w.fiber[0], v.fiber[0])
        return VBPoint(w.fiber, side.product(w.base, v.base))

    return VBGroupoidSpec(
        name="action",
        side=side,
        fiber_corners=lambda g: ((p0, p0),),
        base_fiber_corners=lambda m: ((p0, p0),),
        source=lambda w: VBPoint(w.fiber, (w.base[1],)),
        target=lambda w: VBPoint(w.fiber, (w.base[0],)),
        unit=lambda e: VBPoint(e.fiber, (e.base[0], e.base[0])),
        product=product,
        inverse=lambda w: VBPoint(w.fiber, (w.base[1], w.base[0])),
        core_corners=lambda m: (),
        core_embed=lambda m, f: VBPoint((_zero(p0),), (m[0], m[0])),
    )


def tangent_pair_spec(p0: ProjectionElement) -> VBGroupoidSpec:
    """TP0 x TP0 over TP0: (v, eta, w, xi)(w, xi, u, zeta) = (v, eta, u, zeta)."""
    side = pair_groupoid(p0)
    c = _corners_Mp0(p0)

    def product(w, v):
        _match(w.fiber[1], v.fiber[0])
        return VBPoint((w.fiber[0], v.fiber[1]), side.product(w.base, v.base))

    return VBGroupoidSpec(
        name="tangent-pair",
        side=side,
        fiber_corners=lambda g: (c, c),
        base_fiber_corners=lambda m: (c,),
        source=lambda w: VBPoint((w.fiber[1],), (w.base[1],)),
        target=lambda w: VBPoint((w.fiber[0],), (w.base[0],)),
        unit=lambda e: VBPoint((e.fiber[0], e.fiber[0]), (e.base[0], e.base[0])),
        product=product,
        inverse=lambda w: VBPoint((w.fiber[1], w.fiber[0]), (w.base[1], w.base[0])),
        core_corners=lambda m: (c,),
        core_embed=lambda m, f: VBPoint((f[0], _zero(p0)), (m[0], m[0])),
    )


def horizontal_rep(v, eta):
    """Representative of v + eta p0Mp0 orthogonal to the vertical space."""
    return v - eta @ partial_inverse(eta) @ v


def horizontal_rep2(v, w, eta, xi):
    """Representative of (v, w) + {(eta x, xi x)} orthogonal to the diagonal vertical space."""
    gram = eta.H @ eta + xi.H @ xi
    x = -(partial_inverse(gram) @ (eta.H @ v + xi.H @ w))
    return v + eta @ x, w + xi @ x


def tangent_quotient_spec(p0: ProjectionElement) -> VBGroupoidSpec:
    """T(P0 x P0)/p0Mp0 over TP0/p0Mp0, fibres held by orthogonal representatives."""
    side = pair_groupoid(p0)
    c = _corners_Mp0(p0)

    def canon(f, g):
        return horizontal_rep2(f[0], f[1], g[0], g[1])

    def base_canon(f, m):
        return (horizontal_rep(f[0], m[0]),)

    def product(w, v):
        xi, zeta = v.base
        d = w.fiber[1] - v.fiber[0]
        x = partial_inverse(xi) @ d
        if _rel(xi @ x, d) > TAU_MATCH:
            raise NonComposable("classes of the middle entries differ")
        out = (w.fiber[0], v.fiber[1] + zeta @ x)
        g = side.product(w.base, v.base)
        return VBPoint(canon(out, g), g)

    return VBGroupoidSpec(
        name="tangent-quotient",
        side=side,
        fiber_corners=lambda g: (c, c),
        base_fiber_corners=lambda m: (c,),
        source=lambda w: VBPoint(base_canon((w.fiber[1],), (w.base[1],)), (w.base[1],)),
        target=lambda w: VBPoint(base_canon((w.fiber[0],), (w.base[0],)), (w.base[0],)),
        unit=lambda e: VBPoint(canon((e.fiber[0], e.fiber[0]), (e.base[0], e.base[0])),
                               (e.base[0], e.base[0])),
        product=product,
        inverse=lambda w: VBPoint(canon((w.fiber[1], w.fiber[0]), (w.base[1], w.base[0])),
                                  (w.base[1], w.base[0])),
        core_corners=lambda m: (c,),
        core_embed=lambda m, f: VBPoint(canon((f[0], _zero(p0)), (m[0], m[0])), (m[0], m[0])),
        canon=canon,
        base_canon=base_canon,
    )


def pair_cotangent_spec(p0: ProjectionElement) -> VBGroupoidSpec:
    """T_*P0 x T_*P0 over T_*P0 with source (-psi, xi), unit (phi, eta, -phi, eta)."""
    side = pair_groupoid(p0)
    c = _corners_p0M(p0)

    def product(w, v):
        _match(-w.fiber[1], v.fiber[0])
        return VBPoint((w.fiber[0], v.fiber[1]), side.product(w.base, v.base))

    return VBGroupoidSpec(
        name="pair-cotangent",
        side=side,
        fiber_corners=lambda g: (c, c),
        base_fiber_corners=lambda m: (c,),
        source=lambda w: VBPoint((-w.fiber[1],), (w.base[1],)),
        target=lambda w: VBPoint((w.fiber[0],), (w.base[0],)),
        unit=lambda e: VBPoint((e.fiber[0], -e.fiber[0]), (e.base[0], e.base[0])),
        product=product,
        inverse=lambda w: VBPoint((-w.fiber[1], -w.fiber[0]), (w.base[1], w.base[0])),
        core_corners=lambda m: (c,),
        core_embed=lambda m, f: VBPoint((f[0], _zero(p0)), (m[0], m[0])),
    )


def annihilator_rep(phi, psi, eta, xi):
    """Orthogonal projection of (phi, psi) onto {phi eta + psi xi = 0}."""
    r = phi @ eta + psi @ xi
    k = r @ partial_inverse(eta.H @ eta + xi.H @ xi)
    return phi - k @ eta.H, psi - k @ xi.H


def annihilator_spec(p0: ProjectionElement) -> VBGroupoidSpec:
    """The subgroupoid J2^{-1}(0) of the pair-cotangent groupoid."""
    base = pair_cotangent_spec(p0)

    def canon(f, g):
        return annihilator_rep(f[0], f[1], g[0], g[1])

    def core_corners(m):
        return ((p0, _one(p0) - left_support(m[0])),)

    return replace(
        base,
        name="annihilator",
        core_corners=core_corners,
        canon=canon,
    )


def right_spec(p0: ProjectionElement) -> VBGroupoidSpec:
    """p0M_*p0 x P0 x P0 over {0} x P0: (chi, eta, xi)(Y, xi, zeta) = (chi + Y, eta, zeta)."""
    side = pair_groupoid(p0)

    def product(w, v):
        return VBPoint((w.fiber[0] + v.fiber[0],), side.product(w.base, v.base))

    return VBGroupoidSpec(
        name="right",
        side=side,
        fiber_corners=lambda g: ((p0, p0),),
        base_fiber_corners=lambda m: (),
        source=lambda w: VBPoint((), (w.base[1],)),
        target=lambda w: VBPoint((), (w.base[0],)),
        unit=lambda e: VBPoint((_zero(p0),), (e.base[0], e.base[0])),
        product=product,
        inverse=lambda w: VBPoint((-w.fiber[0],), (w.base[1], w.base[0])),
        core_corners=lambda m: ((p0, p0),),
        core_embed=lambda m, f: VBPoint((f[0],), (m[0], m[0])),
    )


def tangent_prolongation_spec(p0: ProjectionElement) -> VBGroupoidSpec:
    """T(T_*P0 x T_*P0) over T(T_*P0); fibre (phi', eta', psi', xi')."""
    side = pair_cotangent_groupoid(p0)
    a, b = _corners_p0M(p0), _corners_Mp0(p0)

    def product(w, v):
        _match(-w.fiber[2], v.fiber[0])
        _match(w.fiber[3], v.fiber[1])
        return VBPoint((w.fiber[0], w.fiber[1], v.fiber[2], v.fiber[3]), side.product(w.base, v.base))

    def inverse(w):
        f = w.fiber
        return VBPoint((-f[2], f[3], -f[0], f[1]), side.inverse(w.base))

    return VBGroupoidSpec(
        name="tangent-prolongation",
        side=side,
        fiber_corners=lambda g: (a, b, a, b),
        base_fiber_corners=lambda m: (a, b),
        source=lambda w: VBPoint((-w.fiber[2], w.fiber[3]), side.source(w.base)),
        target=lambda w: VBPoint((w.fiber[0], w.fiber[1]), side.target(w.base)),
        unit=lambda e: VBPoint((e.fiber[0], e.fiber[1], -e.fiber[0], e.fiber[1]), side.unit(e.base)),
        product=product,
        inverse=inverse,
        core_corners=lambda m: (a, b),
        core_embed=lambda m, f: VBPoint((f[0], f[1], _zero(p0), _zero(p0)), side.unit(m)),
    )


def dual_prolongation_spec(p0: ProjectionElement) -> VBGroupoidSpec:
    """T^*(T_*P0 x T_*P0) over T^*(T_*P0); fibre (phi°, eta°, psi°, xi°)."""
    side = pair_cotangent_groupoid(p0)
    a, b = _corners_Mp0(p0), _corners_p0M(p0)

    def product(w, v):
        _match(w.fiber[2], v.fiber[0])
        _match(-w.fiber[3], v.fiber[1])
        return VBPoint((w.fiber[0], w.fiber[1], v.fiber[2], v.fiber[3]), side.product(w.base, v.base))

    def inverse(w):
        f = w.fiber
        return VBPoint((f[2], -f[3], f[0], -f[1]), side.inverse(w.base))

    return VBGroupoidSpec(
        name="dual-prolongation",
        side=side,
        fiber_corners=lambda g: (a, b, a, b),
        base_fiber_corners=lambda m: (a, b),
        source=lambda w: VBPoint((w.fiber[2], -w.fiber[3]), side.source(w.base)),
        target=lambda w: VBPoint((w.fiber[0], w.fiber[1]), side.target(w.base)),
        unit=lambda e: VBPoint((e.fiber[0], e.fiber[1], e.fiber[0], -e.fiber[1]), side.unit(e.base)),
        product=product,
        inverse=inverse,
        core_corners=lambda m: (a, b),
        core_embed=lambda m, f: VBPoint((f[0], f[1], _zero(p0), _zero(p0)), side.unit(m)),
    )


def tangent_right_spec(p0: ProjectionElement) -> VBGroupoidSpec:
    """Tangent groupoid of the right groupoid; fibre (chi', v, w) over (chi, eta, xi)."""
    side = right_groupoid(p0)
    c = _corners_Mp0(p0)

    def product(w, v):
        _match(w.fiber[2], v.fiber[1])
        return VBPoint((w.fiber[0] + v.fiber[0], w.fiber[1], v.fiber[2]), side.product(w.base, v.base))

    return VBGroupoidSpec(
        name="tangent-right",
        side=side,
        fiber_corners=lambda g: ((p0, p0), c, c),
        base_fiber_corners=lambda m: (c,),
        source=lambda w: VBPoint((w.fiber[2],), side.source(w.base)),
        target=lambda w: VBPoint((w.fiber[1],), side.target(w.base)),
        unit=lambda e: VBPoint((_zero(p0), e.fiber[0], e.fiber[0]), side.unit(e.base)),
        product=product,
        inverse=lambda w: VBPoint((-w.fiber[0], w.fiber[2], w.fiber[1]), side.inverse(w.base)),
        core_corners=lambda m: ((p0, p0), c),
        core_embed=lambda m, f: VBPoint((f[0], f[1], _zero(p0)), side.unit(m)),
    )


def dual_tangent_right_spec(p0: ProjectionElement) -> VBGroupoidSpec:
    """Dual of the tangent right groupoid; fibre (chi°, phi, psi) over (chi, eta, xi).

    The unit is (chi°, 0, phi, eta, -phi, eta) and the inverse
    (chi°, -chi, -psi, xi, -phi, eta); these signs are the ones for which the
    unit and inverse laws hold.
    """
    side = right_groupoid(p0)
    c = _corners_p0M(p0)

    def product(w, v):
        _match(w.fiber[0], v.fiber[0])
        _match(-w.fiber[2], v.fiber[1])
        return VBPoint((w.fiber[0], w.fiber[1], v.fiber[2]), side.product(w.base, v.base))

    return VBGroupoidSpec(
        name="dual-tangent-right",
        side=side,
        fiber_corners=lambda g: ((p0, p0), c, c),
        base_fiber_corners=lambda m: ((p0, p0), c),
        source=lambda w: VBPoint((w.fiber[0], -w.fiber[2]), side.source(w.base)),
        target=lambda w: VBPoint((w.fiber[0], w.fiber[1]), side.target(w.base)),
        unit=lambda e: VBPoint((e.fiber[0], e.fiber[1], -e.fiber[1]), side.unit(e.base)),
        product=product,
        inverse=lambda w: VBPoint((w.fiber[0], -w.fiber[2], -w.fiber[1]), side.inverse(w.base)),
        core_corners=lambda m: (c,),
        core_embed=lambda m, f: VBPoint((_zero(p0), f[0], _zero(p0)), side.unit(m)),
    )


CATALOGUE = {
    "action": action_spec,
    "tangent-pair": tangent_pair_spec,
    "tangent-quotient": tangent_quotient_spec,
    "annihilator": annihilator_spec,
    "pair-cotangent": pair_cotangent_spec,
    "right": right_spec,
    "tangent-prolongation": tangent_prolongation_spec,
    "dual-prolongation": dual_prolongation_spec,
    "tangent-right": tangent_right_spec,
    "dual-tangent-right": dual_tangent_right_spec,
}

# the groupoids of the two short exact sequences over the pair groupoid of P0
SEQUENCE_GROUPOIDS = ("action", "tangent-pair", "tangent-quotient", "pair-cotangent", "right")

# primal groupoid -> hand-written dual
DUAL_PAIRS = {
    "action": "right",
    "tangent-pair": "pair-cotangent",
    "tangent-prolongation": "dual-prolongation",
    "tangent-right": "dual-tangent-right",
}

# fibre dimension of the core, as a function of p0
CORE_DIMS = {
    "action": lambda p0: 0,
    "tangent-pair": lambda p0: _corner_dim_of(_corners_Mp0(p0)),
    "tangent-quotient": lambda p0: _corner_dim_of(_corners_Mp0(p0)),
}


def _corner_dim_of(c):
    return corner_dim(*c)


# ---------------------------------------------------------------- typed arrows

@dataclass(frozen=True)
class PairCotangentArrow:
    phi: AlgebraElement
    eta: AlgebraElement
    psi: AlgebraElement
    xi: AlgebraElement
    p0: ProjectionElement

    def __post_init__(self):
        one = _one(self.p0)
        _check_corner(self.phi, self.p0, one)
        _check_corner(self.psi, self.p0, one)
        _check_corner(self.eta, one, self.p0)
        _check_corner(self.xi, one, self.p0)

    @property
    def point(self) -> VBPoint:
        return VBPoint((self.phi, self.psi), (self.eta, self.xi))


@dataclass(frozen=True)
class RightArrow:
    chi: AlgebraElement
    eta: AlgebraElement
    xi: AlgebraElement
    p0: ProjectionElement

    def __post_init__(self):
        one = _one(self.p0)
        _check_corner(self.chi, self.p0, self.p0)
        _check_corner(self.eta, one, self.p0)
        _check_corner(self.xi, one, self.p0)

    @property
    def point(self) -> VBPoint:
        return VBPoint((self.chi,), (self.eta, self.xi))


# ---------------------------------------------------------------- exact sequences

def sequence_maps(p0: ProjectionElement):
    """The two short exact sequences over the pair groupoid, as fibre maps.

    action --I2--> tangent-pair --A2--> tangent-quotient and its dual
    annihilator --A2*--> pair-cotangent --I2*--> right.
    """
    def I2(w):
        eta, xi = w.base
        x = w.fiber[0]
        return VBPoint((eta @ x, xi @ x), w.base)

    def A2(w):
        return VBPoint(horizontal_rep2(w.fiber[0], w.fiber[1], *w.base), w.base)

    def A2_star(w):
        return w

    def I2_star(w):
        eta, xi = w.base
        return VBPoint((w.fiber[0] @ eta + w.fiber[1] @ xi,), w.base)

    return {"I2": I2, "A2": A2, "A2*": A2_star, "I2*": I2_star}


def exact_sequence_check(p0: ProjectionElement, n_samples=10, seed=0) -> dict:
    """Morphism property and fibrewise exactness of both sequences."""
    rng = _rng(seed)
    maps = sequence_maps(p0)
    specs = {k: CATALOGUE[k](p0) for k in ("action", "tangent-pair", "tangent-quotient",
                                          "annihilator", "pair-cotangent", "right")}
    morph, exact = 0.0, 0
    for src, fn, dst in (("action", "I2", "tangent-pair"), ("tangent-pair", "A2", "tangent-quotient"),
                         ("annihilator", "A2*", "pair-cotangent"), ("pair-cotangent", "I2*", "right")):
        S, T, F = specs[src], specs[dst], maps[fn]
        for _ in range(n_samples):
            w, v = sample_composable(S, rng, 2)
            morph = max(morph, T.distance(F(S.product(w, v)), T.product(F(w), F(v))))
            morph = max(morph, T.distance(F(S.inverse(w)), T.inverse(F(w))))
    for first, second, (a, b) in ((("action", "I2"), ("tangent-pair", "A2"), ("action", "tangent-pair")),
                                   (("annihilator", "A2*"), ("pair-cotangent", "I2*"),
                                    ("annihilator", "pair-cotangent"))):
        for _ in range(n_samples):
            g = specs[a].side.sample_arrow(rng)
            S1, S2 = specs[first[0]], specs[second[0]]
            f1, f2 = maps[first[1]], maps[second[1]]
            fr1, fr2 = S1.frame(g), S2.frame(g)
            tgt = specs["tangent-quotient"] if second[1] == "A2" else specs["right"]
            fr3 = tgt.frame(g)
            M1 = _matrix(lambda f: f1(S1.normal(VBPoint(f, g))).fiber, fr1, fr2)
            M2 = _matrix(lambda f: f2(VBPoint(f, g)).fiber, fr2, fr3)
            # image of the first map inside the ambient corners of the first fibre
            d1 = _rank(_matrix(lambda f: S1.normal(VBPoint(f, g)).fiber, fr1, fr1))
            r1, r2 = _rank(M1), _rank(M2)
            comp = np.abs(M2 @ M1).max() if M1.size and M2.size else 0.0
            fibre3 = _rank(_matrix(lambda f: tgt.normal(VBPoint(f, g)).fiber, fr3, fr3))
            ok = r1 == d1 and r1 + r2 == fr2.dim and r2 == fibre3 and comp < 1e-9
            exact += 0 if ok else 1
    return {"morphism_residual": morph, "exactness_failures": exact,
            "passed": morph <= LINEAR_TOL and exact == 0}
