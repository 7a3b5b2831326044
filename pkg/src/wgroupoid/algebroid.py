"""The Atiyah algebroid of G(M) over the projection lattice.

Fibres over q are qMq (isotropy), Mq (left-invariant fields) and (1-q)Mq
(tangent to the lattice).  Sections are written either globally, as
G0-equivariant maps eta -> v(eta) on P0, or in a chart centred at p as a pair
(a_p(y), b_p(y)).  Coefficients given as trace polynomials in the variable
``y`` (or ``eta``) are differentiated exactly; plain callables fall back to
central differences.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Union

from .algebra import AlgebraElement, ProjectionElement, partial_inverse
from .bundle import bundle_chart
from .errors import CornerError
from .traceword import Observable, TraceWordObservable, const, var

Coefficient = Union[TraceWordObservable, Callable]

FD_STEP = 1e-5


def _corner_check(x, left, right, tol=1e-12):
    if (left @ x @ right - x).norm() > tol * max(1.0, x.norm()):
        raise CornerError("element outside the required corner")


def atiyah_iota(x, q):
    """Inclusion qMq -> Mq."""
    _corner_check(x, q, q)
    return x


def atiyah_a(x, q):
    """Projection Mq -> (1-q)Mq."""
    _corner_check(x, AlgebraElement.identity(x.desc), q)
    return x - q @ x


def _apply(coef, y, name):
    if isinstance(coef, TraceWordObservable):
        return coef({name: y})
    return coef(y)


def _dir(coef, y, h, name):
    """Directional derivative of a coefficient at y along h."""
    if isinstance(coef, TraceWordObservable):
        return coef.directional({name: y}, name, h)
    return (coef(y + FD_STEP * h) - coef(y - FD_STEP * h)) / (2 * FD_STEP)


def _poly_dir(coef, along, name):
    """Symbolic D coef[along] for polynomial coefficients."""
    return coef.diff(name, "__h__").subs({"__h__": along})


@dataclass(frozen=True)
class ChartSection:
    """X = a_p d/dy_p + b_p d/dz_pp0 on the chart centred at p."""

    p: ProjectionElement
    a: Coefficient
    b: Coefficient
    name: str = "y"

    def __call__(self, y):
        return _apply(self.a, y, self.name), _apply(self.b, y, self.name)

    @property
    def exact(self) -> bool:
        return isinstance(self.a, TraceWordObservable) and isinstance(self.b, TraceWordObservable)

    def scaled(self, f) -> "ChartSection":
        """f X for a scalar function f of y."""
        if self.exact and isinstance(f, TraceWordObservable):
            return ChartSection(self.p, f * self.a, f * self.b, self.name)
        g = f if not isinstance(f, TraceWordObservable) else (lambda y, f=f: f({self.name: y}))
        return ChartSection(
            self.p,
            lambda y: g(y) * _apply(self.a, y, self.name),
            lambda y: g(y) * _apply(self.b, y, self.name),
            self.name,
        )


def chart_var(p: ProjectionElement, name="y") -> TraceWordObservable:
    one = AlgebraElement.identity(p.desc)
    return var(p.desc, name, one - p, p)


def anchor(X: ChartSection):
    """Base vector field y -> a_p(y)."""
    return lambda y: _apply(X.a, y, X.name)


def bracket_chart(X1: ChartSection, X2: ChartSection) -> ChartSection:
    p, n = X1.p, X1.name
    if X1.exact and X2.exact:
        a = _poly_dir(X2.a, X1.a, n) - _poly_dir(X1.a, X2.a, n)
        b = _poly_dir(X2.b, X1.a, n) - _poly_dir(X1.b, X2.a, n) + X2.b @ X1.b - X1.b @ X2.b
        return ChartSection(p, a, b, n)

    def a(y):
        a1, a2 = _apply(X1.a, y, n), _apply(X2.a, y, n)
        return _dir(X2.a, y, a1, n) - _dir(X1.a, y, a2, n)

    def b(y):
        a1, a2 = _apply(X1.a, y, n), _apply(X2.a, y, n)
        b1, b2 = _apply(X1.b, y, n), _apply(X2.b, y, n)
        return _dir(X2.b, y, a1, n) - _dir(X1.b, y, a2, n) + b2 @ b1 - b1 @ b2

    return ChartSection(p, a, b, n)


def vector_field_commutator(f1, f2, y, h=FD_STEP):
    """Lie bracket of two base vector fields, by central differences."""
    d2 = (f2(y + h * f1(y)) - f2(y - h * f1(y))) / (2 * h)
    d1 = (f1(y + h * f2(y)) - f1(y - h * f2(y))) / (2 * h)
    return d2 - d1


@dataclass(frozen=True)
class GlobalSection:
    """V = v d/deta with v(eta g) = v(eta) g."""

    v: Coefficient
    name: str = "eta"

    def __call__(self, eta):
        return _apply(self.v, eta, self.name)

    @property
    def exact(self) -> bool:
        return isinstance(self.v, TraceWordObservable)


def linear_section(w: AlgebraElement, p0: ProjectionElement) -> GlobalSection:
    """v(eta) = w eta, the infinitesimal left translation by w."""
    one = AlgebraElement.identity(p0.desc)
    return GlobalSection(const(w) @ var(p0.desc, "eta", one, p0))


def bracket_global(V1: GlobalSection, V2: GlobalSection) -> GlobalSection:
    n = V1.name
    if V1.exact and V2.exact:
        return GlobalSection(_poly_dir(V2.v, V1.v, n) - _poly_dir(V1.v, V2.v, n), n)

    def v(eta):
        v1, v2 = _apply(V1.v, eta, n), _apply(V2.v, eta, n)
        return _dir(V2.v, eta, v1, n) - _dir(V1.v, eta, v2, n)

    return GlobalSection(v, n)


def section_to_chart(V: GlobalSection, p: ProjectionElement, z0: AlgebraElement) -> ChartSection:
    """Chart coefficients along the slice eta = (p + y) z0.

    For G0-equivariant V the coefficients do not depend on the choice of the
    reference frame z0 in pMp0.
    """
    z0i = partial_inverse(z0)
    if V.exact:
        y = chart_var(p)
        eta = (const(p) + y) @ const(z0)
        v = V.v.subs({V.name: eta})
        a = (v - (const(p) + y) @ const(p) @ v) @ const(z0i)
        b = const(p) @ v @ const(z0i)
        return ChartSection(p, a, b)

    def a(y):
        eta = (p + y) @ z0
        v = V(eta)
        return (v - (p + y) @ p @ v) @ z0i

    def b(y):
        return p @ V((p + y) @ z0) @ z0i

    return ChartSection(p, a, b)


def section_from_chart(X: ChartSection) -> GlobalSection:
    def v(eta):
        y, z = bundle_chart(X.p, eta)
        a, b = X(y)
        return (a + (X.p + y) @ b) @ z

    return GlobalSection(v)


def section_convert(section, p: ProjectionElement = None, z0: AlgebraElement = None):
    """Global section -> chart section (needs p and a frame z0 in pMp0), or chart -> global."""
    if isinstance(section, ChartSection):
        return section_from_chart(section)
    if p is None or z0 is None:
        raise ValueError("converting a global section needs a chart projection p and frame z0")
    return section_to_chart(section, p, z0)


def invariant_ratio(A: AlgebraElement, B: AlgebraElement, p0: ProjectionElement) -> Observable:
    """rho(eta) = Tr(A eta (B eta)^{-1}), invariant under eta -> eta g.

    B is taken in p0 M so that B eta is an element of p0 M p0; the gradient is
    K A - K A eta K B with K = (B eta)^{-1}.
    """
    B = p0 @ B

    def value(env):
        eta = env["eta"]
        return (A @ eta @ partial_inverse(B @ eta)).trace()

    def grad(env):
        eta = env["eta"]
        K = partial_inverse(B @ eta)
        return p0 @ (K @ A - K @ A @ eta @ K @ B)

    return Observable(value, {"eta": grad})


def f_V_rho(V: GlobalSection, rho=None, p0: ProjectionElement = None):
    """f(phi, eta) = <phi, v(eta)> + rho(eta) on the predual cotangent bundle.

    V must have polynomial coefficients; rho may be a trace polynomial or an
    Observable with an exact gradient.  V = None stands for the zero section.
    """
    if V is None:
        if rho is None:
            raise ValueError("f_V_rho needs a section or a function")
        return rho
    if not V.exact:
        raise TypeError("f_V_rho needs a section with polynomial coefficients")
    one = AlgebraElement.identity(p0.desc)
    phi = var(p0.desc, "phi", p0, one)
    f = (phi @ V.v).trace()
    return f if rho is None else rho + f


def derivative_along(V: GlobalSection, rho) -> Observable:
    """The function V(rho): eta -> d rho (v(eta))."""
    g = rho.grad("eta")
    return Observable(
        lambda env: (g(env) @ V(env["eta"])).trace(),
        {},
    )
