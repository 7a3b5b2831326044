"""Fibre-wise linear Poisson geometry of the predual cotangent bundle of P0.

Points are pairs (phi, eta) with phi in p0 M (the predual corner, identified
with M through the trace pairing) and eta in P0.  Observables are functions of
the variables ``phi`` and ``eta``; chart observables use ``alpha``, ``beta``,
``y`` and ``z``; observables on p0 M p0 use ``beta``.

Gradient conventions: df/dphi lies in M p0 and df/deta in p0 M, so that
df(theta, v) = Tr(df/dphi theta) + Tr(df/deta v).
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .algebra import AlgebraElement, ProjectionElement, corner_basis, left_support, partial_inverse, pairing
from .bundle import bundle_chart
from .errors import BaseMismatch, InvarianceViolation
from .groupoid import TransitionBlocks, _require_chart
from .traceword import Observable, TraceWordObservable, jacobiator, var


def _one(x):
    return AlgebraElement.identity(x.desc)


def _g(f, name, env):
    return f.grad(name)(env)


# ---------------------------------------------------------------- variables

def cotangent_vars(p0: ProjectionElement):
    """Trace-polynomial variables phi in p0 M and eta in M p0."""
    one = _one(p0)
    return var(p0.desc, "phi", p0, one), var(p0.desc, "eta", one, p0)


def beta_var(p0: ProjectionElement, name="beta"):
    return var(p0.desc, name, p0, p0)


def chart_vars(p: ProjectionElement, p0: ProjectionElement):
    """Variables alpha in pM(1-p), beta in pMp, y in (1-p)Mp, z in pMp0."""
    one = _one(p)
    q = one - p
    d = p.desc
    return (
        var(d, "alpha", p, q),
        var(d, "beta", p, p),
        var(d, "y", q, p),
        var(d, "z", p, p0),
    )


# ---------------------------------------------------------------- forms

@dataclass(frozen=True)
class TangentAtCotangent:
    theta: AlgebraElement
    v: AlgebraElement
    phi: AlgebraElement
    eta: AlgebraElement


def canonical_one_form(xi: TangentAtCotangent) -> complex:
    return pairing(xi.phi, xi.v)


def symplectic_two_form(xi1: TangentAtCotangent, xi2: TangentAtCotangent, tol=1e-12) -> complex:
    if (xi1.phi - xi2.phi).norm() > tol or (xi1.eta - xi2.eta).norm() > tol:
        raise BaseMismatch("tangent vectors at different points")
    return pairing(xi1.theta, xi2.v) - pairing(xi2.theta, xi1.v)


def flat(xi: TangentAtCotangent):
    """Covector omega(., xi) as the pair (phi-component, eta-component).

    With this orientation the anchor below inverts it: flat(anchor(c)) = c.
    """
    return xi.v, -xi.theta


def sub_anchor_1(phi_c, eta_c, phi, eta) -> TangentAtCotangent:
    """(phi°, eta°, phi, eta) -> (-eta°, phi°, phi, eta)."""
    return TangentAtCotangent(-eta_c, phi_c, phi, eta)


def differential(f, env):
    """df as the flat pair (df/dphi, df/deta)."""
    return _g(f, "phi", env), _g(f, "eta", env)


# ---------------------------------------------------------------- brackets

def pbracket(f, g, env) -> complex:
    """<dg/deta, df/dphi> - <df/deta, dg/dphi>."""
    return (_g(g, "eta", env) @ _g(f, "phi", env)).trace() - (
        _g(f, "eta", env) @ _g(g, "phi", env)
    ).trace()


def hamiltonian_field(f, env) -> TangentAtCotangent:
    return TangentAtCotangent(-_g(f, "eta", env), _g(f, "phi", env), env["phi"], env["eta"])


def _pb_ham(f, env):
    return {"phi": -_g(f, "eta", env), "eta": _g(f, "phi", env)}


def pbracket_jacobi(f, g, h, env):
    return jacobiator(pbracket, _pb_ham, f, g, h, env)


def momentum_J0(phi, eta):
    return phi @ eta


momentum_J1 = momentum_J0


def momentum_JR(phi, eta):
    """eta phi, the second momentum map when p0 = 1."""
    return eta @ phi


def lp_bracket(F, G, env, name="beta") -> complex:
    """<beta, [dF/dbeta, dG/dbeta]>."""
    b = env[name]
    Fb, Gb = _g(F, name, env), _g(G, name, env)
    return (b @ (Fb @ Gb - Gb @ Fb)).trace()


def _lp_ham(F, env, name="beta"):
    b, Fb = env[name], _g(F, name, env)
    return {name: b @ Fb - Fb @ b}


def lp_jacobi(F, G, H, env):
    return jacobiator(lp_bracket, _lp_ham, F, G, H, env)


def pull_back(F: TraceWordObservable, momentum="J1", p0=None) -> TraceWordObservable:
    """F o J as a trace polynomial in (phi, eta); J = phi eta or eta phi."""
    phi, eta = cotangent_vars(p0)
    word = phi @ eta if momentum in ("J0", "J1", "JL") else eta @ phi
    return F.subs({"beta": word})


def check_J1_poisson(F, G, points, p0, tol=1e-9, momentum="J1", sign=1):
    """Max residual of {F o J, G o J} - sign {F, G}_LP o J over sample points."""
    f, g = pull_back(F, momentum, p0), pull_back(G, momentum, p0)
    worst = 0.0
    for phi, eta in points:
        J = phi @ eta if momentum in ("J0", "J1", "JL") else eta @ phi
        lhs = pbracket(f, g, {"phi": phi, "eta": eta})
        rhs = lp_bracket(F, G, {"beta": J})
        worst = max(worst, abs(lhs - sign * rhs) / max(1.0, abs(lhs)))
    return {"residual": worst, "tolerance": tol, "passed": worst <= tol, "samples": len(points)}


def J1_jacobian_rank(phi, eta, p0, h=1e-6):
    """Numerical rank of the central-difference Jacobian of (phi, eta) -> phi eta."""
    one = _one(p0)
    dirs = [(b, None) for b in corner_basis(p0, one)] + [(None, b) for b in corner_basis(one, p0)]
    target = corner_basis(p0, p0)
    cols = []
    for dphi, deta in dirs:
        def J(t):
            ph = phi + t * dphi if dphi is not None else phi
            et = eta + t * deta if deta is not None else eta
            return ph @ et
        d = (J(h) - J(-h)) / (2 * h)
        cols.append([pairing(e.H, d) for e in target])
    mat = np.array(cols).T
    s = np.linalg.svd(mat, compute_uv=False)
    rank = int(np.sum(s > 1e-8 * s[0])) if s.size and s[0] > 0 else 0
    return rank, len(target)


# ---------------------------------------------------------------- cotangent charts

@dataclass(frozen=True)
class CotangentChartQuad:
    p: ProjectionElement
    alpha: AlgebraElement
    beta: AlgebraElement
    y: AlgebraElement
    z: AlgebraElement


def cotangent_chart(p, phi, eta) -> CotangentChartQuad:
    y, z = bundle_chart(p, eta)
    one = _one(p)
    alpha = z @ phi @ (one - p)
    beta = z @ phi @ eta @ partial_inverse(z)
    return CotangentChartQuad(p, alpha, beta, y, z)


def cotangent_chart_inv(q: CotangentChartQuad):
    """Return (phi, eta)."""
    phi = partial_inverse(q.z) @ (q.alpha + q.beta - q.alpha @ q.y)
    return phi, (q.p + q.y) @ q.z


def cotangent_transition(q: CotangentChartQuad, p2, check=True) -> CotangentChartQuad:
    if check:
        _require_chart(p2, left_support(q.p + q.y))
    tb = TransitionBlocks.of(q.p, p2)
    one = _one(p2)
    A = tb.a + tb.c @ q.y
    Ai = partial_inverse(A)
    alpha2 = A @ (q.alpha + q.beta - q.alpha @ q.y) @ (one - p2)
    beta2 = A @ q.beta @ Ai
    y2 = (tb.b + tb.d @ q.y) @ Ai
    return CotangentChartQuad(p2, alpha2, beta2, y2, A @ q.z)


def momentum_J1_coords(q: CotangentChartQuad):
    return partial_inverse(q.z) @ q.beta @ q.z


def chart_env(q: CotangentChartQuad):
    return {"alpha": q.alpha, "beta": q.beta, "y": q.y, "z": q.z}


def chart_bracket(f, g, env, with_z=True) -> complex:
    """Poisson bracket in the coordinates (alpha, beta, y, z).

    <dg/dy, df/dalpha> - <df/dy, dg/dalpha> + <beta, [dg/dbeta, df/dbeta]>
    + <z dg/dz, df/dbeta> - <z df/dz, dg/dbeta>; the last two terms are
    dropped when ``with_z`` is false (z-independent observables).
    """
    fa, fb, fy = _g(f, "alpha", env), _g(f, "beta", env), _g(f, "y", env)
    ga, gb, gy = _g(g, "alpha", env), _g(g, "beta", env), _g(g, "y", env)
    b = env["beta"]
    out = (gy @ fa).trace() - (fy @ ga).trace() + (b @ (gb @ fb - fb @ gb)).trace()
    if with_z:
        z = env["z"]
        out = out + (z @ _g(g, "z", env) @ fb).trace() - (z @ _g(f, "z", env) @ gb).trace()
    return out


def reduced_bracket(f, g, env) -> complex:
    return chart_bracket(f, g, env, with_z=False)


def chart_hamiltonian(f, env, with_z=True):
    """Velocities (alpha', beta', y', z') of the field X_f with {f, k} = dk(X_f)."""
    fa, fb, fy = _g(f, "alpha", env), _g(f, "beta", env), _g(f, "y", env)
    b = env["beta"]
    out = {"alpha": -fy, "beta": fb @ b - b @ fb, "y": fa}
    if with_z:
        z = env["z"]
        out["beta"] = out["beta"] - z @ _g(f, "z", env)
        out["z"] = fb @ z
    return out


def chart_anchor(alpha_c, beta_c, y_c, z_c, q: CotangentChartQuad):
    """Sub-Poisson anchor in chart coordinates, fixed by anchor(df) = X_f.

    (alpha°, beta°, y°, z°) -> (-y°, -ad*_{beta°} beta - z z°, alpha°, beta° z)
    with ad*_x beta = [beta, x].
    """
    return (
        -y_c,
        beta_c @ q.beta - q.beta @ beta_c - q.z @ z_c,
        alpha_c,
        beta_c @ q.z,
    )


def reduced_anchor(alpha_c, y_c):
    """(alpha°, y°) -> (-y°, alpha°) on the predual cotangent bundle of the base."""
    return -y_c, alpha_c


def chart_jacobi(f, g, h, env, with_z=True):
    return jacobiator(
        lambda a, b, e: chart_bracket(a, b, e, with_z),
        lambda a, e: chart_hamiltonian(a, e, with_z),
        f, g, h, env,
    )


def transport_to_global(f, p: ProjectionElement, p0: ProjectionElement) -> Observable:
    """The observable (phi, eta) -> f(chart(phi, eta)) with chain-rule gradients."""
    one = _one(p)

    def parts(env):
        q = cotangent_chart(p, env["phi"], env["eta"])
        ce = chart_env(q)
        return q, ce

    def value(env):
        return f(parts(env)[1])

    def gphi(env):
        q, ce = parts(env)
        fa, fb = _g(f, "alpha", ce), _g(f, "beta", ce)
        return ((one - p) @ fa + (q.p + q.y) @ fb) @ q.z @ p0

    def geta(env):
        q, ce = parts(env)
        phi = env["phi"]
        fa, fb, fy, fz = (_g(f, n, ce) for n in ("alpha", "beta", "y", "z"))
        zi = partial_inverse(q.z)
        x = q.p + q.y
        rep = (
            zi @ (fy + fb @ q.z @ phi) @ (one - x @ q.p)
            + fz @ q.p
            + phi @ (one - q.p) @ fa @ q.p
            + phi @ x @ fb @ q.p
        )
        return p0 @ rep

    return Observable(value, {"phi": gphi, "eta": geta})


# ---------------------------------------------------------------- invariant observables

class InvariantFunction(Observable):
    """F(beta, eta) = P(beta, eta, K) with K = (B eta)^{-1} and P a trace polynomial.

    Built from words in which every eta is followed by a power of beta and
    then K, such functions satisfy F(g^{-1} beta g, eta g) = F(beta, eta).
    """

    def __init__(self, P: TraceWordObservable, B: AlgebraElement, p0: ProjectionElement):
        self.P, self.B, self.p0 = P, p0 @ B, p0
        super().__init__(self._value, {"beta": self._gbeta, "eta": self._geta})

    def _K(self, env):
        return partial_inverse(self.B @ env["eta"])

    def _env(self, env):
        return {"beta": env["beta"], "eta": env["eta"], "K": self._K(env)}

    def _value(self, env):
        return self.P(self._env(env))

    def _gbeta(self, env):
        return self.p0 @ self.P.grad("beta")(self._env(env)) @ self.p0

    def _geta(self, env):
        e = self._env(env)
        K = e["K"]
        return self.p0 @ (self.P.grad("eta")(e) - K @ self.P.grad("K")(e) @ K @ self.B)


def check_invariance(F, beta, eta, g, tol=1e-8) -> float:
    gi = partial_inverse(g)
    r = abs(F({"beta": gi @ beta @ g, "eta": eta @ g}) - F({"beta": beta, "eta": eta}))
    if r > tol * max(1.0, abs(F({"beta": beta, "eta": eta}))):
        warnings.warn(f"observable not G0-invariant (defect {r:.2e})", InvarianceViolation)
    return r


def sp_bracket(F, G, env) -> complex:
    """<beta, [dF/dbeta, dG/dbeta]> at (beta, eta)."""
    return lp_bracket(F, G, env)


def compose_I_star(F) -> Observable:
    """(phi, eta) -> F(phi eta, eta) with chain-rule gradients."""

    def env_of(env):
        return {"beta": env["phi"] @ env["eta"], "eta": env["eta"]}

    def value(env):
        return F(env_of(env))

    def gphi(env):
        e = env_of(env)
        return env["eta"] @ F.grad("beta")(e)

    def geta(env):
        e = env_of(env)
        return F.grad("beta")(e) @ env["phi"] + F.grad("eta")(e)

    return Observable(value, {"phi": gphi, "eta": geta})


# ---------------------------------------------------------------- reduction

def a_star_p(alpha, y, p, eta_ref):
    """Point of the predual cotangent bundle over sigma_p(q) eta_ref with beta_p = 0.

    eta_ref must have target p; then the chart frame along the section is
    z = p eta_ref and the covector pulls back rho = alpha along the projection.
    """
    z = p @ eta_ref
    return cotangent_chart_inv(CotangentChartQuad(p, alpha, AlgebraElement.zero(p.desc), y, z))


def mw_reduction_check(p, eta_ref, samples, h=1e-5, tol=1e-8):
    """Check J1 = 0 on the image of a_{*p} and that it pulls back gamma to <alpha, ydot>.

    ``samples`` is a sequence of (alpha, y, alpha_dot, y_dot).
    """
    worst_J, worst_g = 0.0, 0.0
    for alpha, y, adot, ydot in samples:
        phi, eta = a_star_p(alpha, y, p, eta_ref)
        worst_J = max(worst_J, (phi @ eta).norm() / max(1.0, phi.norm() * eta.norm()))
        eta_p = a_star_p(alpha + h * adot, y + h * ydot, p, eta_ref)[1]
        eta_m = a_star_p(alpha - h * adot, y - h * ydot, p, eta_ref)[1]
        v = (eta_p - eta_m) / (2 * h)
        lhs = pairing(phi, v)
        rhs = pairing(alpha, ydot)
        worst_g = max(worst_g, abs(lhs - rhs) / max(1.0, abs(rhs)))
    return {
        "J1_residual": worst_J,
        "pullback_residual": worst_g,
        "tolerance": tol,
        "passed": worst_J <= 1e-12 and worst_g <= tol,
        "samples": len(samples),
    }
