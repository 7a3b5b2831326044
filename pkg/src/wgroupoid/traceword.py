"""Trace polynomials in matrix variables with exact derivatives.

A term is ``c * Tr(w_1) * ... * Tr(w_k) * w_0`` where each ``w_j`` is a word,
a product of named variables and constant algebra elements.  A polynomial is
scalar valued when no term carries the open word ``w_0`` and matrix valued
otherwise.  Sums, products, traces, substitution of variables by matrix
polynomials and differentiation all stay inside this class, so brackets of
brackets can be formed symbolically and evaluated without finite differences.

Derivatives are complex linear.  ``grad(f, X)`` returns the representative G
with df(h) = Tr(G h) for h in the corner L M R declared for X; the
representative is cut down to R G L, the predual corner.
"""
from __future__ import annotations

from typing import Mapping

import numpy as np

from .algebra import AlgebraDescriptor, AlgebraElement, _rng, random_element


def _eval_word(word, env, desc):
    out = None
    for f in word:
        m = env[f] if isinstance(f, str) else f
        out = m if out is None else out @ m
    return AlgebraElement.identity(desc) if out is None else out


class TraceWordObservable:
    __slots__ = ("desc", "terms", "is_matrix", "corners")

    def __init__(self, desc: AlgebraDescriptor, terms, is_matrix: bool, corners=None):
        self.desc = desc
        self.terms = tuple(terms)
        self.is_matrix = is_matrix
        self.corners = dict(corners or {})

    # construction helpers
    def _new(self, terms, is_matrix=None, other=None):
        corners = dict(self.corners)
        if other is not None:
            corners.update(other.corners)
        return TraceWordObservable(
            self.desc, terms, self.is_matrix if is_matrix is None else is_matrix, corners
        )

    def _lift(self, other):
        if isinstance(other, TraceWordObservable):
            return other
        if self.is_matrix:
            return const(other) if isinstance(other, AlgebraElement) else NotImplemented
        if isinstance(other, (int, float, complex, np.number)):
            return scalar(self.desc, other)
        return NotImplemented

    def __add__(self, other):
        other = self._lift(other)
        if other is NotImplemented:
            return other
        if other.is_matrix != self.is_matrix and other.terms and self.terms:
            raise TypeError("cannot add scalar and matrix polynomials")
        kind = self.is_matrix if self.terms else other.is_matrix
        return self._new(self.terms + other.terms, kind, other)

    __radd__ = __add__

    def __neg__(self):
        return self._new([(-c, t, o) for c, t, o in self.terms])

    def __sub__(self, other):
        other = self._lift(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self).__add__(other)

    def __mul__(self, other):
        if isinstance(other, TraceWordObservable):
            if self.is_matrix and other.is_matrix:
                raise TypeError("use @ for matrix products")
            terms = []
            for c1, t1, o1 in self.terms:
                for c2, t2, o2 in other.terms:
                    terms.append((c1 * c2, t1 + t2, o1 if o1 is not None else o2))
            return self._new(terms, self.is_matrix or other.is_matrix, other)
        if not isinstance(other, (int, float, complex, np.number)):
            return NotImplemented
        return self._new([(other * c, t, o) for c, t, o in self.terms])

    __rmul__ = __mul__

    def __matmul__(self, other):
        if isinstance(other, AlgebraElement):
            other = const(other)
        if not (self.is_matrix and other.is_matrix):
            raise TypeError("@ needs matrix polynomials")
        terms = [
            (c1 * c2, t1 + t2, o1 + o2)
            for c1, t1, o1 in self.terms
            for c2, t2, o2 in other.terms
        ]
        return self._new(terms, True, other)

    def __rmatmul__(self, other):
        return const(other) @ self

    def trace(self) -> "TraceWordObservable":
        if not self.is_matrix:
            raise TypeError("already scalar")
        return self._new([(c, t + (o,), None) for c, t, o in self.terms], False)

    def with_corner(self, name, left, right) -> "TraceWordObservable":
        out = self._new(self.terms)
        out.corners[name] = (left, right)
        return out

    # evaluation
    def __call__(self, env: Mapping[str, AlgebraElement]):
        trace_cache = {}
        if self.is_matrix:
            total = AlgebraElement.zero(self.desc)
        else:
            total = 0j
        for c, traced, open_word in self.terms:
            val = complex(c)
            for w in traced:
                key = id(w)
                if key not in trace_cache:
                    trace_cache[key] = _eval_word(w, env, self.desc).trace()
                val *= trace_cache[key]
                if val == 0:
                    break
            if open_word is None:
                total += val
            elif val != 0:
                total = total + val * _eval_word(open_word, env, self.desc)
        return total

    def variables(self) -> set:
        out = set()
        for _, traced, o in self.terms:
            for w in traced + ((o,) if o is not None else ()):
                out.update(f for f in w if isinstance(f, str))
        return out

    # calculus
    def diff(self, name: str, dname: str) -> "TraceWordObservable":
        """Directional derivative along the variable ``dname`` (linear in it)."""
        out = []
        for c, traced, o in self.terms:
            words = traced + ((o,) if o is not None else ())
            for j, w in enumerate(words):
                for i, f in enumerate(w):
                    if f == name:
                        nw = w[:i] + (dname,) + w[i + 1:]
                        new = words[:j] + (nw,) + words[j + 1:]
                        if o is None:
                            out.append((c, new, None))
                        else:
                            out.append((c, new[:-1], new[-1]))
        return self._new(out)

    def directional(self, env, name, h):
        key = "__dir__"
        return self.diff(name, key)({**env, key: h})

    def grad(self, name: str) -> "TraceWordObservable":
        """Matrix polynomial G with d/dX f (h) = Tr(G h), cut to the predual corner."""
        if self.is_matrix:
            raise TypeError("gradient of a matrix polynomial is not a representative")
        out = []
        for c, traced, _ in self.terms:
            for j, w in enumerate(traced):
                rest = traced[:j] + traced[j + 1:]
                for i, f in enumerate(w):
                    if f == name:
                        out.append((c, rest, w[i + 1:] + w[:i]))
        g = self._new(out, True)
        if name in self.corners:
            left, right = self.corners[name]
            g = const(right) @ g @ const(left)
        return g

    def subs(self, mapping: Mapping[str, "TraceWordObservable"]) -> "TraceWordObservable":
        """Replace variables by matrix polynomials, expanding products."""
        def expand_word(w):
            acc = [(1.0, (), ())]
            for f in w:
                if isinstance(f, str) and f in mapping:
                    acc = [
                        (c1 * c2, t1 + t2, o1 + o2)
                        for c1, t1, o1 in acc
                        for c2, t2, o2 in mapping[f].terms
                    ]
                else:
                    acc = [(c, t, o + (f,)) for c, t, o in acc]
            return acc

        out = []
        for c, traced, o in self.terms:
            acc = [(c, (), None)]
            for w in traced:
                acc = [
                    (c1 * c2, t1 + t2 + (o2,), None)
                    for c1, t1, _ in acc
                    for c2, t2, o2 in expand_word(w)
                ]
            if o is not None:
                acc = [
                    (c1 * c2, t1 + t2, o2)
                    for c1, t1, _ in acc
                    for c2, t2, o2 in expand_word(o)
                ]
            out.extend(acc)
        corners = {k: v for k, v in self.corners.items() if k not in mapping}
        for m in mapping.values():
            corners.update(m.corners)
        return TraceWordObservable(self.desc, out, self.is_matrix, corners)

    def __repr__(self):
        kind = "matrix" if self.is_matrix else "scalar"
        return f"<{kind} trace polynomial, {len(self.terms)} terms, vars {sorted(self.variables())}>"


class Observable:
    """Scalar function given by callables, with exact gradient callables.

    Duck-types the evaluation and ``grad`` interface of trace polynomials so
    that brackets accept either.
    """

    def __init__(self, value, grads):
        self.value = value
        self.grads = dict(grads)

    def __call__(self, env):
        return self.value(env)

    def grad(self, name):
        if name in self.grads:
            return self.grads[name]
        return lambda env: AlgebraElement.zero(next(iter(env.values())).desc)

    def __add__(self, other):
        if isinstance(other, (int, float, complex)):
            return Observable(lambda env: self(env) + other, self.grads)
        names = set(self.grads) | set(getattr(other, "grads", {})) | set(
            other.variables() if isinstance(other, TraceWordObservable) else ()
        )
        return Observable(
            lambda env: self(env) + other(env),
            {n: (lambda env, n=n: self.grad(n)(env) + other.grad(n)(env)) for n in names},
        )

    __radd__ = __add__

    def __neg__(self):
        return -1 * self

    def __sub__(self, other):
        return self + (-1) * other

    def __mul__(self, c):
        return Observable(
            lambda env: c * self(env),
            {n: (lambda env, g=g: c * g(env)) for n, g in self.grads.items()},
        )

    __rmul__ = __mul__


def as_observable(f) -> Observable:
    if isinstance(f, Observable):
        return f
    return Observable(f, {n: f.grad(n) for n in f.variables()})


def var(desc, name, left=None, right=None) -> TraceWordObservable:
    """Matrix variable X, optionally declared to live in the corner left*M*right."""
    corners = {}
    if left is not None or right is not None:
        one = AlgebraElement.identity(desc)
        corners[name] = (one if left is None else left, one if right is None else right)
    return TraceWordObservable(desc, [(1.0, (), (name,))], True, corners)


def const(a: AlgebraElement) -> TraceWordObservable:
    return TraceWordObservable(a.desc, [(1.0, (), (a,))], True)


def scalar(desc, c) -> TraceWordObservable:
    return TraceWordObservable(desc, [(c, (), None)] if c != 0 else [], False)


def tr(p: TraceWordObservable) -> TraceWordObservable:
    return p.trace()


def pair(rho, x) -> TraceWordObservable:
    """<rho, x> = Tr(rho x) for polynomials or constants."""
    if isinstance(rho, AlgebraElement):
        rho = const(rho)
    if isinstance(x, AlgebraElement):
        x = const(x)
    return (rho @ x).trace()


def random_trace_word(desc, variables, seed=None, degree=3, n_terms=3, scale=1.0, products=True):
    """Random scalar trace polynomial in the given ``{name: (left, right)}`` corners.

    Each term is c Tr(A_1 X_1 ... A_m X_m) with random constants; when
    ``products`` is set some terms are products of two such traces.
    """
    rng = _rng(seed)
    names = list(variables)
    vs = {n: var(desc, n, *variables[n]) for n in names}

    def word(m):
        w = const(scale * random_element(desc, rng))
        for _ in range(m):
            w = w @ vs[names[rng.integers(len(names))]] @ const(scale * random_element(desc, rng))
        return w.trace()

    out = scalar(desc, 0)
    for _ in range(n_terms):
        m = int(rng.integers(1, degree + 1))
        c = complex(rng.standard_normal(), rng.standard_normal())
        if products and m >= 2 and rng.random() < 0.4:
            k = int(rng.integers(1, m))
            out = out + c * (word(k) * word(m - k))
        else:
            out = out + c * word(m)
    for n in names:
        out = out.with_corner(n, *variables[n]) if variables[n] is not None else out
    return out


__all__ = [
    "TraceWordObservable",
    "Observable",
    "as_observable",
    "var",
    "const",
    "scalar",
    "tr",
    "pair",
    "random_trace_word",
]


class Dual:
    """First-order dual number over complex scalars or algebra elements.

    Feeding duals into polynomial evaluation gives the value together with the
    exact directional derivative, which is how Jacobi identities are checked
    without expanding brackets of brackets.
    """

    __slots__ = ("val", "der")

    def __init__(self, val, der):
        self.val = val
        self.der = der

    @staticmethod
    def _split(x):
        if isinstance(x, Dual):
            return x.val, x.der
        return x, None

    def __add__(self, other):
        v, d = self._split(other)
        return Dual(self.val + v, self.der if d is None else self.der + d)

    __radd__ = __add__

    def __neg__(self):
        return Dual(-self.val, -self.der)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        v, d = self._split(other)
        if d is None:
            return Dual(self.val * v, self.der * v)
        return Dual(self.val * v, self.der * v + self.val * d)

    def __rmul__(self, other):
        v, d = self._split(other)
        if d is None:
            return Dual(v * self.val, v * self.der)
        return Dual(v * self.val, d * self.val + v * self.der)

    def __matmul__(self, other):
        v, d = self._split(other)
        if d is None:
            return Dual(self.val @ v, self.der @ v)
        return Dual(self.val @ v, self.der @ v + self.val @ d)

    def __rmatmul__(self, other):
        return Dual(other @ self.val, other @ self.der)

    def trace(self):
        return Dual(self.val.trace(), self.der.trace())


def dual_env(env, direction):
    """Attach tangent components to an evaluation environment."""
    out = {}
    for k, v in env.items():
        d = direction.get(k)
        if d is None:
            d = 0j if not isinstance(v, AlgebraElement) else AlgebraElement.zero(v.desc)
        out[k] = Dual(v, d)
    return out


def jacobiator(bracket, hamiltonian, f, g, h, env):
    """{f,{g,h}} + {g,{h,f}} + {h,{f,g}} at env, using {a, k} = dk(X_a).

    ``bracket(a, b, env)`` must evaluate with dual environments and
    ``hamiltonian(a, env)`` returns the field X_a as a dict of directions.
    Returns the sum and the largest single term, for relative scaling.
    """
    total, scale = 0j, 0.0
    for a, b, c in ((f, g, h), (g, h, f), (h, f, g)):
        X = hamiltonian(a, env)
        r = bracket(b, c, dual_env(env, X))
        # a bracket that does not depend on the point has zero derivative
        val = r.der if isinstance(r, Dual) else 0j
        total += val
        scale = max(scale, abs(val))
    return total, scale
