"""Finite-dimensional W*-algebras M = M_{n1}(C) + ... + M_{nK}(C).

Elements are stored block by block.  The predual is identified with M through
the trace pairing <rho, x> = Tr(rho x), so functionals and algebra elements
share one carrier type.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import DescriptorError, RankError

EPS = np.finfo(float).eps
TAU_PROJ = 1e-10


@dataclass(frozen=True)
class AlgebraDescriptor:
    block_dims: tuple

    def __init__(self, block_dims: Iterable[int]):
        dims = tuple(int(n) for n in block_dims)
        if not dims or any(n < 1 for n in dims):
            raise DescriptorError(f"invalid block dimensions {dims!r}")
        object.__setattr__(self, "block_dims", dims)

    @property
    def total_dim(self) -> int:
        return sum(n * n for n in self.block_dims)

    @property
    def n_blocks(self) -> int:
        return len(self.block_dims)

    def __repr__(self):
        return "+".join(f"M{n}" if n > 1 else "C" for n in self.block_dims)

    @classmethod
    def parse(cls, text: str) -> "AlgebraDescriptor":
        """Parse names such as ``M2``, ``C+M2`` or ``M2+M2``; also ``1,2``."""
        text = text.strip().replace(" ", "")
        if "," in text or text.isdigit():
            return cls(int(t) for t in text.split(","))
        dims = []
        for tok in text.replace("⊕", "+").split("+"):
            if tok in ("C", "c", "ℂ"):
                dims.append(1)
            elif tok[:1] in ("M", "m") and tok[1:].isdigit():
                dims.append(int(tok[1:]))
            else:
                raise DescriptorError(f"cannot parse algebra name {text!r}")
        return cls(dims)


class AlgebraElement:
    """Block-diagonal complex matrix.  ``@`` is the algebra product."""

    __slots__ = ("blocks", "desc")
    __array_priority__ = 1000

    def __init__(self, desc: AlgebraDescriptor, blocks: Sequence[np.ndarray]):
        blocks = tuple(np.asarray(b, dtype=complex) for b in blocks)
        if len(blocks) != desc.n_blocks or any(
            b.shape != (n, n) for b, n in zip(blocks, desc.block_dims)
        ):
            raise DescriptorError("block shapes do not match descriptor")
        self.blocks = blocks
        self.desc = desc

    # constructors
    @classmethod
    def zero(cls, desc):
        return cls(desc, [np.zeros((n, n), complex) for n in desc.block_dims])

    @classmethod
    def identity(cls, desc):
        return cls(desc, [np.eye(n, dtype=complex) for n in desc.block_dims])

    @classmethod
    def unit(cls, desc, k: int, i: int, j: int):
        """Matrix unit e_ij in block k."""
        out = [np.zeros((n, n), complex) for n in desc.block_dims]
        out[k][i, j] = 1.0
        return cls(desc, out)

    @classmethod
    def from_dense(cls, desc, mat):
        """Cut the diagonal blocks out of a full matrix."""
        mat = np.asarray(mat, dtype=complex)
        out, o = [], 0
        for n in desc.block_dims:
            out.append(mat[o:o + n, o:o + n].copy())
            o += n
        return cls(desc, out)

    def to_dense(self) -> np.ndarray:
        n = sum(self.desc.block_dims)
        out = np.zeros((n, n), complex)
        o = 0
        for b in self.blocks:
            k = b.shape[0]
            out[o:o + k, o:o + k] = b
            o += k
        return out

    def to_vector(self) -> np.ndarray:
        return np.concatenate([b.ravel() for b in self.blocks])

    @classmethod
    def from_vector(cls, desc, vec):
        out, o = [], 0
        for n in desc.block_dims:
            out.append(np.asarray(vec[o:o + n * n]).reshape(n, n))
            o += n * n
        return cls(desc, out)

    # arithmetic
    def _check(self, other):
        if not isinstance(other, AlgebraElement):
            return NotImplemented
        if other.desc != self.desc:
            raise DescriptorError(f"{self.desc!r} vs {other.desc!r}")
        return other

    def __add__(self, other):
        if self._check(other) is NotImplemented:
            return NotImplemented
        return AlgebraElement(self.desc, [a + b for a, b in zip(self.blocks, other.blocks)])

    def __sub__(self, other):
        if self._check(other) is NotImplemented:
            return NotImplemented
        return AlgebraElement(self.desc, [a - b for a, b in zip(self.blocks, other.blocks)])

    def __neg__(self):
        return AlgebraElement(self.desc, [-a for a in self.blocks])

    def __mul__(self, s):
        if not isinstance(s, (int, float, complex, np.number)):
            return NotImplemented
        return AlgebraElement(self.desc, [s * a for a in self.blocks])

    __rmul__ = __mul__

    def __truediv__(self, s):
        return AlgebraElement(self.desc, [a / s for a in self.blocks])

    def __matmul__(self, other):
        if self._check(other) is NotImplemented:
            return NotImplemented
        return AlgebraElement(self.desc, [a @ b for a, b in zip(self.blocks, other.blocks)])

    @property
    def H(self) -> "AlgebraElement":
        return AlgebraElement(self.desc, [a.conj().T for a in self.blocks])

    def conj(self):
        return AlgebraElement(self.desc, [a.conj() for a in self.blocks])

    def norm(self) -> float:
        """Operator norm: largest singular value over all blocks."""
        return max(float(np.linalg.norm(b, 2)) if b.size else 0.0 for b in self.blocks)

    def trace(self) -> complex:
        return complex(sum(np.trace(b) for b in self.blocks))

    def allclose(self, other, tol=1e-10) -> bool:
        return (self - other).norm() <= tol

    def __repr__(self):
        return f"AlgebraElement({self.desc!r}, {[b.tolist() for b in self.blocks]})"


class ProjectionElement(AlgebraElement):
    """Orthogonal projection; per-block ranks are cached at construction."""

    __slots__ = ("rank_vector",)

    def __init__(self, desc, blocks, rank_vector=None, check=True):
        super().__init__(desc, blocks)
        if check:
            resid = max((self @ self - self).norm(), (self.H - self).norm())
            if resid > TAU_PROJ:
                raise RankError(f"not a projection (residual {resid:.2e})")
        if rank_vector is None:
            rank_vector = tuple(int(round(np.trace(b).real)) for b in self.blocks)
        self.rank_vector = tuple(rank_vector)

    @property
    def rank(self) -> int:
        return sum(self.rank_vector)

    def complement(self) -> "ProjectionElement":
        one = AlgebraElement.identity(self.desc)
        rv = tuple(n - r for n, r in zip(self.desc.block_dims, self.rank_vector))
        return ProjectionElement(self.desc, (one - self).blocks, rv, check=False)


def as_projection(x: AlgebraElement) -> ProjectionElement:
    if isinstance(x, ProjectionElement):
        return x
    return ProjectionElement(x.desc, x.blocks)


def _same(a, b):
    if a.desc != b.desc:
        raise DescriptorError(f"{a.desc!r} vs {b.desc!r}")


def pairing(rho: AlgebraElement, x: AlgebraElement) -> complex:
    """<rho, x> = Tr(rho x), bilinear, no conjugation."""
    _same(rho, x)
    return complex(sum(np.sum(r * xx.T) for r, xx in zip(rho.blocks, x.blocks)))


def rank_tolerance(x: AlgebraElement, tol=None) -> float:
    if tol is not None:
        return tol
    smax = x.norm()
    return max(x.desc.block_dims) * EPS * smax


@dataclass(frozen=True)
class PolarData:
    u: AlgebraElement
    abs: AlgebraElement
    support: ProjectionElement
    left: ProjectionElement


def _block_svd(x: AlgebraElement, tol):
    t = rank_tolerance(x, tol)
    for b in x.blocks:
        U, s, Vh = np.linalg.svd(b)
        r = int(np.sum(s > t)) if s.size and s[0] > 0 else 0
        yield U, s, Vh, r


def polar_decompose(x: AlgebraElement, tol=None) -> PolarData:
    """x = u|x| with u*u the support of |x| (right support of x)."""
    us, abss, rs, ls, ranks = [], [], [], [], []
    for U, s, Vh, r in _block_svd(x, tol):
        V = Vh.conj().T
        Ur, Vr = U[:, :r], V[:, :r]
        us.append(Ur @ Vr.conj().T)
        abss.append((V * s) @ Vh)
        rs.append(Vr @ Vr.conj().T)
        ls.append(Ur @ Ur.conj().T)
        ranks.append(r)
    d = x.desc
    return PolarData(
        AlgebraElement(d, us),
        AlgebraElement(d, abss),
        ProjectionElement(d, rs, ranks, check=False),
        ProjectionElement(d, ls, ranks, check=False),
    )


def left_support(x: AlgebraElement, tol=None) -> ProjectionElement:
    return polar_decompose(x, tol).left


def right_support(x: AlgebraElement, tol=None) -> ProjectionElement:
    return polar_decompose(x, tol).support


def partial_inverse(x: AlgebraElement, tol=None) -> AlgebraElement:
    """Groupoid inverse |x|^{-1}u*, computed as a truncated-SVD pseudoinverse."""
    out = []
    for U, s, Vh, r in _block_svd(x, tol):
        out.append((Vh[:r].conj().T / s[:r]) @ U[:, :r].conj().T)
    return AlgebraElement(x.desc, out)


def singular_values(x: AlgebraElement):
    return [np.linalg.svd(b, compute_uv=False) for b in x.blocks]


def matrix_units(desc: AlgebraDescriptor):
    for k, n in enumerate(desc.block_dims):
        for i in range(n):
            for j in range(n):
                yield AlgebraElement.unit(desc, k, i, j)


def is_central(p: AlgebraElement, tol=None) -> bool:
    t = rank_tolerance(p, tol) if tol is not None else max(TAU_PROJ, rank_tolerance(p))
    return all((p @ e - e @ p).norm() <= t for e in matrix_units(p.desc))


def central_projections(desc: AlgebraDescriptor):
    """All 2^K sums of block identities."""
    out = []
    for mask in itertools.product((0, 1), repeat=desc.n_blocks):
        blocks = [np.eye(n, dtype=complex) * m for n, m in zip(desc.block_dims, mask)]
        rv = [n * m for n, m in zip(desc.block_dims, mask)]
        out.append(ProjectionElement(desc, blocks, rv, check=False))
    return out


def rank_vector(p: AlgebraElement, tol=None) -> tuple:
    if isinstance(p, ProjectionElement):
        return p.rank_vector
    return polar_decompose(p, tol).support.rank_vector


def mvn_equivalent(p: AlgebraElement, q: AlgebraElement) -> bool:
    _same(p, q)
    return rank_vector(p) == rank_vector(q)


def _rng(seed):
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def _gauss(rng, shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def random_element(desc: AlgebraDescriptor, seed=None) -> AlgebraElement:
    rng = _rng(seed)
    return AlgebraElement(desc, [_gauss(rng, (n, n)) for n in desc.block_dims])


def random_unitary(desc: AlgebraDescriptor, seed=None) -> AlgebraElement:
    rng = _rng(seed)
    out = []
    for n in desc.block_dims:
        q, r = np.linalg.qr(_gauss(rng, (n, n)))
        d = np.diag(r)
        out.append(q * (d / np.abs(d)))
    return AlgebraElement(desc, out)


def random_projection(desc: AlgebraDescriptor, rank_vector, seed=None) -> ProjectionElement:
    rv = tuple(int(r) for r in rank_vector)
    if len(rv) != desc.n_blocks or any(r < 0 or r > n for r, n in zip(rv, desc.block_dims)):
        raise RankError(f"rank vector {rv} incompatible with {desc!r}")
    rng = _rng(seed)
    out = []
    for n, r in zip(desc.block_dims, rv):
        q, _ = np.linalg.qr(_gauss(rng, (n, n)))
        qr = q[:, :r]
        out.append(qr @ qr.conj().T)
    return ProjectionElement(desc, out, rv, check=False)


def random_rank_vector(desc: AlgebraDescriptor, seed=None, nonzero=True) -> tuple:
    rng = _rng(seed)
    while True:
        rv = tuple(int(rng.integers(0, n + 1)) for n in desc.block_dims)
        if not nonzero or any(rv):
            return rv


def commutator(x: AlgebraElement, y: AlgebraElement) -> AlgebraElement:
    return x @ y - y @ x


def _range_basis(p: AlgebraElement, k: int, tol=1e-8):
    w, v = np.linalg.eigh((p.blocks[k] + p.blocks[k].conj().T) / 2)
    return v[:, w > 0.5] if w.size else v


def corner_basis(left: AlgebraElement, right: AlgebraElement):
    """Orthonormal (Frobenius) basis of the corner left*M*right for projections left, right."""
    out = []
    desc = left.desc
    for k, n in enumerate(desc.block_dims):
        ul, ur = _range_basis(left, k), _range_basis(right, k)
        for i in range(ul.shape[1]):
            for j in range(ur.shape[1]):
                blocks = [np.zeros((m, m), complex) for m in desc.block_dims]
                blocks[k] = np.outer(ul[:, i], ur[:, j].conj())
                out.append(AlgebraElement(desc, blocks))
    return out


def corner_dim(left: AlgebraElement, right: AlgebraElement) -> int:
    return sum(
        int(round(np.trace(a).real)) * int(round(np.trace(b).real))
        for a, b in zip(left.blocks, right.blocks)
    )
