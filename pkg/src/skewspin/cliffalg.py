"""Flat Clifford-algebra layer: gamma matrices, chirality, exterior forms, Hodge star.

Everything downstream works in a fixed orthonormal-frame gauge and the gauge
conventions live here:

* Clifford relation ``e_i e_j + e_j e_i = -2 delta_ij``; generators are
  skew-Hermitian, so vectors act skew-adjointly on spinors.
* The Hermitian product is linear in the *first* slot, antilinear in the
  second (``herm(a, b) = sum_k a_k conj(b_k)``).
* The frame ``e_1, ..., e_n`` is declared positively oriented.  In dimension
  4 the complex volume element is ``vol_c = i^2 g1 g2 g3 g4`` and the
  chirality projectors are ``P± = (1 ± vol_c)/2``.
* Concrete gauge (dimension 4): ``g1 = i s1 x s3``, ``g2 = i s2 x s3``,
  ``g3 = 1 x i s1``, ``g4 = 1 x i s2`` with Pauli matrices ``s1, s2, s3``.
  This makes ``vol_c = s3 x s3`` diagonal and is compatible with the
  product splittings used by the constructors: the induced 2-dimensional
  representation is ``(i s1, i s2)`` and the 3-dimensional one is
  ``(i s1, i s2, -i s3)`` acting on the positive chirality block.

Spinor component arrays are meaningful only in this gauge; there is no
coordinate-level spinor I/O anywhere in the package.

Exterior forms are stored by orthonormal-frame components over strictly
increasing multi-indices (0-based internally).  All operations are pure
functions on immutable values.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

_S1 = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
_S2 = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
_S3 = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
_ID2 = np.eye(2, dtype=complex)


class DegenerateSpinorError(ValueError):
    """Raised when an operation requires a nonzero (chirality-pure) spinor."""


def herm(a, b):
    """Hermitian product, linear in the first slot: sum_k a_k conj(b_k)."""
    return np.sum(np.asarray(a) * np.conj(np.asarray(b)), axis=-1)


def _perm_sign(seq):
    """Sign of the permutation given by ``seq`` (a tuple of distinct ints)."""
    sign = 1
    seq = list(seq)
    for i in range(len(seq)):
        for j in range(i + 1, len(seq)):
            if seq[i] > seq[j]:
                sign = -sign
    return sign


class GammaRep:
    """Skew-Hermitian gamma-matrix representation of Cl(n), n in {2, 3, 4}.

    Attributes
    ----------
    dim : spatial dimension n.
    nspin : rank of the spinor space (2 for n in {2, 3}, 4 for n = 4).
    gamma : list of n complex (nspin, nspin) generators.
    volume_c : complex volume element (even n only).
    p_plus, p_minus : chirality projectors (even n only).
    """

    def __init__(self, dim=4):
        if dim == 2:
            gamma = [1j * _S1, 1j * _S2]
        elif dim == 3:
            gamma = [1j * _S1, 1j * _S2, -1j * _S3]
        elif dim == 4:
            gamma = [
                np.kron(1j * _S1, _S3),
                np.kron(1j * _S2, _S3),
                np.kron(_ID2, 1j * _S1),
                np.kron(_ID2, 1j * _S2),
            ]
        else:
            raise ValueError(f"unsupported dimension {dim}")
        self.dim = dim
        self.gamma = [np.ascontiguousarray(g) for g in gamma]
        self.nspin = self.gamma[0].shape[0]
        if dim % 2 == 0:
            m = dim // 2
            vol = (1j) ** m * np.eye(self.nspin, dtype=complex)
            for g in self.gamma:
                vol = vol @ g
            self.volume_c = vol
            eye = np.eye(self.nspin, dtype=complex)
            self.p_plus = 0.5 * (eye + vol)
            self.p_minus = 0.5 * (eye - vol)
        else:
            self.volume_c = None
            self.p_plus = None
            self.p_minus = None
        # Clifford products g_I for increasing multi-indices, used by form actions.
        self._gamma_prod = {(): np.eye(self.nspin, dtype=complex)}
        for p in range(1, dim + 1):
            for idx in itertools.combinations(range(dim), p):
                mat = self._gamma_prod[idx[:-1]] @ self.gamma[idx[-1]]
                self._gamma_prod[idx] = mat
        self.gamma_pairs = np.stack(
            [np.stack([gi @ gj for gj in self.gamma]) for gi in self.gamma])

    def vector_matrix(self, v):
        """Matrix of Clifford multiplication by the frame vector(s) ``v``.

        ``v`` may carry leading batch dimensions; result has shape
        ``(..., nspin, nspin)``.
        """
        v = np.asarray(v)
        gam = np.stack(self.gamma)  # (dim, N, N)
        return np.einsum("...i,iab->...ab", v.astype(complex), gam)

    def vector_clifford(self, v, psi):
        """Clifford action v . psi of a frame vector on a spinor (batched)."""
        return np.einsum("...ab,...b->...a", self.vector_matrix(v), np.asarray(psi, dtype=complex))

    def split(self, psi):
        """Chirality split psi = psi_plus + psi_minus (even dimension only)."""
        psi = np.asarray(psi, dtype=complex)
        return psi @ self.p_plus.T, psi @ self.p_minus.T

    def bar(self, psi):
        """psi_bar = psi_plus - psi_minus = vol_c . psi."""
        return np.asarray(psi, dtype=complex) @ self.volume_c.T


REP2 = GammaRep(2)
REP3 = GammaRep(3)
REP4 = GammaRep(4)


@lru_cache(maxsize=None)
def _multi_indices(dim, degree):
    return tuple(itertools.combinations(range(dim), degree))


@lru_cache(maxsize=None)
def _index_pos(dim, degree):
    return {idx: k for k, idx in enumerate(_multi_indices(dim, degree))}


@dataclass(frozen=True)
class ExtForm:
    """Real exterior form in orthonormal-frame components (dimension 4).

    ``coeffs[k]`` is the component on the k-th strictly increasing
    multi-index of ``{0, 1, 2, 3}`` in lexicographic order.
    """

    degree: int
    coeffs: np.ndarray

    def __post_init__(self):
        n = len(_multi_indices(4, self.degree))
        c = np.asarray(self.coeffs, dtype=float)
        if c.shape != (n,):
            raise ValueError(f"degree-{self.degree} form needs {n} coefficients, got {c.shape}")
        object.__setattr__(self, "coeffs", c)

    # -- constructors ------------------------------------------------------
    @staticmethod
    def zero(degree):
        return ExtForm(degree, np.zeros(len(_multi_indices(4, degree))))

    @staticmethod
    def scalar(value):
        return ExtForm(0, np.array([float(value)]))

    @staticmethod
    def basis(indices):
        """Elementary form e_{i1} ^ ... ^ e_{ip} for strictly increasing indices."""
        indices = tuple(indices)
        p = len(indices)
        c = np.zeros(len(_multi_indices(4, p)))
        c[_index_pos(4, p)[indices]] = 1.0
        return ExtForm(p, c)

    @staticmethod
    def from_vector(v):
        return ExtForm(1, np.asarray(v, dtype=float).copy())

    @staticmethod
    def from_skew(a):
        """Two-form (X, Y) -> <AX, Y> associated with a skew matrix A."""
        a = np.asarray(a)
        idx = _multi_indices(4, 2)
        # omega(e_i, e_j) = <A e_i, e_j> = A[j, i]
        return ExtForm(2, np.array([a[j, i] for (i, j) in idx]))

    # -- basic algebra ------------------------------------------------------
    def __add__(self, other):
        if self.degree != other.degree:
            raise ValueError("degree mismatch")
        return ExtForm(self.degree, self.coeffs + other.coeffs)

    def __sub__(self, other):
        if self.degree != other.degree:
            raise ValueError("degree mismatch")
        return ExtForm(self.degree, self.coeffs - other.coeffs)

    def __mul__(self, scal):
        return ExtForm(self.degree, self.coeffs * float(scal))

    __rmul__ = __mul__

    def __neg__(self):
        return ExtForm(self.degree, -self.coeffs)

    def inner(self, other):
        if self.degree != other.degree:
            raise ValueError("degree mismatch")
        return float(np.dot(self.coeffs, other.coeffs))

    def norm(self):
        return float(np.linalg.norm(self.coeffs))

    def to_skew(self):
        """Skew matrix A with <A e_i, e_j> = omega(e_i, e_j) (degree 2 only)."""
        if self.degree != 2:
            raise ValueError("to_skew needs a 2-form")
        a = np.zeros((4, 4))
        for k, (i, j) in enumerate(_multi_indices(4, 2)):
            a[j, i] = self.coeffs[k]
            a[i, j] = -self.coeffs[k]
        return a

    def wedge(self, other):
        p, q = self.degree, other.degree
        if p + q > 4:
            return ExtForm.zero(0) if p + q > 4 else None
        out = np.zeros(len(_multi_indices(4, p + q)))
        pos = _index_pos(4, p + q)
        for k, I in enumerate(_multi_indices(4, p)):
            ci = self.coeffs[k]
            if ci == 0.0:
                continue
            for l, J in enumerate(_multi_indices(4, q)):
                cj = other.coeffs[l]
                if cj == 0.0 or set(I) & set(J):
                    continue
                merged = I + J
                sign = _perm_sign(merged)
                out[pos[tuple(sorted(merged))]] += sign * ci * cj
        return ExtForm(p + q, out)

    def interior(self, v):
        """Interior product v -| omega with a frame vector v."""
        v = np.asarray(v, dtype=float)
        p = self.degree
        if p == 0:
            raise ValueError("cannot contract a 0-form")
        out = np.zeros(len(_multi_indices(4, p - 1)))
        pos = _index_pos(4, p - 1)
        for k, I in enumerate(_multi_indices(4, p)):
            ci = self.coeffs[k]
            if ci == 0.0:
                continue
            for slot, i in enumerate(I):
                rest = I[:slot] + I[slot + 1:]
                out[pos[rest]] += ((-1) ** slot) * v[i] * ci
        return ExtForm(p - 1, out)


def wedge(a, b):
    return a.wedge(b)


def hodge_star(omega):
    """Hodge dual in the orientation e1 ^ e2 ^ e3 ^ e4 of the frame."""
    p = omega.degree
    out = np.zeros(len(_multi_indices(4, 4 - p)))
    pos = _index_pos(4, 4 - p)
    for k, I in enumerate(_multi_indices(4, p)):
        c = omega.coeffs[k]
        if c == 0.0:
            continue
        J = tuple(i for i in range(4) if i not in I)
        out[pos[J]] += _perm_sign(I + J) * c
    return ExtForm(4 - p, out)


def sd_asd_split(omega):
    """Split a 2-form into self-dual and anti-self-dual parts."""
    if omega.degree != 2:
        raise ValueError("sd_asd_split needs a 2-form")
    star = hodge_star(omega)
    return 0.5 * (omega + star), 0.5 * (omega - star)


def form_matrix(omega, rep=REP4):
    """Matrix of the Clifford action of an exterior form in the gamma gauge."""
    mat = np.zeros((rep.nspin, rep.nspin), dtype=complex)
    for k, I in enumerate(_multi_indices(4, omega.degree)):
        c = omega.coeffs[k]
        if c != 0.0:
            mat += c * rep._gamma_prod[I]
    return mat


def form_clifford(omega, psi, rep=REP4):
    """Clifford action omega . psi, expanding over increasing multi-indices."""
    return np.einsum("ab,...b->...a", form_matrix(omega, rep), np.asarray(psi, dtype=complex))


def vector_clifford(v, psi, rep=REP4):
    """Clifford action of a frame vector; swaps chirality in even dimensions."""
    return rep.vector_clifford(v, psi)


def form_action_chirality_check(omega, psi, rep=REP4):
    """Residual of the duality rule omega . psi = s * (star omega) . psi_bar.

    The sign is s = +1 for degrees 1, 2 and s = -1 for degrees 3, 4.
    """
    if omega.degree not in (1, 2, 3, 4):
        raise ValueError("degree must be 1..4")
    s = 1.0 if omega.degree in (1, 2) else -1.0
    lhs = form_clifford(omega, psi, rep)
    rhs = s * form_clifford(hodge_star(omega), rep.bar(psi), rep)
    return float(np.max(np.linalg.norm(lhs - rhs, axis=-1)))


def _real_stack(mat):
    """Complex (m, k) matrix as a real (2m, k) matrix."""
    return np.concatenate([mat.real, mat.imag], axis=0)


def solve_xi(psi_minus, psi_plus, rep=REP4):
    """Solve (sum_i xi_i g_i) psi_minus = psi_plus for the real vector xi.

    Uses the real 4x4 linear system given by X -> X . psi_minus, which is
    bijective onto the positive chirality space whenever psi_minus != 0.
    """
    psi_minus = np.asarray(psi_minus, dtype=complex)
    psi_plus = np.asarray(psi_plus, dtype=complex)
    if np.linalg.norm(psi_minus) < 1e-13:
        raise DegenerateSpinorError("psi_minus vanishes; xi is undefined")
    cols = np.stack([g @ psi_minus for g in rep.gamma], axis=1)  # (nspin, dim)
    m = _real_stack(cols)
    rhs = _real_stack(psi_plus[:, None])[:, 0]
    xi, *_ = np.linalg.lstsq(m, rhs, rcond=None)
    return xi


def solve_J(psi_minus, rep=REP4):
    """Endomorphism J with J(e_i) . psi_minus = i e_i . psi_minus, columnwise.

    The result is an orthogonal complex structure (J^2 = -Id, J^T = -J);
    it only depends on the complex line spanned by psi_minus.
    """
    psi_minus = np.asarray(psi_minus, dtype=complex)
    if np.linalg.norm(psi_minus) < 1e-13:
        raise DegenerateSpinorError("psi_minus vanishes; J is undefined")
    cols = np.stack([g @ psi_minus for g in rep.gamma], axis=1)
    m = _real_stack(cols)
    rhs = _real_stack(1j * cols)
    sol, *_ = np.linalg.lstsq(m, rhs, rcond=None)
    return sol  # columns are J(e_i)


# Gauge intertwiner for the orientation flip: conjugation by T_FLIP swaps the
# third and fourth generators while fixing the first two, and anticommutes
# with vol_c.  T_FLIP is unitary with T_FLIP^2 = Id.
_g = REP4.gamma
T_FLIP = ((_g[2] - _g[3]) / np.sqrt(2.0)) @ (_g[0] @ _g[1] @ _g[2] @ _g[3])
del _g
