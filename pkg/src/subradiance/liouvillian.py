"""Hamiltonian and vectorized Liouvillian of the emitter network.

With column-stacked flattening, ``pre(A) = I (x) A`` and ``post(B) = B^T (x) I``
so that ``pre(A) vec(rho) = vec(A rho)`` and ``post(B) vec(rho) = vec(rho B)``.
The generator is

    L = i [post(H) - pre(H)] + sum_k rate_k [pre(A_k) post(B_k^+)
                                             - pre(B_k^+ A_k)/2 - post(B_k^+ A_k)/2]

with (A_k, B_k) = (O_nu, O_nu) in the collective form and (sigma_i, sigma_j)
weighted by gamma_ij in the per-pair form.  hbar = 1.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np
import scipy.sparse as sp

from .couplings import CouplingSet, decompose
from .hilbert import TOL_PSD, Register, flatten, unflatten

DENSE_MAX_N = 6
SPECTRUM_MAX_N = 5
EIGVEC_MAX_N = 3

Form = Literal["collective", "per-pair"]
Representation = Literal["dense", "sparse", "matrix-free"]
Space = Literal["full", "sector"]


def lowering_operators(n: int, space: Space = "full") -> list[sp.csr_matrix]:
    """sigma_i for i = 1..n as sparse matrices."""
    ops = []
    if space == "sector":
        for i in range(1, n + 1):
            ops.append(sp.csr_matrix(([1.0], ([0], [i])), shape=(n + 1, n + 1), dtype=complex))
        return ops
    d = 2 ** n
    states = np.arange(d)
    for i in range(1, n + 1):
        bit = 1 << (i - 1)
        cols = states[(states & bit) != 0]
        ops.append(sp.csr_matrix((np.ones(cols.size), (cols - bit, cols)), shape=(d, d), dtype=complex))
    return ops


def _hamiltonian_sparse(c: CouplingSet, space: Space = "full") -> sp.csr_matrix:
    sig = lowering_operators(c.n, space)
    d = sig[0].shape[0]
    H = sp.csr_matrix((d, d), dtype=complex)
    for i in range(c.n):
        H = H + c.omega0 * (sig[i].T @ sig[i])
        for j in range(c.n):
            if i != j and c.g[i, j] != 0.0:
                H = H + c.g[i, j] * (sig[i].T @ sig[j])
    return H.tocsr()


def hamiltonian(c: CouplingSet, space: Space = "full") -> np.ndarray:
    if space == "full":
        c.register.require_full()
    return _hamiltonian_sparse(c, space).toarray()


def pre(A):
    """Superoperator of left multiplication, ``I (x) A``."""
    d = A.shape[0]
    if A.shape != (d, d):
        raise ValueError(f"pre expects a square matrix, got {A.shape}")
    if sp.issparse(A):
        return sp.kron(sp.identity(d, dtype=complex, format="csr"), A, format="csr")
    return np.kron(np.eye(d), np.asarray(A))


def post(B):
    """Superoperator of right multiplication, ``B^T (x) I``."""
    d = B.shape[0]
    if B.shape != (d, d):
        raise ValueError(f"post expects a square matrix, got {B.shape}")
    if sp.issparse(B):
        return sp.kron(B.T, sp.identity(d, dtype=complex, format="csr"), format="csr")
    return np.kron(np.asarray(B).T, np.eye(d))


def _dissipator_terms(c: CouplingSet, form: Form, space: Space):
    """(rate, A, B) triples; each contributes rate*(A rho B^+ - {B^+ A, rho}/2)."""
    sig = lowering_operators(c.n, space)
    if form == "per-pair":
        return [(c.gamma[i, j], sig[i], sig[j])
                for i in range(c.n) for j in range(c.n) if c.gamma[i, j] != 0.0]
    if form != "collective":
        raise ValueError(f"unknown Liouvillian form {form!r}")
    dec = decompose(c)
    terms = []
    for nu, rate in enumerate(dec.rates):
        if rate <= TOL_PSD:
            continue
        O = sum(dec.vectors[i, nu] * sig[i] for i in range(c.n))
        terms.append((rate, O.tocsr(), O.tocsr()))
    return terms


@dataclass(frozen=True, eq=False)
class Superoperator:
    """Liouvillian on a full 2**n space or on the single-excitation sector.

    ``matrix`` is an ndarray (dense), a CSR matrix (sparse) or None
    (matrix-free, which applies H and the dissipator terms to unflattened
    operators).
    """

    register: Register
    representation: Representation
    space: Space
    omega0: float
    matrix: object
    H: sp.csr_matrix
    terms: tuple

    @property
    def hilbert_dim(self) -> int:
        return self.H.shape[0]

    @property
    def dim(self) -> int:
        return self.hilbert_dim ** 2

    @property
    def shape(self):
        return (self.dim, self.dim)

    def apply(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=complex)
        if v.shape[0] != self.dim:
            raise ValueError(f"vector of length {v.shape[0]} does not match superoperator dim {self.dim}")
        if self.matrix is not None:
            return self.matrix @ v
        if v.ndim == 2:
            return np.column_stack([self._apply_free(col) for col in v.T])
        return self._apply_free(v)

    __matmul__ = apply

    def _apply_free(self, v: np.ndarray) -> np.ndarray:
        rho = unflatten(v, qubits=False)
        H = self.H
        out = -1j * (H @ rho - (H.T @ rho.T).T)
        for rate, A, B in self.terms:
            Bd = B.conj().T
            BdA = Bd @ A
            out += rate * (A @ (Bd.T @ rho.T).T - 0.5 * (BdA @ rho) - 0.5 * (BdA.T @ rho.T).T)
        return flatten(np.asarray(out))

    def _apply_free_adjoint(self, v: np.ndarray) -> np.ndarray:
        X = unflatten(v, qubits=False)
        H = self.H
        out = 1j * (H @ X - (H.T @ X.T).T)
        for rate, A, B in self.terms:
            Ad = A.conj().T
            AdB = Ad @ B
            out += rate * (Ad @ (B.T @ X.T).T - 0.5 * (AdB @ X) - 0.5 * (AdB.T @ X.T).T)
        return flatten(np.asarray(out))

    def rapply(self, v) -> np.ndarray:
        """Action of the Hilbert-Schmidt adjoint L^+."""
        v = np.asarray(v, dtype=complex)
        if self.matrix is not None:
            return self.matrix.conj().T @ v
        return self._apply_free_adjoint(v)

    def to_dense(self) -> np.ndarray:
        if self.representation == "dense":
            return self.matrix
        if self.representation == "sparse":
            return self.matrix.toarray()
        return _assemble(self.H, self.terms).toarray()

    def to_sparse(self) -> sp.csr_matrix:
        if self.representation == "sparse":
            return self.matrix
        if self.representation == "dense":
            return sp.csr_matrix(self.matrix)
        return _assemble(self.H, self.terms)

    def one_norm_bound(self) -> float:
        """Cheap upper bound on ||L||_1 from the operator norms of its pieces."""
        def nrm(M):
            return float(abs(M).sum(axis=0).max()) if M.shape[0] else 0.0
        bound = 2.0 * nrm(self.H)
        for rate, A, B in self.terms:
            bound += rate * (nrm(A) * nrm(B) + nrm(B.conj().T @ A))
        return bound


def _assemble(H: sp.csr_matrix, terms) -> sp.csr_matrix:
    L = 1j * (post(H) - pre(H))
    for rate, A, B in terms:
        Bd = B.conj().T.tocsr()
        BdA = (Bd @ A).tocsr()
        L = L + rate * (pre(A) @ post(Bd) - 0.5 * pre(BdA) - 0.5 * post(BdA))
    L = sp.coo_matrix(L)
    L.sum_duplicates()  # canonical row-major, duplicate-free triplets
    L.eliminate_zeros()
    return L.tocsr()


def build_liouvillian(c: CouplingSet, form: Form = "collective",
                      representation: Representation = "sparse",
                      space: Space = "full") -> Superoperator:
    if space == "full":
        c.register.require_full()
        if representation == "dense" and c.n > DENSE_MAX_N:
            raise MemoryError(f"dense Liouvillian refused for n={c.n} > {DENSE_MAX_N}")
    elif space != "sector":
        raise ValueError(f"unknown space {space!r}")
    H = _hamiltonian_sparse(c, space)
    terms = tuple(_dissipator_terms(c, form, space))
    if representation == "matrix-free":
        matrix = None
    elif representation in ("sparse", "dense"):
        matrix = _assemble(H, terms)
        if representation == "dense":
            matrix = matrix.toarray()
    else:
        raise ValueError(f"unknown representation {representation!r}")
    return Superoperator(c.register, representation, space, c.omega0, matrix, H, terms)


def apply(L: Superoperator, v) -> np.ndarray:
    return L.apply(v)


@dataclass(frozen=True, eq=False)
class SpectrumReport:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray | None = None


SORT_TOL = 1e-9


def _spectral_order(ev: np.ndarray, tol: float = SORT_TOL) -> np.ndarray:
    """Indices sorting by Re descending, then Im ascending.

    Real parts within ``tol`` (relative to the spectral radius) of each
    other are treated as equal so that round-off does not decide ties.
    """
    scale = tol * max(1.0, float(np.abs(ev).max(initial=0.0)))
    re = np.round(ev.real / scale) * scale
    return np.lexsort((ev.imag, -re))


def sort_eigenvalues(ev) -> np.ndarray:
    ev = np.asarray(ev, dtype=complex)
    return ev[_spectral_order(ev)]


def spectrum(L: Superoperator, vectors: bool = False) -> SpectrumReport:
    """All eigenvalues of L, sorted by (Re descending, Im ascending).

    L is non-normal, so a general complex eigensolver is used and returned
    eigenvectors are not orthogonalized.
    """
    max_n = EIGVEC_MAX_N if vectors else SPECTRUM_MAX_N
    if L.dim > 4 ** max_n:
        raise MemoryError(f"spectrum of a {L.dim}-dimensional superoperator exceeds the size guard")
    M = L.to_dense()
    if vectors:
        ev, vec = np.linalg.eig(M)
        order = _spectral_order(ev)
        return SpectrumReport(ev[order], vec[:, order])
    return SpectrumReport(sort_eigenvalues(np.linalg.eigvals(M)))
