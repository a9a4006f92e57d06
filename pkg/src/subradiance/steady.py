"""Analytic long-time states of the all-to-all network.

The Liouvillian of the uniformly coupled network (gamma_ij = 1) has, inside
the single-excitation sector, a zero-eigenvalue subspace spanned by the
operators (|1>-|i>)(<1|-<j|)/2 for i, j in 2..n, and two purely imaginary
subspaces spanned by (|i>-|1>)<0|/sqrt(2) (eigenvalue -i w0) and their
adjoints (+i w0).  Projecting the flattened initial state onto the
orthonormalized bases and completing the trace with the vacuum gives the
state at long times.

Basis vectors are stored as flattened (n+1)x(n+1) sector matrices in the
ordering (vacuum, |1>, ..., |n>); ``embed_full`` maps them to 4**n vectors.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .couplings import DEFAULT_OMEGA0
from .hilbert import (DensityMatrix, PureState, Register, as_register, embed_sector,
                      flatten, unflatten, w_state)

RANK_TOL = 1e-9
ANTI_HERM_TOL = 1e-10
CLASSIFY_TOL = 1e-9


class LinearDependenceError(np.linalg.LinAlgError):
    pass


def gram_schmidt(vectors, rank_tol: float = RANK_TOL, reorthogonalize: bool = True) -> list:
    """Classical Gram-Schmidt in the given order, each output normalized.

    ``u_k = v_k - sum_j <u_j, v_k> u_j`` over the already accepted u_j.  The
    optional second pass repeats the same projection on the residual, which
    leaves the exact-arithmetic result unchanged and restores orthogonality
    lost to round-off.
    """
    out: list[np.ndarray] = []
    for k, v in enumerate(vectors):
        v = np.asarray(v, dtype=complex).reshape(-1)
        u = v.copy()
        if out:
            Q = np.array(out)
            u = u - Q.T @ (Q.conj() @ v)
            if reorthogonalize:
                u = u - Q.T @ (Q.conj() @ u)
        nrm = np.linalg.norm(u)
        if nrm < rank_tol * max(1.0, np.linalg.norm(v)):
            raise LinearDependenceError(f"vector {k} is linearly dependent on its predecessors")
        out.append(u / nrm)
    return out


def _ket(n: int, i: int) -> np.ndarray:
    e = np.zeros(n + 1, dtype=complex)
    e[i] = 1.0
    return e


def _check_n(reg) -> Register:
    reg = as_register(reg)
    if reg.n < 2:
        raise ValueError("the steady basis needs n >= 2")
    return reg


def _zero_sector(n: int) -> list[np.ndarray]:
    one = _ket(n, 1)
    mats = [0.5 * np.outer(one - _ket(n, i), one - _ket(n, i)) for i in range(2, n + 1)]
    for i in range(2, n + 1):
        for j in range(2, n + 1):
            if i != j:
                mats.append(0.5 * np.outer(one - _ket(n, i), one - _ket(n, j)))
    return mats


def _osc_sector(n: int) -> tuple[list, list]:
    vac, one = _ket(n, 0), _ket(n, 1)
    minus = [np.outer(_ket(n, i) - one, vac) / np.sqrt(2) for i in range(2, n + 1)]
    plus = [np.outer(vac, _ket(n, i) - one) / np.sqrt(2) for i in range(2, n + 1)]
    return minus, plus


def _to_space(mats, n: int, space: str):
    if space == "sector":
        return mats
    if space != "full":
        raise ValueError(f"unknown space {space!r}")
    Register(n).require_full()
    return [embed_sector(m, n) for m in mats]


def zero_eigenbasis(reg, space: str = "full") -> list[np.ndarray]:
    """The (n-1)**2 zero-eigenvalue operators a_k: projectors first, then cross terms."""
    reg = _check_n(reg)
    return _to_space(_zero_sector(reg.n), reg.n, space)


def oscillatory_eigenbasis(reg, space: str = "full") -> list[tuple[np.ndarray, complex]]:
    """The 2(n-1) operators b_k with eigenvalue tags -i (ket-vacuum) and +i (vacuum-bra), in units of w0."""
    reg = _check_n(reg)
    minus, plus = _osc_sector(reg.n)
    mats = _to_space(minus + plus, reg.n, space)
    tags = [-1j] * len(minus) + [1j] * len(plus)
    return list(zip(mats, tags))


@dataclass(frozen=True, eq=False)
class SteadyBasis:
    register: Register
    A: np.ndarray        # ((n-1)**2, (n+1)**2), eigenvalue 0
    B_minus: np.ndarray  # (n-1, (n+1)**2), eigenvalue -i w0
    B_plus: np.ndarray   # (n-1, (n+1)**2), eigenvalue +i w0
    vacuum: np.ndarray   # ((n+1)**2,)

    @property
    def n(self) -> int:
        return self.register.n

    def embed_full(self, vectors) -> np.ndarray:
        """Flattened 4**n forms of sector-flattened vectors (rows)."""
        self.register.require_full()
        vectors = np.atleast_2d(vectors)
        return np.array([flatten(embed_sector(unflatten(v, qubits=False), self.n)) for v in vectors])

    def matrices(self, which: str) -> list[np.ndarray]:
        vecs = {"A": self.A, "B_minus": self.B_minus, "B_plus": self.B_plus}[which]
        return [embed_sector(unflatten(v, qubits=False), self.n) for v in vecs]

    def all_vectors(self) -> np.ndarray:
        return np.vstack([self.A, self.B_minus, self.B_plus, self.vacuum[None, :]])


def gram_schmidt_order(n: int) -> list[int]:
    """Input order for the zero set: a_2, ..., a_last, then a_1."""
    m = (n - 1) ** 2
    return list(range(1, m)) + [0]


@lru_cache(maxsize=32)
def _steady_basis(n: int) -> SteadyBasis:
    zero = _zero_sector(n)
    minus, plus = _osc_sector(n)
    A = gram_schmidt([flatten(zero[k]) for k in gram_schmidt_order(n)])
    Bm = gram_schmidt([flatten(b) for b in minus])
    Bp = gram_schmidt([flatten(b) for b in plus])
    vac = flatten(np.outer(_ket(n, 0), _ket(n, 0)))
    basis = SteadyBasis(Register(n), np.array(A), np.array(Bm), np.array(Bp), vac)
    for arr in (basis.A, basis.B_minus, basis.B_plus, basis.vacuum):
        arr.setflags(write=False)
    return basis


def steady_basis(reg) -> SteadyBasis:
    reg = _check_n(reg)
    return _steady_basis(reg.n)


def _sector_projector(psi0) -> np.ndarray:
    if isinstance(psi0, PureState):
        if not psi0.in_sector():
            raise ValueError("initial state has support outside the single-excitation sector")
        c = psi0.sector_coefficients()
        return np.outer(c, c.conj())
    raise TypeError("expected a PureState")


@dataclass(frozen=True, eq=False)
class FinalStatePrediction:
    """Long-time state as fixed projections plus phase-rotating coherences.

    ``at(t)`` evaluates the steady part damped by exp(-decay t), the
    vacuum-coherence parts with exp(-decay t / 2 -+ i w0 t) and the vacuum
    population that completes unit trace.  ``decay`` is 0 in the exact
    all-to-all case and 1 - alpha in the quasi case.
    """

    register: Register
    steady_part: np.ndarray   # sector matrix from the zero-eigenvalue projections
    coherence_minus: np.ndarray
    coherence_plus: np.ndarray
    omega0: float
    decay: float = 0.0

    def sector_matrix(self, t: float) -> np.ndarray:
        damp = np.exp(-self.decay * t)
        half = np.exp(-0.5 * self.decay * t)
        m = damp * self.steady_part
        m = m + half * np.exp(-1j * self.omega0 * t) * self.coherence_minus
        m = m + half * np.exp(1j * self.omega0 * t) * self.coherence_plus
        c0 = 1.0 - np.trace(m).real
        m[0, 0] += c0
        anti = np.abs(m - m.conj().T).max()
        if anti > ANTI_HERM_TOL:
            raise ArithmeticError(f"predicted state has anti-Hermitian residual {anti:.3g}")
        return (m + m.conj().T) / 2

    def at(self, t: float) -> DensityMatrix:
        self.register.require_full()
        return DensityMatrix(self.register, embed_sector(self.sector_matrix(t), self.register.n),
                             validate=False)


def prediction(reg, psi0: PureState, alpha: float = 1.0,
               omega0: float = DEFAULT_OMEGA0) -> FinalStatePrediction:
    reg = _check_n(reg)
    if psi0.register.n != reg.n:
        raise ValueError("register mismatch")
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha={alpha} outside [0, 1]")
    basis = steady_basis(reg)
    r0 = flatten(_sector_projector(psi0))

    def project(vecs):
        coeffs = vecs.conj() @ r0
        return unflatten(coeffs @ vecs, qubits=False)

    return FinalStatePrediction(
        register=reg,
        steady_part=project(basis.A),
        coherence_minus=project(basis.B_minus),
        coherence_plus=project(basis.B_plus),
        omega0=float(omega0),
        decay=1.0 - alpha,
    )


def predict_final(reg, psi0: PureState, t: float, omega0: float = DEFAULT_OMEGA0) -> DensityMatrix:
    return prediction(reg, psi0, 1.0, omega0).at(t)


def predict_quasi(reg, alpha: float, psi0: PureState, t: float,
                  omega0: float = DEFAULT_OMEGA0) -> DensityMatrix:
    return prediction(reg, psi0, alpha, omega0).at(t)


@dataclass(frozen=True)
class InitialClassification:
    steady: bool
    max_entangled: bool
    fidelity_initial_final: float
    w_overlap: float
    outside_weight: float


def classify_initial(reg, psi0: PureState, omega0: float = DEFAULT_OMEGA0) -> InitialClassification:
    """Steady iff the state is a single-excitation superposition orthogonal to W."""
    from .entanglement import fidelity

    reg = _check_n(reg)
    c = psi0.sector_coefficients()
    w_overlap = float(abs(np.vdot(w_state(reg).amplitudes, psi0.amplitudes)))
    outside = float(max(0.0, 1.0 - np.linalg.norm(c[1:]) ** 2))
    steady = w_overlap <= CLASSIFY_TOL and outside <= CLASSIFY_TOL
    equal = bool(np.all(np.abs(np.abs(c[1:]) - 1 / np.sqrt(reg.n)) <= CLASSIFY_TOL))
    if psi0.in_sector():
        pred = prediction(reg, psi0, 1.0, omega0).sector_matrix(0.0)
        fid = fidelity(np.outer(c, c.conj()), pred)
    else:
        fid = float("nan")
    return InitialClassification(steady, steady and equal, fid, w_overlap, outside)
