"""Partial transpose, negativities, concurrence and Uhlmann fidelity."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .hilbert import TOL_PSD, DensityMatrix, PureState, register_from_dim

NEG_ZERO = 1e-12
# eigenvalues below this fraction of the largest are treated as round-off
RANK_CUTOFF = 1e-14


@dataclass(frozen=True)
class Bipartition:
    """Subsystem A as 1-based emitter indices; the complement is implied."""

    subsystem: frozenset
    n: int

    def __post_init__(self):
        a = frozenset(int(i) for i in self.subsystem)
        if not a or len(a) >= self.n or min(a) < 1 or max(a) > self.n:
            raise ValueError(f"{sorted(a)} is not a non-empty proper subset of [1, {self.n}]")
        object.__setattr__(self, "subsystem", a)

    @classmethod
    def of(cls, n: int, *emitters: int) -> "Bipartition":
        return cls(frozenset(emitters), n)

    def complement(self) -> "Bipartition":
        return Bipartition(frozenset(range(1, self.n + 1)) - self.subsystem, self.n)


def _matrix(rho) -> np.ndarray:
    if isinstance(rho, PureState):
        return np.outer(rho.amplitudes, rho.amplitudes.conj())
    if isinstance(rho, DensityMatrix):
        return rho.entries
    return np.asarray(rho, dtype=complex)


def partial_transpose(rho, part: Bipartition) -> np.ndarray:
    m = _matrix(rho)
    n = register_from_dim(m.shape[0]).n
    if part.n != n:
        raise ValueError(f"bipartition is for n={part.n}, state has n={n}")
    t = m.reshape((2,) * (2 * n))
    # emitter i is bit i-1; C-order axis 0 is the most significant bit
    axes = list(range(2 * n))
    for i in part.subsystem:
        r, c = n - i, 2 * n - i
        axes[r], axes[c] = axes[c], axes[r]
    return t.transpose(axes).reshape(m.shape)


def negativity(rho, part: Bipartition) -> float:
    """Trace norm of the partial transpose minus 1 (= 2 * sum |negative eigenvalues|)."""
    pt = partial_transpose(rho, part)
    ev = np.linalg.eigvalsh((pt + pt.conj().T) / 2)
    val = 2.0 * float(-ev[ev < 0].sum())
    return 0.0 if val < NEG_ZERO else val


def single_cut_negativities(rho) -> np.ndarray:
    m = _matrix(rho)
    n = register_from_dim(m.shape[0]).n
    return np.array([negativity(m, Bipartition.of(n, k)) for k in range(1, n + 1)])


def multipartite_negativity(rho) -> float:
    """Geometric mean of the n one-emitter-versus-rest negativities."""
    m = _matrix(rho)
    n = register_from_dim(m.shape[0]).n
    if n < 2:
        raise ValueError("multipartite negativity needs n >= 2")
    factors = single_cut_negativities(m)
    if np.any(factors <= NEG_ZERO):
        return 0.0
    return float(np.exp(np.mean(np.log(factors))))


def half_partition(n: int) -> Bipartition:
    return Bipartition(frozenset(range(1, math.ceil(n / 2) + 1)), n)


def half_negativity(rho) -> float:
    m = _matrix(rho)
    n = register_from_dim(m.shape[0]).n
    return negativity(m, half_partition(n))


_SYSY = np.kron(np.array([[0, -1j], [1j, 0]]), np.array([[0, -1j], [1j, 0]]))


def concurrence(rho) -> float:
    """Wootters concurrence max(0, l1 - l2 - l3 - l4).

    The l_i (square roots of the eigenvalues of rho * flip(rho)) are the
    singular values of X^+ S X* for rho = X X^+ and S = sigma_y (x) sigma_y.
    """
    m = _matrix(rho)
    if m.shape != (4, 4):
        raise ValueError("concurrence is defined for two emitters only")
    x = psd_factor(m)
    if x.shape[1] == 0:
        return 0.0
    lam = np.linalg.svd(x.conj().T @ _SYSY @ x.conj(), compute_uv=False)
    return float(max(0.0, lam[0] - lam[1:].sum()))


def psd_factor(m: np.ndarray, tol: float = TOL_PSD, cutoff: float = RANK_CUTOFF) -> np.ndarray:
    """X with X X^+ = m, keeping eigenvalues above ``cutoff * max(1, lambda_max)``."""
    h = (m + m.conj().T) / 2
    w, v = np.linalg.eigh(h)
    if w.min() < -tol:
        raise ValueError(f"matrix is not positive semidefinite (eigenvalue {w.min():.3g})")
    keep = w > cutoff * max(1.0, w.max())
    return v[:, keep] * np.sqrt(w[keep])


def psd_sqrt(m: np.ndarray, tol: float = TOL_PSD) -> np.ndarray:
    """Hermitian square root with eigenvalues in [-tol, 0) clipped to 0."""
    h = (m + m.conj().T) / 2
    w, v = np.linalg.eigh(h)
    if w.min() < -tol:
        raise ValueError(f"matrix is not positive semidefinite (eigenvalue {w.min():.3g})")
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.conj().T


def fidelity(rho1, rho2) -> float:
    """Uhlmann fidelity Tr sqrt(sqrt(rho1) rho2 sqrt(rho1)) (not squared).

    Evaluated as the trace norm of X1^+ X2 for factors rho = X X^+, which
    avoids square roots of round-off eigenvalues.
    """
    a, b = _matrix(rho1), _matrix(rho2)
    if a.shape != b.shape:
        raise ValueError("states live on different registers")
    x1, x2 = psd_factor(a), psd_factor(b)
    if x1.shape[1] == 0 or x2.shape[1] == 0:
        return 0.0
    return float(np.linalg.svd(x1.conj().T @ x2, compute_uv=False).sum())


# --------------------------------------------------------------------------
# single-excitation fast path
# --------------------------------------------------------------------------

def sector_partial_transpose(block, part: Bipartition) -> np.ndarray:
    """Partial transpose of a sector state, in its own small support.

    ``block`` is the (n+1)x(n+1) matrix on (vacuum, |1>, ..., |n>).  The
    transpose on A maps |0><i| (i in A) to |i><0| and |i><j| (i in A, j not
    in A) to |0><ij|, so the result lives on vacuum, the n single
    excitations and the |A|*(n-|A|) pairs |ij>, in that order.
    """
    m = np.asarray(block, dtype=complex)
    n = part.n
    if m.shape != (n + 1, n + 1):
        raise ValueError(f"expected a {(n + 1, n + 1)} sector block, got {m.shape}")
    A = part.subsystem
    B = [j for j in range(1, n + 1) if j not in A]
    pair = {(i, j): n + 1 + k for k, (i, j) in enumerate((i, j) for i in sorted(A) for j in B)}
    P = np.zeros((n + 1 + len(pair),) * 2, dtype=complex)
    P[0, 0] = m[0, 0]
    for j in range(1, n + 1):
        if j in A:
            P[j, 0] += m[0, j]
            P[0, j] += m[j, 0]
        else:
            P[0, j] += m[0, j]
            P[j, 0] += m[j, 0]
    for i in range(1, n + 1):
        for j in range(1, n + 1):
            z = m[i, j]
            if i in A and j in A:
                P[j, i] += z
            elif i not in A and j not in A:
                P[i, j] += z
            elif i in A:
                P[0, pair[i, j]] += z
            else:
                P[pair[j, i], 0] += z
    return P


def sector_negativity(block, part: Bipartition) -> float:
    pt = sector_partial_transpose(block, part)
    ev = np.linalg.eigvalsh((pt + pt.conj().T) / 2)
    val = 2.0 * float(-ev[ev < 0].sum())
    return 0.0 if val < NEG_ZERO else val


def sector_multipartite_negativity(block) -> float:
    n = np.asarray(block).shape[0] - 1
    if n < 2:
        raise ValueError("multipartite negativity needs n >= 2")
    factors = np.array([sector_negativity(block, Bipartition.of(n, k)) for k in range(1, n + 1)])
    if np.any(factors <= NEG_ZERO):
        return 0.0
    return float(np.exp(np.mean(np.log(factors))))


def sector_half_negativity(block) -> float:
    n = np.asarray(block).shape[0] - 1
    return sector_negativity(block, half_partition(n))
