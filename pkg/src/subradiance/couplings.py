"""Coherent and incoherent coupling matrices of the emitter network.

All rates are in units of the single-emitter decay rate, so the diagonal of
the decoherence matrix is exactly 1 and time is measured in 1/gamma.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .hilbert import TOL_PSD, Register, as_register

TOL_COUPLING = 1e-10
DEGENERACY_TOL = 1e-9
DEFAULT_OMEGA0 = 10.0


class CouplingError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class CouplingSet:
    register: Register
    omega0: float
    gamma: np.ndarray
    g: np.ndarray

    def __post_init__(self):
        n = self.register.n
        gamma = np.asarray(self.gamma, dtype=float)
        g = np.asarray(self.g, dtype=float)
        for name, m in (("gamma", gamma), ("g", g)):
            if m.shape != (n, n):
                raise CouplingError(f"{name} has shape {m.shape}, expected {(n, n)}")
            if not np.all(np.isfinite(m)):
                raise CouplingError(f"{name} contains non-finite entries")
            if np.max(np.abs(m - m.T)) > TOL_COUPLING:
                raise CouplingError(f"{name} is not symmetric")
        if np.max(np.abs(np.diag(gamma) - 1.0)) > TOL_COUPLING:
            raise CouplingError("diagonal of gamma must be 1 (rates in units of gamma)")
        if np.max(np.abs(np.diag(g))) > TOL_COUPLING:
            raise CouplingError("diagonal of g must be 0")
        lam_min = np.linalg.eigvalsh(gamma).min()
        if lam_min < -TOL_PSD:
            raise CouplingError(f"gamma is not positive semidefinite (eigenvalue {lam_min:.3g})")
        if not np.isfinite(self.omega0):
            raise CouplingError("omega0 must be finite")
        object.__setattr__(self, "omega0", float(self.omega0))
        object.__setattr__(self, "gamma", (gamma + gamma.T) / 2)
        object.__setattr__(self, "g", (g + g.T) / 2)

    @property
    def n(self) -> int:
        return self.register.n


@dataclass(frozen=True, eq=False)
class JumpDecomposition:
    """Collective decay channels: ``gamma = V diag(rates) V^dagger``.

    Column ``nu`` of ``vectors`` holds the weights of the lowering operators
    in jump operator ``nu``.
    """

    rates: np.ndarray
    vectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.vectors * self.rates) @ self.vectors.conj().T


def all_to_all(reg, alpha: float, g_uniform: float = 0.0,
               omega0: float = DEFAULT_OMEGA0) -> CouplingSet:
    reg = as_register(reg)
    n = reg.n
    if n > 1 and not (-1.0 / (n - 1) - TOL_COUPLING <= alpha <= 1.0 + TOL_COUPLING):
        raise CouplingError(f"alpha={alpha} outside [-1/(n-1), 1]; gamma would not be PSD")
    off = 1.0 - np.eye(n)
    return CouplingSet(reg, omega0, np.eye(n) + alpha * off, g_uniform * off)


def _canonical_cluster(vecs: np.ndarray) -> np.ndarray:
    """Deterministic orthonormal basis of span(vecs).

    Unit vectors e_1, e_2, ... are projected onto the subspace and
    orthonormalized in ascending emitter order, so the result does not depend
    on which basis the eigensolver happened to return.
    """
    from .steady import gram_schmidt

    n, m = vecs.shape
    proj = vecs @ vecs.conj().T
    picked = []
    for i in range(n):
        cand = picked + [proj[:, i]]
        try:
            picked = gram_schmidt(cand)
        except np.linalg.LinAlgError:
            continue
        if len(picked) == m:
            break
    out = np.column_stack(picked)
    return out if np.iscomplexobj(vecs) else out.real


def decompose(c: CouplingSet) -> JumpDecomposition:
    gamma = c.gamma
    rates, vecs = np.linalg.eigh(gamma)
    if rates.min() < -TOL_PSD:
        raise CouplingError(f"unphysical decoherence matrix (eigenvalue {rates.min():.3g})")
    order = np.argsort(-rates, kind="stable")
    rates, vecs = rates[order], vecs[:, order]

    out = np.empty_like(vecs)
    start = 0
    while start < len(rates):
        stop = start + 1
        while stop < len(rates) and abs(rates[stop] - rates[start]) < DEGENERACY_TOL:
            stop += 1
        block = vecs[:, start:stop]
        if stop - start > 1:
            block = _canonical_cluster(block)
        # sign fix: first largest-magnitude component positive
        for k in range(block.shape[1]):
            col = block[:, k]
            mags = np.abs(col)
            j = np.flatnonzero(mags > mags.max() - 1e-12)[0]
            block[:, k] = col * (abs(col[j]) / col[j])
        out[:, start:stop] = block
        rates[start:stop] = rates[start:stop].mean()
        start = stop
    rates = np.where(np.abs(rates) < TOL_PSD, 0.0, rates)
    return JumpDecomposition(rates=rates, vectors=out)


def couplings_from_field(response, normalization: float | None = None,
                         omega0: float = DEFAULT_OMEGA0, tol: float = 1e-9) -> CouplingSet:
    """Couplings from pairwise dipole-projected field responses.

    ``response[i][j]`` is the dipole-projected Green's function between
    emitters i and j in any common unit.  The incoherent coupling is
    proportional to its imaginary part, the coherent coupling to half its
    real part.  By default the scale is fixed by the self-response, so that
    gamma_ii = 1; an explicit ``normalization`` multiplies Im(response)
    directly and must also give gamma_ii = 1.
    """
    G = np.asarray(response, dtype=complex)
    if G.ndim != 2 or G.shape[0] != G.shape[1]:
        raise CouplingError(f"response must be square, got shape {G.shape}")
    if np.max(np.abs(G - G.T)) > tol * max(1.0, np.max(np.abs(G))):
        raise CouplingError("response is not symmetric in (i, j)")
    self_resp = np.diag(G).imag
    ref = self_resp.mean()
    if np.min(np.abs(self_resp)) <= tol * max(1.0, np.max(np.abs(G))):
        raise CouplingError("vanishing self-response")
    if np.max(np.abs(self_resp - ref)) > tol * abs(ref):
        raise CouplingError("self-responses differ across emitters; identical emitters required")
    if normalization is None:
        scale = 1.0 / ref
    else:
        if normalization <= 0:
            raise CouplingError("normalization must be positive")
        scale = float(normalization)
        if abs(scale * ref - 1.0) > tol:
            raise CouplingError(f"normalization gives gamma_ii = {scale * ref!r}, expected 1")
    gamma = scale * G.imag
    g = 0.5 * scale * G.real
    np.fill_diagonal(gamma, 1.0)
    np.fill_diagonal(g, 0.0)
    return CouplingSet(Register(G.shape[0]), omega0, gamma, g)


def couplings_to_json(c: CouplingSet) -> dict:
    return {"n": c.n, "omega0": c.omega0, "gamma": c.gamma.tolist(), "g": c.g.tolist()}


def couplings_from_json(data: dict) -> CouplingSet:
    try:
        n = int(data["n"])
        omega0 = float(data["omega0"])
        gamma = np.asarray(data["gamma"], dtype=float)
        g = np.asarray(data["g"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise CouplingError(f"malformed couplings record: {exc}") from exc
    if gamma.shape != (n, n) or g.shape != (n, n):
        raise CouplingError(f"matrix shapes {gamma.shape}, {g.shape} do not match n={n}")
    return CouplingSet(Register(n), omega0, gamma, g)


def field_from_json(data: dict) -> np.ndarray:
    try:
        n = int(data["n"])
        arr = np.asarray(data["response"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise CouplingError(f"malformed field-sample record: {exc}") from exc
    if arr.shape != (n, n, 2):
        raise CouplingError(f"response has shape {arr.shape}, expected {(n, n, 2)}")
    return arr[..., 0] + 1j * arr[..., 1]


def load_couplings(path) -> CouplingSet:
    return couplings_from_json(json.loads(Path(path).read_text()))


def save_couplings(c: CouplingSet, path) -> None:
    Path(path).write_text(json.dumps(couplings_to_json(c), indent=1))


def load_field(path) -> np.ndarray:
    return field_from_json(json.loads(Path(path).read_text()))
