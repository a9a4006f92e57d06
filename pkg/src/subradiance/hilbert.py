"""Basis conventions, state construction and matrix flattening.

Emitter ``i`` (1-based) is bit ``i - 1`` of the computational index, least
significant first, so the single-excitation ket of emitter ``i`` sits at index
``2**(i - 1)`` and the vacuum at index 0.  Flattening is column stacking.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

TOL_NORM = 1e-10
TOL_HERM = 1e-10
TOL_TRACE = 1e-10
TOL_PSD = 1e-8

# Full Liouville space scales as 4**n; the single-excitation sector as (n+1)**2.
N_MAX_FULL = 10
N_MAX_SECTOR = 16


class PhysicalityError(ValueError):
    """A state violates normalization, Hermiticity, trace or positivity."""


@dataclass(frozen=True)
class Register:
    n: int

    def __post_init__(self):
        if not isinstance(self.n, (int, np.integer)) or isinstance(self.n, bool):
            raise TypeError(f"emitter count must be an integer, got {self.n!r}")
        if not 1 <= self.n <= N_MAX_SECTOR:
            raise ValueError(f"emitter count {self.n} outside [1, {N_MAX_SECTOR}]")

    @property
    def dim(self) -> int:
        return 2 ** self.n

    def require_full(self, limit: int = N_MAX_FULL) -> None:
        """Refuse operations that materialize full 2**n x 2**n operators."""
        if self.n > limit:
            raise ValueError(
                f"n={self.n} exceeds the full-space limit {limit}; "
                "use the single-excitation sector path"
            )


def as_register(reg) -> Register:
    if isinstance(reg, Register):
        return reg
    return Register(int(reg))


def register_from_dim(dim: int) -> Register:
    n = int(round(np.log2(dim)))
    if 2 ** n != dim:
        raise ValueError(f"dimension {dim} is not a power of two")
    return Register(n)


@dataclass(frozen=True, eq=False)
class PureState:
    register: Register
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if amps.size != self.register.dim:
            raise ValueError(
                f"expected {self.register.dim} amplitudes for n={self.register.n}, got {amps.size}"
            )
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > TOL_NORM:
            raise PhysicalityError(f"state norm {norm!r} differs from 1")
        object.__setattr__(self, "amplitudes", amps)

    @property
    def n(self) -> int:
        return self.register.n

    @classmethod
    def normalized(cls, reg, amplitudes) -> "PureState":
        amps = np.asarray(amplitudes, dtype=complex).reshape(-1)
        norm = np.linalg.norm(amps)
        if norm == 0:
            raise ValueError("cannot normalize the zero vector")
        return cls(as_register(reg), amps / norm)

    def projector(self) -> "DensityMatrix":
        return DensityMatrix(self.register, np.outer(self.amplitudes, self.amplitudes.conj()))

    def overlap(self, other: "PureState") -> complex:
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def sector_coefficients(self) -> np.ndarray:
        """Amplitudes on (vacuum, |1>, ..., |n>)."""
        return self.amplitudes[sector_indices(self.n)]

    def in_sector(self, tol: float = TOL_NORM) -> bool:
        outside = np.delete(self.amplitudes, sector_indices(self.n))
        return bool(np.linalg.norm(outside) <= tol)


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    register: Register
    entries: np.ndarray
    validate: bool = field(default=True, repr=False)

    def __post_init__(self):
        rho = np.asarray(self.entries, dtype=complex)
        d = self.register.dim
        if rho.shape != (d, d):
            raise ValueError(f"expected a {d}x{d} matrix, got shape {rho.shape}")
        object.__setattr__(self, "entries", rho)
        if self.validate:
            self.check()

    @property
    def n(self) -> int:
        return self.register.n

    def residuals(self) -> dict:
        rho = self.entries
        return {
            "hermiticity": float(np.max(np.abs(rho - rho.conj().T))),
            "trace": float(abs(np.trace(rho) - 1.0)),
            "min_eigenvalue": float(np.linalg.eigvalsh((rho + rho.conj().T) / 2).min()),
        }

    def check(self, tol_herm=TOL_HERM, tol_trace=TOL_TRACE, tol_psd=TOL_PSD) -> None:
        r = self.residuals()
        if r["hermiticity"] > tol_herm:
            raise PhysicalityError(f"non-Hermitian density matrix (residual {r['hermiticity']:.3g})")
        if r["trace"] > tol_trace:
            raise PhysicalityError(f"trace deviates from 1 by {r['trace']:.3g}")
        if r["min_eigenvalue"] < -tol_psd:
            raise PhysicalityError(f"negative eigenvalue {r['min_eigenvalue']:.3g}")


def sector_indices(n: int) -> np.ndarray:
    """Computational indices of (vacuum, |1>, ..., |n>)."""
    return np.array([0] + [1 << (i - 1) for i in range(1, n + 1)], dtype=np.int64)


def single_excitation_ket(i: int, reg) -> PureState:
    reg = as_register(reg)
    if not 0 <= i <= reg.n:
        raise IndexError(f"emitter index {i} outside [0, {reg.n}]")
    amps = np.zeros(reg.dim, dtype=complex)
    amps[0 if i == 0 else 1 << (i - 1)] = 1.0
    return PureState(reg, amps)


def sector_state(reg, coefficients) -> PureState:
    """Normalized state sum_i c_i |i> from coefficients on emitters 1..n.

    A vector of length n + 1 is read as (vacuum, c_1, ..., c_n).
    """
    reg = as_register(reg)
    c = np.asarray(coefficients, dtype=complex).reshape(-1)
    if c.size == reg.n:
        c = np.concatenate([[0.0], c])
    if c.size != reg.n + 1:
        raise ValueError(f"expected {reg.n} or {reg.n + 1} coefficients, got {c.size}")
    amps = np.zeros(reg.dim, dtype=complex)
    amps[sector_indices(reg.n)] = c
    return PureState.normalized(reg, amps)


def w_state(reg) -> PureState:
    reg = as_register(reg)
    return sector_state(reg, np.ones(reg.n))


def max_entangled_steady(reg, k: int) -> PureState:
    """Dark single-excitation state with equal-modulus discrete Fourier phases.

    Coefficients are ``exp(2j*pi*k*(i-1)/n)/sqrt(n)`` for emitters i = 1..n.
    They sum to zero for 1 <= k <= n-1, so the state has no overlap with
    the W state and is a superposition of antisymmetric pairs.
    """
    reg = as_register(reg)
    if reg.n < 2:
        raise ValueError("a dark single-excitation state needs n >= 2")
    if not 1 <= k <= reg.n - 1:
        raise ValueError(f"phase index k={k} outside [1, {reg.n - 1}]")
    phases = np.exp(2j * np.pi * k * np.arange(reg.n) / reg.n)
    return sector_state(reg, phases)


def flatten(m) -> np.ndarray:
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"flatten expects a square matrix, got shape {m.shape}")
    return m.reshape(-1, order="F")


def unflatten(v, qubits: bool = True) -> np.ndarray:
    """Inverse of ``flatten``; ``qubits=False`` admits any square length (sector blocks)."""
    v = np.asarray(v).reshape(-1)
    d = int(round(np.sqrt(v.size)))
    if d * d != v.size:
        raise ValueError(f"length {v.size} is not a perfect square")
    if qubits and d & (d - 1):
        raise ValueError(f"length {v.size} is not a power of 4")
    return v.reshape(d, d, order="F")


def embed_sector(block, n: int) -> np.ndarray:
    """Place an (n+1)x(n+1) sector operator into the full 2**n space."""
    block = np.asarray(block)
    idx = sector_indices(n)
    full = np.zeros((2 ** n, 2 ** n), dtype=complex)
    full[np.ix_(idx, idx)] = block
    return full


def restrict_sector(m, n: int) -> np.ndarray:
    idx = sector_indices(n)
    return np.asarray(m)[np.ix_(idx, idx)]


def _pair(z) -> list:
    z = complex(z)
    return [z.real, z.imag]


def pure_state_to_json(psi: PureState) -> dict:
    nz = np.flatnonzero(psi.amplitudes)
    return {"n": psi.n, "amplitudes": {str(int(i)): _pair(psi.amplitudes[i]) for i in nz}}


def pure_state_from_json(data: dict) -> PureState:
    try:
        reg = Register(int(data["n"]))
        entries = data["amplitudes"]
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed pure-state record: {exc}") from exc
    amps = np.zeros(reg.dim, dtype=complex)
    for key, val in entries.items():
        idx = int(key)
        if not 0 <= idx < reg.dim:
            raise ValueError(f"basis index {idx} outside [0, {reg.dim})")
        re, im = val
        amps[idx] = complex(re, im)
    return PureState(reg, amps)


def density_to_json(rho: DensityMatrix) -> dict:
    return {"n": rho.n, "rho": [[_pair(z) for z in row] for row in rho.entries]}


def density_from_json(data: dict, validate: bool = True) -> DensityMatrix:
    try:
        reg = Register(int(data["n"]))
        arr = np.asarray(data["rho"], dtype=float)
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed density-matrix record: {exc}") from exc
    if arr.shape != (reg.dim, reg.dim, 2):
        raise ValueError(f"rho has shape {arr.shape}, expected {(reg.dim, reg.dim, 2)}")
    return DensityMatrix(reg, arr[..., 0] + 1j * arr[..., 1], validate=validate)


def load_pure_state(path) -> PureState:
    return pure_state_from_json(json.loads(Path(path).read_text()))


def save_pure_state(psi: PureState, path) -> None:
    Path(path).write_text(json.dumps(pure_state_to_json(psi), indent=1))


def load_density(path, validate: bool = True) -> DensityMatrix:
    return density_from_json(json.loads(Path(path).read_text()), validate=validate)


def save_density(rho: DensityMatrix, path) -> None:
    Path(path).write_text(json.dumps(density_to_json(rho)))
