"""Time propagation of flattened density matrices.

Two independent engines integrate d vec(rho)/dt = L vec(rho): exponential
action (``evolve_expm``) and an adaptive explicit Runge-Kutta integrator
(``evolve_ode``).  ``evolve_reduced`` propagates only the Liouville block of
the single-excitation sector, which is invariant under L.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse.linalg as spla
from scipy.integrate import solve_ivp

from .couplings import CouplingSet
from .hilbert import (DensityMatrix, PureState, Register, embed_sector, flatten,
                      restrict_sector, sector_indices, unflatten)
from .liouvillian import Superoperator, build_liouvillian

log = logging.getLogger(__name__)

TRAJ_TOL_TRACE = 1e-9
TRAJ_TOL_HERM = 1e-10
TRAJ_TOL_PSD = 1e-7

ODE_RTOL = 1e-10
ODE_ATOL = 1e-12


class IntegrationError(RuntimeError):
    """Propagation failed or produced an unphysical state."""


@dataclass(frozen=True, eq=False)
class TimeGrid:
    times: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float).reshape(-1)
        if t.size == 0:
            raise ValueError("time grid is empty")
        if t[0] < 0 or not np.all(np.isfinite(t)):
            raise ValueError("times must be finite and non-negative")
        if np.any(np.diff(t) <= 0):
            raise ValueError("times must be strictly increasing")
        object.__setattr__(self, "times", t)

    @classmethod
    def linear(cls, start: float, stop: float, points: int) -> "TimeGrid":
        return cls(np.linspace(start, stop, points))

    @classmethod
    def log(cls, start: float, stop: float, points: int) -> "TimeGrid":
        if start <= 0:
            raise ValueError("log grid needs start > 0")
        return cls(np.geomspace(start, stop, points))

    def __len__(self):
        return self.times.size

    def is_uniform(self, rtol: float = 1e-12) -> bool:
        if self.times.size < 3:
            return True
        dt = np.diff(self.times)
        return bool(np.all(np.abs(dt - dt[0]) <= rtol * max(1.0, self.times[-1])))


@dataclass(frozen=True, eq=False)
class Trajectory:
    """States rho(t_k); ``space='sector'`` stores (n+1)x(n+1) sector blocks."""

    register: Register
    grid: TimeGrid
    states: np.ndarray
    space: str = "full"

    def __len__(self):
        return len(self.grid)

    @property
    def times(self) -> np.ndarray:
        return self.grid.times

    def matrix(self, k: int) -> np.ndarray:
        """Full 2**n x 2**n matrix at grid index k."""
        if self.space == "sector":
            return embed_sector(self.states[k], self.register.n)
        return self.states[k]

    def density(self, k: int) -> DensityMatrix:
        return DensityMatrix(self.register, self.matrix(k), validate=False)

    def _per_state(self):
        s = self.states
        sh = np.conj(np.swapaxes(s, 1, 2))
        trace = np.abs(np.einsum("kii->k", s) - 1)
        herm = np.abs(s - sh).max(axis=(1, 2))
        mins = np.linalg.eigvalsh((s + sh) / 2)[:, 0]
        return trace, herm, mins

    def residuals(self) -> dict:
        trace, herm, mins = self._per_state()
        return {"trace": float(trace.max()), "hermiticity": float(herm.max()),
                "min_eigenvalue": float(mins.min())}

    def check(self) -> None:
        """Raise IntegrationError if any state is unphysical beyond tolerance."""
        trace, herm, mins = self._per_state()
        for name, bad in (("trace drift", trace > TRAJ_TOL_TRACE),
                          ("Hermiticity residual", herm > TRAJ_TOL_HERM),
                          ("negative eigenvalue", mins < -TRAJ_TOL_PSD)):
            if bad.any():
                k = int(np.argmax(bad))
                raise IntegrationError(f"{name} at t={self.times[k]:.6g}")


def _initial_matrix(L: Superoperator, rho0) -> np.ndarray:
    if isinstance(rho0, PureState):
        rho0 = rho0.projector()
    m = rho0.entries if isinstance(rho0, DensityMatrix) else np.asarray(rho0, dtype=complex)
    d = L.hilbert_dim
    if m.shape == (d, d):
        return m.astype(complex)
    if L.space == "sector" and m.shape == (2 ** L.register.n,) * 2:
        block = restrict_sector(m, L.register.n)
        if not np.isclose(np.abs(m).sum(), np.abs(block).sum(), rtol=0, atol=1e-12):
            raise ValueError("initial state has support outside the single-excitation sector")
        return block.astype(complex)
    raise ValueError(f"initial state of shape {m.shape} does not match register")


def _finish(L: Superoperator, grid: TimeGrid, vecs: np.ndarray, check: bool) -> Trajectory:
    d = L.hilbert_dim
    states = vecs.reshape(len(grid), d, d).transpose(0, 2, 1)  # column stacking
    traj = Trajectory(L.register, grid, np.ascontiguousarray(states), L.space)
    if check:
        traj.check()
    return traj


def krylov_expm_action(matvec, v: np.ndarray, t: float, m: int = 30,
                       tol: float = 1e-12, tau0: float | None = None):
    """exp(t A) v by restarted Arnoldi with adaptive substeps.

    Each substep projects A onto a Krylov space of dimension m and uses the
    corrected (m+1)-term approximation; the local error estimate from the
    extra term must stay below ``tol * |v| * tau / t``.  Returns the result
    and the last accepted substep.
    """
    w = np.array(v, dtype=complex)
    if t == 0:
        return w, tau0
    N = w.size
    m = min(m, N)
    t_done = 0.0
    tau = min(t, tau0) if tau0 else t
    scale = max(np.linalg.norm(w), 1e-300)
    while t_done < t:
        beta = np.linalg.norm(w)
        if beta == 0.0:
            return w, tau
        V = np.zeros((N, m + 1), dtype=complex)
        Hm = np.zeros((m + 1, m + 1), dtype=complex)
        V[:, 0] = w / beta
        happy = False
        k = m
        for j in range(m):
            p = matvec(V[:, j])
            for _ in range(2):  # classical Gram-Schmidt with one reorthogonalization
                h = V[:, :j + 1].conj().T @ p
                p = p - V[:, :j + 1] @ h
                Hm[:j + 1, j] += h
            hn = np.linalg.norm(p)
            if hn <= 1e-13 * max(1.0, np.abs(Hm[:j + 1, j]).max()):
                happy, k = True, j + 1
                break
            Hm[j + 1, j] = hn
            V[:, j + 1] = p / hn
        tau = min(tau, t - t_done)
        for _ in range(200):
            if happy:
                F = sla.expm(tau * Hm[:k, :k])
                w_new = beta * (V[:, :k] @ F[:, 0])
                err = 0.0
            else:
                F = sla.expm(tau * Hm)
                w_new = beta * (V @ F[:, 0])
                err = beta * abs(F[m, 0])
            allowed = tol * scale * tau / t
            if err <= allowed:
                break
            tau *= max(0.2, 0.9 * (allowed / err) ** (1.0 / m))
        else:
            raise IntegrationError(f"Krylov step estimation failed at t={t_done:.6g}")
        w = w_new
        t_done += tau
        if not happy:
            grow = 2.0 if err == 0 else min(2.0, 0.9 * (allowed / err) ** (1.0 / (m + 1)))
            tau *= max(1.0, grow)
        if t - t_done <= 1e-14 * t:
            break
    return w, tau


def evolve_expm(L: Superoperator, rho0, grid: TimeGrid, check: bool = True) -> Trajectory:
    """States unflatten(exp(L t_k) vec(rho0)) with rho0 given at t = 0.

    Dense operators use scaling-and-squaring matrix exponentials (one per
    distinct step), sparse operators the truncated-Taylor exponential action,
    and matrix-free operators the Krylov exponential action.
    """
    if not isinstance(grid, TimeGrid):
        grid = TimeGrid(grid)
    v0 = flatten(_initial_matrix(L, rho0))
    times = grid.times
    out = np.empty((len(times), v0.size), dtype=complex)
    steps = np.diff(np.concatenate([[0.0], times]))

    if L.representation == "dense":
        M = L.matrix
        cache: dict[float, np.ndarray] = {}
        v = v0
        for k, dt in enumerate(steps):
            if dt > 0:
                key = round(dt, 14)
                if key not in cache:
                    cache[key] = sla.expm(M * dt)
                v = cache[key] @ v
            if not np.all(np.isfinite(v)):
                raise IntegrationError(f"non-finite state at t={times[k]:.6g}")
            out[k] = v
    elif L.representation == "sparse":
        M = L.matrix.tocsc()
        try:
            if grid.is_uniform() and len(times) > 2:
                out[:] = spla.expm_multiply(M, v0, start=times[0], stop=times[-1],
                                            num=len(times), endpoint=True)
            else:
                v = v0
                for k, dt in enumerate(steps):
                    if dt > 0:
                        v = spla.expm_multiply(M * dt, v)
                    out[k] = v
        except (ValueError, OverflowError) as exc:
            raise IntegrationError(f"exponential action failed near t={times[-1]:.6g}: {exc}") from exc
    else:
        v, tau = v0, None
        for k, dt in enumerate(steps):
            if dt > 0:
                v, tau = krylov_expm_action(L.apply, v, dt, tau0=tau)
            out[k] = v
    if not np.all(np.isfinite(out)):
        bad = int(np.argmax(~np.all(np.isfinite(out), axis=1)))
        raise IntegrationError(f"non-finite state at t={times[bad]:.6g}")
    return _finish(L, grid, out, check)


def evolve_ode(L: Superoperator, rho0, grid: TimeGrid, rtol: float = ODE_RTOL,
               atol: float = ODE_ATOL, max_step: float | None = None,
               max_evals: int = 50_000_000, check: bool = True) -> Trajectory:
    """Adaptive 8th-order Runge-Kutta (DOP853) integration from t = 0."""
    if not isinstance(grid, TimeGrid):
        grid = TimeGrid(grid)
    if max_step is None:
        max_step = 0.05 / max(1.0, abs(L.omega0))
    v0 = flatten(_initial_matrix(L, rho0))
    times = grid.times
    if times[-1] == 0:
        return _finish(L, grid, np.tile(v0, (len(times), 1)), check)

    evals = 0

    def rhs(t, y):
        nonlocal evals
        evals += 1
        if evals > max_evals:
            raise IntegrationError(f"tolerance not met within {max_evals} evaluations at t={t:.6g}")
        return L.apply(y)

    sol = solve_ivp(rhs, (0.0, times[-1]), v0, method="DOP853", t_eval=times,
                    rtol=rtol, atol=atol, max_step=max_step)
    if sol.status != 0:
        t_fail = sol.t[-1] if sol.t.size else 0.0
        raise IntegrationError(f"{sol.message} (at t={t_fail:.6g})")
    return _finish(L, grid, sol.y.T, check)


def sector_liouvillian(c: CouplingSet, form: str = "collective") -> Superoperator:
    return build_liouvillian(c, form=form, representation="dense", space="sector")


def evolve_reduced(c: CouplingSet, psi0, grid: TimeGrid, engine: str = "expm",
                   check: bool = True) -> Trajectory:
    """Propagate a single-excitation initial state inside its (n+1)**2 Liouville block."""
    n = c.n
    if isinstance(psi0, PureState):
        if not psi0.in_sector():
            raise ValueError("initial state has support outside the single-excitation sector")
        coeffs = psi0.sector_coefficients()
        rho0 = np.outer(coeffs, coeffs.conj())
    else:
        rho0 = np.asarray(psi0.entries if isinstance(psi0, DensityMatrix) else psi0, dtype=complex)
        if rho0.shape == (2 ** n, 2 ** n):
            block = restrict_sector(rho0, n)
            if abs(np.abs(rho0).sum() - np.abs(block).sum()) > 1e-12:
                raise ValueError("initial state has support outside the single-excitation sector")
            rho0 = block
    L = sector_liouvillian(c)
    if engine == "ode":
        return evolve_ode(L, rho0, grid, check=check)
    return evolve_expm(L, rho0, grid, check=check)


def propagate(L: Superoperator, rho0, t: float) -> np.ndarray:
    """rho(t) as a matrix of the operator's own Hilbert dimension."""
    return evolve_expm(L, rho0, TimeGrid([t]), check=False).states[0]


def propagate_many(L: Superoperator, states, t: float) -> np.ndarray:
    """rho_j(t) for a batch of initial states, shape (count, d, d).

    Sparse operators share one exponential action over the stacked
    flattened states, which is far cheaper than one call per state.
    """
    V = np.column_stack([flatten(_initial_matrix(L, s)) for s in states])
    if t == 0:
        out = V
    elif L.representation == "dense":
        out = sla.expm(L.matrix * t) @ V
    elif L.representation == "sparse":
        out = spla.expm_multiply(L.matrix.tocsc() * t, V)
    else:
        out = np.column_stack([krylov_expm_action(L.apply, v, t)[0] for v in V.T])
    if not np.all(np.isfinite(out)):
        raise IntegrationError(f"non-finite state at t={t:.6g}")
    d = L.hilbert_dim
    return np.ascontiguousarray(out.T.reshape(-1, d, d).transpose(0, 2, 1))


def population(traj: Trajectory, psi0: PureState, clip: bool = False) -> np.ndarray:
    """P(t_k) = <psi0| rho(t_k) |psi0>."""
    if psi0.register.n != traj.register.n:
        raise ValueError("register mismatch")
    if traj.space == "sector":
        if not psi0.in_sector():
            raise ValueError("sector trajectory cannot project onto a state outside the sector")
        a = psi0.sector_coefficients()
    else:
        a = psi0.amplitudes
    p = np.einsum("i,kij,j->k", a.conj(), traj.states, a)
    if np.abs(p.imag).max() > 1e-10:
        raise IntegrationError(f"population has imaginary part {np.abs(p.imag).max():.3g}")
    p = p.real
    return np.clip(p, 0.0, 1.0) if clip else p


def sector_matrix(traj: Trajectory, k: int) -> np.ndarray:
    """(n+1)x(n+1) sector block of the state at grid index k."""
    if traj.space == "sector":
        return traj.states[k]
    idx = sector_indices(traj.register.n)
    return traj.states[k][np.ix_(idx, idx)]
