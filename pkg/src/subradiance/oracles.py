"""Closed-form two- and three-emitter results used as independent ground truth.

Two-emitter states are written in the computational basis
(|00>, |01>, |10>, |11>) = (vacuum, |1>, |2>, doubly excited); "eg" is
emitter 2 excited, index 2.
"""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .couplings import DEFAULT_OMEGA0
from .hilbert import DensityMatrix, Register


@dataclass(frozen=True)
class TwoQubitParams:
    alpha: float
    g: float = 0.0
    omega0: float = DEFAULT_OMEGA0

    def __post_init__(self):
        if not -1.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha={self.alpha} outside [-1, 1]")


REG2 = Register(2)


def _exponentials(t: float, p: TwoQubitParams):
    a = p.alpha
    slow, fast = np.exp((a - 1) * t), np.exp((-a - 1) * t)
    e1 = slow + fast
    e2 = fast - slow
    # printed definitions carry an extra factor 2; this form reproduces rho(0) = |eg><eg|
    e3 = np.cos(2 * p.g * t) * np.exp(-t)
    e4 = np.sin(2 * p.g * t) * np.exp(-t)
    return e1, e2, e3, e4


def exact_rho_eg(t: float, p: TwoQubitParams) -> DensityMatrix:
    """Exact rho(t) for the initial state |eg> with gamma_12 = alpha, g_12 = g."""
    e1, e2, e3, e4 = _exponentials(t, p)
    rho = np.zeros((4, 4), dtype=complex)
    rho[0, 0] = 4 - 2 * e1
    rho[1, 1] = e1 - 2 * e3
    rho[2, 2] = e1 + 2 * e3
    rho[1, 2] = e2 - 2j * e4
    rho[2, 1] = e2 + 2j * e4
    return DensityMatrix(REG2, rho / 4)


def exact_concurrence_eg(t: float, p: TwoQubitParams) -> float:
    a, g = p.alpha, p.g
    rad = np.exp(2 * (a - 1) * t) + np.exp(-2 * (a + 1) * t) - 2 * np.exp(-2 * t) * np.cos(4 * g * t)
    return float(0.5 * np.sqrt(max(rad, 0.0)))


def _dark_pair_state(weight: float, t: float, alpha: float) -> np.ndarray:
    x = np.exp((alpha - 1) * t)
    rho = np.zeros((4, 4), dtype=complex)
    rho[0, 0] = 1 - weight * x
    rho[1, 1] = rho[2, 2] = weight * x / 2
    rho[1, 2] = rho[2, 1] = -weight * x / 2
    return rho


def theory_rho_eg(t: float, alpha: float) -> DensityMatrix:
    """Predicted quasi-steady state for |eg>: half the dark pair, damped at 1 - alpha."""
    return DensityMatrix(REG2, _dark_pair_state(0.5, t, alpha))


def theory_rho_singlet(t: float, alpha: float) -> DensityMatrix:
    """Predicted (and exact) state for (|eg> - |ge>)/sqrt(2)."""
    return DensityMatrix(REG2, _dark_pair_state(1.0, t, alpha))


def theory_concurrence_eg(t: float, alpha: float) -> float:
    return float(0.5 * np.exp((alpha - 1) * t))


def fidelity_closed_eg(t: float, alpha: float) -> float:
    x = np.exp((alpha - 1) * t)
    rad = x ** 2 + np.exp(-2 * t) - 4 * x - 2 * np.exp(-(alpha + 1) * t) + 4
    return float(0.5 * (x + np.sqrt(max(rad, 0.0))))


def l_spectrum_two_qubit(omega0: float, g: float) -> np.ndarray:
    """The sixteen Liouvillian eigenvalues of the gamma_12 = 1 pair."""
    w, i = omega0, 1j
    return np.array([
        0, 0, -i * (w - g), i * (w - g),
        -1 - 2 * i * g, -1 + 2 * i * g, -2, -2,
        -1 - i * (w + g), -1 - i * (w + g), -1 + i * (w + g), -1 + i * (w + g),
        -1 - 2 * i * w, -1 + 2 * i * w,
        -2 - i * (w - g), -2 + i * (w - g),
    ], dtype=complex)


def multiset_distance(a, b) -> float:
    """Largest |difference| under the best one-to-one matching of two equal-size multisets."""
    a, b = np.asarray(a, dtype=complex), np.asarray(b, dtype=complex)
    if a.shape != b.shape:
        raise ValueError(f"multisets of different size {a.size} and {b.size}")
    cost = np.abs(a[:, None] - b[None, :])
    r, c = linear_sum_assignment(cost)
    return float(cost[r, c].max())


def _k3(i: int) -> np.ndarray:
    e = np.zeros(8)
    e[0 if i == 0 else 1 << (i - 1)] = 1.0
    return e


def three_qubit_steady_reference() -> dict[str, list[np.ndarray]]:
    """Orthonormalized three-emitter steady matrices A1..A4 and B1..B4 as printed."""
    k = {i: _k3(i) for i in range(4)}
    o = np.outer
    s3 = np.sqrt(3)
    A = [
        0.5 * o(k[1] - k[3], k[1] - k[3]),
        (o(k[1] + k[3], k[1] - k[3]) + 2 * (o(k[2], k[3]) - o(k[2], k[1]))) / (2 * s3),
        (o(k[1] - k[3], k[1] + k[3]) + 2 * (o(k[3], k[2]) - o(k[1], k[2]))) / (2 * s3),
        (o(k[1] + k[3], k[1] + k[3]) + 4 * o(k[2], k[2])
         - 2 * (o(k[2], k[1]) + o(k[2], k[3]) + o(k[1], k[2]) + o(k[3], k[2]))) / 6,
    ]
    B = [
        (o(k[2], k[0]) - o(k[1], k[0])) / np.sqrt(2),
        (-o(k[1], k[0]) - o(k[2], k[0]) + 2 * o(k[3], k[0])) / np.sqrt(6),
        (o(k[0], k[2]) - o(k[0], k[1])) / np.sqrt(2),
        (-o(k[0], k[1]) - o(k[0], k[2]) + 2 * o(k[0], k[3])) / np.sqrt(6),
    ]
    return {"A": A, "B": B}


def max_diff_up_to_phase(a: np.ndarray, b: np.ndarray) -> float:
    """max |a - e^{i phi} b| with phi chosen from the overlap <b, a>."""
    a, b = np.asarray(a).reshape(-1), np.asarray(b).reshape(-1)
    ov = np.vdot(b, a)
    phase = ov / abs(ov) if abs(ov) > 0 else 1.0
    return float(np.abs(a - phase * b).max())


# --------------------------------------------------------------------------
# validation suite (the `validate` subcommand)
# --------------------------------------------------------------------------

ALPHAS = (0.0, 0.5, 0.9, 1.0)
GS = (0.0, 0.6, 5.0)


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    max_err: float
    seconds: float = 0.0

    def line(self) -> str:
        return f"{self.name} {'pass' if self.passed else 'fail'} max_err={self.max_err:.3e}"


def _timed(name, tol, fn) -> Check:
    t0 = time.perf_counter()
    err = float(fn())
    return Check(name, bool(err < tol), err, time.perf_counter() - t0)


def check_spectrum(omega0=DEFAULT_OMEGA0, gs=(0.0, 0.6, 5.0)) -> float:
    from .couplings import all_to_all
    from .liouvillian import build_liouvillian, spectrum

    err = 0.0
    for g in gs:
        L = build_liouvillian(all_to_all(2, 1.0, g, omega0), representation="dense")
        err = max(err, multiset_distance(spectrum(L).eigenvalues, l_spectrum_two_qubit(omega0, g)))
    return err


def _eg_grid_errors(engine: str, times, omega0=DEFAULT_OMEGA0) -> float:
    from .couplings import all_to_all
    from .dynamics import TimeGrid, evolve_expm, evolve_ode
    from .hilbert import single_excitation_ket
    from .liouvillian import build_liouvillian

    grid = TimeGrid(times)
    rho0 = single_excitation_ket(2, 2).projector()
    err = 0.0
    for a in ALPHAS:
        for g in GS:
            L = build_liouvillian(all_to_all(2, a, g, omega0), representation="dense")
            traj = (evolve_expm if engine == "expm" else evolve_ode)(L, rho0, grid)
            p = TwoQubitParams(a, g, omega0)
            for k, t in enumerate(grid.times):
                err = max(err, np.abs(traj.states[k] - exact_rho_eg(t, p).entries).max())
    return err


def eg_measure_errors(times, omega0=DEFAULT_OMEGA0) -> dict[str, float]:
    """Concurrence vs closed form, fidelity vs closed form, and the g-spread of fidelity."""
    from .couplings import all_to_all
    from .dynamics import TimeGrid, evolve_expm
    from .entanglement import concurrence, fidelity
    from .hilbert import single_excitation_ket
    from .liouvillian import build_liouvillian
    from .steady import predict_quasi

    grid = TimeGrid(times)
    psi = single_excitation_ket(2, 2)
    conc = fid = spread = 0.0
    for a in ALPHAS:
        per_g = []
        for g in GS:
            L = build_liouvillian(all_to_all(2, a, g, omega0), representation="dense")
            traj = evolve_expm(L, psi, grid)
            p = TwoQubitParams(a, g, omega0)
            fs = []
            for k, t in enumerate(grid.times):
                rho = traj.states[k]
                conc = max(conc, abs(concurrence(rho) - exact_concurrence_eg(t, p)))
                f = fidelity(rho, predict_quasi(2, a, psi, t, omega0))
                fid = max(fid, abs(f - fidelity_closed_eg(t, a)))
                fs.append(f)
            per_g.append(fs)
        per_g = np.array(per_g)
        spread = max(spread, float(np.ptp(per_g, axis=0).max()))
    return {"concurrence": conc, "fidelity": fid, "fidelity_g_spread": spread}


def check_three_qubit_basis() -> float:
    from .steady import steady_basis

    basis = steady_basis(3)
    ref = three_qubit_steady_reference()
    got_A = basis.matrices("A")
    got_B = basis.matrices("B_minus") + basis.matrices("B_plus")
    return max(max_diff_up_to_phase(g, r) for g, r in zip(got_A + got_B, ref["A"] + ref["B"]))


def check_w_negativity(ns=range(2, 9)) -> float:
    from .entanglement import multipartite_negativity
    from .hilbert import w_state

    return max(abs(multipartite_negativity(w_state(n)) - 2 * np.sqrt(n - 1) / n) for n in ns)


def check_quasi_identity(times) -> float:
    from .hilbert import single_excitation_ket, sector_state
    from .steady import predict_quasi

    eg = single_excitation_ket(2, 2)
    singlet = sector_state(2, [-1, 1])
    err = 0.0
    for a in ALPHAS:
        for t in times:
            err = max(err, np.abs(predict_quasi(2, a, eg, t).entries - theory_rho_eg(t, a).entries).max())
            err = max(err, np.abs(predict_quasi(2, a, singlet, t).entries
                                  - theory_rho_singlet(t, a).entries).max())
    return err


def validation_suite(points: int = 101) -> list[Check]:
    times = np.linspace(0.0, 10.0, points)
    checks = [
        _timed("spectrum_two_qubit", 1e-9, check_spectrum),
        _timed("exact_rho_eg_expm", 1e-8, lambda: _eg_grid_errors("expm", times)),
        _timed("exact_rho_eg_ode", 1e-8, lambda: _eg_grid_errors("ode", times)),
    ]
    t0 = time.perf_counter()
    meas = eg_measure_errors(times)
    dt = time.perf_counter() - t0
    checks += [Check(f"{k}_eg", v < 1e-8, v, dt) for k, v in meas.items()]
    checks += [
        _timed("three_qubit_steady_basis", 1e-12, check_three_qubit_basis),
        _timed("w_state_negativity", 1e-10, check_w_negativity),
        _timed("quasi_prediction_two_qubit", 1e-12, lambda: check_quasi_identity(times)),
    ]
    return checks
