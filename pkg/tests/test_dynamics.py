import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import random_density, random_psd
from subradiance.couplings import CouplingSet, all_to_all
from subradiance.dynamics import (
    IntegrationError, TimeGrid, Trajectory, evolve_expm, evolve_ode, evolve_reduced,
    krylov_expm_action, population, propagate, propagate_many,
)
from subradiance.hilbert import Register, sector_state, single_excitation_ket, w_state
from subradiance.liouvillian import build_liouvillian
from subradiance.oracles import TwoQubitParams, exact_rho_eg


def random_couplings(rng, n):
    g = rng.normal(size=(n, n))
    g = (g + g.T) / 2
    np.fill_diagonal(g, 0)
    return CouplingSet(Register(n), 10.0, random_psd(rng, n), g)


def test_time_grid_validation():
    with pytest.raises(ValueError):
        TimeGrid([0.0, 2.0, 1.0])
    with pytest.raises(ValueError):
        TimeGrid([-1.0, 0.0])
    assert TimeGrid.linear(0, 1, 11).is_uniform()
    assert not TimeGrid.log(0.1, 10, 5).is_uniform()


@pytest.mark.parametrize("rep", ["dense", "sparse", "matrix-free"])
def test_zero_time_is_identity(rep, rng):
    L = build_liouvillian(all_to_all(2, 0.5, 0.6), representation=rep)
    rho0 = random_density(rng, 4)
    traj = evolve_expm(L, rho0, TimeGrid([0.0]), check=False)
    assert np.array_equal(traj.states[0], rho0)


@pytest.mark.parametrize("rep", ["dense", "sparse", "matrix-free"])
@pytest.mark.parametrize("alpha,g", [(0.0, 0.0), (0.5, 0.6), (0.9, 5.0), (1.0, 0.6)])
def test_eg_closed_form(rep, alpha, g):
    L = build_liouvillian(all_to_all(2, alpha, g), representation=rep)
    grid = TimeGrid([0.5, 1.0, 5.0])
    traj = evolve_expm(L, single_excitation_ket(2, 2), grid)
    p = TwoQubitParams(alpha, g)
    for k, t in enumerate(grid.times):
        assert np.abs(traj.states[k] - exact_rho_eg(t, p).entries).max() < 1e-8


def test_antisymmetric_bell_constant():
    L = build_liouvillian(all_to_all(2, 1.0), representation="dense")
    psi = sector_state(2, [1, -1])
    traj = evolve_expm(L, psi, TimeGrid.linear(0, 20, 41))
    assert np.abs(traj.states - psi.projector().entries).max() < 1e-12


def test_single_emitter_decay_and_vacuum():
    c = CouplingSet(Register(1), 10.0, np.eye(1), np.zeros((1, 1)))
    L = build_liouvillian(c, representation="dense")
    grid = TimeGrid.linear(0, 5, 11)
    traj = evolve_ode(L, single_excitation_ket(1, 1), grid)
    assert np.allclose(traj.states[:, 1, 1].real, np.exp(-grid.times), atol=1e-9)
    vac = evolve_ode(L, single_excitation_ket(0, 1), grid)
    assert np.abs(vac.states - np.diag([1, 0])).max() < 1e-14


def test_ode_matches_expm_random_n3(rng):
    for _ in range(3):
        c = random_couplings(rng, 3)
        L = build_liouvillian(c)
        rho0 = random_density(rng, 8)
        grid = TimeGrid.linear(0, 3, 7)
        a = evolve_expm(L, rho0, grid)
        b = evolve_ode(L, rho0, grid)
        assert np.abs(a.states - b.states).max() < 1e-8


@settings(max_examples=5)
@given(st.integers(2, 4), st.integers(0, 2 ** 32 - 1))
def test_engine_agreement_long_time(n, seed):
    rng = np.random.default_rng(seed)
    L = build_liouvillian(random_couplings(rng, n))
    rho0 = random_density(rng, 2 ** n)
    grid = TimeGrid.linear(0, 20, 5)
    a = evolve_expm(L, rho0, grid)
    b = evolve_ode(L, rho0, grid)
    assert np.abs(a.states - b.states).max() < 1e-7


@settings(max_examples=10)
@given(st.integers(1, 3), st.integers(0, 2 ** 32 - 1),
       st.floats(0.1, 5.0), st.floats(0.1, 5.0))
def test_semigroup(n, seed, t1, dt):
    rng = np.random.default_rng(seed)
    L = build_liouvillian(random_couplings(rng, n))
    rho0 = random_density(rng, 2 ** n)
    mid = propagate(L, rho0, t1)
    assert np.abs(propagate(L, mid, dt) - propagate(L, rho0, t1 + dt)).max() < 1e-8


def test_reduced_matches_full_w4():
    c = all_to_all(4, 0.8, 0.3)
    grid = TimeGrid.linear(0, 10, 21)
    full = evolve_expm(build_liouvillian(c), w_state(4), grid)
    red = evolve_reduced(c, w_state(4), grid)
    assert red.space == "sector"
    assert max(np.abs(red.matrix(k) - full.states[k]).max() for k in range(len(grid))) < 1e-9


def test_reduced_two_qubit_closed_form():
    p = TwoQubitParams(0.5, 5.0)
    grid = TimeGrid.linear(0, 10, 101)
    traj = evolve_reduced(all_to_all(2, p.alpha, p.g), single_excitation_ket(2, 2), grid)
    err = max(np.abs(traj.matrix(k) - exact_rho_eg(t, p).entries).max() for k, t in enumerate(grid.times))
    assert err < 1e-8


def test_reduced_large_register():
    traj = evolve_reduced(all_to_all(12, 1.0), single_excitation_ket(1, 12), TimeGrid.linear(0, 20, 41))
    assert traj.residuals()["trace"] < 1e-9
    # dark fraction of |1> survives: 1 - 1/n
    assert 1 - traj.states[-1][0, 0].real == pytest.approx(1 - 1 / 12, abs=1e-9)


def test_reduced_rejects_outside_sector():
    psi = np.zeros(4)
    psi[3] = 1
    from subradiance.hilbert import PureState

    with pytest.raises(ValueError):
        evolve_reduced(all_to_all(2, 1.0), PureState(Register(2), psi), TimeGrid([0.0, 1.0]))


def test_population_examples():
    grid = TimeGrid.linear(0, 30, 31)
    eg = single_excitation_ket(2, 2)
    traj = evolve_reduced(all_to_all(2, 1.0), eg, grid)
    P = population(traj, eg)
    assert P[0] == pytest.approx(1.0, abs=1e-14)
    assert P[-1] == pytest.approx(0.25, abs=1e-12)
    traj = evolve_reduced(all_to_all(2, 0.0), eg, grid)
    assert np.allclose(population(traj, eg), np.exp(-grid.times), atol=1e-12)


def test_trajectory_check_flags_unphysical():
    grid = TimeGrid([0.0, 1.0])
    states = np.array([np.diag([1.0, 0.0]), np.diag([1.2, -0.1])], dtype=complex)
    traj = Trajectory(Register(1), grid, states)
    with pytest.raises(IntegrationError, match="t=1"):
        traj.check()


def test_ode_evaluation_budget():
    L = build_liouvillian(all_to_all(2, 1.0))
    with pytest.raises(IntegrationError):
        evolve_ode(L, single_excitation_ket(1, 2), TimeGrid([0.0, 5.0]), max_evals=50)


def test_krylov_action_against_expm(rng):
    from scipy.linalg import expm

    A = rng.normal(size=(40, 40)) - 3 * np.eye(40)
    v = rng.normal(size=40) + 0j
    w, _ = krylov_expm_action(lambda x: A @ x, v, 2.0, m=10)
    assert np.abs(w - expm(2.0 * A) @ v).max() < 1e-10


def test_log_grid_sparse_path():
    L = build_liouvillian(all_to_all(2, 0.5, 0.6))
    grid = TimeGrid.log(0.01, 10, 9)
    traj = evolve_expm(L, single_excitation_ket(2, 2), grid)
    p = TwoQubitParams(0.5, 0.6)
    for k, t in enumerate(grid.times):
        assert np.abs(traj.states[k] - exact_rho_eg(t, p).entries).max() < 1e-9


@pytest.mark.parametrize("rep", ["dense", "sparse", "matrix-free"])
def test_propagate_many_matches_single(rep, rng):
    L = build_liouvillian(all_to_all(3, 0.7, 0.4), representation=rep)
    states = [random_density(rng, 8) for _ in range(3)]
    batch = propagate_many(L, states, 1.5)
    for rho0, rho in zip(states, batch):
        assert np.abs(rho - propagate(L, rho0, 1.5)).max() < 1e-10
