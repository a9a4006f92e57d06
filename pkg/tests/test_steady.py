import time

import numpy as np
import pytest
from hypothesis import given, strategies as st

from subradiance.couplings import all_to_all
from subradiance.hilbert import embed_sector, flatten, max_entangled_steady, sector_state, single_excitation_ket, w_state
from subradiance.liouvillian import build_liouvillian
from subradiance.oracles import max_diff_up_to_phase, theory_rho_eg, theory_rho_singlet, three_qubit_steady_reference
from subradiance.steady import (
    LinearDependenceError, classify_initial, gram_schmidt, oscillatory_eigenbasis, predict_final,
    predict_quasi, prediction, steady_basis, zero_eigenbasis,
)

S2 = np.sqrt(2)


def ket(n, i):
    return single_excitation_ket(i, n).amplitudes


def test_zero_basis_counts_and_first_elements():
    a = zero_eigenbasis(2)
    assert len(a) == 1
    assert np.allclose(a[0], 0.5 * np.outer(ket(2, 1) - ket(2, 2), ket(2, 1) - ket(2, 2)))
    assert len(zero_eigenbasis(6)) == 25
    a3 = zero_eigenbasis(3)
    k = {i: ket(3, i) for i in range(1, 4)}
    expected = [
        0.5 * np.outer(k[1] - k[2], k[1] - k[2]),
        0.5 * np.outer(k[1] - k[3], k[1] - k[3]),
        0.5 * np.outer(k[1] - k[2], k[1] - k[3]),
        0.5 * np.outer(k[1] - k[3], k[1] - k[2]),
    ]
    for got, ref in zip(a3, expected):
        assert np.array_equal(got, ref)


def test_oscillatory_basis():
    b = oscillatory_eigenbasis(2)
    assert [tag for _, tag in b] == [-1j, 1j]
    assert np.allclose(b[0][0], np.outer(ket(2, 2) - ket(2, 1), ket(2, 0)) / S2)
    assert np.allclose(b[1][0], np.outer(ket(2, 0), ket(2, 2) - ket(2, 1)) / S2)
    for n in range(2, 7):
        assert len(oscillatory_eigenbasis(n, space="sector")) == 2 * (n - 1)


def test_bases_need_two_emitters():
    with pytest.raises(ValueError):
        zero_eigenbasis(1)
    with pytest.raises(ValueError):
        steady_basis(1)


def test_gram_schmidt_examples(rng):
    Q, _ = np.linalg.qr(rng.normal(size=(6, 4)) + 1j * rng.normal(size=(6, 4)))
    out = np.array(gram_schmidt(Q.T))
    assert np.abs(out - Q.T).max() < 1e-12
    with pytest.raises(LinearDependenceError):
        gram_schmidt([np.array([1.0, 0, 0]), np.array([2.0, 0, 0])])


def test_gram_schmidt_three_emitter_sets():
    ref = three_qubit_steady_reference()
    a = zero_eigenbasis(3)
    A = gram_schmidt([flatten(m) for m in (a[1], a[2], a[3], a[0])])
    for got, want in zip(A, ref["A"]):
        assert np.abs(got - flatten(want)).max() < 1e-12
    b = [m for m, _ in oscillatory_eigenbasis(3)]
    B = gram_schmidt([flatten(b[0]), flatten(b[1])])
    for got, want in zip(B, ref["B"][:2]):
        assert np.abs(got - flatten(want)).max() < 1e-12


def test_three_emitter_basis_verbatim():
    basis = steady_basis(3)
    ref = three_qubit_steady_reference()
    got = basis.matrices("A") + basis.matrices("B_minus") + basis.matrices("B_plus")
    assert max(max_diff_up_to_phase(g, r) for g, r in zip(got, ref["A"] + ref["B"])) < 1e-12
    assert np.allclose(np.diag(ref["A"][3])[[1, 2, 4]], np.array([1, 4, 1]) / 6)


@pytest.mark.parametrize("n", [2, 3, 4, 5, 6])
def test_basis_orthonormal(n):
    basis = steady_basis(n)
    for V in (basis.A, basis.B_minus, basis.B_plus):
        assert np.abs(V.conj() @ V.T - np.eye(len(V))).max() < 1e-12
    assert np.abs(basis.A.conj() @ basis.B_minus.T).max() < 1e-15


@pytest.mark.parametrize("n", [2, 3, 4, 5, 6])
def test_basis_eigen_relations(n):
    w = 10.0
    L = build_liouvillian(all_to_all(n, 1.0, 0.0, w))
    basis = steady_basis(n)
    for v in basis.embed_full(basis.A):
        assert np.linalg.norm(L.apply(v)) < 1e-10
    for v in basis.embed_full(basis.B_minus):
        assert np.linalg.norm(L.apply(v) + 1j * w * v) < 1e-10
    for v in basis.embed_full(basis.B_plus):
        assert np.linalg.norm(L.apply(v) - 1j * w * v) < 1e-10


def test_predict_final_examples():
    singlet = sector_state(2, [1, -1])
    for t in (0.0, 3.0, 100.0):
        assert np.abs(predict_final(2, singlet, t).entries - singlet.projector().entries).max() < 1e-14
    eg = single_excitation_ket(2, 2)
    assert np.abs(predict_final(2, eg, 7.0).entries - theory_rho_eg(0.0, 1.0).entries).max() < 1e-15
    vac = np.zeros((64, 64))
    vac[0, 0] = 1
    assert np.abs(predict_final(6, w_state(6), 2.0).entries - vac).max() < 1e-14


def test_predict_rejects_outside_sector():
    from subradiance.hilbert import PureState, Register

    amps = np.zeros(4)
    amps[3] = 1
    with pytest.raises(ValueError):
        predict_final(2, PureState(Register(2), amps), 1.0)


@given(st.floats(0.0, 1.0), st.floats(0.0, 30.0))
def test_quasi_two_emitter_identities(alpha, t):
    eg = single_excitation_ket(2, 2)
    singlet = sector_state(2, [1, -1])
    assert np.abs(predict_quasi(2, alpha, eg, t).entries - theory_rho_eg(t, alpha).entries).max() < 1e-12
    assert np.abs(predict_quasi(2, alpha, singlet, t).entries
                  - theory_rho_singlet(t, alpha).entries).max() < 1e-12


@given(st.integers(2, 6), st.integers(0, 2 ** 32 - 1), st.floats(0.0, 50.0), st.floats(0.5, 1.0))
def test_prediction_hermitian_unit_trace(n, seed, t, alpha):
    rng = np.random.default_rng(seed)
    c = rng.normal(size=n + 1) + 1j * rng.normal(size=n + 1)
    psi = sector_state(n, c)
    m = prediction(n, psi, alpha).sector_matrix(t)
    assert abs(np.trace(m) - 1) < 1e-12
    assert np.abs(m - m.conj().T).max() == 0
    if alpha == 1.0:
        assert np.abs(predict_quasi(n, 1.0, psi, t).entries - predict_final(n, psi, t).entries).max() == 0


def test_prediction_vacuum_coherences_rotate():
    psi = sector_state(3, [1, 1, -1, 0])
    p = prediction(3, psi)
    m0, m1 = p.sector_matrix(0.0), p.sector_matrix(0.1)
    assert np.allclose(np.abs(m0), np.abs(m1))
    assert np.abs(m0[1:, 0] - m1[1:, 0]).max() > 1e-3


@pytest.mark.parametrize("alpha", [0.9, 0.99])
def test_quasi_vacuum_coherence_decays_at_half_rate(alpha):
    from subradiance.dynamics import TimeGrid, evolve_expm

    n = 4
    psi = sector_state(n, [1, 1, -1, 0, 0])
    times = [5.0, 20.0]
    states = evolve_expm(build_liouvillian(all_to_all(n, alpha)), psi, TimeGrid(times)).states
    for t, rho in zip(times, states):
        assert np.abs(rho - predict_quasi(n, alpha, psi, t).entries).max() < 1e-10


def test_predictor_cost_independent_of_t():
    psi = max_entangled_steady(6, 2)
    predict_final(6, psi, 1.0)

    def best(t):
        samples = []
        for _ in range(7):
            t0 = time.perf_counter()
            predict_final(6, psi, t)
            samples.append(time.perf_counter() - t0)
        return min(samples)

    a, b = best(1.0), best(1e6)
    assert max(a, b) / min(a, b) < 2.0


def test_classification():
    r1 = max_entangled_steady(6, 3)
    r2 = sector_state(6, [8, -8, 1, -1, 8, -8])
    res = classify_initial(6, r1)
    assert res.steady and res.max_entangled and res.fidelity_initial_final == pytest.approx(1, abs=1e-12)
    res = classify_initial(6, r2)
    assert res.steady and not res.max_entangled
    res = classify_initial(6, w_state(6))
    assert not res.steady and not res.max_entangled
    assert res.fidelity_initial_final < 1e-6
