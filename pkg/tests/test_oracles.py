import numpy as np
import pytest
from hypothesis import given, strategies as st

from subradiance.entanglement import concurrence, fidelity
from subradiance.oracles import (
    TwoQubitParams, exact_concurrence_eg, exact_rho_eg, fidelity_closed_eg, l_spectrum_two_qubit,
    multiset_distance, theory_concurrence_eg, theory_rho_eg, three_qubit_steady_reference,
    validation_suite,
)

params = st.builds(TwoQubitParams, st.floats(0.0, 1.0), st.floats(-6.0, 6.0), st.floats(1.0, 20.0))


def test_exact_rho_limits():
    p = TwoQubitParams(0.5, 0.6)
    eg = np.zeros((4, 4))
    eg[2, 2] = 1
    assert np.abs(exact_rho_eg(0.0, p).entries - eg).max() < 1e-15
    vac = np.zeros((4, 4))
    vac[0, 0] = 1
    assert np.abs(exact_rho_eg(60.0, p).entries - vac).max() < 1e-12


@given(params, st.floats(0.0, 20.0))
def test_exact_rho_physical(p, t):
    rho = exact_rho_eg(t, p)
    assert rho.residuals()["min_eigenvalue"] > -1e-12
    assert abs(concurrence(rho) - exact_concurrence_eg(t, p)) < 1e-8


def test_exact_concurrence_examples():
    assert exact_concurrence_eg(0.0, TwoQubitParams(0.3, 2.0)) == 0.0
    for t in (0.1, 1.0, 4.0):
        assert exact_concurrence_eg(t, TwoQubitParams(1.0, 0.0)) == pytest.approx(0.5 * (1 - np.exp(-2 * t)))
    p = TwoQubitParams(0.9, 5.0)
    # cos(4 g t) = 1 at t = k pi / (2 g): local minima of the oscillation
    tk = np.pi / 10
    vals = [exact_concurrence_eg(t, p) for t in (tk - 0.02, tk, tk + 0.02)]
    assert vals[1] < vals[0] and vals[1] < vals[2]


def test_theory_examples():
    assert theory_concurrence_eg(0.0, 0.7) == 0.5
    assert concurrence(theory_rho_eg(3.0, 0.7)) == pytest.approx(theory_concurrence_eg(3.0, 0.7), abs=1e-12)
    a8 = np.zeros((4, 4))
    a8[0, 0] = 0.5
    a8[1, 1] = a8[2, 2] = 0.25
    a8[1, 2] = a8[2, 1] = -0.25
    assert np.abs(theory_rho_eg(5.0, 1.0).entries - a8).max() < 1e-15


def test_fidelity_closed_examples():
    assert fidelity_closed_eg(0.0, 0.4) == pytest.approx(0.5, abs=1e-12)
    assert fidelity_closed_eg(80.0, 0.4) == pytest.approx(1.0, abs=1e-12)


@given(params, st.floats(0.0, 15.0))
def test_fidelity_closed_matches_numeric(p, t):
    f = fidelity(exact_rho_eg(t, p), theory_rho_eg(t, p.alpha))
    assert abs(f - fidelity_closed_eg(t, p.alpha)) < 1e-8


def test_spectrum_list():
    ev = l_spectrum_two_qubit(10.0, 0.0)
    assert len(ev) == 16
    assert multiset_distance(ev, ev.conj()) == 0
    for z in (0, 0, 10j, -10j, -1, -1, -2, -2):
        assert np.min(np.abs(ev - z)) == 0


def test_three_qubit_reference_orthonormal():
    ref = three_qubit_steady_reference()
    V = np.array([m.reshape(-1) for m in ref["A"] + ref["B"]])
    assert np.abs(V.conj() @ V.T - np.eye(8)).max() < 1e-15


def test_params_validation():
    with pytest.raises(ValueError):
        TwoQubitParams(1.5)


def test_multiset_distance():
    assert multiset_distance([1, 2, 3], [3, 1, 2]) == 0
    with pytest.raises(ValueError):
        multiset_distance([1, 2], [1])


def test_validation_suite_passes():
    checks = validation_suite(points=21)
    assert all(c.passed for c in checks), [c.line() for c in checks if not c.passed]
    assert all(" pass max_err=" in c.line() for c in checks)
