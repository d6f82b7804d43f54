"""Tests for conditional tests, pass operators, and their symmetrizers.

The twirl is checked against a brute-force average over the full phase
group, enumerated by exponent tuples; the mask shortcut in the library
never enters the oracle.
"""

import math

import numpy as np
import pytest

from bivver.states import density, from_schmidt, state_vector
from bivver.strategy import (
    A_TO_B,
    B_TO_A,
    ConditionalTest,
    Strategy,
    conditional_outcome,
    effective_test_operator,
    spectral_gap,
    strategy_from_dict,
    strategy_to_dict,
    swap_symmetrize,
    twirl,
    validate_semi_optimal_one_way,
)
from bivver.strategy import test_operator as build_test_operator
from bivver.linalg import swap_operator

P0 = np.diag([1.0, 0.0]).astype(complex)
P1 = np.diag([0.0, 1.0]).astype(complex)


def _rand_herm(rng, n):
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return a + a.conj().T


def _group_average(omega, d):
    """Brute-force twirl: average over every exponent tuple of the
    diagonal phase group (each group element appears 4 times)."""
    acc = np.zeros_like(omega, dtype=complex)
    count = 0
    for code in range(4**d):
        a = [(code // 4**k) % 4 for k in range(d)]
        phi = np.array([1j**e for e in a])
        g = np.diag(np.kron(phi, phi.conj()))
        acc += g @ omega @ g.conj().T
        count += 1
    return acc / count


def test_conditional_test_validation():
    ConditionalTest(A_TO_B, (P0, P1), (P0, P1))
    with pytest.raises(ValueError):
        ConditionalTest("sideways", (P0, P1), (P0, P1))
    with pytest.raises(ValueError):
        ConditionalTest(A_TO_B, (P0, P0), (P0, P1))  # POVM not complete
    with pytest.raises(ValueError):
        ConditionalTest(A_TO_B, (P0, P1), (P0, 2.0 * P1))  # receiver > 1
    with pytest.raises(ValueError):
        ConditionalTest(A_TO_B, (P0, P1), (P0,))  # length mismatch


def test_operator_places_receiver_on_a_for_reverse_tests():
    x = np.array([[0.3, 0.1], [0.1, 0.7]], dtype=complex)
    fwd = ConditionalTest(A_TO_B, (P0, P1), (x, P1))
    rev = ConditionalTest(B_TO_A, (P0, P1), (x, P1))
    assert np.max(np.abs(build_test_operator(fwd) - (np.kron(P0, x) + np.kron(P1, P1)))) == 0
    assert np.max(np.abs(build_test_operator(rev) - (np.kron(x, P0) + np.kron(P1, P1)))) == 0


def test_twirl_matches_group_average():
    rng = np.random.default_rng(41)
    for d in (2, 3):
        omega = _rand_herm(rng, d * d)
        assert np.max(np.abs(twirl(omega, d) - _group_average(omega, d))) < 1e-12


def test_twirl_is_idempotent_and_fixes_target():
    rng = np.random.default_rng(42)
    d = 3
    omega = _rand_herm(rng, d * d)
    once = twirl(omega, d)
    assert np.max(np.abs(twirl(once, d) - once)) == 0
    s = from_schmidt(np.sqrt([0.5, 0.3, 0.2]))
    psi = state_vector(s)
    before = psi.conj() @ omega @ psi
    after = psi.conj() @ once @ psi
    assert abs(before - after) < 1e-12


def test_swap_symmetrize_matches_conjugation():
    rng = np.random.default_rng(43)
    for d in (2, 3):
        omega = _rand_herm(rng, d * d)
        s = swap_operator(d)
        expect = 0.5 * (omega + s @ omega @ s)
        assert np.max(np.abs(swap_symmetrize(omega, d) - expect)) < 1e-14


def test_spectral_gap_on_constructed_operator():
    s = from_schmidt([0.8, 0.6])
    psi = state_vector(s)
    perp = np.eye(4) - np.outer(psi, psi.conj())
    omega = np.outer(psi, psi.conj()) + 0.3 * perp
    gap = spectral_gap(omega, s)
    assert abs(gap.v - 0.7) < 1e-12
    assert abs(gap.perp_norm - 0.3) < 1e-12
    assert abs(np.linalg.norm(gap.top_vector) - 1.0) < 1e-12
    assert abs(psi.conj() @ gap.top_vector) < 1e-9


def test_spectral_gap_degenerate_projector():
    # pure target projector: any orthogonal direction is extremal
    s = from_schmidt([0.8, 0.6])
    psi = state_vector(s)
    gap = spectral_gap(np.outer(psi, psi.conj()), s)
    assert abs(gap.v - 1.0) < 1e-12
    assert abs(psi.conj() @ gap.top_vector) < 1e-9
    assert abs(np.linalg.norm(gap.top_vector) - 1.0) < 1e-12


def test_spectral_gap_preconditions():
    s = from_schmidt([0.8, 0.6])
    psi = state_vector(s)
    proj = np.outer(psi, psi.conj())
    with pytest.raises(ValueError):
        spectral_gap(2.0 * proj, s)  # spectrum above 1
    with pytest.raises(ValueError):
        spectral_gap(0.5 * proj, s)  # target not fixed
    bad = proj.copy()
    bad[0, 1] += 0.1
    with pytest.raises(ValueError):
        spectral_gap(bad, s)  # not Hermitian


def test_conditional_outcome_against_partial_trace():
    rng = np.random.default_rng(44)
    lam = np.sqrt([0.5, 0.3, 0.2])
    d = 3
    psi = np.zeros(d * d, dtype=complex)
    psi[np.arange(d) * d + np.arange(d)] = lam
    rho = np.outer(psi, psi.conj())
    a = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    m = a @ a.conj().T
    m /= np.linalg.eigvalsh(m)[-1] * 1.5  # keep 0 <= m <= 1
    prob, proj = conditional_outcome(lam, m)
    # oracle: cond_B = Tr_A[(M (x) I) rho] by raw index sums
    cond = np.einsum("ia,ajil->jl", m, rho.reshape(d, d, d, d))
    assert abs(prob - np.trace(cond).real) < 1e-13
    assert np.max(np.abs(proj - cond / np.trace(cond).real)) < 1e-12


def test_conditional_outcome_flags_rare_branch():
    lam = np.array([math.sqrt(1 - 1e-15), math.sqrt(1e-15)])
    prob, proj = conditional_outcome(lam, P1)
    assert proj is None
    assert prob < 1e-14


def test_strategy_validation_errors():
    z = ConditionalTest(A_TO_B, (P0, P1), (P0, P1))
    s = from_schmidt([0.8, 0.6])
    with pytest.raises(ValueError):
        Strategy(s, [(0.5, z)])  # probabilities must sum to 1
    with pytest.raises(ValueError):
        Strategy(s, [(-0.2, z), (1.2, z)])
    # a test that rejects part of the target is refused
    lossy = ConditionalTest(A_TO_B, (P0, P1), (P0, P0))
    with pytest.raises(ValueError):
        Strategy(s, [(1.0, lossy)])


def test_strategy_omega_is_cached_readonly():
    z = ConditionalTest(A_TO_B, (P0, P1), (P0, P1))
    s = from_schmidt([0.8, 0.6])
    st = Strategy(s, [(1.0, z)])
    assert st.omega is st.omega
    with pytest.raises(ValueError):
        st.omega[0, 0] = 5.0


def test_strategy_v_of_computational_test():
    # the bare computational-basis test leaves |01>, |10> untouched: v = 0
    z = ConditionalTest(A_TO_B, (P0, P1), (P0, P1))
    s = from_schmidt([0.8, 0.6])
    st = Strategy(s, [(1.0, z)])
    assert abs(st.v - 0.0) < 1e-12


def test_validator_flags_non_semi_optimal_receiver():
    eye = np.eye(2, dtype=complex)
    accept_all = ConditionalTest(A_TO_B, (P0, P1), (eye, eye))
    s = from_schmidt([0.8, 0.6])
    st = Strategy(s, [(1.0, accept_all)])
    report = validate_semi_optimal_one_way(st)
    assert not report.ok
    assert not report.checks["trace_b_identity"].passed
    assert not report.checks["receiver_semi_optimal"].passed
    assert report.checks["target_fixed"].passed


def test_effective_operator_twirls_randomized_tests():
    rng = np.random.default_rng(45)
    u = np.linalg.qr(rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2)))[0]
    povm = (u @ P0 @ u.conj().T, u @ P1 @ u.conj().T)
    plain = ConditionalTest(A_TO_B, povm, (P0, P1))
    randomized = ConditionalTest(A_TO_B, povm, (P0, P1), phase_randomized=True)
    raw = build_test_operator(plain)
    assert np.max(np.abs(effective_test_operator(plain, 2) - raw)) == 0
    assert np.max(np.abs(effective_test_operator(randomized, 2) - twirl(raw, 2))) == 0


def test_strategy_serialization_round_trip():
    from bivver.constructors import one_way_optimal

    s = from_schmidt(np.sqrt([0.5, 0.3, 0.2]))
    st = one_way_optimal(s)
    back = strategy_from_dict(strategy_to_dict(st))
    assert back.target == st.target
    assert np.max(np.abs(back.omega - st.omega)) < 1e-15
    flags = [t.phase_randomized for _, t in back.tests]
    assert flags == [t.phase_randomized for _, t in st.tests]
