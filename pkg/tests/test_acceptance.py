"""Acceptance gate: eleven numbered criteria covering the full toolkit.

Each test prints one [PASS]/[FAIL] line (visible under pytest -s); the
assertions carry the pinned tolerances. Criteria 3-5 share one frozen
random-state corpus; criterion 6 reuses its d <= 6 slice.

The nonadaptive-baseline comparison and the million-state scan are out
of scope; the property checks of criteria 3-6 stand in for them.
"""

import itertools
import math
import time
from functools import lru_cache

import numpy as np
import pytest

from bivver.constructors import (
    near_optimal_two_way,
    one_way_optimal,
    two_qubit_one_way,
    two_qubit_two_way,
)
from bivver.protocol import (
    FREQUENCY,
    STOP_ON_FAIL,
    copies_needed,
    simulate,
    worst_case_state,
)
from bivver.relaxation import solve_one_way_relaxation, solve_two_way_relaxation
from bivver.states import from_schmidt
from bivver.strategy import spectral_gap, swap_symmetrize, twirl


class _criterion:
    """Prints the required one-line verdict for each numbered criterion."""

    def __init__(self, num, label):
        self.num = num
        self.label = label

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        tag = "PASS" if exc_type is None else "FAIL"
        print(f"[{tag}] criterion {self.num}: {self.label}", flush=True)
        return False


def _random_state(rng, d):
    a = rng.normal(size=d) ** 2 + 1e-3
    return from_schmidt(np.sqrt(a / a.sum()))


@lru_cache(maxsize=1)
def _corpus():
    """200 random states per dimension 2..10, frozen seed."""
    rng = np.random.default_rng(777)
    return {d: tuple(_random_state(rng, d) for _ in range(200)) for d in range(2, 11)}


_THETAS_64 = [(math.pi / 4) * k / 64 for k in range(1, 65)]


def test_criterion_01_one_way_two_qubit_optimum():
    """Constructor and solver both land on 1/(1 + cos^2 theta)."""
    with _criterion(1, "one-way two-qubit optimum on the 64-point grid"):
        for theta in _THETAS_64:
            want = 1.0 / (1.0 + math.cos(theta) ** 2)
            assert abs(two_qubit_one_way(theta).v - want) < 1e-10
            state = from_schmidt([math.cos(theta), math.sin(theta)])
            sol = solve_one_way_relaxation(state)
            assert abs(sol.value - want) < 1e-4


def test_criterion_02_two_way_two_qubit_optimum():
    """The five-setting d=2 strategy and the d=2 solver both give 2/3."""
    with _criterion(2, "two-way two-qubit optimum 2/3"):
        for theta in _THETAS_64:
            assert abs(two_qubit_two_way(theta).v - 2.0 / 3.0) < 1e-10
        for theta in _THETAS_64[7::8]:
            state = from_schmidt([math.cos(theta), math.sin(theta)])
            sol = solve_two_way_relaxation(state)
            assert abs(sol.value - 2.0 / 3.0) < 1e-4


def test_criterion_03_general_one_way_bound():
    """v = 1/(1 + lam1^2) and the relaxation never beats it beyond 1e-4."""
    with _criterion(3, "general one-way bound on 200 states per d in 2..10"):
        for d, states in _corpus().items():
            for s in states:
                want = 1.0 / (1.0 + s.coeffs[0] ** 2)
                assert abs(one_way_optimal(s).v - want) < 1e-9
                sol = solve_one_way_relaxation(s)
                assert sol.value <= want + 1e-4


def test_criterion_04_matrix_element_identities():
    """Assembled one-way operators match the closed-form entries."""
    with _criterion(4, "one-way operator entries match closed forms"):
        for d in range(2, 9):
            for s in _corpus()[d][:25]:
                lam = s.lam
                w = lam[0] ** 2 / (1.0 + lam[0] ** 2)
                want = np.zeros((d * d, d * d))
                for i in range(d):
                    for j in range(d):
                        row = i * d + j
                        if i == j:
                            want[row, row] = w + (1.0 - w) * lam[i] ** 2
                        else:
                            want[row, row] = (1.0 - w) * lam[j] ** 2
                            want[i * d + i, j * d + j] = (1.0 - w) * lam[i] * lam[j]
                omega = one_way_optimal(s).omega
                assert np.max(np.abs(omega - want)) < 1e-10


def test_criterion_05_near_optimal_two_way_value():
    """Constructor v equals 1/(1 + (lam1^2 + lam2^2)/2) on the corpus."""
    with _criterion(5, "near-optimal two-way value on the shared corpus"):
        for d, states in _corpus().items():
            for s in states:
                want = 1.0 / (1.0 + 0.5 * (s.coeffs[0] ** 2 + s.coeffs[1] ** 2))
                assert abs(near_optimal_two_way(s).v - want) < 1e-9


def test_criterion_06_two_way_numeric_gap():
    """Numeric two-way optimum stays within [1 - 1e-6, 1.05] of near-optimal."""
    with _criterion(6, "numeric/near-optimal ratio within [1-1e-6, 1.05]"):
        start = time.monotonic()
        a = math.sqrt(2.0 / 3.0)
        for k in range(1, 10):
            theta = (math.pi / 4) * k / 9
            s = from_schmidt([a * math.cos(theta), math.sqrt(1.0 / 3.0), a * math.sin(theta)])
            ratio = solve_two_way_relaxation(s).value / near_optimal_two_way(s).v
            assert 1.0 - 1e-6 <= ratio <= 1.05
        for d in range(2, 7):
            for s in _corpus()[d][:100]:
                ratio = solve_two_way_relaxation(s).value / near_optimal_two_way(s).v
                assert 1.0 - 1e-6 <= ratio <= 1.05
        assert time.monotonic() - start < 600.0


def test_criterion_07_twirl_equals_group_average():
    """Mask twirl coincides with the explicit phase-group average."""
    with _criterion(7, "mask twirl equals the explicit group average"):
        rng = np.random.default_rng(1234)
        for d in (2, 3):
            n = d * d
            for _ in range(5):
                g = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
                h = (g + g.conj().T) / 2
                total = np.zeros((n, n), dtype=complex)
                for a in itertools.product(range(4), repeat=d):
                    phi = 1j ** np.array(a)
                    gvec = np.kron(phi, phi.conj())
                    total += gvec[:, None] * h * gvec.conj()[None, :]
                avg = total / 4**d
                assert np.max(np.abs(twirl(h, d) - avg)) < 1e-12


def test_criterion_08_symmetrization_inequalities():
    """Swap-symmetrizing or twirling a valid strategy never lowers v."""
    with _criterion(8, "symmetrization and twirl never decrease the gap"):
        rng = np.random.default_rng(4321)
        for d in (2, 3, 4):
            n = d * d
            for _ in range(100):
                s = _random_state(rng, d)
                psi = np.zeros(n)
                for i in range(d):
                    psi[i * d + i] = s.coeffs[i]
                basis = np.linalg.svd(np.column_stack([psi]))[0]
                q = basis[:, 1:]
                g = rng.normal(size=(n - 1, n - 1)) + 1j * rng.normal(size=(n - 1, n - 1))
                b = g @ g.conj().T
                b *= rng.random() / np.linalg.eigvalsh(b)[-1]
                omega = np.outer(psi, psi) + q @ b @ q.conj().T
                v0 = spectral_gap(omega, s).v
                v_sym = spectral_gap(swap_symmetrize(omega, d), s).v
                v_tw = spectral_gap(twirl(omega, d), s).v
                assert v_sym >= v0 - 1e-10
                assert v_tw >= v0 - 1e-10


def test_criterion_09_worst_case_saturation():
    """worst_case_state reaches pass probability 1 - epsilon v exactly."""
    with _criterion(9, "worst-case states achieve 1 - epsilon v"):
        rng = np.random.default_rng(9)
        strategies = [two_qubit_one_way(t) for t in (0.2, 0.5, math.pi / 4)]
        strategies += [two_qubit_two_way(t) for t in (0.2, 0.5, math.pi / 4)]
        for d in (2, 3, 4, 5, 6):
            s = _random_state(rng, d)
            strategies.append(one_way_optimal(s))
            strategies.append(near_optimal_two_way(s))
        for strategy in strategies:
            for eps in (0.1, 0.3, 0.5):
                sigma = worst_case_state(strategy, epsilon=eps)
                got = float(np.real(np.trace(strategy.omega @ sigma.matrix)))
                assert abs(got - (1.0 - eps * strategy.v)) < 1e-9


def test_criterion_10_monte_carlo_consistency():
    """Simulated rates agree with the analytic acceptance probabilities."""
    with _criterion(10, "Monte Carlo matches analytic rates within 3 sigma"):
        strategy = two_qubit_two_way(math.pi / 4)
        eps = 0.3
        sigma = worst_case_state(strategy, epsilon=eps)
        pass_rate = 1.0 - eps * strategy.v  # 0.8

        n = 100_000
        rep = simulate(strategy, sigma, copies=n, seed=2024, mode=FREQUENCY)
        emp = rep.passes / rep.trials
        sig = math.sqrt(pass_rate * (1.0 - pass_rate) / n)
        assert abs(emp - pass_rate) < 3 * sig

        reps, copies = 10_000, 10
        rep = simulate(strategy, sigma, copies=copies, seed=2025, mode=STOP_ON_FAIL, trials=reps)
        bound = pass_rate**copies
        emp_delta = rep.passes / rep.trials
        sig = math.sqrt(bound * (1.0 - bound) / reps)
        assert emp_delta <= bound + 3 * sig


def test_criterion_11_sample_complexity_bound():
    """copies_needed at v >= 1/2 respects ceil(2/eps ln(1/delta)) + 1."""
    with _criterion(11, "sample complexity within the 2/eps ln(1/delta) bound"):
        for v in (0.5, 2.0 / 3.0, 0.8, 1.0):
            for eps in (0.01, 0.02, 0.05, 0.1, 0.2, 0.3):
                for delta in (1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 0.1):
                    cap = math.ceil(2.0 / eps * math.log(1.0 / delta)) + 1
                    assert copies_needed(v, eps, delta) <= cap
