"""Closed-form verification strategies for Schmidt-canonical targets.

Two-qubit targets get explicit three- and five-setting projective
strategies; general targets get the optimal one-way construction (a
computational-basis test mixed with a phase-randomized Fourier-basis
test) and its near-optimal two-way symmetrization.
"""

from __future__ import annotations

import numpy as np

from .states import SchmidtState, from_schmidt
from .strategy import A_TO_B, B_TO_A, ConditionalTest, Strategy


def group_generators(d: int):
    """Generators g_k of the diagonal phase group on C^d (x) C^d.

    g_k multiplies |k> by i on the A side and by -i on the B side; the
    full group they generate has 4^(d-1) distinct elements.
    """
    if d < 1:
        raise ValueError(f"dimension must be >= 1, got {d}")
    gens = []
    for k in range(d):
        phi = np.ones(d, dtype=complex)
        phi[k] = 1j
        gens.append(np.diag(np.kron(phi, phi.conj())))
    return gens


def fourier_pair(d: int, lam) -> tuple:
    """Sender Fourier basis and matching receiver vectors.

    Columns f[:, k] = d^(-1/2) sum_j gamma^(jk) |j> and
    phi[:, k] = sum_j gamma^(-jk) lam_j |j> with gamma = exp(2 pi i/d),
    indices 0-based. Each phi column is unit norm, and the pair gives
    sender outcome probability 1/d on the canonical target.
    """
    lam = np.asarray(lam, dtype=float)
    if lam.size != d:
        raise ValueError(f"need {d} coefficients, got {lam.size}")
    j = np.arange(d)
    gamma = np.exp(2j * np.pi / d)
    f = gamma ** np.outer(j, j) / np.sqrt(d)
    phi = (gamma ** (-np.outer(j, j))) * lam[:, None]
    return f, phi


def _proj(vec: np.ndarray) -> np.ndarray:
    vec = np.asarray(vec, dtype=complex)
    return np.outer(vec, vec.conj())


def _projector_test(sender_vectors, receiver_vectors, direction=A_TO_B,
                    phase_randomized=False) -> ConditionalTest:
    return ConditionalTest(
        direction=direction,
        sender_povm=tuple(_proj(v) for v in sender_vectors),
        receiver_pass=tuple(_proj(v) for v in receiver_vectors),
        phase_randomized=phase_randomized,
    )


def _check_theta(theta: float) -> tuple:
    if not 0.0 < theta <= np.pi / 4:
        raise ValueError(f"theta must lie in (0, pi/4], got {theta}")
    return float(np.cos(theta)), float(np.sin(theta))


def _two_qubit_settings(theta: float):
    """The Z, X and Y conditional tests for cos|00> + sin|11>."""
    c, s = _check_theta(theta)
    e0 = np.array([1.0, 0.0])
    e1 = np.array([0.0, 1.0])
    xp = np.array([1.0, 1.0]) / np.sqrt(2)
    xm = np.array([1.0, -1.0]) / np.sqrt(2)
    yp = np.array([1.0, 1j]) / np.sqrt(2)
    ym = np.array([1.0, -1j]) / np.sqrt(2)
    z_test = _projector_test([e0, e1], [e0, e1])
    x_test = _projector_test([xp, xm], [np.array([c, s]), np.array([c, -s])])
    y_test = _projector_test([yp, ym], [np.array([c, -1j * s]), np.array([c, 1j * s])])
    return z_test, x_test, y_test


def two_qubit_theta(s: SchmidtState) -> float:
    """Schmidt angle of a two-qubit target, in (0, pi/4]."""
    if s.d != 2:
        raise ValueError(f"two-qubit constructor needs d=2, got d={s.d}")
    return float(np.arctan2(s.coeffs[1], s.coeffs[0]))


def _two_qubit_target(theta: float) -> SchmidtState:
    c, s = _check_theta(theta)
    return from_schmidt([c, s])


def two_qubit_one_way(theta: float) -> Strategy:
    """Optimal one-way strategy for cos(theta)|00> + sin(theta)|11>.

    Three projective settings (Z, X, Y sender bases with conditional
    receiver projectors); spectral gap 1/(1 + cos^2 theta).
    """
    c, _ = _check_theta(theta)
    z_test, x_test, y_test = _two_qubit_settings(theta)
    denom = 1.0 + c * c
    return Strategy(
        _two_qubit_target(theta),
        [
            (c * c / denom, z_test),
            (0.5 / denom, x_test),
            (0.5 / denom, y_test),
        ],
    )


def two_qubit_two_way(theta: float) -> Strategy:
    """Optimal two-way strategy for cos(theta)|00> + sin(theta)|11>.

    Adds the direction-reversed X and Y settings; spectral gap 2/3
    independent of theta.
    """
    z_test, x_test, y_test = _two_qubit_settings(theta)
    x_rev = ConditionalTest(B_TO_A, x_test.sender_povm, x_test.receiver_pass)
    y_rev = ConditionalTest(B_TO_A, y_test.sender_povm, y_test.receiver_pass)
    return Strategy(
        _two_qubit_target(theta),
        [
            (1.0 / 3.0, z_test),
            (1.0 / 6.0, x_test),
            (1.0 / 6.0, y_test),
            (1.0 / 6.0, x_rev),
            (1.0 / 6.0, y_rev),
        ],
    )


def _fourier_test(s: SchmidtState, direction: str) -> ConditionalTest:
    f, phi = fourier_pair(s.d, s.lam)
    return _projector_test(
        [f[:, k] for k in range(s.d)],
        [phi[:, k] for k in range(s.d)],
        direction=direction,
        phase_randomized=True,
    )


def _computational_test(d: int, direction: str = A_TO_B) -> ConditionalTest:
    eye = np.eye(d)
    return _projector_test([eye[:, k] for k in range(d)],
                           [eye[:, k] for k in range(d)], direction=direction)


def one_way_optimal(s: SchmidtState) -> Strategy:
    """Optimal one-way strategy for an arbitrary canonical target.

    With probability w = lam_1^2/(1 + lam_1^2) the sender measures the
    computational basis; otherwise the Fourier-basis test runs under a
    fresh uniform phase-group element. Spectral gap 1/(1 + lam_1^2).
    """
    lam1sq = s.coeffs[0] ** 2
    w = lam1sq / (1.0 + lam1sq)
    return Strategy(
        s,
        [
            (w, _computational_test(s.d)),
            (1.0 - w, _fourier_test(s, A_TO_B)),
        ],
    )


def near_optimal_two_way(s: SchmidtState) -> Strategy:
    """Near-optimal two-way strategy for an arbitrary canonical target.

    Symmetrizes the Fourier test over both directions with the mixing
    weight retuned to lam^2 = (lam_1^2 + lam_2^2)/2; spectral gap
    1/(1 + lam^2).
    """
    if s.d < 2:
        raise ValueError("two-way construction needs d >= 2")
    lsq = 0.5 * (s.coeffs[0] ** 2 + s.coeffs[1] ** 2)
    w = lsq / (1.0 + lsq)
    return Strategy(
        s,
        [
            (w, _computational_test(s.d)),
            (0.5 * (1.0 - w), _fourier_test(s, A_TO_B)),
            (0.5 * (1.0 - w), _fourier_test(s, B_TO_A)),
        ],
    )
