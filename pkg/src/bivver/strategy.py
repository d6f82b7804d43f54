"""One-round adaptive verification strategies and their pass operators.

A strategy is a probabilistic mixture of binary conditional tests. Each
test has a sender measurement (POVM) on one side and, for every sender
outcome, a pass operator on the other side. The mixture's global pass
operator Omega determines the detection power through its spectral gap
on the target's orthocomplement.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .linalg import (
    BipartiteDims,
    herm_eig,
    herm_norm_gap,
    partial_trace,
    partial_transpose,
    swap_operator,
)
from .states import (
    SchmidtState,
    from_schmidt,
    matrix_from_pairs,
    matrix_to_pairs,
    state_to_dict,
    state_vector,
)

A_TO_B = "a_to_b"
B_TO_A = "b_to_a"

# sender branches rarer than this get an arbitrary pass operator and a flag
PROB_FLOOR = 1e-14

_OP_TOL = 1e-10


def _readonly(m: np.ndarray) -> np.ndarray:
    out = np.array(m, dtype=complex)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class ConditionalTest:
    """One conditional test: sender POVM plus per-outcome pass operators.

    phase_randomized marks tests that are conjugated by a fresh uniform
    element of the diagonal phase group on every use; operator-level
    assembly then averages the group out via the twirl mask.
    """

    direction: str
    sender_povm: tuple
    receiver_pass: tuple
    phase_randomized: bool = False

    def __post_init__(self):
        if self.direction not in (A_TO_B, B_TO_A):
            raise ValueError(f"direction must be {A_TO_B!r} or {B_TO_A!r}")
        ms = tuple(_readonly(m) for m in self.sender_povm)
        ns = tuple(_readonly(n) for n in self.receiver_pass)
        if len(ms) == 0 or len(ms) != len(ns):
            raise ValueError("sender POVM and receiver list must have equal nonzero length")
        ds = ms[0].shape[0]
        dr = ns[0].shape[0]
        for m in ms:
            if m.shape != (ds, ds):
                raise ValueError("sender POVM elements must be square and same-dimensional")
        for n in ns:
            if n.shape != (dr, dr):
                raise ValueError("receiver operators must be square and same-dimensional")
        total = sum(ms)
        if np.max(np.abs(total - np.eye(ds))) > _OP_TOL:
            raise ValueError("sender POVM does not sum to the identity")
        for m in ms:
            if herm_norm_gap(m) > _OP_TOL:
                raise ValueError("sender POVM element is not Hermitian")
            if np.linalg.eigvalsh(0.5 * (m + m.conj().T))[0] < -_OP_TOL:
                raise ValueError("sender POVM element is not positive semidefinite")
        for n in ns:
            if herm_norm_gap(n) > _OP_TOL:
                raise ValueError("receiver operator is not Hermitian")
            ev = np.linalg.eigvalsh(0.5 * (n + n.conj().T))
            if ev[0] < -_OP_TOL or ev[-1] > 1.0 + _OP_TOL:
                raise ValueError("receiver operator must satisfy 0 <= N <= 1")
        object.__setattr__(self, "sender_povm", ms)
        object.__setattr__(self, "receiver_pass", ns)

    @property
    def n_outcomes(self) -> int:
        return len(self.sender_povm)

    @property
    def sender_dim(self) -> int:
        return self.sender_povm[0].shape[0]

    @property
    def receiver_dim(self) -> int:
        return self.receiver_pass[0].shape[0]


def test_operator(test: ConditionalTest) -> np.ndarray:
    """The raw pass operator sum_a M_a (x) N_a, receiver side placed
    first for B->A tests so the A factor always comes first."""
    terms = []
    for m, n in zip(test.sender_povm, test.receiver_pass):
        if test.direction == A_TO_B:
            terms.append(np.kron(m, n))
        else:
            terms.append(np.kron(n, m))
    return sum(terms)


_MASK_CACHE: dict = {}


def _twirl_mask(d: int) -> np.ndarray:
    mask = _MASK_CACHE.get(d)
    if mask is None:
        idx = np.arange(d * d)
        on_diag_pair = (idx // d) == (idx % d)
        mask = np.eye(d * d, dtype=bool) | np.outer(on_diag_pair, on_diag_pair)
        _MASK_CACHE[d] = mask
    return mask


def twirl(omega: np.ndarray, d: int) -> np.ndarray:
    """Average of omega over the diagonal phase group.

    Equals the entrywise mask keeping <ij|.|ij> and <ii|.|jj>; the group
    itself (size 4^(d-1)) is never enumerated.
    """
    omega = np.asarray(omega)
    if omega.shape != (d * d, d * d):
        raise ValueError(f"operator must be {d * d}x{d * d} for local dimension {d}")
    return np.where(_twirl_mask(d), omega, 0.0)


def swap_symmetrize(omega: np.ndarray, d: int) -> np.ndarray:
    """(omega + S omega S)/2 with S the subsystem swap."""
    omega = np.asarray(omega)
    if omega.shape != (d * d, d * d):
        raise ValueError(f"operator must be {d * d}x{d * d} for local dimension {d}")
    idx = np.arange(d * d)
    perm = (idx % d) * d + idx // d
    return 0.5 * (omega + omega[np.ix_(perm, perm)])


def effective_test_operator(test: ConditionalTest, d: int) -> np.ndarray:
    op = test_operator(test)
    if test.phase_randomized:
        op = twirl(op, d)
    return op


class Strategy:
    """A weighted mixture of conditional tests verifying a target state."""

    def __init__(self, target: SchmidtState, tests):
        tests = tuple((float(p), t) for p, t in tests)
        if not tests:
            raise ValueError("a strategy needs at least one test")
        probs = np.array([p for p, _ in tests])
        if np.any(probs < 0.0):
            raise ValueError("test probabilities must be nonnegative")
        if abs(probs.sum() - 1.0) > 1e-12:
            raise ValueError(f"test probabilities sum to {probs.sum()!r}, not 1")
        d = target.d
        for _, t in tests:
            if t.sender_dim != d or t.receiver_dim != d:
                raise ValueError(
                    f"test dimensions ({t.sender_dim}, {t.receiver_dim}) do not match target d={d}"
                )
        omega = np.zeros((d * d, d * d), dtype=complex)
        for p, t in tests:
            if p > 0.0:
                omega += p * effective_test_operator(t, d)
        psi = state_vector(target)
        overlap = float(np.real(psi.conj() @ omega @ psi))
        if abs(overlap - 1.0) > 1e-9:
            raise ValueError(f"strategy does not fix the target: <psi|Omega|psi> = {overlap!r}")
        evals = np.linalg.eigvalsh(0.5 * (omega + omega.conj().T))
        if evals[0] < -1e-9 or evals[-1] > 1.0 + 1e-9:
            raise ValueError(
                f"assembled operator spectrum [{evals[0]:.3e}, {evals[-1]:.6f}] leaves [0, 1]"
            )
        self.target = target
        self.tests = tests
        self._omega = _readonly(omega)
        self._gap = None

    @property
    def d(self) -> int:
        return self.target.d

    @property
    def dims(self) -> BipartiteDims:
        return BipartiteDims(self.d, self.d)

    @property
    def omega(self) -> np.ndarray:
        return self._omega

    @property
    def gap_report(self) -> "SpectralGap":
        if self._gap is None:
            self._gap = spectral_gap(self._omega, self.target)
        return self._gap

    @property
    def v(self) -> float:
        return self.gap_report.v


def assemble_omega(strategy: Strategy) -> np.ndarray:
    """The strategy's global pass operator (cached on the strategy)."""
    return strategy.omega


@dataclass(frozen=True)
class SpectralGap:
    """Spectral gap v and the dominant orthocomplement eigenvector."""

    v: float
    perp_norm: float
    top_vector: np.ndarray


def spectral_gap(omega: np.ndarray, target: SchmidtState) -> SpectralGap:
    """v = 1 - ||P_perp Omega P_perp|| for a valid pass operator.

    Requires omega Hermitian with spectrum in [0, 1] and unit target
    overlap, all within 1e-9.
    """
    omega = np.asarray(omega)
    d = target.d
    if omega.shape != (d * d, d * d):
        raise ValueError(f"operator must be {d * d}x{d * d} for target d={d}")
    if herm_norm_gap(omega) > 1e-9:
        raise ValueError("pass operator is not Hermitian")
    sym = 0.5 * (omega + omega.conj().T)
    evals = np.linalg.eigvalsh(sym)
    if evals[0] < -1e-9 or evals[-1] > 1.0 + 1e-9:
        raise ValueError(
            f"pass operator spectrum [{evals[0]:.3e}, {evals[-1]:.6f}] leaves [0, 1]"
        )
    psi = state_vector(target)
    overlap = float(np.real(psi.conj() @ sym @ psi))
    if abs(overlap - 1.0) > 1e-9:
        raise ValueError(f"pass operator does not fix the target: overlap {overlap!r}")
    proj = np.eye(d * d, dtype=complex) - np.outer(psi, psi.conj())
    restricted = proj @ sym @ proj
    vals, vecs = herm_eig(restricted)
    perp_norm = float(min(max(vals[-1], 0.0), 1.0))
    # Re-orthogonalize against the target so downstream mixtures are exact;
    # when the orthocomplement block vanishes eigh may hand back any vector.
    top = proj @ vecs[:, -1]
    nrm = float(np.linalg.norm(top))
    if nrm < 1e-6:
        k = int(np.argmin(np.abs(psi)))
        top = np.zeros(d * d, dtype=complex)
        top[k] = 1.0
        top = proj @ top
        nrm = float(np.linalg.norm(top))
    top = top / nrm
    return SpectralGap(v=1.0 - perp_norm, perp_norm=perp_norm, top_vector=top)


def conditional_outcome(lam: np.ndarray, sender_element: np.ndarray):
    """Outcome probability and normalized post-outcome projector on the
    receiver side, for a sender element measured on the canonical target.

    Returns (prob, projector); projector is None when prob < PROB_FLOOR.
    The same formula serves both directions by symmetry of sum_i lam_i |ii>.
    """
    lam = np.asarray(lam, dtype=float)
    m = np.asarray(sender_element, dtype=complex)
    cond = (lam[:, None] * lam[None, :]) * m.T
    prob = float(np.real(np.trace(cond)))
    if prob < PROB_FLOOR:
        return prob, None
    return prob, cond / prob


@dataclass(frozen=True)
class CheckResult:
    passed: bool
    residual: float


@dataclass(frozen=True)
class ValidationReport:
    checks: dict
    flagged_branches: tuple = field(default_factory=tuple)

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks.values())


def _receiver_residual(strategy: Strategy, tol: float):
    """Max deviation of receiver operators from the conditional
    projectors, plus the list of branches too rare to constrain."""
    lam = strategy.target.lam
    worst = 0.0
    flagged = []
    for t_idx, (_, test) in enumerate(strategy.tests):
        for a_idx, (m, n) in enumerate(zip(test.sender_povm, test.receiver_pass)):
            prob, proj = conditional_outcome(lam, m)
            if proj is None:
                flagged.append((t_idx, a_idx))
                continue
            worst = max(worst, float(np.max(np.abs(n - proj))))
    return worst, tuple(flagged)


def validate_semi_optimal_one_way(strategy: Strategy, tol: float = 1e-9) -> ValidationReport:
    """Diagnostics for a one-way (A->B) semi-optimal strategy.

    Checks: receiver marginal Tr_B(Omega) = I, unit target overlap,
    positivity under partial transpose, and receiver operators equal to
    the conditional projectors (branches with outcome probability below
    PROB_FLOOR are reported as flagged, not failed).
    """
    if any(t.direction != A_TO_B for _, t in strategy.tests):
        raise ValueError("one-way validation requires every test to be a_to_b")
    omega = strategy.omega
    d = strategy.d
    dims = strategy.dims

    r_trace = float(np.max(np.abs(partial_trace(omega, dims, keep="a") - np.eye(d))))
    psi = state_vector(strategy.target)
    r_fix = abs(float(np.real(psi.conj() @ omega @ psi)) - 1.0)
    pt_min = float(np.linalg.eigvalsh(
        0.5 * (partial_transpose(omega, dims) + partial_transpose(omega, dims).conj().T)
    )[0])
    r_ppt = max(0.0, -pt_min)
    r_recv, flagged = _receiver_residual(strategy, tol)

    checks = {
        "trace_b_identity": CheckResult(r_trace <= tol, r_trace),
        "target_fixed": CheckResult(r_fix <= tol, r_fix),
        "ppt": CheckResult(pt_min >= -tol, r_ppt),
        "receiver_semi_optimal": CheckResult(r_recv <= tol, r_recv),
    }
    return ValidationReport(checks=checks, flagged_branches=flagged)


def validate_two_way(strategy: Strategy, tol: float = 1e-9) -> ValidationReport:
    """Diagnostics for a swap-symmetrized (two-way) strategy.

    Same receiver and overlap checks as the one-way validator, with the
    receiver-marginal condition replaced by swap invariance of Omega.
    """
    omega = strategy.omega
    d = strategy.d
    dims = strategy.dims

    s = swap_operator(d)
    r_swap = float(np.max(np.abs(omega - s @ omega @ s)))
    psi = state_vector(strategy.target)
    r_fix = abs(float(np.real(psi.conj() @ omega @ psi)) - 1.0)
    pt_min = float(np.linalg.eigvalsh(
        0.5 * (partial_transpose(omega, dims) + partial_transpose(omega, dims).conj().T)
    )[0])
    r_ppt = max(0.0, -pt_min)
    r_recv, flagged = _receiver_residual(strategy, tol)

    checks = {
        "swap_symmetric": CheckResult(r_swap <= tol, r_swap),
        "target_fixed": CheckResult(r_fix <= tol, r_fix),
        "ppt": CheckResult(pt_min >= -tol, r_ppt),
        "receiver_semi_optimal": CheckResult(r_recv <= tol, r_recv),
    }
    return ValidationReport(checks=checks, flagged_branches=flagged)


# ---------------------------------------------------------------------------
# JSON form of a strategy. Matrices are nested rows of [re, im] pairs. The
# phase_randomized marker is emitted only when set, so plain projective
# strategies serialize exactly as {prob, direction, sender_povm,
# receiver_pass} records.
# ---------------------------------------------------------------------------


def strategy_to_dict(strategy: Strategy) -> dict:
    tests = []
    for p, t in strategy.tests:
        entry = {
            "prob": float(p),
            "direction": t.direction,
            "sender_povm": [matrix_to_pairs(m) for m in t.sender_povm],
            "receiver_pass": [matrix_to_pairs(n) for n in t.receiver_pass],
        }
        if t.phase_randomized:
            entry["phase_randomized"] = True
        tests.append(entry)
    return {"target": state_to_dict(strategy.target), "tests": tests}


def strategy_from_dict(obj: dict) -> Strategy:
    if not isinstance(obj, dict) or "target" not in obj or "tests" not in obj:
        raise ValueError("strategy JSON needs 'target' and 'tests' fields")
    target = from_schmidt(obj["target"]["schmidt"])
    tests = []
    for entry in obj["tests"]:
        test = ConditionalTest(
            direction=entry["direction"],
            sender_povm=tuple(matrix_from_pairs(m) for m in entry["sender_povm"]),
            receiver_pass=tuple(matrix_from_pairs(n) for n in entry["receiver_pass"]),
            phase_randomized=bool(entry.get("phase_randomized", False)),
        )
        tests.append((float(entry["prob"]), test))
    return Strategy(target, tests)
