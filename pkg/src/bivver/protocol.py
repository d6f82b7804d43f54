"""Sample-complexity bounds and Monte Carlo runs of verification protocols.

Conventions: a protocol consumes copies of a prepared state sigma; each
copy runs one randomly chosen conditional test. In stop-on-fail mode a
run rejects at the first failed copy, in frequency mode all copies are
tested and failures tallied. A copy passes with probability Tr(Omega
sigma) marginally, so for infidelity-epsilon worst-case states the
acceptance probability after n copies is (1 - epsilon v)^n.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .linalg import partial_trace
from .states import DensityOperator, SchmidtState, state_vector
from .strategy import A_TO_B, Strategy, spectral_gap

FREQUENCY = "frequency"
STOP_ON_FAIL = "stop_on_fail"

_CLAMP = 1e-12


def kl_divergence(x: float, y: float) -> float:
    """Binary relative entropy D(x || y) in nats, with 0 log 0 = 0."""
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"x must lie in [0, 1], got {x}")
    if not 0.0 < y < 1.0:
        raise ValueError(f"y must lie strictly inside (0, 1), got {y}")
    total = 0.0
    if x > 0.0:
        total += x * math.log(x / y)
    if x < 1.0:
        total += (1.0 - x) * math.log((1.0 - x) / (1.0 - y))
    return total


def _check_eps_v(v: float, epsilon: float):
    if not 0.0 <= v <= 1.0:
        raise ValueError(f"v must lie in [0, 1], got {v}")
    if not 0.0 < epsilon <= 1.0:
        raise ValueError(f"epsilon must lie in (0, 1], got {epsilon}")


def confidence_iid(v: float, epsilon: float, n: int) -> float:
    """Acceptance probability (1 - epsilon v)^n of a worst-case state,
    evaluated in log space."""
    _check_eps_v(v, epsilon)
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    ev = epsilon * v
    if ev >= 1.0:
        return 0.0
    return math.exp(n * math.log1p(-ev))


def copies_needed(v: float, epsilon: float, delta: float) -> int:
    """Smallest n >= 1 with (1 - epsilon v)^n <= delta."""
    _check_eps_v(v, epsilon)
    if v == 0.0:
        raise ValueError("v = 0 cannot reach any confidence level")
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie strictly inside (0, 1), got {delta}")
    ev = epsilon * v
    if ev >= 1.0:
        return 1
    ratio = math.log(delta) / math.log1p(-ev)
    n = max(1, math.ceil(ratio - 1e-12))
    while confidence_iid(v, epsilon, n) > delta:
        n += 1
    return n


def chernoff_confidence(f: float, v: float, epsilon: float, n: int) -> float:
    """Confidence bound exp(-n D(f || 1 - epsilon v)) for frequency-mode
    acceptance at observed pass fraction f; requires f > 1 - epsilon v."""
    _check_eps_v(v, epsilon)
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    y = 1.0 - epsilon * v
    if not f > y:
        raise ValueError(f"observed pass fraction {f} must exceed 1 - epsilon v = {y}")
    if not f <= 1.0:
        raise ValueError(f"pass fraction must lie in (1 - epsilon v, 1], got {f}")
    if y <= 0.0:
        return 0.0
    if f == 1.0:
        return math.exp(n * math.log(y))
    return math.exp(-n * kl_divergence(f, y))


def worst_case_state(strategy_or_omega, target: SchmidtState | None = None,
                     epsilon: float = 0.0) -> DensityOperator:
    """The infidelity-epsilon pure state minimizing detection.

    Mixes the target with the dominant orthocomplement eigenvector of
    the pass operator, giving Tr(Omega sigma) = 1 - epsilon v exactly.
    """
    if isinstance(strategy_or_omega, Strategy):
        omega = strategy_or_omega.omega
        if target is None:
            target = strategy_or_omega.target
    else:
        omega = np.asarray(strategy_or_omega)
        if target is None:
            raise ValueError("target state required when passing a bare operator")
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError(f"epsilon must lie in [0, 1], got {epsilon}")
    gap = spectral_gap(omega, target)
    psi = state_vector(target)
    chi = math.sqrt(1.0 - epsilon) * psi + math.sqrt(epsilon) * gap.top_vector
    return DensityOperator.from_vector(chi, (target.d, target.d))


# ---------------------------------------------------------------------------
# Monte Carlo
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SimReport:
    """Aggregated simulation outcome.

    In frequency mode the unit is a copy (trials = runs * copies); in
    stop-on-fail mode the unit is a run (passes counts fully accepting
    runs). empirical_fail_rate = 1 - passes/trials in both conventions,
    and analytic_rate is its exact expectation.
    """

    trials: int
    passes: int
    per_setting_counts: tuple
    empirical_fail_rate: float
    analytic_rate: float
    seed: int
    mode: str
    copies: int


def report_to_dict(report: SimReport) -> dict:
    return {
        "trials": int(report.trials),
        "passes": int(report.passes),
        "per_setting_counts": [int(c) for c in report.per_setting_counts],
        "empirical_fail_rate": float(report.empirical_fail_rate),
        "analytic_rate": float(report.analytic_rate),
        "seed": int(report.seed),
        "mode": report.mode,
        "copies": int(report.copies),
    }


def _clamp_prob(p: float, what: str) -> float:
    if p < -_CLAMP or p > 1.0 + _CLAMP:
        raise ValueError(f"{what} probability {p!r} is outside [0, 1] beyond tolerance")
    return min(max(p, 0.0), 1.0)


def _joint_pass(sender_op, receiver_op, direction, sigma4):
    if direction == A_TO_B:
        val = np.einsum("ik,jl,klij->", sender_op, receiver_op, sigma4)
    else:
        val = np.einsum("ik,jl,klij->", receiver_op, sender_op, sigma4)
    return float(np.real(val))


def _static_tables(strategy: Strategy, sigma: DensityOperator):
    """Outcome distributions and conditional pass probabilities for every
    test that is not phase randomized."""
    d = strategy.d
    rho_a = partial_trace(sigma.matrix, sigma.dims, keep="a")
    rho_b = partial_trace(sigma.matrix, sigma.dims, keep="b")
    sigma4 = sigma.matrix.reshape(d, d, d, d)
    n_tests = len(strategy.tests)
    max_out = max(t.n_outcomes for _, t in strategy.tests)
    cum = np.ones((n_tests, max_out))
    cond = np.zeros((n_tests, max_out))
    n_out = np.zeros(n_tests, dtype=int)
    for t_idx, (_, test) in enumerate(strategy.tests):
        n_out[t_idx] = test.n_outcomes
        if test.phase_randomized:
            continue
        marginal = rho_a if test.direction == A_TO_B else rho_b
        q = np.empty(test.n_outcomes)
        c = np.zeros(test.n_outcomes)
        for a, (m, n) in enumerate(zip(test.sender_povm, test.receiver_pass)):
            qa = _clamp_prob(float(np.real(np.trace(m @ marginal))), "sender outcome")
            q[a] = qa
            if qa > 0.0:
                j = _clamp_prob(_joint_pass(m, n, test.direction, sigma4), "joint pass")
                c[a] = _clamp_prob(min(j, qa) / qa, "conditional pass")
        cum[t_idx, : test.n_outcomes] = np.cumsum(q)
        cum[t_idx, test.n_outcomes - 1] = max(cum[t_idx, test.n_outcomes - 1], 1.0)
        cond[t_idx, : test.n_outcomes] = c
    return cum, cond, n_out, rho_a, rho_b, sigma4


def _run_randomized(test, u1, u2, phase_row, rho_a, rho_b, sigma4):
    """One copy of a phase-randomized test under sampled phases."""
    pv = 1j ** phase_row
    if test.direction == A_TO_B:
        marginal = rho_a
        rot_sender = lambda m: pv[:, None] * m * pv.conj()[None, :]
        rot_receiver = lambda n: pv.conj()[:, None] * n * pv[None, :]
    else:
        marginal = rho_b
        rot_sender = lambda m: pv.conj()[:, None] * m * pv[None, :]
        rot_receiver = lambda n: pv[:, None] * n * pv.conj()[None, :]
    q = np.empty(test.n_outcomes)
    rotated = []
    for a, m in enumerate(test.sender_povm):
        mr = rot_sender(m)
        rotated.append(mr)
        q[a] = _clamp_prob(float(np.real(np.trace(mr @ marginal))), "sender outcome")
    cum = np.cumsum(q)
    cum[-1] = max(cum[-1], 1.0)
    a = int(np.searchsorted(cum, u1, side="right"))
    a = min(a, test.n_outcomes - 1)
    if q[a] <= 0.0:
        return a, False
    nr = rot_receiver(test.receiver_pass[a])
    j = _clamp_prob(_joint_pass(rotated[a], nr, test.direction, sigma4), "joint pass")
    c = _clamp_prob(min(j, q[a]) / q[a], "conditional pass")
    return a, bool(u2 < c)


def simulate(strategy: Strategy, sigma: DensityOperator, copies: int, seed: int,
             mode: str = STOP_ON_FAIL, trials: int = 1) -> SimReport:
    """Monte Carlo protocol runs, deterministic for a given seed.

    Copy number k (counted across runs) always consumes row k of the
    pre-drawn counter-based random table, so results are independent of
    evaluation order and of how runs are split across workers.
    """
    mode = mode.replace("-", "_")
    if mode not in (FREQUENCY, STOP_ON_FAIL):
        raise ValueError(f"mode must be '{FREQUENCY}' or '{STOP_ON_FAIL}', got {mode!r}")
    if copies < 1 or trials < 1:
        raise ValueError("copies and trials must both be >= 1")
    if sigma.dims.dim_a != strategy.d or sigma.dims.dim_b != strategy.d:
        raise ValueError("sigma dimensions do not match the strategy")
    seed = int(seed)
    if seed < 0:
        raise ValueError("seed must be a nonnegative integer")

    d = strategy.d
    n_tests = len(strategy.tests)
    probs = np.array([p for p, _ in strategy.tests])
    test_cum = np.cumsum(probs)
    test_cum[-1] = max(test_cum[-1], 1.0)

    total = trials * copies
    rng = np.random.Generator(np.random.Philox(key=np.uint64(seed)))
    u = rng.random((total, 3))
    randomized = np.array([t.phase_randomized for _, t in strategy.tests])
    phase_rows = rng.integers(0, 4, size=(total, d)) if randomized.any() else None

    test_idx = np.minimum(
        np.searchsorted(test_cum, u[:, 0], side="right"), n_tests - 1
    )
    cum, cond, n_out, rho_a, rho_b, sigma4 = _static_tables(strategy, sigma)

    outcome = np.zeros(total, dtype=int)
    passed = np.zeros(total, dtype=bool)

    static_mask = ~randomized[test_idx]
    if static_mask.any():
        rows = test_idx[static_mask]
        uu = u[static_mask, 1]
        idx = (cum[rows] <= uu[:, None]).sum(axis=1)
        idx = np.minimum(idx, n_out[rows] - 1)
        outcome[static_mask] = idx
        passed[static_mask] = u[static_mask, 2] < cond[rows, idx]
    for k in np.nonzero(~static_mask)[0]:
        test = strategy.tests[test_idx[k]][1]
        a, ok = _run_randomized(
            test, u[k, 1], u[k, 2], phase_rows[k], rho_a, rho_b, sigma4
        )
        outcome[k] = a
        passed[k] = ok

    pass_prob = _clamp_prob(
        float(np.real(np.trace(strategy.omega @ sigma.matrix))), "per-copy pass"
    )

    if mode == FREQUENCY:
        counts = np.bincount(test_idx, minlength=n_tests)
        n_passes = int(passed.sum())
        return SimReport(
            trials=total,
            passes=n_passes,
            per_setting_counts=tuple(int(c) for c in counts),
            empirical_fail_rate=1.0 - n_passes / total,
            analytic_rate=1.0 - pass_prob,
            seed=seed,
            mode=mode,
            copies=copies,
        )

    run_pass = passed.reshape(trials, copies)
    fail = ~run_pass
    any_fail = fail.any(axis=1)
    first = np.where(any_fail, fail.argmax(axis=1), copies - 1)
    consumed = np.where(any_fail, first + 1, copies)
    col = np.arange(copies)[None, :]
    used = (col < consumed[:, None]).ravel()
    counts = np.bincount(test_idx[used], minlength=n_tests)
    accepted = int((~any_fail).sum())
    analytic_accept = math.exp(copies * math.log(pass_prob)) if pass_prob > 0.0 else 0.0
    return SimReport(
        trials=trials,
        passes=accepted,
        per_setting_counts=tuple(int(c) for c in counts),
        empirical_fail_rate=1.0 - accepted / trials,
        analytic_rate=1.0 - analytic_accept,
        seed=seed,
        mode=mode,
        copies=copies,
    )
