"""Bipartite pure states in Schmidt-canonical form, plus density operators.

The canonical target is |psi> = sum_i lam_i |i>|i> with lam_1 >= ... >=
lam_d > 0 and sum lam_i^2 = 1. Arbitrary pure-state amplitude matrices
are brought to this frame by ``schmidt_decompose``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import BipartiteDims, _as_dims, herm_norm_gap

DROP_TOL = 1e-12
# largest acceptable |sum lam^2 - 1| before renormalizing is refused;
# wide enough for hand-rounded inputs like [0.866, 0.5], narrow enough
# to reject squared weights or unnormalized vectors
NORM_GATE = 1e-2


@dataclass(frozen=True)
class SchmidtState:
    """Schmidt coefficients of a bipartite pure state, descending."""

    coeffs: tuple

    @property
    def d(self) -> int:
        return len(self.coeffs)

    @property
    def lam(self) -> np.ndarray:
        return np.array(self.coeffs)


def from_schmidt(values, drop_tol: float = DROP_TOL) -> SchmidtState:
    """Build a canonical SchmidtState from raw coefficients.

    Entries below drop_tol are dropped, the rest must be positive; the
    vector is sorted descending and renormalized provided its squared
    norm is within NORM_GATE of 1.
    """
    vals = np.asarray(values, dtype=float).ravel()
    vals = vals[vals > drop_tol]
    if vals.size == 0:
        raise ValueError("no Schmidt coefficients left after dropping near-zeros")
    sq = float(np.sum(vals**2))
    if abs(sq - 1.0) > NORM_GATE:
        raise ValueError(
            f"squared coefficients sum to {sq:.9f}; renormalization gate is {NORM_GATE:.0e}"
        )
    vals = np.sort(vals)[::-1] / np.sqrt(sq)
    return SchmidtState(tuple(float(v) for v in vals))


def schmidt_decompose(amplitudes: np.ndarray, drop_tol: float = DROP_TOL):
    """Schmidt decomposition of a pure-state amplitude matrix.

    amplitudes[i, j] is the coefficient of |i>_A |j>_B. Returns
    (state, u_a, u_b) with amplitudes ~= u_a @ diag(lam) @ u_b.T;
    the columns of u_a / u_b are the local Schmidt bases, truncated
    to the directions with coefficient > drop_tol.
    """
    a = np.asarray(amplitudes, dtype=complex)
    if a.ndim != 2:
        raise ValueError(f"amplitude matrix must be 2-D, got shape {a.shape}")
    u, s, vh = np.linalg.svd(a)
    r = int(np.sum(s > drop_tol))
    if r == 0:
        raise ValueError("amplitude matrix is numerically zero")
    recon = (u[:, :r] * s[:r]) @ vh[:r, :]
    err = float(np.linalg.norm(recon - a))
    if err > 1e-9:
        raise ValueError(f"SVD reconstruction residual {err:.3e} exceeds 1e-9")
    state = from_schmidt(s[:r])
    return state, u[:, :r], vh[:r, :].T


def state_vector(s: SchmidtState) -> np.ndarray:
    """The canonical ket sum_i lam_i |ii> as a length-d^2 complex array."""
    d = s.d
    vec = np.zeros(d * d, dtype=complex)
    vec[np.arange(d) * d + np.arange(d)] = s.coeffs
    return vec


class DensityOperator:
    """A validated density operator on a bipartite system."""

    def __init__(self, matrix: np.ndarray, dims):
        dims = _as_dims(dims)
        m = np.array(matrix, dtype=complex)
        n = dims.total
        if m.shape != (n, n):
            raise ValueError(f"density matrix must be {n}x{n}, got {m.shape}")
        gap = herm_norm_gap(m)
        if gap > 1e-9:
            raise ValueError(f"density matrix not Hermitian (relative gap {gap:.3e})")
        m = 0.5 * (m + m.conj().T)
        tr = float(np.real(np.trace(m)))
        if abs(tr - 1.0) > 1e-9:
            raise ValueError(f"density matrix trace {tr:.12f} is not 1")
        evals = np.linalg.eigvalsh(m)
        if evals[0] < -1e-9:
            raise ValueError(f"density matrix has negative eigenvalue {evals[0]:.3e}")
        m.flags.writeable = False
        self.matrix = m
        self.dims = dims

    @classmethod
    def from_vector(cls, vec: np.ndarray, dims) -> "DensityOperator":
        vec = np.asarray(vec, dtype=complex).ravel()
        return cls(np.outer(vec, vec.conj()), dims)


def density(s: SchmidtState) -> DensityOperator:
    """|psi><psi| of the canonical target as a DensityOperator."""
    return DensityOperator.from_vector(state_vector(s), BipartiteDims(s.d, s.d))


def fidelity(s: SchmidtState, sigma: DensityOperator) -> float:
    """<psi|sigma|psi> for the canonical target, clamped into [0, 1]."""
    if sigma.dims.dim_a != s.d or sigma.dims.dim_b != s.d:
        raise ValueError(
            f"dimension mismatch: state d={s.d}, sigma dims {sigma.dims}"
        )
    psi = state_vector(s)
    f = float(np.real(psi.conj() @ sigma.matrix @ psi))
    if f < -1e-9 or f > 1.0 + 1e-9:
        raise ValueError(f"fidelity {f} outside [0, 1] beyond tolerance")
    return min(max(f, 0.0), 1.0)


# ---------------------------------------------------------------------------
# JSON forms. A state is {"schmidt": [l1, ...]} or {"amplitudes": rows} with
# complex entries spelled as [re, im] pairs, rows indexed by the A system.
# ---------------------------------------------------------------------------


def matrix_to_pairs(m: np.ndarray):
    m = np.asarray(m, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in m]


def matrix_from_pairs(rows) -> np.ndarray:
    arr = np.asarray(rows, dtype=float)
    if arr.ndim != 3 or arr.shape[2] != 2:
        raise ValueError("complex matrix JSON must be rows of [re, im] pairs")
    return arr[..., 0] + 1j * arr[..., 1]


def state_to_dict(s: SchmidtState) -> dict:
    return {"schmidt": [float(v) for v in s.coeffs]}


def state_from_dict(obj: dict) -> SchmidtState:
    if not isinstance(obj, dict):
        raise ValueError("state JSON must be an object")
    if "schmidt" in obj:
        return from_schmidt(obj["schmidt"])
    if "amplitudes" in obj:
        state, _, _ = schmidt_decompose(matrix_from_pairs(obj["amplitudes"]))
        return state
    raise ValueError("state JSON needs a 'schmidt' or 'amplitudes' field")
