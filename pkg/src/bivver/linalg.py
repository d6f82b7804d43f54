"""Dense linear-algebra helpers for bipartite operators.

Operators act on C^dA (x) C^dB with row-major index packing: the basis
ket |i>|j> sits at flat index i*dB + j. Everything is dense numpy; the
intended regime is dA, dB <= ~16.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# relative Frobenius tolerance for treating an input as Hermitian
HERM_TOL = 1e-9


@dataclass(frozen=True)
class BipartiteDims:
    """Local dimensions (dim_a, dim_b) of a bipartite system."""

    dim_a: int
    dim_b: int

    def __post_init__(self):
        if self.dim_a < 1 or self.dim_b < 1:
            raise ValueError(
                f"local dimensions must be >= 1, got ({self.dim_a}, {self.dim_b})"
            )

    @property
    def total(self) -> int:
        return self.dim_a * self.dim_b


def _as_dims(dims) -> BipartiteDims:
    if isinstance(dims, BipartiteDims):
        return dims
    da, db = dims
    return BipartiteDims(int(da), int(db))


def _check_square(m: np.ndarray, n: int, name: str = "matrix") -> np.ndarray:
    m = np.asarray(m)
    if m.ndim != 2 or m.shape != (n, n):
        raise ValueError(f"{name} must be {n}x{n}, got shape {m.shape}")
    return m


def kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product with the A factor on the left (slow index)."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.ndim != 2 or b.ndim != 2:
        raise ValueError("kron expects two 2-D arrays")
    return np.kron(a, b)


def partial_trace(m: np.ndarray, dims, keep: str) -> np.ndarray:
    """Trace out one subsystem of a dA*dB square operator.

    keep="a" returns Tr_B(m) (dA x dA), keep="b" returns Tr_A(m).
    """
    d = _as_dims(dims)
    m = _check_square(m, d.total)
    t = m.reshape(d.dim_a, d.dim_b, d.dim_a, d.dim_b)
    if keep == "a":
        return np.einsum("ijkj->ik", t)
    if keep == "b":
        return np.einsum("ijil->jl", t)
    raise ValueError(f"keep must be 'a' or 'b', got {keep!r}")


def partial_transpose(m: np.ndarray, dims, which: str = "b") -> np.ndarray:
    """Transpose one tensor factor of a dA*dB square operator."""
    d = _as_dims(dims)
    m = _check_square(m, d.total)
    t = m.reshape(d.dim_a, d.dim_b, d.dim_a, d.dim_b)
    if which == "b":
        t = t.transpose(0, 3, 2, 1)
    elif which == "a":
        t = t.transpose(2, 1, 0, 3)
    else:
        raise ValueError(f"which must be 'a' or 'b', got {which!r}")
    return t.reshape(d.total, d.total)


def herm_norm_gap(m: np.ndarray) -> float:
    """Relative Frobenius distance of m from its Hermitian part."""
    m = np.asarray(m)
    scale = max(1.0, float(np.linalg.norm(m)))
    return float(np.linalg.norm(m - m.conj().T)) / scale


def herm_eig(m: np.ndarray, tol: float = HERM_TOL):
    """Eigendecomposition of a Hermitian matrix.

    The input is checked against tol (relative Frobenius) and symmetrized
    before the solve, so eigenvalues come out real and ascending with
    orthonormal eigenvectors in the columns.
    """
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"herm_eig expects a square matrix, got shape {m.shape}")
    gap = herm_norm_gap(m)
    if gap > tol:
        raise ValueError(f"matrix is not Hermitian (relative gap {gap:.3e} > {tol:.1e})")
    sym = 0.5 * (m + m.conj().T)
    vals, vecs = np.linalg.eigh(sym)
    return vals, vecs


def swap_operator(d: int) -> np.ndarray:
    """Permutation S with S|i>|j> = |j>|i> on C^d (x) C^d."""
    if d < 1:
        raise ValueError(f"dimension must be >= 1, got {d}")
    s = np.zeros((d * d, d * d))
    idx = np.arange(d * d)
    i, j = np.divmod(idx, d)
    s[idx, j * d + i] = 1.0
    return s
