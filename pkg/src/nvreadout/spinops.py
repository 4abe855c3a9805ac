"""Operator algebra for the electron (spin-1) and nitrogen nuclear (spin-1) system.

Basis ordering is fixed throughout the package: spin projections are
ordered ``(+1, 0, -1)`` for both the electron and the nucleus, and tensor
products always place the electron (or orbital/electron) factor on the left
and the nucleus on the right.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np

HERM_TOL = 1e-9


def spin1_operators() -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return ``(Sx, Sy, Sz)`` for spin 1 in the ``(+1, 0, -1)`` basis (hbar = 1)."""
    s = 1.0 / np.sqrt(2.0)
    sx = s * np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=complex)
    sy = s * np.array([[0, -1j, 0], [1j, 0, -1j], [0, 1j, 0]], dtype=complex)
    sz = np.diag([1.0, 0.0, -1.0]).astype(complex)
    return sx, sy, sz


def ladder_operators() -> tuple[np.ndarray, np.ndarray]:
    """Return ``(S+, S-)`` for spin 1."""
    sx, sy, _ = spin1_operators()
    return sx + 1j * sy, sx - 1j * sy


def gellmann_basis() -> list[np.ndarray]:
    """The eight Gell-Mann matrices, ``lambda_1 .. lambda_8`` in conventional order."""
    l1 = np.array([[0, 1, 0], [1, 0, 0], [0, 0, 0]], dtype=complex)
    l2 = np.array([[0, -1j, 0], [1j, 0, 0], [0, 0, 0]], dtype=complex)
    l3 = np.array([[1, 0, 0], [0, -1, 0], [0, 0, 0]], dtype=complex)
    l4 = np.array([[0, 0, 1], [0, 0, 0], [1, 0, 0]], dtype=complex)
    l5 = np.array([[0, 0, -1j], [0, 0, 0], [1j, 0, 0]], dtype=complex)
    l6 = np.array([[0, 0, 0], [0, 0, 1], [0, 1, 0]], dtype=complex)
    l7 = np.array([[0, 0, 0], [0, 0, -1j], [0, 1j, 0]], dtype=complex)
    l8 = np.diag([1, 1, -2]).astype(complex) / np.sqrt(3.0)
    return [l1, l2, l3, l4, l5, l6, l7, l8]


def gellmann_expectations(rho: np.ndarray) -> np.ndarray:
    """Real expectation values ``Tr[rho lambda_i]`` for the eight Gell-Mann matrices."""
    return np.array([np.real(np.trace(rho @ lam)) for lam in gellmann_basis()])


def rho_from_gellmann(expectations: Sequence[float]) -> np.ndarray:
    """Assemble a qutrit operator ``I/3 + sum_i <lambda_i> lambda_i / 2``."""
    rho = np.eye(3, dtype=complex) / 3.0
    for value, lam in zip(expectations, gellmann_basis(), strict=True):
        rho = rho + 0.5 * value * lam
    return rho


def kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Tensor product with ``a`` as the left (electron) factor."""
    return np.kron(np.asarray(a), np.asarray(b))


def partial_trace(rho: np.ndarray, keep: int | Sequence[int], dims: Sequence[int]) -> np.ndarray:
    """Reduce ``rho`` onto the subsystems listed in ``keep``.

    ``dims`` lists the subsystem dimensions in tensor-product order. ``keep``
    is a single subsystem index or a sequence of them.
    """
    rho = np.asarray(rho)
    dims = [int(d) for d in dims]
    n = int(np.prod(dims))
    if rho.shape != (n, n):
        raise ValueError(f"state of shape {rho.shape} does not match subsystem dims {dims}")
    keep = [keep] if isinstance(keep, (int, np.integer)) else sorted(int(k) for k in keep)
    if any(k < 0 or k >= len(dims) for k in keep):
        raise ValueError(f"subsystem index out of range: {keep}")
    nsub = len(dims)
    t = rho.reshape(dims + dims)
    traced = [i for i in range(nsub) if i not in keep]
    # Trace the highest index first so remaining axis numbers stay valid.
    for count, i in enumerate(sorted(traced, reverse=True)):
        remaining = nsub - count
        t = np.trace(t, axis1=i, axis2=i + remaining)
    dk = int(np.prod([dims[k] for k in keep])) if keep else 1
    return t.reshape(dk, dk)


def is_hermitian(m: np.ndarray, tol: float = HERM_TOL) -> bool:
    m = np.asarray(m)
    return m.shape[0] == m.shape[1] and bool(np.max(np.abs(m - m.conj().T), initial=0.0) <= tol)


def herm_eigh(m: np.ndarray, tol: float = HERM_TOL) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a Hermitian matrix after symmetrization."""
    m = np.asarray(m, dtype=complex)
    if not is_hermitian(m, tol):
        raise ValueError("matrix is not Hermitian within tolerance")
    return np.linalg.eigh(0.5 * (m + m.conj().T))


def herm_function(m: np.ndarray, func, tol: float = HERM_TOL) -> np.ndarray:
    """Apply a scalar function to a Hermitian matrix through its eigenvalues."""
    w, v = herm_eigh(m, tol)
    return (v * func(w)) @ v.conj().T


def herm_sqrt(m: np.ndarray, tol: float = HERM_TOL) -> np.ndarray:
    """Principal square root of a Hermitian PSD matrix; negative eigenvalues are clipped."""
    return herm_function(m, lambda w: np.sqrt(np.clip(w, 0.0, None)), tol)


def herm_expm(m: np.ndarray, scale: complex = 1.0, tol: float = HERM_TOL) -> np.ndarray:
    """``exp(scale * m)`` for Hermitian ``m`` (e.g. ``scale=-1j*t`` for a unitary)."""
    return herm_function(m, lambda w: np.exp(scale * w), tol)


def is_density_matrix(rho: np.ndarray, herm_tol: float = 1e-10, trace_tol: float = 1e-9,
                      eig_tol: float = 1e-9) -> bool:
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        return False
    if not is_hermitian(rho, herm_tol):
        return False
    if abs(np.trace(rho) - 1.0) > trace_tol:
        return False
    return bool(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min() >= -eig_tol)


def projector(dim: int, index: int) -> np.ndarray:
    p = np.zeros((dim, dim), dtype=complex)
    p[index, index] = 1.0
    return p


def ket(dim: int, index: int) -> np.ndarray:
    v = np.zeros(dim, dtype=complex)
    v[index] = 1.0
    return v
