"""Dense complex linear algebra primitives.

Pauli convention used across the package:

    index 0: identity          sigma_0 = I
    index 1: sigma_x           [[0, 1], [1, 0]]
    index 2: sigma_y           [[0, -i], [i, 0]]
    index 3: sigma_z           [[1, 0], [0, -1]]

computational basis ordered |0>, |1>; subsystem order is A (x) B (x) C with
Alice's qubit first.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import reduce

import numpy as np

from .config import TOL


class LinalgError(Exception):
    pass


class NotHermitian(LinalgError):
    pass


class DimensionMismatch(LinalgError):
    pass


SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
IDENTITY_2 = np.eye(2, dtype=complex)
PAULI = (IDENTITY_2, SIGMA_X, SIGMA_Y, SIGMA_Z)
for _m in PAULI:
    _m.setflags(write=False)


def kron(*matrices: np.ndarray) -> np.ndarray:
    """Kronecker product of one or more matrices, left to right."""
    if not matrices:
        raise DimensionMismatch("kron needs at least one matrix")
    return reduce(np.kron, matrices)


def dagger(a: np.ndarray) -> np.ndarray:
    """Conjugate transpose."""
    return np.asarray(a).conj().T


def frobenius(a: np.ndarray) -> float:
    return float(np.linalg.norm(np.asarray(a)))


def is_hermitian(a: np.ndarray, tol: float = TOL.hermiticity) -> bool:
    a = np.asarray(a)
    return a.shape[0] == a.shape[1] and np.abs(a - a.conj().T).max() <= tol


@dataclass(frozen=True)
class HermitianEigenResult:
    """Ascending eigenvalues with orthonormal eigenvector columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def hermitian_eigen(a: np.ndarray, tol: float = TOL.hermiticity,
                    max_sweeps: int = 60) -> HermitianEigenResult:
    """Eigendecomposition of a Hermitian matrix by cyclic Jacobi rotations.

    Each rotation zeroes one off-diagonal pair with a complex Givens
    rotation; sweeps repeat until the off-diagonal mass is at rounding
    level.  Intended for the small (<= 16) dimensions used here, where the
    high relative accuracy of Jacobi is worth the extra sweeps.
    """
    a = np.asarray(a, dtype=complex)
    n = a.shape[0]
    if a.ndim != 2 or a.shape[1] != n:
        raise DimensionMismatch(f"expected a square matrix, got {a.shape}")
    asym = np.abs(a - a.conj().T).max()
    if asym > tol:
        raise NotHermitian(f"asymmetry {asym:.3e} exceeds {tol:.1e}")
    if n > 16:
        raise DimensionMismatch("hermitian_eigen is limited to dimension 16")

    A = 0.5 * (a + a.conj().T)
    V = np.eye(n, dtype=complex)
    scale = max(1.0, float(np.linalg.norm(A)))
    stop = 1e-14 * scale

    for _ in range(max_sweeps):
        off = math.sqrt(max(0.0, float(np.sum(np.abs(np.triu(A, 1)) ** 2))))
        if off <= stop:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                g = abs(apq)
                if g <= stop / n:
                    continue
                phase = apq / g
                app = A[p, p].real
                aqq = A[q, q].real
                tau = (aqq - app) / (2.0 * g)
                if tau >= 0:
                    t = 1.0 / (tau + math.sqrt(1.0 + tau * tau))
                else:
                    t = -1.0 / (-tau + math.sqrt(1.0 + tau * tau))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = t * c
                # columns of the rotation: [c, s; -s conj(phase), c conj(phase)]
                sp = s * phase.conjugate()
                cp = c * phase.conjugate()
                colp = c * A[:, p] - sp * A[:, q]
                colq = s * A[:, p] + cp * A[:, q]
                A[:, p], A[:, q] = colp, colq
                rowp = c * A[p, :] - sp.conjugate() * A[q, :]
                rowq = s * A[p, :] + cp.conjugate() * A[q, :]
                A[p, :], A[q, :] = rowp, rowq
                A[p, q] = 0.0
                A[q, p] = 0.0
                vp = c * V[:, p] - sp * V[:, q]
                vq = s * V[:, p] + cp * V[:, q]
                V[:, p], V[:, q] = vp, vq

    w = A.diagonal().real.copy()
    order = np.argsort(w, kind="stable")
    w = w[order]
    V = V[:, order]
    w.setflags(write=False)
    V.setflags(write=False)
    return HermitianEigenResult(eigenvalues=w, eigenvectors=V)


def _check_dims(a: np.ndarray, dims) -> tuple:
    dims = tuple(int(d) for d in dims)
    total = int(np.prod(dims))
    if a.ndim != 2 or a.shape != (total, total):
        raise DimensionMismatch(
            f"matrix shape {a.shape} incompatible with subsystem dims {dims}")
    return dims


def partial_trace(a: np.ndarray, dims, keep) -> np.ndarray:
    """Trace out every subsystem not listed in `keep` (indices into dims)."""
    a = np.asarray(a, dtype=complex)
    dims = _check_dims(a, dims)
    keep = sorted(set(int(k) for k in keep))
    if not keep or any(k < 0 or k >= len(dims) for k in keep):
        raise DimensionMismatch(f"invalid keep set {keep} for {len(dims)} subsystems")
    n = len(dims)
    t = a.reshape(dims + dims)
    removed = 0
    for idx in range(n - 1, -1, -1):
        if idx in keep:
            continue
        t = np.trace(t, axis1=idx, axis2=idx + n - removed)
        removed += 1
    d = int(np.prod([dims[k] for k in keep]))
    return t.reshape(d, d)


def partial_transpose(a: np.ndarray, dims, subsystem: int) -> np.ndarray:
    """Transpose a single tensor factor."""
    a = np.asarray(a, dtype=complex)
    dims = _check_dims(a, dims)
    n = len(dims)
    if not 0 <= subsystem < n:
        raise DimensionMismatch(f"subsystem {subsystem} out of range for {n} factors")
    t = a.reshape(dims + dims)
    perm = list(range(2 * n))
    perm[subsystem], perm[subsystem + n] = perm[subsystem + n], perm[subsystem]
    d = a.shape[0]
    return t.transpose(perm).reshape(d, d)
