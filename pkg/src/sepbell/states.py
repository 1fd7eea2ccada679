"""The three-qubit state family, its reference instance and the Pauli
correlation-tensor representation.

The family is a mixture of |0><0| (x) |psi_0><psi_0| with weight p0 and
|1><1| (x) (p1 |psi_1><psi_1| + p2 |psi_2><psi_2|), where psi_0 is
partially entangled, psi_1 is a product state and psi_2 is maximally
entangled.  All states are biseparable across the A|BC cut by construction.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np

from .config import TOL
from .linalg import (DimensionMismatch, PAULI, hermitian_eigen, is_hermitian,
                     kron, partial_trace)


class InvalidProbabilities(ValueError):
    pass


KET_0 = np.array([1.0, 0.0], dtype=complex)
KET_1 = np.array([0.0, 1.0], dtype=complex)


@dataclass(frozen=True)
class FamilyParameters:
    p0: float
    p1: float
    p2: float
    alpha: float
    beta: float
    gamma: float
    delta: float

    def validate(self) -> None:
        probs = (self.p0, self.p1, self.p2)
        if min(probs) < 0.0:
            raise InvalidProbabilities(f"negative weight in {probs}")
        if abs(sum(probs) - 1.0) > TOL.probability_sum:
            raise InvalidProbabilities(f"weights {probs} sum to {sum(probs)!r}")


# Reference constants, stored to exactly the six published decimals.  All
# downstream six-decimal targets inherit this truncation.
REFERENCE_PARAMETERS = FamilyParameters(
    p0=0.759101, p1=0.015596, p2=0.225303,
    alpha=0.093586, beta=1.228106, gamma=1.063034, delta=0.050725,
)


@dataclass(frozen=True)
class DensityMatrix:
    """Hermitian, unit-trace, PSD operator together with its factor dims."""

    matrix: np.ndarray
    dims: tuple

    @classmethod
    def create(cls, matrix: np.ndarray, dims, check_psd: bool = True) -> "DensityMatrix":
        m = np.asarray(matrix, dtype=complex)
        dims = tuple(int(d) for d in dims)
        if m.shape != (int(np.prod(dims)),) * 2:
            raise DimensionMismatch(f"shape {m.shape} does not match dims {dims}")
        if not is_hermitian(m):
            raise ValueError("density matrix is not Hermitian within tolerance")
        tr = complex(np.trace(m))
        if abs(tr - 1.0) > TOL.trace:
            raise ValueError(f"trace {tr} differs from 1")
        if check_psd:
            w = hermitian_eigen(m).eigenvalues
            if w[0] < -TOL.density_psd:
                raise ValueError(f"negative eigenvalue {w[0]:.3e}")
        m = m.copy()
        m.setflags(write=False)
        return cls(matrix=m, dims=dims)

    @property
    def n_subsystems(self) -> int:
        return len(self.dims)

    def marginal(self, keep) -> "DensityMatrix":
        keep = sorted(set(keep))
        reduced = partial_trace(self.matrix, self.dims, keep)
        return DensityMatrix.create(reduced, tuple(self.dims[k] for k in keep),
                                    check_psd=False)

    def expectation(self, operator: np.ndarray) -> float:
        return float(np.trace(self.matrix @ operator).real)

    def eigenvalues(self) -> np.ndarray:
        return hermitian_eigen(self.matrix).eigenvalues


def family_kets(params: FamilyParameters):
    """The two-qubit pure states (psi_0, psi_1, psi_2) of the family."""
    a, b, g, d = params.alpha, params.beta, params.gamma, params.delta
    psi0 = math.cos(a) * kron_vec(KET_0, KET_0) + math.sin(a) * kron_vec(KET_1, KET_1)
    psi1 = kron_vec(math.cos(b) * KET_0 + math.sin(b) * KET_1,
                    math.cos(g) * KET_0 + math.sin(g) * KET_1)
    psi2 = (math.sin(d) * kron_vec(KET_0, KET_0)
            + math.cos(d) * kron_vec(KET_0, KET_1)
            + math.cos(d) * kron_vec(KET_1, KET_0)
            - math.sin(d) * kron_vec(KET_1, KET_1)) / math.sqrt(2.0)
    return psi0, psi1, psi2


def kron_vec(*vecs: np.ndarray) -> np.ndarray:
    out = vecs[0]
    for v in vecs[1:]:
        out = np.kron(out, v)
    return out


def projector(vec: np.ndarray) -> np.ndarray:
    return np.outer(vec, vec.conj())


def family_matrix(params: FamilyParameters) -> np.ndarray:
    """Raw 8x8 matrix of the family state (no invariant checks)."""
    psi0, psi1, psi2 = family_kets(params)
    return (params.p0 * kron(projector(KET_0), projector(psi0))
            + kron(projector(KET_1),
                   params.p1 * projector(psi1) + params.p2 * projector(psi2)))


def build_family_state(params: FamilyParameters) -> DensityMatrix:
    params.validate()
    # PSD holds by construction (explicit pure-state mixture), so skip the
    # eigenvalue check on the hot path.
    return DensityMatrix.create(family_matrix(params), (2, 2, 2), check_psd=False)


@lru_cache(maxsize=1)
def reference_state() -> DensityMatrix:
    return build_family_state(REFERENCE_PARAMETERS)


def ghz_state() -> DensityMatrix:
    vec = (kron_vec(KET_0, KET_0, KET_0) + kron_vec(KET_1, KET_1, KET_1)) / math.sqrt(2.0)
    return DensityMatrix.create(projector(vec), (2, 2, 2), check_psd=False)


def product_state(bits: str) -> DensityMatrix:
    if len(bits) != 3 or any(b not in "01" for b in bits):
        raise ValueError(f"expected three bits, got {bits!r}")
    vec = kron_vec(*(KET_1 if b == "1" else KET_0 for b in bits))
    return DensityMatrix.create(projector(vec), (2, 2, 2), check_psd=False)


@lru_cache(maxsize=1)
def _pauli_basis_3() -> np.ndarray:
    basis = np.empty((4, 4, 4, 8, 8), dtype=complex)
    for i in range(4):
        for j in range(4):
            for k in range(4):
                basis[i, j, k] = kron(PAULI[i], PAULI[j], PAULI[k])
    basis.setflags(write=False)
    return basis


def correlation_tensor(rho: DensityMatrix) -> np.ndarray:
    """All 64 Pauli expectation values T[i1, i2, i3] of a three-qubit state."""
    if rho.dims != (2, 2, 2):
        raise DimensionMismatch(f"need a three-qubit state, got dims {rho.dims}")
    T = np.einsum("ijkab,ba->ijk", _pauli_basis_3(), rho.matrix).real
    return T


def state_from_tensor(T: np.ndarray) -> np.ndarray:
    """Hermitian unit-trace matrix reconstructed from a correlation tensor.

    Positivity is deliberately not checked; callers that need a state run
    the DensityMatrix invariants themselves.
    """
    T = np.asarray(T, dtype=float)
    if T.shape != (4, 4, 4):
        raise DimensionMismatch(f"tensor shape {T.shape}, expected (4, 4, 4)")
    if abs(T[0, 0, 0] - 1.0) > TOL.tensor_unit:
        raise ValueError(f"T[0,0,0] = {T[0,0,0]!r}, expected 1")
    return np.einsum("ijk,ijkab->ab", T, _pauli_basis_3()) / 8.0


_PAIR_SLICES = {"AB": (slice(None), slice(None), 0),
                "AC": (slice(None), 0, slice(None)),
                "BC": (0, slice(None), slice(None))}


def marginal_tensor(T: np.ndarray, pair: str) -> np.ndarray:
    """4x4 two-party slice of a full tensor (index 0 on the traced party)."""
    if pair not in _PAIR_SLICES:
        raise ValueError(f"pair must be one of AB, AC, BC, got {pair!r}")
    return np.asarray(T, dtype=float)[_PAIR_SLICES[pair]].copy()


# --- plain-text tensor fixtures: "i1 i2 i3 value", lexicographic order ----

def write_tensor_fixture(T: np.ndarray, path) -> None:
    lines = []
    for idx in np.ndindex(4, 4, 4):
        v = float(T[idx])
        if abs(v) >= 1e-14:
            lines.append(f"{idx[0]} {idx[1]} {idx[2]} {v:.15g}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_tensor_fixture(path) -> np.ndarray:
    T = np.zeros((4, 4, 4))
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line:
            continue
        i, j, k, v = line.split()
        T[int(i), int(j), int(k)] = float(v)
    return T


def reference_tensor_path() -> Path:
    return Path(__file__).parent / "data" / "reference_tensor.txt"
