"""Two-qubit separability certificates via the positive-partial-transpose
criterion, in both its eigenvalue and determinant forms.

For two qubits PPT is necessary and sufficient, and the partial transpose
has at most one negative eigenvalue, so

    separable  <=>  min eig(rho^T_B) >= 0  <=>  det(rho^T_B) >= 0.

The two forms scale differently near the boundary: det is the eigenvalue
product, so a determinant offset of -1e-10 corresponds to a minimum
eigenvalue of about -1.6e-8 for the reference marginal (the other three
eigenvalues multiply to ~6e-3).  Verdict tolerances in `config` are sized
accordingly.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import TOL
from .linalg import DimensionMismatch, hermitian_eigen, partial_transpose
from .states import DensityMatrix


def _require_two_qubits(rho: DensityMatrix) -> None:
    if rho.dims != (2, 2):
        raise DimensionMismatch(f"need a two-qubit state, got dims {rho.dims}")


def ppt_min_eigenvalue(rho: DensityMatrix, subsystem: int = 0) -> float:
    """Minimum eigenvalue of the partial transpose of a two-qubit state."""
    _require_two_qubits(rho)
    pt = partial_transpose(rho.matrix, rho.dims, subsystem)
    return float(hermitian_eigen(pt).eigenvalues[0])


def det_partial_transpose(rho: DensityMatrix, subsystem: int = 0) -> float:
    """det(rho^T_subsystem), computed as the product of its eigenvalues."""
    _require_two_qubits(rho)
    pt = partial_transpose(rho.matrix, rho.dims, subsystem)
    return float(np.prod(hermitian_eigen(pt).eigenvalues))


@dataclass(frozen=True)
class SeparabilityReport:
    pair: str
    min_eigenvalue: float
    det_value: float
    verdict: str  # "separable" | "entangled"

    @property
    def separable(self) -> bool:
        return self.verdict == "separable"

    def as_dict(self) -> dict:
        return {"pair": self.pair,
                "min_eigenvalue": self.min_eigenvalue,
                "det_value": self.det_value,
                "verdict": self.verdict}


def separability_report(rho: DensityMatrix, pair: str = "BC") -> SeparabilityReport:
    min_eig = ppt_min_eigenvalue(rho)
    det = det_partial_transpose(rho)
    verdict = "separable" if min_eig >= -TOL.ppt_eig_separable else "entangled"
    return SeparabilityReport(pair=pair, min_eigenvalue=min_eig,
                              det_value=det, verdict=verdict)


_PAIRS = {"AB": (0, 1), "AC": (0, 2), "BC": (1, 2)}


def certify_all_marginals(rho: DensityMatrix) -> dict:
    """Separability reports for the AB, AC and BC reductions of a 3-qubit state."""
    if rho.dims != (2, 2, 2):
        raise DimensionMismatch(f"need a three-qubit state, got dims {rho.dims}")
    return {pair: separability_report(rho.marginal(keep), pair)
            for pair, keep in _PAIRS.items()}
