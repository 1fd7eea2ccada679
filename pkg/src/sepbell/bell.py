"""Bell expressions, quantum values, local bounds, the filtering
(conditional-decomposition) analysis and the closed-form two-qubit CHSH
maximum.

A BellExpression stores real coefficients keyed by per-party setting
indices, where index 0 means "identity slot" (the party does not appear in
that term).  The local bound is computed by exhaustive enumeration of
deterministic strategies, which is exact and cheap for two settings per
party.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass

import numpy as np

from .config import TOL
from .linalg import (DimensionMismatch, IDENTITY_2, PAULI, SIGMA_X, SIGMA_Y,
                     SIGMA_Z, hermitian_eigen, kron, partial_trace)
from .states import DensityMatrix


class UnknownName(ValueError):
    pass


class SettingsMismatch(ValueError):
    pass


class SettingNotUnique(ValueError):
    pass


@dataclass(frozen=True)
class Observable:
    """Traceless dichotomic qubit measurement, parameterized by its Bloch vector."""

    bloch: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.bloch, dtype=float)
        if b.shape != (3,):
            raise ValueError(f"Bloch vector must have three components, got {b.shape}")
        norm = float(np.linalg.norm(b))
        if abs(norm - 1.0) > 1e-10:
            raise ValueError(f"Bloch vector norm {norm!r} is not 1")
        b = b.copy()
        b.setflags(write=False)
        object.__setattr__(self, "bloch", b)

    @property
    def matrix(self) -> np.ndarray:
        b = self.bloch
        return b[0] * SIGMA_X + b[1] * SIGMA_Y + b[2] * SIGMA_Z


def observable_from_bloch(vec) -> Observable:
    v = np.asarray(vec, dtype=float)
    n = float(np.linalg.norm(v))
    if n < 1e-12:
        raise ValueError("cannot normalize a zero Bloch vector")
    return Observable(bloch=v / n)


def equatorial_observable(theta: float) -> Observable:
    """cos(theta) sigma_z + sin(theta) sigma_x."""
    return Observable(bloch=np.array([math.sin(theta), 0.0, math.cos(theta)]))


def polar_observable(theta: float, phi: float) -> Observable:
    return Observable(bloch=np.array([math.sin(theta) * math.cos(phi),
                                      math.sin(theta) * math.sin(phi),
                                      math.cos(theta)]))


# MeasurementSet: one list of Observables per party, lengths matching the
# expression's settings-per-party.
MeasurementSet = list


@dataclass(frozen=True)
class BellExpression:
    """Real coefficients over tuples of per-party setting indices."""

    coefficients: dict
    settings: tuple

    def __post_init__(self):
        n = len(self.settings)
        for key in self.coefficients:
            if len(key) != n:
                raise SettingsMismatch(f"key {key} does not have {n} entries")
            for p, s in enumerate(key):
                if not 0 <= s <= self.settings[p]:
                    raise SettingsMismatch(
                        f"setting {s} out of range for party {p} "
                        f"with {self.settings[p]} settings")

    @property
    def n_parties(self) -> int:
        return len(self.settings)

    def to_json(self) -> str:
        table = {",".join(map(str, k)): v for k, v in sorted(self.coefficients.items())}
        return json.dumps({"settings": list(self.settings), "coefficients": table},
                          indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "BellExpression":
        doc = json.loads(text)
        coeffs = {tuple(int(t) for t in k.split(",")): float(v)
                  for k, v in doc["coefficients"].items()}
        return cls(coefficients=coeffs, settings=tuple(doc["settings"]))


def _chsh_terms(offset_party: int = 0) -> dict:
    """CHSH = B1C1 + B1C2 + B2C1 - B2C2 over the last two of three parties,
    or over both parties of a two-party expression when offset_party is -1."""
    terms = {}
    for (y, z), c in {(1, 1): 1.0, (1, 2): 1.0, (2, 1): 1.0, (2, 2): -1.0}.items():
        if offset_party == -1:
            terms[(y, z)] = c
        else:
            terms[(0, y, z)] = c
    return terms


def builtin_expression(name: str) -> BellExpression:
    """Built-in inequalities: BI, Mermin, Sliwa4 (three parties), CHSH (two)."""
    if name == "BI":
        # -A1 + (B1 - B2 - C2)(1 + A1) + CHSH_BC
        coeffs = {(1, 0, 0): -1.0,
                  (0, 1, 0): 1.0, (0, 2, 0): -1.0, (0, 0, 2): -1.0,
                  (1, 1, 0): 1.0, (1, 2, 0): -1.0, (1, 0, 2): -1.0}
        for k, v in _chsh_terms().items():
            coeffs[k] = coeffs.get(k, 0.0) + v
        return BellExpression(coefficients=coeffs, settings=(1, 2, 2))
    if name == "Mermin":
        return BellExpression(coefficients={(1, 1, 1): -1.0, (1, 2, 2): 1.0,
                                            (2, 1, 2): 1.0, (2, 2, 1): 1.0},
                              settings=(2, 2, 2))
    if name == "Sliwa4":
        # (1 - A1) CHSH_BC + 2 A1
        coeffs = {(1, 0, 0): 2.0}
        for (x, y, z), c in _chsh_terms().items():
            coeffs[(0, y, z)] = coeffs.get((0, y, z), 0.0) + c
            coeffs[(1, y, z)] = coeffs.get((1, y, z), 0.0) - c
        return BellExpression(coefficients=coeffs, settings=(1, 2, 2))
    if name == "CHSH":
        return BellExpression(coefficients=_chsh_terms(-1), settings=(2, 2))
    raise UnknownName(f"no built-in expression named {name!r}")


def _check_measurements(expr: BellExpression, m: MeasurementSet) -> None:
    if len(m) != expr.n_parties:
        raise SettingsMismatch(
            f"{len(m)} parties of observables for a {expr.n_parties}-party expression")
    for p, (need, have) in enumerate(zip(expr.settings, m)):
        if len(have) < need:
            raise SettingsMismatch(
                f"party {p} needs {need} observables, got {len(have)}")


def bell_operator(expr: BellExpression, m: MeasurementSet) -> np.ndarray:
    """The expression realized as a Hermitian operator on n qubits."""
    _check_measurements(expr, m)
    n = expr.n_parties
    dim = 2 ** n
    out = np.zeros((dim, dim), dtype=complex)
    for key, c in expr.coefficients.items():
        factors = [m[p][s - 1].matrix if s else IDENTITY_2 for p, s in enumerate(key)]
        out += c * kron(*factors)
    return out


def quantum_value(rho, expr: BellExpression, m: MeasurementSet) -> float:
    """Tr(rho B) for the expression's Bell operator."""
    mat = rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho)
    op = bell_operator(expr, m)
    if mat.shape != op.shape:
        raise DimensionMismatch(f"state dim {mat.shape} vs operator {op.shape}")
    return float(np.trace(mat @ op).real)


def local_bound(expr: BellExpression) -> float:
    """Maximum over deterministic +-1 assignments, by exhaustive enumeration."""
    ranges = [list(itertools.product((1.0, -1.0), repeat=n)) for n in expr.settings]
    best = -math.inf
    for assignment in itertools.product(*ranges):
        total = 0.0
        for key, c in expr.coefficients.items():
            term = c
            for p, s in enumerate(key):
                if s:
                    term *= assignment[p][s - 1]
            total += term
        best = max(best, total)
    return best


@dataclass(frozen=True)
class EvaluationResult:
    quantum_value: float
    local_bound: float
    ratio: float
    violated: bool


def evaluate(rho, expr: BellExpression, m: MeasurementSet) -> EvaluationResult:
    q = quantum_value(rho, expr, m)
    bound = local_bound(expr)
    ratio = q / bound if bound > 0 else math.inf
    return EvaluationResult(quantum_value=q, local_bound=bound, ratio=ratio,
                            violated=q > bound + TOL.violation_margin)


# --- reference measurement settings --------------------------------------

BI_ANGLES = {"a1": 0.0, "b1": 0.320997, "c1": 1.442524,
             "b2": 2.707329, "c2": -3.108820}

MERMIN_THETA_1 = 3.500760
MERMIN_THETA_2 = 1.605042


def reference_bi_measurements() -> MeasurementSet:
    """Equatorial settings that produce the published BI value on the
    reference state."""
    a = BI_ANGLES
    return [[equatorial_observable(a["a1"])],
            [equatorial_observable(a["b1"]), equatorial_observable(a["b2"])],
            [equatorial_observable(a["c1"]), equatorial_observable(a["c2"])]]


def reference_mermin_measurements(theta1: float = MERMIN_THETA_1,
                                  theta2: float = MERMIN_THETA_2) -> MeasurementSet:
    """Settings with A1 = A2 = sigma_z, B1 = sigma_z, B2 = sigma_y and
    Charlie's pair tilted out of the XY plane."""
    c1 = np.array([math.sin(theta1) * math.cos(theta2),
                   math.sin(theta1) * math.sin(theta2),
                   math.cos(theta1)])
    c2 = np.array([-c1[0], c1[1], -c1[2]])
    z = Observable(bloch=np.array([0.0, 0.0, 1.0]))
    y = Observable(bloch=np.array([0.0, 1.0, 0.0]))
    return [[z, z], [z, y], [Observable(bloch=c1), Observable(bloch=c2)]]


# --- conditional decomposition (Alice as a filter) ------------------------

def project_outcome(rho: DensityMatrix, party: int, observable: Observable,
                    sign: int):
    """Probability and collapsed state of the remaining parties for outcome
    sign in {+1, -1} of the observable measured on one party."""
    if rho.dims != (2, 2, 2):
        raise DimensionMismatch(f"need a three-qubit state, got dims {rho.dims}")
    proj2 = 0.5 * (IDENTITY_2 + sign * observable.matrix)
    factors = [proj2 if p == party else IDENTITY_2 for p in range(3)]
    P = kron(*factors)
    prob = float(np.trace(P @ rho.matrix).real)
    keep = [p for p in range(3) if p != party]
    if prob < 1e-12:
        # outcome never occurs; supply a placeholder so the weights still sum
        return prob, DensityMatrix.create(np.eye(4, dtype=complex) / 4.0, (2, 2),
                                          check_psd=False)
    collapsed = partial_trace(P @ rho.matrix @ P, rho.dims, keep) / prob
    collapsed = 0.5 * (collapsed + collapsed.conj().T)
    return prob, DensityMatrix.create(collapsed, (2, 2), check_psd=False)


def substitute_setting(expr: BellExpression, party: int, setting: int,
                       value: float) -> BellExpression:
    """Replace one party's single setting by a deterministic outcome,
    yielding an expression over the remaining parties."""
    for key in expr.coefficients:
        if key[party] not in (0, setting):
            raise SettingNotUnique(
                f"party {party} also appears with setting {key[party]}")
    out = {}
    for key, c in expr.coefficients.items():
        factor = value if key[party] == setting else 1.0
        reduced = tuple(s for p, s in enumerate(key) if p != party)
        out[reduced] = out.get(reduced, 0.0) + c * factor
    settings = tuple(s for p, s in enumerate(expr.settings) if p != party)
    return BellExpression(coefficients=out, settings=settings)


@dataclass(frozen=True)
class ConditionalDecomposition:
    p_plus: float
    rho_plus: DensityMatrix
    rho_minus: DensityMatrix
    q_plus: float
    q_minus: float
    expr_plus: BellExpression
    expr_minus: BellExpression

    @property
    def recombined(self) -> float:
        return self.p_plus * self.q_plus + (1.0 - self.p_plus) * self.q_minus


def conditional_decomposition(rho: DensityMatrix, expr: BellExpression,
                              m: MeasurementSet, party: int = 0,
                              setting: int = 1) -> ConditionalDecomposition:
    """Split the Bell test over the +-1 outcomes of one party's setting."""
    _check_measurements(expr, m)
    obs = m[party][setting - 1]
    expr_plus = substitute_setting(expr, party, setting, +1.0)
    expr_minus = substitute_setting(expr, party, setting, -1.0)
    rest = [obs_list for p, obs_list in enumerate(m) if p != party]
    p_plus, rho_plus = project_outcome(rho, party, obs, +1)
    _, rho_minus = project_outcome(rho, party, obs, -1)
    q_plus = quantum_value(rho_plus, expr_plus, rest)
    q_minus = quantum_value(rho_minus, expr_minus, rest)
    return ConditionalDecomposition(p_plus=p_plus, rho_plus=rho_plus,
                                    rho_minus=rho_minus, q_plus=q_plus,
                                    q_minus=q_minus, expr_plus=expr_plus,
                                    expr_minus=expr_minus)


# --- closed-form CHSH maximum for two qubits ------------------------------

def _pauli_correlation_matrix(rho: DensityMatrix) -> np.ndarray:
    T = np.empty((3, 3))
    for j in range(3):
        for k in range(3):
            T[j, k] = rho.expectation(kron(PAULI[j + 1], PAULI[k + 1]))
    return T


def _orthogonal_unit(b: np.ndarray) -> np.ndarray:
    trial = np.array([1.0, 0.0, 0.0]) if abs(b[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    v = trial - (trial @ b) * b
    return v / np.linalg.norm(v)


def horodecki_chsh(rho: DensityMatrix):
    """Maximum CHSH value 2 sqrt(u1 + u2) of a two-qubit state, with the
    optimal observables constructed explicitly.

    u1 >= u2 are the two largest eigenvalues of T^t T for the 3x3 Pauli
    correlation matrix T.  The first party measures along the images of the
    top right-singular vectors, the second along their weighted sum and
    difference.
    """
    if rho.dims != (2, 2):
        raise DimensionMismatch(f"need a two-qubit state, got dims {rho.dims}")
    T = _pauli_correlation_matrix(rho)
    eig = hermitian_eigen(T.T @ T)
    w = eig.eigenvalues
    value = 2.0 * math.sqrt(max(0.0, w[-1] + w[-2]))
    v1 = eig.eigenvectors[:, -1].real
    v2 = eig.eigenvectors[:, -2].real
    s1, s2 = math.sqrt(max(0.0, w[-1])), math.sqrt(max(0.0, w[-2]))

    img1, img2 = T @ v1, T @ v2
    b1 = img1 / s1 if s1 > 1e-12 else np.array([0.0, 0.0, 1.0])
    b2 = img2 / s2 if s2 > 1e-12 else _orthogonal_unit(b1)
    hyp = math.hypot(s1, s2)
    if hyp > 1e-12:
        cphi, sphi = s1 / hyp, s2 / hyp
    else:
        cphi, sphi = 1.0, 0.0
    c1 = cphi * v1 + sphi * v2
    c2 = cphi * v1 - sphi * v2
    measurements = [[observable_from_bloch(b1), observable_from_bloch(b2)],
                    [observable_from_bloch(c1), observable_from_bloch(c2)]]
    return value, measurements


# --- Sliwa inequality 4 via the filtering argument ------------------------

@dataclass(frozen=True)
class Sliwa4Analysis:
    p_plus: float
    chsh_bc: float
    q_plus: float
    q_minus: float
    measurements: MeasurementSet
    result: EvaluationResult


def sliwa4_analysis(rho: DensityMatrix) -> Sliwa4Analysis:
    """Quantum value of Sliwa inequality 4 with Alice filtering in sigma_z.

    The +1 branch is the constant 2 independent of Bob's and Charlie's
    measurements, so the -1 branch can use the closed-form CHSH maximum of
    the collapsed state.  Exact when sigma_z is Alice's optimal setting (as
    for the reference state); for arbitrary states it is a lower bound that
    `optimize.optimize_measurements` can try to improve.
    """
    if rho.dims != (2, 2, 2):
        raise DimensionMismatch(f"need a three-qubit state, got dims {rho.dims}")
    z = Observable(bloch=np.array([0.0, 0.0, 1.0]))
    p_plus, _ = project_outcome(rho, 0, z, +1)
    _, rho_minus = project_outcome(rho, 0, z, -1)
    chsh, bc_meas = horodecki_chsh(rho_minus)
    q_plus = 2.0
    q_minus = 2.0 * chsh - 2.0
    q = p_plus * q_plus + (1.0 - p_plus) * q_minus
    expr = builtin_expression("Sliwa4")
    bound = local_bound(expr)
    result = EvaluationResult(quantum_value=q, local_bound=bound, ratio=q / bound,
                              violated=q > bound + TOL.violation_margin)
    measurements = [[z], bc_meas[0], bc_meas[1]]
    return Sliwa4Analysis(p_plus=p_plus, chsh_bc=chsh, q_plus=q_plus,
                          q_minus=q_minus, measurements=measurements,
                          result=result)


def sliwa4_quantum_value(rho: DensityMatrix) -> EvaluationResult:
    return sliwa4_analysis(rho).result
