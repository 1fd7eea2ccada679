"""Derivative-free search over measurement angles and family parameters,
and the seesaw alternation between state and measurement optimization under
separable-marginal constraints.

The seesaw state step is an SDP: maximize Tr(rho B) over three-qubit
states whose three two-qubit marginals all have positive partial transpose
(equivalent to separability in 2x2).  The measurement step replaces each
observable of one party with the spectral sign optimum of its partial Bell
operator, restricted to the traceless (unit Bloch vector) class so that
Observable invariants are preserved; within that class the objective never
decreases.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .bell import (BellExpression, MeasurementSet, Observable, bell_operator,
                   observable_from_bloch, quantum_value)
from .config import TOL
from .linalg import IDENTITY_2, PAULI, hermitian_eigen, kron, partial_trace
from .sdp import (SdpFailure, SdpProblem, hermitian_to_vec, solve)
from .states import (DensityMatrix, FamilyParameters, build_family_state,
                     family_matrix)


class NonFiniteObjective(ValueError):
    pass


@dataclass(frozen=True)
class NelderMeadConfig:
    reflection: float = 1.0
    expansion: float = 2.0
    contraction: float = 0.5
    shrink: float = 0.5
    initial_step: float = 0.1
    tolerance: float = 1e-10
    max_iterations: int = 0          # 0 means 200 * dimension
    restarts: int = 20
    seed: int = 0


def nelder_mead(objective, config: NelderMeadConfig, initial, callback=None):
    """Simplex maximization of `objective`.  Returns (point, value)."""
    x0 = np.asarray(initial, dtype=float)
    n = x0.size
    max_iter = config.max_iterations or 200 * n

    def f(x):
        v = float(objective(x))
        if not math.isfinite(v):
            raise NonFiniteObjective(f"objective returned {v!r} at {x!r}")
        return v

    points = [x0]
    for i in range(n):
        p = x0.copy()
        p[i] += config.initial_step
        points.append(p)
    values = [f(p) for p in points]

    for it in range(max_iter):
        order = np.argsort(values)[::-1]
        points = [points[i] for i in order]
        values = [values[i] for i in order]
        if callback is not None:
            callback(it, values[0])
        if values[0] - values[-1] < config.tolerance:
            break
        centroid = np.mean(points[:-1], axis=0)
        xr = centroid + config.reflection * (centroid - points[-1])
        fr = f(xr)
        if fr > values[0]:
            xe = centroid + config.expansion * (centroid - points[-1])
            fe = f(xe)
            if fe > fr:
                points[-1], values[-1] = xe, fe
            else:
                points[-1], values[-1] = xr, fr
        elif fr > values[-2]:
            points[-1], values[-1] = xr, fr
        else:
            xc = centroid + config.contraction * (points[-1] - centroid)
            fc = f(xc)
            if fc > values[-1]:
                points[-1], values[-1] = xc, fc
            else:
                for i in range(1, n + 1):
                    points[i] = points[0] + config.shrink * (points[i] - points[0])
                    values[i] = f(points[i])
    i = int(np.argmax(values))
    return points[i], values[i]


def _log(stream, **record) -> None:
    if stream is not None:
        stream.write(json.dumps(record) + "\n")


# --- measurement-angle searches -------------------------------------------

def _observable_from_angles(theta: float, phi: float) -> Observable:
    return Observable(bloch=np.array([math.sin(theta) * math.cos(phi),
                                      math.sin(theta) * math.sin(phi),
                                      math.cos(theta)]))


def _measurements_from_vector(x, settings) -> MeasurementSet:
    meas, k = [], 0
    for n in settings:
        row = []
        for _ in range(n):
            row.append(_observable_from_angles(x[k], x[k + 1]))
            k += 2
        meas.append(row)
    return meas


def optimize_measurements(rho: DensityMatrix, expr: BellExpression,
                          config: NelderMeadConfig = NelderMeadConfig(),
                          log_stream=None):
    """Best measurement set found over seeded Nelder-Mead restarts."""
    rng = np.random.default_rng(config.seed)
    dim = 2 * sum(expr.settings)
    best_x, best_v = None, -math.inf
    for restart in range(config.restarts):
        x0 = rng.uniform(-math.pi, math.pi, dim)
        x, v = nelder_mead(
            lambda z: quantum_value(rho, expr, _measurements_from_vector(z, expr.settings)),
            config, x0)
        _log(log_stream, restart=restart, iteration=-1, value=v)
        if v > best_v:
            best_x, best_v = x, v
    return _measurements_from_vector(best_x, expr.settings), best_v


# --- seesaw ---------------------------------------------------------------

def _partial_bell_operator(rho: DensityMatrix, expr: BellExpression,
                           m: MeasurementSet, party: int, setting: int) -> np.ndarray:
    """Single-qubit operator F with Tr(O F) equal to the objective terms in
    which `setting` of `party` appears, as a function of that observable O."""
    n = expr.n_parties
    rest = np.zeros((2 ** n, 2 ** n), dtype=complex)
    for key, c in expr.coefficients.items():
        if key[party] != setting:
            continue
        factors = [IDENTITY_2 if p == party
                   else (m[p][s - 1].matrix if s else IDENTITY_2)
                   for p, s in enumerate(key)]
        rest += c * kron(*factors)
    F = partial_trace(rho.matrix @ rest, rho.dims, [party])
    return 0.5 * (F + F.conj().T)


def seesaw_measurement_step(rho: DensityMatrix, expr: BellExpression,
                            current: MeasurementSet, party: int) -> MeasurementSet:
    """Replace one party's observables by their spectral-sign optima.

    The +1 eigenprojector goes to the larger eigenvalue of the partial Bell
    operator; a (near) degenerate operator leaves the observable unchanged,
    which keeps the step monotone in all cases.
    """
    new_row = []
    for s in range(1, expr.settings[party] + 1):
        F = _partial_bell_operator(rho, expr, current, party, s)
        eig = hermitian_eigen(F)
        if eig.eigenvalues[-1] - eig.eigenvalues[0] < 1e-14:
            new_row.append(current[party][s - 1])
            continue
        hi = eig.eigenvectors[:, -1]
        lo = eig.eigenvectors[:, 0]
        op = np.outer(hi, hi.conj()) - np.outer(lo, lo.conj())
        bloch = np.array([np.trace(op @ PAULI[1]).real,
                          np.trace(op @ PAULI[2]).real,
                          np.trace(op @ PAULI[3]).real]) / 2.0
        new_row.append(observable_from_bloch(bloch))
    out = [list(row) for row in current]
    out[party] = new_row
    return out


def _pt_second(h4: np.ndarray) -> np.ndarray:
    return h4.reshape(2, 2, 2, 2).transpose(0, 3, 2, 1).reshape(4, 4)


def _embed_pair(pair: str, h4: np.ndarray) -> np.ndarray:
    h = h4.reshape(2, 2, 2, 2)
    if pair == "AB":
        return np.einsum("abcd,ef->abecdf", h, IDENTITY_2).reshape(8, 8)
    if pair == "AC":
        return np.einsum("abcd,ef->aebcfd", h, IDENTITY_2).reshape(8, 8)
    return np.einsum("abcd,ef->eabfcd", h, IDENTITY_2).reshape(8, 8)


@lru_cache(maxsize=1)
def _ppt_marginal_constraints():
    """Equality rows linking each PSD block to the partial transpose of the
    corresponding two-qubit marginal of the state block."""
    pairs = ("AB", "AC", "BC")
    n = 64 + 16 * len(pairs)
    rows = [np.zeros(n)]
    rows[0][:64] = hermitian_to_vec(np.eye(8, dtype=complex))
    rhs = [1.0]
    basis2 = [kron(PAULI[j], PAULI[k]) for j in range(4) for k in range(4)]
    for p, pair in enumerate(pairs):
        off = 64 + 16 * p
        for H in basis2:
            row = np.zeros(n)
            row[off:off + 16] = hermitian_to_vec(H)
            row[:64] = -hermitian_to_vec(_embed_pair(pair, _pt_second(H)))
            rows.append(row)
            rhs.append(0.0)
    return np.stack(rows), np.array(rhs)


def seesaw_state_step(expr: BellExpression, m: MeasurementSet,
                      warm_start=None) -> DensityMatrix:
    """SDP over three-qubit states with PPT (hence separable) two-qubit
    marginals, maximizing the Bell operator expectation."""
    ds, sol = _state_step_solution(expr, m, warm_start)
    return ds


def _state_step_solution(expr: BellExpression, m: MeasurementSet, warm_start=None):
    if expr.n_parties != 3:
        raise SdpFailure("seesaw state step needs a three-party expression")
    B = bell_operator(expr, m)
    A, b = _ppt_marginal_constraints()
    c = np.zeros(A.shape[1])
    c[:64] = hermitian_to_vec(B)
    problem = SdpProblem(block_dims=(8, 4, 4, 4), objective=c,
                         constraint_matrix=A, rhs=b, maximize=True)
    sol = solve(problem, warm_start=warm_start)
    if not sol.optimal:
        raise SdpFailure(f"state step ended with status {sol.status}")
    rho = DensityMatrix.create(sol.blocks[0], (2, 2, 2), check_psd=False)
    return rho, sol


@dataclass(frozen=True)
class SeesawResult:
    state: DensityMatrix
    measurements: MeasurementSet
    value: float
    trace: list
    restarts: int


def _random_measurements(rng, settings) -> MeasurementSet:
    meas = []
    for n in settings:
        row = []
        for _ in range(n):
            theta = math.acos(rng.uniform(-1.0, 1.0))
            phi = rng.uniform(-math.pi, math.pi)
            row.append(_observable_from_angles(theta, phi))
        meas.append(row)
    return meas


def seesaw_search(expr: BellExpression,
                  config: NelderMeadConfig = NelderMeadConfig(),
                  max_rounds: int = 500, log_stream=None) -> SeesawResult:
    """Alternate state SDP and per-party measurement steps from random
    measurement starts; returns the best run.

    Raises RuntimeError if any iterate decreases the objective by more than
    the seesaw monotonicity tolerance.
    """
    rng = np.random.default_rng(config.seed)
    best = None
    for restart in range(config.restarts):
        meas = _random_measurements(rng, expr.settings)
        trace = []
        rho = None
        warm = None
        for rounds in range(max_rounds):
            rho, sol = _state_step_solution(expr, meas, warm_start=warm)
            warm = sol.blocks
            trace.append(quantum_value(rho, expr, meas))
            for party in range(expr.n_parties):
                meas = seesaw_measurement_step(rho, expr, meas, party)
                trace.append(quantum_value(rho, expr, meas))
            _log(log_stream, restart=restart, iteration=rounds, value=trace[-1])
            steps_per_round = expr.n_parties + 1
            if rounds >= 3:
                prev = trace[-1 - 3 * steps_per_round]
                if abs(trace[-1] - prev) < 1e-9 * max(1.0, abs(trace[-1])):
                    break
        dips = np.diff(np.asarray(trace))
        if dips.size and float(dips.min()) < -TOL.seesaw_monotonic:
            raise RuntimeError(f"seesaw objective decreased by {-dips.min():.2e}")
        if best is None or trace[-1] > best.value:
            best = SeesawResult(state=rho, measurements=meas, value=trace[-1],
                                trace=list(trace), restarts=config.restarts)
    return best


# --- family-parameter search ----------------------------------------------

_PARAM_NAMES = ("p0", "p1", "alpha", "beta", "gamma", "delta",
                "tb1", "tc1", "tb2", "tc2")


def _family_params(d: dict) -> FamilyParameters:
    return FamilyParameters(p0=d["p0"], p1=d["p1"], p2=1.0 - d["p0"] - d["p1"],
                            alpha=d["alpha"], beta=d["beta"],
                            gamma=d["gamma"], delta=d["delta"])


def _family_measurements(d: dict) -> MeasurementSet:
    eq = lambda t: _observable_from_angles(t, 0.0)
    return [[eq(0.0)], [eq(d["tb1"]), eq(d["tb2"])], [eq(d["tc1"]), eq(d["tc2"])]]


def _bc_pt_pencil(d: dict):
    """PT of the BC marginal as the affine pencil M0 + p1 * M1."""
    from .states import family_kets

    params = FamilyParameters(p0=d["p0"], p1=0.0, p2=1.0 - d["p0"],
                              alpha=d["alpha"], beta=d["beta"],
                              gamma=d["gamma"], delta=d["delta"])
    psi0, psi1, psi2 = family_kets(params)
    pr = lambda v: np.outer(v, v.conj())
    m0 = _pt_second(d["p0"] * pr(psi0) + (1.0 - d["p0"]) * pr(psi2))
    m1 = _pt_second(pr(psi1) - pr(psi2))
    return m0, m1


def _det_pt_bc(d: dict, p1: float) -> float:
    m0, m1 = _bc_pt_pencil(d)
    return float(np.linalg.det(m0 + p1 * m1).real)


def _bell_value(d: dict, expr: BellExpression) -> float:
    params = _family_params(d)
    return quantum_value(family_matrix(params), expr, _family_measurements(d))


def _simplex_violation(d: dict) -> float:
    return (max(0.0, -d["p0"]) + max(0.0, -d["p1"])
            + max(0.0, d["p0"] + d["p1"] - 1.0))


def _min_separable_p1(d: dict) -> float | None:
    """Smallest p1 in [0, 1 - p0] with det(PT of the BC marginal) >= 0.

    det is a quartic polynomial in p1 (the state is affine in p1), so five
    samples determine it exactly; bisection backs up the root selection.
    """
    hi = 1.0 - d["p0"]
    if hi <= 0.0:
        return None
    m0, m1 = _bc_pt_pencil(d)

    def det_at(p1):
        return float(np.linalg.det(m0 + p1 * m1).real)

    if det_at(0.0) >= 0.0:
        return 0.0
    nodes = np.linspace(0.0, hi, 5)
    dets = np.linalg.det(m0[None, :, :] + nodes[:, None, None] * m1[None, :, :]).real
    scale = max(1e-300, float(np.abs(dets).max()))
    coeffs = np.polynomial.polynomial.polyfit(nodes, dets / scale, 4)
    roots = np.polynomial.polynomial.polyroots(coeffs)
    candidates = sorted(r.real for r in roots
                        if abs(r.imag) <= 1e-7 * max(1.0, abs(r.real))
                        and -1e-10 <= r.real <= hi + 1e-10)
    for r in candidates:
        p = min(hi, max(0.0, r))
        nudge = 1e-15
        for _ in range(60):
            if det_at(p) >= 0.0:
                return p
            if p >= hi:
                break
            p = min(hi, p + nudge)
            nudge *= 2.0
    # bisection fallback over a coarse bracket
    lo, hi_b = 0.0, None
    for g in np.linspace(0.0, hi, 9)[1:]:
        if det_at(g) >= 0.0:
            hi_b = g
            break
        lo = g
    if hi_b is None:
        return None
    for _ in range(70):
        mid = 0.5 * (lo + hi_b)
        if det_at(mid) >= 0.0:
            hi_b = mid
        else:
            lo = mid
    return hi_b


def optimize_family(config: NelderMeadConfig = NelderMeadConfig(),
                    frozen: dict | None = None, penalty_coeff: float = 1e6,
                    polish: bool = True, log_stream=None):
    """Search the state family plus equatorial angles for the largest
    two-body Bell value subject to a separable BC marginal.

    Phase one explores with the quadratic determinant penalty; phase two
    (skipped when p1 is frozen or `polish` is false) re-optimizes with p1
    eliminated by the exact separability boundary, which is what makes the
    returned point satisfy det >= -1e-9 instead of parking at the penalty
    optimum a few 1e-4 outside the boundary.

    Returns (FamilyParameters, MeasurementSet, value).
    """
    from .bell import builtin_expression
    expr = builtin_expression("BI")
    frozen = dict(frozen or {})
    rng = np.random.default_rng(config.seed)

    free_names = [n for n in _PARAM_NAMES if n not in frozen]

    def assemble(x, names):
        d = dict(zip(names, x))
        d.update(frozen)
        return d

    def phase_a_objective(x):
        d = assemble(x, free_names)
        viol = _simplex_violation(d)
        if viol > 0.0:
            return -5.0 - 100.0 * viol
        q = _bell_value(d, expr)
        det = _det_pt_bc(d, d["p1"])
        return q - penalty_coeff * max(0.0, -det) ** 2

    polish_names = [n for n in free_names if n != "p1"]
    do_polish = polish and "p1" not in frozen

    def phase_b_objective(x):
        d = assemble(x, polish_names)
        if not 0.0 < d["p0"] < 1.0:
            return -5.0 - 100.0 * abs(d["p0"] - 0.5)
        d["p1"] = 0.0
        p1 = _min_separable_p1(d)
        if p1 is None:
            return -4.0
        d["p1"] = p1
        return _bell_value(d, expr)

    def random_start():
        d = {"p0": rng.uniform(0.2, 0.9), "p1": rng.uniform(0.0, 0.2),
             "alpha": rng.uniform(-math.pi / 2, math.pi / 2),
             "beta": rng.uniform(-math.pi / 2, math.pi / 2),
             "gamma": rng.uniform(-math.pi / 2, math.pi / 2),
             "delta": rng.uniform(-math.pi / 2, math.pi / 2),
             "tb1": rng.uniform(-math.pi, math.pi),
             "tc1": rng.uniform(-math.pi, math.pi),
             "tb2": rng.uniform(-math.pi, math.pi),
             "tc2": rng.uniform(-math.pi, math.pi)}
        return np.array([d[n] for n in free_names])

    best = None  # (value, params dict, feasible flag)
    for restart in range(config.restarts):
        x, v = nelder_mead(phase_a_objective, config, random_start())
        d = assemble(x, free_names)
        if do_polish:
            xb = np.array([d[n] for n in polish_names])
            for step in (0.05, 0.01):
                cfg = NelderMeadConfig(
                    reflection=config.reflection, expansion=config.expansion,
                    contraction=config.contraction, shrink=config.shrink,
                    initial_step=step, tolerance=config.tolerance,
                    max_iterations=config.max_iterations, restarts=1,
                    seed=config.seed)
                xb, v = nelder_mead(phase_b_objective, cfg, xb)
            d = assemble(xb, polish_names)
            p1 = _min_separable_p1(dict(d, p1=0.0))
            if p1 is None:
                continue
            d["p1"] = p1
        if _simplex_violation(d) > 0.0:
            continue
        value = _bell_value(d, expr)
        det = _det_pt_bc(d, d["p1"])
        feasible = det >= -TOL.family_det_feasible
        _log(log_stream, restart=restart, iteration=-1, value=value)
        # feasibility ranks first only when the boundary polish is in play;
        # a penalty-free exploratory run reports the raw optimum instead
        key = (feasible, value) if do_polish else (True, value)
        cur = (best[2], best[0]) if best is not None else None
        if best is None or key > cur:
            best = (value, dict(d), key[0])
    if best is None:
        raise RuntimeError("family search found no admissible parameters")
    value, d, _ = best
    return _family_params(d), _family_measurements(d), value
