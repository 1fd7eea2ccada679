"""Dense semidefinite programming and the marginal-compatibility test.

The solver is a primal-dual path-following method with Nesterov-Todd
scaling and a Mehrotra predictor-corrector step, operating on
block-diagonal complex Hermitian variables.  Each d x d Hermitian block is
parameterized by d^2 real coordinates (diagonal entries, then sqrt(2) times
the real and imaginary parts of each upper off-diagonal entry), which makes
the coordinate map an isometry: <A, B> = vec(A) . vec(B).

The marginal-compatibility problems of the uniqueness test fix all two-
party reduced states, which in the interesting cases pins the feasible set
to a single boundary point of the PSD cone, so Slater's condition fails and
a plain interior-point run cannot certify tight bounds.  The module
therefore performs facial reduction first: one auxiliary, strictly feasible
SDP maximizes the minimum eigenvalue over the compatible set; its optimizer
spans the minimal face, the problem is restricted to that face, and the 54
component extrema become nondegenerate.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import TOL
from .linalg import PAULI, kron
from .states import DensityMatrix, correlation_tensor, marginal_tensor

_R2 = math.sqrt(2.0)


class SdpFailure(Exception):
    pass


def hermitian_to_vec(m: np.ndarray) -> np.ndarray:
    """Isometric real coordinates of a Hermitian matrix."""
    d = m.shape[0]
    out = np.empty(d * d)
    out[:d] = m.diagonal().real
    k = d
    for i in range(d):
        for j in range(i + 1, d):
            out[k] = _R2 * m[i, j].real
            out[k + 1] = _R2 * m[i, j].imag
            k += 2
    return out


def vec_to_hermitian(v: np.ndarray, d: int) -> np.ndarray:
    m = np.zeros((d, d), dtype=complex)
    np.fill_diagonal(m, v[:d])
    k = d
    for i in range(d):
        for j in range(i + 1, d):
            m[i, j] = (v[k] + 1j * v[k + 1]) / _R2
            m[j, i] = (v[k] - 1j * v[k + 1]) / _R2
            k += 2
    return m


def pack_blocks(blocks) -> np.ndarray:
    return np.concatenate([hermitian_to_vec(b) for b in blocks])


def unpack_blocks(v: np.ndarray, dims) -> list:
    out, k = [], 0
    for d in dims:
        out.append(vec_to_hermitian(v[k:k + d * d], d))
        k += d * d
    return out


@dataclass(frozen=True)
class SdpProblem:
    """min/max  objective . x  over PSD blocks subject to A x = b."""

    block_dims: tuple
    objective: np.ndarray
    constraint_matrix: np.ndarray
    rhs: np.ndarray
    maximize: bool = False

    def __post_init__(self):
        n = sum(d * d for d in self.block_dims)
        A = np.atleast_2d(np.asarray(self.constraint_matrix, dtype=float))
        if A.shape[1] != n or len(self.objective) != n:
            raise ValueError("constraint/objective length does not match blocks")
        if A.shape[0] != len(self.rhs):
            raise ValueError("constraint count does not match rhs")


@dataclass(frozen=True)
class SdpSolution:
    status: str  # optimal | max-iterations | infeasible | numerical-breakdown
    blocks: list
    dual_blocks: list
    y: np.ndarray
    primal_objective: float
    dual_objective: float
    gap: float
    iterations: int
    primal_residual: float
    dual_residual: float

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


def _herm(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + m.conj().T)


def _chol(m: np.ndarray):
    try:
        return np.linalg.cholesky(m)
    except np.linalg.LinAlgError:
        return None


def _max_step(blocks, dblocks) -> float:
    """Largest alpha keeping every block + alpha * direction PSD."""
    alpha = math.inf
    for X, dX in zip(blocks, dblocks):
        L = _chol(X)
        if L is None:
            return 0.0
        t = np.linalg.solve(L, dX)
        t = np.linalg.solve(L, t.conj().T).conj().T
        lam = np.linalg.eigvalsh(_herm(t)).min()
        if lam < 0:
            alpha = min(alpha, -1.0 / lam)
    return alpha


def _independent_rows(A: np.ndarray, b: np.ndarray):
    """Greedy selection of linearly independent rows; None if inconsistent."""
    sol, _, rank, _ = np.linalg.lstsq(A, b, rcond=None)
    if rank < A.shape[0]:
        if np.linalg.norm(A @ sol - b) > 1e-8 * (1.0 + np.linalg.norm(b)):
            return None, None
        keep, basis = [], []
        for i in range(A.shape[0]):
            v = A[i].copy()
            for q in basis:
                v -= (q @ A[i]) * q
            nv = np.linalg.norm(v)
            if nv > 1e-10 * max(1.0, np.linalg.norm(A[i])):
                basis.append(v / nv)
                keep.append(i)
        return A[keep], b[keep]
    return A, b


def solve(problem: SdpProblem, max_iterations: int = 150, tol: float = 1e-11,
          warm_start=None, step_fraction: float = 0.98) -> SdpSolution:
    """Interior-point solve; maximization is handled by objective negation."""
    dims = list(problem.block_dims)
    sign = -1.0 if problem.maximize else 1.0
    cc = sign * np.asarray(problem.objective, dtype=float)
    A = np.atleast_2d(np.asarray(problem.constraint_matrix, dtype=float))
    b = np.asarray(problem.rhs, dtype=float)

    def finish(status, best, it):
        if best is None:
            return SdpSolution(status=status, blocks=[], dual_blocks=[],
                               y=np.zeros(0), primal_objective=math.nan,
                               dual_objective=math.nan, gap=math.nan,
                               iterations=it, primal_residual=math.nan,
                               dual_residual=math.nan)
        p, d = best["pobj"], best["dobj"]
        if status not in ("infeasible",):
            gap_ok = abs(p - d) <= TOL.sdp_gap * max(1.0, abs(p))
            if best["err_p"] < 1e-9 and best["err_d"] < 1e-9 and gap_ok:
                status = "optimal"
        return SdpSolution(status=status, blocks=best["X"],
                           dual_blocks=best["S"], y=best["y"],
                           primal_objective=sign * p, dual_objective=sign * d,
                           gap=abs(p - d), iterations=it,
                           primal_residual=best["err_p"],
                           dual_residual=best["err_d"])

    Ared = _independent_rows(A, b)
    if Ared[0] is None:
        return finish("infeasible", None, 0)
    A, b = Ared
    m = A.shape[0]

    offsets = np.cumsum([0] + [d * d for d in dims])
    nb = len(dims)
    N = sum(dims)
    Ab = [np.stack([vec_to_hermitian(A[k, offsets[i]:offsets[i + 1]], d)
                    for k in range(m)]) for i, d in enumerate(dims)]
    Cb = unpack_blocks(cc, dims)

    def apply_A(Xb):
        out = np.zeros(m)
        for i in range(nb):
            out += np.einsum("kij,ji->k", Ab[i], Xb[i]).real
        return out

    def apply_At(y):
        return [np.einsum("k,kij->ij", y, Ab[i]) for i in range(nb)]

    def inner(Pb, Qb):
        return float(sum(np.einsum("ij,ji->", p, q).real for p, q in zip(Pb, Qb)))

    anorms = np.array([max(1.0, np.linalg.norm(A[k])) for k in range(m)])
    if warm_start is not None:
        Xb = []
        for i, d in enumerate(dims):
            M = _herm(np.asarray(warm_start[i], dtype=complex))
            w = np.linalg.eigvalsh(M)
            shift = max(1e-7, 1e-7 * abs(w).max() - min(0.0, 1.1 * w.min()))
            Xb.append(M + shift * np.eye(d))
    else:
        xi_p = max(math.sqrt(N), N * float(np.max((1 + np.abs(b)) / anorms)))
        Xb = [xi_p * np.eye(d, dtype=complex) for d in dims]
    xi_d = max(math.sqrt(N), float(np.max(anorms)),
               max(np.linalg.norm(C) for C in Cb))
    Sb = [xi_d * np.eye(d, dtype=complex) for d in dims]
    y = np.zeros(m)

    bnorm = 1.0 + np.linalg.norm(b)
    cnorm = 1.0 + math.sqrt(sum(np.linalg.norm(C) ** 2 for C in Cb))

    best = None
    status = "max-iterations"
    it = 0
    for it in range(1, max_iterations + 1):
        Rp = b - apply_A(Xb)
        Rd = [C - S - Z for C, S, Z in zip(Cb, Sb, apply_At(y))]
        mu = inner(Xb, Sb) / N
        pobj = inner(Cb, Xb)
        dobj = float(b @ y)
        err_p = float(np.linalg.norm(Rp)) / bnorm
        err_d = math.sqrt(sum(np.linalg.norm(R) ** 2 for R in Rd)) / cnorm
        relgap = abs(pobj - dobj) / (1.0 + max(abs(pobj), abs(dobj)))
        score = max(err_p, err_d, relgap)
        if best is None or score < best["score"]:
            best = {"score": score, "X": [x.copy() for x in Xb],
                    "S": [s.copy() for s in Sb], "y": y.copy(),
                    "pobj": pobj, "dobj": dobj,
                    "err_p": err_p, "err_d": err_d}
        if err_p < tol and err_d < tol and relgap < tol:
            status = "optimal"
            break
        if abs(dobj) > 1e9 and err_p > 1e-6:
            status = "infeasible"
            break

        # Nesterov-Todd scaling: G^-1 X G^-H = G^H S G = diag(lam)
        Gs, Gts, Ginvs, lams = [], [], [], []
        broke = False
        for X, S in zip(Xb, Sb):
            Lx, Ls = _chol(X), _chol(S)
            if Lx is None or Ls is None:
                broke = True
                break
            _, lam, Vh = np.linalg.svd(Ls.conj().T @ Lx)
            lam = np.maximum(lam, 1e-300)
            G = Lx @ (Vh.conj().T / np.sqrt(lam)[None, :])
            Ginv = (np.sqrt(lam)[:, None] * Vh) @ np.linalg.inv(Lx)
            Gs.append(G)
            Gts.append(G.conj().T)
            Ginvs.append(Ginv)
            lams.append(lam)
        if broke:
            status = "numerical-breakdown"
            break

        Ahat = [np.einsum("pi,kij,jq->kpq", Gt, Abi, G, optimize=True)
                for Gt, G, Abi in zip(Gts, Gs, Ab)]
        Es = [2.0 / np.add.outer(lam, lam) for lam in lams]
        Rdhat = [Gt @ R @ G for Gt, G, R in zip(Gts, Gs, Rd)]

        M = np.zeros((m, m))
        for i in range(nb):
            M += np.einsum("kab,lab->kl", Ahat[i], np.conj(Ahat[i])).real
        M = 0.5 * (M + M.T)
        Lm, jitter = None, 0.0
        base = max(float(np.trace(M)) / m, 1e-300)
        for _ in range(10):
            Lm = _chol(M + jitter * np.eye(m))
            if Lm is not None:
                break
            jitter = max(1e-15 * base, jitter * 30.0)
        if Lm is None:
            status = "numerical-breakdown"
            break

        def schur_solve(rhs):
            dy = np.linalg.solve(Lm.conj().T, np.linalg.solve(Lm, rhs))
            for _ in range(2):
                res = rhs - M @ dy
                dy = dy + np.linalg.solve(Lm.conj().T, np.linalg.solve(Lm, res))
            return dy

        def newton_direction(Rcb):
            rhs = Rp.copy()
            for i in range(nb):
                rhs -= np.einsum("kab,ab->k", Ahat[i], np.conj(Es[i] * Rcb[i])).real
                rhs += np.einsum("kab,ab->k", Ahat[i], np.conj(Rdhat[i])).real
            dy = schur_solve(rhs)
            dShat = [R - np.einsum("k,kij->ij", dy, Ah)
                     for R, Ah in zip(Rdhat, Ahat)]
            dXhat = [E * Rc - dS for E, Rc, dS in zip(Es, Rcb, dShat)]
            dXb = [_herm(G @ dXh @ Gt) for G, Gt, dXh in zip(Gs, Gts, dXhat)]
            dSb = [_herm(Gi.conj().T @ dSh @ Gi) for Gi, dSh in zip(Ginvs, dShat)]
            return dy, dSb, dXb, dXhat, dShat

        lam2 = [np.diag(lam ** 2) for lam in lams]
        _, dS_a, dX_a, dXh_a, dSh_a = newton_direction([-L2 for L2 in lam2])
        ap = min(1.0, _max_step(Xb, dX_a))
        ad = min(1.0, _max_step(Sb, dS_a))
        mu_aff = inner([X + ap * dX for X, dX in zip(Xb, dX_a)],
                       [S + ad * dS for S, dS in zip(Sb, dS_a)]) / N
        sigma = min(1.0, max((max(mu_aff, 0.0) / mu) ** 3, 1e-12)) if mu > 0 else 0.1

        Rc = [sigma * mu * np.eye(d) - L2 - _herm(dXh @ dSh)
              for d, L2, dXh, dSh in zip(dims, lam2, dXh_a, dSh_a)]
        dy, dSb, dXb, _, _ = newton_direction(Rc)
        tau = step_fraction if mu > 1e-8 else 0.999
        ap = min(1.0, tau * _max_step(Xb, dXb))
        ad = min(1.0, tau * _max_step(Sb, dSb))
        for _ in range(40):
            Xn = [_herm(X + ap * dX) for X, dX in zip(Xb, dXb)]
            if all(_chol(x) is not None for x in Xn):
                break
            ap *= 0.8
        else:
            Xn = Xb
        for _ in range(40):
            Sn = [_herm(S + ad * dS) for S, dS in zip(Sb, dSb)]
            if all(_chol(s) is not None for s in Sn):
                break
            ad *= 0.8
        else:
            Sn = Sb
        # reject steps that inflate the complementarity product
        for _ in range(30):
            if inner(Xn, Sn) / N <= 1.2 * mu + 1e-300:
                break
            ap *= 0.6
            ad *= 0.6
            Xn = [_herm(X + ap * dX) for X, dX in zip(Xb, dXb)]
            Sn = [_herm(S + ad * dS) for S, dS in zip(Sb, dSb)]
        if ap < 1e-13 and ad < 1e-13:
            break
        Xb, Sb, y = Xn, Sn, y + ad * dy
        if max(np.linalg.norm(x) for x in Xb) > 1e9 * (1 + N) \
                or np.linalg.norm(y) > 1e11:
            break

    return finish(status, best, it)


# --- marginal-compatibility machinery --------------------------------------

_TRIPLES = list(np.ndindex(4, 4, 4))
_ZERO_TRIPLES = [t for t in _TRIPLES if 0 in t]
_BODY_TRIPLES = [t for t in _TRIPLES if 0 not in t]


def _pauli_triple(t) -> np.ndarray:
    return kron(PAULI[t[0]], PAULI[t[1]], PAULI[t[2]])


def _marginal_value(marginals, t) -> float:
    ab, ac, bc = marginals
    if t[2] == 0:
        return float(ab[t[0], t[1]])
    if t[1] == 0:
        return float(ac[t[0], t[2]])
    return float(bc[t[1], t[2]])


def marginal_constraint_system(marginals):
    """Rows <sigma_t, rho> = T_t over all 37 zero-index Pauli triples."""
    ab, ac, bc = (np.asarray(m, dtype=float) for m in marginals)
    if abs(ab[0, 0] - 1.0) > TOL.tensor_unit or abs(bc[0, 0] - 1.0) > TOL.tensor_unit:
        raise ValueError("marginal tensors must carry T[0,0] = 1")
    # single-party rows appear in two marginals; they must agree
    for j in range(4):
        for pairvals in ((ab[j, 0], ac[j, 0]), (ab[0, j], bc[j, 0]),
                         (ac[0, j], bc[0, j])):
            if abs(pairvals[0] - pairvals[1]) > 1e-9:
                raise ValueError("inconsistent overlapping marginal components")
    A = np.stack([hermitian_to_vec(_pauli_triple(t)) for t in _ZERO_TRIPLES])
    b = np.array([_marginal_value((ab, ac, bc), t) for t in _ZERO_TRIPLES])
    return A, b


def max_min_eigenvalue_extension(A, b, dim=8, shift=2.0, max_iterations=150):
    """Auxiliary SDP: maximize the minimum eigenvalue over {A(X)=b, X herm}.

    Encoded with Y = X - (t - shift) I >= 0 and a scalar slack block for the
    shifted eigenvalue bound, which is strictly feasible on both sides.
    Returns (t*, X*, exposing certificate W, solution).
    """
    aI = A @ hermitian_to_vec(np.eye(dim, dtype=complex))
    rows = np.hstack([A, aI[:, None]])
    rhs = b + shift * aI
    c = np.zeros(dim * dim + 1)
    c[-1] = 1.0
    problem = SdpProblem(block_dims=(dim, 1), objective=c,
                         constraint_matrix=rows, rhs=rhs, maximize=True)
    sol = solve(problem, max_iterations=max_iterations)
    if not sol.blocks:
        raise SdpFailure(f"auxiliary face problem failed: {sol.status}")
    tstar = sol.primal_objective - shift
    X = sol.blocks[0] + tstar * np.eye(dim)
    W = sol.dual_blocks[0]
    return tstar, X, W, sol


class MarginalExtensionProblem:
    """Shared setup for the 54 component SDPs over one set of marginals.

    Performs facial reduction up front so every component solve is strictly
    feasible; `face_dim` 8 means no reduction was necessary.
    """

    def __init__(self, marginals, face_tol: float = 1e-6):
        self.A, self.b = marginal_constraint_system(marginals)
        self.face_tol = face_tol
        self.basis = np.eye(8, dtype=complex)
        self.face_history = []
        self._reduce()

    def _reduced_system(self):
        B = self.basis
        rows = np.stack([hermitian_to_vec(B.conj().T @ _pauli_triple(t) @ B)
                         for t in _ZERO_TRIPLES])
        return rows, self.b

    def _reduce(self):
        for _ in range(4):
            rows, rhs = self._reduced_system()
            dim = self.basis.shape[1]
            tstar, X, W, _ = max_min_eigenvalue_extension(rows, rhs, dim=dim)
            self.face_history.append(tstar)
            if tstar > self.face_tol or dim == 1:
                break
            w, V = np.linalg.eigh(X)
            keep = w > max(1e-7, 10.0 * abs(tstar))
            if keep.all() or not keep.any():
                break
            self.basis = self.basis @ V[:, keep]
        rows, rhs = self._reduced_system()
        reduced = _independent_rows(rows, rhs)
        if reduced[0] is None:
            raise SdpFailure("marginal constraints inconsistent on the face")
        self.rows, self.rhs = reduced

    @property
    def face_dim(self) -> int:
        return self.basis.shape[1]

    def residual_of(self, rho: np.ndarray) -> float:
        """Constraint residual of a candidate global state (before reduction)."""
        return float(np.abs(self.A @ hermitian_to_vec(rho) - self.b).max())

    def face_leak_of(self, rho: np.ndarray) -> float:
        B = self.basis
        inside = B @ (B.conj().T @ rho @ B) @ B.conj().T
        return float(np.linalg.norm(rho - inside))

    def component_bound(self, target, direction: str,
                        warm_start=None) -> tuple:
        if any(i not in (1, 2, 3) for i in target):
            raise ValueError(f"target indices must be in 1..3, got {target}")
        B = self.basis
        G = B.conj().T @ _pauli_triple(target) @ B
        problem = SdpProblem(block_dims=(self.face_dim,),
                             objective=hermitian_to_vec(G),
                             constraint_matrix=self.rows, rhs=self.rhs,
                             maximize=(direction == "max"))
        sol = solve(problem, warm_start=warm_start)
        return sol.primal_objective, sol


def component_extremum(marginals, target, direction: str) -> float:
    """Extremal value of one correlation-tensor component over all states
    compatible with the given two-party marginals."""
    if direction not in ("max", "min"):
        raise ValueError(f"direction must be max or min, got {direction!r}")
    problem = MarginalExtensionProblem(marginals)
    value, sol = problem.component_bound(tuple(target), direction)
    if sol.status not in ("optimal",):
        raise SdpFailure(f"component SDP ended with status {sol.status}")
    return value


@dataclass(frozen=True)
class UniquenessReport:
    rows: list               # dicts: i1, i2, i3, T_lower, T_upper, gap
    max_gap: float
    unique: bool
    tolerance: float
    face_dim: int
    min_eig_extension: float  # t* of the auxiliary SDP
    all_optimal: bool
    max_solver_gap: float
    source_residual: float
    statuses: dict = field(default_factory=dict)

    def to_csv(self, path) -> None:
        lines = ["i1,i2,i3,T_lower,T_upper,gap"]
        for r in self.rows:
            lines.append(f"{r['i1']},{r['i2']},{r['i3']},"
                         f"{r['T_lower']:.12e},{r['T_upper']:.12e},{r['gap']:.12e}")
        Path(path).write_text("\n".join(lines) + "\n")

    def summary(self) -> dict:
        return {"max_gap": self.max_gap, "unique": self.unique}


def uniqueness_test(rho: DensityMatrix,
                    tolerance: float = TOL.uniqueness_gap) -> UniquenessReport:
    """Decide whether the two-party marginals of a three-qubit state pin the
    global state, by bracketing all 27 three-body tensor components."""
    T = correlation_tensor(rho)
    marginals = tuple(marginal_tensor(T, p) for p in ("AB", "AC", "BC"))
    problem = MarginalExtensionProblem(marginals)
    source_residual = problem.residual_of(np.asarray(rho.matrix))

    rows = []
    statuses = {}
    max_gap = 0.0
    max_solver_gap = 0.0
    all_optimal = True
    for t in _BODY_TRIPLES:
        upper, solU = problem.component_bound(t, "max")
        lower, solL = problem.component_bound(t, "min")
        statuses[t] = (solU.status, solL.status)
        all_optimal &= solU.optimal and solL.optimal
        max_solver_gap = max(max_solver_gap, solU.gap, solL.gap)
        gap = upper - lower
        max_gap = max(max_gap, gap)
        rows.append({"i1": t[0], "i2": t[1], "i3": t[2],
                     "T_lower": lower, "T_upper": upper, "gap": gap,
                     "T_source": float(T[t])})
    return UniquenessReport(rows=rows, max_gap=max_gap,
                            unique=max_gap <= tolerance, tolerance=tolerance,
                            face_dim=problem.face_dim,
                            min_eig_extension=problem.face_history[0],
                            all_optimal=all_optimal,
                            max_solver_gap=max_solver_gap,
                            source_residual=source_residual,
                            statuses=statuses)
