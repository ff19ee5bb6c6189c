"""
Dense semidefinite programming over a single complex Hermitian block.

Problems have the form::

    minimize (or maximize)  <C, X> + c_tau * tau
    subject to              <A_j, X> + t_j * tau  (<=, >=, ==)  b_j
                            X Hermitian PSD, tau free

where ``<A, X> = Re tr(A X)``. The native solver is an infeasible-start
primal-dual path-following method with the HKM search direction and
Mehrotra's predictor-corrector. Inequalities are turned into equalities with
nonnegative slacks, so internally the cone is one PSD block, a nonnegative
orthant and one free scalar.
"""
import enum
import logging
from dataclasses import dataclass, field
from typing import IO, List, NamedTuple, Optional, Tuple

import numpy as np
import scipy.linalg

from twrbf.errors import DimensionError, SolverError
from twrbf.linalg import hermitian
from twrbf.util import ComplexMatrix, RealVector

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-7
DEFAULT_MAX_ITER = 100

# Certificate ratio below which an iterate sequence is declared infeasible.
INFEASIBILITY_TOL = 1e-8

STEP_FACTOR = 0.98
# Relative eigenvalue floor when a factorization falls back to eigh.
EIG_FLOOR = 1e-14
BACKTRACK_STEPS = 30


class Sense(enum.Enum):
    LE = "<="
    GE = ">="
    EQ = "=="


class SdpStatus(enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    MAX_ITER = "max_iter"


@dataclass
class Constraint:
    a: ComplexMatrix
    sense: Sense
    rhs: float
    tau: float = 0.0


@dataclass
class SdpProblem:
    """
    ``tau_objective`` is ``None`` when the problem has no scalar variable.
    """

    objective: ComplexMatrix
    constraints: List[Constraint]
    tau_objective: Optional[float] = None
    maximize: bool = False

    def __post_init__(self):
        self.objective = hermitian(self.objective)
        n = self.objective.shape[0]
        for j, c in enumerate(self.constraints):
            c.a = hermitian(c.a)
            if c.a.shape != (n, n):
                raise DimensionError(
                    f"constraint {j} has shape {c.a.shape}, expected {(n, n)}"
                )
            c.rhs = float(c.rhs)
            c.tau = float(c.tau)
            if c.tau != 0.0 and self.tau_objective is None:
                raise DimensionError(f"constraint {j} uses tau, but tau is absent")

    @property
    def dim(self) -> int:
        return int(self.objective.shape[0])

    @property
    def has_tau(self) -> bool:
        return self.tau_objective is not None

    def lhs(self, x: np.ndarray, tau: float = 0.0) -> RealVector:
        """Left-hand sides of all constraints at (x, tau)."""
        return np.array(
            [np.real(np.trace(c.a @ x)) + c.tau * tau for c in self.constraints]
        )

    def violations(self, x: np.ndarray, tau: float = 0.0) -> RealVector:
        """
        Per-constraint violation, relative to
        ``1 + |b_j| + ||A_j|| ||X|| + |t_j tau|``.
        """
        lhs = self.lhs(x, tau)
        x_norm = float(np.linalg.norm(x))
        out = np.zeros(len(self.constraints))
        for j, c in enumerate(self.constraints):
            if c.sense is Sense.EQ:
                v = abs(lhs[j] - c.rhs)
            elif c.sense is Sense.LE:
                v = max(0.0, lhs[j] - c.rhs)
            else:
                v = max(0.0, c.rhs - lhs[j])
            size = np.linalg.norm(c.a) * x_norm + abs(c.tau * tau)
            out[j] = v / (1.0 + abs(c.rhs) + size)
        return out

    def value(self, x: np.ndarray, tau: float = 0.0) -> float:
        v = float(np.real(np.trace(self.objective @ x)))
        if self.tau_objective is not None:
            v += self.tau_objective * tau
        return v


@dataclass
class SdpSolution:
    status: SdpStatus
    x: ComplexMatrix
    tau: Optional[float]
    y: RealVector
    z: ComplexMatrix
    primal_objective: float
    dual_objective: float
    gap: float
    iterations: int
    primal_residual: float = 0.0
    dual_residual: float = 0.0
    backend: str = field(default="native")

    @property
    def optimal(self) -> bool:
        return self.status is SdpStatus.OPTIMAL

    def acceptable(self, accept_tol: float) -> bool:
        """
        True for optimal solutions and for iteration-capped ones whose
        residuals and gap are still within ``accept_tol``.
        """
        if self.optimal:
            return True
        if self.status is not SdpStatus.MAX_ITER:
            return False
        return max(self.primal_residual, self.dual_residual, self.gap) <= accept_tol


def solve_sdp(
    problem: SdpProblem,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    backend: str = "native",
) -> SdpSolution:
    if backend == "native":
        return InteriorPointSolver(problem, tol=tol, max_iter=max_iter).solve()
    if backend == "cvxpy":
        return _solve_cvxpy(problem, tol)
    raise ValueError(f"unknown SDP backend {backend!r}")


def _psd_factor(s: np.ndarray) -> np.ndarray:
    """
    A factor ``L`` with ``s = L L^H``: the Cholesky factor, or a clipped
    eigendecomposition when ``s`` is only numerically semidefinite.
    """
    try:
        return scipy.linalg.cholesky(s, lower=True)
    except np.linalg.LinAlgError:
        w, v = scipy.linalg.eigh(hermitian(s))
        floor = EIG_FLOOR * max(float(w[-1]), 1.0)
        return v * np.sqrt(np.maximum(w, floor))


def _psd_inverse(s: np.ndarray) -> np.ndarray:
    try:
        chol = scipy.linalg.cho_factor(s, lower=True)
        return hermitian(scipy.linalg.cho_solve(chol, np.eye(s.shape[0])))
    except np.linalg.LinAlgError:
        w, v = scipy.linalg.eigh(hermitian(s))
        floor = EIG_FLOOR * max(float(w[-1]), 1.0)
        return hermitian((v / np.maximum(w, floor)) @ v.conj().T)


def _is_pd(s: np.ndarray) -> bool:
    try:
        scipy.linalg.cholesky(s, lower=True)
    except np.linalg.LinAlgError:
        return False
    return True


def _max_step_psd(s: np.ndarray, ds: np.ndarray) -> float:
    """Largest alpha with s + alpha * ds PSD, for s positive definite."""
    factor = _psd_factor(s)
    p = scipy.linalg.solve(factor, ds)
    q = scipy.linalg.solve(factor, p.conj().T)
    lam = scipy.linalg.eigh(hermitian(q), eigvals_only=True)[0]
    if lam >= 0:
        return np.inf
    return -1.0 / lam


def _backtrack(s: np.ndarray, ds: np.ndarray, alpha: float) -> float:
    """Shrink alpha until s + alpha * ds factors as positive definite."""
    for _ in range(BACKTRACK_STEPS):
        if _is_pd(hermitian(s + alpha * ds)):
            return alpha
        alpha *= 0.8
    return 0.0


def _max_step_orthant(x: np.ndarray, dx: np.ndarray) -> float:
    neg = dx < 0
    if not np.any(neg):
        return np.inf
    return float(np.min(-x[neg] / dx[neg]))


class _Iterate(NamedTuple):
    x: np.ndarray
    xl: np.ndarray
    tau: float
    y: np.ndarray
    z: np.ndarray
    zl: np.ndarray


class _Measure(NamedTuple):
    pinf: float
    dinf: float
    relgap: float
    pobj: float
    dobj: float
    mu: float
    rp: np.ndarray
    rd: np.ndarray
    rl: np.ndarray
    rf: float

    @property
    def score(self) -> float:
        return max(self.pinf, self.dinf, self.relgap)


class InteriorPointSolver:
    """
    Single-use solver for one :py:class:`SdpProblem`.

    The matrix variable is rescaled so the tightest ``<=`` budget admits a
    unit multiple of the identity, rows are equilibrated to unit norm and the
    objective is scaled to unit norm before iterating; the returned solution
    is in the caller's units.
    """

    def __init__(
        self,
        problem: SdpProblem,
        tol: float = DEFAULT_TOL,
        max_iter: int = DEFAULT_MAX_ITER,
    ):
        self.problem = problem
        self.tol = tol
        self.max_iter = max_iter
        self._used = False
        self._stalls = 0

        n = problem.dim
        cons = problem.constraints
        m = len(cons)
        sign = -1.0 if problem.maximize else 1.0

        a = np.array([c.a for c in cons], dtype=complex).reshape(m, n, n)
        b = np.array([c.rhs for c in cons], dtype=float)
        t = np.array([c.tau for c in cons], dtype=float)
        slack_rows = [j for j, c in enumerate(cons) if c.sense is not Sense.EQ]
        g = np.zeros((m, len(slack_rows)))
        for k, j in enumerate(slack_rows):
            g[j, k] = 1.0 if cons[j].sense is Sense.LE else -1.0

        self.x_scale = _variable_scale(cons)
        a = a * self.x_scale

        row_norm = np.sqrt(np.sum(np.abs(a) ** 2, axis=(1, 2)) + t ** 2)
        row_norm[row_norm == 0] = 1.0
        self.row_norm = row_norm

        c_mat = sign * self.x_scale * problem.objective
        c_tau = sign * (problem.tau_objective or 0.0)
        self.obj_scale = max(1.0, float(np.linalg.norm(c_mat)), abs(c_tau))

        self.n = n
        self.m = m
        self.sign = sign
        self.a = a / row_norm[:, None, None]
        self.b = b / row_norm
        self.t = t / row_norm
        self.g = g
        self.c = c_mat / self.obj_scale
        self.c_tau = c_tau / self.obj_scale
        self.b_norm = 1.0 + float(np.linalg.norm(self.b))
        self.c_norm = 1.0 + float(np.linalg.norm(self.c)) + abs(self.c_tau)

    def _op(self, x: np.ndarray) -> RealVector:
        return np.real(np.einsum("jkl,lk->j", self.a, x))

    def _adj(self, y: np.ndarray) -> ComplexMatrix:
        return np.einsum("j,jkl->kl", y, self.a)

    def _measure(self, it: _Iterate) -> _Measure:
        rp = self.b - self._op(it.x) - self.g @ it.xl - self.t * it.tau
        rd = self.c - self._adj(it.y) - it.z
        rl = -self.g.T @ it.y - it.zl
        rf = self.c_tau - self.t @ it.y if self.problem.has_tau else 0.0

        pobj = float(np.real(np.trace(self.c @ it.x))) + self.c_tau * it.tau
        dobj = float(self.b @ it.y)
        gap = float(np.real(np.trace(it.x @ it.z))) + float(it.xl @ it.zl)
        mu = gap / (self.n + self.g.shape[1])

        pinf = float(np.linalg.norm(rp)) / self.b_norm
        dinf = float(
            np.sqrt(np.linalg.norm(rd) ** 2 + np.linalg.norm(rl) ** 2 + rf ** 2)
        ) / self.c_norm
        relgap = max(gap, abs(pobj - dobj)) / (1.0 + abs(pobj) + abs(dobj))
        return _Measure(pinf, dinf, relgap, pobj, dobj, mu, rp, rd, rl, rf)

    def solve(self) -> SdpSolution:
        if self._used:
            raise SolverError("misuse", "interior point solvers are single-use")
        self._used = True

        n, m = self.n, self.m
        ns = self.g.shape[1]
        has_tau = self.problem.has_tau
        ident = np.eye(n, dtype=complex)
        big_n = n + ns

        b_max = float(np.max(np.abs(self.b), initial=0.0))
        xi = max(10.0, np.sqrt(n), np.sqrt(n) * (1.0 + b_max) / 2)
        eta = max(10.0, np.sqrt(n))
        cur = _Iterate(
            x=xi * ident,
            xl=xi * np.ones(ns),
            tau=0.0,
            y=np.zeros(m),
            z=eta * ident,
            zl=eta * np.ones(ns),
        )
        best: Optional[Tuple[_Iterate, _Measure]] = None

        status = SdpStatus.MAX_ITER
        it = 0
        meas = self._measure(cur)
        for it in range(1, self.max_iter + 1):
            meas = self._measure(cur)
            if best is None or meas.score < best[1].score:
                best = (cur, meas)
            log.debug(
                "ipm %d: pobj=%.9e dobj=%.9e pinf=%.2e dinf=%.2e gap=%.2e",
                it,
                meas.pobj,
                meas.dobj,
                meas.pinf,
                meas.dinf,
                meas.relgap,
            )
            if meas.score <= self.tol:
                status = SdpStatus.OPTIMAL
                break

            if meas.dobj > 0:
                ratio = (
                    float(np.linalg.norm(meas.rd - self.c))
                    + float(np.linalg.norm(meas.rl))
                    + abs(self.c_tau - meas.rf)
                ) / meas.dobj
                if ratio < INFEASIBILITY_TOL:
                    status = SdpStatus.INFEASIBLE
                    break
            if meas.pobj < 0:
                ratio = float(np.linalg.norm(self.b - meas.rp)) / -meas.pobj
                if ratio < INFEASIBILITY_TOL:
                    status = SdpStatus.UNBOUNDED
                    break

            try:
                nxt = self._step(cur, meas, ident, big_n, has_tau)
            except (np.linalg.LinAlgError, ValueError) as e:
                log.warning("ipm %d: numerical breakdown (%s)", it, e)
                break
            if nxt is None:
                log.warning("ipm %d: step lengths stalled", it)
                break
            cur = nxt
        else:
            meas = self._measure(cur)
            if meas.score <= self.tol:
                status = SdpStatus.OPTIMAL

        if status is SdpStatus.MAX_ITER and best is not None:
            if best[1].score < meas.score:
                log.debug("ipm: returning the best iterate seen")
                cur, meas = best
        return self._solution(status, it, cur, meas)

    def _step(
        self,
        cur: _Iterate,
        meas: _Measure,
        ident: np.ndarray,
        big_n: int,
        has_tau: bool,
    ) -> Optional[_Iterate]:
        """One predictor-corrector step; None when both step lengths vanish."""
        m = self.m
        x, xl, y, z, zl = cur.x, cur.xl, cur.y, cur.z, cur.zl
        rp, rd, rl, rf, mu = meas.rp, meas.rd, meas.rl, meas.rf, meas.mu

        z_inv = _psd_inverse(z)
        w = z_inv @ self.a @ x
        schur = np.real(np.einsum("ikl,jlk->ij", self.a, w))
        schur = (schur + schur.T) / 2 + (self.g * (xl / zl)) @ self.g.T
        ridge = max(1.0, float(np.max(np.diag(schur), initial=1.0)))
        schur[np.diag_indices(m)] += 1e-14 * ridge
        if has_tau:
            kkt = np.zeros((m + 1, m + 1))
            kkt[:m, :m] = schur
            kkt[:m, m] = self.t
            kkt[m, :m] = self.t
        else:
            kkt = schur
        lu = scipy.linalg.lu_factor(kkt, check_finite=True)

        def direction(rc, rcl):
            tmat = (rc - x @ rd) @ z_inv
            rhs = rp - self._op(tmat) - self.g @ ((rcl - xl * rl) / zl)
            if has_tau:
                sol = scipy.linalg.lu_solve(lu, np.append(rhs, rf))
                dy, dtau = sol[:m], float(sol[m])
            else:
                dy, dtau = scipy.linalg.lu_solve(lu, rhs), 0.0
            dz = rd - self._adj(dy)
            dx = hermitian((rc - x @ dz) @ z_inv)
            dzl = rl - self.g.T @ dy
            dxl = (rcl - xl * dzl) / zl
            return dx, dxl, dtau, dy, dz, dzl

        def steps(dx, dxl, dz, dzl):
            ap = min(_max_step_psd(x, dx), _max_step_orthant(xl, dxl))
            ad = min(_max_step_psd(z, dz), _max_step_orthant(zl, dzl))
            return min(1.0, STEP_FACTOR * ap), min(1.0, STEP_FACTOR * ad)

        xz = x @ z
        dx, dxl, dtau, dy, dz, dzl = direction(-xz, -xl * zl)
        ap, ad = steps(dx, dxl, dz, dzl)
        mu_aff = (
            float(np.real(np.trace((x + ap * dx) @ (z + ad * dz))))
            + float((xl + ap * dxl) @ (zl + ad * dzl))
        ) / big_n
        sigma = min(1.0, max(0.0, mu_aff / mu)) ** 3 if mu > 0 else 0.0

        rc = sigma * mu * ident - xz - dx @ dz
        rcl = sigma * mu - xl * zl - dxl * dzl
        dx, dxl, dtau, dy, dz, dzl = direction(rc, rcl)
        ap, ad = steps(dx, dxl, dz, dzl)
        # Rounding can leave a full step just outside the cone.
        ap = _backtrack(x, dx, ap)
        ad = _backtrack(z, dz, ad)

        if ap < 1e-10 and ad < 1e-10:
            self._stalls += 1
            if self._stalls >= 3:
                return None
        else:
            self._stalls = 0
        return _Iterate(
            x=hermitian(x + ap * dx),
            xl=xl + ap * dxl,
            tau=cur.tau + ap * dtau,
            y=y + ad * dy,
            z=hermitian(z + ad * dz),
            zl=zl + ad * dzl,
        )

    def _solution(self, status, it, cur: _Iterate, meas: _Measure) -> SdpSolution:
        problem = self.problem
        x = self.x_scale * cur.x
        tau = cur.tau
        y_orig = self.obj_scale * cur.y / self.row_norm
        primal = problem.value(x, tau)
        b = np.array([c.rhs for c in problem.constraints])
        dual = self.sign * float(b @ y_orig)
        viol = problem.violations(x, tau)
        if status is SdpStatus.OPTIMAL:
            log.debug("sdp optimal after %d iterations, value %.9e", it, primal)
        else:
            log.debug("sdp stopped after %d iterations with %s", it, status.value)
        return SdpSolution(
            status=status,
            x=x,
            tau=float(tau) if problem.has_tau else None,
            y=y_orig,
            z=self.obj_scale * cur.z / self.x_scale,
            primal_objective=primal,
            dual_objective=dual,
            gap=float(meas.relgap),
            iterations=it,
            primal_residual=float(np.max(viol, initial=0.0)),
            dual_residual=float(meas.dinf),
        )


def _variable_scale(constraints: List[Constraint]) -> float:
    """
    The largest ``s`` with ``<A_j, s I> <= b_j`` for every ``<=`` row with a
    positive budget and positive trace; 1 when there is none.
    """
    scales = []
    for c in constraints:
        if c.sense is not Sense.LE or c.rhs <= 0:
            continue
        trace = float(np.real(np.trace(c.a)))
        if trace > 0:
            scales.append(c.rhs / trace)
    return min(scales) if scales else 1.0


def _solve_cvxpy(problem: SdpProblem, tol: float) -> SdpSolution:
    import cvxpy as cp

    n = problem.dim
    x = cp.Variable((n, n), hermitian=True)
    tau = cp.Variable() if problem.has_tau else None
    cons = [x >> 0]
    for c in problem.constraints:
        expr = cp.real(cp.trace(c.a @ x))
        if tau is not None and c.tau != 0.0:
            expr = expr + c.tau * tau
        if c.sense is Sense.LE:
            cons.append(expr <= c.rhs)
        elif c.sense is Sense.GE:
            cons.append(expr >= c.rhs)
        else:
            cons.append(expr == c.rhs)
    obj = cp.real(cp.trace(problem.objective @ x))
    if tau is not None:
        obj = obj + (problem.tau_objective or 0.0) * tau
    goal = cp.Maximize(obj) if problem.maximize else cp.Minimize(obj)
    prob = cp.Problem(goal, cons)
    prob.solve()

    statuses = {
        cp.OPTIMAL: SdpStatus.OPTIMAL,
        cp.OPTIMAL_INACCURATE: SdpStatus.OPTIMAL,
        cp.INFEASIBLE: SdpStatus.INFEASIBLE,
        cp.INFEASIBLE_INACCURATE: SdpStatus.INFEASIBLE,
        cp.UNBOUNDED: SdpStatus.UNBOUNDED,
        cp.UNBOUNDED_INACCURATE: SdpStatus.UNBOUNDED,
    }
    status = statuses.get(prob.status, SdpStatus.MAX_ITER)
    if x.value is None:
        xv = np.zeros((n, n), dtype=complex)
    else:
        xv = hermitian(x.value)
    tv = float(tau.value) if tau is not None and tau.value is not None else 0.0
    duals = np.array(
        [
            float(np.real(np.sum(c.dual_value))) if c.dual_value is not None else 0.0
            for c in cons[1:]
        ]
    )
    value = float(prob.value) if prob.value is not None else np.nan
    return SdpSolution(
        status=status,
        x=xv,
        tau=tv if problem.has_tau else None,
        y=duals,
        z=np.zeros((n, n), dtype=complex),
        primal_objective=value,
        dual_objective=value,
        gap=0.0,
        iterations=int(prob.solver_stats.num_iters or 0),
        primal_residual=float(np.max(problem.violations(xv, tv), initial=0.0)),
        backend="cvxpy",
    )


def _num(v: float) -> str:
    # repr of a builtin float; numpy scalars repr as np.float64(...).
    return repr(float(v))


def _write_entries(fo: IO[str], m: np.ndarray) -> None:
    n = m.shape[0]
    for i in range(n):
        for j in range(i, n):
            v = m[i, j]
            if v != 0:
                fo.write(f"{i + 1} {j + 1} {_num(v.real)} {_num(v.imag)}\n")


def dump_problem(problem: SdpProblem, fo: IO[str]) -> None:
    """
    Write ``problem`` as plain text. The layout is::

        twrbf-sdp 1
        <dim> <constraint count> <max|min> <tau objective or "none">
        objective
        <row> <col> <real> <imag>        (1-based, upper triangle, nonzeros)
        constraint <j> <sense> <rhs> <tau coefficient>
        <row> <col> <real> <imag>
        ...
    """
    tau_obj = "none" if problem.tau_objective is None else _num(problem.tau_objective)
    goal = "max" if problem.maximize else "min"
    fo.write("twrbf-sdp 1\n")
    fo.write(f"{problem.dim} {len(problem.constraints)} {goal} {tau_obj}\n")
    fo.write("objective\n")
    _write_entries(fo, problem.objective)
    for j, c in enumerate(problem.constraints):
        fo.write(f"constraint {j} {c.sense.value} {_num(c.rhs)} {_num(c.tau)}\n")
        _write_entries(fo, c.a)


def read_problem(fo: IO[str]) -> SdpProblem:
    """Read a problem written by :py:func:`dump_problem`."""
    lines = [ln.split() for ln in fo.read().splitlines() if ln.strip()]
    if not lines or lines[0] != ["twrbf-sdp", "1"]:
        raise ValueError("not a twrbf SDP dump")
    n, m = int(lines[1][0]), int(lines[1][1])
    maximize = lines[1][2] == "max"
    tau_obj = None if lines[1][3] == "none" else float(lines[1][3])

    blocks: List[Tuple[List[str], np.ndarray]] = []
    current = None
    for parts in lines[2:]:
        if parts[0] in ("objective", "constraint"):
            current = np.zeros((n, n), dtype=complex)
            blocks.append((parts, current))
            continue
        i, j = int(parts[0]) - 1, int(parts[1]) - 1
        v = complex(float(parts[2]), float(parts[3]))
        current[i, j] = v
        current[j, i] = v.conjugate()
    if len(blocks) != m + 1:
        raise ValueError(f"expected {m} constraints, found {len(blocks) - 1}")

    constraints = [
        Constraint(a=mat, sense=Sense(head[2]), rhs=float(head[3]), tau=float(head[4]))
        for head, mat in blocks[1:]
    ]
    return SdpProblem(
        objective=blocks[0][1],
        constraints=constraints,
        tau_objective=tau_obj,
        maximize=maximize,
    )
