"""
Max-min fractional programming over lifted beamforming variables.

The generalized max-min problem is::

    maximize    min_i  (tr(N_i X) + n_i) / (w_i (tr(D_i X) + d_i))
    subject to  tr(P_k X) <= b_k,  X PSD

solved with a Dinkelbach-type iteration whose parametric step is one SDP.
For plain SINR balancing ``N_i = E1_i``, ``n_i = 0``; for the extended
problem used by the polyblock projection the numerator is ``1 + SINR``.
"""
import enum
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from twrbf.errors import (
    BracketError,
    DimensionError,
    DomainError,
    InfeasibleError,
    SolverError,
)
from twrbf.linalg import generalized_max_eig, unvec
from twrbf.model import QuadraticForms, SystemInstance, build_forms, outer
from twrbf.solvers.rounding import (
    PowerConstraints,
    extract_rank_one,
    gaussian_rounding,
    scale_to_budget,
)
from twrbf.solvers.sdp import (
    DEFAULT_TOL,
    Constraint,
    SdpProblem,
    SdpStatus,
    Sense,
    solve_sdp,
)
from twrbf.util import ComplexMatrix, ComplexVector, RealVector, SeedType

log = logging.getLogger(__name__)

DEFAULT_STOP_TOL = 1e-6
DEFAULT_ACCEPT_TOL = 1e-5


class Mode(enum.Enum):
    SINR = "sinr"
    ONE_PLUS_SINR = "one_plus_sinr"


@dataclass
class MaxMinSpec:
    forms: QuadraticForms
    weights: RealVector
    constraints: PowerConstraints
    mode: Mode = Mode.SINR
    initial: Optional[np.ndarray] = None

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        if self.weights.shape != (self.forms.n_users,):
            raise DimensionError(
                f"expected {self.forms.n_users} weights, got {self.weights.shape}"
            )
        if np.any(self.weights <= 0):
            raise DomainError("weights must be positive")
        self.constraints = [(np.asarray(e), float(b)) for e, b in self.constraints]
        if not self.constraints:
            raise DomainError("at least one power constraint is required")
        for _, budget in self.constraints:
            if budget <= 0:
                raise DomainError("power budgets must be positive")

    @property
    def numerator_forms(self) -> np.ndarray:
        if self.mode is Mode.ONE_PLUS_SINR:
            return self.forms.e1 + self.forms.e2
        return self.forms.e1

    @property
    def numerator_offsets(self) -> RealVector:
        if self.mode is Mode.ONE_PLUS_SINR:
            return self.forms.sigma2
        return np.zeros(self.forms.n_users)

    def ratios(self, x: np.ndarray) -> RealVector:
        num = np.real(np.einsum("kij,ji->k", self.numerator_forms, x))
        return (num + self.numerator_offsets) / self.forms.interference(x)

    def objective(self, x: np.ndarray) -> float:
        return float(np.min(self.ratios(x) / self.weights))

    def vector_objective(self, a: ComplexVector) -> float:
        return self.objective(outer(a))

    def usage(self, x: np.ndarray) -> RealVector:
        return np.array([np.real(np.trace(e @ x)) / b for e, b in self.constraints])

    def clip_to_budget(self, x: np.ndarray) -> ComplexMatrix:
        peak = float(np.max(self.usage(x)))
        if peak > 1.0:
            return x / peak
        return x

    def start(self) -> ComplexMatrix:
        """
        The feasible starting point: the initial vector (or the forms'
        reference direction) scaled so the tightest budget is binding.
        """
        if self.initial is not None and np.ndim(self.initial) == 2:
            x = np.asarray(self.initial, dtype=complex)
            peak = float(np.max(self.usage(x)))
            if peak <= 0:
                raise DomainError("initial point draws no power")
            return x / peak
        a = self.forms.reference if self.initial is None else self.initial
        scaled = scale_to_budget(np.asarray(a, dtype=complex), self.constraints)
        if scaled is None:
            raise DomainError("initial point draws no power")
        return outer(scaled)


@dataclass
class DinkelbachResult:
    lambda_opt: float
    x_opt: ComplexMatrix
    iterations: int
    lambda_trace: List[float]
    parametric_values: List[float] = field(default_factory=list)
    converged: bool = True
    rank_one_ratio: float = np.nan
    rank_one_accepted: bool = False
    rounded: Optional[Tuple[ComplexVector, float]] = None

    @property
    def upper_bound(self) -> float:
        return self.lambda_opt

    @property
    def feasible_value(self) -> float:
        if self.rounded is None:
            return np.nan
        return self.rounded[1]


def parametric_sdp(spec: MaxMinSpec, lam: float) -> SdpProblem:
    """
    maximize tau subject to ``tr((N_i - lam w_i D_i) X) + n_i - lam w_i d_i >=
    tau`` for every user and the power constraints.
    """
    if lam < 0:
        raise DomainError("the Dinkelbach parameter must be nonnegative")
    forms = spec.forms
    n = forms.dim
    constraints = []
    num, off = spec.numerator_forms, spec.numerator_offsets
    for i in range(forms.n_users):
        scale = lam * spec.weights[i]
        constraints.append(
            Constraint(
                a=num[i] - scale * forms.e2[i],
                sense=Sense.GE,
                rhs=-(off[i] - scale * forms.sigma2[i]),
                tau=-1.0,
            )
        )
    for e, budget in spec.constraints:
        constraints.append(Constraint(a=e, sense=Sense.LE, rhs=budget))
    return SdpProblem(
        objective=np.zeros((n, n), dtype=complex),
        constraints=constraints,
        tau_objective=1.0,
        maximize=True,
    )


def _round(
    spec: MaxMinSpec,
    x: np.ndarray,
    samples: int,
    seed: SeedType,
    candidates: Sequence[ComplexVector],
) -> Tuple[float, bool, Tuple[ComplexVector, float]]:
    rank = extract_rank_one(x)
    if rank.accepted:
        vector = scale_to_budget(rank.vector, spec.constraints)
        if vector is not None:
            return rank.ratio, True, (vector, spec.vector_objective(vector))
    log.info("relaxation is not rank-one (ratio %.3e); rounding", rank.ratio)
    best = gaussian_rounding(
        x,
        spec.vector_objective,
        spec.constraints,
        samples=samples,
        seed=seed,
        candidates=candidates,
    )
    return rank.ratio, rank.accepted, (best.vector, best.value)


def dinkelbach_maxmin(
    spec: MaxMinSpec,
    stop_tol: float = DEFAULT_STOP_TOL,
    max_iter: int = 50,
    sdp_tol: float = DEFAULT_TOL,
    accept_tol: float = DEFAULT_ACCEPT_TOL,
    round_result: bool = True,
    samples: int = 200,
    seed: SeedType = 0,
    lam_floor: float = 0.0,
) -> DinkelbachResult:
    """
    ``lam_floor`` is a value known to be achievable, such as the optimum of
    a problem whose weights dominate these. The first parametric step starts
    from it when the starting point does worse.
    """
    if lam_floor < 0:
        raise DomainError("lam_floor must be nonnegative")
    x_prev = spec.start()
    lam = spec.objective(x_prev)
    param = max(lam, lam_floor)
    trace = [lam]
    values: List[float] = []
    x_cur = x_prev
    converged = False

    it = 0
    for it in range(1, max_iter + 1):
        problem = parametric_sdp(spec, param)
        sol = solve_sdp(problem, tol=sdp_tol)
        if not sol.acceptable(accept_tol):
            raise SolverError(
                sol.status.value,
                "parametric SDP failed",
                stage=f"dinkelbach iteration {it}, lambda={param:.6g}",
            )
        if sol.status is SdpStatus.MAX_ITER:
            log.warning("dinkelbach %d: accepting SDP at iteration cap", it)
        x_cur = spec.clip_to_budget(sol.x)
        tau = float(sol.tau or 0.0)
        values.append(tau)
        log.debug("dinkelbach %d: lambda=%.9g tau=%.3e", it, param, tau)
        # tau is measured against the weighted interference at the iterate.
        scale = float(np.max(spec.weights * spec.forms.interference(x_cur)))
        if tau <= stop_tol * (1.0 + param) * scale:
            converged = True
            break
        new = spec.objective(x_cur)
        if new <= lam:
            # The SDP optimum is positive but within solver accuracy of zero.
            converged = True
            break
        lam = param = new
        trace.append(lam)
        x_prev = x_cur

    if not converged:
        log.warning("dinkelbach stopped at the iteration cap (%d)", max_iter)

    x_opt = x_prev
    final = spec.objective(x_cur)
    if final > trace[-1]:
        x_opt = x_cur
        trace.append(final)
    result = DinkelbachResult(
        lambda_opt=trace[-1],
        x_opt=x_opt,
        iterations=it,
        lambda_trace=trace,
        parametric_values=values,
        converged=converged,
    )
    if round_result:
        candidates = []
        if spec.initial is not None and np.ndim(spec.initial) == 1:
            candidates.append(np.asarray(spec.initial, dtype=complex))
        ratio, accepted, rounded = _round(spec, x_opt, samples, seed, candidates)
        result.rank_one_ratio = ratio
        result.rank_one_accepted = accepted
        result.rounded = rounded
    return result


def relay_spec(
    inst: SystemInstance,
    weights: Optional[RealVector] = None,
    mode: Mode = Mode.SINR,
    budget: Optional[float] = None,
) -> MaxMinSpec:
    forms = build_forms(inst)
    return MaxMinSpec(
        forms=forms,
        weights=inst.sinr_targets if weights is None else weights,
        constraints=[(forms.power[0], budget or inst.power_budget)],
        mode=mode,
    )


def relay_maxmin(inst: SystemInstance, **kwargs) -> DinkelbachResult:
    """Max-min weighted SINR for a single multi-antenna relay."""
    return dinkelbach_maxmin(relay_spec(inst), **kwargs)


def relay_matrix(forms: QuadraticForms, vector: ComplexVector) -> ComplexMatrix:
    if forms.shape is None:
        return np.diag(vector)
    return unvec(vector, *forms.shape)


@dataclass
class PowerMinResult:
    power: float
    x: ComplexMatrix
    iterations: int


def power_min(
    forms: QuadraticForms,
    targets: RealVector,
    lam: float = 1.0,
    sdp_tol: float = DEFAULT_TOL,
    accept_tol: float = DEFAULT_ACCEPT_TOL,
) -> PowerMinResult:
    """
    Minimum total relay power meeting ``SINR_i >= lam * targets_i``.
    """
    targets = np.asarray(targets, dtype=float)
    constraints = [
        Constraint(
            a=forms.e1[i] - lam * targets[i] * forms.e2[i],
            sense=Sense.GE,
            rhs=lam * targets[i] * forms.sigma2[i],
        )
        for i in range(forms.n_users)
    ]
    problem = SdpProblem(objective=forms.e0, constraints=constraints)
    sol = solve_sdp(problem, tol=sdp_tol)
    if sol.status is SdpStatus.INFEASIBLE:
        raise InfeasibleError(f"SINR targets scaled by {lam:.6g} are unattainable")
    if not sol.acceptable(accept_tol):
        raise SolverError(sol.status.value, "power minimization SDP failed")
    power = float(np.real(np.trace(forms.e0 @ sol.x)))
    return PowerMinResult(power=power, x=sol.x, iterations=sol.iterations)


def relay_power_min(inst: SystemInstance, lam: float = 1.0, **kwargs) -> PowerMinResult:
    return power_min(build_forms(inst), inst.sinr_targets, lam=lam, **kwargs)


@dataclass
class BisectionResult:
    value: float
    iterations: int
    trace: List[Tuple[float, bool]]


def maxmin_upper_bound(
    forms: QuadraticForms, targets: RealVector, budget: float
) -> float:
    """
    Upper bound on the max-min ratio. When ``tr(E0 X) <= budget`` the noise
    term satisfies ``sigma2 >= sigma2 tr(E0 X) / budget``, so each SINR is at
    most the top eigenvalue of the pencil ``(E1, E2 + sigma2 / budget E0)``.
    """
    e0 = forms.e0
    bounds = [
        generalized_max_eig(
            forms.e1[i], forms.e2[i] + forms.sigma2[i] / budget * e0
        )
        / targets[i]
        for i in range(forms.n_users)
    ]
    return float(min(bounds))


def maxmin_via_powermin(
    forms: QuadraticForms,
    targets: RealVector,
    budget: float,
    bisect_tol: float = 1e-6,
    max_iter: int = 200,
    sdp_tol: float = DEFAULT_TOL,
) -> BisectionResult:
    """
    Solve the max-min problem by bisection on ``lam`` with ``P_R(lam) =
    budget``, where ``P_R`` is the minimum power for targets ``lam * gamma``.
    """
    if len(forms.power) != 1:
        raise DimensionError("bisection on relay power needs a single power form")
    targets = np.asarray(targets, dtype=float)
    lo, hi = 0.0, maxmin_upper_bound(forms, targets, budget)
    trace: List[Tuple[float, bool]] = []
    it = 0
    while hi - lo > bisect_tol * hi:
        it += 1
        if it > max_iter:
            raise BracketError("bisection on lambda did not converge")
        mid = (lo + hi) / 2
        try:
            needed = power_min(forms, targets, lam=mid, sdp_tol=sdp_tol).power
            feasible = needed <= budget
        except SolverError as e:
            log.debug("bisection point %.6g treated as infeasible: %s", mid, e)
            feasible = False
        trace.append((mid, feasible))
        if feasible:
            lo = mid
        else:
            hi = mid
    return BisectionResult(value=lo, iterations=it, trace=trace)


def powermin_via_maxmin(
    forms: QuadraticForms,
    targets: RealVector,
    bisect_tol: float = 1e-6,
    max_doublings: int = 60,
    max_iter: int = 200,
    stop_tol: float = 1e-9,
) -> BisectionResult:
    """
    Solve the power minimization by bisection on the budget until the max-min
    ratio equals one.
    """
    if len(forms.power) != 1:
        raise DimensionError("bisection on relay power needs a single power form")
    targets = np.asarray(targets, dtype=float)
    e0 = forms.power[0]
    trace: List[Tuple[float, bool]] = []

    def reaches(budget: float) -> bool:
        spec = MaxMinSpec(forms=forms, weights=targets, constraints=[(e0, budget)])
        res = dinkelbach_maxmin(spec, stop_tol=stop_tol, round_result=False)
        ok = res.lambda_opt >= 1.0
        trace.append((budget, ok))
        return ok

    lo, hi = 0.0, 1.0
    doublings = 0
    while not reaches(hi):
        lo = hi
        hi *= 2
        doublings += 1
        if doublings > max_doublings:
            raise BracketError("SINR targets not reached at any tested budget")
    it = 0
    while hi - lo > bisect_tol * hi:
        it += 1
        if it > max_iter:
            raise BracketError("bisection on the power budget did not converge")
        mid = (lo + hi) / 2
        if reaches(mid):
            hi = mid
        else:
            lo = mid
    return BisectionResult(value=hi, iterations=it + doublings, trace=trace)

