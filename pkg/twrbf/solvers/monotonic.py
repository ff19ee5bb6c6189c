"""
Polyblock outer approximation for maximizing an increasing utility over a
normal region of ``z = 1 + SINR`` vectors.

The region is accessed only through :py:class:`NormalRegion`: a dominating
corner to start from and a projection that scales a point onto the upper
boundary. :py:class:`SinrRegion` projects with the extended max-min solver.
"""
import enum
import logging
import time
from dataclasses import dataclass, field
from typing import Any, Callable, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from twrbf.errors import DomainError, SolverError
from twrbf.linalg import generalized_max_eig, hermitian, lambda_min
from twrbf.model import QuadraticForms, SystemInstance, build_forms, partner
from twrbf.solvers.fractional import (
    DEFAULT_STOP_TOL,
    MaxMinSpec,
    Mode,
    dinkelbach_maxmin,
)
from twrbf.solvers.rounding import PowerConstraints, gaussian_rounding
from twrbf.util import ComplexVector, RealVector, SeedType
from twrbf.utility import Utility

log = logging.getLogger(__name__)

DEFAULT_EPS = 0.01
VERTEX_CAP = 100_000
# Projections with lambda this close to one are treated as boundary points.
BOUNDARY_TOL = 1e-9


class Projection(NamedTuple):
    lam: float
    point: RealVector
    payload: Any


class WarmStart(NamedTuple):
    """
    What a child vertex inherits from its parent's projection. The child
    lies below the parent, so the parent's scaling factor is a lower bracket
    for the child's.
    """

    x: Any
    lam: float


class NormalRegion:
    def dimension(self) -> int:
        raise NotImplementedError("abstract base is not implemented")

    def upper_corner(self) -> RealVector:
        raise NotImplementedError("abstract base is not implemented")

    def project(self, z: RealVector, hint: Any = None) -> Projection:
        raise NotImplementedError("abstract base is not implemented")

    def finalize(
        self, payload: Any, utility: Utility
    ) -> Optional[Tuple[ComplexVector, float]]:
        """
        Turn the payload of the best projection into a feasible beamformer
        and its utility. Regions without beamformers return None.
        """
        return None


class SinrRegion(NormalRegion):
    """
    The achievable ``1 + SINR`` region of a lifted SINR system under power
    constraints.
    """

    def __init__(
        self,
        forms: QuadraticForms,
        constraints: PowerConstraints,
        corner: RealVector,
        stop_tol: float = DEFAULT_STOP_TOL,
        samples: int = 200,
        seed: SeedType = 0,
        incumbent: Optional[ComplexVector] = None,
    ):
        self.forms = forms
        self.constraints = constraints
        self.corner = np.asarray(corner, dtype=float)
        self.stop_tol = stop_tol
        self.samples = samples
        self.seed = seed
        self.incumbent = incumbent
        self.projections = 0

    def dimension(self) -> int:
        return self.forms.n_users

    def upper_corner(self) -> RealVector:
        return self.corner.copy()

    def project(self, z: RealVector, hint: Any = None) -> Projection:
        lam_floor = 0.0
        initial = self.incumbent
        if isinstance(hint, WarmStart):
            initial, lam_floor = hint.x, hint.lam
        elif hint is not None:
            initial = hint
        spec = MaxMinSpec(
            forms=self.forms,
            weights=z,
            constraints=self.constraints,
            mode=Mode.ONE_PLUS_SINR,
            initial=initial,
        )
        res = dinkelbach_maxmin(
            spec, stop_tol=self.stop_tol, round_result=False, lam_floor=lam_floor
        )
        self.projections += 1
        return Projection(res.lambda_opt, res.lambda_opt * np.asarray(z), res.x_opt)

    def finalize(
        self, payload: Any, utility: Utility
    ) -> Optional[Tuple[ComplexVector, float]]:
        def objective(a: ComplexVector) -> float:
            return utility(1.0 + self.forms.ratios_of_vector(a))

        extra = [] if self.incumbent is None else [self.incumbent]
        best = gaussian_rounding(
            payload,
            objective,
            self.constraints,
            samples=self.samples,
            seed=self.seed,
            candidates=extra,
        )
        return best.vector, best.value


def initial_vertex(inst: SystemInstance) -> RealVector:
    """
    A corner dominating every achievable ``1 + SINR``. Two bounds hold for
    user ``i`` with partner ``j``:

    ``SINR_i <= p_j P_R ||h_i||^2 ||h_j||^2 / (sigma_i^2 lambda_min(Lambda_R))``
    because ``||A||^2 <= P_R / lambda_min(Lambda_R)``, and
    ``SINR_i <= P_R ||h_i||^2 / sigma_i^2`` because ``p_j ||A h_j||^2 <= P_R``.
    The smaller one is used.
    """
    norms = np.sum(np.abs(inst.channels) ** 2, axis=1)
    floor = lambda_min(inst.relay_noise)
    d = np.zeros(inst.n_users)
    for i in range(inst.n_users):
        j = partner(i)
        budget_bound = inst.power_budget * norms[i] / inst.user_noise[i]
        if floor > 0:
            noise_bound = (
                inst.user_powers[j]
                * inst.power_budget
                * norms[i]
                * norms[j]
                / (inst.user_noise[i] * floor)
            )
            budget_bound = min(budget_bound, noise_bound)
        d[i] = 1.0 + budget_bound
    return d


def region_corner(
    forms: QuadraticForms, constraints: PowerConstraints
) -> RealVector:
    """
    A dominating corner for any lifted system. Feasibility gives
    ``sum_k tr(P_k X) / b_k <= K``, so user ``i``'s noise term is at least
    ``sigma2_i / K`` times that sum and each SINR is bounded by the top
    eigenvalue of the resulting pencil.
    """
    total = sum(e / b for e, b in constraints) / len(constraints)
    d = np.zeros(forms.n_users)
    for i in range(forms.n_users):
        b = hermitian(forms.e2[i] + forms.sigma2[i] * total)
        try:
            bound = generalized_max_eig(forms.e1[i], b)
        except np.linalg.LinAlgError:
            jitter = 1e-12 * max(float(np.real(np.trace(b))), 1.0)
            bound = generalized_max_eig(forms.e1[i], b + jitter * np.eye(b.shape[0]))
        d[i] = 1.0 + max(bound, 0.0)
    return d


def relay_region(inst: SystemInstance, **kwargs) -> SinrRegion:
    forms = build_forms(inst)
    return SinrRegion(
        forms, [(forms.power[0], inst.power_budget)], initial_vertex(inst), **kwargs
    )


def project(z: RealVector, region: NormalRegion, hint: Any = None) -> Projection:
    z = np.asarray(z, dtype=float)
    if np.any(z < 1.0):
        raise DomainError(f"projection point must satisfy z >= 1, got {z}")
    return region.project(z, hint)


def children(z: RealVector, y: RealVector) -> List[RealVector]:
    """
    Vertices replacing ``z`` once ``y`` on the segment below it is known:
    child ``i`` is ``z`` with coordinate ``i`` lowered to ``y_i``.
    """
    z = np.asarray(z, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(y > z * (1 + 1e-12)):
        raise DomainError("projection lies above the vertex")
    out = []
    for i in range(z.shape[0]):
        if y[i] < z[i]:
            c = z.copy()
            c[i] = y[i]
            out.append(c)
    return out


def dominated(z: RealVector, others: Sequence[RealVector]) -> bool:
    """True if some other point is element-wise >= z."""
    for o in others:
        if o is z:
            continue
        if np.all(o >= z):
            return True
    return False


def proper(points: Sequence[RealVector]) -> List[RealVector]:
    out: List[RealVector] = []
    for k, p in enumerate(points):
        later = points[k + 1 :]
        if dominated(p, out) or dominated(p, later):
            continue
        out.append(p)
    return out


# Vertices are compared by identity; z is an array.
@dataclass(eq=False)
class Vertex:
    z: RealVector
    phi: float
    hint: Any = None


class PolyblockStatus(enum.Enum):
    CONVERGED = "converged"
    MAX_ITER = "max_iter"
    VERTEX_OVERFLOW = "vertex_overflow"
    # Wall-clock or projection budget spent; the incumbent is returned.
    BUDGET = "budget"


class TraceRow(NamedTuple):
    iteration: int
    vertices: int
    cbv: float
    ub: float


@dataclass
class PolyblockResult:
    z_best: Optional[RealVector]
    x_best: Any
    cbv: float
    ub: float
    status: PolyblockStatus
    iterations: int
    trace: List[TraceRow] = field(default_factory=list)
    rounded: Optional[Tuple[ComplexVector, float]] = None

    @property
    def ub_trace(self) -> List[float]:
        return [row.ub for row in self.trace]

    @property
    def cbv_trace(self) -> List[float]:
        return [row.cbv for row in self.trace]

    @property
    def feasible_value(self) -> float:
        if self.rounded is None:
            return self.cbv
        return self.rounded[1]


IterationCallback = Callable[[int, List[Vertex], float, float], None]


def _select(vertices: List[Vertex]) -> Vertex:
    return min(vertices, key=lambda v: (-v.phi, tuple(v.z)))


def polyblock_maximize(
    region: NormalRegion,
    utility: Utility,
    eps: float = DEFAULT_EPS,
    max_iter: int = 1000,
    vertex_cap: int = VERTEX_CAP,
    on_iteration: Optional[IterationCallback] = None,
    max_seconds: Optional[float] = None,
    max_projections: Optional[int] = None,
) -> PolyblockResult:
    """
    Maximize ``utility`` over ``region`` to relative accuracy ``eps``.

    ``max_seconds`` and ``max_projections`` bound the work; when either runs
    out the search stops with status ``BUDGET`` and returns the incumbent
    with the current upper bound.
    """
    if eps <= 0:
        raise DomainError("eps must be positive")
    if max_seconds is not None and max_seconds <= 0:
        raise DomainError("max_seconds must be positive")
    if max_projections is not None and max_projections < 1:
        raise DomainError("max_projections must be at least one")
    started = time.monotonic()
    corner = region.upper_corner()
    vertices = [Vertex(corner, utility(corner))]
    cbv = -np.inf
    z_best: Optional[RealVector] = None
    x_best: Any = None
    # Largest utility among vertices discarded without being split.
    dropped = -np.inf
    trace: List[TraceRow] = []
    status = PolyblockStatus.CONVERGED

    it = 0
    while vertices:
        if it >= max_iter:
            status = PolyblockStatus.MAX_ITER
            break
        if max_projections is not None and it >= max_projections:
            status = PolyblockStatus.BUDGET
            break
        if max_seconds is not None and time.monotonic() - started > max_seconds:
            status = PolyblockStatus.BUDGET
            break
        it += 1
        top = _select(vertices)
        vertices = [v for v in vertices if v is not top]
        try:
            proj = project(top.z, region, top.hint)
        except SolverError as e:
            raise e.with_stage(f"polyblock projection {it}")

        if proj.lam >= 1.0 - BOUNDARY_TOL:
            # The vertex itself is achievable; nothing above it to split.
            if top.phi > cbv:
                cbv, z_best, x_best = top.phi, top.z, proj.payload
            dropped = max(dropped, top.phi)
            new: List[RealVector] = []
        else:
            y = proj.point
            if np.all(y >= 1.0):
                value = utility(y)
                if value > cbv:
                    cbv, z_best, x_best = value, y, proj.payload
            new = [c for c in children(top.z, y) if np.all(c >= 1.0)]

        existing = [v.z for v in vertices]
        kept = proper(new)
        kept = [c for c in kept if not dominated(c, existing)]
        hint = WarmStart(proj.payload, proj.lam) if proj.payload is not None else None
        vertices.extend(Vertex(c, utility(c), hint) for c in kept)

        if np.isfinite(cbv):
            threshold = cbv + eps * abs(cbv)
            survivors = []
            for v in vertices:
                if v.phi <= threshold:
                    dropped = max(dropped, v.phi)
                else:
                    survivors.append(v)
            vertices = survivors

        ub = max([v.phi for v in vertices] + [dropped])
        trace.append(TraceRow(it, len(vertices), cbv, ub))
        log.debug("polyblock %d: |T|=%d cbv=%.9g ub=%.9g", it, len(vertices), cbv, ub)
        if on_iteration is not None:
            on_iteration(it, vertices, cbv, ub)
        if len(vertices) > vertex_cap:
            status = PolyblockStatus.VERTEX_OVERFLOW
            break

    ub = trace[-1].ub if trace else utility(corner)
    if status is not PolyblockStatus.CONVERGED:
        log.warning("polyblock stopped with status %s after %d", status.value, it)
    result = PolyblockResult(
        z_best=z_best,
        x_best=x_best,
        cbv=cbv,
        ub=ub,
        status=status,
        iterations=it,
        trace=trace,
    )
    if x_best is not None:
        result.rounded = region.finalize(x_best, utility)
    return result


def maximize_utility(
    inst: SystemInstance, utility: Utility, eps: float = DEFAULT_EPS, **kwargs
) -> PolyblockResult:
    """Utility maximization for a single multi-antenna relay."""
    return polyblock_maximize(relay_region(inst), utility, eps=eps, **kwargs)
