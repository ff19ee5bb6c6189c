"""
Recovering beamforming vectors from lifted SDP solutions.
"""
import logging
from typing import Callable, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from twrbf.errors import DomainError
from twrbf.linalg import herm_eig, psd_sqrt
from twrbf.model import QuadraticForms, outer
from twrbf.util import ComplexMatrix, ComplexVector, RealVector, SeedType, make_rng

log = logging.getLogger(__name__)

PowerConstraints = Sequence[Tuple[ComplexMatrix, float]]
Objective = Callable[[ComplexVector], float]


class RankOneResult(NamedTuple):
    vector: ComplexVector
    accepted: bool
    ratio: float


class RoundingResult(NamedTuple):
    vector: ComplexVector
    value: float
    index: int


def _fix_phase(v: np.ndarray) -> np.ndarray:
    k = int(np.argmax(np.abs(v)))
    if abs(v[k]) == 0:
        return v
    return v * (abs(v[k]) / v[k])


def extract_rank_one(x: np.ndarray, ratio_tol: float = 1e-6) -> RankOneResult:
    """
    Take ``sqrt(l1) * v1`` from the principal eigenpair. The global phase is
    fixed so the largest-magnitude entry is real and positive. The solution
    counts as rank-one when ``l2 / l1 <= ratio_tol``.
    """
    w, v = herm_eig(x)
    if w[0] <= 0:
        raise DomainError("cannot extract a vector from a zero matrix")
    ratio = max(float(w[1]), 0.0) / float(w[0]) if len(w) > 1 else 0.0
    vector = _fix_phase(np.sqrt(w[0]) * v[:, 0])
    return RankOneResult(vector, ratio <= ratio_tol, ratio)


def usage(a: np.ndarray, constraints: PowerConstraints) -> RealVector:
    """Fraction of each budget consumed by ``a``."""
    return np.array(
        [np.real(np.vdot(a, e @ a)) / budget for e, budget in constraints]
    )


def scale_to_budget(
    a: np.ndarray, constraints: PowerConstraints
) -> Optional[ComplexVector]:
    """
    Rescale ``a`` so the tightest constraint holds with equality. Returns
    ``None`` when ``a`` draws no power at all.
    """
    u = usage(a, constraints)
    peak = float(np.max(u, initial=0.0))
    if peak <= 0 or not np.isfinite(peak):
        return None
    return a / np.sqrt(peak)


def maxmin_objective(forms: QuadraticForms, weights: RealVector) -> Objective:
    """min_i SINR_i / w_i evaluated for a beamforming vector."""

    def evaluate(a: ComplexVector) -> float:
        return float(np.min(forms.ratios(outer(a)) / weights))

    return evaluate


def gaussian_rounding(
    x: np.ndarray,
    objective: Objective,
    constraints: PowerConstraints,
    samples: int = 200,
    seed: SeedType = None,
    candidates: Sequence[ComplexVector] = (),
) -> RoundingResult:
    """
    Pick the best of several feasible vectors built from ``x``.

    Candidate 0 is the principal eigenvector, followed by any caller supplied
    ``candidates`` and then ``samples`` draws from CN(0, x). Every candidate
    is rescaled so that the tightest power constraint is binding. Ties go to
    the earliest candidate. A numerically rank-one ``x`` draws no samples:
    they would all be multiples of candidate 0.
    """
    rng = make_rng(seed)
    rank = extract_rank_one(x)
    n = x.shape[0]

    pool: List[ComplexVector] = [rank.vector]
    pool.extend(np.asarray(c, dtype=complex) for c in candidates)
    draws = 0 if rank.accepted else samples
    root = psd_sqrt(x, clip=1e-8)
    for _ in range(draws):
        xi = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / np.sqrt(2.0)
        pool.append(root @ xi)

    best: Optional[RoundingResult] = None
    for k, cand in enumerate(pool):
        scaled = scale_to_budget(cand, constraints)
        if scaled is None:
            continue
        if np.any(usage(scaled, constraints) > 1.0 + 1e-9):
            continue
        value = float(objective(scaled))
        if best is None or value > best.value:
            best = RoundingResult(scaled, value, k)
    if best is None:
        raise DomainError("no candidate draws power; cannot round a zero matrix")
    log.debug(
        "rounding picked candidate %d of %d, value %.6g",
        best.index,
        len(pool),
        best.value,
    )
    return best
