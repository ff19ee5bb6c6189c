"""
Multi-pair two-way relaying with multi-antenna users.

User ``i`` sends one stream with precoder ``u_i`` over ``H_i`` (``M x M_i``)
and detects its partner with combiner ``v_i``. The joint design alternates
between the combiners (MMSE), the relay matrix and the precoders; each stage
keeps the incumbent if its own candidate is worse, so the tracked objective
never decreases.
"""
import logging
from dataclasses import dataclass, field, replace
from typing import List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.linalg

from twrbf.errors import DimensionError, DomainError, SolverError
from twrbf.linalg import embed_block, extract_block, hermitian, is_psd, unvec, vec
from twrbf.model import QuadraticForms, db_to_linear, lift_forms, partner
from twrbf.solvers.fractional import (
    DEFAULT_STOP_TOL,
    MaxMinSpec,
    dinkelbach_maxmin,
)
from twrbf.solvers.monotonic import SinrRegion, polyblock_maximize, region_corner
from twrbf.solvers.rounding import (
    PowerConstraints,
    extract_rank_one,
    gaussian_rounding,
)
from twrbf.util import ComplexMatrix, ComplexVector, RealVector, SeedType
from twrbf.util import as_float_array
from twrbf.utility import Modulation, Utility, error_probability

log = logging.getLogger(__name__)


def _as_column_matrix(h: np.ndarray) -> ComplexMatrix:
    h = np.asarray(h, dtype=complex)
    if h.ndim == 1:
        return h[:, np.newaxis]
    return h


@dataclass
class MimoInstance:
    channels: List[ComplexMatrix]
    user_powers: RealVector
    user_noise: List[ComplexMatrix]
    relay_noise: ComplexMatrix
    power_budget: float
    sinr_targets: RealVector

    def __post_init__(self):
        self.channels = [_as_column_matrix(h) for h in self.channels]
        n_users = len(self.channels)
        if n_users < 2 or n_users % 2:
            raise DimensionError(f"need an even number of users, got {n_users}")
        m = self.channels[0].shape[0]
        if any(h.shape[0] != m for h in self.channels):
            raise DimensionError("all channel matrices need the relay's row count")
        self.user_powers = as_float_array(self.user_powers, n_users)
        self.sinr_targets = as_float_array(self.sinr_targets, n_users)
        if np.isscalar(self.user_noise) or np.ndim(self.user_noise) == 0:
            level = float(self.user_noise)  # type: ignore
            self.user_noise = [level * np.eye(h.shape[1]) for h in self.channels]
        noises = []
        for h, lam in zip(self.channels, self.user_noise):
            lam = np.atleast_2d(np.asarray(lam, dtype=complex))
            if lam.shape != (h.shape[1], h.shape[1]):
                raise DimensionError(f"user noise of shape {lam.shape} for {h.shape}")
            if not is_psd(lam):
                raise DomainError("user noise covariances must be PSD")
            noises.append(hermitian(lam))
        self.user_noise = noises
        noise = np.asarray(self.relay_noise, dtype=complex)
        if noise.ndim == 0:
            noise = noise * np.eye(m)
        if noise.shape != (m, m) or not is_psd(noise):
            raise DimensionError(f"relay noise must be a PSD {m}x{m} matrix")
        self.relay_noise = hermitian(noise)
        self.power_budget = float(self.power_budget)
        if self.power_budget <= 0 or np.any(self.user_powers <= 0):
            raise DomainError("powers must be positive")

    @classmethod
    def from_snr_db(
        cls,
        channels: Sequence[ComplexMatrix],
        snr_db: float,
        targets: Union[float, Sequence[float]] = 1.0,
        noise: float = 1.0,
    ) -> "MimoInstance":
        p = db_to_linear(snr_db) * noise
        m = _as_column_matrix(channels[0]).shape[0]
        relay_noise = noise * np.eye(m)
        return cls(list(channels), p, noise, relay_noise, p, targets)  # type: ignore

    @property
    def n_users(self) -> int:
        return len(self.channels)

    @property
    def antennas(self) -> int:
        return int(self.channels[0].shape[0])

    @property
    def user_antennas(self) -> List[int]:
        return [int(h.shape[1]) for h in self.channels]


@dataclass
class BeamformingState:
    relay: ComplexMatrix
    precoders: List[ComplexVector]
    combiners: List[ComplexVector]
    lam: float = 0.0


def _alpha(
    inst: MimoInstance, state: BeamformingState, i: int, j: int
) -> ComplexVector:
    # H_i^T A H_j u_j
    return inst.channels[i].T @ state.relay @ inst.channels[j] @ state.precoders[j]


def _relay_noise_gain(
    inst: MimoInstance, relay: ComplexMatrix, i: int
) -> ComplexMatrix:
    # H_i^T A Lambda_R A^H conj(H_i)
    left = inst.channels[i].T @ relay
    return left @ inst.relay_noise @ left.conj().T


def sinr_mimo(state: BeamformingState, inst: MimoInstance) -> RealVector:
    out = np.zeros(inst.n_users)
    for i in range(inst.n_users):
        v = state.combiners[i]
        if not np.any(v):
            continue
        j = partner(i)
        signal = abs(np.vdot(v, _alpha(inst, state, i, j))) ** 2
        interference = sum(
            abs(np.vdot(v, _alpha(inst, state, i, k))) ** 2
            for k in range(inst.n_users)
            if k not in (i, j)
        )
        noise = np.real(np.vdot(v, _relay_noise_gain(inst, state.relay, i) @ v))
        noise += np.real(np.vdot(v, inst.user_noise[i] @ v))
        out[i] = signal / (interference + noise)
    return out


def min_ratio(state: BeamformingState, inst: MimoInstance) -> float:
    return float(np.min(sinr_mimo(state, inst) / inst.sinr_targets))


def relay_power(state: BeamformingState, inst: MimoInstance) -> float:
    a = state.relay
    signal = sum(
        float(np.sum(np.abs(a @ h @ u) ** 2))
        for h, u in zip(inst.channels, state.precoders)
    )
    return signal + float(np.real(np.trace(a @ inst.relay_noise @ a.conj().T)))


def mimo_bit_error_rate(
    state: BeamformingState,
    inst: MimoInstance,
    modulation: Modulation = Modulation.QPSK,
) -> float:
    return float(np.mean(error_probability(sinr_mimo(state, inst), modulation)))


def mmse_vector(r: np.ndarray, alpha: np.ndarray) -> ComplexVector:
    """``R^{-1} alpha`` for a Hermitian positive definite ``R``."""
    try:
        return scipy.linalg.solve(
            np.atleast_2d(r), np.atleast_1d(alpha), assume_a="pos"
        )
    except np.linalg.LinAlgError as e:
        raise SolverError("singular", f"MMSE covariance is singular: {e}")


def mmse_combiners(state: BeamformingState, inst: MimoInstance) -> BeamformingState:
    combiners = []
    for i in range(inst.n_users):
        alphas = [_alpha(inst, state, i, j) for j in range(inst.n_users)]
        r = _relay_noise_gain(inst, state.relay, i) + inst.user_noise[i]
        for j, a in enumerate(alphas):
            if j != i:
                r = r + np.outer(a, a.conj())
        combiners.append(mmse_vector(hermitian(r), alphas[partner(i)]))
    return replace(state, combiners=combiners)


def initial_state(inst: MimoInstance) -> BeamformingState:
    """
    Full-power precoders along each channel's dominant right singular
    vector, a scaled identity relay and MMSE combiners.
    """
    precoders = []
    for h, p in zip(inst.channels, inst.user_powers):
        _, _, vh = np.linalg.svd(h)
        precoders.append(np.sqrt(p) * vh[0].conj())
    m = inst.antennas
    state = BeamformingState(
        relay=np.eye(m, dtype=complex),
        precoders=precoders,
        combiners=[np.zeros(h.shape[1], dtype=complex) for h in inst.channels],
    )
    scale = np.sqrt(inst.power_budget / relay_power(state, inst))
    state = replace(state, relay=scale * state.relay)
    state = mmse_combiners(state, inst)
    state.lam = min_ratio(state, inst)
    return state


def relay_forms(state: BeamformingState, inst: MimoInstance) -> QuadraticForms:
    """
    Lifted forms in ``vec(A)`` for fixed precoders and combiners: transmit
    vectors ``H_j u_j``, receive vectors ``H_i conj(v_i)`` and the user noise
    ``v_i^H Lambda_i v_i`` as the noise offset.
    """
    transmit = np.array([h @ u for h, u in zip(inst.channels, state.precoders)])
    receive = np.array([h @ v.conj() for h, v in zip(inst.channels, state.combiners)])
    offsets = np.array(
        [
            np.real(np.vdot(v, lam @ v))
            for v, lam in zip(state.combiners, inst.user_noise)
        ]
    )
    return lift_forms(
        receive, transmit, np.ones(inst.n_users), inst.relay_noise, offsets
    )


class _Blocks(NamedTuple):
    offsets: List[int]
    sizes: List[int]
    total: int


def _blocks(inst: MimoInstance) -> _Blocks:
    sizes = inst.user_antennas
    offsets = [int(o) for o in np.concatenate([[0], np.cumsum(sizes)[:-1]])]
    return _Blocks(offsets, sizes, int(sum(sizes)))


def _split(vector: ComplexVector, blocks: _Blocks) -> List[ComplexVector]:
    return [vector[o : o + s].copy() for o, s in zip(blocks.offsets, blocks.sizes)]


def transmit_forms(
    state: BeamformingState, inst: MimoInstance
) -> Tuple[QuadraticForms, PowerConstraints]:
    """
    Lifted forms over the stacked precoders ``[u_0; u_1; ...]``. With
    ``beta_ij = H_j^H A^H conj(H_i) v_i`` the gain of user ``j`` at user
    ``i`` is ``|beta_ij^H u_j|^2``. Constraints are one per user,
    ``||u_j||^2 <= p_j``, and the relay budget left after relay noise.
    """
    blocks = _blocks(inst)
    n = blocks.total
    a = state.relay
    e1 = np.zeros((inst.n_users, n, n), dtype=complex)
    e2 = np.zeros((inst.n_users, n, n), dtype=complex)
    offsets = np.zeros(inst.n_users)
    for i in range(inst.n_users):
        v = state.combiners[i]
        g = inst.channels[i].conj() @ v
        for j in range(inst.n_users):
            if j == i:
                continue
            beta = inst.channels[j].conj().T @ a.conj().T @ g
            form = embed_block(np.outer(beta, beta.conj()), blocks.offsets[j], n)
            if j == partner(i):
                e1[i] = form
            else:
                e2[i] += form
        offsets[i] = np.real(np.vdot(v, _relay_noise_gain(inst, a, i) @ v))
        offsets[i] += np.real(np.vdot(v, inst.user_noise[i] @ v))

    constraints = []
    relay_form = np.zeros((n, n), dtype=complex)
    for j, (h, o, s) in enumerate(zip(inst.channels, blocks.offsets, blocks.sizes)):
        constraints.append((embed_block(np.eye(s), o, n), float(inst.user_powers[j])))
        ah = a @ h
        relay_form += embed_block(ah.conj().T @ ah, o, n)
    noise_power = float(np.real(np.trace(a @ inst.relay_noise @ a.conj().T)))
    constraints.append((relay_form, inst.power_budget - noise_power))

    forms = QuadraticForms(
        e1=e1,
        e2=e2,
        sigma2=offsets,
        power=[c[0] for c in constraints],
        reference=np.concatenate(state.precoders),
    )
    return forms, constraints


class StageRow(NamedTuple):
    outer: int
    stage: str
    value: float


def _objective(
    state: BeamformingState, inst: MimoInstance, utility: Optional[Utility]
) -> float:
    if utility is None:
        return min_ratio(state, inst)
    return utility(1.0 + sinr_mimo(state, inst))


def relay_subproblem(
    state: BeamformingState,
    inst: MimoInstance,
    tol: float = DEFAULT_STOP_TOL,
    utility: Optional[Utility] = None,
    eps: float = 0.01,
    seed: SeedType = 0,
) -> Tuple[BeamformingState, bool]:
    """
    Re-optimize the relay matrix with precoders and combiners fixed. Returns
    the new state and whether the relaxation was rank-one.
    """
    forms = relay_forms(state, inst)
    constraints = [(forms.power[0], inst.power_budget)]
    incumbent = vec(state.relay)
    if utility is None:
        spec = MaxMinSpec(
            forms=forms,
            weights=inst.sinr_targets,
            constraints=constraints,
            initial=incumbent,
        )
        res = dinkelbach_maxmin(spec, stop_tol=tol, seed=seed)
        accepted = res.rank_one_accepted
        candidate = res.rounded[0] if res.rounded is not None else incumbent
    else:
        region = SinrRegion(
            forms,
            constraints,
            region_corner(forms, constraints),
            stop_tol=tol,
            seed=seed,
            incumbent=incumbent,
        )
        poly = polyblock_maximize(region, utility, eps=eps)
        accepted = poly.x_best is not None and extract_rank_one(poly.x_best).accepted
        candidate = poly.rounded[0] if poly.rounded is not None else incumbent

    proposal = replace(state, relay=unvec(candidate, *forms.shape))
    if _objective(proposal, inst, utility) >= _objective(state, inst, utility):
        return proposal, accepted
    log.debug("relay stage kept the incumbent")
    return state, accepted


def _block_eigen_candidate(x: ComplexMatrix, blocks: _Blocks) -> ComplexVector:
    parts = []
    for o, s in zip(blocks.offsets, blocks.sizes):
        block = extract_block(x, o, s)
        if np.real(np.trace(block)) <= 0:
            parts.append(np.zeros(s, dtype=complex))
        else:
            parts.append(extract_rank_one(block).vector)
    return np.concatenate(parts)


def transmit_subproblem(
    state: BeamformingState,
    inst: MimoInstance,
    tol: float = DEFAULT_STOP_TOL,
    utility: Optional[Utility] = None,
    eps: float = 0.01,
    seed: SeedType = 0,
    samples: int = 200,
) -> BeamformingState:
    """
    Re-optimize the precoders with the relay matrix and combiners fixed.
    """
    blocks = _blocks(inst)
    forms, constraints = transmit_forms(state, inst)
    if constraints[-1][1] <= 0:
        log.debug("no relay budget left for the precoders; keeping them")
        return state
    incumbent = np.concatenate(state.precoders)

    if utility is None:
        spec = MaxMinSpec(
            forms=forms,
            weights=inst.sinr_targets,
            constraints=constraints,
            initial=incumbent,
        )
        res = dinkelbach_maxmin(spec, stop_tol=tol, round_result=False)
        # Only the diagonal blocks carry meaning.
        x = np.zeros_like(res.x_opt)
        for o, s in zip(blocks.offsets, blocks.sizes):
            x[o : o + s, o : o + s] = res.x_opt[o : o + s, o : o + s]
        best = gaussian_rounding(
            x,
            spec.vector_objective,
            constraints,
            samples=samples,
            seed=seed,
            candidates=[_block_eigen_candidate(x, blocks), incumbent],
        )
        candidate = best.vector
    else:
        region = SinrRegion(
            forms,
            constraints,
            region_corner(forms, constraints),
            stop_tol=tol,
            seed=seed,
            samples=samples,
            incumbent=incumbent,
        )
        poly = polyblock_maximize(region, utility, eps=eps)
        candidate = poly.rounded[0] if poly.rounded is not None else incumbent

    proposal = replace(state, precoders=_split(candidate, blocks))
    if _objective(proposal, inst, utility) >= _objective(state, inst, utility):
        return proposal
    log.debug("transmit stage kept the incumbent")
    return state


@dataclass
class AlternatingResult:
    state: BeamformingState
    trace: List[float]
    stages: List[StageRow] = field(default_factory=list)
    iterations: int = 0
    converged: bool = False
    rank_one: List[bool] = field(default_factory=list)


def alternate(
    inst: MimoInstance,
    eps: float = 1e-3,
    max_outer: int = 30,
    tol: float = DEFAULT_STOP_TOL,
    utility: Optional[Utility] = None,
    poly_eps: float = 0.01,
    seed: SeedType = 0,
) -> AlternatingResult:
    """
    Alternate combiner, relay and precoder updates until the tracked value
    (min weighted SINR, or the utility of ``1 + SINR``) moves by at most
    ``eps * max(1, |value|)`` between outer iterations.
    """
    if eps <= 0:
        raise DomainError("eps must be positive")
    state = initial_state(inst)
    value = _objective(state, inst, utility)
    result = AlternatingResult(state=state, trace=[value])
    result.stages.append(StageRow(0, "init", value))

    for outer_it in range(1, max_outer + 1):
        stage = "combiner"
        try:
            candidate = mmse_combiners(state, inst)
            if utility is not None or _objective(candidate, inst, None) >= value:
                state = candidate
            current = _objective(state, inst, utility)
            result.stages.append(StageRow(outer_it, stage, current))

            stage = "relay"
            state, accepted = relay_subproblem(
                state, inst, tol=tol, utility=utility, eps=poly_eps, seed=seed
            )
            result.rank_one.append(accepted)
            current = _objective(state, inst, utility)
            result.stages.append(StageRow(outer_it, stage, current))

            stage = "transmit"
            state = transmit_subproblem(
                state, inst, tol=tol, utility=utility, eps=poly_eps, seed=seed
            )
        except SolverError as e:
            raise e.with_stage(f"mimo {stage} stage, outer {outer_it}")
        new_value = _objective(state, inst, utility)
        result.stages.append(StageRow(outer_it, stage, new_value))
        state.lam = min_ratio(state, inst)
        result.trace.append(new_value)
        result.iterations = outer_it
        log.debug("alternating %d: value=%.9g", outer_it, new_value)
        if abs(new_value - value) <= eps * max(1.0, abs(new_value)):
            result.converged = True
            value = new_value
            break
        value = new_value

    result.state = state
    if not result.converged:
        log.warning("alternating optimization hit max_outer=%d", max_outer)
    return result
