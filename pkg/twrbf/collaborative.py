"""
Collaborative beamforming over ``M`` single-antenna relays.

The relay matrix is ``diag(a)``, so ``h_i^T diag(a) h_j = (h_i * h_j)^T a``
and the lifted variable is ``X = a a^H`` of size ``M``. Relay ``m`` spends
``theta_m |a_m|^2`` with ``theta_m = sum_i p_i |h_im|^2 + sigma_Rm^2``.
"""
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from twrbf.errors import DimensionError, DomainError
from twrbf.model import QuadraticForms, SystemInstance, db_to_linear, partner
from twrbf.solvers.fractional import (
    DinkelbachResult,
    MaxMinSpec,
    dinkelbach_maxmin,
)
from twrbf.solvers.monotonic import PolyblockResult, SinrRegion, polyblock_maximize
from twrbf.solvers.rounding import PowerConstraints
from twrbf.util import ComplexMatrix, ComplexVector, RealVector, as_float_array
from twrbf.utility import Utility


@dataclass
class CollabInstance:
    channels: ComplexMatrix
    user_powers: RealVector
    relay_noise: RealVector
    user_noise: RealVector
    relay_budgets: RealVector
    sinr_targets: RealVector

    def __post_init__(self):
        self.channels = np.atleast_2d(np.asarray(self.channels, dtype=complex))
        n_users, m = self.channels.shape
        if n_users < 2 or n_users % 2:
            raise DimensionError(f"need an even number of users, got {n_users}")
        self.user_powers = as_float_array(self.user_powers, n_users)
        self.user_noise = as_float_array(self.user_noise, n_users)
        self.sinr_targets = as_float_array(self.sinr_targets, n_users)
        self.relay_noise = as_float_array(self.relay_noise, m)
        self.relay_budgets = as_float_array(self.relay_budgets, m)
        for name in (
            "user_powers",
            "user_noise",
            "sinr_targets",
            "relay_noise",
            "relay_budgets",
        ):
            if np.any(getattr(self, name) <= 0):
                raise DomainError(f"{name} must be positive")

    @classmethod
    def from_snr_db(
        cls,
        channels: ComplexMatrix,
        snr_db: float,
        targets: Union[float, Sequence[float]] = 1.0,
        noise: float = 1.0,
    ) -> "CollabInstance":
        """
        Equal user powers ``p = SNR * N0`` and a total relay budget ``p``
        split evenly, ``p / M`` per relay.
        """
        channels = np.atleast_2d(channels)
        p = db_to_linear(snr_db) * noise
        m = channels.shape[1]
        return cls(channels, p, noise, noise, p / m, targets)

    @property
    def n_users(self) -> int:
        return int(self.channels.shape[0])

    @property
    def relays(self) -> int:
        return int(self.channels.shape[1])

    @property
    def total_budget(self) -> float:
        return float(np.sum(self.relay_budgets))

    @property
    def thetas(self) -> RealVector:
        return self.user_powers @ np.abs(self.channels) ** 2 + self.relay_noise

    def as_system(self) -> SystemInstance:
        """The same network seen as one relay with a diagonal beamformer."""
        return SystemInstance(
            channels=self.channels,
            user_powers=self.user_powers,
            relay_noise=np.diag(self.relay_noise),
            user_noise=self.user_noise,
            power_budget=self.total_budget,
            sinr_targets=self.sinr_targets,
        )


def build_collab_forms(inst: CollabInstance) -> QuadraticForms:
    n_users, m = inst.channels.shape
    h = inst.channels
    e1 = np.zeros((n_users, m, m), dtype=complex)
    e2 = np.zeros((n_users, m, m), dtype=complex)
    for i in range(n_users):
        j = partner(i)
        for k in range(n_users):
            if k == i:
                continue
            q = h[i] * h[k]
            form = inst.user_powers[k] * np.outer(q.conj(), q)
            if k == j:
                e1[i] = form
            else:
                e2[i] += form
        e2[i] += np.diag(np.abs(h[i]) ** 2 * inst.relay_noise)
    power = []
    for r, theta in enumerate(inst.thetas):
        e = np.zeros((m, m), dtype=complex)
        e[r, r] = theta
        power.append(e)
    return QuadraticForms(
        e1=e1,
        e2=e2,
        sigma2=inst.user_noise,
        power=power,
        reference=np.ones(m, dtype=complex),
    )


def collab_constraints(
    inst: CollabInstance, forms: QuadraticForms, total_budget: bool = False
) -> PowerConstraints:
    if total_budget:
        return [(forms.e0, inst.total_budget)]
    return list(zip(forms.power, inst.relay_budgets))


def collab_spec(
    inst: CollabInstance,
    targets: Optional[RealVector] = None,
    total_budget: bool = False,
) -> MaxMinSpec:
    forms = build_collab_forms(inst)
    return MaxMinSpec(
        forms=forms,
        weights=inst.sinr_targets if targets is None else targets,
        constraints=collab_constraints(inst, forms, total_budget),
    )


def collab_maxmin(
    inst: CollabInstance,
    targets: Optional[RealVector] = None,
    total_budget: bool = False,
    **kwargs,
) -> DinkelbachResult:
    return dinkelbach_maxmin(collab_spec(inst, targets, total_budget), **kwargs)


def collab_initial_vertex(
    inst: CollabInstance, total_budget: bool = False
) -> RealVector:
    """
    Dominating corner from two Cauchy-Schwarz bounds. With ``q = h_i * h_j``
    for partner ``j``, ``|q^T a|^2 <= ||q||^2 ||a||^2`` and ``||a||^2`` is at
    most ``sum_m P_m / theta_m`` (``P / min theta`` for one total budget);
    also ``|q^T a|^2 <= ||h_i||^2 sum_m |h_jm a_m|^2 <= ||h_i||^2 P / p_j``.
    """
    thetas = inst.thetas
    if total_budget:
        gain_cap = inst.total_budget / float(np.min(thetas))
    else:
        gain_cap = float(np.sum(inst.relay_budgets / thetas))
    h = inst.channels
    d = np.zeros(inst.n_users)
    for i in range(inst.n_users):
        j = partner(i)
        q = h[i] * h[j]
        first = inst.user_powers[j] * float(np.sum(np.abs(q) ** 2)) * gain_cap
        second = float(np.sum(np.abs(h[i]) ** 2)) * inst.total_budget
        d[i] = 1.0 + min(first, second) / inst.user_noise[i]
    return d


def collab_region(
    inst: CollabInstance, total_budget: bool = False, **kwargs
) -> SinrRegion:
    forms = build_collab_forms(inst)
    return SinrRegion(
        forms,
        collab_constraints(inst, forms, total_budget),
        collab_initial_vertex(inst, total_budget),
        **kwargs,
    )


def collab_utility_maximize(
    inst: CollabInstance,
    utility: Utility,
    eps: float = 0.01,
    total_budget: bool = False,
    **kwargs,
) -> PolyblockResult:
    return polyblock_maximize(collab_region(inst, total_budget), utility, eps, **kwargs)


def collab_beamformer(gains: ComplexVector) -> ComplexMatrix:
    return np.diag(np.asarray(gains, dtype=complex))
