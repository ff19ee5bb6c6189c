"""
Two-way relay system instances and the lifted quadratic forms.

Users are indexed ``0 .. 2K-1``; user ``i`` exchanges data with
``partner(i) = i ^ 1``. A relay beamformer ``A`` maps to ``a = vec(A)``
(column-major) and to the lifted variable ``X = a a^H``. Every SINR and
power expression of the relay problem is a ratio or value of linear
functionals ``tr(E X)``, collected in :py:class:`QuadraticForms`.
"""
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from twrbf.errors import DimensionError, DomainError
from twrbf.linalg import hermitian, is_psd, kron, vec
from twrbf.util import (
    ComplexMatrix,
    ComplexVector,
    RealVector,
    SeedType,
    as_float_array,
    complex_normal,
    make_rng,
)


def partner(i: int, n_users: Optional[int] = None) -> int:
    if i < 0 or (n_users is not None and i >= n_users):
        raise DomainError(f"user index {i} out of range")
    return i ^ 1


def db_to_linear(db: float) -> float:
    return float(10.0 ** (db / 10.0))


def rate_of_sinr(sinr: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
    """Per-user rate in bit/s/Hz; the factor 0.5 accounts for the two phases."""
    return 0.5 * np.log2(1.0 + np.asarray(sinr))


def generate_channels(
    seed: SeedType,
    pairs: int,
    antennas: int,
    user_antennas: Optional[Sequence[int]] = None,
) -> Union[ComplexMatrix, List[ComplexMatrix]]:
    """
    Draw i.i.d. CN(0, 1) channels. Without ``user_antennas`` the result is a
    ``2K x M`` array whose row ``i`` is ``h_i``; with it, a list of ``M x M_i``
    matrices ``H_i``.
    """
    if pairs < 1 or antennas < 1:
        raise DimensionError("need at least one pair and one relay antenna")
    rng = make_rng(seed)
    if user_antennas is None:
        return complex_normal(rng, (2 * pairs, antennas))
    if len(user_antennas) != 2 * pairs:
        raise DimensionError(
            f"expected {2 * pairs} user antenna counts, got {len(user_antennas)}"
        )
    return [complex_normal(rng, (antennas, int(m))) for m in user_antennas]


@dataclass
class SystemInstance:
    channels: ComplexMatrix
    user_powers: RealVector
    relay_noise: ComplexMatrix
    user_noise: RealVector
    power_budget: float
    sinr_targets: RealVector

    def __post_init__(self):
        self.channels = np.atleast_2d(np.asarray(self.channels, dtype=complex))
        n_users, m = self.channels.shape
        if n_users < 2 or n_users % 2:
            raise DimensionError(f"need an even number of users, got {n_users}")
        self.user_powers = as_float_array(self.user_powers, n_users)
        self.user_noise = as_float_array(self.user_noise, n_users)
        self.sinr_targets = as_float_array(self.sinr_targets, n_users)
        noise = np.asarray(self.relay_noise, dtype=complex)
        if noise.ndim == 0:
            noise = noise * np.eye(m)
        if noise.shape != (m, m):
            raise DimensionError(f"relay noise must be {m}x{m}, got {noise.shape}")
        self.relay_noise = hermitian(noise)
        if not is_psd(self.relay_noise):
            raise DomainError("relay noise covariance must be PSD")
        if np.any(self.user_powers <= 0) or np.any(self.user_noise <= 0):
            raise DomainError("user powers and noise variances must be positive")
        if np.any(self.sinr_targets <= 0) or self.power_budget <= 0:
            raise DomainError("SINR targets and power budget must be positive")
        self.power_budget = float(self.power_budget)

    @classmethod
    def from_snr_db(
        cls,
        channels: ComplexMatrix,
        snr_db: float,
        targets: Union[float, Sequence[float]] = 1.0,
        noise: float = 1.0,
    ) -> "SystemInstance":
        """
        Equal-power setting: p_i = P_R = SNR * N0, relay noise N0 * I and
        user noise N0.
        """
        channels = np.atleast_2d(channels)
        p = db_to_linear(snr_db) * noise
        return cls(
            channels=channels,
            user_powers=p,
            relay_noise=noise * np.eye(channels.shape[1]),
            user_noise=noise,
            power_budget=p,
            sinr_targets=targets,
        )

    @property
    def n_users(self) -> int:
        return int(self.channels.shape[0])

    @property
    def pairs(self) -> int:
        return self.n_users // 2

    @property
    def antennas(self) -> int:
        return int(self.channels.shape[1])

    def with_budget(self, budget: float) -> "SystemInstance":
        return SystemInstance(
            self.channels,
            self.user_powers,
            self.relay_noise,
            self.user_noise,
            budget,
            self.sinr_targets,
        )


def _cross_gains(inst: SystemInstance, a: np.ndarray) -> ComplexMatrix:
    # entry [i, j] = h_i^T A h_j
    return inst.channels @ a @ inst.channels.T


def sinr_of_A(inst: SystemInstance, a: np.ndarray) -> RealVector:
    a = np.asarray(a, dtype=complex)
    if a.shape != (inst.antennas, inst.antennas):
        raise DimensionError(f"relay matrix must be square of size {inst.antennas}")
    gains = np.abs(_cross_gains(inst, a)) ** 2
    out = np.zeros(inst.n_users)
    for i in range(inst.n_users):
        j = partner(i)
        signal = inst.user_powers[j] * gains[i, j]
        interference = sum(
            inst.user_powers[k] * gains[i, k]
            for k in range(inst.n_users)
            if k not in (i, j)
        )
        w = inst.channels[i] @ a
        relay_noise = np.real(w @ inst.relay_noise @ w.conj())
        out[i] = signal / (interference + relay_noise + inst.user_noise[i])
    return out


def relay_power_of_A(inst: SystemInstance, a: np.ndarray) -> float:
    a = np.asarray(a, dtype=complex)
    amplified = a @ inst.channels.T
    signal = float(np.sum(inst.user_powers * np.sum(np.abs(amplified) ** 2, axis=0)))
    noise = float(np.real(np.trace(a @ inst.relay_noise @ a.conj().T)))
    return signal + noise


def _trace_with(forms: np.ndarray, x: np.ndarray) -> RealVector:
    return np.real(np.einsum("kij,ji->k", forms, x))


def outer(a: np.ndarray) -> ComplexMatrix:
    a = np.asarray(a, dtype=complex)
    return np.outer(a, a.conj())


@dataclass
class QuadraticForms:
    """
    Lifted forms of a max-min SINR system: for user ``i`` the signal is
    ``tr(e1[i] X)`` and the interference-plus-noise is ``tr(e2[i] X) +
    sigma2[i]``. ``power`` holds one form per power constraint. ``reference``
    is the direction of the default starting point and ``shape`` is the
    matrix shape ``vec`` was taken from, if any.
    """

    e1: np.ndarray
    e2: np.ndarray
    sigma2: RealVector
    power: List[ComplexMatrix]
    reference: ComplexVector
    shape: Optional[Tuple[int, int]] = None

    def __post_init__(self):
        self.e1 = np.asarray(self.e1, dtype=complex)
        self.e2 = np.asarray(self.e2, dtype=complex)
        if self.e1.shape != self.e2.shape or self.e1.ndim != 3:
            raise DimensionError("signal and interference forms disagree in shape")
        n = self.e1.shape[1]
        self.sigma2 = as_float_array(self.sigma2, self.e1.shape[0])
        self.power = [np.asarray(p, dtype=complex) for p in self.power]
        for p in self.power:
            if p.shape != (n, n):
                raise DimensionError(f"power form of shape {p.shape}, expected {n}")
        self.reference = np.asarray(self.reference, dtype=complex)

    @property
    def dim(self) -> int:
        return int(self.e1.shape[1])

    @property
    def n_users(self) -> int:
        return int(self.e1.shape[0])

    @property
    def e0(self) -> ComplexMatrix:
        """The total power form."""
        return np.sum(self.power, axis=0)

    def signal(self, x: np.ndarray) -> RealVector:
        return _trace_with(self.e1, x)

    def interference(self, x: np.ndarray) -> RealVector:
        return _trace_with(self.e2, x) + self.sigma2

    def ratios(self, x: np.ndarray) -> RealVector:
        return self.signal(x) / self.interference(x)

    def ratios_of_vector(self, a: np.ndarray) -> RealVector:
        return self.ratios(outer(a))

    def powers(self, x: np.ndarray) -> RealVector:
        return np.array([np.real(np.trace(p @ x)) for p in self.power])


def lift_forms(
    receive: np.ndarray,
    transmit: np.ndarray,
    powers: RealVector,
    relay_noise: np.ndarray,
    sigma2: RealVector,
) -> QuadraticForms:
    """
    Build the lifted forms for received signals ``r_i^T A t_j``. Row ``i`` of
    ``receive`` is ``r_i`` and row ``j`` of ``transmit`` is ``t_j``.

    With ``q_ij = t_j kron r_i`` the gain is ``q_ij^T a``. The relay noise
    seen by user ``i`` is ``||Lambda_R^(1/2) A^H conj(r_i)||^2 = a^H B_i^H
    Lambda_R^T B_i a`` where ``B_i = I kron r_i^T``. The relay power is
    ``a^H (Theta^T kron I) a``, which equals ``Phi^H Phi`` for ``Phi =
    (Theta^(1/2))^T kron I``.
    """
    receive = np.asarray(receive, dtype=complex)
    transmit = np.asarray(transmit, dtype=complex)
    n_users, m = receive.shape
    if transmit.shape != (n_users, m):
        raise DimensionError("receive and transmit vectors disagree in shape")
    n = m * m
    e1 = np.zeros((n_users, n, n), dtype=complex)
    e2 = np.zeros((n_users, n, n), dtype=complex)
    noise_t = np.asarray(relay_noise).T
    for i in range(n_users):
        j = partner(i)
        for k in range(n_users):
            if k == i:
                continue
            q = np.kron(transmit[k], receive[i])
            form = powers[k] * np.outer(q.conj(), q)
            if k == j:
                e1[i] = form
            else:
                e2[i] += form
        b = kron(np.eye(m), receive[i][np.newaxis, :])
        e2[i] += b.conj().T @ noise_t @ b
    theta = (transmit.T * powers) @ transmit.conj() + relay_noise
    e0 = kron(theta.T, np.eye(m))
    return QuadraticForms(
        e1=e1,
        e2=e2,
        sigma2=sigma2,
        power=[hermitian(e0)],
        reference=vec(np.eye(m, dtype=complex)),
        shape=(m, m),
    )


def build_forms(inst: SystemInstance) -> QuadraticForms:
    return lift_forms(
        inst.channels,
        inst.channels,
        inst.user_powers,
        inst.relay_noise,
        inst.user_noise,
    )


def sinr_of_X(forms: QuadraticForms, x: np.ndarray) -> RealVector:
    return forms.ratios(x)
