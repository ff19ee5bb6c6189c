"""
Simple relay schemes used as comparison points. Every returned matrix is
scaled so the relay power budget holds with equality.
"""
import enum

import numpy as np
import scipy.linalg

from twrbf.errors import DimensionError, DomainError
from twrbf.model import SystemInstance, partner, relay_power_of_A, sinr_of_A
from twrbf.util import ComplexMatrix


class BaselineKind(enum.Enum):
    SCALED_IDENTITY = "identity"
    ANTENNA_SELECTION = "antenna-selection"
    ZERO_FORCING = "zf"
    MMSE_RELAY = "mmse"


def pair_swap(n_users: int) -> np.ndarray:
    """Permutation matrix sending user ``i`` to ``partner(i)``."""
    perm = np.zeros((n_users, n_users))
    for i in range(n_users):
        perm[i, partner(i)] = 1.0
    return perm


def scale_to_relay_budget(inst: SystemInstance, a: np.ndarray) -> ComplexMatrix:
    power = relay_power_of_A(inst, a)
    if power <= 0 or not np.isfinite(power):
        raise DomainError("relay matrix draws no power")
    return np.asarray(a, dtype=complex) * np.sqrt(inst.power_budget / power)


def scaled_identity(inst: SystemInstance) -> ComplexMatrix:
    return scale_to_relay_budget(inst, np.eye(inst.antennas, dtype=complex))


def antenna_selection(inst: SystemInstance) -> ComplexMatrix:
    """The single relay antenna whose min weighted SINR is largest."""
    best, best_value = None, -np.inf
    for m in range(inst.antennas):
        a = np.zeros((inst.antennas, inst.antennas), dtype=complex)
        a[m, m] = 1.0
        a = scale_to_relay_budget(inst, a)
        value = float(np.min(sinr_of_A(inst, a) / inst.sinr_targets))
        if value > best_value:
            best, best_value = a, value
    assert best is not None
    return best


def _swap_relay(inst: SystemInstance, regularization: float) -> ComplexMatrix:
    # H has the user channels as columns, so (H^T A H)[i, j] = h_i^T A h_j.
    h = inst.channels.T
    reg = regularization * np.eye(inst.n_users)
    receive = h.T @ h.conj() + reg
    transmit = h.conj().T @ h + reg
    inner = scipy.linalg.solve(receive, pair_swap(inst.n_users))
    inner = inner @ scipy.linalg.solve(transmit, h.conj().T)
    return h.conj() @ inner


def zero_forcing(inst: SystemInstance) -> ComplexMatrix:
    if inst.antennas < inst.n_users:
        raise DimensionError(
            f"zero forcing needs at least {inst.n_users} relay antennas, "
            f"got {inst.antennas}"
        )
    return scale_to_relay_budget(inst, _swap_relay(inst, 0.0))


def mmse_relay(inst: SystemInstance) -> ComplexMatrix:
    n0 = float(np.mean(np.real(np.diag(inst.relay_noise))))
    p = float(np.mean(inst.user_powers))
    return scale_to_relay_budget(inst, _swap_relay(inst, n0 / p))


_BUILDERS = {
    BaselineKind.SCALED_IDENTITY: scaled_identity,
    BaselineKind.ANTENNA_SELECTION: antenna_selection,
    BaselineKind.ZERO_FORCING: zero_forcing,
    BaselineKind.MMSE_RELAY: mmse_relay,
}


def baseline_beamformer(kind: BaselineKind, inst: SystemInstance) -> ComplexMatrix:
    return _BUILDERS[BaselineKind(kind)](inst)
