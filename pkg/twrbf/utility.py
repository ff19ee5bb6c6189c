"""
Monotone utilities of the vector ``z = 1 + SINR``.
"""
import enum
from typing import Callable, Optional, Sequence, Union

import numpy as np
import scipy.special

from twrbf.errors import DomainError
from twrbf.util import RealVector

# Tolerance for z slightly below one from solver round-off.
DOMAIN_TOL = 1e-9

_CHECK_LEVELS = (1.1, 2.0, 5.0)


class UtilityKind(enum.Enum):
    WEIGHTED_SUM_RATE = "rate"
    NEG_WEIGHTED_SUM_MSE = "mse"
    NEG_WEIGHTED_SUM_SER = "ser"
    CUSTOM = "custom"


class Modulation(enum.Enum):
    BPSK = "bpsk"
    QPSK = "qpsk"

    @property
    def factor(self) -> float:
        """
        ``c`` in ``Q(sqrt(c * SINR))``. For QPSK with Gray mapping this is the
        bit error probability.
        """
        return 2.0 if self is Modulation.BPSK else 1.0


def q_function(x: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
    return 0.5 * scipy.special.erfc(np.asarray(x) / np.sqrt(2.0))


def error_probability(
    sinr: Union[float, np.ndarray], modulation: Modulation = Modulation.QPSK
) -> Union[float, np.ndarray]:
    sinr = np.clip(np.asarray(sinr, dtype=float), 0.0, None)
    return q_function(np.sqrt(modulation.factor * sinr))


bit_error_rate = error_probability


class Utility:
    def __init__(
        self,
        kind: UtilityKind,
        weights: Sequence[float],
        modulation: Modulation = Modulation.QPSK,
        function: Optional[Callable[[RealVector], float]] = None,
        check: bool = True,
    ):
        self.kind = kind
        self.weights = np.asarray(weights, dtype=float)
        self.modulation = modulation
        self.function = function
        if np.any(self.weights <= 0):
            raise DomainError("utility weights must be positive")
        if kind is UtilityKind.CUSTOM and function is None:
            raise DomainError("a custom utility needs an evaluation function")
        if check:
            self._check_monotone()

    @classmethod
    def sum_rate(cls, weights: Sequence[float]) -> "Utility":
        return cls(UtilityKind.WEIGHTED_SUM_RATE, weights)

    @classmethod
    def neg_mse(cls, weights: Sequence[float]) -> "Utility":
        return cls(UtilityKind.NEG_WEIGHTED_SUM_MSE, weights)

    @classmethod
    def neg_ser(
        cls, weights: Sequence[float], modulation: Modulation = Modulation.QPSK
    ) -> "Utility":
        return cls(UtilityKind.NEG_WEIGHTED_SUM_SER, weights, modulation=modulation)

    @classmethod
    def custom(
        cls, function: Callable[[RealVector], float], dimension: int
    ) -> "Utility":
        return cls(UtilityKind.CUSTOM, np.ones(dimension), function=function)

    @property
    def dimension(self) -> int:
        return int(self.weights.shape[0])

    def _check_monotone(self) -> None:
        for level in _CHECK_LEVELS:
            z = np.full(self.dimension, level)
            base = self(z)
            for i in range(self.dimension):
                bumped = z.copy()
                bumped[i] += 1e-6 * level
                if not self(bumped) > base:
                    raise DomainError(
                        f"utility is not increasing in coordinate {i} at z={level}"
                    )

    def __call__(self, z: np.ndarray) -> float:
        return utility_eval(self, z)

    def __repr__(self):
        return f"Utility({self.kind.value}, weights={self.weights.tolist()})"


def utility_eval(u: Utility, z: np.ndarray) -> float:
    z = np.asarray(z, dtype=float)
    if z.shape != u.weights.shape:
        raise DomainError(f"utility of dimension {u.dimension} got z of {z.shape}")
    if np.any(z < 1.0 - DOMAIN_TOL):
        raise DomainError(f"utility evaluated outside z >= 1: {z}")
    z = np.maximum(z, 1.0)
    if u.kind is UtilityKind.WEIGHTED_SUM_RATE:
        return float(np.sum(0.5 * u.weights * np.log2(z)))
    if u.kind is UtilityKind.NEG_WEIGHTED_SUM_MSE:
        return float(-np.sum(u.weights / z))
    if u.kind is UtilityKind.NEG_WEIGHTED_SUM_SER:
        return float(-np.sum(u.weights * error_probability(z - 1.0, u.modulation)))
    assert u.function is not None
    return float(u.function(z))
