from typing import Sequence, Union

import numpy as np
import numpy.typing as npt

from twrbf.errors import DimensionError

# Dense complex matrices and vectors are plain numpy arrays throughout.
ComplexMatrix = npt.NDArray[np.complex128]
ComplexVector = npt.NDArray[np.complex128]
RealVector = npt.NDArray[np.float64]

SeedType = Union[None, int, Sequence[int], np.random.SeedSequence]


def make_rng(seed: SeedType) -> np.random.Generator:
    """
    Build the PCG64 generator used repo-wide. ``seed`` may be an int, a
    sequence of ints (e.g. ``[run_seed, trial]``) or a SeedSequence.
    """
    return np.random.default_rng(seed)


def complex_normal(
    rng: np.random.Generator, shape: Union[int, Sequence[int]]
) -> ComplexMatrix:
    """Draw i.i.d. CN(0, 1) entries."""
    re = rng.standard_normal(shape)
    im = rng.standard_normal(shape)
    return (re + 1j * im) / np.sqrt(2.0)


def as_float_array(values: Union[float, Sequence[float]], length: int) -> RealVector:
    """
    Broadcast a scalar or sequence to a float vector of the given length.
    """
    arr = np.asarray(values, dtype=float)
    if arr.ndim == 0:
        return np.full(length, float(arr))
    if arr.shape != (length,):
        raise DimensionError(f"expected {length} values, got {arr.shape[0]}")
    return arr.copy()
