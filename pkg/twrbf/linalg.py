"""
Dense complex linear algebra shared by the solvers.

All matrices are numpy arrays. ``vec`` stacks columns (column-major, numpy
``order="F"``); this is the convention under which ``vec(A B C) = (C^T kron
A) vec(B)`` and under which the lifted relay forms in :py:mod:`twrbf.model`
are built.
"""
from typing import Tuple

import numpy as np
import scipy.linalg

from twrbf.errors import DimensionError, NotPSDError, SolverError
from twrbf.util import ComplexMatrix, ComplexVector, RealVector

# Relative eigenvalue threshold below which a PSD matrix is clipped to zero.
PSD_CLIP = 1e-12


def _check_square(m: np.ndarray) -> None:
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {m.shape}")
    if m.shape[0] < 1:
        raise DimensionError("matrix must have dimension at least 1")


def hermitian(m: np.ndarray) -> ComplexMatrix:
    """Return (m + m^H) / 2."""
    m = np.asarray(m, dtype=complex)
    _check_square(m)
    return (m + m.conj().T) / 2


def herm_eig(m: np.ndarray) -> Tuple[RealVector, ComplexMatrix]:
    """
    Eigendecomposition of a Hermitian matrix with eigenvalues in descending
    order. Column ``k`` of the returned matrix is the eigenvector of the
    ``k``-th eigenvalue.
    """
    m = hermitian(m)
    if not np.all(np.isfinite(m)):
        raise SolverError("eig", "matrix has non-finite entries")
    try:
        w, v = scipy.linalg.eigh(m)
    except np.linalg.LinAlgError as e:
        raise SolverError("eig", f"eigendecomposition did not converge: {e}")
    return w[::-1].copy(), v[:, ::-1].copy()


def lambda_min(m: np.ndarray) -> float:
    m = hermitian(m)
    return float(scipy.linalg.eigh(m, eigvals_only=True)[0])


def generalized_max_eig(a: np.ndarray, b: np.ndarray) -> float:
    """
    Largest eigenvalue of the pencil (a, b), i.e. the maximum over x of
    x^H a x / x^H b x. ``b`` must be positive definite.
    """
    w = scipy.linalg.eigh(hermitian(a), hermitian(b), eigvals_only=True)
    return float(w[-1])


def is_psd(m: np.ndarray, tol: float = 1e-9) -> bool:
    w = scipy.linalg.eigh(hermitian(m), eigvals_only=True)
    scale = max(1.0, float(np.max(np.abs(w))))
    return bool(w[0] >= -tol * scale)


def kron(a: np.ndarray, b: np.ndarray) -> ComplexMatrix:
    return np.kron(np.atleast_2d(a), np.atleast_2d(b))


def vec(m: np.ndarray) -> ComplexVector:
    m = np.asarray(m)
    if m.ndim != 2:
        raise DimensionError(f"vec expects a matrix, got shape {m.shape}")
    return m.reshape(-1, order="F")


def unvec(v: np.ndarray, rows: int, cols: int) -> ComplexMatrix:
    v = np.asarray(v)
    if v.ndim != 1 or v.shape[0] != rows * cols:
        raise DimensionError(
            f"cannot de-stack a vector of shape {v.shape} into {rows}x{cols}"
        )
    return v.reshape((rows, cols), order="F")


def psd_sqrt(m: np.ndarray, clip: float = PSD_CLIP) -> ComplexMatrix:
    """
    Hermitian square root of a PSD matrix. Eigenvalues down to
    ``-clip * ||m||`` are treated as zero round-off.
    """
    w, v = herm_eig(m)
    scale = float(np.max(np.abs(w)))
    if w[-1] < -clip * max(scale, np.finfo(float).tiny):
        raise NotPSDError(float(w[-1]), "matrix is not PSD")
    w = np.clip(w, 0.0, None)
    return hermitian((v * np.sqrt(w)) @ v.conj().T)


def embed_block(block: np.ndarray, offset: int, size: int) -> ComplexMatrix:
    """Place ``block`` on the diagonal of a zero size x size matrix."""
    out = np.zeros((size, size), dtype=complex)
    n = block.shape[0]
    if offset < 0 or offset + n > size:
        raise DimensionError(f"block of size {n} at {offset} exceeds {size}")
    out[offset : offset + n, offset : offset + n] = block
    return out


def extract_block(m: np.ndarray, offset: int, size: int) -> ComplexMatrix:
    if offset < 0 or offset + size > m.shape[0]:
        raise DimensionError(f"block of size {size} at {offset} exceeds {m.shape[0]}")
    return m[offset : offset + size, offset : offset + size].copy()
