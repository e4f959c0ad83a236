"""Eigenvalue utilities: spectral abscissa and extremal symmetric eigenpairs."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class EigensolverError(RuntimeError):
    """The underlying eigenvalue iteration failed to converge."""


@dataclass(frozen=True)
class Eigenpair:
    """Largest eigenvalue of a symmetric matrix with a unit eigenvector."""

    value: float
    vector: np.ndarray


def spectral_abscissa(matrix: np.ndarray) -> float:
    """Largest real part over the eigenvalues of a square real matrix.

    Negative iff the linear system xdot = M x is asymptotically stable.

    Raises
    ------
    EigensolverError
        If the dense QR eigenvalue iteration does not converge.
    """
    m = np.asarray(matrix, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix has non-finite entries")
    try:
        eigs = np.linalg.eigvals(m)
    except np.linalg.LinAlgError as exc:
        raise EigensolverError(f"eigenvalue iteration failed: {exc}") from exc
    return float(np.max(eigs.real))


def max_eigpair_sym(matrix: np.ndarray, sym_tol: float = 1e-10) -> Eigenpair:
    """Largest eigenvalue and eigenvector of a symmetric real matrix.

    The input is symmetrized as (S + S')/2 first; asymmetry beyond
    ``sym_tol`` (relative to the matrix scale) is rejected.  The returned
    vector has unit norm and a deterministic sign: its first component
    larger than 1e-12 in magnitude is positive.

    Raises
    ------
    EigensolverError
        If the symmetric eigensolver does not converge.
    """
    s = np.asarray(matrix, dtype=float)
    if s.ndim != 2 or s.shape[0] != s.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {s.shape}")
    scale = max(1.0, float(np.max(np.abs(s))) if s.size else 1.0)
    if np.max(np.abs(s - s.T), initial=0.0) > sym_tol * scale:
        raise ValueError("matrix is not symmetric within tolerance")
    sym = (s + s.T) / 2.0
    try:
        values, vectors = np.linalg.eigh(sym)
    except np.linalg.LinAlgError as exc:
        raise EigensolverError(f"symmetric eigensolver failed: {exc}") from exc
    vec = vectors[:, -1].copy()
    vec = apply_sign_convention(vec)
    return Eigenpair(float(values[-1]), vec)


def apply_sign_convention(vector: np.ndarray) -> np.ndarray:
    """Flip a vector so its first component with |x_k| > 1e-12 is positive."""
    nz = np.nonzero(np.abs(vector) > 1e-12)[0]
    if nz.size and vector[nz[0]] < 0.0:
        return -vector
    return vector
