"""Real symmetric operator algebra.

Everything downstream (state encodings, centroids, the measurement
construction) works with real symmetric matrices, so this module collects the
few dense linear-algebra primitives needed: eigendecomposition, positive
square roots, pseudoinverse square roots with image/kernel projectors, tensor
powers of vectors, and the trace inner product. All functions are pure and
operate on plain float64 arrays.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DenseBlowup, DimMismatch, InvalidOperator, NotPositiveSemidefinite

#: Relative eigenvalue cutoff below which a pseudoinverse treats a direction
#: as part of the kernel.
RANK_TOL = 1e-10

#: How far below zero an eigenvalue may sit before PSD-requiring operations
#: refuse the input. Small negatives within this band are clipped to zero.
NEG_EIG_TOL = 1e-8

#: Largest operator dimension the dense code path will materialise. Tensor
#: lifts past this must go through the Gram-space engine instead.
DENSE_DIM_LIMIT = 4096


@dataclass(frozen=True, eq=False)
class SpectralDecomposition:
    """Eigensystem of a real symmetric matrix.

    ``eigenvalues`` are ascending and ``eigenvectors`` holds the matching
    orthonormal eigenvectors as columns, so that
    ``eigenvectors @ diag(eigenvalues) @ eigenvectors.T`` reconstructs the
    input.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def symmetrize(a) -> np.ndarray:
    """Return the symmetric part ``(A + A.T) / 2`` as a float64 array.

    Raises
    ------
    InvalidOperator
        If the input is not a square matrix with finite entries.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InvalidOperator(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidOperator("matrix entries must be finite")
    return (a + a.T) / 2.0


def eig_sym(a) -> SpectralDecomposition:
    """Eigendecompose a real symmetric matrix.

    The input is symmetrized first, so mildly asymmetric round-off is
    tolerated.
    """
    sym = symmetrize(a)
    eigenvalues, eigenvectors = np.linalg.eigh(sym)
    return SpectralDecomposition(eigenvalues=eigenvalues, eigenvectors=eigenvectors)


def psd_sqrt(a, neg_tol: float = NEG_EIG_TOL) -> np.ndarray:
    """Positive square root of a positive semidefinite matrix.

    Eigenvalues in ``[-neg_tol, 0)`` are clipped to zero; anything more
    negative raises :class:`NotPositiveSemidefinite`.
    """
    dec = eig_sym(a)
    low = float(dec.eigenvalues[0]) if dec.eigenvalues.size else 0.0
    if low < -neg_tol:
        raise NotPositiveSemidefinite(f"eigenvalue {low:.3e} below -{neg_tol:.0e}")
    w = np.sqrt(np.clip(dec.eigenvalues, 0.0, None))
    return symmetrize((dec.eigenvectors * w) @ dec.eigenvectors.T)


@dataclass(frozen=True, eq=False)
class PinvSqrt:
    """Pseudoinverse square root together with image and kernel projectors.

    ``inv_sqrt`` acts as the inverse square root on the image of the input
    and as zero on its kernel; ``im + ker`` is the identity.
    """

    inv_sqrt: np.ndarray
    im: np.ndarray
    ker: np.ndarray


def pinv_sqrt(a, rank_tol: float = RANK_TOL) -> PinvSqrt:
    """Moore-Penrose inverse square root of a PSD matrix.

    Eigenvalues at or below ``rank_tol`` times the largest eigenvalue are
    treated as exactly zero and assigned to the kernel. The zero matrix is
    valid input and yields ``im = 0``, ``ker = I``.

    Parameters
    ----------
    a : array_like
        Symmetric PSD matrix (eigenvalues above ``-NEG_EIG_TOL``).
    rank_tol : float
        Relative rank cutoff, must be positive.
    """
    if not rank_tol > 0.0:
        raise ValueError("rank_tol must be positive")
    dec = eig_sym(a)
    low = float(dec.eigenvalues[0])
    if low < -NEG_EIG_TOL:
        raise NotPositiveSemidefinite(f"eigenvalue {low:.3e} below -{NEG_EIG_TOL:.0e}")
    w = np.clip(dec.eigenvalues, 0.0, None)
    cut = rank_tol * float(w[-1])
    keep = w > cut
    vs = dec.eigenvectors[:, keep]
    inv_sqrt = symmetrize((vs * w[keep] ** -0.5) @ vs.T)
    im = symmetrize(vs @ vs.T)
    ker = symmetrize(np.eye(a.shape[0]) - im)
    return PinvSqrt(inv_sqrt=inv_sqrt, im=im, ker=ker)


def tensor_power(v, n: int, dense_dim_limit: int = DENSE_DIM_LIMIT) -> np.ndarray:
    """n-fold Kronecker power of a vector.

    The entry at multi-index ``(i_1, ..., i_n)`` is the product
    ``v[i_1] * ... * v[i_n]``; unit vectors stay unit. Raises
    :class:`DenseBlowup` when ``len(v) ** n`` exceeds ``dense_dim_limit``.
    """
    v = np.asarray(v, dtype=float)
    if v.ndim != 1:
        raise InvalidOperator(f"expected a vector, got shape {v.shape}")
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise ValueError(f"copy count must be a positive integer, got {n!r}")
    if v.size**n > dense_dim_limit:
        raise DenseBlowup(
            f"tensor power dimension {v.size}^{n} exceeds the dense limit "
            f"{dense_dim_limit}; use the gram engine"
        )
    out = v
    for _ in range(n - 1):
        out = np.kron(out, v)
    return out


def trace_product(a, b) -> float:
    """Trace inner product ``sum_ij A[i,j] * B[i,j]`` (= tr(AB) for symmetric A, B)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise DimMismatch(f"operand shapes differ: {a.shape} vs {b.shape}")
    return float(np.sum(a * b))
