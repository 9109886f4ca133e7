"""Small dense complex linear-algebra helpers used by the precoders and solvers.

Matrices are plain 2-D numpy arrays (complex128); vectors are 1-D arrays.
Problem sizes here are tiny (M, K, N <= ~64), so everything is dense.
"""
import warnings

import numpy as np
import scipy.linalg

from .errors import RankDeficient, SingularMatrix

# pivot magnitude below this fraction of max|entry| counts as singular
SINGULAR_RTOL = 1e-12


def hermitian(m):
    """Conjugate transpose."""
    return np.conj(np.asarray(m)).T


def lu_factor(a):
    """Partial-pivot LU of a square matrix, raising SingularMatrix on tiny pivots."""
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    scale = np.max(np.abs(a)) if a.size else 0.0
    if scale == 0.0 or not np.isfinite(scale):
        raise SingularMatrix("matrix is zero or non-finite")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(a, check_finite=False)
    if np.min(np.abs(np.diag(lu))) < SINGULAR_RTOL * scale:
        raise SingularMatrix("matrix is numerically singular")
    return lu, piv


def solve_linear(a, b):
    """Solve ``a @ x = b`` for square ``a``.

    Raises
    ------
    SingularMatrix
        If a pivot falls below ``1e-12 * max|a|``.
    """
    lu_piv = lu_factor(a)
    return scipy.linalg.lu_solve(lu_piv, np.asarray(b, dtype=complex), check_finite=False)


def pseudo_inverse_tall(h):
    """Left pseudo-inverse ``(h^H h)^{-1} h^H`` of a tall M x K matrix (M >= K)."""
    h = np.asarray(h, dtype=complex)
    m, k = h.shape
    if m < k:
        raise ValueError(f"pseudo_inverse_tall needs M >= K, got {m} x {k}")
    hh = hermitian(h)
    try:
        return solve_linear(hh @ h, hh)
    except SingularMatrix as exc:
        raise RankDeficient(f"rank(h) < {k}") from exc


def max_eigenvalue_psd(a):
    """Largest eigenvalue of a Hermitian PSD matrix."""
    a = np.asarray(a, dtype=complex)
    if a.size == 0:
        return 0.0
    if not np.allclose(a, hermitian(a), rtol=0.0, atol=1e-10 * max(1.0, np.max(np.abs(a)))):
        raise ValueError("matrix is not Hermitian")
    return float(max(np.linalg.eigvalsh(a)[-1], 0.0))
