"""Dense SPD helpers: one factorization routine, one jitter policy.

The low-level LAPACK bindings are used directly because the samplers factor
and solve thousands of very small matrices per second; the scipy wrapper
overhead would dominate the flops.
"""

import numpy as np
from scipy.linalg.lapack import dpotrf, dtrtrs

from .errors import InvalidParameterError

# Relative jitter allowed when certifying a matrix as numerically SPD.
SPD_JITTER_REL = 1e-12


def spd_cholesky(mat, name="matrix"):
    """Lower Cholesky factor of a symmetric positive-definite matrix.

    A single retry with jitter ``1e-12 * trace`` absorbs roundoff-level
    indefiniteness; anything beyond that raises ``InvalidParameterError``
    rather than regularizing silently.
    """
    a = np.asarray(mat, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InvalidParameterError(f"{name} must be square, got shape {a.shape}")
    if a.size == 0:
        return a.copy()
    scale = float(np.abs(a).max())
    if float(np.abs(a - a.T).max()) > 1e-8 * max(scale, 1.0):
        raise InvalidParameterError(f"{name} is not symmetric")
    # LAPACK reads only the lower triangle, so no explicit symmetrization.
    c, info = dpotrf(a, lower=1, clean=1, overwrite_a=0)
    if info == 0:
        return c
    jitter = SPD_JITTER_REL * float(np.trace(a))
    if jitter > 0.0:
        c, info = dpotrf(a + jitter * np.eye(a.shape[0]), lower=1, clean=1)
        if info == 0:
            return c
    raise InvalidParameterError(f"{name} is not positive definite")


def chol_unchecked(a, name="matrix"):
    """Factorization for matrices this package built itself (symmetric by
    construction); skips the symmetry gate but keeps the jitter policy."""
    c, info = dpotrf(a, lower=1, clean=1, overwrite_a=0)
    if info == 0:
        return c
    jitter = SPD_JITTER_REL * float(np.trace(a))
    if jitter > 0.0:
        c, info = dpotrf(a + jitter * np.eye(a.shape[0]), lower=1, clean=1)
        if info == 0:
            return c
    raise InvalidParameterError(f"{name} is not positive definite")


def tri_solve(chol_lower, b, trans=0):
    """Solve L x = b (or L^T x = b with trans=1) with minimal overhead.

    Assumes float64 inputs produced internally; shapes are not validated.
    """
    if chol_lower.shape[0] == 0:
        return np.zeros_like(b)
    x, info = dtrtrs(chol_lower, b, lower=1, trans=trans)
    if info != 0:
        raise InvalidParameterError("triangular solve failed (singular factor)")
    return x


def is_spd(mat):
    try:
        spd_cholesky(mat)
    except InvalidParameterError:
        return False
    return True


def spd_solve(chol_lower, b):
    """Solve (L L^T) x = b given the lower factor L."""
    return tri_solve(chol_lower, tri_solve(chol_lower, b), trans=1)


def spd_inverse(chol_lower):
    inv_l = tri_solve(chol_lower, np.eye(chol_lower.shape[0]))
    return inv_l.T @ inv_l


def chol_logdet(chol_lower):
    """log-determinant of the factored matrix."""
    return 2.0 * float(np.sum(np.log(np.diag(chol_lower))))


def trace_spd_inverse(chol_lower):
    """tr(M^{-1}) for M = L L^T, via the Frobenius norm of L^{-1}."""
    if chol_lower.shape[0] == 0:
        return 0.0
    inv_l = tri_solve(chol_lower, np.eye(chol_lower.shape[0]))
    return float(np.sum(inv_l * inv_l))
