"""Matrix-normal and inverse-Wishart kernels.

Conventions
-----------
Matrix normal ``MN(mean, row_cov, col_cov)``: a p x d variate whose density is
proportional to ``etr{-row_cov^{-1} (x - mean) col_cov^{-1} (x - mean)^T / 2}``.
The column-stacked vector is Gaussian with covariance ``col_cov (x) row_cov``
(Kronecker product).

Inverse Wishart ``IW(dof, inv_scale)``: parameterized so that
``Sigma^{-1} ~ Wishart(dof, inv_scale^{-1})`` and hence
``E[Sigma^{-1}] = dof * inv_scale^{-1}``.  The density of Sigma is
proportional to ``|inv_scale|^{dof/2} |Sigma|^{-(dof+d+1)/2}
etr(-inv_scale Sigma^{-1} / 2)``.  Carrying the inverse scale directly avoids
a scale-versus-inverse-scale mixup in the posterior updates, which always
produce the inverse scale.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import multigammaln

from ._linalg import chol_logdet, chol_unchecked, spd_cholesky, tri_solve
from .errors import InvalidParameterError

_LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass(frozen=True, eq=False)
class MatrixNormalParams:
    """Parameters of a p x d matrix-normal distribution."""

    mean: np.ndarray
    row_cov: np.ndarray
    col_cov: np.ndarray

    def __post_init__(self):
        mean = np.atleast_2d(np.asarray(self.mean, dtype=float))
        row_cov = np.atleast_2d(np.asarray(self.row_cov, dtype=float))
        col_cov = np.atleast_2d(np.asarray(self.col_cov, dtype=float))
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "row_cov", row_cov)
        object.__setattr__(self, "col_cov", col_cov)
        p, d = mean.shape
        if row_cov.shape != (p, p):
            raise InvalidParameterError(
                f"row_cov shape {row_cov.shape} incompatible with mean {mean.shape}"
            )
        if col_cov.shape != (d, d):
            raise InvalidParameterError(
                f"col_cov shape {col_cov.shape} incompatible with mean {mean.shape}"
            )

    @property
    def shape(self):
        return self.mean.shape


@dataclass(frozen=True, eq=False)
class InverseWishartParams:
    """Degrees of freedom and inverse scale of a d x d inverse Wishart."""

    dof: float
    inv_scale: np.ndarray

    def __post_init__(self):
        inv_scale = np.atleast_2d(np.asarray(self.inv_scale, dtype=float))
        object.__setattr__(self, "inv_scale", inv_scale)
        object.__setattr__(self, "dof", float(self.dof))
        d = inv_scale.shape[0]
        if inv_scale.shape != (d, d):
            raise InvalidParameterError(f"inv_scale must be square, got {inv_scale.shape}")
        if not self.dof > d - 1:
            raise InvalidParameterError(
                f"dof must exceed dim - 1 = {d - 1}, got {self.dof}"
            )

    @property
    def dim(self):
        return self.inv_scale.shape[0]


@lru_cache(maxsize=64)
def _bartlett_indices(dim):
    diag = np.arange(dim)
    off = np.tril_indices(dim, k=-1)
    return diag, off


def _bartlett_lower(dof, dim, rng, size=None):
    """Lower-triangular Bartlett factor(s) T with T T^T ~ Wishart(dof, I)."""
    diag, off = _bartlett_indices(dim)
    diag_df = dof - diag
    if size is None:
        t = np.zeros((dim, dim))
        t[diag, diag] = np.sqrt(rng.chisquare(diag_df))
        t[off] = rng.standard_normal(off[0].size)
    else:
        t = np.zeros((size, dim, dim))
        t[:, diag, diag] = np.sqrt(rng.chisquare(diag_df, size=(size, dim)))
        t[:, off[0], off[1]] = rng.standard_normal((size, off[0].size))
    return t


def sample_inverse_wishart(params: InverseWishartParams, rng, size=None):
    """Draw Sigma ~ IW(dof, inv_scale); ``size`` draws are stacked on axis 0.

    Uses the triangular Bartlett construction on Sigma^{-1}; the returned
    matrix is assembled as K K^T and therefore SPD by construction.
    """
    d = params.dim
    l_psi = spd_cholesky(params.inv_scale, "inv_scale")
    t = _bartlett_lower(params.dof, d, rng, size)
    # Sigma = (L_psi T^{-T})(L_psi T^{-T})^T, so Sigma^{-1} = G T T^T G^T with
    # G G^T = inv_scale^{-1}.
    if size is None:
        kt = tri_solve(t, l_psi.T)
        return kt.T @ kt
    rhs = np.broadcast_to(l_psi.T, (size, d, d)).copy()
    kt = np.linalg.solve(t, rhs)
    return np.swapaxes(kt, -1, -2) @ kt


def sample_matrix_normal(params: MatrixNormalParams, rng, size=None, noise=None):
    """Draw from MN(mean, row_cov, col_cov) as mean + L_row E L_col^T.

    ``noise`` injects the standard-normal matrix E deterministically (shape
    p x d, or size x p x d); it exists for reproducibility tests and the
    zero-noise sanity check.
    """
    p, d = params.shape
    l_row = spd_cholesky(params.row_cov, "row_cov")
    l_col = spd_cholesky(params.col_cov, "col_cov")
    shape = (p, d) if size is None else (size, p, d)
    if noise is None:
        noise = rng.standard_normal(shape)
    else:
        noise = np.asarray(noise, dtype=float)
        if noise.shape != shape:
            raise InvalidParameterError(
                f"noise shape {noise.shape} does not match draw shape {shape}"
            )
    return params.mean + l_row @ noise @ l_col.T


def sample_matrix_normal_inverse_wishart(mean, row_cov, iw_params, rng, size=None):
    """Joint draw: Sigma ~ IW(iw_params), then beta ~ MN(mean, row_cov, Sigma).

    Returns ``(beta, sigma)``; with ``size`` given both are stacked on axis 0.
    This is the (Sigma, beta) refresh shared by both Gibbs samplers and the
    Monte-Carlo verifiers.
    """
    mean = np.atleast_2d(np.asarray(mean, dtype=float))
    p, d = mean.shape
    l_row = spd_cholesky(row_cov, "row_cov")
    sigma = sample_inverse_wishart(iw_params, rng, size)
    if size is None:
        l_col = chol_unchecked(sigma, "sigma draw")
        e = rng.standard_normal((p, d))
        beta = mean + l_row @ e @ l_col.T
    else:
        l_col = np.linalg.cholesky(sigma)
        e = rng.standard_normal((size, p, d))
        beta = mean + l_row @ e @ np.swapaxes(l_col, -1, -2)
    return beta, sigma


def matnorm_logpdf(x, params: MatrixNormalParams):
    """Log density of the matrix normal, normalizing constant included."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    p, d = params.shape
    if x.shape != (p, d):
        raise InvalidParameterError(f"x shape {x.shape} does not match params {params.shape}")
    l_row = spd_cholesky(params.row_cov, "row_cov")
    l_col = spd_cholesky(params.col_cov, "col_cov")
    # tr{row^{-1} D col^{-1} D^T} = ||L_row^{-1} D L_col^{-T}||_F^2
    delta = x - params.mean
    g = tri_solve(l_row, delta)
    h = tri_solve(l_col, g.T)
    quad = float(np.sum(h * h))
    return (
        -0.5 * p * d * _LOG_2PI
        - 0.5 * d * chol_logdet(l_row)
        - 0.5 * p * chol_logdet(l_col)
        - 0.5 * quad
    )


def invwishart_logpdf(sigma, params: InverseWishartParams):
    """Log density of IW(dof, inv_scale) at an SPD matrix, fully normalized."""
    sigma = np.atleast_2d(np.asarray(sigma, dtype=float))
    d = params.dim
    if sigma.shape != (d, d):
        raise InvalidParameterError(f"sigma shape {sigma.shape} does not match dim {d}")
    m = params.dof
    l_sig = spd_cholesky(sigma, "sigma")
    l_psi = spd_cholesky(params.inv_scale, "inv_scale")
    # tr(inv_scale Sigma^{-1}) = ||L_sig^{-1} L_psi||_F^2
    w = tri_solve(l_sig, l_psi)
    trace_term = float(np.sum(w * w))
    return (
        0.5 * m * chol_logdet(l_psi)
        - 0.5 * m * d * float(np.log(2.0))
        - multigammaln(0.5 * m, d)
        - 0.5 * (m + d + 1) * chol_logdet(l_sig)
        - 0.5 * trace_term
    )
