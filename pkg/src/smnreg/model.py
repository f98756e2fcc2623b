"""Data, prior, and chain-state containers plus the posterior hyperparameter update.

The deterministic map ``u -> (psi, gamma, omega)`` feeding the
(Sigma, beta) refresh lives here because both the sampler and the
ergodicity analyzer need it.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from ._linalg import chol_unchecked, spd_cholesky, spd_inverse, spd_solve, tri_solve
from .errors import InvalidParameterError

# Above this many observations the n x n identity route for psi is replaced
# by the O(n p^2) textbook form with symmetric projection.
IDENTITY_PATH_MAX_N = 2048


def _load_matrix_csv(path):
    """Read a numeric CSV (optional single header row) into a 2-d array."""
    rows = []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if row and any(field.strip() for field in row):
                rows.append([field.strip() for field in row])
    if not rows:
        raise InvalidParameterError(f"{path} contains no data rows")

    def numeric(row):
        try:
            [float(v) for v in row]
        except ValueError:
            return False
        return True

    start = 0 if numeric(rows[0]) else 1
    if start == 1 and len(rows) == 1:
        raise InvalidParameterError(f"{path} holds only a header row")
    width = len(rows[start])
    data = []
    for row in rows[start:]:
        if len(row) != width or not numeric(row):
            raise InvalidParameterError(f"malformed row in {path}: {row!r}")
        data.append([float(v) for v in row])
    return np.asarray(data, dtype=float)


@dataclass(frozen=True, eq=False)
class Dataset:
    """Design matrix X (n x p) and response matrix Y (n x d)."""

    X: np.ndarray
    Y: np.ndarray

    def __post_init__(self):
        x = np.atleast_2d(np.asarray(self.X, dtype=float))
        y = np.atleast_2d(np.asarray(self.Y, dtype=float))
        object.__setattr__(self, "X", x)
        object.__setattr__(self, "Y", y)
        if x.shape[0] != y.shape[0]:
            raise InvalidParameterError(
                f"X and Y row counts differ: {x.shape[0]} vs {y.shape[0]}"
            )
        if x.shape[0] < 1:
            raise InvalidParameterError("need at least one observation")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise InvalidParameterError("X and Y must be finite")

    @classmethod
    def from_csv(cls, x_path, y_path) -> "Dataset":
        return cls(_load_matrix_csv(x_path), _load_matrix_csv(y_path))

    @classmethod
    def _unchecked(cls, x, y) -> "Dataset":
        # Hot-loop constructor for internally generated float arrays.
        obj = object.__new__(cls)
        object.__setattr__(obj, "X", x)
        object.__setattr__(obj, "Y", y)
        return obj

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @property
    def d(self) -> int:
        return self.Y.shape[1]


@dataclass(frozen=True, eq=False)
class NIWPrior:
    """Conditionally conjugate normal-inverse-Wishart prior.

    ``beta | Sigma ~ MN(mean, row_cov, Sigma)`` and
    ``Sigma^{-1} ~ Wishart(dof, scale)``, so ``E[Sigma^{-1}] = dof * scale``.
    """

    mean: np.ndarray
    row_cov: np.ndarray
    dof: float
    scale: np.ndarray

    def __post_init__(self):
        mean = np.atleast_2d(np.asarray(self.mean, dtype=float))
        row_cov = np.atleast_2d(np.asarray(self.row_cov, dtype=float))
        scale = np.atleast_2d(np.asarray(self.scale, dtype=float))
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "row_cov", row_cov)
        object.__setattr__(self, "scale", scale)
        object.__setattr__(self, "dof", float(self.dof))
        p, d = mean.shape
        if row_cov.shape != (p, p):
            raise InvalidParameterError("row_cov incompatible with mean")
        if scale.shape != (d, d):
            raise InvalidParameterError("scale incompatible with mean")
        spd_cholesky(row_cov, "prior row_cov")
        spd_cholesky(scale, "prior scale")
        if not self.dof > d - 1:
            raise InvalidParameterError(f"prior dof must exceed d - 1 = {d - 1}")

    @classmethod
    def default(cls, p: int, d: int) -> "NIWPrior":
        """Weakly informative default: zero mean, 100 I row covariance,
        dof d + 2, identity scale."""
        return cls(np.zeros((p, d)), 100.0 * np.eye(p), d + 2.0, np.eye(d))

    @property
    def p(self) -> int:
        return self.mean.shape[0]

    @property
    def d(self) -> int:
        return self.mean.shape[1]

    @cached_property
    def row_cov_chol(self):
        return spd_cholesky(self.row_cov, "prior row_cov")

    @cached_property
    def row_cov_inv(self):
        return spd_inverse(self.row_cov_chol)

    @cached_property
    def row_prec_mean(self):
        """row_cov^{-1} @ mean, cached for the update loop."""
        return spd_solve(self.row_cov_chol, self.mean)

    @cached_property
    def scale_value(self):
        """The d x d matrix S with Sigma^{-1} ~ Wishart(dof, S)."""
        return self.scale

    @cached_property
    def inv_scale(self):
        """scale^{-1}; equals the zero-data limit of psi."""
        return spd_inverse(spd_cholesky(self.scale, "prior scale"))

    def describe(self) -> dict:
        return {
            "mean": self.mean.tolist(),
            "row_cov": self.row_cov.tolist(),
            "dof": self.dof,
            "scale": self.scale.tolist(),
        }


@dataclass(frozen=True, eq=False)
class ChainState:
    """Current (beta, Sigma, u) of a data-augmentation chain."""

    beta: np.ndarray
    sigma: np.ndarray
    u: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "beta", np.atleast_2d(np.asarray(self.beta, dtype=float)))
        object.__setattr__(self, "sigma", np.atleast_2d(np.asarray(self.sigma, dtype=float)))
        object.__setattr__(self, "u", np.asarray(self.u, dtype=float).ravel())

    def validate(self):
        if np.any(self.u <= 0.0):
            raise InvalidParameterError("all latent weights u must be positive")
        spd_cholesky(self.sigma, "state sigma")
        if self.beta.shape[1] != self.sigma.shape[0]:
            raise InvalidParameterError("beta and sigma dimensions disagree")
        return self


@dataclass(frozen=True, eq=False)
class PosteriorUpdate:
    """Hyperparameters (psi, gamma, omega) of the (Sigma, beta) conditional.

    Sigma ~ IW(n + prior dof, psi) and beta | Sigma ~ MN(gamma, omega, Sigma).
    """

    psi: np.ndarray
    gamma: np.ndarray
    omega: np.ndarray


def _psi_via_identity(u, data: Dataset, prior: NIWPrior):
    """psi = scale^{-1} + (X B - Y)^T (U^{-1} + X A X^T)^{-1} (X B - Y).

    Numerically safe: never subtracts two PSD matrices, so psi stays SPD for
    every positive u.  Costs one n x n factorization.
    """
    x, y = data.X, data.Y
    resid = x @ prior.mean - y
    mid = x @ prior.row_cov @ x.T
    mid.flat[:: data.n + 1] += 1.0 / u
    l_mid = chol_unchecked(mid, "U^{-1} + X A X^T")
    half = tri_solve(l_mid, resid)
    psi = prior.inv_scale + half.T @ half
    return 0.5 * (psi + psi.T)


def _psi_textbook(u, data: Dataset, prior: NIWPrior, gamma, rhs):
    """psi from the direct formula, symmetrized.  O(n p^2): preferable for
    large n, but loses definiteness in floating point when the data fit is
    near-exact."""
    x, y = data.X, data.Y
    psi = (
        prior.inv_scale
        + prior.mean.T @ prior.row_prec_mean
        + y.T @ (u[:, None] * y)
        - gamma.T @ rhs
    )
    return 0.5 * (psi + psi.T)


def compute_update(u, data: Dataset, prior: NIWPrior, identity_max_n=IDENTITY_PATH_MAX_N):
    """Posterior hyperparameter update for the latent weights u.

    gamma = (X^T U X + A^{-1})^{-1} (X^T U Y + A^{-1} B),
    omega = (X^T U X + A^{-1})^{-1}, and psi as in ``_psi_via_identity``
    (identity route for n <= identity_max_n, textbook route beyond).
    """
    u = np.asarray(u, dtype=float).ravel()
    if u.size != data.n:
        raise InvalidParameterError(f"u has length {u.size}, expected {data.n}")
    if np.any(u <= 0.0) or not np.all(np.isfinite(u)):
        raise InvalidParameterError("latent weights must be positive and finite")
    x, y = data.X, data.Y
    prec = x.T @ (u[:, None] * x) + prior.row_cov_inv
    l_prec = chol_unchecked(prec, "X^T U X + A^{-1}")
    omega = spd_inverse(l_prec)
    rhs = x.T @ (u[:, None] * y) + prior.row_prec_mean
    gamma = spd_solve(l_prec, rhs)
    if data.n <= identity_max_n:
        psi = _psi_via_identity(u, data, prior)
    else:
        psi = _psi_textbook(u, data, prior, gamma, rhs)
    return PosteriorUpdate(psi=psi, gamma=gamma, omega=0.5 * (omega + omega.T))


def psi_identity_residual(u, data: Dataset, prior: NIWPrior) -> float:
    """Max-abs difference between the two algebraic routes to psi.

    Zero in exact arithmetic; doubles as a regression check on the update.
    """
    u = np.asarray(u, dtype=float).ravel()
    prec = data.X.T @ (u[:, None] * data.X) + prior.row_cov_inv
    l_prec = spd_cholesky(prec, "X^T U X + A^{-1}")
    rhs = data.X.T @ (u[:, None] * data.Y) + prior.row_prec_mean
    gamma = spd_solve(l_prec, rhs)
    direct = _psi_textbook(u, data, prior, gamma, rhs)
    stable = _psi_via_identity(u, data, prior)
    return float(np.max(np.abs(direct - stable)))


def mahalanobis_residuals(state: ChainState, data: Dataset):
    """delta_i = (y_i - beta^T x_i)^T Sigma^{-1} (y_i - beta^T x_i) for each row.

    One Sigma factorization is shared across all observations.
    """
    resid = data.Y - data.X @ state.beta
    l_sig = spd_cholesky(state.sigma, "state sigma")
    z = tri_solve(l_sig, resid.T)
    return np.sum(z * z, axis=0)


def simulate_dataset(n, p, d, mixing, beta_true, sigma_true, rng, intercept=False):
    """Generate (X, Y) from the scale-mixture regression model.

    X has iid standard-normal entries (first column all ones when
    ``intercept``); u_i ~ h; y_i ~ N(beta^T x_i, Sigma / u_i).
    Returns ``(dataset, u)``.
    """
    beta_true = np.atleast_2d(np.asarray(beta_true, dtype=float))
    sigma_true = np.atleast_2d(np.asarray(sigma_true, dtype=float))
    if beta_true.shape != (p, d) or sigma_true.shape != (d, d):
        raise InvalidParameterError("beta_true / sigma_true shapes inconsistent with (p, d)")
    l_sig = spd_cholesky(sigma_true, "sigma_true")
    x = rng.standard_normal((n, p))
    if intercept:
        x[:, 0] = 1.0
    u = np.asarray(mixing.sample(rng, size=n), dtype=float)
    noise = rng.standard_normal((n, d)) @ l_sig.T
    y = x @ beta_true + noise / np.sqrt(u)[:, None]
    return Dataset(x, y), u
