"""Ergodicity analysis for the two chains.

Everything here is a checkable consequence of the drift-and-minorization
arguments for the samplers in :mod:`smnreg.gibbs`:

* energy (Lyapunov) functions and the weighted-energy identity that reduces
  the completed quadratic energy to ``tr(Sigma^{-1}) + tr(beta Sigma^{-1}
  beta^T)``;
* moment-based sufficient conditions for geometric and uniform ergodicity of
  the proper-prior chain, and the trace condition for the improper chain;
* exact conditional means of the energies given the latent weights, each with
  two independent algebraic routes that are cross-checked at run time;
* explicit drift constants, the uniform-minorization lower bound, and the
  improper-chain contraction coefficient;
* Monte-Carlo verifiers that estimate each expectation by simulation so the
  closed forms can be validated against the samplers themselves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.special import multigammaln

from ._linalg import (
    chol_logdet,
    spd_cholesky,
    spd_inverse,
    spd_solve,
    trace_spd_inverse,
    tri_solve,
)
from .errors import InvalidParameterError, NumericalError, RankDeficiencyError
from .gibbs import augmented_design_rank, validate_improper
from .matvar import (
    InverseWishartParams,
    MatrixNormalParams,
    invwishart_logpdf,
    matnorm_logpdf,
    sample_matrix_normal_inverse_wishart,
)
from .model import ChainState, Dataset, NIWPrior, compute_update, mahalanobis_residuals

_LOG_2PI = float(np.log(2.0 * np.pi))


# ---------------------------------------------------------------------------
# Energy functions
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class EnergyBasis:
    """Completion Z of (X, Y) and the induced weight matrix for the
    quadratic energy.

    ``weight = ((X, Y, Z)^{-1})^T (X, Y, Z)^{-1}`` satisfies
    ``X^T weight X = I``, ``Y^T weight Y = I`` and ``X^T weight Y = 0``, which
    collapses the weighted residual energy to a quadratic in (beta, Sigma).
    """

    completion: np.ndarray
    weight: np.ndarray
    trace_weight_inv: float


def build_energy_basis(data: Dataset, check_tol=1e-8) -> EnergyBasis:
    """Construct the energy basis with an orthonormal completion.

    Requires n >= p + d and full column rank of (X, Y).  The orthonormal
    choice of Z keeps the weight matrix as well conditioned as the data allow
    and makes ``tr(weight^{-1})`` a cheap Frobenius-norm sum.
    """
    n, p, d = data.n, data.p, data.d
    if n < p + d:
        raise InvalidParameterError(f"need n >= p + d, got n={n}, p={p}, d={d}")
    if augmented_design_rank(data) < p + d:
        raise RankDeficiencyError("(X, Y) must have full column rank")
    w = np.hstack([data.X, data.Y])
    q, _ = np.linalg.qr(w, mode="complete")
    z = q[:, p + d:]
    t = np.hstack([w, z])
    t_inv = np.linalg.inv(t)
    c0 = t_inv.T @ t_inv
    c0 = 0.5 * (c0 + c0.T)
    gram_x = data.X.T @ c0 @ data.X
    gram_y = data.Y.T @ c0 @ data.Y
    cross = data.X.T @ c0 @ data.Y
    err = max(
        float(np.max(np.abs(gram_x - np.eye(p)))),
        float(np.max(np.abs(gram_y - np.eye(d)))),
        float(np.max(np.abs(cross))) if cross.size else 0.0,
    )
    if err > check_tol:
        raise NumericalError(
            f"energy basis lost orthogonality (max defect {err:.2e}); "
            "the augmented design is too ill-conditioned"
        )
    trace_inv = float(np.sum(data.X**2) + np.sum(data.Y**2) + (n - p - d))
    return EnergyBasis(completion=z, weight=c0, trace_weight_inv=trace_inv)


def energy_proper(state: ChainState, data: Dataset) -> float:
    """Residual energy: sum of squared Mahalanobis residuals."""
    return float(np.sum(mahalanobis_residuals(state, data)))


def energy_weighted(state: ChainState, data: Dataset, weight) -> float:
    """tr{(Y - X beta) Sigma^{-1} (Y - X beta)^T C} for an SPD weight C."""
    spd_cholesky(weight, "weight")
    resid = data.Y - data.X @ state.beta
    l_sig = spd_cholesky(state.sigma, "state sigma")
    m = resid.T @ weight @ resid
    return float(np.trace(spd_solve(l_sig, m)))


def energy_quadratic(state: ChainState) -> float:
    """tr(Sigma^{-1}) + tr(beta Sigma^{-1} beta^T)."""
    l_sig = spd_cholesky(state.sigma, "state sigma")
    d = l_sig.shape[0]
    inv_l = tri_solve(l_sig, np.eye(d))
    mb = tri_solve(l_sig, state.beta.T)
    return float(np.sum(inv_l * inv_l) + np.sum(mb * mb))


# ---------------------------------------------------------------------------
# Ergodicity condition checkers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GeometricReport:
    """Moment criterion for geometric ergodicity of the proper chain."""

    holds: bool
    moment_order: float
    moment_value: float
    moment_method: str

    def __bool__(self):
        return self.holds

    def to_dict(self):
        return {
            "criterion": "proper-geometric",
            "holds": self.holds,
            "moment_order": self.moment_order,
            "moment_value": None if math.isinf(self.moment_value) else self.moment_value,
            "moment_method": self.moment_method,
        }


def check_proper_geometric(mixing, d: int) -> GeometricReport:
    """Geometric ergodicity of the proper chain holds when the mixing moment
    of order d/2 + 2 is finite.  Small gamma shapes (very heavy-tailed
    Student-t errors) pass: all positive gamma moments are finite."""
    order = 0.5 * d + 2.0
    mom = mixing.moment(order)
    return GeometricReport(
        holds=mom.finite,
        moment_order=order,
        moment_value=mom.value,
        moment_method=mom.method,
    )


@dataclass(frozen=True, eq=False)
class UniformReport:
    """Full-rank-design plus moment criterion for uniform ergodicity."""

    holds: bool
    design_full_rank: bool
    design_rank: int
    singular_values: np.ndarray
    moment_order: float
    moment_value: float
    moment_method: str

    def __bool__(self):
        return self.holds

    def to_dict(self):
        return {
            "criterion": "uniform",
            "holds": self.holds,
            "design_full_rank": self.design_full_rank,
            "design_rank": self.design_rank,
            "singular_values": [float(s) for s in self.singular_values],
            "moment_order": self.moment_order,
            "moment_value": None if math.isinf(self.moment_value) else self.moment_value,
            "moment_method": self.moment_method,
        }


def check_uniform(data: Dataset, mixing) -> UniformReport:
    """Uniform ergodicity of the proper chain holds when X has full column
    rank and the mixing moment of order d/2 is finite."""
    s = np.linalg.svd(data.X, compute_uv=False)
    thresh = data.n * (s[0] if s.size else 0.0) * 1e-12
    rank = int(np.sum(s > thresh))
    full = rank == data.p
    order = 0.5 * data.d
    mom = mixing.moment(order)
    return UniformReport(
        holds=full and mom.finite,
        design_full_rank=full,
        design_rank=rank,
        singular_values=s,
        moment_order=order,
        moment_value=mom.value,
        moment_method=mom.method,
    )


@dataclass(frozen=True)
class ConditionReport:
    """Result of the improper-chain trace condition.

    ``holds`` means some margin epsilon > 0 satisfies the strict trace
    inequality; ``max_feasible_eps`` is the supremum of feasible margins.
    A failure only means the sufficient condition could not be verified.
    """

    holds: bool
    lhs: float
    rhs_at_eps: tuple
    max_feasible_eps: float | None
    legacy_condition_holds: bool
    status: str

    def __bool__(self):
        return self.holds

    def to_dict(self):
        return {
            "criterion": "improper-trace-condition",
            "holds": self.holds,
            "lhs": self.lhs,
            "rhs_at_eps": [[e, g] for e, g in self.rhs_at_eps],
            "max_feasible_eps": self.max_feasible_eps,
            "legacy_condition_holds": self.legacy_condition_holds,
            "status": self.status,
        }


def _augmented_rows(data: Dataset):
    w = np.hstack([data.X, data.Y])
    norms2 = np.sum(w * w, axis=1)
    keep = norms2 > 0.0
    return w[keep], norms2[keep]


def _trace_rhs(w, norms2, eps):
    """g(eps) = 1 / tr{(sum_i w_i w_i^T / (eps + ||w_i||^2))^{-1}}."""
    m = w.T @ (w / (eps + norms2)[:, None])
    l = spd_cholesky(0.5 * (m + m.T), "weighted design gram")
    return 1.0 / trace_spd_inverse(l)


def check_improper_condition(data: Dataset, t_dof: float) -> ConditionReport:
    """Sufficient condition for geometric ergodicity of the improper chain.

    With w_i the stacked rows of (X, Y), the condition asks for some eps > 0
    with ``(n - p) / (t_dof + d - 2) < g(eps)`` where
    ``g(eps) = 1 / tr{(sum_i w_i w_i^T / (eps + ||w_i||^2))^{-1}}``.
    g is continuous and nonincreasing, so feasibility is decided at
    eps -> 0+ and the supremal feasible eps is found by bisection.  The
    report also evaluates the older sample-size bound ``n < t_dof + p - 2``
    for comparison; the trace condition stays usable for large n where that
    bound fails.
    """
    validate_improper(data, t_dof)
    n, p, d = data.n, data.p, data.d
    if not t_dof + d > 2.0:
        raise InvalidParameterError("need t_dof + d > 2")
    w, norms2 = _augmented_rows(data)
    lhs = (n - p) / (t_dof + d - 2.0)
    legacy = n < t_dof + p - 2.0
    g0 = _trace_rhs(w, norms2, 0.0)
    margin = 1e-12 * max(1.0, abs(g0))

    if lhs >= g0 + margin:
        eps_grid = [0.0, 1.0, 10.0]
        curve = tuple((e, _trace_rhs(w, norms2, e)) for e in eps_grid)
        return ConditionReport(False, lhs, curve, None, legacy,
                               "condition not verified: lhs >= g(0+)")
    if abs(lhs - g0) <= margin:
        curve = ((0.0, g0),)
        return ConditionReport(False, lhs, curve, None, legacy,
                               "boundary - condition not verified")

    # Strictly feasible at 0+; bracket the crossing g(eps) = lhs.
    hi = 1.0
    doublings = 0
    while _trace_rhs(w, norms2, hi) > lhs and doublings < 200:
        hi *= 2.0
        doublings += 1
    if doublings >= 200:
        # g decays like 1/eps, so this cannot trigger for finite inputs.
        raise NumericalError("failed to bracket the feasibility boundary")
    lo = 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if _trace_rhs(w, norms2, mid) > lhs:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-10 * max(1.0, hi):
            break
    eps_star = 0.5 * (lo + hi)
    eps_grid = [0.0] + [eps_star * f for f in (0.25, 0.5, 0.75, 1.0, 1.5)]
    curve = tuple((e, _trace_rhs(w, norms2, e)) for e in eps_grid)
    return ConditionReport(True, lhs, curve, eps_star, legacy, "holds")


# ---------------------------------------------------------------------------
# Exact conditional means of the energies
# ---------------------------------------------------------------------------

def cond_mean_energy_proper(u, data: Dataset, prior: NIWPrior) -> float:
    """E[residual energy | u] for the proper chain, in closed form.

    Equals ``(n + dof) * sum_i r_i^T psi^{-1} r_i + d * sum_i x_i^T omega x_i``
    with r_i the rows of Y - X gamma.
    """
    upd = compute_update(u, data, prior)
    resid = data.Y - data.X @ upd.gamma
    l_psi = spd_cholesky(upd.psi, "psi")
    half = tri_solve(l_psi, resid.T)
    term1 = (data.n + prior.dof) * float(np.sum(half * half))
    term2 = data.d * float(np.sum(data.X * (data.X @ upd.omega)))
    return term1 + term2


def cond_mean_energy_improper(u, data: Dataset, check_tol=1e-8) -> float:
    """E[quadratic energy | u] for the improper chain.

    Computed through two independent routes - the residual route
    ``d tr{(X^T U X)^{-1}} + (n - p) (tr(S^{-1}) + tr(gamma S^{-1} gamma^T))``
    with ``S = (Y - X gamma)^T U (Y - X gamma)``, and the Schur-complement
    route on the weighted gram of (X, Y) - which must agree to ``check_tol``.
    The value is also checked against its ``(n - p) tr{((X,Y)^T U (X,Y))^{-1}}``
    upper bound.  Returns the residual-route value.
    """
    u = np.asarray(u, dtype=float).ravel()
    if np.any(u <= 0.0):
        raise InvalidParameterError("latent weights must be positive")
    n, p, d = data.n, data.p, data.d
    x, y = data.X, data.Y
    a = x.T @ (u[:, None] * x)
    b = x.T @ (u[:, None] * y)
    dyy = y.T @ (u[:, None] * y)
    l_a = spd_cholesky(a, "X^T U X")
    gamma = spd_solve(l_a, b)
    resid = y - x @ gamma
    s = resid.T @ (u[:, None] * resid)
    l_s = spd_cholesky(0.5 * (s + s.T), "residual scatter")
    half = tri_solve(l_s, gamma.T)
    direct = d * trace_spd_inverse(l_a) + (n - p) * (
        trace_spd_inverse(l_s) + float(np.sum(half * half))
    )

    # Schur-complement route.
    schur_y = dyy - b.T @ spd_solve(l_a, b)
    l_dyy = spd_cholesky(dyy, "Y^T U Y")
    schur_x = a - b @ spd_solve(l_dyy, b.T)
    l_sy = spd_cholesky(0.5 * (schur_y + schur_y.T), "Y-side Schur complement")
    l_sx = spd_cholesky(0.5 * (schur_x + schur_x.T), "X-side Schur complement")
    projector = (n - p) * (trace_spd_inverse(l_sy) + trace_spd_inverse(l_sx)) - (
        n - p - d
    ) * trace_spd_inverse(l_a)

    if abs(direct - projector) > check_tol * (1.0 + abs(direct)):
        raise NumericalError(
            f"conditional-mean routes disagree: {direct!r} vs {projector!r}"
        )

    m = np.block([[a, b], [b.T, dyy]])
    l_m = spd_cholesky(0.5 * (m + m.T), "augmented gram")
    upper = (n - p) * trace_spd_inverse(l_m)
    if direct > upper * (1.0 + 1e-8) + 1e-12:
        raise NumericalError(
            f"conditional mean {direct!r} exceeds its upper bound {upper!r}"
        )
    return direct


# ---------------------------------------------------------------------------
# Drift constants, minorization bound, contraction coefficient
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DriftConstants:
    """Explicit constants bounding E[residual energy | u] for the proper chain.

    ``E[V | u] <= m3 + m4 * tr(U^2)`` and, after averaging the weights,
    ``E[V] <= m5 = m3 + m4 * n * moment_ratio``.
    """

    m1: float
    m2: float
    m3: float
    m4: float
    m5: float
    moment_ratio: float


def drift_constants_proper(data: Dataset, prior: NIWPrior, mixing) -> DriftConstants:
    """Sharpest spectral constants in the drift bound chain.

    m1 is the largest eigenvalue of A^{1/2} X^T X A^{1/2} (the best constant
    with X^T X <= m1 A^{-1}); m2 the largest eigenvalue of X A X^T.
    """
    d, n = data.d, data.n
    mom_hi = mixing.moment(0.5 * d + 2.0)
    mom_lo = mixing.moment(0.5 * d)
    if not (mom_hi.finite and mom_lo.finite):
        raise InvalidParameterError(
            "mixing moment of order d/2 + 2 diverges; run check_proper_geometric "
            "for the diagnosis"
        )
    x, y = data.X, data.Y
    l_a = prior.row_cov_chol
    xla = x @ l_a
    m1 = float(np.linalg.eigvalsh(xla.T @ xla)[-1])
    m2 = float(np.linalg.svd(xla, compute_uv=False)[0] ** 2)
    nv = n + prior.dof
    theta = prior.scale
    bab = prior.mean.T @ prior.row_prec_mean
    m3 = (
        d * float(np.sum(x * (x @ prior.row_cov)))
        + 2.0 * nv * float(np.sum(y * (y @ theta)))
        + 4.0 * nv * m1 * float(np.trace(theta @ bab))
    )
    m4 = 4.0 * nv * m1 * m2 * float(np.trace(theta @ (y.T @ y)))
    ratio = mom_hi.value / mom_lo.value
    m5 = m3 + m4 * n * ratio
    return DriftConstants(m1=m1, m2=m2, m3=m3, m4=m4, m5=m5, moment_ratio=ratio)


@dataclass(frozen=True, eq=False)
class MinorizationBound:
    """State-independent lower bound on the weight-averaged joint density.

    For every start state, averaging the (beta, Sigma) conditional density
    over the tilted weight distribution dominates this bound, and the bound
    is an integrable function of (beta, Sigma); its existence is what makes
    the proper chain uniformly ergodic.
    """

    data: Dataset
    prior: NIWPrior
    mixing: object

    def __post_init__(self):
        mom = self.mixing.moment(0.5 * self.data.d)
        if not mom.finite:
            raise InvalidParameterError("mixing moment of order d/2 diverges")
        rep = check_uniform(self.data, self.mixing)
        if not rep.design_full_rank:
            raise RankDeficiencyError("X must have full column rank")

    @cached_property
    def _pieces(self):
        data, prior = self.data, self.prior
        n, p, d = data.n, data.p, data.d
        nv = n + prior.dof
        l_theta = spd_cholesky(prior.scale, "prior scale")
        l_a = prior.row_cov_chol
        log_c0 = -(
            0.5 * p * d * _LOG_2PI
            + 0.5 * nv * d * math.log(2.0)
            + multigammaln(0.5 * nv, d)
        )
        # log|scale^{-1}| = -log|scale|
        log_c1 = log_c0 - 0.5 * nv * chol_logdet(l_theta) - 0.5 * d * chol_logdet(l_a)
        base = prior.inv_scale + 5.0 * prior.mean.T @ prior.row_prec_mean
        exponent = 0.5 * (nv + d + 1 + p)
        return log_c1, base, exponent

    def log_evaluate(self, beta, sigma) -> float:
        beta = np.atleast_2d(np.asarray(beta, dtype=float))
        sigma = np.atleast_2d(np.asarray(sigma, dtype=float))
        data, prior = self.data, self.prior
        d = data.d
        log_c1, base, exponent = self._pieces
        l_sig = spd_cholesky(sigma, "sigma")
        quad_mat = base + 2.0 * beta.T @ spd_solve(prior.row_cov_chol, beta)
        trace_term = float(np.trace(spd_solve(l_sig, quad_mat)))
        # Diagonal of 2 X beta Sigma^{-1} beta^T X^T + 5 Y Sigma^{-1} Y^T.
        mb = tri_solve(l_sig, (data.X @ beta).T)
        my = tri_solve(l_sig, data.Y.T)
        xi_diag = 2.0 * np.sum(mb * mb, axis=0) + 5.0 * np.sum(my * my, axis=0)
        tilt = sum(math.log(self.mixing.tilted_mass_ratio(float(c), d)) for c in xi_diag)
        return log_c1 - exponent * chol_logdet(l_sig) - 0.5 * trace_term + tilt

    def evaluate(self, beta, sigma) -> float:
        return math.exp(self.log_evaluate(beta, sigma))


def minorization_lower_bound(beta, sigma, data: Dataset, prior: NIWPrior, mixing,
                             log=False) -> float:
    bound = MinorizationBound(data, prior, mixing)
    return bound.log_evaluate(beta, sigma) if log else bound.evaluate(beta, sigma)


@dataclass(frozen=True)
class DriftCoefficientReport:
    """Contraction factor of the improper chain outside an energy sublevel set."""

    rho: float
    cap: float
    contracts: bool
    min_contraction_cap: float | None

    def __float__(self):
        return self.rho


def drift_coefficient_improper(data: Dataset, t_dof: float, cap: float) -> DriftCoefficientReport:
    """rho(cap): one-scan contraction factor of the quadratic energy valid for
    start states with energy above ``cap``.

    ``rho(cap) = (n - p) / (t_dof + d - 2) *
    tr{(sum_i w_i w_i^T / (t_dof / cap + ||w_i||^2))^{-1}}``; nonincreasing in
    the cap, with limit lhs / g(0+) of the trace condition.  When the trace
    condition holds, the smallest cap with rho < 1 is located by bisection.
    """
    validate_improper(data, t_dof)
    if not t_dof + data.d > 2.0:
        raise InvalidParameterError("need t_dof + d > 2")
    if not cap > 0.0:
        raise InvalidParameterError("cap must be positive")
    n, p = data.n, data.p
    w, norms2 = _augmented_rows(data)
    lhs = (n - p) / (t_dof + data.d - 2.0)

    def rho_at(c):
        return lhs / _trace_rhs(w, norms2, t_dof / c)

    rho = rho_at(cap)
    report = check_improper_condition(data, t_dof)
    min_cap = None
    if report.holds:
        # rho decreases in the cap and diverges as cap -> 0+, so the rho = 1
        # crossing exists exactly when the trace condition holds.
        hi = cap
        for _ in range(200):
            if rho_at(hi) < 1.0:
                break
            hi *= 2.0
        lo = hi / 2.0
        for _ in range(2000):
            if rho_at(lo) >= 1.0:
                break
            lo /= 2.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if rho_at(mid) < 1.0:
                hi = mid
            else:
                lo = mid
            if hi - lo <= 1e-10 * max(1.0, hi):
                break
        min_cap = 0.5 * (lo + hi)
    return DriftCoefficientReport(
        rho=rho, cap=cap, contracts=rho < 1.0, min_contraction_cap=min_cap
    )


# ---------------------------------------------------------------------------
# Monte-Carlo verifiers
# ---------------------------------------------------------------------------

def _mean_se(values):
    values = np.asarray(values, dtype=float)
    m = float(values.mean())
    se = float(values.std(ddof=1) / math.sqrt(values.size)) if values.size > 1 else math.inf
    return m, se


def _batched_energy_proper(beta, sigma, data):
    resid = data.Y[None, :, :] - data.X @ beta
    l = np.linalg.cholesky(sigma)
    z = np.linalg.solve(l, np.swapaxes(resid, -1, -2))
    return np.sum(z * z, axis=(-1, -2))


def _batched_energy_quadratic(beta, sigma):
    l = np.linalg.cholesky(sigma)
    d = l.shape[-1]
    eye = np.broadcast_to(np.eye(d), l.shape).copy()
    inv_l = np.linalg.solve(l, eye)
    mb = np.linalg.solve(l, np.swapaxes(beta, -1, -2))
    return np.sum(inv_l * inv_l, axis=(-1, -2)) + np.sum(mb * mb, axis=(-1, -2))


def mc_cond_mean_energy_proper(u, data: Dataset, prior: NIWPrior, n_draws, rng):
    """Monte-Carlo estimate (mean, se) of E[residual energy | u], proper chain."""
    upd = compute_update(u, data, prior)
    iw = InverseWishartParams(data.n + prior.dof, upd.psi)
    beta, sigma = sample_matrix_normal_inverse_wishart(
        upd.gamma, upd.omega, iw, rng, size=n_draws
    )
    return _mean_se(_batched_energy_proper(beta, sigma, data))


def mc_cond_mean_energy_improper(u, data: Dataset, n_draws, rng):
    """Monte-Carlo estimate (mean, se) of E[quadratic energy | u], improper chain."""
    u = np.asarray(u, dtype=float).ravel()
    x, y = data.X, data.Y
    prec = x.T @ (u[:, None] * x)
    l_prec = spd_cholesky(prec, "X^T U X")
    gamma = spd_solve(l_prec, x.T @ (u[:, None] * y))
    resid = y - x @ gamma
    s = resid.T @ (u[:, None] * resid)
    iw = InverseWishartParams(data.n - data.p, 0.5 * (s + s.T))
    row_cov = spd_inverse(l_prec)
    beta, sigma = sample_matrix_normal_inverse_wishart(
        gamma, 0.5 * (row_cov + row_cov.T), iw, rng, size=n_draws
    )
    return _mean_se(_batched_energy_quadratic(beta, sigma))


def mc_two_step_energy_proper(state: ChainState, data: Dataset, prior: NIWPrior,
                              mixing, n_reps, rng):
    """Estimate E[E[residual energy | u] | state] by simulating the weight
    update and evaluating the exact inner mean."""
    delta = mahalanobis_residuals(state, data)
    vals = np.empty(n_reps)
    for r in range(n_reps):
        u = np.asarray(mixing.sample_conditional(delta, data.d, rng), dtype=float)
        vals[r] = cond_mean_energy_proper(u, data, prior)
    return _mean_se(vals)


def mc_two_step_energy_improper(state: ChainState, data: Dataset, t_dof, n_reps, rng):
    """Estimate E[E[quadratic energy | u] | state] for the improper chain."""
    delta = mahalanobis_residuals(state, data)
    d = data.d
    vals = np.empty(n_reps)
    for r in range(n_reps):
        u = rng.gamma(0.5 * (t_dof + d), 2.0 / (t_dof + delta))
        vals[r] = cond_mean_energy_improper(u, data)
    return _mean_se(vals)


def mc_minorization_expectation(points, start: ChainState, data: Dataset,
                                prior: NIWPrior, mixing, n_reps, rng):
    """Estimate E[p(beta, Sigma | u) | start] at each test point.

    ``points`` is a sequence of (beta, sigma) pairs; the latent weights are
    drawn from their tilted conditionals at the start state and shared across
    points.  Returns (means, ses) arrays aligned with ``points``.
    """
    delta = mahalanobis_residuals(start, data)
    vals = np.empty((len(points), n_reps))
    nv = data.n + prior.dof
    for r in range(n_reps):
        u = np.asarray(mixing.sample_conditional(delta, data.d, rng), dtype=float)
        upd = compute_update(u, data, prior)
        iw = InverseWishartParams(nv, upd.psi)
        for j, (beta, sigma) in enumerate(points):
            mn = MatrixNormalParams(upd.gamma, upd.omega, sigma)
            vals[j, r] = math.exp(invwishart_logpdf(sigma, iw) + matnorm_logpdf(beta, mn))
    means = vals.mean(axis=1)
    ses = vals.std(axis=1, ddof=1) / math.sqrt(n_reps)
    return means, ses
