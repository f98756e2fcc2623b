"""The two data-augmentation Gibbs chains and the chain runner.

Both chains alternate a latent-weight update ``u | (beta, Sigma)`` with a
joint ``(Sigma, beta) | u`` refresh:

* proper chain: conditionally conjugate normal-inverse-Wishart prior,
  arbitrary mixing density;
* improper chain: flat prior ``|Sigma|^{-(d+1)/2}`` with Student-t errors,
  valid when n >= p + d and (X, Y) has full column rank.
"""

from __future__ import annotations

import hashlib
import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from ._linalg import chol_unchecked, spd_cholesky, spd_inverse, spd_solve
from .errors import InvalidParameterError, RankDeficiencyError
from .matvar import InverseWishartParams, sample_matrix_normal_inverse_wishart
from .mixing import MixingDensity
from .model import ChainState, Dataset, NIWPrior, compute_update, mahalanobis_residuals

# Latent weights are floored here to keep X^T U X invertible; every clamp is
# counted and reported through the trace metadata.
UNDERFLOW_FLOOR = 1e-300


@dataclass(frozen=True, eq=False)
class ProperModel:
    """Sampler specification: NIW prior plus a mixing density."""

    prior: NIWPrior
    mixing: MixingDensity

    def describe(self):
        return {"kind": "proper", "prior": self.prior.describe(), "mixing": self.mixing.describe()}


@dataclass(frozen=True)
class ImproperModel:
    """Sampler specification: flat scale prior, Student-t errors with t_dof."""

    t_dof: float

    def __post_init__(self):
        if not self.t_dof > 0.0:
            raise InvalidParameterError("t_dof must be positive")

    def describe(self):
        return {"kind": "improper", "t_dof": self.t_dof}


def augmented_design_rank(data: Dataset, rel_tol=1e-12):
    """Numerical rank of (X, Y) via singular values."""
    w = np.hstack([data.X, data.Y])
    s = np.linalg.svd(w, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > data.n * s[0] * rel_tol))


def validate_improper(data: Dataset, t_dof: float):
    """Preconditions of the improper-prior chain; raises when violated."""
    if not t_dof > 0.0:
        raise InvalidParameterError("t_dof must be positive")
    if data.n < data.p + data.d:
        raise InvalidParameterError(
            f"improper prior requires n >= p + d for a proper posterior; "
            f"got n={data.n}, p={data.p}, d={data.d}"
        )
    if augmented_design_rank(data) < data.p + data.d:
        raise RankDeficiencyError("(X, Y) must have full column rank")


def _clamp_weights(u):
    clamped = int(np.sum(u < UNDERFLOW_FLOOR))
    if clamped:
        warnings.warn(
            f"{clamped} latent weight(s) clamped to {UNDERFLOW_FLOOR}",
            RuntimeWarning,
            stacklevel=3,
        )
        u = np.maximum(u, UNDERFLOW_FLOOR)
    return u, clamped


def _step_proper(state, data, prior, mixing, rng, dof_offset=0.0):
    delta = mahalanobis_residuals(state, data)
    u = np.asarray(mixing.sample_conditional(delta, data.d, rng), dtype=float)
    u, clamped = _clamp_weights(u)
    upd = compute_update(u, data, prior)
    iw = InverseWishartParams(data.n + prior.dof + dof_offset, upd.psi)
    beta, sigma = sample_matrix_normal_inverse_wishart(upd.gamma, upd.omega, iw, rng)
    return ChainState(beta, sigma, u), clamped


def step_proper(state: ChainState, data: Dataset, prior: NIWPrior, mixing, rng,
                dof_offset=0.0) -> ChainState:
    """One full scan of the proper-prior chain.

    Scan order: all u_i from their tilted conditionals, then Sigma from its
    inverse Wishart and beta from its matrix normal, jointly given u.
    ``dof_offset`` perturbs the Sigma degrees of freedom and exists only as a
    mutation hook for sampler-correctness testing; leave it at 0.
    """
    new_state, _ = _step_proper(state, data, prior, mixing, rng, dof_offset)
    return new_state


def _improper_conditional(u, data):
    """(gamma, row_cov, iw_params) of the (Sigma, beta) | u refresh."""
    x, y = data.X, data.Y
    prec = x.T @ (u[:, None] * x)
    l_prec = chol_unchecked(prec, "X^T U X")
    row_cov = spd_inverse(l_prec)
    gamma = spd_solve(l_prec, x.T @ (u[:, None] * y))
    resid = y - x @ gamma
    s = resid.T @ (u[:, None] * resid)
    iw = InverseWishartParams(data.n - data.p, 0.5 * (s + s.T))
    return gamma, 0.5 * (row_cov + row_cov.T), iw


def _step_improper(state, data, t_dof, rng):
    d = data.d
    delta = mahalanobis_residuals(state, data)
    u = rng.gamma(0.5 * (t_dof + d), 2.0 / (t_dof + delta))
    u, clamped = _clamp_weights(u)
    gamma, row_cov, iw = _improper_conditional(u, data)
    beta, sigma = sample_matrix_normal_inverse_wishart(gamma, row_cov, iw, rng)
    return ChainState(beta, sigma, u), clamped


def step_improper(state: ChainState, data: Dataset, t_dof: float, rng) -> ChainState:
    """One full scan of the improper-prior chain.

    u_i ~ Gamma((t_dof + d)/2, (t_dof + delta_i)/2) independently, then
    Sigma ~ IW(n - p, (Y - X gamma)^T U (Y - X gamma)) and
    beta ~ MN(gamma, (X^T U X)^{-1}, Sigma) with
    gamma = (X^T U X)^{-1} X^T U Y.
    """
    validate_improper(data, t_dof)
    new_state, _ = _step_improper(state, data, t_dof, rng)
    return new_state


def default_init(data: Dataset) -> ChainState:
    """Least-squares start: pseudo-inverse fit, residual covariance + 1e-6 I."""
    beta = np.linalg.pinv(data.X) @ data.Y
    resid = data.Y - data.X @ beta
    sigma = resid.T @ resid / data.n + 1e-6 * np.eye(data.d)
    return ChainState(beta, sigma, np.ones(data.n))


def model_fingerprint(model) -> str:
    payload = json.dumps(model.describe(), sort_keys=True)
    return hashlib.sha256(payload.encode()).hexdigest()[:12]


@dataclass(eq=False)
class Trace:
    """Stored post-burn-in, thinned states plus run metadata."""

    states: list
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.states)

    @property
    def betas(self):
        return np.stack([s.beta for s in self.states])

    @property
    def sigmas(self):
        return np.stack([s.sigma for s in self.states])

    @property
    def us(self):
        return np.stack([s.u for s in self.states])


def run_chain(model, data: Dataset, iters: int, burnin: int = 0, thin: int = 1,
              seed=0, init: ChainState | None = None) -> Trace:
    """Run one chain for ``iters`` scans; keep every ``thin``-th state after
    ``burnin``.  Deterministic given ``seed`` (an int or SeedSequence)."""
    if not (iters > burnin >= 0):
        raise InvalidParameterError("need iters > burnin >= 0")
    if thin < 1:
        raise InvalidParameterError("thin must be >= 1")
    if isinstance(model, ImproperModel):
        validate_improper(data, model.t_dof)
        stepper = lambda s, r: _step_improper(s, data, model.t_dof, r)
    elif isinstance(model, ProperModel):
        if model.prior.p != data.p or model.prior.d != data.d:
            raise InvalidParameterError("prior dimensions do not match the data")
        stepper = lambda s, r: _step_proper(s, data, model.prior, model.mixing, r)
    else:
        raise InvalidParameterError(f"unknown sampler model {type(model)!r}")

    rng = np.random.default_rng(seed)
    state = (init if init is not None else default_init(data)).validate()
    states = []
    clamp_total = 0
    for t in range(1, iters + 1):
        state, clamped = stepper(state, rng)
        clamp_total += clamped
        if t > burnin and (t - burnin) % thin == 0:
            states.append(state)
    meta = {
        "seed": int(seed) if np.isscalar(seed) else repr(seed),
        "iterations": int(iters),
        "burnin": int(burnin),
        "thin": int(thin),
        "model": model_fingerprint(model),
        "underflow_clamps": int(clamp_total),
        "n": data.n,
        "p": data.p,
        "d": data.d,
    }
    return Trace(states=states, meta=meta)


def trace_columns(p, d, n, emit_u=False):
    cols = [f"beta_{r}_{c}" for r in range(p) for c in range(d)]
    cols += [f"sigma_{r}_{c}" for r in range(d) for c in range(r, d)]
    if emit_u:
        cols += [f"u_{i}" for i in range(n)]
    return cols


def write_trace_csv(trace: Trace, path, emit_u=False):
    """One CSV row per stored state: beta entries row-major, the upper
    triangle of Sigma, and optionally u.  Floats use repr for exact
    round-tripping."""
    if not trace.states:
        raise InvalidParameterError("trace is empty")
    p, d = trace.states[0].beta.shape
    n = trace.states[0].u.size
    header = trace_columns(p, d, n, emit_u)
    iu = np.triu_indices(d)
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for s in trace.states:
            vals = list(s.beta.ravel()) + list(s.sigma[iu])
            if emit_u:
                vals += list(s.u)
            fh.write(",".join(repr(float(v)) for v in vals) + "\n")


def write_trace_meta(trace: Trace, path):
    with open(path, "w") as fh:
        json.dump(trace.meta, fh, sort_keys=True, indent=2)
        fh.write("\n")
