"""Mixing densities on (0, inf) for scale-mixture-of-normal error laws.

A mixing density h assigns each observation a latent precision factor u.
Everything the samplers and the ergodicity checkers need reduces to four
operations on h:

* raw moments ``m_k = int u^k h(u) du`` (divergence is a value, not an error),
* draws from the tilted conditional ``p(u) o h(u) u^{d/2} exp(-u delta / 2)``,
* moments of that tilted conditional,
* the induced error log-density ``log f_h(eps)``.

Three families are provided: a point mass (Gaussian errors), a gamma density
(multivariate Student-t errors), and a tabulated density on a grid for
anything user-supplied.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

_trapezoid = getattr(np, "trapezoid", None) or np.trapz

from .errors import InvalidParameterError, QuadratureError, SamplingError

_LOG_2PI = float(np.log(2.0 * np.pi))

CLOSED_FORM = "closed-form"
QUADRATURE = "quadrature"


@dataclass(frozen=True)
class MomentValue:
    """A nonnegative moment; ``math.inf`` marks divergence."""

    value: float
    method: str

    @property
    def finite(self) -> bool:
        return math.isfinite(self.value)

    def __float__(self) -> float:
        return float(self.value)


def _norm2(eps):
    eps = np.asarray(eps, dtype=float).ravel()
    if eps.size == 0:
        raise InvalidParameterError("error vector must be nonempty")
    return float(eps @ eps), eps.size


class MixingDensity:
    """Common interface of all mixing families."""

    def moment(self, k: float) -> MomentValue:
        raise NotImplementedError

    def sample_conditional(self, delta, d: int, rng, size=None):
        """Draw from the tilted density prop. to h(u) u^{d/2} exp(-u delta/2).

        ``delta`` may be a scalar (one draw, or ``size`` draws) or a vector
        (one draw per entry).
        """
        raise NotImplementedError

    def conditional_moment(self, delta: float, d: int, r: float) -> MomentValue:
        """E[u^r] under the tilted conditional."""
        raise NotImplementedError

    def error_logdensity(self, eps) -> float:
        """Log of f_h(eps) = int u^{d/2} (2 pi)^{-d/2} exp(-u ||eps||^2/2) h(u) du."""
        raise NotImplementedError

    def tilted_mass_ratio(self, c: float, d: int) -> float:
        """int h(u) u^{d/2} e^{-c u / 2} du divided by int h(u) u^{d/2} du."""
        raise NotImplementedError

    def sample(self, rng, size=None):
        """Draw from h itself (tilt with d = 0, delta = 0)."""
        return self.sample_conditional(0.0, 0, rng, size=size)

    def describe(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class PointMass(MixingDensity):
    """Degenerate mixing at a single precision factor (Gaussian errors)."""

    location: float = 1.0

    def __post_init__(self):
        if not self.location > 0.0:
            raise InvalidParameterError("point-mass location must be positive")

    def moment(self, k):
        return MomentValue(self.location ** k, CLOSED_FORM)

    def sample_conditional(self, delta, d, rng, size=None):
        delta = np.asarray(delta, dtype=float)
        if delta.ndim == 0:
            return self.location if size is None else np.full(size, self.location)
        return np.full(delta.shape, self.location)

    def conditional_moment(self, delta, d, r):
        return MomentValue(self.location ** r, CLOSED_FORM)

    def error_logdensity(self, eps):
        sq, d = _norm2(eps)
        u0 = self.location
        return 0.5 * d * (math.log(u0) - _LOG_2PI) - 0.5 * u0 * sq

    def tilted_mass_ratio(self, c, d):
        return math.exp(-0.5 * c * self.location)

    def describe(self):
        return {"family": "pointmass", "location": self.location}


@dataclass(frozen=True)
class GammaMixing(MixingDensity):
    """Gamma(shape, rate) mixing; shape = rate = dof/2 gives Student-t errors."""

    shape: float
    rate: float

    def __post_init__(self):
        if not (self.shape > 0.0 and self.rate > 0.0):
            raise InvalidParameterError("gamma mixing requires shape > 0 and rate > 0")

    @classmethod
    def student_t(cls, dof: float) -> "GammaMixing":
        if not dof > 0.0:
            raise InvalidParameterError("Student-t dof must be positive")
        return cls(shape=0.5 * dof, rate=0.5 * dof)

    def moment(self, k):
        a, b = self.shape, self.rate
        return MomentValue(math.exp(gammaln(a + k) - gammaln(a) - k * math.log(b)), CLOSED_FORM)

    def sample_conditional(self, delta, d, rng, size=None):
        delta = np.asarray(delta, dtype=float)
        if np.any(delta < 0.0):
            raise InvalidParameterError("delta must be nonnegative")
        shape = self.shape + 0.5 * d
        scale = 1.0 / (self.rate + 0.5 * delta)
        if delta.ndim == 0:
            draw = rng.gamma(shape, float(scale), size=size)
            return float(draw) if size is None else draw
        return rng.gamma(shape, scale)

    def conditional_moment(self, delta, d, r):
        a = self.shape + 0.5 * d
        if a + r <= 0.0:
            return MomentValue(math.inf, CLOSED_FORM)
        rate = self.rate + 0.5 * delta
        return MomentValue(math.exp(gammaln(a + r) - gammaln(a) - r * math.log(rate)), CLOSED_FORM)

    def error_logdensity(self, eps):
        sq, d = _norm2(eps)
        a, b = self.shape, self.rate
        return (
            a * math.log(b)
            + gammaln(a + 0.5 * d)
            - gammaln(a)
            - 0.5 * d * _LOG_2PI
            - (a + 0.5 * d) * math.log(b + 0.5 * sq)
        )

    def tilted_mass_ratio(self, c, d):
        a = self.shape + 0.5 * d
        return (self.rate / (self.rate + 0.5 * c)) ** a

    def describe(self):
        return {"family": "gamma", "shape": self.shape, "rate": self.rate}


# Gauss-Legendre nodes reused across panels of the tabulated quadrature.
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(16)
_QUAD_RTOL = 1e-8


@dataclass(frozen=True, eq=False)
class TabulatedMixing(MixingDensity):
    """Mixing density given by values on an ascending positive grid.

    Between grid nodes the density is the linear interpolant; beyond the last
    node a power-law continuation fitted to the final segment decides whether
    tail-sensitive integrals converge.  The grid itself must carry the mass:
    the trapezoid integral of ``values`` over ``grid`` has to be 1 within 1e-6.
    """

    grid: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float).ravel()
        values = np.asarray(self.values, dtype=float).ravel()
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)
        if grid.size < 2 or grid.size != values.size:
            raise InvalidParameterError("grid and values must match and hold >= 2 points")
        if not (np.all(np.diff(grid) > 0.0) and grid[0] > 0.0):
            raise InvalidParameterError("grid must be positive and strictly ascending")
        if np.any(values < 0.0) or not np.all(np.isfinite(values)):
            raise InvalidParameterError("values must be finite and nonnegative")
        total = float(_trapezoid(values, grid))
        if abs(total - 1.0) > 1e-6:
            raise InvalidParameterError(
                f"tabulated density must integrate to 1 within 1e-6, got {total!r}"
            )

    @classmethod
    def from_csv(cls, path, normalize=False) -> "TabulatedMixing":
        """Load a two-column (u, h(u)) CSV; ``normalize`` rescales to mass 1."""
        us, hs = [], []
        header_seen = False
        with open(path, newline="") as fh:
            for row in csv.reader(fh):
                if not row or not row[0].strip():
                    continue
                try:
                    u, h = float(row[0]), float(row[1])
                except (ValueError, IndexError):
                    if not header_seen and not us:  # tolerate one header line
                        header_seen = True
                        continue
                    raise InvalidParameterError(f"bad row in {path}: {row!r}")
                us.append(u)
                hs.append(h)
        grid = np.asarray(us, dtype=float)
        values = np.asarray(hs, dtype=float)
        if normalize:
            total = float(_trapezoid(values, grid))
            if total <= 0.0:
                raise InvalidParameterError("cannot normalize a zero-mass table")
            values = values / total
        return cls(grid, values)

    # -- tail handling -------------------------------------------------------

    def _tail(self):
        """Power-law continuation (coef, exponent) at the right end, or None."""
        g, v = self.grid, self.values
        if v[-1] <= 0.0 or v[-2] <= 0.0:
            return None
        s = -math.log(v[-1] / v[-2]) / math.log(g[-1] / g[-2])
        coef = v[-1] * g[-1] ** s
        return coef, s

    def _tail_moment(self, power):
        """int_{grid[-1]}^inf coef u^{power - s} du, or inf when divergent.

        The boundary exponent itself diverges, so estimates within a 1e-9
        relative halo of it are declared divergent as well: two grid points
        cannot certify convergence that close to the edge.
        """
        tail = self._tail()
        if tail is None:
            return 0.0
        coef, s = tail
        if s - power <= 1.0 + 1e-9 * max(1.0, abs(s)):
            return math.inf
        umax = self.grid[-1]
        return coef * umax ** (power - s + 1.0) / (s - power - 1.0)

    # -- quadrature ----------------------------------------------------------

    def _grid_integral(self, power, delta, subdiv):
        lo = self.grid[:-1]
        hi = self.grid[1:]
        if subdiv > 1:
            frac = np.arange(subdiv) / subdiv
            lo_all = (lo[:, None] + (hi - lo)[:, None] * frac).ravel()
            hi_all = (lo[:, None] + (hi - lo)[:, None] * (frac + 1.0 / subdiv)).ravel()
        else:
            lo_all, hi_all = lo, hi
        half = 0.5 * (hi_all - lo_all)
        mid = 0.5 * (hi_all + lo_all)
        nodes = mid[None, :] + half[None, :] * _GL_NODES[:, None]
        dens = np.interp(nodes, self.grid, self.values)
        logw = power * np.log(nodes) - 0.5 * delta * nodes
        fvals = dens * np.exp(logw)
        return float(np.sum(_GL_WEIGHTS[:, None] * half[None, :] * fvals))

    def _weighted_integral(self, power, delta):
        """int over the grid of u^power e^{-u delta/2} h(u) du, adaptive panels."""
        prev = self._grid_integral(power, delta, 1)
        for subdiv in (2, 4, 8, 16):
            cur = self._grid_integral(power, delta, subdiv)
            if abs(cur - prev) <= _QUAD_RTOL * (1.0 + abs(cur)):
                return cur
            prev = cur
        raise QuadratureError(
            f"tabulated quadrature did not converge (power={power}, delta={delta}, "
            f"last two estimates {prev!r})"
        )

    def _tilted_integral(self, power, delta):
        """Grid integral plus analytic tail when the tilt cannot damp it."""
        val = self._weighted_integral(power, delta)
        if delta == 0.0:
            tail = self._tail_moment(power)
            if math.isinf(tail):
                return math.inf
            val += tail
        return val

    # -- interface -----------------------------------------------------------

    def moment(self, k):
        if k < 0.0:
            raise InvalidParameterError("moment order must be nonnegative")
        return MomentValue(self._tilted_integral(k, 0.0), QUADRATURE)

    def sample_conditional(self, delta, d, rng, size=None):
        delta_arr = np.asarray(delta, dtype=float)
        if delta_arr.ndim == 0:
            if size is None:
                return float(self._sample_one(float(delta_arr), d, rng, 1)[0])
            shape = (size,) if np.isscalar(size) else tuple(size)
            draws = self._sample_one(float(delta_arr), d, rng, int(np.prod(shape)))
            return draws.reshape(shape)
        return np.array(
            [self._sample_one(float(dl), d, rng, 1)[0] for dl in delta_arr.ravel()]
        ).reshape(delta_arr.shape)

    def _sample_one(self, delta, d, rng, n_draws):
        if delta < 0.0:
            raise InvalidParameterError("delta must be nonnegative")
        if delta == 0.0 and math.isinf(self._tail_moment(0.5 * d)):
            raise SamplingError(
                "tilted density h(u) u^{d/2} is not integrable for delta = 0"
            )
        logw = 0.5 * d * np.log(self.grid) - 0.5 * delta * self.grid
        logw += np.where(self.values > 0.0, np.log(np.maximum(self.values, 1e-300)), -np.inf)
        logw -= logw.max()
        w = np.exp(logw)
        cdf = np.concatenate(
            [[0.0], np.cumsum(0.5 * (w[1:] + w[:-1]) * np.diff(self.grid))]
        )
        if cdf[-1] <= 0.0:
            raise SamplingError("tilted density has zero mass on the grid")
        return np.interp(rng.random(n_draws), cdf / cdf[-1], self.grid)

    def conditional_moment(self, delta, d, r):
        den = self._tilted_integral(0.5 * d, delta)
        if math.isinf(den):
            raise SamplingError(
                "tilted density is not normalizable; conditional moment undefined"
            )
        num = self._tilted_integral(0.5 * d + r, delta)
        if math.isinf(num):
            return MomentValue(math.inf, QUADRATURE)
        return MomentValue(num / den, QUADRATURE)

    def error_logdensity(self, eps):
        sq, d = _norm2(eps)
        val = self._tilted_integral(0.5 * d, sq)
        if math.isinf(val):
            raise QuadratureError(
                "mixture integral diverges at this point (heavy tail, ||eps|| = 0)"
            )
        if val <= 0.0:
            return -math.inf
        return math.log(val) - 0.5 * d * _LOG_2PI

    def tilted_mass_ratio(self, c, d):
        den = self._tilted_integral(0.5 * d, 0.0)
        if math.isinf(den):
            raise SamplingError("int h(u) u^{d/2} du diverges; ratio undefined")
        return self._tilted_integral(0.5 * d, c) / den

    def describe(self):
        return {
            "family": "tabulated",
            "n_points": int(self.grid.size),
            "support": [float(self.grid[0]), float(self.grid[-1])],
        }
