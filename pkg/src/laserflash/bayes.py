"""Priors, the noise-marginalized likelihood and the surrogate-accelerated target."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from .errors import InvalidParameterError
from .fem import FemOperators, MaterialProperties
from .mesh import ExperimentGeometry
from .pce import SQRT3, _eval_point
from .solvers import DiscretizationParams, SgfemSurrogate, SurrogateBox, Thermogram, plain_solve


@dataclass(frozen=True)
class PriorSpec:
    """Log-normal prior on lambda (log-space mean/sd) and inverse-gamma on sigma^2."""

    m_lambda: float
    s_lambda: float
    alpha_sigma: float = 3.0
    beta_sigma: float = 0.0079

    def __post_init__(self):
        if not math.isfinite(self.m_lambda):
            raise InvalidParameterError("prior.m_lambda must be finite")
        if not (math.isfinite(self.s_lambda) and self.s_lambda > 0):
            raise InvalidParameterError("prior.s_lambda must be > 0")
        if not (math.isfinite(self.alpha_sigma) and self.alpha_sigma > 1):
            raise InvalidParameterError("prior.alpha_sigma must be > 1")
        if not (math.isfinite(self.beta_sigma) and self.beta_sigma > 0):
            raise InvalidParameterError("prior.beta_sigma must be > 0")

    @classmethod
    def from_moments(cls, mu: float, sigma: float, **kw) -> "PriorSpec":
        m, s = lognormal_hyperparams(mu, sigma)
        return cls(m_lambda=m, s_lambda=s, **kw)


def lognormal_hyperparams(mu: float, sigma: float) -> tuple[float, float]:
    """Log-space (m, s) of a log-normal with mean ``mu`` and sd ``sigma``."""
    if not (mu > 0 and sigma > 0):
        raise InvalidParameterError("log-normal moments need mu > 0 and sigma > 0")
    s2 = math.log1p((sigma / mu) ** 2)
    return math.log(mu) - 0.5 * s2, math.sqrt(s2)


def log_prior(theta, prior: PriorSpec) -> float:
    """Unnormalized log prior of theta = (ln lambda, ln I); flat in I."""
    z = (theta[0] - prior.m_lambda) / prior.s_lambda
    return -0.5 * z * z + theta[1]


def log_marginal_likelihood(d, g, prior: PriorSpec) -> float:
    """Multivariate-t log density of ``d`` about ``g``.

    Gaussian noise with its variance integrated against the inverse-gamma
    prior gives 2*alpha degrees of freedom and shape (beta/alpha) I.
    """
    d = np.asarray(getattr(d, "temps", d), dtype=float)
    g = np.asarray(getattr(g, "temps", g), dtype=float)
    if d.shape != g.shape:
        raise InvalidParameterError(f"data length {d.shape} does not match model length {g.shape}")
    r = d - g
    return _log_t(float(r @ r), d.size, prior.alpha_sigma, prior.beta_sigma)


def _log_t(sq: float, n: int, alpha: float, beta: float) -> float:
    nu = 2.0 * alpha
    s2 = beta / alpha
    return (gammaln(0.5 * (nu + n)) - gammaln(0.5 * nu) - 0.5 * n * math.log(nu * math.pi * s2)
            - 0.5 * (nu + n) * math.log1p(sq / (nu * s2)))


def potential(d, g, sigma2: float) -> float:
    if not sigma2 > 0:
        raise InvalidParameterError("sigma2 must be > 0")
    r = np.asarray(d, dtype=float) - np.asarray(g, dtype=float)
    return float(r @ r) / (2.0 * sigma2)


def zeta(y, box: SurrogateBox) -> tuple[float, float]:
    return box.zeta(y)


def zeta_inv(lam: float, I: float, box: SurrogateBox) -> np.ndarray:
    return box.zeta_inv(lam, I)


@dataclass(eq=False)
class FallbackModel:
    """Plain forward solver used when a proposal leaves the surrogate box."""

    ops: FemOperators
    material: MaterialProperties
    geometry: ExperimentGeometry
    disc: DiscretizationParams
    n_solves: int = field(default=0, init=False)

    def __call__(self, lam: float, I: float) -> np.ndarray:
        self.n_solves += 1
        return plain_solve(self.ops, self.material, self.geometry, self.disc, lam, I).temps


@dataclass(eq=False)
class LogTarget:
    """Approximate log target: surrogate inside the box, plain solves outside.

    ``fallback`` is a callable (lambda, I) -> temperatures, or a zero-argument
    factory returning one when ``lazy_fallback`` is set (the FEM operators
    are then only assembled on the first off-box proposal).
    """

    data: Thermogram
    prior: PriorSpec
    surrogate: SgfemSurrogate
    fallback: object = None
    lazy_fallback: bool = False
    n_surrogate: int = field(default=0, init=False)
    n_fallback: int = field(default=0, init=False)

    def __post_init__(self):
        self._d = np.asarray(self.data.temps, dtype=float)
        if self._d.shape[0] != self.surrogate.B.shape[0]:
            raise InvalidParameterError(
                f"data has {self._d.shape[0]} points but surrogate has {self.surrogate.B.shape[0]}")
        p = self.prior
        nu, s2, n = 2.0 * p.alpha_sigma, p.beta_sigma / p.alpha_sigma, self._d.size
        self._const = _log_t(0.0, n, p.alpha_sigma, p.beta_sigma)
        self._scale = 1.0 / (nu * s2)
        self._power = -0.5 * (nu + n)
        box = self.surrogate.box
        self._box = (box.mu_lambda, box.nu_lambda, box.mu_I, box.nu_I)

    def model(self, theta) -> tuple[np.ndarray, bool]:
        lam, I = math.exp(theta[0]), math.exp(theta[1])
        mu_l, nu_l, mu_i, nu_i = self._box
        y1, y2 = (lam - mu_l) / nu_l, (I - mu_i) / nu_i
        if abs(y1) <= SQRT3 and abs(y2) <= SQRT3:
            self.n_surrogate += 1
            return self.surrogate.B @ _eval_point(self.surrogate.basis, y1, y2), True
        if self.fallback is None:
            raise InvalidParameterError(f"theta {tuple(theta)} is off-box and no fallback is set")
        if self.lazy_fallback:
            self.fallback = self.fallback()
            self.lazy_fallback = False
        self.n_fallback += 1
        return self.fallback(lam, I), False

    def __call__(self, theta) -> tuple[float, bool]:
        g, used = self.model(theta)
        r = self._d - g
        sq = float(r @ r)
        value = self._const + self._power * math.log1p(sq * self._scale) + log_prior(theta, self.prior)
        return value, used


def log_target(theta, d: Thermogram, surrogate: SgfemSurrogate, prior: PriorSpec,
               fallback=None) -> tuple[float, bool]:
    """One-off evaluation of the approximate log target and the branch taken."""
    return LogTarget(d, prior, surrogate, fallback)(theta)
