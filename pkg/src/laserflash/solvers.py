"""Implicit Euler time stepping of the deterministic and stochastic Galerkin systems."""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .errors import InvalidParameterError, OutOfBoxError, SolverError, SurrogateBuildError
from .fem import FemOperators, MaterialProperties
from .mesh import ExperimentGeometry
from .pce import SQRT3, PceBasis, eval_basis

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DiscretizationParams:
    """Time steps, polynomial degree, thermogram length and target mesh size."""

    n_t: int
    k: int = 6
    n_d: int = 401
    h_target: float | None = None

    def __post_init__(self):
        if int(self.n_t) != self.n_t or self.n_t < 1:
            raise InvalidParameterError(f"n_t must be a positive integer, got {self.n_t!r}")
        if int(self.k) != self.k or self.k < 0:
            raise InvalidParameterError(f"k must be a non-negative integer, got {self.k!r}")
        if int(self.n_d) != self.n_d or self.n_d < 2:
            raise InvalidParameterError(f"n_d must be an integer >= 2, got {self.n_d!r}")
        if self.n_t % (self.n_d - 1):
            raise InvalidParameterError(
                f"n_t={self.n_t} must be a multiple of (n_d - 1)={self.n_d - 1}")
        if self.h_target is not None and not (math.isfinite(self.h_target) and self.h_target > 0):
            raise InvalidParameterError("h_target must be finite and > 0")

    @property
    def stride(self) -> int:
        """Time steps between consecutive measurements."""
        return self.n_t // (self.n_d - 1)

    def tau(self, geometry: ExperimentGeometry) -> float:
        return geometry.T / self.n_t

    def measurement_times(self, geometry: ExperimentGeometry) -> np.ndarray:
        return np.linspace(0.0, geometry.T, self.n_d)


@dataclass(frozen=True)
class SurrogateBox:
    """Affine maps lambda = mu_lambda + nu_lambda*y1, I = mu_I + nu_I*y2 on [-sqrt3, sqrt3]^2."""

    mu_lambda: float
    nu_lambda: float
    mu_I: float
    nu_I: float

    def __post_init__(self):
        vals = (self.mu_lambda, self.nu_lambda, self.mu_I, self.nu_I)
        if not all(math.isfinite(v) for v in vals):
            raise InvalidParameterError("surrogate box entries must be finite")
        if self.nu_lambda <= 0 or self.nu_I <= 0:
            raise InvalidParameterError("box half-widths nu_lambda, nu_I must be > 0")
        if self.mu_lambda - SQRT3 * self.nu_lambda <= 0:
            raise InvalidParameterError("box admits non-positive conductivity")
        if self.mu_I - SQRT3 * self.nu_I < 0:
            raise InvalidParameterError("box admits negative intensity")

    @classmethod
    def from_bounds(cls, lambda_min, lambda_max, I_min, I_max) -> "SurrogateBox":
        return cls(mu_lambda=0.5 * (lambda_min + lambda_max),
                   nu_lambda=0.5 * (lambda_max - lambda_min) / SQRT3,
                   mu_I=0.5 * (I_min + I_max),
                   nu_I=0.5 * (I_max - I_min) / SQRT3)

    @property
    def bounds(self) -> tuple[tuple[float, float], tuple[float, float]]:
        return ((self.mu_lambda - SQRT3 * self.nu_lambda, self.mu_lambda + SQRT3 * self.nu_lambda),
                (self.mu_I - SQRT3 * self.nu_I, self.mu_I + SQRT3 * self.nu_I))

    def zeta(self, y) -> tuple[float, float]:
        return (self.mu_lambda + self.nu_lambda * y[0], self.mu_I + self.nu_I * y[1])

    def zeta_inv(self, lam, I) -> np.ndarray:
        return np.array([(lam - self.mu_lambda) / self.nu_lambda, (I - self.mu_I) / self.nu_I])


def in_gamma(y, tol: float = 1e-12) -> bool:
    return bool(abs(y[0]) <= SQRT3 * (1 + tol) and abs(y[1]) <= SQRT3 * (1 + tol))


@dataclass(frozen=True, eq=False)
class Thermogram:
    times: np.ndarray
    temps: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        temps = np.asarray(self.temps, dtype=float)
        if times.shape != temps.shape or times.ndim != 1:
            raise InvalidParameterError("thermogram times and temperatures must be 1-D of equal length")
        if np.any(np.diff(times) <= 0):
            raise InvalidParameterError("thermogram times must be strictly increasing")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "temps", temps)

    def __len__(self):
        return len(self.times)


@dataclass(frozen=True, eq=False)
class SgfemSurrogate:
    """Stochastic Galerkin surrogate reduced to the observed disc averages.

    ``B[n, j]`` is the disc average of the j-th chaos coefficient at the n-th
    measurement time, so a thermogram at ``y`` is ``B @ Psi(y)``.
    """

    basis: PceBasis
    box: SurrogateBox
    disc: DiscretizationParams
    B: np.ndarray
    times: np.ndarray
    coeffs: dict = field(default_factory=dict, repr=False)
    input_hash: str = ""
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        self.B.flags.writeable = False


def pulse_fractions(geometry: ExperimentGeometry, n_t: int) -> np.ndarray:
    """Fraction of each step [tau_n, tau_{n+1}] during which the laser is on.

    Equals the right-endpoint indicator when t_f is a multiple of tau; for
    other step sizes it keeps the deposited energy exact.
    """
    tau = geometry.T / n_t
    start = np.arange(n_t) * tau
    return np.clip((geometry.t_f - start) / tau, 0.0, 1.0)


def _factorize(A: sp.spmatrix, error_cls=SolverError):
    try:
        lu = splu(sp.csc_matrix(A))
    except RuntimeError as exc:
        raise error_cls(f"factorization failed: {exc}") from exc
    return lu


def plain_solve(ops: FemOperators, material: MaterialProperties, geometry: ExperimentGeometry,
                disc: DiscretizationParams, lam: float, I: float, *, return_final: bool = False):
    """Deterministic forward solve returning the disc-averaged thermogram.

    With ``return_final`` also returns the nodal temperatures at t = T.
    """
    if not (math.isfinite(lam) and lam > 0):
        raise InvalidParameterError(f"conductivity must be finite and > 0, got {lam!r}")
    if not (math.isfinite(I) and I >= 0):
        raise InvalidParameterError(f"intensity must be finite and >= 0, got {I!r}")
    tau = disc.tau(geometry)
    rc = material.heat_capacity
    kappa, T_a = material.kappa, material.T_a
    mass = rc * ops.M
    lu = _factorize(mass + tau * (lam * ops.K + kappa * ops.Mb))
    src = tau * I * ops.f
    ambient = tau * kappa * T_a * ops.b
    s = pulse_fractions(geometry, disc.n_t)
    stride = disc.stride

    u = np.full(ops.n_h, T_a)
    temps = np.empty(disc.n_d)
    temps[0] = ops.w @ u
    for n in range(disc.n_t):
        rhs = mass @ u + ambient
        if s[n] > 0:
            rhs += s[n] * src
        u = lu.solve(rhs)
        if (n + 1) % stride == 0:
            temps[(n + 1) // stride] = ops.w @ u
    if not np.all(np.isfinite(temps)):
        raise SolverError("non-finite temperatures in plain solve")
    out = Thermogram(disc.measurement_times(geometry), temps)
    return (out, u) if return_final else out


def sgfem_solve(ops: FemOperators, material: MaterialProperties, geometry: ExperimentGeometry,
                basis: PceBasis, box: SurrogateBox, disc: DiscretizationParams,
                measurement_times=None, *, store_steps=(), input_hash: str = "") -> SgfemSurrogate:
    """Offline stage: step the coupled (n_h * n_k) Galerkin system to t = T.

    The unknown vector stacks the chaos coefficients block-wise, so the
    system matrix is ``rc*(E x M) + tau*(E x (mu_l K + kappa Mb) + nu_l (G1 x K))``
    with E the identity (orthonormal basis). ``store_steps`` lists step
    indices at which the full coefficient fields are kept.
    """
    times = disc.measurement_times(geometry)
    if measurement_times is not None:
        measurement_times = np.asarray(measurement_times, dtype=float)
        if measurement_times.shape != times.shape or not np.allclose(
                measurement_times, times, rtol=1e-9, atol=1e-12 * geometry.T):
            raise InvalidParameterError("measurement times are not aligned with the time-step grid")
    t0 = time.perf_counter()
    n_h, n_k = ops.n_h, basis.n_k
    tau = disc.tau(geometry)
    rc = material.heat_capacity
    kappa, T_a = material.kappa, material.T_a
    eye = sp.identity(n_k, format="csr")
    A = (sp.kron(eye, rc * ops.M + tau * (box.mu_lambda * ops.K + kappa * ops.Mb))
         + tau * box.nu_lambda * sp.kron(basis.G1, ops.K))
    try:
        lu = _factorize(A, SurrogateBuildError)
    except MemoryError as exc:
        raise SurrogateBuildError(f"out of memory factorizing system of size {n_h * n_k}") from exc
    t_fact = time.perf_counter() - t0

    e1 = np.zeros(n_k)
    e1[0] = 1.0
    src_coef = box.mu_I * e1 + box.nu_I * (basis.G2 @ e1)
    src = tau * np.kron(src_coef, ops.f)
    ambient = tau * kappa * T_a * np.kron(e1, ops.b)
    s = pulse_fractions(geometry, disc.n_t)
    stride = disc.stride
    mass = rc * ops.M
    store = set(int(n) for n in store_steps)

    U = np.zeros((n_k, n_h))
    U[0] = T_a
    B = np.empty((disc.n_d, n_k))
    B[0] = U @ ops.w
    coeffs = {0: U.copy()} if 0 in store else {}
    for n in range(disc.n_t):
        rhs = (mass @ U.T).T.ravel() + ambient
        if s[n] > 0:
            rhs += s[n] * src
        U = lu.solve(rhs).reshape(n_k, n_h)
        if (n + 1) % stride == 0:
            B[(n + 1) // stride] = U @ ops.w
        if n + 1 in store:
            coeffs[n + 1] = U.copy()
    if not np.all(np.isfinite(B)):
        raise SurrogateBuildError("non-finite surrogate coefficients")
    elapsed = time.perf_counter() - t0
    info = {"n_h": n_h, "n_k": n_k, "n_t": disc.n_t, "system_size": n_h * n_k,
            "factorization_seconds": t_fact, "build_seconds": elapsed}
    logger.info("SGFEM surrogate: n_h=%d n_k=%d, %.2f s", n_h, n_k, elapsed)
    return SgfemSurrogate(basis=basis, box=box, disc=disc, B=B, times=times,
                          coeffs=coeffs, input_hash=input_hash, info=info)


def evaluate_surrogate(surrogate: SgfemSurrogate, y) -> Thermogram:
    if not in_gamma(y):
        raise OutOfBoxError(f"parameter point {tuple(y)} lies outside the surrogate box")
    return Thermogram(surrogate.times, surrogate.B @ eval_basis(surrogate.basis, y))


def surrogate_temps(surrogate: SgfemSurrogate, y) -> np.ndarray:
    """Raw ``B @ Psi(y)`` without the box check or Thermogram wrapping (hot path)."""
    return surrogate.B @ eval_basis(surrogate.basis, y)
