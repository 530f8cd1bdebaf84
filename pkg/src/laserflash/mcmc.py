"""Random walk Metropolis-Hastings over theta = (ln lambda, ln I)."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InvalidParameterError, SamplerError

logger = logging.getLogger(__name__)

_CHUNK = 65536          # random numbers are drawn in fixed-size chunks for reproducibility
TARGET_ACCEPTANCE = 0.23
_TUNE_STREAM = 0x74756E65
_COARSE_BATCH = 20


@dataclass(frozen=True)
class ChainConfig:
    """Chain length, burn-in, thinning, proposal sd and seed.

    ``theta0`` is either None (draw from the initial-state sampler) or an
    explicit (theta1, theta2) pair.
    """

    M: int
    n_B: int = 0
    thin: int = 1
    beta: float = 1.55
    seed: int = 0
    theta0: tuple[float, float] | None = None
    theta2_bound: float = 80.0

    def __post_init__(self):
        if int(self.M) != self.M or int(self.n_B) != self.n_B or int(self.thin) != self.thin:
            raise InvalidParameterError("M, n_B and thin must be integers")
        if not self.M > self.n_B >= 0:
            raise InvalidParameterError(f"need M > n_B >= 0, got M={self.M}, n_B={self.n_B}")
        if self.thin < 1:
            raise InvalidParameterError("thin must be >= 1")
        if not (math.isfinite(self.beta) and self.beta > 0):
            raise InvalidParameterError("proposal sd beta must be > 0")


@dataclass(eq=False)
class Chain:
    """Post-processed chain plus the bookkeeping of the run that produced it."""

    samples: np.ndarray            # (n, 2) theta values
    indices: np.ndarray            # raw iteration index of each retained sample
    accepted_flags: np.ndarray
    surrogate_flags: np.ndarray
    accepted: int
    proposed: int
    fallback_count: int
    seed: int
    beta: float
    n_B: int = 0
    thin: int = 1
    meta: dict = field(default_factory=dict)

    @property
    def acceptance_rate(self) -> float:
        return self.accepted / self.proposed if self.proposed else 0.0

    def __len__(self):
        return len(self.samples)

    @property
    def lam(self) -> np.ndarray:
        return np.exp(self.samples[:, 0])

    @property
    def I(self) -> np.ndarray:
        return np.exp(self.samples[:, 1])


def _call(log_target, theta):
    out = log_target(theta)
    if isinstance(out, tuple):
        return float(out[0]), bool(out[1])
    return float(out), True


def prior_initial_state(prior, box):
    """theta0 sampler: ln lambda from the log-normal prior, I uniform on the box.

    The intensity prior is improper, so its draw is restricted to the
    surrogate box range.
    """
    (_, _), (I_lo, I_hi) = box.bounds

    def draw(rng):
        t1 = rng.normal(prior.m_lambda, prior.s_lambda)
        I = rng.uniform(max(I_lo, 1e-300), I_hi)
        return (t1, math.log(I))
    return draw


def _initial(log_target, config: ChainConfig, rng, initial):
    if config.theta0 is not None:
        theta = tuple(map(float, config.theta0))
        lp, flag = _call(log_target, theta)
        if not math.isfinite(lp):
            raise SamplerError(f"log target is not finite at the explicit theta0 {theta}")
        return theta, lp, flag
    if initial is None:
        raise SamplerError("no theta0 given and no initial-state sampler supplied")
    for _ in range(100):
        theta = tuple(map(float, initial(rng)))
        lp, flag = _call(log_target, theta)
        if math.isfinite(lp):
            return theta, lp, flag
    raise SamplerError("could not find an initial state with finite log target in 100 draws")


def _run(log_target, n_steps: int, beta: float, rng, theta, lp, flag, theta2_bound,
         log_q_ratio=None):
    thetas = np.empty((n_steps, 2))
    acc = np.zeros(n_steps, dtype=bool)
    sur = np.zeros(n_steps, dtype=bool)
    n_fallback = 0
    t1, t2 = theta
    done = 0
    while done < n_steps:
        c = min(_CHUNK, n_steps - done)
        z = rng.standard_normal((c, 2))
        logu = np.log(rng.random(c))
        for i in range(c):
            p1 = t1 + beta * z[i, 0]
            p2 = t2 + beta * z[i, 1]
            lp_new, flag_new = _call(log_target, (p1, p2))
            if not flag_new:
                n_fallback += 1
            ratio = lp_new - lp
            if log_q_ratio is not None:
                ratio += log_q_ratio((t1, t2), (p1, p2))
            if math.isfinite(lp_new) and logu[i] < ratio:
                t1, t2, lp, flag = p1, p2, lp_new, flag_new
                acc[done + i] = True
            if abs(t2) > theta2_bound:
                raise SamplerError(
                    f"theta2 = {t2:.3g} exceeded the runaway bound {theta2_bound}; "
                    "the improper intensity prior may not yield a proper target")
            thetas[done + i] = (t1, t2)
            sur[done + i] = flag
        done += c
    return thetas, acc, sur, n_fallback, (t1, t2), lp, flag


def postprocess(raw: np.ndarray, n_B: int, thin: int) -> np.ndarray:
    """Indices retained after dropping ``n_B`` states and keeping every ``thin``-th."""
    n = len(raw)
    if not 0 <= n_B < n:
        raise InvalidParameterError(f"burn-in {n_B} must be smaller than the chain length {n}")
    if thin < 1:
        raise InvalidParameterError("thin must be >= 1")
    count = (n - n_B) // thin
    return n_B + thin * np.arange(count)


def rwmh(log_target, config: ChainConfig, initial=None, log_q_ratio=None) -> Chain:
    """Random walk Metropolis-Hastings with an isotropic Gaussian proposal.

    ``log_target(theta)`` returns the log density or a ``(value, used_surrogate)``
    pair. ``initial(rng)`` draws theta0 when the config does not fix it.
    ``log_q_ratio(current, proposal)`` = ln q(current|proposal) - ln q(proposal|current)
    defaults to zero (symmetric proposal). Non-finite proposal values are
    rejected. The chain records M post-transition states.
    """
    rng = np.random.default_rng(config.seed)
    theta, lp, flag = _initial(log_target, config, rng, initial)
    thetas, acc, sur, n_fb, *_ = _run(log_target, config.M, config.beta, rng, theta, lp, flag,
                                      config.theta2_bound, log_q_ratio)
    keep = postprocess(thetas, config.n_B, config.thin)
    return Chain(samples=thetas[keep], indices=keep, accepted_flags=acc[keep],
                 surrogate_flags=sur[keep], accepted=int(acc.sum()), proposed=config.M,
                 fallback_count=n_fb, seed=config.seed, beta=config.beta,
                 n_B=config.n_B, thin=config.thin, meta={"theta0": theta})


@dataclass(frozen=True)
class TuneResult:
    beta: float
    acceptance: float
    theta: tuple[float, float]
    history: tuple = ()


def tune_beta(log_target, config: ChainConfig, initial=None, *, pilot: int = 1000,
              batch: int = 250, rounds: int = 40, target: float = TARGET_ACCEPTANCE) -> TuneResult:
    """Adapt beta toward the target acceptance rate over pilot batches.

    Coarse factor-of-4 jumps on short batches until a batch accepts between
    10% and 50%, then Robbins-Monro steps on ln(beta) with decaying gain. The
    returned beta averages ln(beta) over the second half of the stochastic
    approximation rounds; a final pilot run of ``pilot`` steps measures its
    acceptance. Tuning samples are not part of any chain.
    """
    if pilot < 1000:
        raise InvalidParameterError("pilot length must be at least 1000")
    # separate stream from the main chain with the same seed
    rng = np.random.default_rng([config.seed, _TUNE_STREAM])
    theta, lp, flag = _initial(log_target, config, rng, initial)
    log_beta = math.log(config.beta)
    history = []
    sa_logs = []
    r = 0
    # short batches until beta is within range; far-off proposals may need plain solves
    coarse = min(batch, _COARSE_BATCH)
    for _ in range(rounds):
        n = coarse if r == 0 else batch
        _, acc, _, _, theta, lp, flag = _run(log_target, n, math.exp(log_beta), rng, theta,
                                             lp, flag, config.theta2_bound)
        a = float(acc.mean())
        history.append((math.exp(log_beta), a))
        low, high = (0.1, 0.5) if r == 0 else (0.02, 0.9)
        if a < low:
            log_beta -= math.log(4.0)
            continue
        if a > high:
            log_beta += math.log(4.0)
            continue
        log_beta += 3.0 / (r + 1) ** 0.6 * (a - target)
        sa_logs.append(log_beta)
        r += 1
    if sa_logs:
        log_beta = float(np.mean(sa_logs[len(sa_logs) // 2:]))
    beta = math.exp(log_beta)
    _, acc, _, _, theta, lp, flag = _run(log_target, pilot, beta, rng, theta, lp, flag,
                                         config.theta2_bound)
    a = float(acc.mean())
    history.append((beta, a))
    if not 0.1 <= a <= 0.5:
        best = min(history, key=lambda h: abs(h[1] - target))
        logger.warning("beta tuning reached acceptance %.3f; returning best found beta=%.3g (%.3f)",
                       a, best[0], best[1])
        beta, a = best
    logger.info("tuned beta=%.4g, pilot acceptance %.3f", beta, a)
    return TuneResult(beta=beta, acceptance=a, theta=theta, history=tuple(history))


def merge_chains(chains: list[Chain]) -> Chain:
    """Pool post-burn-in samples of chains in seed order."""
    if not chains:
        raise InvalidParameterError("no chains to merge")
    chains = sorted(chains, key=lambda c: c.seed)
    return Chain(samples=np.vstack([c.samples for c in chains]),
                 indices=np.concatenate([c.indices for c in chains]),
                 accepted_flags=np.concatenate([c.accepted_flags for c in chains]),
                 surrogate_flags=np.concatenate([c.surrogate_flags for c in chains]),
                 accepted=sum(c.accepted for c in chains),
                 proposed=sum(c.proposed for c in chains),
                 fallback_count=sum(c.fallback_count for c in chains),
                 seed=chains[0].seed, beta=chains[0].beta, n_B=chains[0].n_B,
                 thin=chains[0].thin, meta={"seeds": [c.seed for c in chains]})


def with_beta(config: ChainConfig, beta: float, theta0=None) -> ChainConfig:
    return replace(config, beta=float(beta), theta0=config.theta0 if theta0 is None else theta0)
