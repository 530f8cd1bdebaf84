"""End-to-end stages shared by the CLI and the tests."""
from __future__ import annotations

import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace

import numpy as np

from .analysis import PosteriorSummary, posterior_mean_thermogram, summarize
from .bayes import FallbackModel, LogTarget
from .config import ExperimentConfig
from .errors import InvalidParameterError
from .fem import FemOperators, assemble_operators
from .mcmc import Chain, TuneResult, merge_chains, prior_initial_state, rwmh, tune_beta
from .mesh import Mesh, build_rect_mesh
from .pce import build_basis
from .solvers import SgfemSurrogate, Thermogram, plain_solve, sgfem_solve

logger = logging.getLogger(__name__)


def build_operators(config: ExperimentConfig) -> tuple[Mesh, FemOperators]:
    mesh = build_rect_mesh(config.geometry, config.disc.h_target)
    ops = assemble_operators(mesh, config.geometry, config.material, config.profile)
    return mesh, ops


def forward(config: ExperimentConfig, lam: float, I: float, ops: FemOperators | None = None) -> Thermogram:
    if ops is None:
        _, ops = build_operators(config)
    return plain_solve(ops, config.material, config.geometry, config.disc, lam, I)


def build_surrogate(config: ExperimentConfig, ops: FemOperators | None = None,
                    store_steps=()) -> SgfemSurrogate:
    t0 = time.perf_counter()
    if ops is None:
        _, ops = build_operators(config)
    t_asm = time.perf_counter() - t0
    sur = sgfem_solve(ops, config.material, config.geometry, build_basis(config.disc.k), config.box,
                      config.disc, store_steps=store_steps, input_hash=config.surrogate_hash())
    sur.info["assembly_seconds"] = t_asm
    return sur


def synthesize_data(config: ExperimentConfig, lambda_true: float, I_true: float,
                    noise_sd: float, seed: int, ops: FemOperators | None = None) -> Thermogram:
    """Plain-solve thermogram at the truth plus iid N(0, noise_sd^2) noise."""
    if not noise_sd >= 0:
        raise InvalidParameterError("noise_sd must be >= 0")
    clean = forward(config, lambda_true, I_true, ops)
    if noise_sd == 0:
        return clean
    rng = np.random.default_rng(seed)
    return Thermogram(clean.times, clean.temps + rng.normal(0.0, noise_sd, len(clean)))


class FallbackFactory:
    """Builds the plain-solve fallback on first use (picklable for worker processes)."""

    def __init__(self, config: ExperimentConfig, ops: FemOperators | None = None):
        self.config = config
        self.ops = ops

    def __call__(self) -> FallbackModel:
        ops = self.ops if self.ops is not None else build_operators(self.config)[1]
        c = self.config
        return FallbackModel(ops, c.material, c.geometry, c.disc)


def make_target(config: ExperimentConfig, data: Thermogram, surrogate: SgfemSurrogate,
                ops: FemOperators | None = None) -> LogTarget:
    if len(data) != config.disc.n_d:
        raise InvalidParameterError(
            f"data has {len(data)} points but the configuration expects n_d={config.disc.n_d}")
    if not np.allclose(data.times, surrogate.times, rtol=1e-9, atol=1e-12 * config.geometry.T):
        raise InvalidParameterError("data times do not match the surrogate measurement times")
    return LogTarget(data, config.prior, surrogate, fallback=FallbackFactory(config, ops),
                     lazy_fallback=True)


def run_chain(config: ExperimentConfig, data: Thermogram, surrogate: SgfemSurrogate,
              seed: int | None = None, ops: FemOperators | None = None) -> tuple[Chain, TuneResult | None]:
    """Tune beta (optional), then run one RWMH chain.

    After tuning, the main chain starts from the last pilot state unless the
    configuration fixes theta0.
    """
    chain_cfg = config.chain if seed is None else replace(config.chain, seed=int(seed))
    target = make_target(config, data, surrogate, ops)
    initial = prior_initial_state(config.prior, config.box)
    tuned = None
    t0 = time.perf_counter()
    if config.tune.enabled:
        tuned = tune_beta(target, chain_cfg, initial, pilot=config.tune.pilot,
                          batch=config.tune.batch, rounds=config.tune.rounds)
        theta0 = chain_cfg.theta0 if chain_cfg.theta0 is not None else tuned.theta
        chain_cfg = replace(chain_cfg, beta=tuned.beta, theta0=theta0)
    t1 = time.perf_counter()
    chain = rwmh(target, chain_cfg, initial)
    t2 = time.perf_counter()
    chain.meta.update({"tune_seconds": t1 - t0, "sample_seconds": t2 - t1,
                       "tuned_acceptance": None if tuned is None else tuned.acceptance,
                       "n_surrogate_evals": target.n_surrogate,
                       "n_fallback_evals": target.n_fallback})
    return chain, tuned


def _chain_worker(args):
    config, data, surrogate, seed = args
    return run_chain(config, data, surrogate, seed)


def run_chains(config: ExperimentConfig, data: Thermogram, surrogate: SgfemSurrogate,
               n_chains: int | None = None, processes: int | None = None) -> Chain:
    """Run independent chains with seeds seed, seed+1, ... and pool them in seed order."""
    n = n_chains or config.n_chains
    seeds = [config.chain.seed + i for i in range(n)]
    if n == 1:
        return run_chain(config, data, surrogate, seeds[0])[0]
    jobs = [(config, data, surrogate, s) for s in seeds]
    with ProcessPoolExecutor(max_workers=processes) as pool:
        results = list(pool.map(_chain_worker, jobs))
    return merge_chains([c for c, _ in results])


def posterior_summary(config: ExperimentConfig, chain) -> PosteriorSummary:
    return summarize(chain, config.material.heat_capacity, bins=config.analysis.bins,
                     windows=config.analysis.windows)


def mean_thermogram(config: ExperimentConfig, summary: PosteriorSummary, data: Thermogram,
                    surrogate: SgfemSurrogate) -> tuple[Thermogram, bool]:
    return posterior_mean_thermogram(summary, make_target(config, data, surrogate))
