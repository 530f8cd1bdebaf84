"""Bayesian laser flash analysis with a stochastic Galerkin surrogate."""
from .analysis import PosteriorSummary, posterior_mean_thermogram, summarize
from .bayes import (LogTarget, PriorSpec, log_marginal_likelihood, log_prior, log_target,
                    lognormal_hyperparams, potential, zeta, zeta_inv)
from .config import ExperimentConfig, load_config
from .fem import FemOperators, LaserProfile, MaterialProperties, assemble_operators
from .io import (load_surrogate, read_chain, read_thermogram, save_surrogate, write_chain,
                 write_thermogram)
from .mcmc import Chain, ChainConfig, postprocess, rwmh, tune_beta
from .mesh import ExperimentGeometry, Mesh, build_rect_mesh
from .pce import PceBasis, build_basis, eval_basis
from .solvers import (DiscretizationParams, SgfemSurrogate, SurrogateBox, Thermogram,
                      evaluate_surrogate, plain_solve, sgfem_solve)

__version__ = "0.1.0"
