"""Experiment configuration: an INI file with one section per component.

See ``configs/copper.ini`` in the repository for the full list of keys.
"""
from __future__ import annotations

import configparser
import hashlib
import json
import logging
import math
from dataclasses import asdict, dataclass, replace
from pathlib import Path

from .bayes import PriorSpec, lognormal_hyperparams
from .errors import ConfigError, InvalidParameterError
from .fem import LaserProfile, MaterialProperties
from .mcmc import ChainConfig
from .mesh import ExperimentGeometry
from .solvers import DiscretizationParams, SurrogateBox

logger = logging.getLogger(__name__)

SURROGATE_FORMAT_VERSION = 1

# Box covering the log-normal prior support for lambda and the intensity scale
# of the copper experiment.
DEFAULT_BOX = {"lambda_min": 150.0, "lambda_max": 507.0, "I_min": 0.6e12, "I_max": 1.8e12}
DEFAULT_PRIOR = {"lambda_mean": 328.5, "lambda_sd": 50.0, "alpha_sigma": 3.0, "beta_sigma": 0.0079}


@dataclass(frozen=True)
class AnalysisOptions:
    bins: int = 100
    windows: tuple[tuple[float, float], ...] | None = None


@dataclass(frozen=True)
class TuneOptions:
    enabled: bool = True
    pilot: int = 2000
    batch: int = 250
    rounds: int = 40


@dataclass(frozen=True)
class Paths:
    data: Path | None = None
    surrogate: Path | None = None
    output: Path | None = None


@dataclass(frozen=True)
class ExperimentConfig:
    geometry: ExperimentGeometry
    material: MaterialProperties
    profile: LaserProfile
    disc: DiscretizationParams
    box: SurrogateBox
    prior: PriorSpec
    chain: ChainConfig
    tune: TuneOptions = TuneOptions()
    analysis: AnalysisOptions = AnalysisOptions()
    paths: Paths = Paths()
    n_chains: int = 1

    @property
    def h_target(self) -> float:
        return self.disc.h_target

    def surrogate_hash(self) -> str:
        """SHA-256 over every input that changes the surrogate matrix B."""
        payload = {
            "version": SURROGATE_FORMAT_VERSION,
            "geometry": asdict(self.geometry),
            "material": asdict(self.material),
            "profile": asdict(self.profile),
            "disc": asdict(self.disc),
            "box": asdict(self.box),
        }
        blob = json.dumps(payload, sort_keys=True, default=repr).encode()
        return hashlib.sha256(blob).hexdigest()


_REQUIRED = {
    "geometry": ("R", "H", "z_f", "t_f", "T", "L"),
    "material": ("rho", "c_p", "kappa", "T_a"),
    "discretization": ("n_t", "h_target"),
}


def _float(section, key, raw) -> float:
    try:
        value = float(raw)
    except (TypeError, ValueError):
        raise ConfigError(f"{section}.{key}: expected a number, got {raw!r}") from None
    if not math.isfinite(value):
        raise ConfigError(f"{section}.{key}: must be finite, got {raw!r}")
    return value


def _int(section, key, raw) -> int:
    value = _float(section, key, raw)
    if value != int(value):
        raise ConfigError(f"{section}.{key}: expected an integer, got {raw!r}")
    return int(value)


def _bool(section, key, raw) -> bool:
    s = str(raw).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{section}.{key}: expected a boolean, got {raw!r}")


def _section(cp, name) -> dict:
    return dict(cp[name]) if cp.has_section(name) else {}


def _build(section, factory, **kw):
    try:
        return factory(**kw)
    except InvalidParameterError as exc:
        raise ConfigError(f"{section}: {exc}") from None


def _parse_windows(raw: str):
    out = []
    for part in raw.split(","):
        part = part.strip()
        if not part:
            continue
        try:
            lo, hi = (float(v) for v in part.split(":"))
        except ValueError:
            raise ConfigError(f"analysis.windows: bad window {part!r}, expected lo:hi") from None
        if not hi > lo:
            raise ConfigError(f"analysis.windows: window {part!r} must have hi > lo")
        out.append((lo, hi))
    return tuple(out)


def parse_config(cp: configparser.ConfigParser, base_dir: Path = Path(".")) -> ExperimentConfig:
    for section, keys in _REQUIRED.items():
        values = _section(cp, section)
        for key in keys:
            if key not in values or values[key].strip() == "":
                raise ConfigError(f"{section}.{key}: missing required field")

    g = _section(cp, "geometry")
    geometry = _build("geometry", ExperimentGeometry,
                      **{k: _float("geometry", k, g[k]) for k in _REQUIRED["geometry"]})
    m = _section(cp, "material")
    material = _build("material", MaterialProperties,
                      **{k: _float("material", k, m[k]) for k in _REQUIRED["material"]})

    las = _section(cp, "laser")
    kind = las.get("profile", "uniform").strip().lower()
    r_f = las.get("r_f", "").strip()
    profile = _build("laser", LaserProfile, kind=kind,
                     r_f=_float("laser", "r_f", r_f) if r_f else None)

    d = _section(cp, "discretization")
    disc = _build("discretization", DiscretizationParams,
                  n_t=_int("discretization", "n_t", d["n_t"]),
                  k=_int("discretization", "k", d.get("k", 6)),
                  n_d=_int("discretization", "n_d", d.get("n_d", 401)),
                  h_target=_float("discretization", "h_target", d["h_target"]))
    if disc.h_target >= min(geometry.R, geometry.H):
        raise ConfigError("discretization.h_target: must be smaller than min(R, H)")
    pulse_steps = geometry.t_f / disc.tau(geometry)
    if abs(pulse_steps - round(pulse_steps)) > 1e-9 * max(1.0, pulse_steps):
        logger.warning("t_f/tau = %.4g is not an integer; the pulse is spread over partial steps",
                       pulse_steps)

    bx = _section(cp, "box")
    if any(k in bx for k in ("mu_lambda", "nu_lambda", "mu_I", "nu_I")):
        box = _build("box", SurrogateBox, **{k: _float("box", k, bx[k])
                                             for k in ("mu_lambda", "nu_lambda", "mu_I", "nu_I")})
    else:
        vals = {k: _float("box", k, bx.get(k, DEFAULT_BOX[k])) for k in DEFAULT_BOX}
        if not (vals["lambda_max"] > vals["lambda_min"] and vals["I_max"] > vals["I_min"]):
            raise ConfigError("box: upper bounds must exceed lower bounds")
        box = _build("box", SurrogateBox.from_bounds, **vals)

    pr = _section(cp, "prior")
    alpha = _float("prior", "alpha_sigma", pr.get("alpha_sigma", DEFAULT_PRIOR["alpha_sigma"]))
    beta = _float("prior", "beta_sigma", pr.get("beta_sigma", DEFAULT_PRIOR["beta_sigma"]))
    if "m_lambda" in pr or "s_lambda" in pr:
        m_l = _float("prior", "m_lambda", pr.get("m_lambda"))
        s_l = _float("prior", "s_lambda", pr.get("s_lambda"))
    else:
        mu = _float("prior", "lambda_mean", pr.get("lambda_mean", DEFAULT_PRIOR["lambda_mean"]))
        sd = _float("prior", "lambda_sd", pr.get("lambda_sd", DEFAULT_PRIOR["lambda_sd"]))
        try:
            m_l, s_l = lognormal_hyperparams(mu, sd)
        except InvalidParameterError as exc:
            raise ConfigError(f"prior: {exc}") from None
    prior = _build("prior", PriorSpec, m_lambda=m_l, s_lambda=s_l, alpha_sigma=alpha, beta_sigma=beta)

    c = _section(cp, "chain")
    theta0_raw = c.get("theta0", "prior").strip().lower()
    if theta0_raw in ("", "prior"):
        theta0 = None
    else:
        parts = theta0_raw.split(",")
        if len(parts) != 2:
            raise ConfigError("chain.theta0: expected 'prior' or 'theta1, theta2'")
        theta0 = tuple(_float("chain", "theta0", p) for p in parts)
    chain = _build("chain", ChainConfig,
                   M=_int("chain", "M", c.get("M", 100_000)),
                   n_B=_int("chain", "n_B", c.get("n_B", 10_000)),
                   thin=_int("chain", "thin", c.get("thin", 1)),
                   beta=_float("chain", "beta", c.get("beta", 1.55)),
                   seed=_int("chain", "seed", c.get("seed", 0)),
                   theta0=theta0,
                   theta2_bound=_float("chain", "theta2_bound", c.get("theta2_bound", 80.0)))
    tune = TuneOptions(enabled=_bool("chain", "tune", c.get("tune", "true")),
                       pilot=_int("chain", "tune_pilot", c.get("tune_pilot", 2000)),
                       batch=_int("chain", "tune_batch", c.get("tune_batch", 250)),
                       rounds=_int("chain", "tune_rounds", c.get("tune_rounds", 40)))
    if tune.pilot < 1000:
        raise ConfigError("chain.tune_pilot: must be at least 1000")
    n_chains = _int("chain", "chains", c.get("chains", 1))
    if n_chains < 1:
        raise ConfigError("chain.chains: must be >= 1")

    a = _section(cp, "analysis")
    bins = _int("analysis", "bins", a.get("bins", 100))
    if bins < 1:
        raise ConfigError("analysis.bins: must be >= 1")
    windows = _parse_windows(a["windows"]) if a.get("windows", "").strip() else None

    p = _section(cp, "paths")

    def _path(key):
        raw = p.get(key, "").strip()
        return (base_dir / raw) if raw else None

    paths = Paths(data=_path("data"), surrogate=_path("surrogate"), output=_path("output"))
    return ExperimentConfig(geometry=geometry, material=material, profile=profile, disc=disc,
                            box=box, prior=prior, chain=chain, tune=tune,
                            analysis=AnalysisOptions(bins=bins, windows=windows),
                            paths=paths, n_chains=n_chains)


def read_config_parser(path) -> configparser.ConfigParser:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    cp.optionxform = str            # keys are case sensitive (R, H, T, ...)
    try:
        cp.read(path)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return cp


def apply_overrides(cp: configparser.ConfigParser, overrides) -> configparser.ConfigParser:
    """Apply ``section.key=value`` strings on top of a parsed file."""
    for item in overrides or ():
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ConfigError(f"override {item!r} must look like section.key=value")
        lhs, value = item.split("=", 1)
        section, key = lhs.strip().split(".", 1)
        if not cp.has_section(section):
            cp.add_section(section)
        cp[section][key.strip()] = value.strip()
    return cp


def load_config(path, overrides=()) -> ExperimentConfig:
    """Parse and validate a configuration file, with optional overrides."""
    cp = apply_overrides(read_config_parser(path), overrides)
    return parse_config(cp, Path(path).resolve().parent)


def with_chain(config: ExperimentConfig, **changes) -> ExperimentConfig:
    return replace(config, chain=replace(config.chain, **changes))
