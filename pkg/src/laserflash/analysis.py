"""Posterior summaries: moments, histograms, conditionals, diffusivity."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidParameterError
from .solvers import Thermogram

LOW_CONFIDENCE_COUNT = 1000


class MomentAccumulator:
    """Streaming mean/covariance of 2-D samples (Chan et al. pairwise update).

    Merging is associative, so per-chunk or per-chain accumulators can be
    combined in any fixed order.
    """

    def __init__(self, dim: int = 2):
        self.n = 0
        self.mean = np.zeros(dim)
        self.comoment = np.zeros((dim, dim))

    def update(self, x: np.ndarray) -> "MomentAccumulator":
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if len(x) == 0:
            return self
        other = MomentAccumulator(x.shape[1])
        other.n = len(x)
        # shift by the first sample: exact for constant data, better conditioned
        dx = x - x[0]
        shift = dx.mean(axis=0)
        other.mean = x[0] + shift
        dx -= shift
        other.comoment = dx.T @ dx
        return self.merge(other)

    def merge(self, other: "MomentAccumulator") -> "MomentAccumulator":
        if other.n == 0:
            return self
        if self.n == 0:
            self.n, self.mean, self.comoment = other.n, other.mean.copy(), other.comoment.copy()
            return self
        n = self.n + other.n
        delta = other.mean - self.mean
        self.mean = self.mean + delta * (other.n / n)
        self.comoment = self.comoment + other.comoment + np.outer(delta, delta) * (self.n * other.n / n)
        self.n = n
        return self

    @property
    def cov(self) -> np.ndarray:
        """Population (1/n) covariance."""
        return self.comoment / self.n


@dataclass
class Histogram:
    edges: np.ndarray
    density: np.ndarray
    count: int = 0
    low_confidence: bool = False

    def integral(self) -> float:
        return float(np.sum(self.density * np.diff(self.edges)))


@dataclass
class ConditionalHistogram:
    I_lo: float
    I_hi: float
    hist: Histogram
    empty: bool = False


@dataclass
class PosteriorSummary:
    n_samples: int
    mean_lambda: float
    sd_lambda: float
    mean_I: float
    sd_I: float
    corr_lambda_I: float
    corr_defined: bool
    mean_alpha: float
    sd_alpha: float
    hist_lambda: Histogram = field(repr=False)
    hist_I: Histogram = field(repr=False)
    joint_edges: tuple[np.ndarray, np.ndarray] = field(repr=False)
    joint_density: np.ndarray = field(repr=False)
    conditionals: list[ConditionalHistogram] = field(repr=False, default_factory=list)
    acceptance_rate: float | None = None
    fallback_fraction: float | None = None

    def report(self) -> dict:
        """Scalar summary as a plain dict."""
        keys = ("n_samples", "mean_lambda", "sd_lambda", "mean_I", "sd_I", "corr_lambda_I",
                "corr_defined", "mean_alpha", "sd_alpha", "acceptance_rate", "fallback_fraction")
        out = {k: getattr(self, k) for k in keys}
        out["conditionals"] = [
            {"I_lo": c.I_lo, "I_hi": c.I_hi, "count": c.hist.count,
             "low_confidence": c.hist.low_confidence, "empty": c.empty}
            for c in self.conditionals]
        return out


def _hist(x: np.ndarray, bins: int, edges=None) -> Histogram:
    if edges is None:
        lo, hi = float(x.min()), float(x.max())
        if lo == hi:
            pad = 0.5 * abs(lo) * 1e-9 or 0.5
            lo, hi = lo - pad, hi + pad
        edges = np.linspace(lo, hi, bins + 1)
    counts, edges = np.histogram(x, bins=edges)
    n = int(counts.sum())
    density = counts / (n * np.diff(edges)) if n else np.zeros(len(edges) - 1)
    return Histogram(edges=edges, density=density, count=n,
                     low_confidence=n < LOW_CONFIDENCE_COUNT)


def default_windows(mean_I: float, sd_I: float) -> list[tuple[float, float]]:
    """Two windows of width sd/2 centred at mean -/+ one sd."""
    half = 0.25 * sd_I
    return [(mean_I - sd_I - half, mean_I - sd_I + half), (mean_I + sd_I - half, mean_I + sd_I + half)]


def summarize(chain, heat_capacity: float, bins: int = 100, windows=None,
              chunk: int = 100_000) -> PosteriorSummary:
    """Summarize samples of theta (a Chain or an (n, 2) array) in (lambda, I) space.

    ``heat_capacity`` is rho*c_p, used for the diffusivity alpha = lambda/(rho c_p).
    ``windows`` lists (I_lo, I_hi) conditioning intervals; default two windows
    around mean_I -/+ sd_I.
    """
    theta = np.asarray(getattr(chain, "samples", chain), dtype=float)
    if theta.ndim != 2 or theta.shape[1] != 2 or len(theta) == 0:
        raise InvalidParameterError("cannot summarize an empty chain")
    acc = MomentAccumulator(2)
    for start in range(0, len(theta), chunk):
        acc.update(np.exp(theta[start:start + chunk]))
    mean_lam, mean_I = acc.mean
    var = np.diag(acc.cov).clip(min=0.0)
    sd_lam, sd_I = np.sqrt(var)
    corr_defined = bool(var[0] > 0 and var[1] > 0)
    corr = float(acc.cov[0, 1] / math.sqrt(var[0] * var[1])) if corr_defined else 0.0
    corr = max(-1.0, min(1.0, corr))

    lam = np.exp(theta[:, 0])
    I = np.exp(theta[:, 1])
    h_lam = _hist(lam, bins)
    h_I = _hist(I, bins)
    joint, ex, ey = np.histogram2d(lam, I, bins=[h_lam.edges, h_I.edges], density=True)

    if windows is None:
        windows = default_windows(mean_I, sd_I) if sd_I > 0 else []
    conds = []
    for lo, hi in windows:
        sel = lam[(I >= lo) & (I < hi)]
        h = _hist(sel, bins, edges=h_lam.edges)
        conds.append(ConditionalHistogram(float(lo), float(hi), h, empty=h.count == 0))

    rate = getattr(chain, "acceptance_rate", None)
    fb = None
    if hasattr(chain, "proposed") and chain.proposed:
        fb = chain.fallback_count / chain.proposed
    return PosteriorSummary(
        n_samples=len(theta), mean_lambda=float(mean_lam), sd_lambda=float(sd_lam),
        mean_I=float(mean_I), sd_I=float(sd_I), corr_lambda_I=corr, corr_defined=corr_defined,
        mean_alpha=float(mean_lam) / heat_capacity, sd_alpha=float(sd_lam) / heat_capacity,
        hist_lambda=h_lam, hist_I=h_I, joint_edges=(ex, ey), joint_density=joint,
        conditionals=conds, acceptance_rate=rate, fallback_fraction=fb)


def posterior_mean_thermogram(summary: PosteriorSummary, target) -> tuple[Thermogram, bool]:
    """Model thermogram at theta = ln(posterior means), with the branch flag.

    ``target`` is a LogTarget; its surrogate is used in-box, else the plain solver.
    """
    theta = (math.log(summary.mean_lambda), math.log(summary.mean_I))
    temps, used_surrogate = target.model(theta)
    return Thermogram(target.data.times, np.asarray(temps, dtype=float)), used_surrogate
