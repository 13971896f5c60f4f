"""Bootstrap confidence intervals over draws.

Replicates resample whole rows of a bundle, either independently or in
non-overlapping contiguous blocks (the right scheme for autocorrelated
chains), recompute the statistic of interest on each replicate, and report
an empirical-quantile interval.

Every replicate derives its random stream from (seed, replicate index) with a
fixed 64-bit mix, so results do not depend on execution order or worker
count.  The replicate statistics are computed from row-use counts against
pre-centered columns rather than by materializing each resampled bundle;
this is algebraically identical to resample-then-estimate (the tests verify
agreement with the literal procedure) and turns the hot loop into matrix
products.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .core import DrawBundle, NumericalError, QoiSpec, ValidationError, _as_float_array, validate_index_set
from .estimator import _DEGENERATE_VARIANCE

__all__ = [
    "BootstrapConfig",
    "IntervalResult",
    "quantile",
    "substream_seed",
    "block_resample",
    "row_resample",
    "replicate_influences",
    "amip_deltas",
    "ci_for_amip",
    "ci_for_sum_of_influence",
    "ci_for_posterior_mean",
    "clopper_pearson",
]

_MASK64 = (1 << 64) - 1
_RESAMPLE_MODES = ("iid", "block")


@dataclass(frozen=True)
class BootstrapConfig:
    """Replication plan: B replicates, block length L, nominal level eta.

    mode "iid" resamples rows independently; "block" resamples floor(S/L)
    non-overlapping contiguous blocks with replacement (trailing rows beyond
    the last full block never enter a replicate).
    """

    seed: int
    B: int = 200
    L: int = 10
    eta: float = 0.95
    mode: str = "block"

    def __post_init__(self):
        if not (isinstance(self.seed, (int, np.integer)) and 0 <= self.seed <= _MASK64):
            raise ValidationError(f"seed must be a 64-bit unsigned integer, got {self.seed!r}")
        if not (isinstance(self.B, (int, np.integer)) and self.B >= 1):
            raise ValidationError(f"B must be an integer >= 1, got {self.B!r}")
        if not (isinstance(self.L, (int, np.integer)) and self.L >= 1):
            raise ValidationError(f"L must be an integer >= 1, got {self.L!r}")
        if not (isinstance(self.eta, (int, float)) and 0.0 < self.eta < 1.0):
            raise ValidationError(f"eta must lie strictly between 0 and 1, got {self.eta!r}")
        if self.mode not in _RESAMPLE_MODES:
            raise ValidationError(f"mode must be one of {_RESAMPLE_MODES}, got {self.mode!r}")
        object.__setattr__(self, "seed", int(self.seed))
        object.__setattr__(self, "B", int(self.B))
        object.__setattr__(self, "L", int(self.L))
        object.__setattr__(self, "eta", float(self.eta))


@dataclass(frozen=True)
class IntervalResult:
    """Empirical-quantile interval with the replicate values that produced it."""

    lb: float
    ub: float
    replicate_values: np.ndarray

    def __post_init__(self):
        values = _as_float_array(self.replicate_values, "replicate_values", 1)
        values = values.copy()
        values.setflags(write=False)
        object.__setattr__(self, "replicate_values", values)
        if not self.lb <= self.ub:
            raise ValidationError(f"lb {self.lb} exceeds ub {self.ub}")

    @property
    def width(self) -> float:
        return self.ub - self.lb

    def contains(self, value: float) -> bool:
        return self.lb <= value <= self.ub


def quantile(values, p: float) -> float:
    """Linear-interpolation quantile of the order statistics.

    With n sorted values and h = (n - 1) * p, returns
    x[floor(h)] + (h - floor(h)) * (x[floor(h) + 1] - x[floor(h)]).
    """
    values = _as_float_array(values, "values", 1)
    if values.shape[0] == 0:
        raise ValidationError("cannot take a quantile of an empty sequence")
    if not (isinstance(p, (int, float)) and 0.0 <= p <= 1.0):
        raise ValidationError(f"p must lie in [0, 1], got {p!r}")
    ordered = np.sort(values)
    h = (ordered.shape[0] - 1) * float(p)
    lo = math.floor(h)
    if lo == ordered.shape[0] - 1:
        return float(ordered[-1])
    return float(ordered[lo] + (h - lo) * (ordered[lo + 1] - ordered[lo]))


def substream_seed(seed: int, index: int) -> int:
    """Derived 64-bit seed for replicate or chain `index` (splitmix64 step).

    The golden-ratio increment times (index + 1) is added to the base seed and
    the sum passed through the splitmix64 finalizer, so streams for different
    indices are decorrelated and independent of evaluation order.
    """
    z = (seed + (index + 1) * 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def row_resample(bundle: DrawBundle, rng: np.random.Generator) -> DrawBundle:
    """Vanilla bootstrap: S rows drawn uniformly with replacement."""
    s = bundle.n_draws
    rows = rng.integers(0, s, size=s)
    return DrawBundle(
        g_values=bundle.g_values[rows],
        loglik=bundle.loglik[rows],
        sampling_kind=bundle.sampling_kind,
    )


def block_resample(bundle: DrawBundle, L: int, rng: np.random.Generator) -> DrawBundle:
    """Non-overlapping block bootstrap: M = floor(S/L) contiguous blocks.

    Draws M block indices uniformly with replacement and concatenates the
    blocks, so rows that were adjacent within a block stay adjacent.  The
    output has exactly M * L rows; trailing source rows beyond the last full
    block are never used.
    """
    if not (isinstance(L, (int, np.integer)) and 1 <= L <= bundle.n_draws):
        raise ValidationError(f"block length must lie in 1..{bundle.n_draws}, got {L!r}")
    m = bundle.n_draws // int(L)
    blocks = rng.integers(0, m, size=m)
    rows = (blocks[:, None] * int(L) + np.arange(int(L))).reshape(-1)
    return DrawBundle(
        g_values=bundle.g_values[rows],
        loglik=bundle.loglik[rows],
        sampling_kind=bundle.sampling_kind,
    )


def _replicate_row_counts(cfg: BootstrapConfig, n_rows: int) -> tuple[np.ndarray, int]:
    """Row-use counts for every replicate: a (B, S') matrix and the row count S'.

    Consumes exactly one rng.integers call per replicate, the same call the
    literal resamplers make, so count-based statistics see identical draws.
    """
    if cfg.mode == "iid":
        counts = np.empty((cfg.B, n_rows))
        for b in range(cfg.B):
            rng = np.random.default_rng(substream_seed(cfg.seed, b))
            rows = rng.integers(0, n_rows, size=n_rows)
            counts[b] = np.bincount(rows, minlength=n_rows)
        return counts, n_rows
    if cfg.L > n_rows:
        raise ValidationError(f"block length {cfg.L} exceeds the {n_rows} available draws")
    m = n_rows // cfg.L
    block_counts = np.empty((cfg.B, m))
    for b in range(cfg.B):
        rng = np.random.default_rng(substream_seed(cfg.seed, b))
        blocks = rng.integers(0, m, size=m)
        block_counts[b] = np.bincount(blocks, minlength=m)
    return np.repeat(block_counts, cfg.L, axis=1), m * cfg.L


def replicate_influences(
    bundle: DrawBundle,
    qoi: QoiSpec,
    cfg: BootstrapConfig,
    columns: np.ndarray | None = None,
) -> np.ndarray:
    """Per-replicate influence estimates, shape (B, N) (or (B, len(columns))).

    Equals influence_estimates run on each materialized resample, computed
    instead from row-use counts against columns centered at the full-bundle
    means.  `columns` (0-based) restricts the loglik columns when only a few
    influences are needed.
    """
    counts, s_eff = _replicate_row_counts(cfg, bundle.n_draws)
    g = bundle.g_values[:s_eff]
    ll = bundle.loglik[:s_eff] if columns is None else bundle.loglik[:s_eff, columns]

    g0 = g - g.mean()
    l0 = ll - ll.mean(axis=0)
    w = counts / s_eff

    mg = w @ g0
    ug = w @ l0
    f = (w * g0) @ l0 - mg[:, None] * ug
    if qoi.c2 == 0.0:
        return qoi.c1 * f

    g0sq = g0 * g0
    vz = w @ g0sq
    var = vz - mg * mg
    if np.any(var <= _DEGENERATE_VARIANCE):
        raise NumericalError("a bootstrap replicate has (numerically) constant g draws")
    num = (w * g0sq) @ l0 - vz[:, None] * ug - 2.0 * mg[:, None] * f
    h = num / np.sqrt(var)[:, None]
    return qoi.c1 * f + qoi.c2 * h


def amip_deltas(psi_rows: np.ndarray, budget: int) -> np.ndarray:
    """Worst-case drop sums for each row of influence estimates.

    For each row, sums the `budget` smallest entries that are strictly
    negative and negates; the sorted-prefix rule of the solver, vectorized
    over replicates.
    """
    if budget <= 0:
        return np.zeros(psi_rows.shape[0])
    prefix = np.sort(psi_rows, axis=1)[:, :budget]
    return -np.minimum(prefix, 0.0).sum(axis=1)


def _interval(values: np.ndarray, eta: float) -> IntervalResult:
    lb = quantile(values, (1.0 - eta) / 2.0)
    ub = quantile(values, (1.0 + eta) / 2.0)
    return IntervalResult(lb=lb, ub=ub, replicate_values=values)


def ci_for_amip(bundle: DrawBundle, qoi: QoiSpec, alpha: float, cfg: BootstrapConfig) -> IntervalResult:
    """Bootstrap interval for the worst-case drop effect at fraction alpha.

    Each replicate resamples the draws (per cfg.mode), re-estimates all
    influences, and re-solves the sorted-prefix maximization; the interval is
    the (1 -+ eta)/2 quantile pair of the replicate delta values.
    """
    if not (isinstance(alpha, (int, float)) and 0.0 < alpha < 1.0):
        raise ValidationError(f"alpha must lie strictly between 0 and 1, got {alpha!r}")
    psi_star = replicate_influences(bundle, qoi, cfg)
    budget = math.floor(bundle.n_obs * alpha)
    return _interval(amip_deltas(psi_star, budget), cfg.eta)


def ci_for_sum_of_influence(bundle: DrawBundle, qoi: QoiSpec, I, cfg: BootstrapConfig) -> IntervalResult:
    """Bootstrap interval for the influence sum over a fixed index set (no sorting)."""
    idx = validate_index_set(I, bundle.n_obs)
    columns = np.asarray([i - 1 for i in idx])
    psi_star = replicate_influences(bundle, qoi, cfg, columns=columns)
    return _interval(psi_star.sum(axis=1), cfg.eta)


def ci_for_posterior_mean(bundle: DrawBundle, cfg: BootstrapConfig) -> IntervalResult:
    """Bootstrap interval for the posterior mean estimate mean(g)."""
    counts, s_eff = _replicate_row_counts(cfg, bundle.n_draws)
    g = bundle.g_values[:s_eff]
    means = (counts / s_eff) @ (g - g.mean()) + g.mean()
    return _interval(means, cfg.eta)


def clopper_pearson(successes: int, trials: int, level: float = 0.95) -> tuple[float, float]:
    """Exact binomial interval from beta-distribution quantiles.

    lb = 0 when successes = 0 and ub = 1 when successes = trials; otherwise
    the usual Beta(s, t - s + 1) and Beta(s + 1, t - s) quantiles at
    (1 -+ level)/2.
    """
    if not (isinstance(trials, (int, np.integer)) and trials >= 1):
        raise ValidationError(f"trials must be an integer >= 1, got {trials!r}")
    if not (isinstance(successes, (int, np.integer)) and 0 <= successes <= trials):
        raise ValidationError(f"successes must lie in 0..{trials}, got {successes!r}")
    if not (isinstance(level, (int, float)) and 0.0 < level < 1.0):
        raise ValidationError(f"level must lie strictly between 0 and 1, got {level!r}")
    s, t = int(successes), int(trials)
    lo = (1.0 - level) / 2.0
    hi = (1.0 + level) / 2.0
    lb = 0.0 if s == 0 else float(stats.beta.ppf(lo, s, t - s + 1))
    ub = 1.0 if s == t else float(stats.beta.ppf(hi, s + 1, t - s))
    return lb, ub
