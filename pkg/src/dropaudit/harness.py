"""Experiment harness: coverage of the bootstrap intervals, the
interpolation-path linearity check, and the three-way robustness verdict.

The coverage experiments use many independent chains: per-chain influence
estimates are averaged into a low-noise proxy for the true influences, and the
per-chain intervals are scored against the drop effect implied by that proxy.
The interpolation experiment exploits the conjugate models' closed-form
weighted posteriors, so no re-sampling is needed along the path.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .amip import sosie, taylor_predict
from .core import (
    Z_975,
    DrawBundle,
    QoiSpec,
    ValidationError,
    resolve_qoi_rule,
    validate_index_set,
)
from .estimator import influence_estimates
from .oracles import (
    NormalGammaModel,
    NormalMeansModel,
    NormalModel,
    normal_gamma_weighted_posterior,
    normal_influences,
    normal_means_influences,
    normal_means_posterior_lambda,
    normal_means_weighted_posterior,
    normal_weighted_posterior,
)
from .resample import (
    BootstrapConfig,
    IntervalResult,
    amip_deltas,
    clopper_pearson,
    quantile,
    replicate_influences,
    substream_seed,
)
from .samplers import (
    SamplerConfig,
    sample_metropolis,
    sample_normal_exact,
    sample_normal_gamma_exact,
    sample_normal_means_exact,
)

__all__ = [
    "Verdict",
    "verdict",
    "CoverageRecord",
    "CoverageReport",
    "InterpolationReport",
    "default_alpha_grid",
    "coverage_experiment",
    "soi_coverage_experiment",
    "interpolation_experiment",
    "DEFAULT_ZETA_GRID",
    "weighted_qoi",
    "qoi_influences",
    "oracle_mean_sd",
]

# published discretization of [0, 1] for the interpolation path
DEFAULT_ZETA_GRID = (
    0.0, 0.0010, 0.0016, 0.0027, 0.0044, 0.0072, 0.0118, 0.0193,
    0.0316, 0.0518, 0.0848, 0.1389, 0.2276, 0.3728, 0.6105, 1.0,
)

_OUTCOMES = ("non_robust", "robust", "abstain")


@dataclass(frozen=True)
class Verdict:
    """Three-way robustness decision from shifting phi by the CI endpoints."""

    outcome: str
    phi_full: float
    lb_shifted: float
    ub_shifted: float

    def __post_init__(self):
        if self.outcome not in _OUTCOMES:
            raise ValidationError(f"outcome must be one of {_OUTCOMES}, got {self.outcome!r}")
        if not self.lb_shifted <= self.ub_shifted:
            raise ValidationError("shifted endpoints are out of order")


def verdict(phi_full: float, interval: IntervalResult) -> Verdict:
    """Case analysis of (phi_full + lb, phi_full + ub) against zero.

    Requires the convention phi(1_N) < 0: the full-data conclusion holds and
    dropping data can only push phi upward by a nonnegative delta.
    """
    if not (isinstance(phi_full, (int, float)) and math.isfinite(phi_full)):
        raise ValidationError(f"phi_full must be a finite number, got {phi_full!r}")
    if phi_full >= 0.0:
        raise ValidationError(
            "phi_full must be negative under the decision convention; "
            "renegotiate the QoI so the full-data conclusion maps below zero"
        )
    lo = phi_full + interval.lb
    hi = phi_full + interval.ub
    if lo > 0.0:
        outcome = "non_robust"
    elif hi < 0.0:
        outcome = "robust"
    else:
        outcome = "abstain"
    return Verdict(outcome=outcome, phi_full=float(phi_full), lb_shifted=lo, ub_shifted=hi)


def default_alpha_grid(n_obs: int) -> tuple[float, ...]:
    """Ten log-spaced drop fractions from 0.1% to 1%, plus 1/N, deduplicated."""
    if not (isinstance(n_obs, (int, np.integer)) and n_obs >= 2):
        raise ValidationError(f"n_obs must be an integer >= 2, got {n_obs!r}")
    grid = list(np.power(10.0, np.linspace(-3.0, -2.0, 10))) + [1.0 / n_obs]
    return tuple(sorted(set(float(a) for a in grid)))


@dataclass(frozen=True)
class CoverageRecord:
    """Per-alpha coverage outcome; optional fields are None when the alpha was skipped."""

    alpha: float
    ground_truth_delta: float | None
    coverage_point: float | None
    coverage_interval: tuple[float, float] | None
    J: int
    selected: tuple[int, ...]
    note: str | None = None

    def __post_init__(self):
        if self.coverage_point is not None:
            if not 0.0 <= self.coverage_point <= 1.0:
                raise ValidationError("coverage_point must lie in [0, 1]")
            lb, ub = self.coverage_interval
            if not lb <= self.coverage_point <= ub:
                raise ValidationError("coverage_interval must contain coverage_point")


@dataclass(frozen=True)
class CoverageReport:
    """Coverage records for each alpha plus the averaged influences they scored against."""

    records: tuple[CoverageRecord, ...]
    averaged_influences: np.ndarray
    draws_per_chain: int

    def __post_init__(self):
        psi = np.asarray(self.averaged_influences, dtype=float)
        psi.setflags(write=False)
        object.__setattr__(self, "averaged_influences", psi)


def _sample_bundle(model, cfg: SamplerConfig) -> DrawBundle:
    if cfg.kind == "normal_exact":
        return sample_normal_exact(model, cfg)
    if cfg.kind == "metropolis":
        return sample_metropolis(model, cfg)
    if cfg.kind == "normal_means_exact":
        return sample_normal_means_exact(model, cfg)
    return sample_normal_gamma_exact(model, cfg)


def oracle_mean_sd(model) -> tuple[float, float]:
    """Exact full-data posterior mean and sd of the location parameter."""
    if isinstance(model, NormalModel):
        mean, var = normal_weighted_posterior(model, np.ones(model.n_obs))
        return mean, math.sqrt(var)
    if isinstance(model, NormalMeansModel):
        w = np.ones(model.n_obs)
        mean = normal_means_weighted_posterior(model, w)
        lam = normal_means_posterior_lambda(model, w)
        return mean, 1.0 / math.sqrt(lam)
    if isinstance(model, NormalGammaModel):
        post = normal_gamma_weighted_posterior(model, np.ones(model.n_obs))
        if post.shape <= 1.0:
            raise ValidationError("posterior sd undefined: posterior shape must exceed 1")
        var = post.rate / ((post.shape - 1.0) * post.n_weight)
        return post.mean_location, math.sqrt(var)
    raise ValidationError(f"unsupported model type {type(model).__name__!r}")


def _resolve_preset(model, preset: str, z: float | None) -> QoiSpec:
    mean, sd = oracle_mean_sd(model)
    z_used = Z_975 if z is None else z
    c1, c2 = resolve_qoi_rule(preset, mean, sd, z=z_used)
    return QoiSpec(c1=c1, c2=c2, z=z_used, preset=preset)


def _chain_configs(sampler_cfg: SamplerConfig, bootstrap_cfg: BootstrapConfig, j: int):
    chain_sampler = replace(sampler_cfg, seed=substream_seed(sampler_cfg.seed, j))
    chain_bootstrap = replace(bootstrap_cfg, seed=substream_seed(bootstrap_cfg.seed, j))
    return chain_sampler, chain_bootstrap


def _run_chains(worker, J: int, threads: int | None) -> list:
    """Run worker(j) for j = 0..J-1 and collect results in chain order."""
    if threads is not None and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(worker, range(J)))
    return [worker(j) for j in range(J)]


def _validate_experiment_args(alphas, J):
    if not (isinstance(J, (int, np.integer)) and J >= 2):
        raise ValidationError(f"J must be an integer >= 2 (a single chain cannot average), got {J!r}")
    alphas = tuple(float(a) for a in alphas)
    for a in alphas:
        if not 0.0 < a < 1.0:
            raise ValidationError(f"every alpha must lie strictly between 0 and 1, got {a}")
    return alphas, int(J)


def coverage_experiment(
    model,
    preset: str,
    sampler_cfg: SamplerConfig,
    bootstrap_cfg: BootstrapConfig,
    alphas=None,
    J: int = 200,
    z: float | None = None,
    threads: int | None = None,
) -> CoverageReport:
    """How often per-chain drop-effect intervals cover the averaged-chain value.

    Runs J independent chains (chain j reseeds both configs with substream j).
    Averaging the per-chain influence estimates gives a low-noise stand-in for
    the truth; its sorted-prefix drop effect at each alpha is scored against
    each chain's bootstrap interval, with a 95% Clopper-Pearson interval on
    the resulting hit fraction.  The QoI preset is resolved once, against the
    model's exact posterior, so every chain audits the same quantity.
    """
    alphas = default_alpha_grid(model.n_obs) if alphas is None else alphas
    alphas, J = _validate_experiment_args(alphas, J)
    qoi = _resolve_preset(model, preset, z)
    budgets = [math.floor(model.n_obs * a) for a in alphas]

    def worker(j: int):
        chain_sampler, chain_bootstrap = _chain_configs(sampler_cfg, bootstrap_cfg, j)
        bundle = _sample_bundle(model, chain_sampler)
        psi_hat = influence_estimates(bundle, qoi)
        psi_star = replicate_influences(bundle, qoi, chain_bootstrap)
        intervals = []
        for budget in budgets:
            deltas = amip_deltas(psi_star, budget)
            eta = chain_bootstrap.eta
            intervals.append((quantile(deltas, (1.0 - eta) / 2.0), quantile(deltas, (1.0 + eta) / 2.0)))
        return psi_hat, intervals

    results = _run_chains(worker, J, threads)
    psi_tilde = np.mean([psi for psi, _ in results], axis=0)

    records = []
    for i, alpha in enumerate(alphas):
        solved = sosie(psi_tilde, alpha)
        hits = sum(1 for _, ivals in results if ivals[i][0] <= solved.delta_hat <= ivals[i][1])
        records.append(
            CoverageRecord(
                alpha=alpha,
                ground_truth_delta=solved.delta_hat,
                coverage_point=hits / J,
                coverage_interval=clopper_pearson(hits, J),
                J=J,
                selected=solved.dropped,
            )
        )
    return CoverageReport(
        records=tuple(records),
        averaged_influences=psi_tilde,
        draws_per_chain=sampler_cfg.draws,
    )


def soi_coverage_experiment(
    model,
    preset: str,
    sampler_cfg: SamplerConfig,
    bootstrap_cfg: BootstrapConfig,
    alphas=None,
    J: int = 200,
    z: float | None = None,
    threads: int | None = None,
    index_set=None,
) -> CoverageReport:
    """Coverage for the influence sum over a fixed index set (no sorting).

    Phase one runs J chains (substreams 0..J-1, matching coverage_experiment)
    purely to average influences; the set to audit at each alpha is the one
    the averaged influences select, or `index_set` at every alpha when given.
    Phase two runs J fresh chains (substreams J..2J-1) and scores their
    interval for the fixed-set sum against the averaged-chain sum.  Alphas
    whose averaged influences select nothing are skipped with a note.
    """
    alphas = default_alpha_grid(model.n_obs) if alphas is None else alphas
    alphas, J = _validate_experiment_args(alphas, J)
    qoi = _resolve_preset(model, preset, z)
    if index_set is not None:
        index_set = validate_index_set(index_set, model.n_obs)

    def averaging_worker(j: int):
        chain_sampler, _ = _chain_configs(sampler_cfg, bootstrap_cfg, j)
        return influence_estimates(_sample_bundle(model, chain_sampler), qoi)

    psi_tilde = np.mean(_run_chains(averaging_worker, J, threads), axis=0)

    if index_set is not None:
        selections = [index_set for _ in alphas]
    else:
        selections = [sosie(psi_tilde, a).dropped for a in alphas]
    live = [i for i, sel in enumerate(selections) if sel]
    col_arrays = {i: np.asarray(selections[i]) - 1 for i in live}

    def interval_worker(j: int):
        chain_sampler, chain_bootstrap = _chain_configs(sampler_cfg, bootstrap_cfg, J + j)
        bundle = _sample_bundle(model, chain_sampler)
        psi_star = replicate_influences(bundle, qoi, chain_bootstrap)
        eta = chain_bootstrap.eta
        out = {}
        for i in live:
            sums = psi_star[:, col_arrays[i]].sum(axis=1)
            out[i] = (quantile(sums, (1.0 - eta) / 2.0), quantile(sums, (1.0 + eta) / 2.0))
        return out

    interval_sets = _run_chains(interval_worker, J, threads) if live else []

    records = []
    for i, alpha in enumerate(alphas):
        if i not in col_arrays:
            records.append(
                CoverageRecord(
                    alpha=alpha,
                    ground_truth_delta=None,
                    coverage_point=None,
                    coverage_interval=None,
                    J=J,
                    selected=(),
                    note="no negative averaged influences at this alpha; nothing to audit",
                )
            )
            continue
        truth = float(psi_tilde[col_arrays[i]].sum())
        hits = sum(1 for ivals in interval_sets if ivals[i][0] <= truth <= ivals[i][1])
        records.append(
            CoverageRecord(
                alpha=alpha,
                ground_truth_delta=truth,
                coverage_point=hits / J,
                coverage_interval=clopper_pearson(hits, J),
                J=J,
                selected=selections[i],
            )
        )
    return CoverageReport(
        records=tuple(records),
        averaged_influences=psi_tilde,
        draws_per_chain=sampler_cfg.draws,
    )


def weighted_qoi(model, qoi: QoiSpec, w) -> float:
    """Exact c1 * mean + c2 * sd of the reweighted posterior."""
    if isinstance(model, NormalModel):
        mean, var = normal_weighted_posterior(model, w)
        return qoi.c1 * mean + qoi.c2 * math.sqrt(var)
    if isinstance(model, NormalMeansModel):
        mean = normal_means_weighted_posterior(model, w)
        if qoi.c2 == 0.0:
            return qoi.c1 * mean
        lam = normal_means_posterior_lambda(model, w)
        return qoi.c1 * mean + qoi.c2 / math.sqrt(lam)
    if isinstance(model, NormalGammaModel):
        post = normal_gamma_weighted_posterior(model, w)
        if qoi.c2 == 0.0:
            return qoi.c1 * post.mean_location
        if post.shape <= 1.0:
            raise ValidationError("posterior sd undefined: posterior shape must exceed 1")
        sd = math.sqrt(post.rate / ((post.shape - 1.0) * post.n_weight))
        return qoi.c1 * post.mean_location + qoi.c2 * sd
    raise ValidationError(f"unsupported model type {type(model).__name__!r}")


def qoi_influences(model, qoi: QoiSpec) -> np.ndarray:
    """Exact per-observation derivative of c1 * mean + c2 * sd at full weights."""
    if isinstance(model, NormalModel):
        psi = qoi.c1 * normal_influences(model)
        if qoi.c2 != 0.0:
            n = model.n_obs
            psi = psi + qoi.c2 * (-model.sigma / (2.0 * n**1.5)) * np.ones(n)
        return psi
    if isinstance(model, NormalMeansModel):
        psi = qoi.c1 * normal_means_influences(model)
        if qoi.c2 != 0.0:
            w = np.ones(model.n_obs)
            lam = normal_means_posterior_lambda(model, w)
            sigma2 = model.sigma**2
            tau2 = model.tau**2
            sd_path = np.empty(model.n_obs)
            for label in model.group_labels:
                mask = model.group_mask(label)
                n_g = mask.sum()
                p_g = 1.0 / (sigma2 / n_g + tau2)
                sd_path[mask] = -0.5 * lam**-1.5 * sigma2 * p_g**2 / n_g**2
            psi = psi + qoi.c2 * sd_path
        return psi
    if isinstance(model, NormalGammaModel):
        if qoi.c2 != 0.0:
            raise ValidationError(
                "sd-path influences are not available for the normal-gamma model; use c2 = 0"
            )
        return qoi.c1 * (model.x - model.x.mean()) / model.n_obs
    raise ValidationError(f"unsupported model type {type(model).__name__!r}")


@dataclass(frozen=True)
class InterpolationReport:
    """Exact refit vs linear prediction along the path from full weights to w*."""

    zeta_grid: tuple[float, ...]
    refit: tuple[float, ...]
    linear: tuple[float, ...]
    alpha_star: float
    dropped: tuple[int, ...]

    def __post_init__(self):
        if not len(self.zeta_grid) == len(self.refit) == len(self.linear):
            raise ValidationError("zeta_grid, refit, and linear must have equal length")


def interpolation_experiment(
    model,
    qoi: QoiSpec | None = None,
    alpha_star: float = 0.05,
    zeta_grid=DEFAULT_ZETA_GRID,
) -> InterpolationReport:
    """Exact weighted-posterior QoI vs its linear prediction along w(zeta).

    w(zeta) scales the weight of the alpha_star worst observations (selected
    by exact influences through the same sorted-prefix solver) down to
    1 - zeta; off the selected set weights stay 1.  zeta = 0 is the full-data
    posterior, zeta = 1 removes the set entirely.  Defaults to the raw
    posterior-mean QoI, for which the zeta = 1 gap is exactly the first-order
    drop error.
    """
    if qoi is None:
        qoi = QoiSpec(c1=1.0, c2=0.0)
    zetas = tuple(float(z) for z in zeta_grid)
    for z in zetas:
        if not 0.0 <= z <= 1.0:
            raise ValidationError(f"every zeta must lie in [0, 1], got {z}")

    psi = qoi_influences(model, qoi)
    solved = sosie(psi, alpha_star)
    dropped = solved.dropped
    cols = np.asarray(dropped, dtype=int) - 1

    n = model.n_obs
    phi_full = weighted_qoi(model, qoi, np.ones(n))
    refit = []
    linear = []
    for z in zetas:
        w = np.ones(n)
        w[cols] = 1.0 - z
        refit.append(weighted_qoi(model, qoi, w))
        linear.append(taylor_predict(phi_full, psi, w))
    return InterpolationReport(
        zeta_grid=zetas,
        refit=tuple(refit),
        linear=tuple(linear),
        alpha_star=float(alpha_star),
        dropped=dropped,
    )
