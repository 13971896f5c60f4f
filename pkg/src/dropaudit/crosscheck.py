"""Self-diagnostics: every closed form in the package checked against an
independent route (direct computation, brute force, or Monte Carlo).

Each check returns a row for the CLI's pass/fail table.  Thresholds for the
Monte Carlo rows are standard-error multiples, so a pass is expected with
overwhelming probability under correct code and a fail indicates a defect,
not bad luck.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import digamma, polygamma

from .amip import brute_force_mip, sosie, taylor_predict
from .core import QoiSpec
from .estimator import (
    TripleDistribution,
    asymptotic_cov_estimate,
    brute_force_cov_of_cov,
    exact_cov_of_sample_covariances,
    influence_estimates,
)
from .harness import interpolation_experiment, qoi_influences
from .oracles import (
    NormalGammaModel,
    NormalMeansModel,
    NormalModel,
    normal_drop_errors,
    normal_gamma_sigma_nn,
    normal_influences,
    normal_means_drop_errors,
    normal_means_error_bound,
    normal_means_influences,
    normal_means_weighted_posterior,
    normal_weighted_posterior,
)
from .resample import clopper_pearson, quantile
from .samplers import SamplerConfig, sample_normal_exact, sample_normal_gamma_exact

__all__ = ["CheckRow", "run_cross_checks"]


@dataclass(frozen=True)
class CheckRow:
    name: str
    passed: bool
    detail: str


def _check_normal_drop_formulas(rng) -> CheckRow:
    worst = 0.0
    for _ in range(20):
        n = int(rng.integers(5, 40))
        model = NormalModel(x=rng.normal(0, 3, size=n), sigma=float(rng.uniform(0.5, 2)))
        k = int(rng.integers(1, n - 1))
        drop = tuple(sorted(int(i) + 1 for i in rng.choice(n, size=k, replace=False)))
        err = normal_drop_errors(model, drop)
        w = np.ones(n)
        w[np.asarray(drop) - 1] = 0.0
        mean_dropped, _ = normal_weighted_posterior(model, w)
        mean_full, _ = normal_weighted_posterior(model, np.ones(n))
        psi = normal_influences(model)
        linear = mean_full - psi[np.asarray(drop) - 1].sum()
        worst = max(worst, abs(err.err_first - (mean_dropped - linear)))
        worst = max(worst, abs(err.err_zeroth - (mean_dropped - mean_full)))
        worst = max(worst, abs(err.err_first - (k / n) * err.err_zeroth))
    return CheckRow(
        name="normal drop-error formulas vs direct refit",
        passed=worst < 1e-12,
        detail=f"max |formula - direct| = {worst:.3e} over 20 instances (tol 1e-12)",
    )


def _check_normal_means_identities(rng) -> CheckRow:
    worst = 0.0
    worst_decomp = 0.0
    for _ in range(10):
        n_groups = int(rng.integers(3, 6))
        sizes = rng.integers(3, 8, size=n_groups)
        group = np.repeat(np.arange(n_groups), sizes)
        model = NormalMeansModel(
            x=rng.normal(0, 1, size=group.size) + np.repeat(rng.normal(0, 1, n_groups), sizes),
            group=group,
            sigma=float(rng.uniform(0.7, 1.5)),
            tau=float(rng.uniform(0.7, 1.5)),
        )
        k_label = int(rng.integers(0, n_groups))
        members = np.flatnonzero(model.group_mask(k_label)) + 1
        size = int(rng.integers(1, len(members)))
        drop = tuple(sorted(int(i) for i in rng.choice(members, size=size, replace=False)))
        rep = normal_means_drop_errors(model, drop)
        w = np.ones(model.n_obs)
        w[np.asarray(drop) - 1] = 0.0
        mean_dropped = normal_means_weighted_posterior(model, w)
        mean_full = normal_means_weighted_posterior(model, np.ones(model.n_obs))
        psi = normal_means_influences(model, verify=False)
        linear = mean_full - psi[np.asarray(drop) - 1].sum()
        worst = max(worst, abs(rep.direct.err_first - (mean_dropped - linear)))
        worst = max(worst, abs(rep.direct.err_zeroth - (mean_dropped - mean_full)))
        worst_decomp = max(worst_decomp, abs(rep.diff_first), abs(rep.diff_zeroth))
    return CheckRow(
        name="grouped-model drop errors vs direct refit",
        passed=worst < 1e-12,
        detail=(
            f"max |direct identity gap| = {worst:.3e} (tol 1e-12); "
            f"printed-decomposition discrepancy = {worst_decomp:.3e} (reported, not gated)"
        ),
    )


def _check_normal_means_bound(rng) -> CheckRow:
    checked = 0
    violations = 0
    while checked < 25:
        sizes = rng.integers(4, 9, size=4)
        group = np.repeat(np.arange(4), sizes)
        model = NormalMeansModel(
            x=rng.normal(0, 1, size=group.size),
            group=group,
            sigma=1.0,
            tau=1.0,
        )
        members = np.flatnonzero(model.group_mask(0)) + 1
        drop = tuple(int(i) for i in members[:2])
        try:
            bound = normal_means_error_bound(model, drop)
        except Exception:
            continue
        rep = normal_means_drop_errors(model, drop)
        checked += 1
        if abs(rep.direct.err_first) > bound:
            violations += 1
    return CheckRow(
        name="grouped-model error bound dominates |err_first|",
        passed=violations == 0,
        detail=f"{violations} violations over {checked} admissible instances",
    )


def _check_cov_of_cov(rng) -> CheckRow:
    worst = 0.0
    for _ in range(10):
        k = int(rng.integers(2, 4))
        support = rng.normal(0, 1, size=(k, 3))
        probs = rng.dirichlet(np.ones(k))
        dist = TripleDistribution(support=support, probs=probs)
        for s in (2, 3):
            exact = exact_cov_of_sample_covariances(dist, s)
            brute = brute_force_cov_of_cov(dist, s)
            worst = max(worst, abs(exact - brute))
    rad = TripleDistribution(
        support=np.array([[1.0, 1.0, 1.0], [-1.0, -1.0, -1.0]]), probs=np.array([0.5, 0.5])
    )
    rad_err = abs(exact_cov_of_sample_covariances(rad, 2) - 0.25)
    passed = worst < 1e-12 and rad_err < 1e-15
    return CheckRow(
        name="covariance-of-covariances formula vs enumeration",
        passed=passed,
        detail=f"max |exact - brute| = {worst:.3e} (tol 1e-12); Rademacher S=2 error {rad_err:.1e}",
    )


def _check_sosie(rng) -> CheckRow:
    mismatches = 0
    for _ in range(20):
        n = int(rng.integers(2, 11))
        psi = rng.normal(0, 1, size=n)
        if rng.random() < 0.3:
            psi[rng.integers(0, n)] = psi[0]
        for budget in range(1, n):
            alpha = (budget + 0.5) / n
            fast = sosie(psi, alpha)
            slow = brute_force_mip(psi, alpha)
            if abs(fast.delta_hat - slow.delta_hat) > 1e-12:
                mismatches += 1
    return CheckRow(
        name="sorted-prefix solver vs exhaustive search",
        passed=mismatches == 0,
        detail=f"{mismatches} delta mismatches over 20 random vectors, all budgets",
    )


def _check_estimator_normal(rng) -> CheckRow:
    model = NormalModel(x=rng.normal(1.0, 2.0, size=25), sigma=1.2)
    draws = 40_000
    bundle = sample_normal_exact(model, SamplerConfig(draws=draws, seed=int(rng.integers(2**32))))
    psi_hat = influence_estimates(bundle, QoiSpec(c1=1.0, c2=0.0))
    psi = normal_influences(model)
    worst_sigmas = 0.0
    for n in range(model.n_obs):
        se = math.sqrt(asymptotic_cov_estimate(bundle, n + 1, n + 1).sigma_ij / draws)
        worst_sigmas = max(worst_sigmas, abs(psi_hat[n] - psi[n]) / se)
    return CheckRow(
        name="influence estimator vs normal-model oracle",
        passed=worst_sigmas < 5.0,
        detail=f"max |psi_hat - psi| = {worst_sigmas:.2f} standard errors over N=25 (gate 5)",
    )


def _check_estimator_normal_gamma(rng) -> CheckRow:
    model = NormalGammaModel(
        x=rng.normal(0.0, 1.0, size=20), prior_shape=2.0, prior_rate=2.0
    )
    draws = 40_000
    bundle = sample_normal_gamma_exact(
        model, SamplerConfig(draws=draws, seed=int(rng.integers(2**32)), kind="normal_gamma_exact")
    )
    psi_hat = influence_estimates(bundle, QoiSpec(c1=1.0, c2=0.0))
    xbar = model.x.mean()
    worst_sigmas = 0.0
    for n in range(model.n_obs):
        se = math.sqrt(asymptotic_cov_estimate(bundle, n + 1, n + 1).sigma_ij / draws)
        worst_sigmas = max(worst_sigmas, abs(psi_hat[n] - (model.x[n] - xbar) / model.n_obs) / se)
    return CheckRow(
        name="influence estimator vs normal-gamma oracle",
        passed=worst_sigmas < 5.0,
        detail=f"max |psi_hat - psi| = {worst_sigmas:.2f} standard errors over N=20 (gate 5)",
    )


def _check_interpolation_identity(rng) -> CheckRow:
    model = NormalModel(x=rng.normal(-1.0, 2.0, size=80), sigma=1.0)
    report = interpolation_experiment(model)
    gap = report.refit[-1] - report.linear[-1]
    err = normal_drop_errors(model, report.dropped).err_first
    diff = abs(gap - err)
    return CheckRow(
        name="interpolation endpoint gap vs first-order error formula",
        passed=diff < 1e-12,
        detail=f"|gap - err_first| = {diff:.3e} (tol 1e-12)",
    )


def _check_taylor_consistency(rng) -> CheckRow:
    # removing the selected set entirely must reproduce phi_full + delta_hat
    model = NormalModel(x=rng.normal(0.5, 1.5, size=60), sigma=1.0)
    psi = qoi_influences(model, QoiSpec(c1=1.0, c2=0.0))
    solved = sosie(psi, 0.1)
    w = np.ones(model.n_obs)
    w[np.asarray(solved.dropped, dtype=int) - 1] = 0.0
    mean_full, _ = normal_weighted_posterior(model, np.ones(model.n_obs))
    predicted = taylor_predict(mean_full, psi, w)
    diff = abs(predicted - (mean_full + solved.delta_hat))
    return CheckRow(
        name="linear prediction consistent with solver delta",
        passed=diff < 1e-12,
        detail=f"|taylor - (phi_full + delta_hat)| = {diff:.3e} (tol 1e-12)",
    )


def _check_sigma_nn_quadrature(rng) -> CheckRow:
    model = NormalGammaModel(x=rng.normal(0, 1, size=24), prior_shape=3.0, prior_rate=1.5)
    # derivative-of-digamma closed forms for the quadrature moments
    from .oracles import normal_gamma_posterior

    post = normal_gamma_posterior(model)
    a, r = post.shape, post.rate
    n = model.n_obs
    d = model.x - model.x.mean()
    e_inv = r / (a - 1.0)
    e_inv_dev2 = a / (r * (a - 1.0))
    e_inv_dev = -1.0 / (a - 1.0)
    e_inv_logdev = e_inv * (digamma(a - 1.0) - digamma(a))
    e_inv_logdev2 = e_inv * (polygamma(1, a - 1.0) + (digamma(a - 1.0) - digamma(a)) ** 2)
    d1 = e_inv_dev2 / (4.0 * n)
    d2 = (2.0 + e_inv_dev) / n**2 + (a / r) * e_inv_logdev / (2.0 * n)
    d3 = e_inv_logdev2 / (4.0 * n) - e_inv_logdev / n**2 + 5.0 * e_inv / (2.0 * n**3)
    worst = 0.0
    for probe in (0, n // 2, n - 1):
        closed = d1 * d[probe] ** 4 + d2 * d[probe] ** 2 + d3
        quad = normal_gamma_sigma_nn(model, probe + 1)
        worst = max(worst, abs(quad - closed) / max(abs(closed), 1e-300))
    return CheckRow(
        name="asymptotic variance quadrature vs digamma closed forms",
        passed=worst < 1e-7,
        detail=f"max relative gap = {worst:.3e} over 3 probes (tol 1e-7)",
    )


def _check_quantile(rng) -> CheckRow:
    worst = 0.0
    for _ in range(20):
        values = rng.normal(0, 1, size=int(rng.integers(2, 50)))
        p = float(rng.uniform(0, 1))
        worst = max(worst, abs(quantile(values, p) - float(np.quantile(values, p))))
    return CheckRow(
        name="quantile rule vs reference implementation",
        passed=worst < 1e-12,
        detail=f"max |difference| = {worst:.3e} over 20 random cases (tol 1e-12)",
    )


def _check_clopper_pearson(rng) -> CheckRow:
    worst = 0.0
    lb0, ub0 = clopper_pearson(0, 10)
    worst = max(worst, abs(lb0), abs(ub0 - (1.0 - 0.025 ** (1 / 10))))
    lbn, ubn = clopper_pearson(10, 10)
    worst = max(worst, abs(ubn - 1.0), abs(lbn - 0.025 ** (1 / 10)))
    contain_fail = 0
    for _ in range(20):
        t = int(rng.integers(1, 200))
        s = int(rng.integers(0, t + 1))
        lb, ub = clopper_pearson(s, t)
        if not lb <= s / t <= ub:
            contain_fail += 1
    passed = worst < 1e-12 and contain_fail == 0
    return CheckRow(
        name="binomial interval closed forms and containment",
        passed=passed,
        detail=f"boundary error {worst:.1e} (tol 1e-12); {contain_fail} containment failures",
    )


def run_cross_checks(seed: int = 0) -> list[CheckRow]:
    """Run every oracle-vs-estimator and formula-vs-direct comparison."""
    rng = np.random.default_rng(seed)
    return [
        _check_normal_drop_formulas(rng),
        _check_normal_means_identities(rng),
        _check_normal_means_bound(rng),
        _check_cov_of_cov(rng),
        _check_sosie(rng),
        _check_estimator_normal(rng),
        _check_estimator_normal_gamma(rng),
        _check_interpolation_identity(rng),
        _check_taylor_consistency(rng),
        _check_sigma_nn_quadrature(rng),
        _check_quantile(rng),
        _check_clopper_pearson(rng),
    ]
