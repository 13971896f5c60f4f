"""Closed-form conjugate models used as ground truth.

Three models admit exact reweighted posteriors, exact influences, and exact
drop errors, which makes them the reference points for everything the
estimator and the bootstrap produce from draws:

* normal location with known variance,
* grouped normal means with a shared normal prior (known variances),
* normal location with unknown precision under a normal-gamma prior.

Drop errors follow the convention

    err_first(I)  = phi(drop I) - phi(full) + sum_{n in I} psi_n
    err_zeroth(I) = phi(drop I) - phi(full)

where phi is the posterior mean path and psi its exact influences, so
err_first is the residual left after the first-order correction.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate, stats

from .core import (
    NumericalError,
    ValidationError,
    _as_float_array,
    index_set_to_weight,
    validate_index_set,
    validate_weights,
)

__all__ = [
    "NormalModel",
    "NormalMeansModel",
    "NormalGammaModel",
    "DropError",
    "NormalMeansDropReport",
    "NormalGammaPosterior",
    "normal_weighted_posterior",
    "normal_influences",
    "normal_drop_errors",
    "normal_means_weighted_posterior",
    "normal_means_influences",
    "normal_means_drop_errors",
    "normal_means_error_bound",
    "normal_gamma_posterior",
    "normal_gamma_weighted_posterior",
    "normal_gamma_influence",
    "normal_gamma_sigma_nn",
]


@dataclass(frozen=True)
class DropError:
    """Exact zeroth- and first-order errors of dropping an index set."""

    err_first: float
    err_zeroth: float


# ---------------------------------------------------------------------------
# Normal location, known variance
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NormalModel:
    """x_n ~ Normal(mu, sigma^2) with flat prior on mu; sigma known."""

    x: np.ndarray
    sigma: float

    def __post_init__(self):
        x = _as_float_array(self.x, "x", 1)
        if x.shape[0] < 2:
            raise ValidationError("need at least 2 observations")
        if not (isinstance(self.sigma, (int, float)) and self.sigma > 0):
            raise ValidationError(f"sigma must be positive, got {self.sigma!r}")
        x = x.copy()
        x.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "sigma", float(self.sigma))

    @property
    def n_obs(self) -> int:
        return self.x.shape[0]


def normal_weighted_posterior(model: NormalModel, w) -> tuple[float, float]:
    """Posterior of mu under weights w: Normal(sum(w x)/sum(w), sigma^2/sum(w)).

    Returns (mean, variance).
    """
    w = validate_weights(w, model.n_obs)
    total = float(w.sum())
    mean = float(np.dot(w, model.x)) / total
    var = model.sigma**2 / total
    return mean, var


def normal_influences(model: NormalModel) -> np.ndarray:
    """Exact influence of each observation on the posterior mean: (x_n - xbar)/N."""
    return (model.x - model.x.mean()) / model.n_obs


def normal_drop_errors(model: NormalModel, drop) -> DropError:
    """Exact drop errors for the posterior-mean path.

    err_first  = |I|^2 (xbar - xbar_I) / (N (N - |I|))
    err_zeroth = |I|   (xbar - xbar_I) / (N - |I|)

    Both are recomputed directly from the weighted posterior and asserted to
    agree, so a formula slip cannot pass silently.
    """
    idx = validate_index_set(drop, model.n_obs)
    n = model.n_obs
    size = len(idx)
    if size >= n:
        raise ValidationError("cannot drop all observations")
    xbar = float(model.x.mean())
    xbar_drop = float(np.mean([model.x[i - 1] for i in idx]))
    err_first = size**2 * (xbar - xbar_drop) / (n * (n - size))
    err_zeroth = size * (xbar - xbar_drop) / (n - size)

    w = index_set_to_weight(idx, n)
    phi_full, _ = normal_weighted_posterior(model, np.ones(n))
    phi_drop, _ = normal_weighted_posterior(model, w)
    psi = normal_influences(model)
    direct_first = phi_drop - phi_full + float(sum(psi[i - 1] for i in idx))
    direct_zeroth = phi_drop - phi_full
    scale = max(1.0, abs(xbar), abs(xbar_drop))
    if abs(direct_first - err_first) > 1e-12 * scale or abs(direct_zeroth - err_zeroth) > 1e-12 * scale:
        raise NumericalError(
            "normal drop-error formulas disagree with the direct computation: "
            f"first {err_first} vs {direct_first}, zeroth {err_zeroth} vs {direct_zeroth}"
        )
    return DropError(err_first=float(err_first), err_zeroth=float(err_zeroth))


# ---------------------------------------------------------------------------
# Grouped normal means
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NormalMeansModel:
    """x_n ~ Normal(theta_{g_n}, sigma^2), theta_g ~ Normal(mu, tau^2), flat prior on mu.

    group holds one integer label per observation; every label must occur at
    least once.
    """

    x: np.ndarray
    group: np.ndarray
    sigma: float
    tau: float

    def __post_init__(self):
        x = _as_float_array(self.x, "x", 1)
        groups = np.asarray(self.group)
        if groups.shape != x.shape:
            raise ValidationError("group must have the same length as x")
        if not np.issubdtype(groups.dtype, np.integer):
            if not np.all(groups == np.round(groups)):
                raise ValidationError("group labels must be integers")
            groups = groups.astype(np.int64)
        for name in ("sigma", "tau"):
            val = getattr(self, name)
            if not (isinstance(val, (int, float)) and val > 0):
                raise ValidationError(f"{name} must be positive, got {val!r}")
        x = x.copy()
        x.setflags(write=False)
        groups = groups.copy()
        groups.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "group", groups)
        object.__setattr__(self, "sigma", float(self.sigma))
        object.__setattr__(self, "tau", float(self.tau))
        object.__setattr__(self, "_labels", tuple(int(v) for v in np.unique(groups)))

    @property
    def n_obs(self) -> int:
        return self.x.shape[0]

    @property
    def group_labels(self) -> tuple[int, ...]:
        return self._labels

    def group_mask(self, label: int) -> np.ndarray:
        return np.asarray(self.group) == label


def _group_stats(model: NormalMeansModel, w: np.ndarray):
    """Per-group weighted counts, means, and precisions P_g = 1/(sigma^2/N_g + tau^2)."""
    counts = {}
    means = {}
    precisions = {}
    for label in model.group_labels:
        mask = model.group_mask(label)
        n_g = float(w[mask].sum())
        if n_g <= 0.0:
            raise ValidationError(f"group {label} has zero total weight")
        counts[label] = n_g
        means[label] = float(np.dot(w[mask], model.x[mask])) / n_g
        precisions[label] = 1.0 / (model.sigma**2 / n_g + model.tau**2)
    return counts, means, precisions


def normal_means_weighted_posterior(model: NormalMeansModel, w) -> float:
    """Posterior mean of mu under weights w: sum_g P_g xbar_g / sum_g P_g."""
    w = validate_weights(w, model.n_obs)
    _, means, precisions = _group_stats(model, w)
    lam = sum(precisions.values())
    return sum(precisions[g] * means[g] for g in model.group_labels) / lam


def normal_means_posterior_lambda(model: NormalMeansModel, w) -> float:
    """Total precision Lambda(w) = sum_g P_g(w); posterior variance of mu is 1/Lambda."""
    w = validate_weights(w, model.n_obs)
    _, _, precisions = _group_stats(model, w)
    return sum(precisions.values())


def normal_means_influences(model: NormalMeansModel, verify: bool = True) -> np.ndarray:
    """Exact influences of the posterior mean of mu at full weights.

    For n in group k:

        psi_n = (1/Lambda) * (x_n - mtilde_k) / (sigma^2 + tau^2 N_k)

    with mtilde_k the shrunken group mean pulling xbar_k toward the posterior
    mean of mu.  Each entry is verified against a central finite difference of
    the weighted posterior unless verify=False.
    """
    w = np.ones(model.n_obs)
    counts, means, precisions = _group_stats(model, w)
    lam = sum(precisions.values())
    mu_post = sum(precisions[g] * means[g] for g in model.group_labels) / lam

    psi = np.empty(model.n_obs)
    sigma2 = model.sigma**2
    tau2 = model.tau**2
    for i in range(model.n_obs):
        k = int(np.asarray(model.group)[i])
        n_k = counts[k]
        mtilde = (means[k] * n_k / sigma2 + mu_post / tau2) / (n_k / sigma2 + 1.0 / tau2)
        psi[i] = (model.x[i] - mtilde) / (lam * (sigma2 + tau2 * n_k))

    if verify:
        step = 1e-6
        scale = max(1.0, abs(mu_post))
        for i in range(model.n_obs):
            w_hi = w.copy()
            w_lo = w.copy()
            w_hi[i] = 1.0 + step  # weights briefly exceed 1; the posterior formula extends smoothly
            w_lo[i] = 1.0 - step
            hi = _posterior_mean_unchecked(model, w_hi)
            lo = _posterior_mean_unchecked(model, w_lo)
            fd = (hi - lo) / (2.0 * step)
            if abs(fd - psi[i]) > 1e-6 * max(abs(psi[i]), 1e-3 * scale):
                raise NumericalError(
                    f"influence formula disagrees with finite difference at n={i + 1}: "
                    f"{psi[i]} vs {fd}"
                )
    return psi


def _posterior_mean_unchecked(model: NormalMeansModel, w: np.ndarray) -> float:
    _, means, precisions = _group_stats(model, w)
    lam = sum(precisions.values())
    return sum(precisions[g] * means[g] for g in model.group_labels) / lam


@dataclass(frozen=True)
class NormalMeansDropReport:
    """Direct drop errors next to the published decomposition of the same quantities.

    The two disagree in general (the decomposition's Term-1 precision factor
    and sign conventions do not reproduce the direct computation); both are
    reported so the gap is visible rather than silently absorbed.
    """

    direct: DropError
    lemma_decomposition: DropError
    diff_first: float
    diff_zeroth: float
    condition: bool


def _single_group_of(model: NormalMeansModel, idx: tuple[int, ...]) -> int:
    groups = np.asarray(model.group)
    labels = {int(groups[i - 1]) for i in idx}
    if len(labels) != 1:
        raise ValidationError(f"dropped indices span groups {sorted(labels)}; must stay within one group")
    return labels.pop()


def normal_means_drop_errors(model: NormalMeansModel, drop) -> NormalMeansDropReport:
    """Exact drop errors for dropping a set I inside a single group.

    direct:              phi evaluated on the reweighted posterior (ground truth).
    lemma_decomposition: the closed-form split

        err_first  = (P_k(w_I)/Lambda*) [F1 + F2] + T,
        err_zeroth = (P_k(w_I)/Lambda*) (N_k/|I|) F1 + T,

        F1 = |I|^2 (xbar_k - xbar_I) / (N_k (N_k - |I|)),
        F2 = (|I|/N_k) (sigma^2 P_k / N_k) (mu* - xbar_k),
        T  = E(I) sum_{g != k} P_g (xbar_g - xbar_k(w_I)) / (Lambda* Lambda(w_I)),
        E  = |I| sigma^2 P_k(w_I) P_k / (N_k (N_k - |I|)),

    evaluated verbatim (starred quantities at full weights).
    condition reports xbar_k - xbar_I > sigma^2 (P_k/N_k) (mu* - xbar_k).
    """
    idx = validate_index_set(drop, model.n_obs)
    k = _single_group_of(model, idx)
    n = model.n_obs
    w_full = np.ones(n)
    counts, means, precisions = _group_stats(model, w_full)
    n_k = counts[k]
    size = float(len(idx))
    if size >= n_k:
        raise ValidationError(f"cannot drop all of group {k} ({int(n_k)} observations)")

    lam_full = sum(precisions.values())
    mu_full = sum(precisions[g] * means[g] for g in model.group_labels) / lam_full

    w_drop = index_set_to_weight(idx, n)
    counts_d, means_d, precisions_d = _group_stats(model, w_drop)
    lam_drop = sum(precisions_d.values())
    mu_drop = sum(precisions_d[g] * means_d[g] for g in model.group_labels) / lam_drop

    psi = normal_means_influences(model, verify=False)
    direct_first = mu_drop - mu_full + float(sum(psi[i - 1] for i in idx))
    direct_zeroth = mu_drop - mu_full

    sigma2 = model.sigma**2
    xbar_k = means[k]
    xbar_dropped = float(np.mean([model.x[i - 1] for i in idx]))
    p_k_full = precisions[k]
    p_k_drop = precisions_d[k]
    f1 = size**2 / (n_k * (n_k - size)) * (xbar_k - xbar_dropped)
    f2 = (size / n_k) * (sigma2 * p_k_full / n_k) * (mu_full - xbar_k)
    e_term = size / (n_k * (n_k - size)) * sigma2 * p_k_drop * p_k_full
    cross = sum(
        precisions[g] * (means[g] - means_d[k]) for g in model.group_labels if g != k
    )
    tail = cross * e_term / (lam_full * lam_drop)
    decomp_first = (p_k_drop / lam_full) * (f1 + f2) + tail
    decomp_zeroth = (p_k_drop / lam_full) * (n_k / size) * f1 + tail

    condition = (xbar_k - xbar_dropped) > sigma2 * (p_k_full / n_k) * (mu_full - xbar_k)

    return NormalMeansDropReport(
        direct=DropError(err_first=float(direct_first), err_zeroth=float(direct_zeroth)),
        lemma_decomposition=DropError(err_first=float(decomp_first), err_zeroth=float(decomp_zeroth)),
        diff_first=float(direct_first - decomp_first),
        diff_zeroth=float(direct_zeroth - decomp_zeroth),
        condition=bool(condition),
    )


def normal_means_error_bound(model: NormalMeansModel, drop) -> float:
    """Worst-case bound on |err_first| when every group carries enough weight.

    Requires N_g >= sigma^2/tau^2 for all groups and N_k - |I| >= sigma^2/tau^2
    for the group being dropped from; then

        |err_first(I)| <= ||x||_inf (4 (sigma^2/tau^2 + 1) + sigma^2/tau^4)
                          * (1/G) * |I|^2 / N_k^2.
    """
    idx = validate_index_set(drop, model.n_obs)
    k = _single_group_of(model, idx)
    ratio = model.sigma**2 / model.tau**2
    counts, _, _ = _group_stats(model, np.ones(model.n_obs))
    for g, n_g in counts.items():
        if n_g < ratio:
            raise ValidationError(
                f"group {g} has {int(n_g)} observations, below sigma^2/tau^2 = {ratio}"
            )
    if counts[k] - len(idx) < ratio:
        raise ValidationError(
            f"dropping {len(idx)} from group {k} leaves fewer than sigma^2/tau^2 = {ratio} observations"
        )
    const = np.max(np.abs(model.x)) * (4.0 * (ratio + 1.0) + model.sigma**2 / model.tau**4)
    n_groups = len(model.group_labels)
    return float(const * len(idx) ** 2 / (n_groups * counts[k] ** 2))


# ---------------------------------------------------------------------------
# Normal location, unknown precision (normal-gamma)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NormalGammaModel:
    """x_n ~ Normal(mu, 1/tau), tau ~ Gamma(prior_shape, prior_rate), flat prior on mu."""

    x: np.ndarray
    prior_shape: float
    prior_rate: float

    def __post_init__(self):
        x = _as_float_array(self.x, "x", 1)
        if x.shape[0] < 2:
            raise ValidationError("need at least 2 observations")
        for name in ("prior_shape", "prior_rate"):
            val = getattr(self, name)
            if not (isinstance(val, (int, float)) and val > 0):
                raise ValidationError(f"{name} must be positive, got {val!r}")
        x = x.copy()
        x.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "prior_shape", float(self.prior_shape))
        object.__setattr__(self, "prior_rate", float(self.prior_rate))

    @property
    def n_obs(self) -> int:
        return self.x.shape[0]


@dataclass(frozen=True)
class NormalGammaPosterior:
    """Posterior tau ~ Gamma(shape, rate); mu | tau ~ Normal(mean_location, 1/(n tau))."""

    shape: float
    rate: float
    mean_location: float
    n_weight: float


def normal_gamma_weighted_posterior(model: NormalGammaModel, w) -> NormalGammaPosterior:
    """Closed-form reweighted posterior for arbitrary weights in [0, 1]."""
    w = validate_weights(w, model.n_obs)
    total = float(w.sum())
    mean = float(np.dot(w, model.x)) / total
    mean_sq = float(np.dot(w, model.x**2)) / total
    shape = model.prior_shape + total / 2.0
    rate = model.prior_rate + (total / 2.0) * (mean_sq - mean**2)
    if rate <= 0.0:
        raise NumericalError(f"posterior rate is non-positive ({rate}); data degenerate")
    return NormalGammaPosterior(shape=shape, rate=rate, mean_location=mean, n_weight=total)


def normal_gamma_posterior(model: NormalGammaModel) -> NormalGammaPosterior:
    """Full-data posterior."""
    return normal_gamma_weighted_posterior(model, np.ones(model.n_obs))


def normal_gamma_influence(model: NormalGammaModel, n: int) -> float:
    """Exact influence of observation n (1-based) on the posterior mean of mu: (x_n - xbar)/N."""
    (n,) = validate_index_set([n], model.n_obs)
    return float((model.x[n - 1] - model.x.mean()) / model.n_obs)


def _gamma_expectation(shape: float, rate: float, fn) -> float:
    """E[fn(tau)] for tau ~ Gamma(shape, rate) by adaptive quadrature.

    The domain is truncated to the (1e-12, 1-1e-12) quantile range; integration
    failures raise instead of warning.
    """
    dist = stats.gamma(shape, scale=1.0 / rate)
    lo = float(dist.ppf(1e-12))
    hi = float(dist.ppf(1.0 - 1e-12))
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            value, abserr = integrate.quad(
                lambda t: fn(t) * dist.pdf(t), lo, hi, epsabs=1e-9, epsrel=1e-9, limit=200
            )
        except integrate.IntegrationWarning as exc:  # pragma: no cover - defensive
            raise NumericalError(f"posterior moment quadrature failed: {exc}") from exc
    if not math.isfinite(value) or abserr > 1e-7 * max(1.0, abs(value)):
        raise NumericalError(
            f"posterior moment quadrature did not converge (value {value}, abserr {abserr})"
        )
    return value


def normal_gamma_sigma_nn(model: NormalGammaModel, n: int) -> float:
    """Asymptotic variance of the influence estimate for observation n (1-based).

    Even quartic in the centered observation d = x_n - xbar:

        sigma_nn = D1 d^4 + D2 d^2 + D3

    with coefficients built from posterior moments of tau (computed by
    quadrature; closed forms exist and are used as cross-checks in the tests).
    Requires posterior shape > 2 so the inverse moments exist.
    """
    (n,) = validate_index_set([n], model.n_obs)
    post = normal_gamma_posterior(model)
    if post.shape <= 2.0:
        raise ValidationError(
            f"posterior shape {post.shape} must exceed 2 for the variance moments to exist"
        )
    shape, rate = post.shape, post.rate
    n_obs = model.n_obs

    e_tau = shape / rate
    e_inv = _gamma_expectation(shape, rate, lambda t: 1.0 / t)
    e_log = _gamma_expectation(shape, rate, math.log)
    e_inv_dev2 = _gamma_expectation(shape, rate, lambda t: (t - e_tau) ** 2 / t)
    e_inv_dev = _gamma_expectation(shape, rate, lambda t: (t - e_tau) / t)
    e_inv_logdev = _gamma_expectation(shape, rate, lambda t: (math.log(t) - e_log) / t)
    e_inv_logdev2 = _gamma_expectation(shape, rate, lambda t: (math.log(t) - e_log) ** 2 / t)

    # Expanding E[(mu - E mu)^2 (ll_n - E ll_n)^2] - psi_n^2 with
    # mu | tau = xbar + eps/sqrt(N tau) gives, after collecting powers of d:
    #   d^4: E[(tau - E tau)^2 / tau] / (4N)
    #   d^2: (2 + E[(tau - E tau)/tau]) / N^2
    #        + E[tau] E[(log tau - E log tau)/tau] / (2N)
    #   1:   E[(log tau - E log tau)^2 / tau] / (4N)
    #        - E[(log tau - E log tau)/tau] / N^2 + 5 E[1/tau] / (2 N^3)
    d1 = e_inv_dev2 / (4.0 * n_obs)
    d2 = (2.0 + e_inv_dev) / n_obs**2 + e_tau * e_inv_logdev / (2.0 * n_obs)
    d3 = (
        e_inv_logdev2 / (4.0 * n_obs)
        - e_inv_logdev / n_obs**2
        + 5.0 * e_inv / (2.0 * n_obs**3)
    )

    dev = float(model.x[n - 1] - model.x.mean())
    return float(d1 * dev**4 + d2 * dev**2 + d3)
