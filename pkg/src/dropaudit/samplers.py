"""Draw generation for the conjugate models.

Exact i.i.d. posterior samplers exist for all three models, which is what
makes them useful as ground truth: estimator output can be compared against
closed forms without worrying about chain mixing.  A random-walk Metropolis
sampler for the normal model produces genuinely autocorrelated chains for
exercising the block bootstrap.

All samplers emit a DrawBundle whose g column is the posterior draw of the
location parameter and whose loglik matrix holds the per-observation
log-likelihood evaluated at each draw.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import DrawBundle, ValidationError, _as_float_array
from .oracles import (
    NormalGammaModel,
    NormalMeansModel,
    NormalModel,
    normal_gamma_posterior,
)

__all__ = [
    "SamplerConfig",
    "SAMPLER_KINDS",
    "sample_normal_exact",
    "sample_normal_means_exact",
    "sample_normal_gamma_exact",
    "sample_metropolis",
    "lag1_autocorrelation",
]

SAMPLER_KINDS = ("normal_exact", "normal_means_exact", "normal_gamma_exact", "metropolis")
_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class SamplerConfig:
    """How many draws to produce, from which stream, with which sampler.

    step_scale applies to the Metropolis sampler only and defaults to the
    classic 2.4 * sigma / sqrt(N) when left unset.  burn_in discards that many
    leading states (none by default; the chain starts at the posterior mode,
    so these targets need no warm-up).
    """

    draws: int
    seed: int
    kind: str = "normal_exact"
    step_scale: float | None = None
    burn_in: int = 0

    def __post_init__(self):
        if not (isinstance(self.draws, (int, np.integer)) and self.draws >= 2):
            raise ValidationError(f"draws must be an integer >= 2, got {self.draws!r}")
        if not (isinstance(self.seed, (int, np.integer)) and 0 <= self.seed <= _MASK64):
            raise ValidationError(f"seed must be a 64-bit unsigned integer, got {self.seed!r}")
        if self.kind not in SAMPLER_KINDS:
            raise ValidationError(f"kind must be one of {SAMPLER_KINDS}, got {self.kind!r}")
        if self.step_scale is not None and not (
            isinstance(self.step_scale, (int, float)) and self.step_scale > 0
        ):
            raise ValidationError(f"step_scale must be positive, got {self.step_scale!r}")
        if not (isinstance(self.burn_in, (int, np.integer)) and self.burn_in >= 0):
            raise ValidationError(f"burn_in must be a nonnegative integer, got {self.burn_in!r}")
        object.__setattr__(self, "draws", int(self.draws))
        object.__setattr__(self, "seed", int(self.seed))
        object.__setattr__(self, "burn_in", int(self.burn_in))


def _require_kind(cfg: SamplerConfig, expected: str) -> None:
    if cfg.kind != expected:
        raise ValidationError(f"config kind is {cfg.kind!r}; this sampler requires {expected!r}")


def _normal_loglik(x: np.ndarray, mu: np.ndarray, sigma2: float) -> np.ndarray:
    """Rows of per-observation log-likelihoods for location draws mu."""
    const = 0.5 * math.log(1.0 / (2.0 * math.pi * sigma2))
    quad = x[None, :] ** 2 - 2.0 * mu[:, None] * x[None, :] + (mu**2)[:, None]
    return const - quad / (2.0 * sigma2)


def sample_normal_exact(model: NormalModel, cfg: SamplerConfig) -> DrawBundle:
    """I.i.d. draws from the exact posterior Normal(xbar, sigma^2/N)."""
    _require_kind(cfg, "normal_exact")
    rng = np.random.default_rng(cfg.seed)
    xbar = float(model.x.mean())
    sd = model.sigma / math.sqrt(model.n_obs)
    mu = xbar + sd * rng.standard_normal(cfg.draws)
    return DrawBundle(
        g_values=mu,
        loglik=_normal_loglik(model.x, mu, model.sigma**2),
        sampling_kind="exact_iid",
    )


def sample_normal_means_exact(model: NormalMeansModel, cfg: SamplerConfig) -> DrawBundle:
    """I.i.d. draws of (mu, theta) from the exact grouped posterior.

    mu comes from its normal marginal; each group mean is then drawn from its
    conditional normal given mu.  g is the mu draw; the loglik entry for
    observation n uses that draw's group mean.
    """
    _require_kind(cfg, "normal_means_exact")
    rng = np.random.default_rng(cfg.seed)
    sigma2 = model.sigma**2
    tau2 = model.tau**2
    labels = model.group_labels

    counts = np.array([model.group_mask(g).sum() for g in labels], dtype=float)
    means = np.array([model.x[model.group_mask(g)].mean() for g in labels])
    precisions = 1.0 / (sigma2 / counts + tau2)
    lam = precisions.sum()
    mu_star = float(precisions @ means) / lam

    mu = mu_star + rng.standard_normal(cfg.draws) / math.sqrt(lam)
    cond_prec = 1.0 / tau2 + counts / sigma2
    cond_sd = 1.0 / np.sqrt(cond_prec)
    cond_mean = (mu[:, None] / tau2 + (counts * means)[None, :] / sigma2) / cond_prec[None, :]
    theta = cond_mean + rng.standard_normal((cfg.draws, len(labels))) * cond_sd[None, :]

    label_pos = {g: j for j, g in enumerate(labels)}
    obs_col = np.array([label_pos[int(g)] for g in np.asarray(model.group)])
    theta_per_obs = theta[:, obs_col]
    const = 0.5 * math.log(1.0 / (2.0 * math.pi * sigma2))
    quad = model.x[None, :] ** 2 - 2.0 * theta_per_obs * model.x[None, :] + theta_per_obs**2
    return DrawBundle(
        g_values=mu,
        loglik=const - quad / (2.0 * sigma2),
        sampling_kind="exact_iid",
    )


def sample_normal_gamma_exact(model: NormalGammaModel, cfg: SamplerConfig) -> DrawBundle:
    """I.i.d. draws of (mu, tau) from the exact normal-gamma posterior.

    tau from the posterior gamma, then mu = xbar + eps / sqrt(N tau) with eps
    standard normal.
    """
    _require_kind(cfg, "normal_gamma_exact")
    rng = np.random.default_rng(cfg.seed)
    post = normal_gamma_posterior(model)
    tau = rng.gamma(post.shape, scale=1.0 / post.rate, size=cfg.draws)
    eps = rng.standard_normal(cfg.draws)
    mu = post.mean_location + eps / np.sqrt(model.n_obs * tau)
    quad = model.x[None, :] ** 2 - 2.0 * mu[:, None] * model.x[None, :] + (mu**2)[:, None]
    loglik = 0.5 * np.log(tau / (2.0 * math.pi))[:, None] - 0.5 * tau[:, None] * quad
    return DrawBundle(g_values=mu, loglik=loglik, sampling_kind="exact_iid")


def sample_metropolis(model: NormalModel, cfg: SamplerConfig) -> DrawBundle:
    """Random-walk Metropolis on the normal-model posterior of mu.

    Starts at the posterior mode xbar and records the state after each of
    `draws` updates (after discarding burn_in updates), so consecutive rows
    are genuinely dependent.
    """
    _require_kind(cfg, "metropolis")
    rng = np.random.default_rng(cfg.seed)
    xbar = float(model.x.mean())
    post_prec = model.n_obs / model.sigma**2
    step = cfg.step_scale if cfg.step_scale is not None else 2.4 * model.sigma / math.sqrt(model.n_obs)

    total = cfg.burn_in + cfg.draws
    proposals = rng.standard_normal(total) * step
    log_us = np.log(rng.random(total))
    chain = np.empty(cfg.draws)
    state = xbar
    state_logp = 0.0
    for t in range(total):
        candidate = state + proposals[t]
        cand_logp = -0.5 * post_prec * (candidate - xbar) ** 2
        if log_us[t] < cand_logp - state_logp:
            state = candidate
            state_logp = cand_logp
        if t >= cfg.burn_in:
            chain[t - cfg.burn_in] = state
    return DrawBundle(
        g_values=chain,
        loglik=_normal_loglik(model.x, chain, model.sigma**2),
        sampling_kind="markov_chain",
    )


def lag1_autocorrelation(values) -> float:
    """Sample lag-1 autocorrelation; near zero for i.i.d. draws."""
    values = _as_float_array(values, "values", 1)
    if values.shape[0] < 3:
        raise ValidationError("need at least 3 values for a lag-1 autocorrelation")
    centered = values - values.mean()
    denom = float(centered @ centered)
    if denom == 0.0:
        raise ValidationError("constant sequence has no autocorrelation")
    return float(centered[:-1] @ centered[1:]) / denom
