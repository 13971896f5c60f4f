"""Influence estimation from draws, and its sampling-covariance kernels.

The central quantity is the per-observation influence of the quantity of
interest phi(w) = c1 * E_w g + c2 * sqrt(Var_w g) at full weights,

    psi_n = c1 * Cov(g, l_n) + c2 * (Cov(g^2, l_n) - 2 E[g] Cov(g, l_n)) / sd(g),

estimated by the corresponding biased (divide-by-S) sample covariances over
draws.  Two exact sampling-covariance tools accompany it: a Monte Carlo
estimate of the asymptotic covariance of sqrt(S) * (psi_hat - psi), and a
closed-form finite-S covariance of two sample covariances sharing a common
factor, used as an oracle in tests.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .core import DrawBundle, NumericalError, QoiSpec, ValidationError, _as_float_array

__all__ = [
    "Moments",
    "AsymptoticCovEstimate",
    "TripleDistribution",
    "moments",
    "influence_estimates",
    "asymptotic_cov_estimate",
    "exact_cov_of_sample_covariances",
    "brute_force_cov_of_cov",
]

# Below this the biased variance of g is treated as exactly degenerate.
_DEGENERATE_VARIANCE = 1e-300
# Negative variances beyond rounding jitter indicate a real inconsistency.
_VARIANCE_ROUNDING = -1e-12
# The naive and centered covariance paths must agree to this, relative to
# the magnitude of the operands entering the subtraction.
_PATH_AGREEMENT = 1e-8


@dataclass(frozen=True)
class Moments:
    """Biased sample moments of the g draws: mean, mean of squares, variance."""

    m: float
    k: float
    v: float


def moments(bundle: DrawBundle) -> Moments:
    """Sample mean m, second moment k, and biased variance v = k - m^2 of g.

    v is clamped to 0 when rounding pushes it within -1e-12; more negative
    values raise, since k - m^2 < 0 beyond rounding means corrupted inputs.
    """
    g = bundle.g_values
    m = float(g.mean())
    k = float(np.mean(g * g))
    v = k - m * m
    if v < 0.0:
        if v < _VARIANCE_ROUNDING * max(1.0, abs(k)):
            raise NumericalError(f"variance k - m^2 = {v} is negative beyond rounding")
        v = 0.0
    return Moments(m=m, k=k, v=v)


def _dual_path_covariance(a_naive: np.ndarray, centered: np.ndarray, scale: np.ndarray, what: str) -> np.ndarray:
    """Return the centered covariances after checking the naive path agrees.

    The naive path (mean of products minus product of means) cancels
    catastrophically when both factors have large means; the two-pass centered
    path does not.  Disagreement beyond 1e-8 relative to the operands entering
    the subtraction means one of the paths is numerically broken, which should
    stop the analysis rather than feed it.
    """
    gap = np.abs(a_naive - centered)
    if np.any(gap > _PATH_AGREEMENT * scale):
        worst = int(np.argmax(gap / scale))
        raise NumericalError(
            f"covariance paths disagree for {what} at column {worst + 1}: "
            f"naive {a_naive[worst]!r} vs centered {centered[worst]!r}"
        )
    return centered


def influence_estimates(bundle: DrawBundle, qoi: QoiSpec) -> np.ndarray:
    """Estimated influences psi_hat_n of phi = c1 * mean + c2 * sd, length N.

    All covariances are biased (divide by S).  Each covariance is computed
    both as a mean-of-products difference and as a centered two-pass sum; the
    centered value is returned after the two are checked against each other.
    """
    g = bundle.g_values
    ll = bundle.loglik
    s = bundle.n_draws
    mom = moments(bundle)
    c1, c2 = qoi.c1, qoi.c2

    u = ll.mean(axis=0)
    g_centered = g - mom.m
    ll_centered = ll - u

    # Cov(g, l_n): naive a - m u against centered two-pass.
    a = (g @ ll) / s
    f_naive = a - mom.m * u
    f_centered = (g_centered @ ll_centered) / s
    scale_f = np.maximum.reduce([np.abs(a), np.abs(mom.m * u), np.abs(f_centered)])
    scale_f = np.maximum(scale_f, 1e-300)
    f_hat = _dual_path_covariance(f_naive, f_centered, scale_f, "Cov(g, loglik)")

    if c2 == 0.0:
        return c1 * f_hat

    # Centered variance; k - m^2 cancels catastrophically when |m| is large.
    v_centered = float(np.mean(g_centered * g_centered))
    if v_centered <= _DEGENERATE_VARIANCE:
        raise NumericalError(
            "g draws are (numerically) constant: sd path of the influence is undefined"
        )
    scale_v = np.array([max(abs(mom.k), mom.m * mom.m, v_centered)])
    _dual_path_covariance(
        np.array([mom.v]), np.array([v_centered]), scale_v, "Var(g)"
    )

    # sd numerator Cov(g^2, l_n) - 2 m Cov(g, l_n) == Cov((g - m)^2, l_n).
    g2 = g * g
    b = (g2 @ ll) / s
    num_naive = (b - mom.k * u) - 2.0 * mom.m * f_naive
    num_centered = ((g_centered * g_centered - v_centered) @ ll_centered) / s
    scale_num = np.maximum.reduce(
        [np.abs(b), np.abs(mom.k * u), np.abs(2.0 * mom.m * f_naive), np.abs(num_centered)]
    )
    scale_num = np.maximum(scale_num, 1e-300)
    num = _dual_path_covariance(num_naive, num_centered, scale_num, "sd-path numerator")

    h_hat = num / math.sqrt(v_centered)
    psi = c1 * f_hat + c2 * h_hat
    if not np.all(np.isfinite(psi)):
        raise NumericalError("non-finite influence estimate")
    return psi


@dataclass(frozen=True)
class AsymptoticCovEstimate:
    """Monte Carlo estimate of one entry of the asymptotic covariance of psi_hat."""

    sigma_ij: float


def asymptotic_cov_estimate(bundle: DrawBundle, i: int, j: int) -> AsymptoticCovEstimate:
    """Estimate of the (i, j) entry of the limiting covariance of sqrt(S) psi_hat.

    The limit holds for i.i.d. draws with the mean-only functional: entry
    (i, j) is the covariance of the centered products (g - Eg)(l_i - El_i) and
    (g - Eg)(l_j - El_j).  Estimated here by the biased sample covariance of
    those products over the draws; i and j are 1-based.
    """
    n = bundle.n_obs
    for name, idx in (("i", i), ("j", j)):
        if not (isinstance(idx, (int, np.integer)) and 1 <= idx <= n):
            raise ValidationError(f"{name} must be an index in 1..{n}, got {idx!r}")
    if bundle.sampling_kind != "exact_iid":
        warnings.warn(
            "asymptotic covariance assumes i.i.d. draws; bundle is "
            f"{bundle.sampling_kind!r}",
            stacklevel=2,
        )
    g_centered = bundle.g_values - bundle.g_values.mean()
    col_i = bundle.loglik[:, i - 1]
    col_j = bundle.loglik[:, j - 1]
    prod_i = g_centered * (col_i - col_i.mean())
    prod_j = g_centered * (col_j - col_j.mean())
    sigma = float(np.mean((prod_i - prod_i.mean()) * (prod_j - prod_j.mean())))
    return AsymptoticCovEstimate(sigma_ij=sigma)


# ---------------------------------------------------------------------------
# Exact covariance of two sample covariances
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TripleDistribution:
    """Finite discrete joint distribution of (A, B, C) given by support and probabilities."""

    support: np.ndarray  # (K, 3) rows of (a, b, c)
    probs: np.ndarray  # (K,)

    def __post_init__(self):
        support = _as_float_array(self.support, "support", 2)
        probs = _as_float_array(self.probs, "probs", 1)
        if support.shape[1] != 3:
            raise ValidationError("support rows must be (a, b, c) triples")
        if support.shape[0] != probs.shape[0]:
            raise ValidationError("support and probs must have the same length")
        if np.any(probs < 0) or abs(probs.sum() - 1.0) > 1e-12:
            raise ValidationError("probs must be nonnegative and sum to 1")
        support = support.copy()
        probs = probs.copy()
        support.setflags(write=False)
        probs.setflags(write=False)
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "probs", probs)

    def moment(self, fn) -> float:
        return float(sum(p * fn(a, b, c) for (a, b, c), p in zip(self.support, self.probs)))


def exact_cov_of_sample_covariances(jointdist: TripleDistribution, S: int) -> float:
    """Exact Cov(f1, f2) of the biased sample covariances f1 = Cov_S(A, B), f2 = Cov_S(A, C).

    Over S i.i.d. triples from the joint distribution,

        Cov(f1, f2) = ((S-1)^2/S^3) E[(A-EA)^2 (B-EB)(C-EC)]
                      + ((S-1)/S^3) Cov(B, C) Var(A)
                      - ((S-1)(S-2)/S^3) Cov(A, B) Cov(A, C),

    evaluated from exact population moments.
    """
    if not (isinstance(S, (int, np.integer)) and S >= 2):
        raise ValidationError(f"S must be an integer >= 2, got {S!r}")
    ea = jointdist.moment(lambda a, b, c: a)
    eb = jointdist.moment(lambda a, b, c: b)
    ec = jointdist.moment(lambda a, b, c: c)
    m4 = jointdist.moment(lambda a, b, c: (a - ea) ** 2 * (b - eb) * (c - ec))
    var_a = jointdist.moment(lambda a, b, c: (a - ea) ** 2)
    cov_bc = jointdist.moment(lambda a, b, c: (b - eb) * (c - ec))
    cov_ab = jointdist.moment(lambda a, b, c: (a - ea) * (b - eb))
    cov_ac = jointdist.moment(lambda a, b, c: (a - ea) * (c - ec))
    s = float(S)
    return (
        (s - 1) ** 2 / s**3 * m4
        + (s - 1) / s**3 * cov_bc * var_a
        - (s - 1) * (s - 2) / s**3 * cov_ab * cov_ac
    )


def brute_force_cov_of_cov(jointdist: TripleDistribution, S: int) -> float:
    """Cov(f1, f2) by full enumeration of all |support|^S i.i.d. samples.

    Independent of the closed form above: computes the biased sample
    covariances on every possible sample, weights by the sample's probability,
    and assembles E[f1 f2] - E[f1] E[f2].  Restricted to S <= 4 and at most 4
    support points to keep the enumeration exact and fast.
    """
    if not (isinstance(S, (int, np.integer)) and 2 <= S <= 4):
        raise ValidationError(f"S must be an integer in 2..4, got {S!r}")
    k = jointdist.support.shape[0]
    if k > 4:
        raise ValidationError(f"at most 4 support points are enumerable, got {k}")
    e_f1 = 0.0
    e_f2 = 0.0
    e_f1f2 = 0.0
    for combo in itertools.product(range(k), repeat=S):
        rows = jointdist.support[list(combo)]
        prob = float(np.prod(jointdist.probs[list(combo)]))
        a, b, c = rows[:, 0], rows[:, 1], rows[:, 2]
        f1 = np.mean(a * b) - a.mean() * b.mean()
        f2 = np.mean(a * c) - a.mean() * c.mean()
        e_f1 += prob * f1
        e_f2 += prob * f2
        e_f1f2 += prob * f1 * f2
    return float(e_f1f2 - e_f1 * e_f2)
