"""Core types shared across the package.

A robustness question is posed as a scalar quantity of interest

    phi(w) = c1 * E_w[g] + c2 * sqrt(Var_w[g])

evaluated under the data-reweighted posterior, with the convention that
phi is negative on the full data and the conclusion is overturned when
some admissible down-weighting makes phi positive.  The inputs are
posterior draws of g together with the per-observation log-likelihood
evaluated at each draw.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

SAMPLING_KINDS = ("exact_iid", "markov_chain", "unknown")

QOI_PRESETS = ("sign", "sig", "both", "custom")

#: Two-sided 95% normal quantile used by the significance-style QoIs.
Z_975 = 1.959963984540054


class ValidationError(ValueError):
    """Raised when an input fails validation (CLI exit code 2)."""


class NumericalError(RuntimeError):
    """Raised when a computation is numerically degenerate (CLI exit code 3)."""


def _as_float_array(values, name: str, ndim: int) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != ndim:
        raise ValidationError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains non-finite values")
    return arr


@dataclass(frozen=True)
class DrawBundle:
    """Posterior draws of g plus the S x N matrix of per-observation log-likelihoods.

    Parameters
    ----------
    g_values : ndarray, shape (S,)
        Draws of the scalar functional g evaluated on each posterior draw.
    loglik : ndarray, shape (S, N)
        loglik[s, n] is the log-likelihood of observation n at draw s.
    sampling_kind : str
        "exact_iid" for independent draws from the posterior,
        "markov_chain" for MCMC output.
    """

    g_values: np.ndarray
    loglik: np.ndarray
    sampling_kind: str = "exact_iid"

    def __post_init__(self):
        g = _as_float_array(self.g_values, "g_values", 1)
        ll = _as_float_array(self.loglik, "loglik", 2)
        if g.shape[0] < 2:
            raise ValidationError(f"need at least 2 draws, got {g.shape[0]}")
        if ll.shape[0] != g.shape[0]:
            raise ValidationError(
                f"loglik has {ll.shape[0]} rows but g_values has {g.shape[0]} entries"
            )
        if ll.shape[1] < 1:
            raise ValidationError("loglik must have at least one observation column")
        if self.sampling_kind not in SAMPLING_KINDS:
            raise ValidationError(
                f"sampling_kind must be one of {SAMPLING_KINDS}, got {self.sampling_kind!r}"
            )
        # Bundles are treated as immutable once built.
        g = g.copy()
        ll = ll.copy()
        g.setflags(write=False)
        ll.setflags(write=False)
        object.__setattr__(self, "g_values", g)
        object.__setattr__(self, "loglik", ll)

    @property
    def n_draws(self) -> int:
        return self.g_values.shape[0]

    @property
    def n_obs(self) -> int:
        return self.loglik.shape[1]


@dataclass(frozen=True)
class QoiSpec:
    """Coefficients of the quantity of interest phi(w) = c1*mean + c2*sd."""

    c1: float
    c2: float
    z: float = Z_975
    preset: str = "custom"

    def __post_init__(self):
        for name in ("c1", "c2", "z"):
            val = getattr(self, name)
            if not (isinstance(val, (int, float)) and math.isfinite(val)):
                raise ValidationError(f"{name} must be a finite number, got {val!r}")
        if self.c1 == 0.0 and self.c2 == 0.0:
            raise ValidationError("c1 and c2 cannot both be zero")
        if self.z <= 0.0:
            raise ValidationError(f"z must be positive, got {self.z}")
        if self.preset not in QOI_PRESETS:
            raise ValidationError(f"unknown preset {self.preset!r}")


def validate_weights(w, n_obs: int) -> np.ndarray:
    """Check that w is a usable weight vector: length n_obs, entries in [0, 1], sum > 0."""
    arr = _as_float_array(w, "weights", 1)
    if arr.shape[0] != n_obs:
        raise ValidationError(f"weight vector has length {arr.shape[0]}, expected {n_obs}")
    if np.any(arr < 0.0) or np.any(arr > 1.0):
        raise ValidationError("weights must lie in [0, 1]")
    if arr.sum() <= 0.0:
        raise ValidationError("weight vector must keep at least some data (sum > 0)")
    return arr


def validate_index_set(indices, n_obs: int, allow_empty: bool = False) -> tuple[int, ...]:
    """Validate a collection of 1-based observation indices; returns them sorted."""
    given = [int(i) for i in indices]
    idx = sorted(set(given))
    if len(idx) != len(given):
        raise ValidationError("index set contains duplicates")
    if not idx and not allow_empty:
        raise ValidationError("index set must be nonempty")
    if idx and (idx[0] < 1 or idx[-1] > n_obs):
        raise ValidationError(f"indices must lie in 1..{n_obs}, got {idx}")
    return tuple(idx)


def index_set_to_weight(indices, n_obs: int) -> np.ndarray:
    """Binary weight vector that zeroes out the given 1-based indices.

    index_set_to_weight({1, 3}, 4) -> (0, 1, 0, 1)
    """
    idx = validate_index_set(indices, n_obs, allow_empty=True)
    w = np.ones(n_obs)
    for i in idx:
        w[i - 1] = 0.0
    if w.sum() <= 0.0:
        raise ValidationError("cannot drop every observation")
    return w


def weight_to_index_set(w) -> frozenset[int]:
    """Inverse of index_set_to_weight for binary weight vectors."""
    arr = _as_float_array(w, "weights", 1)
    if not np.all((arr == 0.0) | (arr == 1.0)):
        raise ValidationError("weight vector is not binary")
    if arr.sum() <= 0.0:
        raise ValidationError("weight vector must keep at least one observation")
    return frozenset(int(i) + 1 for i in np.flatnonzero(arr == 0.0))


def resolve_qoi_rule(preset: str, mean: float, sd: float, z: float = Z_975) -> tuple[float, float]:
    """Resolve a QoI preset to coefficients (c1, c2) from full-data mean and sd estimates.

    The conventions make phi negative on the full data whenever the decision
    in question is well-defined:

    * "sign":  the conclusion is the sign of the posterior mean; overturned
      when the reweighted mean crosses zero.
    * "sig":   the conclusion is that the central credible interval excludes
      zero; overturned when the endpoint nearer zero crosses it.
    * "both":  overturned only by a significant result of the opposite sign.
    """
    if preset == "sign":
        if mean == 0.0:
            raise ValidationError("posterior mean is exactly zero; sign QoI undefined")
        return (-math.copysign(1.0, mean), 0.0)
    if preset == "sig":
        if mean == 0.0:
            raise ValidationError("posterior mean is exactly zero; sig QoI undefined")
        if abs(mean) <= z * sd:
            raise ValidationError(
                "credible interval already straddles zero; conclusion is not significant"
            )
        s = math.copysign(1.0, mean)
        return (-s, z)
    if preset == "both":
        if mean == 0.0:
            raise ValidationError("posterior mean is exactly zero; both QoI undefined")
        s = math.copysign(1.0, mean)
        return (-s, -z)
    raise ValidationError(f"unknown preset {preset!r} (custom QoIs pass c1/c2 directly)")


def resolve_qoi_preset(preset: str, bundle: DrawBundle, z: float = Z_975) -> QoiSpec:
    """Resolve a preset against a bundle's full-data mean/sd estimates."""
    g = bundle.g_values
    mean = float(g.mean())
    centered = g - mean
    sd = float(np.sqrt((centered * centered).mean()))
    c1, c2 = resolve_qoi_rule(preset, mean, sd, z=z)
    return QoiSpec(c1=c1, c2=c2, z=z, preset=preset)
