"""Worst-case data-dropping from influence estimates.

The first-order relaxation of "drop at most floor(N * alpha) observations to
move phi as far as possible" is linear in the dropped set, so the exact
maximizer is the sorted prefix of negative influences.  A brute-force
enumerator over all small index sets provides the independent check, and
taylor_predict evaluates the first-order approximation at arbitrary weights.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .core import ValidationError, _as_float_array

__all__ = ["AmipResult", "sosie", "brute_force_mip", "taylor_predict"]


@dataclass(frozen=True)
class AmipResult:
    """Worst-case first-order perturbation at a drop fraction alpha.

    delta_hat is the predicted increase of phi from dropping the set
    `dropped` (1-based indices, most negative influence first); it is
    -sum of the dropped influences and never negative.  budget is
    floor(N * alpha).
    """

    delta_hat: float
    dropped: tuple[int, ...]
    alpha: float
    budget: int


def _check_alpha(alpha: float) -> float:
    if not (isinstance(alpha, (int, float)) and 0.0 < alpha < 1.0):
        raise ValidationError(f"alpha must lie strictly between 0 and 1, got {alpha!r}")
    return float(alpha)


def sosie(psi, alpha: float) -> AmipResult:
    """Sorted sum of influence estimates: the exact maximizer of the relaxation.

    Sorts psi ascending (ties broken by original index, smaller first), takes
    the strictly negative prefix up to budget floor(N * alpha), and returns
    the negated sum.  Entries equal to zero are never dropped.
    """
    psi = _as_float_array(psi, "psi", 1)
    alpha = _check_alpha(alpha)
    n = psi.shape[0]
    budget = math.floor(n * alpha)
    order = np.argsort(psi, kind="stable")
    negative = int(np.sum(psi < 0.0))
    take = min(negative, budget)
    chosen = order[:take]
    delta = -float(psi[chosen].sum()) if take else 0.0
    return AmipResult(
        delta_hat=delta,
        dropped=tuple(int(i) + 1 for i in chosen),
        alpha=alpha,
        budget=budget,
    )


def brute_force_mip(psi, alpha: float) -> AmipResult:
    """Enumerates every index set of size <= floor(N * alpha); the exact optimum.

    Ties resolve toward the lexicographically smallest index set of minimal
    size, so adding observations with zero influence never changes the answer.
    Enumeration is capped at N <= 20.
    """
    psi = _as_float_array(psi, "psi", 1)
    alpha = _check_alpha(alpha)
    n = psi.shape[0]
    if n > 20:
        raise ValidationError(f"brute force enumerates subsets only up to N = 20, got N = {n}")
    budget = math.floor(n * alpha)
    best_delta = 0.0
    best_set: tuple[int, ...] = ()
    for size in range(1, budget + 1):
        for combo in itertools.combinations(range(n), size):
            delta = -float(psi[list(combo)].sum())
            if delta > best_delta:
                best_delta = delta
                best_set = combo
    return AmipResult(
        delta_hat=best_delta,
        dropped=tuple(i + 1 for i in best_set),
        alpha=alpha,
        budget=budget,
    )


def taylor_predict(phi_full: float, psi, w) -> float:
    """First-order prediction of phi at weights w: phi_full + sum_n psi_n (w_n - 1)."""
    psi = _as_float_array(psi, "psi", 1)
    w = _as_float_array(w, "w", 1)
    if psi.shape != w.shape:
        raise ValidationError(f"psi has length {psi.shape[0]} but w has length {w.shape[0]}")
    return float(phi_full + np.dot(psi, w - 1.0))
