"""Index extension from a training sample to the rest of the space.

Four methods are provided.  Writing d for the composed metric and K for the
coherence constant of the training values:

* whitney:  F(x) = min_y { I(y) + K d(x, y) }, the largest K-Lipschitz
  extension of the training values.
* mcshane:  F(x) = max_y { I(y) - K d(x, y) }, the smallest one.
* blend:    (1 - alpha) * whitney + alpha * mcshane, with alpha chosen in
  closed form against a reference set (``optimal_alpha``).
* standard: anchor at the row a0 that minimizes the index and predict
  min(I) + K d(a0, x).  On finite data this is the whole approximation,
  and its training error is bounded by (K*Q - 1) * C.

All predictions funnel through one vectorized batch path so that single-point
and batch calls are bitwise identical.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .constants import IndexedSample, coherence_constant, katetov_shift
from .metrics import CompositionMetric

METHODS = ("mcshane", "whitney", "blend", "standard")


class FitError(ValueError):
    """The sample cannot be fitted (empty, or infinite coherence constant)."""


@dataclass(frozen=True, eq=False)
class ExtensionModel:
    """Immutable fitted state shared by all four prediction rules."""

    training: IndexedSample
    cm: CompositionMetric
    K: float
    method: str
    alpha: float | None = None  # blend only
    anchor: int | None = None  # standard only: row index of the minimizer
    offset: float = 0.0  # standard only: pre-shift minimum of the index


def fit_extension(
    s: IndexedSample,
    cm: CompositionMetric,
    method: str = "blend",
    alpha: float | None = None,
    K: float | None = None,
) -> ExtensionModel:
    """Fit an extension model on an indexed sample.

    K defaults to the coherence constant computed on ``s``; the override
    exists for experiments only.  An infinite constant means the values are
    not Lipschitz for the chosen metric and nothing can be extended.
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; choose from {METHODS}")
    if len(s) < 1:
        raise FitError("empty training set")
    if method == "standard":
        return standard_index_fit(s, cm, K=K)
    k_val = coherence_constant(s, cm) if K is None else float(K)
    if not math.isfinite(k_val):
        raise FitError("coherence constant is infinite: duplicate points carry distinct values")
    if alpha is not None and not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    return ExtensionModel(s, cm, k_val, method, alpha=alpha)


def standard_index_fit(
    s: IndexedSample, cm: CompositionMetric, K: float | None = None
) -> ExtensionModel:
    """Anchor the extension at the row with the smallest index value.

    The sample is shifted to zero minimum, the anchor a0 is the argmin of
    the shifted values (ties go to the lowest row index), and predictions
    add the pre-shift minimum back: min(I) + K d(a0, x).
    """
    if len(s) < 2:
        raise FitError("standard fit needs at least two rows")
    offset = float(np.min(s.values))
    shifted = katetov_shift(s)
    k_val = coherence_constant(shifted, cm) if K is None else float(K)
    if not math.isfinite(k_val):
        raise FitError("coherence constant is infinite: standard index unfittable")
    anchor = int(np.argmin(shifted.values))
    return ExtensionModel(shifted, cm, k_val, "standard", anchor=anchor, offset=offset)


def _dphi_to_training(m: ExtensionModel, X: np.ndarray) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    return m.cm.pairwise(X, m.training.points)


def whitney_batch(m: ExtensionModel, X) -> np.ndarray:
    D = _dphi_to_training(m, X)
    return np.min(m.training.values[None, :] + m.K * D, axis=1)


def mcshane_batch(m: ExtensionModel, X) -> np.ndarray:
    D = _dphi_to_training(m, X)
    return np.max(m.training.values[None, :] - m.K * D, axis=1)


def blend_batch(m: ExtensionModel, X, alpha: float | None = None) -> np.ndarray:
    a = m.alpha if alpha is None else alpha
    if a is None:
        raise ValueError("blend requires an alpha (fit one or pass it)")
    if not 0.0 <= a <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {a}")
    return (1.0 - a) * whitney_batch(m, X) + a * mcshane_batch(m, X)


def standard_batch(m: ExtensionModel, X) -> np.ndarray:
    if m.anchor is None:
        raise ValueError("model was not fitted with the standard method")
    D = _dphi_to_training(m, X)
    return m.offset + m.K * D[:, m.anchor]


def whitney_predict(m: ExtensionModel, x) -> float:
    return float(whitney_batch(m, np.asarray(x, dtype=float)[None, :])[0])


def mcshane_predict(m: ExtensionModel, x) -> float:
    return float(mcshane_batch(m, np.asarray(x, dtype=float)[None, :])[0])


def blend_predict(m: ExtensionModel, x, alpha: float | None = None) -> float:
    return float(blend_batch(m, np.asarray(x, dtype=float)[None, :], alpha)[0])


def standard_predict(m: ExtensionModel, x) -> float:
    return float(standard_batch(m, np.asarray(x, dtype=float)[None, :])[0])


def predict(m: ExtensionModel, X) -> np.ndarray:
    """Batch prediction dispatched on the fitted method."""
    if m.method == "whitney":
        return whitney_batch(m, X)
    if m.method == "mcshane":
        return mcshane_batch(m, X)
    if m.method == "blend":
        return blend_batch(m, X)
    return standard_batch(m, X)


def optimal_alpha(i_true, i_whitney, i_mcshane) -> float:
    """Closed-form least-squares blend weight, clamped to [0, 1].

    Minimizes sum((I - ((1-a)*W + a*M))^2) over a in [0, 1].  The objective
    is a convex quadratic in a, so clamping the stationary point

        a0 = sum((W - I) * (W - M)) / sum((W - M)^2)

    to the unit interval yields the constrained minimizer.  When W == M
    pointwise every alpha is optimal; 0.5 is returned with a warning.
    """
    t = np.asarray(i_true, dtype=float).reshape(-1)
    w = np.asarray(i_whitney, dtype=float).reshape(-1)
    m = np.asarray(i_mcshane, dtype=float).reshape(-1)
    if not (t.shape == w.shape == m.shape) or t.size == 0:
        raise ValueError("inputs must be non-empty and of equal length")
    gap = w - m
    denom = float(np.sum(gap * gap))
    if denom == 0.0:
        warnings.warn(
            "degenerate blend: whitney and mcshane coincide on the reference "
            "set, any alpha is optimal; returning 0.5",
            stacklevel=2,
        )
        return 0.5
    a0 = float(np.sum((w - t) * gap)) / denom
    return min(1.0, max(0.0, a0))
