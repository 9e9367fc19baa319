"""Finite-sample constants that control index extension error.

For an indexed sample (points a_i, values I_i) under a composed metric, three
quantities are computed exactly by maximizing over the finite pair set:

* ``K`` (coherence): max |I_i - I_j| / d(a_i, a_j), the smallest Lipschitz
  constant of the index with respect to the composed metric.
* ``Q`` (normalization): max d(a_i, a_j) / (|I_i| + |I_j|), the smallest
  Katetov constant.
* ``C``: max |I_i|, the sup norm of the index.

The approximation error of anchor-based extension is bounded by
(K*Q - 1) * C once the index has been shifted so its minimum is zero.
Constants can legitimately be infinite (duplicate points with distinct
values, or zero Katetov denominators on distinct points); infinities are
returned as values rather than raised, so optimizers can penalize them.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .metrics import CompositionMetric, pairwise_base
from .phi import phi_eval


@dataclass(frozen=True, eq=False)
class IndexedSample:
    """Feature vectors with a known index value per row."""

    points: np.ndarray  # (n, m)
    values: np.ndarray  # (n,)

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        vals = np.asarray(self.values, dtype=float).reshape(-1)
        if pts.shape[0] != vals.shape[0]:
            raise ValueError("points and values must have the same length")
        if pts.shape[0] < 1:
            raise ValueError("sample must contain at least one row")
        if not np.all(np.isfinite(pts)) or not np.all(np.isfinite(vals)):
            raise ValueError("points and values must be finite")
        pts = pts.copy()
        vals = vals.copy()
        pts.setflags(write=False)
        vals.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "values", vals)

    def __len__(self) -> int:
        return self.points.shape[0]


@dataclass(frozen=True)
class ConstantsReport:
    K: float
    Q: float
    C: float
    bound: float
    k_pair: tuple[int, int] | None
    q_pair: tuple[int, int] | None
    notes: tuple[str, ...] = ()

    def to_json_dict(self) -> dict:
        def enc(v):
            return "inf" if math.isinf(v) else v

        return {
            "K": enc(self.K),
            "Q": enc(self.Q),
            "C": self.C,
            "bound": enc(self.bound),
            "k_pair": list(self.k_pair) if self.k_pair is not None else None,
            "q_pair": list(self.q_pair) if self.q_pair is not None else None,
            "notes": list(self.notes),
        }


def _pair_distances(s: IndexedSample, cm: CompositionMetric):
    """Condensed upper-triangle pair data in lexicographic (i, j) order."""
    n = len(s)
    if n < 2:
        raise ValueError("need at least two rows")
    i_idx, j_idx = np.triu_indices(n, k=1)
    d_base = pairwise_base(cm.base, s.points, s.points)[i_idx, j_idx]
    d_phi = phi_eval(cm.phi, d_base)
    return i_idx, j_idx, d_phi


def _ratio_max(num: np.ndarray, den: np.ndarray, i_idx, j_idx):
    """Max of num/den over den > 0; +inf if some den == 0 has num > 0.

    Returns (value, pair).  np.argmax keeps the first occurrence of the
    maximum, and the condensed order is lexicographic, so ties resolve to
    the smallest (i, j) automatically.
    """
    violated = (den == 0.0) & (num > 0.0)
    if np.any(violated):
        k = int(np.flatnonzero(violated)[0])
        return math.inf, (int(i_idx[k]), int(j_idx[k]))
    ok = den > 0.0
    if not np.any(ok):
        return 0.0, None
    ratios = np.where(ok, num / np.where(ok, den, 1.0), -math.inf)
    k = int(np.argmax(ratios))
    return float(ratios[k]), (int(i_idx[k]), int(j_idx[k]))


def coherence_constant(s: IndexedSample, cm: CompositionMetric) -> float:
    """Smallest Lipschitz constant of the index; +inf if not coherent."""
    i_idx, j_idx, d_phi = _pair_distances(s, cm)
    num = np.abs(s.values[i_idx] - s.values[j_idx])
    return _ratio_max(num, d_phi, i_idx, j_idx)[0]


def normalization_constant(s: IndexedSample, cm: CompositionMetric) -> float:
    """Smallest Katetov constant of the index; +inf when unnormalizable."""
    i_idx, j_idx, d_phi = _pair_distances(s, cm)
    den = np.abs(s.values[i_idx]) + np.abs(s.values[j_idx])
    return _ratio_max(d_phi, den, i_idx, j_idx)[0]


def index_bound(s: IndexedSample) -> float:
    """Sup norm of the index values."""
    return float(np.max(np.abs(s.values)))


def error_bound(K: float, Q: float, C: float) -> float:
    """The worst-case anchor-extension error (K*Q - 1) * C.

    Valid for shifted non-negative indices, where K*Q >= 1 is automatic.
    When K*Q < 1 the formula would go negative, which signals inputs outside
    that regime; the bound degrades to 0 with a warning.
    """
    if not (math.isfinite(K) and math.isfinite(Q) and math.isfinite(C)):
        return math.inf
    kq = K * Q
    if kq < 1.0:
        warnings.warn(
            f"K*Q = {kq} < 1: error bound clamped to 0 (input outside the "
            "shifted-index regime)",
            stacklevel=2,
        )
        return 0.0
    return (kq - 1.0) * C


def katetov_shift(s: IndexedSample) -> IndexedSample:
    """Shift values so the minimum is exactly zero; ordering is preserved."""
    return IndexedSample(s.points, s.values - np.min(s.values))


def constants_report(s: IndexedSample, cm: CompositionMetric) -> ConstantsReport:
    """Compute K, Q, C and the error bound with achieving pairs.

    Reported argmax pairs reproduce the max ratio exactly.  Infinite K or Q
    is flagged in ``notes`` together with the offending pair.
    """
    i_idx, j_idx, d_phi = _pair_distances(s, cm)
    vals = s.values
    d_vals = np.abs(vals[i_idx] - vals[j_idx])
    denom = np.abs(vals[i_idx]) + np.abs(vals[j_idx])

    K, k_pair = _ratio_max(d_vals, d_phi, i_idx, j_idx)
    # Katetov pairs with d_phi == 0 impose no constraint, so only distances
    # over a zero denominator can force Q to infinity.
    Q, q_pair = _ratio_max(d_phi, denom, i_idx, j_idx)
    C = index_bound(s)

    notes = []
    if math.isinf(K):
        notes.append(f"not coherent: rows {k_pair} coincide but carry distinct values")
    if math.isinf(Q):
        notes.append(f"not normalizable: rows {q_pair} are distinct with |I|+|I| = 0")
    bound = error_bound(K, Q, C) if notes == [] else math.inf
    return ConstantsReport(K, Q, C, bound, k_pair, q_pair, tuple(notes))
