"""Divergence and separability diagnostics for posterior tables.

Natural logarithms throughout. Probability vectors are clamped to
[1e-12, 1] and renormalized before divergence computation so softmax
underflow cannot produce infinities.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .models import PosteriorTable

__all__ = [
    "DivergenceRecord",
    "NeighborJsRecord",
    "GapRecord",
    "Ecdf",
    "Histogram",
    "kl_divergence",
    "js_divergence",
    "neighbor_js_profile",
    "logit_transform",
    "performance_gap",
    "regime_kl_profile",
    "aggregate",
]

CLAMP_FLOOR = 1e-12
LOGIT_EPS = 1e-6
HIST_BINS = 50


def _clamp_normalize(p: np.ndarray) -> np.ndarray:
    p = np.clip(np.asarray(p, dtype=np.float64), CLAMP_FLOOR, 1.0)
    return p / p.sum()


def kl_divergence(p, q) -> float:
    """D_KL(p || q) after clamping; non-negative, zero iff p == q."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise ValueError(f"dimension mismatch: {p.shape} vs {q.shape}")
    p = _clamp_normalize(p)
    q = _clamp_normalize(q)
    # roundoff can land a hair below zero when p ~ q
    return max(0.0, float(np.sum(p * np.log(p / q))))


def js_divergence(p, q) -> float:
    """Jensen-Shannon divergence: symmetric, bounded by ln 2."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise ValueError(f"dimension mismatch: {p.shape} vs {q.shape}")
    p = _clamp_normalize(p)
    q = _clamp_normalize(q)
    m = 0.5 * (p + q)
    return 0.5 * float(np.sum(p * np.log(p / m))) + 0.5 * float(np.sum(q * np.log(q / m)))


def logit_transform(p: float) -> float:
    """log-odds with clamping to [1e-6, 1 - 1e-6]; zero at p = 0.5 and the
    inverse of the sigmoid inside the clamped range."""
    p = min(max(float(p), LOGIT_EPS), 1.0 - LOGIT_EPS)
    return math.log(p / (1.0 - p))


def sigmoid(z: float) -> float:
    return 1.0 / (1.0 + math.exp(-z))


def performance_gap(train_acc: float, test_acc: float) -> float:
    """Percentage decrease of test accuracy relative to train accuracy."""
    if train_acc <= 0:
        raise ValueError("performance gap requires train accuracy > 0")
    return (train_acc - test_acc) / train_acc * 100.0


@dataclass(frozen=True)
class GapRecord:
    train_acc: float
    test_acc: float

    @property
    def gap_percent(self) -> float:
        return performance_gap(self.train_acc, self.test_acc)


@dataclass(frozen=True)
class Ecdf:
    """Empirical CDF: sorted sample values with cumulative fractions."""

    values: np.ndarray
    fractions: np.ndarray

    @classmethod
    def from_samples(cls, samples) -> "Ecdf":
        values = np.sort(np.asarray(samples, dtype=np.float64))
        if values.size == 0:
            raise ValueError("ECDF needs at least one sample")
        fractions = np.arange(1, values.size + 1) / values.size
        return cls(values, fractions)

    def at(self, x: float) -> float:
        return float(np.searchsorted(self.values, x, side="right") / self.values.size)


@dataclass(frozen=True)
class Histogram:
    """Fixed-bin histogram with explicit edges so plots reproduce exactly."""

    edges: np.ndarray
    counts: np.ndarray

    @classmethod
    def from_samples(cls, samples, bins: int = HIST_BINS,
                     value_range: tuple[float, float] | None = None) -> "Histogram":
        samples = np.asarray(samples, dtype=np.float64)
        if value_range is None:
            lo = float(samples.min()) if samples.size else 0.0
            hi = float(samples.max()) if samples.size else 1.0
            if lo == hi:
                hi = lo + 1.0
            value_range = (lo, hi)
        counts, edges = np.histogram(samples, bins=bins, range=value_range)
        return cls(edges=edges, counts=counts)


@dataclass(frozen=True)
class DivergenceRecord:
    node_id: int
    kl: float


@dataclass(frozen=True)
class NeighborJsRecord:
    node_id: int
    mean_js: float


def neighbor_js_profile(posteriors: PosteriorTable, orig_edges: np.ndarray
                        ) -> tuple[list[NeighborJsRecord], Ecdf]:
    """Per-node mean JS divergence to neighbors along the given edge set.

    Nodes with no incident edge are skipped; the ECDF summarizes the
    defined per-node scores.
    """
    pos = {int(v): i for i, v in enumerate(posteriors.node_ids)}
    sums: dict[int, float] = {}
    counts: dict[int, int] = {}
    for u, v in np.asarray(orig_edges).reshape(-1, 2):
        u, v = int(u), int(v)
        d = js_divergence(posteriors.probs[pos[u]], posteriors.probs[pos[v]])
        for a in (u, v):
            sums[a] = sums.get(a, 0.0) + d
            counts[a] = counts.get(a, 0) + 1
    records = [NeighborJsRecord(v, sums[v] / counts[v]) for v in sorted(sums)]
    if not records:
        raise ValueError("no edges given; every node is isolated")
    ecdf = Ecdf.from_samples([r.mean_js for r in records])
    return records, ecdf


def regime_kl_profile(table_a: PosteriorTable, table_b: PosteriorTable,
                      member_mask: np.ndarray,
                      bins: int = HIST_BINS):
    """Per-node KL between two posterior tables of the same frozen model.

    Returns the records (sorted by node id) plus member / non-member
    histograms over a shared binning of the observed range.
    """
    if not np.array_equal(table_a.node_ids, table_b.node_ids):
        raise ValueError("posterior tables cover different node sets")
    records = [
        DivergenceRecord(int(v), kl_divergence(table_a.probs[i], table_b.probs[i]))
        for i, v in enumerate(table_a.node_ids)
    ]
    values = np.array([r.kl for r in records])
    member_mask = np.asarray(member_mask, dtype=bool)
    lo, hi = float(values.min()), float(values.max())
    if lo == hi:
        hi = lo + 1.0
    member_hist = Histogram.from_samples(values[member_mask], bins, (lo, hi))
    nonmember_hist = Histogram.from_samples(values[~member_mask], bins, (lo, hi))
    return records, member_hist, nonmember_hist


def separability_score(scores, member_mask) -> float:
    """Threshold-max TPR - FPR of raw scores, as a scalar summary of
    how well the score distribution separates members from non-members."""
    from .attack import MEMBER, NONMEMBER, membership_advantage

    labels = np.where(np.asarray(member_mask, dtype=bool), MEMBER, NONMEMBER)
    return membership_advantage(scores, labels).advantage


def aggregate(records, key_fn, value_fn) -> dict:
    """Group records and return {key: (mean, sample_std, count)}.

    Sample standard deviation uses the n-1 denominator; a single-record
    group has std 0. Keys come back in sorted order.
    """
    groups: dict = {}
    for r in records:
        groups.setdefault(key_fn(r), []).append(value_fn(r))
    if not groups:
        raise ValueError("nothing to aggregate")
    out = {}
    for key in sorted(groups):
        vals = np.asarray(groups[key], dtype=np.float64)
        if vals.size == 0:
            raise ValueError("empty aggregation group")
        std = float(vals.std(ddof=1)) if vals.size > 1 else 0.0
        out[key] = (float(vals.mean()), std, int(vals.size))
    return out
