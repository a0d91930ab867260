"""Group-conditional risks, disparity metrics, Pareto dominance and archive."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

CLAMP = 1e-12
SIMPLEX_TOL = 1e-6


class InputError(ValueError):
    """Raised when an operation receives malformed input."""


@dataclass(frozen=True)
class RiskVector:
    """Per-group expected losses and the sample counts behind them."""

    risks: np.ndarray
    counts: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "risks", np.asarray(self.risks, dtype=float))
        object.__setattr__(self, "counts", np.asarray(self.counts, dtype=int))
        if self.risks.ndim != 1 or self.counts.shape != self.risks.shape:
            raise InputError("risks and counts must be 1-d arrays of equal length")
        if not np.all(np.isfinite(self.risks)) or np.any(self.risks < 0):
            raise InputError("risks must be finite and nonnegative")

    @property
    def num_groups(self) -> int:
        return self.risks.shape[0]


@dataclass(frozen=True)
class GapReport:
    """Pairwise absolute risk differences and their maximum."""

    pairwise: dict
    max_gap: float


def _check_simplex(probs: np.ndarray):
    if probs.ndim != 1 or probs.shape[0] < 1:
        raise InputError("probability vector must be 1-d and nonempty")
    if not np.all(np.isfinite(probs)) or np.any(probs < -SIMPLEX_TOL):
        raise InputError("probability vector has invalid entries")
    if abs(float(probs.sum()) - 1.0) > SIMPLEX_TOL:
        raise InputError(f"probabilities sum to {probs.sum()}, expected 1")


def brier_loss(probs, target: int) -> float:
    """Squared distance between a class-probability vector and the one-hot target.

    Full multiclass form: sum over classes of (p_j - y_j)^2, range [0, 2].
    """
    probs = np.asarray(probs, dtype=float)
    _check_simplex(probs)
    if not 0 <= target < probs.shape[0]:
        raise InputError(f"target {target} out of range for {probs.shape[0]} classes")
    onehot = np.zeros_like(probs)
    onehot[target] = 1.0
    return float(np.sum((probs - onehot) ** 2))


def cross_entropy_loss(probs, target: int) -> float:
    """Negative log probability of the target, clamped away from 0 and 1."""
    probs = np.asarray(probs, dtype=float)
    _check_simplex(probs)
    if not 0 <= target < probs.shape[0]:
        raise InputError(f"target {target} out of range for {probs.shape[0]} classes")
    return float(-np.log(np.clip(probs[target], CLAMP, 1.0 - CLAMP)))


def sample_losses(probs: np.ndarray, targets: np.ndarray, loss: str = "brier") -> np.ndarray:
    """Vectorized per-sample losses for an n x C probability matrix."""
    probs = np.asarray(probs, dtype=float)
    targets = np.asarray(targets, dtype=int)
    n, C = probs.shape
    if targets.shape != (n,):
        raise InputError("targets length does not match probability rows")
    if targets.min(initial=0) < 0 or targets.max(initial=0) >= C:
        raise InputError("target label out of range")
    if loss == "brier":
        onehot = np.zeros((n, C))
        onehot[np.arange(n), targets] = 1.0
        return np.sum((probs - onehot) ** 2, axis=1)
    if loss == "cross_entropy":
        p = np.clip(probs[np.arange(n), targets], CLAMP, 1.0 - CLAMP)
        return -np.log(p)
    raise InputError(f"unknown loss '{loss}'")


def group_risks(probs: np.ndarray, targets, groups, loss: str = "brier") -> RiskVector:
    """Mean loss per group; every group id up to max(groups) must be present."""
    groups = np.asarray(groups, dtype=int)
    losses = sample_losses(probs, targets, loss)
    if groups.shape != losses.shape:
        raise InputError("groups length does not match probability rows")
    G = int(groups.max()) + 1
    risks = np.zeros(G)
    counts = np.zeros(G, dtype=int)
    for a in range(G):
        mask = groups == a
        counts[a] = int(mask.sum())
        if counts[a] == 0:
            raise InputError(f"group {a} has no samples; cannot estimate its risk")
        risks[a] = float(losses[mask].mean())
    return RiskVector(risks=risks, counts=counts)


def discrimination_gap(r: RiskVector) -> GapReport:
    """Pairwise |R_a - R_a'| and the max over all pairs (0 for a single group)."""
    risks = r.risks
    G = risks.shape[0]
    pairwise = {}
    for a in range(G):
        for b in range(a + 1, G):
            g = float(abs(risks[a] - risks[b]))
            pairwise[(a, b)] = g
            pairwise[(b, a)] = g
    max_gap = float(risks.max() - risks.min()) if G > 1 else 0.0
    return GapReport(pairwise=pairwise, max_gap=max_gap)


def max_gap(r: RiskVector) -> float:
    return discrimination_gap(r).max_gap


def dominates(r1, r2) -> bool:
    """True iff r1 is no worse in every group and strictly better in at least one."""
    a = r1.risks if isinstance(r1, RiskVector) else np.asarray(r1, dtype=float)
    b = r2.risks if isinstance(r2, RiskVector) else np.asarray(r2, dtype=float)
    if a.shape != b.shape:
        raise InputError("risk vectors have different lengths")
    return bool(np.all(a <= b) and np.any(a < b))


@dataclass(frozen=True)
class ParetoArchive:
    """Mutually non-dominated risk vectors with attached metadata."""

    entries: tuple = field(default_factory=tuple)

    def risk_vectors(self):
        return [e[0] for e in self.entries]


def archive_insert(archive: ParetoArchive, r: RiskVector, meta: Any = None):
    """Insert ``r`` unless an existing entry dominates it; prune entries it dominates.

    Returns (accepted, new_archive); the input archive is never mutated.
    """
    for existing, _meta in archive.entries:
        if dominates(existing, r):
            return False, archive
    kept = tuple(e for e in archive.entries if not dominates(r, e[0]))
    return True, ParetoArchive(entries=kept + ((r, meta),))


def metric_summary(per_group_metric, group_ratios):
    """Ratio-weighted mean, unweighted mean, and max-min discrepancy."""
    m = np.asarray(per_group_metric, dtype=float)
    w = np.asarray(group_ratios, dtype=float)
    if m.shape != w.shape:
        raise InputError("metric and ratio lengths differ")
    if abs(float(w.sum()) - 1.0) > 1e-6:
        raise InputError("group ratios must sum to 1")
    sample_mean = float(np.dot(m, w))
    group_mean = float(m.mean())
    discrepancy = float(m.max() - m.min())
    return sample_mean, group_mean, discrepancy
