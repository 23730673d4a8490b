"""Detection and localization metrics: radius-tolerant pairing, J, precision/recall, RMSE, RMSMD, efficiency."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial import cKDTree
from scipy.spatial.distance import cdist

from ._validation import check_points, check_positive

__all__ = [
    "PairingResult",
    "MetricPanel",
    "pair_within_radius",
    "jaccard",
    "precision_recall",
    "rmse",
    "efficiency",
    "rmsmd",
    "metric_panel",
    "DEFAULT_ALPHA",
    "DEFAULT_RADIUS_TOLERANCE",
]

DEFAULT_ALPHA = 1.0  # nm^-1
DEFAULT_RADIUS_TOLERANCE = 250.0  # nm


@dataclass(frozen=True)
class PairingResult:
    matches: tuple  # (gt index, det index, distance)
    tp: int
    fp: int
    fn: int
    tolerance_radius: float

    @property
    def distances(self) -> np.ndarray:
        return np.array([d for _, _, d in self.matches], dtype=np.float64)


@dataclass(frozen=True)
class MetricPanel:
    """Classical metrics for one frame or a pooled dataset.

    ``rmse`` and ``rmsmd`` are ``None`` when undefined; ``flags`` names the
    empty-set conventions that were applied.
    """

    jaccard: float
    precision: float
    recall: float
    rmse: float | None
    rmsmd: float | None
    efficiency: float
    flags: tuple = field(default=())


def pair_within_radius(gt, det, r_tol=DEFAULT_RADIUS_TOLERANCE) -> PairingResult:
    """Match gt and det points closer than ``r_tol``.

    Maximizes the number of matches first and the total matched distance
    second, by solving one assignment problem in which every admissible pair
    earns a bonus larger than any possible total distance.
    """
    r_tol = check_positive(r_tol, "r_tol")
    gt = check_points(gt, name="gt")
    det = check_points(det, dim=gt.shape[1], name="det")
    n, m = gt.shape[0], det.shape[0]
    if n == 0 or m == 0:
        return PairingResult((), 0, m, n, r_tol)

    dist = cdist(gt, det)
    allowed = dist <= r_tol
    rows_any = np.flatnonzero(allowed.any(axis=1))
    cols_any = np.flatnonzero(allowed.any(axis=0))
    matches = []
    if rows_any.size:
        sub = dist[np.ix_(rows_any, cols_any)]
        ok = allowed[np.ix_(rows_any, cols_any)]
        bonus = r_tol * (min(sub.shape) + 1)
        cost = np.where(ok, sub - bonus, 0.0)
        ri, ci = linear_sum_assignment(cost)
        for i, j in zip(ri, ci):
            if ok[i, j]:
                matches.append((int(rows_any[i]), int(cols_any[j]), float(sub[i, j])))
    matches.sort()
    tp = len(matches)
    return PairingResult(tuple(matches), tp, m - tp, n - tp, r_tol)


def jaccard(p: PairingResult) -> float:
    """``100 * tp / (tp + fp + fn)``; two empty sets count as perfect agreement (100)."""
    denom = p.tp + p.fp + p.fn
    if denom == 0:
        return 100.0
    return 100.0 * p.tp / denom


def precision_recall(p: PairingResult):
    precision = 100.0 * p.tp / (p.tp + p.fp) if p.tp + p.fp else 100.0
    recall = 100.0 * p.tp / (p.tp + p.fn) if p.tp + p.fn else 100.0
    return precision, recall


def rmse(p: PairingResult):
    """Root-mean-square matched distance, or ``None`` without matches."""
    if p.tp == 0:
        return None
    d = p.distances
    return math.sqrt(float(np.mean(d * d)))


def efficiency(J, rmse_nm, alpha=DEFAULT_ALPHA) -> float:
    """Challenge efficiency ``100 - sqrt((100 - J)^2 + alpha^2 rmse^2)``."""
    alpha = check_positive(alpha, "alpha")
    if not 0.0 <= J <= 100.0:
        raise ValueError(f"Jaccard index must be in [0, 100], got {J}")
    if rmse_nm < 0:
        raise ValueError("rmse must be nonnegative")
    return 100.0 - math.sqrt((100.0 - J) ** 2 + (alpha * rmse_nm) ** 2)


def rmsmd(gt, det):
    """Root-mean-square of nearest-neighbour distances taken in both directions.

    Returns ``None`` when either set is empty.
    """
    gt = check_points(gt, name="gt")
    det = check_points(det, dim=gt.shape[1], name="det")
    if gt.shape[0] == 0 or det.shape[0] == 0:
        return None
    d_gt, _ = cKDTree(det).query(gt)
    d_det, _ = cKDTree(gt).query(det)
    total = float(np.sum(d_gt**2) + np.sum(d_det**2))
    return math.sqrt(total / (gt.shape[0] + det.shape[0]))


def metric_panel(gt, det, r_tol=DEFAULT_RADIUS_TOLERANCE, alpha=DEFAULT_ALPHA, pairing=None) -> MetricPanel:
    if pairing is None:
        pairing = pair_within_radius(gt, det, r_tol)
    return panel_from_counts(pairing, rmse(pairing), rmsmd(gt, det), alpha)


def panel_from_counts(pairing, rmse_nm, rmsmd_nm, alpha=DEFAULT_ALPHA) -> MetricPanel:
    flags = []
    if pairing.tp + pairing.fp + pairing.fn == 0:
        flags.append("jaccard_empty_sets")
    J = jaccard(pairing)
    precision, recall = precision_recall(pairing)
    if pairing.tp + pairing.fp == 0:
        flags.append("precision_no_detections")
    if pairing.tp + pairing.fn == 0:
        flags.append("recall_no_ground_truth")
    if rmse_nm is None:
        flags.append("rmse_absent")
    if rmsmd_nm is None:
        flags.append("rmsmd_absent")
    eff = efficiency(J, 0.0 if rmse_nm is None else rmse_nm, alpha)
    return MetricPanel(J, precision, recall, rmse_nm, rmsmd_nm, eff, tuple(flags))
