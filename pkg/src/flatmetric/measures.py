"""Discrete Radon measures: weighted point sets in physical coordinates (nm)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from ._validation import check_points, check_weights

__all__ = [
    "DiscreteMeasure",
    "new_measure",
    "uniform_normalize",
    "distance_matrix",
    "total_mass",
]


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """Weighted sum of Dirac masses ``sum_n w_n delta_{x_n}``.

    ``points`` has shape ``(n, dim)`` and ``weights`` shape ``(n,)``; both are
    read-only arrays. An empty support is the zero measure.
    """

    points: np.ndarray
    weights: np.ndarray

    @property
    def dim(self) -> int:
        return int(self.points.shape[1])

    @property
    def n_atoms(self) -> int:
        return int(self.points.shape[0])

    def __len__(self) -> int:
        return self.n_atoms

    @property
    def mass(self) -> float:
        return total_mass(self)

    def is_zero(self) -> bool:
        return self.n_atoms == 0

    def scaled(self, coord_scale=1.0, weight_scale=1.0) -> "DiscreteMeasure":
        """Return a copy with coordinates and weights multiplied by the given factors."""
        return new_measure(self.points * coord_scale, self.weights * weight_scale)

    def uniform_weight(self):
        """The common atom weight if all atoms carry the same weight, else ``None``."""
        if self.n_atoms == 0:
            return None
        w0 = self.weights[0]
        return float(w0) if np.all(self.weights == w0) else None

    def key(self) -> tuple:
        """Total-order key used to pick a canonical orientation in the solver."""
        return (self.n_atoms, tuple(self.points.ravel().tolist()), tuple(self.weights.tolist()))

    def __repr__(self) -> str:
        return f"DiscreteMeasure(n_atoms={self.n_atoms}, dim={self.dim}, mass={self.mass:.6g})"


def new_measure(points, weights, dim=None) -> DiscreteMeasure:
    """Build a validated measure; atom order is preserved and nothing is deduplicated.

    Raises
    ------
    ValueError
        On dimension or length mismatch, non-finite coordinates, or
        non-positive / non-finite weights.
    """
    pts = check_points(points, dim=dim)
    w = check_weights(weights, pts.shape[0])
    return DiscreteMeasure(pts, w)


def uniform_normalize(gt, det):
    """Weight every atom of both sets by ``1/N`` with ``N = len(gt)``.

    The ground truth ends up with unit mass and the detections with mass
    ``M/N``, so sets with different detection counts stay comparable.
    """
    gt_pts = check_points(gt, name="gt")
    n = gt_pts.shape[0]
    if n == 0:
        raise ValueError("ground truth must contain at least one point")
    det_pts = check_points(det, dim=gt_pts.shape[1], name="det")
    w = 1.0 / n
    mu = DiscreteMeasure(gt_pts, _frozen(np.full(n, w)))
    nu = DiscreteMeasure(det_pts, _frozen(np.full(det_pts.shape[0], w)))
    return mu, nu


def distance_matrix(mu: DiscreteMeasure, nu: DiscreteMeasure) -> np.ndarray:
    """Euclidean distances ``D[n, m] = |x_n - y_m|``, shape ``(len(mu), len(nu))``."""
    if mu.dim != nu.dim:
        raise ValueError(f"dimension mismatch ({mu.dim} != {nu.dim})")
    if mu.n_atoms == 0 or nu.n_atoms == 0:
        return np.zeros((mu.n_atoms, nu.n_atoms))
    return cdist(mu.points, nu.points)


def total_mass(mu: DiscreteMeasure) -> float:
    return float(np.sum(mu.weights)) if mu.n_atoms else 0.0


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a
