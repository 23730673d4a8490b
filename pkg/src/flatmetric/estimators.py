"""Estimator-style wrappers so the metrics plug into scikit-learn tooling.

Both classes are *fitted on the ground truth* and then evaluate any number of
reconstructions against it::

    fm = FlatMetric(lam=125.0).fit(gt_points)
    fm.evaluate(det_points).value
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_points, check_positive
from .classical import DEFAULT_ALPHA, DEFAULT_RADIUS_TOLERANCE, metric_panel, pair_within_radius
from .flat import flat_metric
from .measures import new_measure


class FlatMetric(BaseEstimator):
    """Flat Metric of reconstructions against a fitted ground truth.

    Parameters
    ----------
    lam : float, default=125.0
        Creation/destruction cost per unit mass (nm). Moves longer than
        ``2 * lam`` are never made.
    normalization : {"uniform", "none"}, default="uniform"
        ``"uniform"`` weights every atom by ``1/N`` (``N`` = ground-truth
        count), so the result reads in nm. ``"none"`` uses unit weights.
    """

    def __init__(self, lam=125.0, normalization="uniform"):
        self.lam = lam
        self.normalization = normalization

    def fit(self, X, y=None):
        check_positive(self.lam, "lam")
        if self.normalization not in ("uniform", "none"):
            raise ValueError(f"unknown normalization {self.normalization!r}")
        X = check_points(X, name="X")
        if self.normalization == "uniform" and X.shape[0] == 0:
            raise ValueError("uniform normalization needs a nonempty ground truth")
        self.atom_weight_ = 1.0 / X.shape[0] if self.normalization == "uniform" else 1.0
        self.ground_truth_ = new_measure(X, np.full(X.shape[0], self.atom_weight_))
        self.n_features_in_ = X.shape[1]
        return self

    def _measure(self, Y):
        Y = check_points(Y, dim=self.n_features_in_, name="Y")
        return new_measure(Y, np.full(Y.shape[0], self.atom_weight_))

    def evaluate(self, Y):
        """Full :class:`~flatmetric.flat.FlatMetricResult` for the reconstruction ``Y``."""
        check_is_fitted(self, "ground_truth_")
        return flat_metric(self.ground_truth_, self._measure(Y), self.lam)

    def transform(self, Y):
        """Flat metric value as a ``(1,)`` array."""
        return np.array([self.evaluate(Y).value])

    def score(self, Y, y=None):
        """Negated flat metric, so that larger is better."""
        return -self.evaluate(Y).value


class LocalizationMetrics(BaseEstimator):
    """Pairing-based detection/localization metrics against a fitted ground truth."""

    def __init__(self, radius_tolerance=DEFAULT_RADIUS_TOLERANCE, alpha=DEFAULT_ALPHA):
        self.radius_tolerance = radius_tolerance
        self.alpha = alpha

    def fit(self, X, y=None):
        check_positive(self.radius_tolerance, "radius_tolerance")
        check_positive(self.alpha, "alpha")
        self.ground_truth_ = check_points(X, name="X")
        self.n_features_in_ = self.ground_truth_.shape[1]
        return self

    def pair(self, Y):
        check_is_fitted(self, "ground_truth_")
        Y = check_points(Y, dim=self.n_features_in_, name="Y")
        return pair_within_radius(self.ground_truth_, Y, self.radius_tolerance)

    def evaluate(self, Y):
        check_is_fitted(self, "ground_truth_")
        Y = check_points(Y, dim=self.n_features_in_, name="Y")
        return metric_panel(self.ground_truth_, Y, self.radius_tolerance, self.alpha)

    def score(self, Y, y=None):
        """Efficiency of the reconstruction."""
        return self.evaluate(Y).efficiency
