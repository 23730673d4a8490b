"""Synthetic benchmarks: recall x radius metric surfaces and small decomposition toys."""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from .classical import efficiency, jaccard, pair_within_radius, rmse
from .flat import flat_metric
from .measures import new_measure, uniform_normalize

__all__ = [
    "SurfaceConfig",
    "SurfaceGrid",
    "sample_ground_truth",
    "apply_recall",
    "perturb_in_disk",
    "surface_sweep",
    "toy_example",
]


def _rng(seed):
    return np.random.default_rng(seed)


@dataclass(frozen=True)
class SurfaceConfig:
    n_points: int = 100
    side: float = 6400.0  # nm
    radius_max: float = 250.0  # nm
    radius_steps: int = 51
    recall_steps: int = 51
    trials: int = 50
    lam: float = 125.0  # nm
    alpha: float = 1.0  # nm^-1
    r_tol: float | None = None  # defaults to radius_max
    master_seed: int = 0

    def __post_init__(self):
        for name in ("n_points", "radius_steps", "recall_steps", "trials"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be >= 1")
        for name in ("side", "radius_max", "lam", "alpha"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        if self.r_tol is not None and not self.r_tol > 0:
            raise ValueError("r_tol must be > 0")

    @property
    def tolerance(self) -> float:
        return self.radius_max if self.r_tol is None else self.r_tol

    def radii(self) -> np.ndarray:
        return np.linspace(0.0, self.radius_max, self.radius_steps)

    def recalls(self) -> np.ndarray:
        return np.linspace(0.0, 100.0, self.recall_steps)


@dataclass(frozen=True)
class SurfaceGrid:
    """Per-cell means indexed ``[radius_index, recall_index]``.

    ``rmse`` averages over trials that had at least one match and is NaN in
    cells where no trial did (recall 0).
    """

    config: SurfaceConfig
    radii: np.ndarray
    recalls: np.ndarray
    flat_metric: np.ndarray
    efficiency: np.ndarray
    jaccard: np.ndarray
    rmse: np.ndarray
    trials: np.ndarray

    @property
    def shape(self):
        return self.flat_metric.shape

    def metadata(self) -> dict:
        meta = asdict(self.config)
        meta["ground_truth"] = "fresh sample per trial"
        meta["seeding"] = "SeedSequence(master_seed, spawn_key=(radius_index, recall_index, trial))"
        return meta


def sample_ground_truth(n, side, seed=None) -> np.ndarray:
    """``n`` i.i.d. uniform points in ``[0, side]^2``."""
    if n < 1 or not side > 0:
        raise ValueError("need n >= 1 and side > 0")
    return _rng(seed).uniform(0.0, side, size=(int(n), 2))


def apply_recall(points, recall, seed=None) -> np.ndarray:
    """Keep ``round(n * recall / 100)`` points, drawn without replacement.

    Retained points keep their original relative order.
    """
    if not 0.0 <= recall <= 100.0:
        raise ValueError(f"recall must be within [0, 100], got {recall}")
    points = np.asarray(points, dtype=np.float64)
    n = points.shape[0]
    k = int(np.floor(n * recall / 100.0 + 0.5))
    if k >= n:
        return points.copy()
    keep = np.sort(_rng(seed).choice(n, size=k, replace=False))
    return points[keep]


def disk_displacements(n, radius, seed=None) -> np.ndarray:
    """``n`` vectors uniform over the area of the disk of the given radius."""
    rng = _rng(seed)
    r = radius * np.sqrt(rng.random(n))
    theta = rng.uniform(0.0, 2.0 * np.pi, n)
    return np.column_stack([r * np.cos(theta), r * np.sin(theta)])


def perturb_in_disk(points, radius, seed=None) -> np.ndarray:
    if radius < 0:
        raise ValueError("radius must be >= 0")
    points = np.asarray(points, dtype=np.float64)
    if points.shape[0] and points.shape[1] != 2:
        raise ValueError("disk perturbation is defined for 2-D points")
    if radius == 0 or points.shape[0] == 0:
        return points.copy()
    return points + disk_displacements(points.shape[0], radius, seed)


def _cell(cfg: SurfaceConfig, i: int, j: int):
    radius = float(cfg.radii()[i])
    recall = float(cfg.recalls()[j])
    flat = np.empty(cfg.trials)
    eff = np.empty(cfg.trials)
    jac = np.empty(cfg.trials)
    err = np.full(cfg.trials, np.nan)
    for t in range(cfg.trials):
        rng = _rng(np.random.SeedSequence(cfg.master_seed, spawn_key=(i, j, t)))
        gt = sample_ground_truth(cfg.n_points, cfg.side, rng)
        det = perturb_in_disk(apply_recall(gt, recall, rng), radius, rng)
        mu, nu = uniform_normalize(gt, det)
        flat[t] = flat_metric(mu, nu, cfg.lam).value
        pairing = pair_within_radius(gt, det, cfg.tolerance)
        J = jaccard(pairing)
        e = rmse(pairing)
        jac[t] = J
        eff[t] = efficiency(J, 0.0 if e is None else e, cfg.alpha)
        if e is not None:
            err[t] = e
    defined = ~np.isnan(err)
    mean_err = float(np.mean(err[defined])) if defined.any() else float("nan")
    return float(np.mean(flat)), float(np.mean(eff)), float(np.mean(jac)), mean_err


def _cell_task(args):
    return _cell(*args)


def surface_sweep(cfg: SurfaceConfig, workers=1) -> SurfaceGrid:
    """Mean flat metric, efficiency, J and RMSE over a radius x recall grid.

    Each trial draws its own ground truth from a seed derived from
    ``(master_seed, radius index, recall index, trial)``, so the grid does not
    depend on ``workers``.
    """
    shape = (cfg.radius_steps, cfg.recall_steps)
    cells = [(cfg, i, j) for i in range(shape[0]) for j in range(shape[1])]
    if workers == 0:
        workers = os.cpu_count() or 1
    if workers > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_cell_task, cells, chunksize=max(1, len(cells) // (4 * workers))))
    else:
        results = [_cell_task(c) for c in cells]
    out = np.array(results, dtype=np.float64).reshape(shape + (4,))
    return SurfaceGrid(
        config=cfg,
        radii=cfg.radii(),
        recalls=cfg.recalls(),
        flat_metric=out[..., 0],
        efficiency=out[..., 1],
        jaccard=out[..., 2],
        rmse=out[..., 3],
        trials=np.full(shape, cfg.trials, dtype=np.int64),
    )


def toy_example(n=15, lam=0.1, seed=None, n_missed=2, n_spurious=2, radius=0.08):
    """Small 2-D scene in ``[0, 1] x [0, 0.5]`` for inspecting a decomposition.

    Detections are the ground truth minus ``n_missed`` points, each survivor
    shifted uniformly within ``radius``, plus ``n_spurious`` uniform false
    positives. Returns ``(mu, nu, result)`` with weights ``1/n`` on both sides.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = _rng(seed)
    low, high = np.array([0.0, 0.0]), np.array([1.0, 0.5])
    gt = rng.uniform(low, high, size=(n, 2))
    n_missed = min(int(n_missed), n)
    kept = np.sort(rng.choice(n, size=n - n_missed, replace=False))
    det = perturb_in_disk(gt[kept], radius, rng)
    if n_spurious:
        det = np.vstack([det, rng.uniform(low, high, size=(int(n_spurious), 2))])
    det = np.clip(det, low, high)
    w = 1.0 / n
    mu = new_measure(gt, np.full(n, w))
    nu = new_measure(det, np.full(det.shape[0], w))
    return mu, nu, flat_metric(mu, nu, lam)
