"""Frame-grouped localization tables, dataset evaluation and report serialization.

Localization files are UTF-8 CSV with a mandatory header starting with
``frame,x,y`` or ``frame,x,y,z`` (case-insensitive). Additional columns are
allowed and ignored. Coordinates are in nanometers.
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .classical import (
    DEFAULT_ALPHA,
    DEFAULT_RADIUS_TOLERANCE,
    MetricPanel,
    PairingResult,
    pair_within_radius,
    panel_from_counts,
    rmse,
    rmsmd,
)
from .flat import flat_metric
from .measures import uniform_normalize

__all__ = [
    "ParseError",
    "FrameTable",
    "FrameEvaluation",
    "AggregateMetrics",
    "EvaluationReport",
    "parse_localizations",
    "write_localizations",
    "evaluate_dataset",
    "write_report",
    "read_report",
    "write_surface_csv",
    "read_surface_csv",
    "REPORT_COLUMNS",
    "SURFACE_COLUMNS",
]

REPORT_COLUMNS = (
    "frame",
    "flat_metric_nm",
    "jaccard",
    "precision",
    "recall",
    "rmse_nm",
    "rmsmd_nm",
    "efficiency",
    "n_gt",
    "n_det",
    "tp",
    "fp",
    "fn",
)
SURFACE_COLUMNS = ("radius_nm", "recall_pct", "flat_metric_nm", "efficiency", "jaccard", "rmse_nm", "trials")


class ParseError(ValueError):
    def __init__(self, path, line, message):
        self.path = str(path)
        self.line = line
        super().__init__(f"{path}:{line}: {message}")


@dataclass(frozen=True)
class FrameTable:
    """Point lists keyed by frame id, in ascending frame order."""

    frames: dict
    dim: int

    def __len__(self):
        return len(self.frames)

    def get(self, frame) -> np.ndarray:
        return self.frames.get(frame, np.zeros((0, self.dim)))

    def n_points(self) -> int:
        return sum(p.shape[0] for p in self.frames.values())

    def merged(self) -> np.ndarray:
        if not self.frames:
            return np.zeros((0, self.dim))
        return np.vstack(list(self.frames.values()))


def parse_localizations(path) -> FrameTable:
    """Read a localization CSV into a :class:`FrameTable`.

    Raises :class:`ParseError` (with the offending line number) on a bad
    header, non-numeric or non-finite values, wrong column counts,
    whitespace around separators, or frame ids that are not positive integers.
    """
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(path, 1, "missing header") from None
        names = [h.lower() for h in header]
        if any(h != h.strip() for h in header):
            raise ParseError(path, 1, "whitespace around separators is not allowed")
        if names[:3] != ["frame", "x", "y"]:
            raise ParseError(path, 1, f"header must start with frame,x,y (got {','.join(header)!r})")
        dim = 3 if len(names) > 3 and names[3] == "z" else 2
        width = len(header)

        rows = {}
        for record in reader:
            line = reader.line_num
            if not record:
                continue
            if len(record) != width:
                raise ParseError(path, line, f"expected {width} fields, got {len(record)}")
            if any(v != v.strip() for v in record[: 1 + dim]):
                raise ParseError(path, line, "whitespace around separators is not allowed")
            try:
                frame = int(record[0])
            except ValueError:
                raise ParseError(path, line, f"frame id {record[0]!r} is not an integer") from None
            if frame < 1:
                raise ParseError(path, line, f"frame id must be a positive integer, got {frame}")
            try:
                coords = [float(v) for v in record[1 : 1 + dim]]
            except ValueError:
                raise ParseError(path, line, "non-numeric coordinate") from None
            if not all(math.isfinite(c) for c in coords):
                raise ParseError(path, line, "non-finite coordinate")
            rows.setdefault(frame, []).append(coords)

    frames = {f: np.asarray(rows[f], dtype=np.float64).reshape(-1, dim) for f in sorted(rows)}
    return FrameTable(frames, dim)


def write_localizations(table: FrameTable, path) -> None:
    header = ["frame", "x", "y", "z"][: 1 + table.dim]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for frame, pts in table.frames.items():
            for p in pts:
                writer.writerow([frame] + [repr(float(c)) for c in p])


@dataclass(frozen=True)
class FrameEvaluation:
    frame: int
    flat_metric: float | None
    panel: MetricPanel
    n_gt: int
    n_det: int
    tp: int
    fp: int
    fn: int
    moves: int = 0
    creations: int = 0
    destructions: int = 0
    flags: tuple = ()


@dataclass(frozen=True)
class AggregateMetrics:
    flat_metric: float | None
    jaccard: float
    precision: float
    recall: float
    rmse: float | None
    rmsmd: float | None
    efficiency: float
    n_gt: int
    n_det: int
    tp: int
    fp: int
    fn: int
    n_frames: int
    n_flat_frames: int
    flags: tuple = ()


@dataclass(frozen=True)
class EvaluationReport:
    frames: tuple
    aggregate: AggregateMetrics
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        frames = []
        for fe in self.frames:
            d = asdict(fe)
            panel = d.pop("panel")
            panel["flags"] = list(panel["flags"])
            d["flags"] = list(d["flags"])
            d["panel"] = panel
            frames.append(d)
        agg = asdict(self.aggregate)
        agg["flags"] = list(agg["flags"])
        return {"config": dict(self.config), "aggregate": agg, "frames": frames}


def evaluate_dataset(
    gt: FrameTable,
    det: FrameTable,
    lam=125.0,
    r_tol=DEFAULT_RADIUS_TOLERANCE,
    alpha=DEFAULT_ALPHA,
) -> EvaluationReport:
    """Per-frame flat metric and classical metrics, plus dataset aggregates.

    Each frame is normalized with ``1/N`` for its own ground-truth count.
    Aggregates: flat metric averaged over frames with ground truth, J /
    precision / recall from pooled counts, RMSE pooled over every matched
    pair, RMSMD averaged over frames where it is defined.
    """
    if gt.dim != det.dim:
        raise ValueError(f"dimension mismatch ({gt.dim} != {det.dim})")
    if len(gt) == 0:
        raise ValueError("ground truth has no frames")
    extra = sorted(set(det.frames) - set(gt.frames))
    if extra:
        raise ValueError(f"detection frames without ground truth: {extra[:10]}")

    per_frame = []
    sq_dist = []
    flats = []
    rmsmds = []
    for frame in sorted(gt.frames):
        g = gt.get(frame)
        d = det.get(frame)
        pairing = pair_within_radius(g, d, r_tol)
        sq_dist.extend(x * x for x in pairing.distances.tolist())
        md = rmsmd(g, d)
        if md is not None:
            rmsmds.append(md)
        panel = panel_from_counts(pairing, rmse(pairing), md, alpha)
        flags = []
        if g.shape[0] == 0:
            flat = None
            counts = {"moves": 0, "creations": 0, "destructions": 0}
            flags.append("empty_ground_truth")
        else:
            mu, nu = uniform_normalize(g, d)
            res = flat_metric(mu, nu, lam)
            flat = res.value
            flats.append(flat)
            counts = res.decomposition.counts()
        per_frame.append(
            FrameEvaluation(
                frame=frame,
                flat_metric=flat,
                panel=panel,
                n_gt=int(g.shape[0]),
                n_det=int(d.shape[0]),
                tp=pairing.tp,
                fp=pairing.fp,
                fn=pairing.fn,
                flags=tuple(flags),
                **counts,
            )
        )

    tp = sum(f.tp for f in per_frame)
    fp = sum(f.fp for f in per_frame)
    fn = sum(f.fn for f in per_frame)
    pooled = PairingResult((), tp, fp, fn, float(r_tol))
    pooled_rmse = math.sqrt(math.fsum(sq_dist) / len(sq_dist)) if sq_dist else None
    mean_rmsmd = float(np.mean(rmsmds)) if rmsmds else None
    panel = panel_from_counts(pooled, pooled_rmse, mean_rmsmd, alpha)
    agg_flags = list(panel.flags)
    if len(flats) < len(per_frame):
        agg_flags.append("frames_without_ground_truth_skipped")
    aggregate = AggregateMetrics(
        flat_metric=float(np.mean(flats)) if flats else None,
        jaccard=panel.jaccard,
        precision=panel.precision,
        recall=panel.recall,
        rmse=pooled_rmse,
        rmsmd=mean_rmsmd,
        efficiency=panel.efficiency,
        n_gt=sum(f.n_gt for f in per_frame),
        n_det=sum(f.n_det for f in per_frame),
        tp=tp,
        fp=fp,
        fn=fn,
        n_frames=len(per_frame),
        n_flat_frames=len(flats),
        flags=tuple(agg_flags),
    )
    config = {
        "lambda_nm": float(lam),
        "radius_tolerance_nm": float(r_tol),
        "alpha_per_nm": float(alpha),
        "normalization": "uniform 1/N per frame (N = ground-truth count)",
        "flat_aggregation": "mean over frames with ground truth",
        "count_aggregation": "pooled tp/fp/fn",
    }
    return EvaluationReport(tuple(per_frame), aggregate, config)


def _num(x):
    return "" if x is None else repr(float(x))


def _report_rows(report: EvaluationReport):
    for f in report.frames:
        p = f.panel
        yield [
            str(f.frame),
            _num(f.flat_metric),
            _num(p.jaccard),
            _num(p.precision),
            _num(p.recall),
            _num(p.rmse),
            _num(p.rmsmd),
            _num(p.efficiency),
            f.n_gt,
            f.n_det,
            f.tp,
            f.fp,
            f.fn,
        ]
    a = report.aggregate
    yield [
        "aggregate",
        _num(a.flat_metric),
        _num(a.jaccard),
        _num(a.precision),
        _num(a.recall),
        _num(a.rmse),
        _num(a.rmsmd),
        _num(a.efficiency),
        a.n_gt,
        a.n_det,
        a.tp,
        a.fp,
        a.fn,
    ]


def write_report(report: EvaluationReport, path, format=None) -> None:
    """Write a report as ``json`` or ``csv`` (inferred from the suffix when omitted)."""
    if format is None:
        format = "json" if str(path).lower().endswith(".json") else "csv"
    if format == "json":
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(report.to_dict(), fh, indent=2, allow_nan=False)
            fh.write("\n")
    elif format == "csv":
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(REPORT_COLUMNS)
            writer.writerows(_report_rows(report))
    else:
        raise ValueError(f"unknown report format {format!r}")


def read_report(path):
    """Load a report written by :func:`write_report`.

    JSON gives back the nested dict; CSV gives a list of row dicts with
    numbers parsed and empty cells as ``None``.
    """
    if str(path).lower().endswith(".json"):
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            rec = {}
            for k, v in row.items():
                if k == "frame":
                    rec[k] = v if v == "aggregate" else int(v)
                elif k in ("n_gt", "n_det", "tp", "fp", "fn"):
                    rec[k] = int(v)
                else:
                    rec[k] = None if v == "" else float(v)
            out.append(rec)
    return out


def write_surface_csv(grid, path) -> None:
    """One row per (radius, recall) cell, radius-major; NaN means are left empty.

    ``path`` may also be an open text stream.
    """
    if hasattr(path, "write"):
        _write_surface(grid, path)
        return
    with open(path, "w", newline="", encoding="utf-8") as fh:
        _write_surface(grid, fh)


def _write_surface(grid, fh):
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(SURFACE_COLUMNS)
    for i, radius in enumerate(grid.radii):
        for j, recall in enumerate(grid.recalls):
            vals = [
                grid.flat_metric[i, j],
                grid.efficiency[i, j],
                grid.jaccard[i, j],
                grid.rmse[i, j],
            ]
            writer.writerow(
                [repr(float(radius)), repr(float(recall))]
                + ["" if math.isnan(v) else repr(float(v)) for v in vals]
                + [int(grid.trials[i, j])]
            )


def read_surface_csv(path) -> list:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = []
        for row in csv.DictReader(fh):
            rows.append(
                {k: (int(v) if k == "trials" else (float("nan") if v == "" else float(v))) for k, v in row.items()}
            )
    return rows


def ensure_parent(path) -> None:
    parent = os.path.dirname(os.fspath(path))
    if parent:
        os.makedirs(parent, exist_ok=True)
