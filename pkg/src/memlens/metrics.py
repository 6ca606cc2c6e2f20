"""Ranking metrics, per-category breakdowns, and quantile-binned reports.

All metrics are rank-determined with a deterministic tie-break (equal scores
ordered by smaller item index), so results are invariant under positive
affine rescaling of scores and reproducible across runs.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .attribution import GENERALIZATION_TYPES, CategoryRecord

_PROB_SUM_TOL = 1e-6


@dataclass
class PredictionList:
    """A model's ranked candidate list for one user.

    Scores must be non-increasing in input order with no duplicate items.
    When ``is_probability`` is set the scores must form a sub-distribution
    (each in [0,1], summing to at most 1).
    """

    user: int
    ranked: list[tuple[int, float]]
    is_probability: bool = False

    def __post_init__(self) -> None:
        seen: set[int] = set()
        prev = math.inf
        total = 0.0
        for item, score in self.ranked:
            if item in seen:
                raise ValueError(f"duplicate item {item} in prediction list")
            seen.add(item)
            if score > prev:
                raise ValueError("non-monotone scores in prediction list")
            prev = score
            total += score
            if self.is_probability and not 0.0 <= score <= 1.0:
                raise ValueError(f"probability score {score} outside [0, 1]")
        if self.is_probability and total > 1.0 + _PROB_SUM_TOL:
            raise ValueError("not a sub-distribution (scores sum above 1)")

    def rank_of(self, target: int) -> int | None:
        """1-based rank of ``target`` under the deterministic tie-break, or None."""
        target_score = None
        for item, score in self.ranked:
            if item == target:
                target_score = score
                break
        if target_score is None:
            return None
        rank = 1
        for item, score in self.ranked:
            if score > target_score or (score == target_score and item < target):
                rank += 1
        return rank


def ndcg_at_k(pred: PredictionList, target: int, k: int) -> float:
    """Single-target NDCG@k: 1/log2(rank+1) when the target ranks within k,
    else 0.  The ideal DCG is 1 because there is exactly one relevant item."""
    if k < 1:
        raise ValueError("k must be >= 1")
    rank = pred.rank_of(target)
    if rank is None or rank > k:
        return 0.0
    return 1.0 / math.log2(rank + 1)


def recall_at_k(pred: PredictionList, target: int, k: int) -> int:
    """1 iff the target ranks within the top k."""
    if k < 1:
        raise ValueError("k must be >= 1")
    rank = pred.rank_of(target)
    return int(rank is not None and rank <= k)


# -- category breakdown ----------------------------------------------------------


@dataclass
class BreakdownCell:
    label: str
    count: int
    ratio_pct: float
    metrics: dict[str, dict[str, float]]  # model -> {"ndcg": .., "recall": ..}


@dataclass
class BreakdownReport:
    """Per-category metric means in the usual layout: memorization, the union
    of all generalization labels, each generalization type per hop, and
    uncategorized.  A multi-labeled instance contributes to every
    generalization cell it belongs to, so type ratios can sum above the
    union's ratio."""

    k: int
    total: int
    cells: list[BreakdownCell]
    provenance: dict = field(default_factory=dict)

    def cell(self, label: str) -> BreakdownCell:
        for cell in self.cells:
            if cell.label == label:
                return cell
        raise KeyError(label)

    def to_table(self) -> tuple[list[str], list[list[str]]]:
        header = ["row"] + [c.label for c in self.cells]
        rows = [
            ["count"] + [str(c.count) for c in self.cells],
            ["ratio"] + [f"{c.ratio_pct:.2f}" for c in self.cells],
        ]
        models = list(self.cells[0].metrics) if self.cells else []
        for model in models:
            rows.append(
                [f"ndcg@{self.k}:{model}"]
                + [f"{c.metrics[model]['ndcg']:.4f}" for c in self.cells]
            )
            rows.append(
                [f"recall@{self.k}:{model}"]
                + [f"{c.metrics[model]['recall']:.4f}" for c in self.cells]
            )
        return header, rows

    def to_json_obj(self) -> dict:
        return {
            "k": self.k,
            "total": self.total,
            "cells": [
                {
                    "label": c.label,
                    "count": c.count,
                    "ratio_pct": round(c.ratio_pct, 2),
                    "metrics": {
                        m: {kind: round(v, 4) for kind, v in vals.items()}
                        for m, vals in c.metrics.items()
                    },
                }
                for c in self.cells
            ],
        }


def breakdown_labels(max_hop: int) -> list[tuple[str, str, int | None]]:
    """Cell labels in report order: (label, kind, hop)."""
    labels: list[tuple[str, str, int | None]] = [
        ("mem", "mem", None),
        ("gen_all", "gen_all", None),
    ]
    for type_name in GENERALIZATION_TYPES:
        start = 2 if type_name == "substitutability" else 1
        for hop in range(start, max_hop + 1):
            labels.append((f"{type_name}@{hop}", type_name, hop))
    labels.append(("uncategorized", "uncategorized", None))
    return labels


def breakdown(records: list[CategoryRecord], preds_by_model: dict[str, list[PredictionList]],
              targets: list[int], k: int, max_hop: int = 4) -> BreakdownReport:
    """Mean NDCG@k / Recall@k per category cell for each model."""
    n = len(records)
    if len(targets) != n:
        raise ValueError(f"targets length {len(targets)} != records length {n}")
    for model, preds in preds_by_model.items():
        if len(preds) != n:
            raise ValueError(f"predictions for {model!r} length {len(preds)} != records length {n}")

    per_model_ndcg = {
        model: [ndcg_at_k(p, t, k) for p, t in zip(preds, targets)]
        for model, preds in preds_by_model.items()
    }
    per_model_recall = {
        model: [recall_at_k(p, t, k) for p, t in zip(preds, targets)]
        for model, preds in preds_by_model.items()
    }

    def members(kind: str, hop: int | None) -> list[int]:
        if kind == "mem":
            return [i for i, r in enumerate(records) if r.memorization]
        if kind == "gen_all":
            return [i for i, r in enumerate(records) if r.generalization]
        if kind == "uncategorized":
            return [i for i, r in enumerate(records) if r.uncategorized]
        return [i for i, r in enumerate(records) if r.hop_of(kind) == hop]

    cells: list[BreakdownCell] = []
    for label, kind, hop in breakdown_labels(max_hop):
        idx = members(kind, hop)
        cell_metrics = {}
        for model in preds_by_model:
            if idx:
                mean_ndcg = sum(per_model_ndcg[model][i] for i in idx) / len(idx)
                mean_recall = sum(per_model_recall[model][i] for i in idx) / len(idx)
            else:
                mean_ndcg = mean_recall = 0.0
            cell_metrics[model] = {"ndcg": mean_ndcg, "recall": mean_recall}
        cells.append(
            BreakdownCell(
                label=label,
                count=len(idx),
                ratio_pct=100.0 * len(idx) / n if n else 0.0,
                metrics=cell_metrics,
            )
        )
    return BreakdownReport(k=k, total=n, cells=cells)


# -- quantile binning ---------------------------------------------------------


def quantile_bins(values: list[float], num_bins: int) -> tuple[np.ndarray, np.ndarray]:
    """Assign each value to one of ``num_bins`` quantile bins.

    Internal edges sit at the i/B empirical quantiles; a value equal to an
    edge goes to the lower bin, so ties never straddle bins.  Returns
    (assignments, edges).
    """
    if num_bins < 1:
        raise ValueError("number of bins must be >= 1")
    arr = np.asarray(values, dtype=np.float64)
    if arr.size == 0:
        raise ValueError("cannot bin an empty value list")
    edges = np.quantile(arr, [i / num_bins for i in range(1, num_bins)])
    assignments = np.searchsorted(edges, arr, side="left")
    return assignments, edges


@dataclass
class BinRow:
    index: int
    lower: float
    upper: float
    count: int
    mem_ratio: float | None
    means: dict[str, float]


@dataclass
class BinnedTable:
    """1-D quantile-binned report: per-bin count, optional memorization
    ratio, and per-model metric means."""

    edges: list[float]
    rows: list[BinRow]
    provenance: dict = field(default_factory=dict)

    def to_table(self) -> tuple[list[str], list[list[str]]]:
        models = list(self.rows[0].means) if self.rows else []
        header = ["bin", "lower", "upper", "count"]
        if any(r.mem_ratio is not None for r in self.rows):
            header.append("mem_ratio")
        header += [f"mean:{m}" for m in models]
        rows = []
        for r in self.rows:
            row = [str(r.index), f"{r.lower:.4f}", f"{r.upper:.4f}", str(r.count)]
            if "mem_ratio" in header:
                row.append("-" if r.mem_ratio is None else f"{r.mem_ratio:.2f}")
            row += [f"{r.means[m]:.4f}" for m in models]
            rows.append(row)
        return header, rows

    def to_json_obj(self) -> dict:
        return {
            "edges": [float(e) for e in self.edges],
            "bins": [
                {
                    "index": r.index,
                    "lower": r.lower,
                    "upper": r.upper,
                    "count": r.count,
                    "mem_ratio": None if r.mem_ratio is None else round(r.mem_ratio, 2),
                    "means": {m: round(v, 4) for m, v in r.means.items()},
                }
                for r in self.rows
            ],
        }


@dataclass
class BinnedGrid:
    """2-D quantile-binned report: per-cell count and mean difference of the
    first model's metric minus the second's."""

    model_a: str
    model_b: str
    edges_x: list[float]
    edges_y: list[float]
    counts: list[list[int]]
    delta: list[list[float]]
    provenance: dict = field(default_factory=dict)

    def to_table(self) -> tuple[list[str], list[list[str]]]:
        header = ["bin_x", "bin_y", "count", f"delta:{self.model_a}-{self.model_b}"]
        rows = []
        for ix, row in enumerate(self.counts):
            for iy, count in enumerate(row):
                rows.append([str(ix), str(iy), str(count), f"{self.delta[ix][iy]:.4f}"])
        return header, rows

    def to_json_obj(self) -> dict:
        return {
            "model_a": self.model_a,
            "model_b": self.model_b,
            "edges_x": [float(e) for e in self.edges_x],
            "edges_y": [float(e) for e in self.edges_y],
            "counts": self.counts,
            "delta": [[round(v, 4) for v in row] for row in self.delta],
        }


def binned_report(keys, metrics_by_model: dict[str, list[float]], num_bins: int,
                  mem_flags: list[bool] | None = None):
    """Quantile-binned metric report.

    1-D keys (floats) yield a `BinnedTable` of per-bin counts, optional
    memorization ratios, and per-model means.  2-D keys (pairs) yield a
    `BinnedGrid` of per-cell mean metric differences between exactly two
    models, each axis binned by its own quantiles.
    """
    keys = list(keys)
    if not keys:
        raise ValueError("cannot bin an empty key list")
    for model, values in metrics_by_model.items():
        if len(values) != len(keys):
            raise ValueError(f"metric rows for {model!r} misaligned with keys")
    if mem_flags is not None and len(mem_flags) != len(keys):
        raise ValueError("mem_flags misaligned with keys")

    two_dim = isinstance(keys[0], (tuple, list))
    if not two_dim:
        assignments, edges = quantile_bins([float(v) for v in keys], num_bins)
        arr = np.asarray([float(v) for v in keys])
        rows: list[BinRow] = []
        full_edges = [float(arr.min())] + [float(e) for e in edges] + [float(arr.max())]
        for b in range(num_bins):
            idx = np.nonzero(assignments == b)[0]
            means = {}
            for model, values in metrics_by_model.items():
                means[model] = float(np.mean([values[i] for i in idx])) if idx.size else 0.0
            mem_ratio = None
            if mem_flags is not None:
                mem_ratio = (
                    100.0 * sum(1 for i in idx if mem_flags[i]) / idx.size if idx.size else 0.0
                )
            rows.append(
                BinRow(
                    index=b,
                    lower=full_edges[b],
                    upper=full_edges[b + 1],
                    count=int(idx.size),
                    mem_ratio=mem_ratio,
                    means=means,
                )
            )
        return BinnedTable(edges=[float(e) for e in edges], rows=rows)

    if len(metrics_by_model) != 2:
        raise ValueError("2-D binned reports need exactly two models")
    model_a, model_b = metrics_by_model
    xs = [float(pair[0]) for pair in keys]
    ys = [float(pair[1]) for pair in keys]
    assign_x, edges_x = quantile_bins(xs, num_bins)
    assign_y, edges_y = quantile_bins(ys, num_bins)
    counts = [[0] * num_bins for _ in range(num_bins)]
    sums = [[0.0] * num_bins for _ in range(num_bins)]
    values_a = metrics_by_model[model_a]
    values_b = metrics_by_model[model_b]
    for i in range(len(keys)):
        bx, by = int(assign_x[i]), int(assign_y[i])
        counts[bx][by] += 1
        sums[bx][by] += values_a[i] - values_b[i]
    delta = [
        [sums[x][y] / counts[x][y] if counts[x][y] else 0.0 for y in range(num_bins)]
        for x in range(num_bins)
    ]
    return BinnedGrid(
        model_a=model_a,
        model_b=model_b,
        edges_x=[float(e) for e in edges_x],
        edges_y=[float(e) for e in edges_y],
        counts=counts,
        delta=delta,
    )
