"""Adaptive score fusion of an ID-based model and a generative model.

The fusion weight tracks an inference-time memorization-likelihood signal:
the ID model's maximum softmax probability (MSP).  High confidence shifts
weight toward the ID model, low confidence toward the generative model,
matching the performance crossover between the two paradigms.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal

from .domain import Instance
from .metrics import PredictionList, binned_report, ndcg_at_k

RRF_OFFSET = 60  # constant in the reciprocal-rank normalization 1/(offset+rank)

DEFAULT_Q_GRID = (1.0, 5.0, 9.0, 13.0)
DEFAULT_TAU_GRID = (0.0, 0.1, 0.2, 0.3, 0.4, 0.5)
DEFAULT_ALPHA_STATIC_GRID = (0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0)

Normalization = Literal["minmax", "rank_reciprocal"]


@dataclass(frozen=True)
class EnsembleConfig:
    """Fusion parameters.

    In adaptive mode the generative-model weight is
    sigmoid(-q * (msp - tau)); in fixed mode ``alpha_static`` is the ID-model
    weight and the generative model receives 1 - alpha_static.
    """

    q: float = 1.0
    tau: float = 0.0
    alpha_static: float = 0.5
    mode: Literal["adaptive", "fixed"] = "adaptive"
    normalization: Normalization = "minmax"

    def __post_init__(self) -> None:
        if self.q < 0:
            raise ValueError("q must be >= 0")
        if not 0.0 <= self.alpha_static <= 1.0:
            raise ValueError("alpha_static must lie in [0, 1]")
        if self.mode not in ("adaptive", "fixed"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.normalization not in ("minmax", "rank_reciprocal"):
            raise ValueError(f"unknown normalization {self.normalization!r}")


@dataclass
class FusionResult:
    fused: PredictionList
    alpha: float
    s_conf: float | None
    union_size: int


def msp(pred_id: PredictionList) -> float:
    """Maximum softmax probability: the ID model's top-1 score."""
    if not pred_id.is_probability:
        raise ValueError("MSP requires probability scores")
    if not pred_id.ranked:
        raise ValueError("MSP requires a non-empty prediction list")
    return pred_id.ranked[0][1]


def alpha_weight(s_conf: float, q: float, tau: float) -> float:
    """Generative-model weight sigmoid(-q * (s_conf - tau)); non-increasing
    in the confidence score, strictly so for q > 0."""
    x = -q * (s_conf - tau)
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def _normalize(pred: PredictionList, normalization: Normalization) -> dict[int, float]:
    scores = [score for _, score in pred.ranked]
    if normalization == "minmax":
        lo, hi = min(scores), max(scores)
        if hi == lo:
            return {item: 0.5 for item, _ in pred.ranked}
        return {item: (score - lo) / (hi - lo) for item, score in pred.ranked}
    # reciprocal rank under the deterministic tie-break
    order = sorted(pred.ranked, key=lambda pair: (-pair[1], pair[0]))
    return {item: 1.0 / (RRF_OFFSET + rank) for rank, (item, _) in enumerate(order, start=1)}


def fuse(pred_id: PredictionList, pred_gr: PredictionList, cfg: EnsembleConfig) -> FusionResult:
    """Weighted sum of per-list normalized scores over the union of both
    candidate lists; items absent from one list take that model's score 0."""
    if not pred_id.ranked or not pred_gr.ranked:
        raise ValueError("cannot fuse empty prediction lists")
    if pred_id.user != pred_gr.user:
        raise ValueError(f"user mismatch: {pred_id.user} vs {pred_gr.user}")

    s_conf = msp(pred_id) if pred_id.is_probability else None
    if cfg.mode == "adaptive":
        if s_conf is None:
            raise ValueError("adaptive fusion requires probability scores for the ID model")
        alpha = alpha_weight(s_conf, cfg.q, cfg.tau)
    else:
        alpha = 1.0 - cfg.alpha_static

    norm_id = _normalize(pred_id, cfg.normalization)
    norm_gr = _normalize(pred_gr, cfg.normalization)
    union = set(norm_id) | set(norm_gr)
    fused_scores = {
        item: alpha * norm_gr.get(item, 0.0) + (1.0 - alpha) * norm_id.get(item, 0.0)
        for item in union
    }
    ranked = sorted(fused_scores.items(), key=lambda pair: (-pair[1], pair[0]))
    fused = PredictionList(user=pred_id.user, ranked=ranked, is_probability=False)
    return FusionResult(fused=fused, alpha=alpha, s_conf=s_conf, union_size=len(union))


@dataclass
class GridPoint:
    mode: str
    q: float | None
    tau: float | None
    alpha_static: float | None
    ndcg: float


@dataclass
class TuneResult:
    best_adaptive: EnsembleConfig
    best_fixed: EnsembleConfig
    grid: list[GridPoint] = field(default_factory=list)

    def to_json_obj(self) -> dict:
        def cfg_obj(cfg: EnsembleConfig) -> dict:
            return {
                "mode": cfg.mode,
                "q": cfg.q,
                "tau": cfg.tau,
                "alpha_static": cfg.alpha_static,
                "normalization": cfg.normalization,
            }

        return {
            "best_adaptive": cfg_obj(self.best_adaptive),
            "best_fixed": cfg_obj(self.best_fixed),
            "grid": [
                {
                    "mode": p.mode,
                    "q": p.q,
                    "tau": p.tau,
                    "alpha_static": p.alpha_static,
                    "ndcg": round(p.ndcg, 6),
                }
                for p in self.grid
            ],
        }


def _mean_ndcg(configs: EnsembleConfig, instances: list[Instance],
               preds_id: list[PredictionList], preds_gr: list[PredictionList], k: int) -> float:
    total = 0.0
    for inst, pid, pgr in zip(instances, preds_id, preds_gr):
        result = fuse(pid, pgr, configs)
        total += ndcg_at_k(result.fused, inst.target, k)
    return total / len(instances)


def tune(val_instances: list[Instance], val_preds_id: list[PredictionList],
         val_preds_gr: list[PredictionList], q_grid=DEFAULT_Q_GRID, tau_grid=DEFAULT_TAU_GRID,
         alpha_static_grid=DEFAULT_ALPHA_STATIC_GRID, k: int = 10,
         normalization: Normalization = "minmax") -> TuneResult:
    """Exhaustive grid search maximizing validation NDCG@k.

    Ties break toward smaller q then smaller tau (adaptive) and smaller
    alpha_static (fixed); both best configs are returned along with the full
    evaluated grid.
    """
    if not val_instances:
        raise ValueError("empty validation set")
    if len(val_preds_id) != len(val_instances) or len(val_preds_gr) != len(val_instances):
        raise ValueError("validation predictions misaligned with instances")

    grid: list[GridPoint] = []
    best_adaptive: EnsembleConfig | None = None
    best_adaptive_score = -1.0
    for q in q_grid:
        for tau in tau_grid:
            cfg = EnsembleConfig(q=q, tau=tau, mode="adaptive", normalization=normalization)
            score = _mean_ndcg(cfg, val_instances, val_preds_id, val_preds_gr, k)
            grid.append(GridPoint("adaptive", q, tau, None, score))
            if score > best_adaptive_score:
                best_adaptive_score = score
                best_adaptive = cfg

    best_fixed: EnsembleConfig | None = None
    best_fixed_score = -1.0
    for alpha_static in alpha_static_grid:
        cfg = EnsembleConfig(alpha_static=alpha_static, mode="fixed", normalization=normalization)
        score = _mean_ndcg(cfg, val_instances, val_preds_id, val_preds_gr, k)
        grid.append(GridPoint("fixed", None, None, alpha_static, score))
        if score > best_fixed_score:
            best_fixed_score = score
            best_fixed = cfg

    return TuneResult(best_adaptive=best_adaptive, best_fixed=best_fixed, grid=grid)


def indicator_report(test_instances: list[Instance], preds_id: list[PredictionList],
                     preds_gr: list[PredictionList], records, num_bins: int, k: int = 10):
    """Per-MSP-quantile-bin memorization ratio and NDCG@k of both models."""
    n = len(test_instances)
    if len(preds_id) != n or len(preds_gr) != n or len(records) != n:
        raise ValueError("indicator report inputs misaligned")
    keys = [msp(p) for p in preds_id]
    metric_rows = {
        "id": [ndcg_at_k(p, inst.target, k) for p, inst in zip(preds_id, test_instances)],
        "gr": [ndcg_at_k(p, inst.target, k) for p, inst in zip(preds_gr, test_instances)],
    }
    mem_flags = [rec.memorization for rec in records]
    return binned_report(keys, metric_rows, num_bins, mem_flags=mem_flags)
