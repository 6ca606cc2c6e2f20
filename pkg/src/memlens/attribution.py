"""Labels evaluation instances with memorization/generalization categories.

An instance is memorization-related when its final 1-hop transition occurs
in some training sequence.  Otherwise four generalization patterns are
checked at every hop k up to the configured maximum, each recording its own
minimum hop:

* substitutability: an earlier history item occurs strictly before the
  target inside a single training sequence (any gap, k >= 2);
* symmetry: the reversed transition is observed;
* transitivity: a bridge item x with observed (source -> x) and (x -> target);
* 2nd-order symmetry: a shared witness x as common cause (x -> source,
  x -> target), common effect (source -> x, target -> x), or reverse path
  (target -> x, x -> source).

Instances matching nothing up to the maximum hop are uncategorized.  A
brute-force scan (`attribute_bruteforce`) with identical semantics but no
index machinery serves as the testing oracle.
"""
from __future__ import annotations

import os
from dataclasses import dataclass
from fractions import Fraction
from typing import Literal, Optional

from .domain import Dataset, Instance
from .index import TransitionIndex, first_common

COMMON_CAUSE = "common_cause"
COMMON_EFFECT = "common_effect"
REVERSE_PATH = "reverse_path"

SecondSymmetryKind = Literal["common_cause", "common_effect", "reverse_path"]

GENERALIZATION_TYPES = ("substitutability", "symmetry", "transitivity", "second_symmetry")


@dataclass(frozen=True)
class AttributionConfig:
    """Attribution parameters.

    ``train_match_mode`` controls how the training-side patterns of symmetry,
    transitivity, and 2nd-order symmetry are matched: "adjacent" requires
    hop-1 occurrences inside a training sequence, "any_gap" accepts any
    ordered co-occurrence.  Memorization is always adjacent and
    substitutability always any-gap.
    """

    max_hop: int = 4
    train_match_mode: Literal["adjacent", "any_gap"] = "adjacent"

    def __post_init__(self) -> None:
        if self.max_hop < 1:
            raise ValueError("max_hop must be >= 1")
        if self.train_match_mode not in ("adjacent", "any_gap"):
            raise ValueError(f"unknown train_match_mode {self.train_match_mode!r}")


@dataclass(frozen=True)
class CategoryRecord:
    """Per-instance attribution result.

    Exactly one of {memorization, some generalization hop present,
    uncategorized} holds.  Stored hops are per-type minima.
    """

    memorization: bool = False
    substitutability_hop: Optional[int] = None
    symmetry_hop: Optional[int] = None
    transitivity_hop: Optional[int] = None
    second_symmetry_hop: Optional[int] = None
    second_symmetry_kind: Optional[SecondSymmetryKind] = None
    uncategorized: bool = False

    @property
    def generalization(self) -> bool:
        return (
            self.substitutability_hop is not None
            or self.symmetry_hop is not None
            or self.transitivity_hop is not None
            or self.second_symmetry_hop is not None
        )

    def hop_of(self, type_name: str) -> Optional[int]:
        return getattr(self, f"{type_name}_hop")


@dataclass
class RatioSummary:
    """Category counts over a labeled instance set.

    ``defined`` is False for an empty instance set, in which case the
    percentage accessors return 0.0.  Counts are authoritative: memorization,
    generalization, and uncategorized always partition the total exactly.
    """

    total: int
    memorization: int
    generalization: int
    uncategorized: int
    per_type_hop: dict[str, dict[int, int]]

    @property
    def defined(self) -> bool:
        return self.total > 0

    def _pct(self, count: int) -> float:
        return 100.0 * count / self.total if self.total else 0.0

    @property
    def memorization_pct(self) -> float:
        return self._pct(self.memorization)

    @property
    def generalization_pct(self) -> float:
        return self._pct(self.generalization)

    @property
    def uncategorized_pct(self) -> float:
        return self._pct(self.uncategorized)

    def type_hop_pct(self, type_name: str, hop: int) -> float:
        return self._pct(self.per_type_hop.get(type_name, {}).get(hop, 0))

    def partition_fraction(self) -> Fraction:
        """Exact mem + gen + uncat fraction of the total (1 when defined)."""
        if not self.total:
            return Fraction(0)
        return Fraction(self.memorization + self.generalization + self.uncategorized, self.total)


def check_memorization(index: TransitionIndex, inst: Instance) -> bool:
    """True iff the final 1-hop transition occurs in some training sequence."""
    return index.contains_hop(inst.history[-1], inst.target, 1)


def check_substitutability(index: TransitionIndex, inst: Instance, max_hop: int) -> Optional[int]:
    """Smallest k in [2..min(max_hop, |history|)] whose history item occurs
    strictly before the target inside a single training sequence."""
    target = inst.target
    history = inst.history
    for k in range(2, min(max_hop, len(history)) + 1):
        if index.contains_any_gap(history[-k], target):
            return k
    return None


def _train_succ(index: TransitionIndex, item: int, cfg: AttributionConfig):
    if cfg.train_match_mode == "adjacent":
        return index.succ(item, 1)
    return index.any_gap_succ(item)


def _train_pred(index: TransitionIndex, item: int, cfg: AttributionConfig):
    if cfg.train_match_mode == "adjacent":
        return index.pred(item, 1)
    return index.any_gap_pred(item)


def _train_contains(index: TransitionIndex, source: int, dest: int, cfg: AttributionConfig) -> bool:
    if cfg.train_match_mode == "adjacent":
        return index.contains_hop(source, dest, 1)
    return index.contains_any_gap(source, dest)


def check_symmetry(index: TransitionIndex, inst: Instance, cfg: AttributionConfig) -> Optional[int]:
    """Smallest k whose reversed transition (target -> history[-k]) is observed."""
    target = inst.target
    history = inst.history
    for k in range(1, min(cfg.max_hop, len(history)) + 1):
        if _train_contains(index, target, history[-k], cfg):
            return k
    return None


def check_transitivity(index: TransitionIndex, inst: Instance,
                       cfg: AttributionConfig) -> Optional[tuple[int, int]]:
    """Smallest k bridged by some x with (history[-k] -> x) and (x -> target)
    observed; returns (hop, witness) with the smallest witness item index.

    The witness excludes both endpoints: a self-bridge degenerates to the
    direct transition, which the memorization guard already rejected.
    """
    target = inst.target
    history = inst.history
    pred_t = _train_pred(index, target, cfg)
    for k in range(1, min(cfg.max_hop, len(history)) + 1):
        source = history[-k]
        witness = first_common(_train_succ(index, source, cfg), pred_t, (source, target))
        if witness is not None:
            return k, witness
    return None


def check_second_symmetry(index: TransitionIndex, inst: Instance,
                          cfg: AttributionConfig) -> Optional[tuple[int, SecondSymmetryKind]]:
    """Smallest k at which a shared witness links history[-k] and the target.

    At the minimal hop the reported kind follows the fixed precedence
    common_cause > common_effect > reverse_path.
    """
    target = inst.target
    history = inst.history
    pred_t = _train_pred(index, target, cfg)
    succ_t = _train_succ(index, target, cfg)
    for k in range(1, min(cfg.max_hop, len(history)) + 1):
        source = history[-k]
        exclude = (source, target)
        if first_common(_train_pred(index, source, cfg), pred_t, exclude) is not None:
            return k, COMMON_CAUSE
        if first_common(_train_succ(index, source, cfg), succ_t, exclude) is not None:
            return k, COMMON_EFFECT
        if first_common(succ_t, _train_pred(index, source, cfg), exclude) is not None:
            return k, REVERSE_PATH
    return None


def attribute(index: TransitionIndex, inst: Instance, cfg: AttributionConfig) -> CategoryRecord:
    """Label one instance: memorization first; otherwise all four
    generalization checks run independently, each keeping its minimum hop."""
    if check_memorization(index, inst):
        return CategoryRecord(memorization=True)

    target = inst.target
    history = inst.history
    max_k = min(cfg.max_hop, len(history))
    pred_t = _train_pred(index, target, cfg)
    succ_t = _train_succ(index, target, cfg)

    sub_hop = sym_hop = trans_hop = sec_hop = None
    sec_kind: Optional[SecondSymmetryKind] = None
    for k in range(1, max_k + 1):
        source = history[-k]
        exclude = (source, target)
        if sym_hop is None and _train_contains(index, target, source, cfg):
            sym_hop = k
        if trans_hop is None or sec_hop is None:
            succ_s = _train_succ(index, source, cfg)
            pred_s = _train_pred(index, source, cfg)
            if trans_hop is None and first_common(succ_s, pred_t, exclude) is not None:
                trans_hop = k
            if sec_hop is None:
                if first_common(pred_s, pred_t, exclude) is not None:
                    sec_hop, sec_kind = k, COMMON_CAUSE
                elif first_common(succ_s, succ_t, exclude) is not None:
                    sec_hop, sec_kind = k, COMMON_EFFECT
                elif first_common(succ_t, pred_s, exclude) is not None:
                    sec_hop, sec_kind = k, REVERSE_PATH
        if sub_hop is None and k >= 2 and index.contains_any_gap(source, target):
            sub_hop = k
        if (
            sym_hop is not None
            and trans_hop is not None
            and sec_hop is not None
            and sub_hop is not None
        ):
            break

    uncategorized = (
        sub_hop is None and sym_hop is None and trans_hop is None and sec_hop is None
    )
    return CategoryRecord(
        memorization=False,
        substitutability_hop=sub_hop,
        symmetry_hop=sym_hop,
        transitivity_hop=trans_hop,
        second_symmetry_hop=sec_hop,
        second_symmetry_kind=sec_kind,
        uncategorized=uncategorized,
    )


def summarize(records: list[CategoryRecord]) -> RatioSummary:
    """Category counts and per-type minimum-hop counts for a record list."""
    per_type: dict[str, dict[int, int]] = {name: {} for name in GENERALIZATION_TYPES}
    mem = gen = uncat = 0
    for rec in records:
        if rec.memorization:
            mem += 1
        elif rec.uncategorized:
            uncat += 1
        else:
            gen += 1
        for name in GENERALIZATION_TYPES:
            hop = rec.hop_of(name)
            if hop is not None:
                hops = per_type[name]
                hops[hop] = hops.get(hop, 0) + 1
    return RatioSummary(
        total=len(records),
        memorization=mem,
        generalization=gen,
        uncategorized=uncat,
        per_type_hop=per_type,
    )


# Worker-side state for fork-based parallel attribution.  Populated in the
# parent right before the pool is created; children inherit it via fork.
_POOL_STATE: dict = {}


def _attribute_chunk(bounds: tuple[int, int]) -> list[CategoryRecord]:
    index = _POOL_STATE["index"]
    instances = _POOL_STATE["instances"]
    cfg = _POOL_STATE["cfg"]
    lo, hi = bounds
    return [attribute(index, instances[i], cfg) for i in range(lo, hi)]


def attribute_all(index: TransitionIndex, instances: list[Instance], cfg: AttributionConfig,
                  workers: int = 1) -> tuple[list[CategoryRecord], RatioSummary]:
    """Label every instance and summarize category ratios.

    ``workers`` > 1 shards instances over a fork-based process pool (the
    index is shared copy-on-write); output order is independent of the
    worker count.
    """
    if workers > 1 and len(instances) > 1 and hasattr(os, "fork"):
        import multiprocessing

        ctx = multiprocessing.get_context("fork")
        chunks = _chunk_bounds(len(instances), workers * 4)
        _POOL_STATE.update(index=index, instances=instances, cfg=cfg)
        try:
            with ctx.Pool(processes=workers) as pool:
                parts = pool.map(_attribute_chunk, chunks)
        finally:
            _POOL_STATE.clear()
        records = [rec for part in parts for rec in part]
    else:
        records = [attribute(index, inst, cfg) for inst in instances]
    return records, summarize(records)


def _chunk_bounds(total: int, parts: int) -> list[tuple[int, int]]:
    parts = max(1, min(parts, total))
    step = (total + parts - 1) // parts
    return [(lo, min(lo + step, total)) for lo in range(0, total, step)]


# -- brute-force oracle --------------------------------------------------------


def attribute_bruteforce(train: Dataset, inst: Instance, cfg: AttributionConfig) -> CategoryRecord:
    """Oracle with the same contract as `attribute`, implemented as a direct
    scan of all training sequences with no index machinery.  Intended for
    small corpora."""
    target = inst.target
    history = inst.history
    max_k = min(cfg.max_hop, len(history))
    sources = [history[-k] for k in range(1, max_k + 1)]
    interest = set(sources) | {target}
    adjacent = cfg.train_match_mode == "adjacent"

    succ: dict[int, set[int]] = {item: set() for item in interest}
    pred: dict[int, set[int]] = {item: set() for item in interest}
    mem = False
    any_gap: set[tuple[int, int]] = set()
    sub_queries = {(sources[k - 1], target) for k in range(2, max_k + 1)}

    for seq in train.sequences:
        items = seq.items
        for i in range(len(items) - 1):
            a, b = items[i], items[i + 1]
            if a == history[-1] and b == target:
                mem = True
            if adjacent:
                if a in interest:
                    succ[a].add(b)
                if b in interest:
                    pred[b].add(a)
        if not adjacent:
            for i, a in enumerate(items):
                if a in interest:
                    succ[a].update(items[i + 1 :])
                    pred[a].update(items[:i])
        for source, dest in sub_queries:
            if (source, dest) in any_gap:
                continue
            first_src = None
            for i, item in enumerate(items):
                if first_src is None and item == source:
                    first_src = i
                elif first_src is not None and item == dest:
                    any_gap.add((source, dest))
                    break

    if mem:
        return CategoryRecord(memorization=True)

    def smallest_excluded(common: set[int], exclude: tuple[int, int]) -> Optional[int]:
        candidates = common.difference(exclude)
        return min(candidates) if candidates else None

    sub_hop = sym_hop = trans_hop = sec_hop = None
    sec_kind: Optional[SecondSymmetryKind] = None
    for k in range(1, max_k + 1):
        source = sources[k - 1]
        exclude = (source, target)
        if sym_hop is None and source in succ[target]:
            sym_hop = k
        if trans_hop is None and smallest_excluded(succ[source] & pred[target], exclude) is not None:
            trans_hop = k
        if sec_hop is None:
            if smallest_excluded(pred[source] & pred[target], exclude) is not None:
                sec_hop, sec_kind = k, COMMON_CAUSE
            elif smallest_excluded(succ[source] & succ[target], exclude) is not None:
                sec_hop, sec_kind = k, COMMON_EFFECT
            elif smallest_excluded(succ[target] & pred[source], exclude) is not None:
                sec_hop, sec_kind = k, REVERSE_PATH
        if sub_hop is None and k >= 2 and (source, target) in any_gap:
            sub_hop = k

    uncategorized = (
        sub_hop is None and sym_hop is None and trans_hop is None and sec_hop is None
    )
    return CategoryRecord(
        memorization=False,
        substitutability_hop=sub_hop,
        symmetry_hop=sym_hop,
        transitivity_hop=trans_hop,
        second_symmetry_hop=sec_hop,
        second_symmetry_kind=sec_kind,
        uncategorized=uncategorized,
    )
