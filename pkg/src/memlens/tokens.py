"""Semantic-ID prefix statistics: prefix-transition counts, prefix
memorizability, support sums, and the item/prefix transition probabilities.

Items carry a fixed-length token sequence whose last token disambiguates,
so full-length prefixes are unique per item and prefix analysis at n = L
coincides with exact item-pair analysis.
"""
from __future__ import annotations

from typing import NamedTuple, Optional

import numpy as np

from .domain import Dataset, Instance
from .index import TransitionIndex, flatten_corpus, hop_pairs

_UNTOKENIZED = -1


class Ratio(NamedTuple):
    """A [0,1] ratio that may be undefined (zero denominator); undefined
    ratios carry value 0.0 so binned reports keep their instance counts."""

    value: float
    defined: bool


class SemanticIdMap:
    """Item index -> fixed-length token sequence, plus codebook metadata.

    Tokens are non-negative integers; level l tokens must be < codebook_sizes[l]
    when sizes are given (otherwise sizes are inferred).  Full-length token
    sequences must be unique across items.
    """

    def __init__(self, tokens_by_item: dict[int, tuple[int, ...]], length: int,
                 codebook_sizes: list[int] | None = None, num_items: int | None = None) -> None:
        if length < 1:
            raise ValueError("token length must be >= 1")
        self.length = length
        if num_items is None:
            num_items = max(tokens_by_item, default=-1) + 1
        self.tokens = np.full((num_items, length), _UNTOKENIZED, dtype=np.int64)
        seen: dict[tuple[int, ...], int] = {}
        for item, toks in tokens_by_item.items():
            toks = tuple(int(t) for t in toks)
            if len(toks) != length:
                raise ValueError(f"item {item} has {len(toks)} tokens, expected {length}")
            if any(t < 0 for t in toks):
                raise ValueError(f"item {item} has negative tokens")
            if toks in seen:
                raise ValueError(f"duplicate full token sequence for items {seen[toks]} and {item}")
            seen[toks] = item
            self.tokens[item] = toks
        if codebook_sizes is None:
            codebook_sizes = [int(self.tokens[:, level].max()) + 1 if len(tokens_by_item) else 1
                              for level in range(length)]
        elif len(codebook_sizes) != length:
            raise ValueError("codebook_sizes must have one entry per token level")
        else:
            for level, size in enumerate(codebook_sizes):
                col = self.tokens[:, level]
                tokenized = col[col != _UNTOKENIZED]
                if tokenized.size and int(tokenized.max()) >= size:
                    raise ValueError(f"token at level {level} exceeds codebook size {size}")
        self.codebook_sizes = list(codebook_sizes)

    def has_tokens(self, item: int) -> bool:
        return 0 <= item < self.tokens.shape[0] and self.tokens[item, 0] != _UNTOKENIZED

    def untokenized(self, items: set[int]) -> list[int]:
        return sorted(item for item in items if not self.has_tokens(item))


def prefix(sid_map: SemanticIdMap, item: int, n: int) -> tuple[int, ...]:
    """First n tokens of the item; n = 0 yields the empty (match-all) tuple."""
    if not 0 <= n <= sid_map.length:
        raise ValueError(f"prefix length {n} out of range [0..{sid_map.length}]")
    if n == 0:
        return ()
    if not sid_map.has_tokens(item):
        raise ValueError(f"untokenized item {item}")
    return tuple(int(t) for t in sid_map.tokens[item, :n])


class PrefixTransitionIndex:
    """Prefix-pair occurrence counts per (prefix length n, hop h).

    Counts at length n aggregate the counts at length n+1 (summing over
    extensions); per-source totals track all outgoing occurrences of a
    source prefix at a hop.
    """

    def __init__(self, max_n: int, max_hop: int, prefix_ids: list[np.ndarray],
                 tables: list[list[dict]], num_prefixes: list[int]) -> None:
        self.max_n = max_n
        self.max_hop = max_hop
        self._prefix_ids = prefix_ids       # per n: item -> prefix id (or -1)
        self._tables = tables               # [n-1][h-1] -> {pairs, counts, out_totals}
        self._num_prefixes = num_prefixes

    def prefix_id(self, item: int, n: int) -> int:
        pid = int(self._prefix_ids[n - 1][item])
        if pid < 0:
            raise ValueError(f"untokenized item {item}")
        return pid

    def count(self, src_item: int, dst_item: int, n: int, hop: int) -> int:
        """Occurrences of (pref_n(src) -> pref_n(dst)) at exact gap ``hop``."""
        if not 1 <= n <= self.max_n:
            raise ValueError(f"prefix length {n} out of range [1..{self.max_n}]")
        if not 1 <= hop <= self.max_hop:
            raise ValueError(f"hop {hop} out of range [1..{self.max_hop}]")
        table = self._tables[n - 1][hop - 1]
        key = self.prefix_id(src_item, n) * self._num_prefixes[n - 1] + self.prefix_id(dst_item, n)
        pos = np.searchsorted(table["pairs"], key)
        if pos < table["pairs"].size and table["pairs"][pos] == key:
            return int(table["counts"][pos])
        return 0

    def out_total(self, src_item: int, n: int, hop: int) -> int:
        """Total outgoing prefix-transition occurrences of pref_n(src) at ``hop``."""
        table = self._tables[n - 1][hop - 1]
        return int(table["out_totals"][self.prefix_id(src_item, n)])


def build_prefix_index(train: Dataset, sid_map: SemanticIdMap, max_n: int | None = None,
                       max_hop: int = 4) -> PrefixTransitionIndex:
    """Count prefix transitions for every (n, hop); multi-hop pairs constrain
    endpoints only."""
    if max_n is None:
        max_n = sid_map.length
    if not 1 <= max_n <= sid_map.length:
        raise ValueError(f"max_n {max_n} out of range [1..{sid_map.length}]")
    if max_hop < 1:
        raise ValueError("max_hop must be >= 1")
    train_items = {item for seq in train.sequences for item in seq.items}
    missing = sid_map.untokenized(train_items)
    if missing:
        raise ValueError(f"untokenized items in training data: {missing[:20]}")

    num_items = train.num_items
    prefix_ids: list[np.ndarray] = []
    num_prefixes: list[int] = []
    for n in range(1, max_n + 1):
        _, inverse = np.unique(sid_map.tokens[:, :n], axis=0, return_inverse=True)
        ids = inverse.astype(np.int64).reshape(num_items) if num_items else inverse.astype(np.int64)
        # keep untokenized rows distinguishable
        untok = sid_map.tokens[:, 0] == _UNTOKENIZED
        ids = np.where(untok, -1, ids)
        prefix_ids.append(ids)
        num_prefixes.append(int(ids.max()) + 1 if ids.size else 0)

    flat, seq_ids = flatten_corpus(train)
    tables: list[list[dict]] = []
    for n in range(1, max_n + 1):
        ids = prefix_ids[n - 1]
        per_hop: list[dict] = []
        for hop in range(1, max_hop + 1):
            src, dst = hop_pairs(flat, seq_ids, hop)
            if src.size:
                enc = ids[src] * num_prefixes[n - 1] + ids[dst]
                pairs, counts = np.unique(enc, return_counts=True)
                out_totals = np.bincount(ids[src], minlength=num_prefixes[n - 1]).astype(np.int64)
            else:
                pairs = np.empty(0, dtype=np.int64)
                counts = np.empty(0, dtype=np.int64)
                out_totals = np.zeros(num_prefixes[n - 1], dtype=np.int64)
            per_hop.append({"pairs": pairs, "counts": counts, "out_totals": out_totals})
        tables.append(per_hop)
    return PrefixTransitionIndex(max_n, max_hop, prefix_ids, tables, num_prefixes)


def prefix_memorizable(pidx: PrefixTransitionIndex, sid_map: SemanticIdMap, inst: Instance,
                       n: int, max_hop: int | None = None) -> Optional[int]:
    """Smallest hop k whose (pref_n(history[-k]) -> pref_n(target)) prefix pair
    occurs in training, or None."""
    if max_hop is None:
        max_hop = pidx.max_hop
    if not 1 <= n <= pidx.max_n:
        raise ValueError(f"prefix length {n} out of range [1..{pidx.max_n}]")
    if not sid_map.has_tokens(inst.target):
        return None
    history = inst.history
    for k in range(1, min(max_hop, pidx.max_hop, len(history)) + 1):
        if not sid_map.has_tokens(history[-k]):
            continue
        if pidx.count(history[-k], inst.target, n, k) >= 1:
            return k
    return None


def max_memorizable_n(pidx: PrefixTransitionIndex, sid_map: SemanticIdMap, inst: Instance,
                      max_hop: int | None = None) -> int:
    """Largest n with a memorizable prefix pair at some hop; 0 when even the
    1-token prefix never co-occurs.  By prefix monotonicity every shorter
    prefix is then memorizable too."""
    for n in range(pidx.max_n, 0, -1):
        if prefix_memorizable(pidx, sid_map, inst, n, max_hop) is not None:
            return n
    return 0


def support(pidx: PrefixTransitionIndex, sid_map: SemanticIdMap, inst: Instance, n: int,
            max_hop: int | None = None) -> int:
    """Summed prefix-transition counts from each history position to the
    target, over hops 1..min(max_hop, |history|)."""
    if max_hop is None:
        max_hop = pidx.max_hop
    if not 1 <= n <= pidx.max_n:
        raise ValueError(f"prefix length {n} out of range [1..{pidx.max_n}]")
    if not sid_map.has_tokens(inst.target):
        return 0
    history = inst.history
    total = 0
    for k in range(1, min(max_hop, pidx.max_hop, len(history)) + 1):
        if sid_map.has_tokens(history[-k]):
            total += pidx.count(history[-k], inst.target, n, k)
    return total


def phi(index: TransitionIndex, inst: Instance) -> Ratio:
    """Item transition probability: hop-1 count of (last history item ->
    target) over the source's hop-1 out-degree total."""
    source = inst.history[-1]
    denom = index.out_total(source, 1)
    if denom == 0:
        return Ratio(0.0, False)
    return Ratio(index.count(source, inst.target, 1) / denom, True)


def psi(pidx: PrefixTransitionIndex, sid_map: SemanticIdMap, inst: Instance, n: int) -> Ratio:
    """Prefix transition probability at hop 1 for prefix length n."""
    if not 1 <= n <= pidx.max_n:
        raise ValueError(f"prefix length {n} out of range [1..{pidx.max_n}]")
    source = inst.history[-1]
    if not sid_map.has_tokens(source) or not sid_map.has_tokens(inst.target):
        return Ratio(0.0, False)
    denom = pidx.out_total(source, n, 1)
    if denom == 0:
        return Ratio(0.0, False)
    return Ratio(pidx.count(source, inst.target, n, 1) / denom, True)
