"""Per-hop item transition statistics with fast membership and intersection.

Transitions are stored per exact positional gap (hop) as sorted encoded pair
arrays plus CSR-style successor/predecessor adjacency, so the existential
checks used by attribution reduce to binary searches and intersections of
sorted integer sets.
"""
from __future__ import annotations

import struct

import numpy as np

from .domain import Dataset, TransitionQuery

_MAGIC = b"TLIDX"
_FORMAT_VERSION = 1

_EMPTY_I32 = np.empty(0, dtype=np.int32)
_EMPTY_I64 = np.empty(0, dtype=np.int64)


def intersect_nonempty(set_a: np.ndarray, set_b: np.ndarray) -> int | None:
    """Smallest element common to two sorted integer sets, or None.

    Uses a galloping (binary-search) strategy: the smaller set is probed
    against the larger one, which is what the skewed successor/predecessor
    set sizes of real corpora call for.
    """
    return first_common(set_a, set_b)


def first_common(set_a: np.ndarray, set_b: np.ndarray, exclude: tuple[int, ...] = ()) -> int | None:
    """Smallest common element of two sorted sets not in ``exclude``, or None."""
    if set_a.size == 0 or set_b.size == 0:
        return None
    if set_a.size > set_b.size:
        set_a, set_b = set_b, set_a
    pos = np.searchsorted(set_b, set_a)
    inside = pos < set_b.size
    if not inside.any():
        return None
    hits = set_a[inside & (set_b[np.minimum(pos, set_b.size - 1)] == set_a)]
    for value in hits:
        v = int(value)
        if v not in exclude:
            return v
    return None


class _PairTable:
    """Sorted unique encoded pairs (src*N + dst) with counts and both
    adjacency directions as CSR arrays."""

    __slots__ = ("pairs", "counts", "succ_indptr", "succ_items", "pred_indptr", "pred_items")

    def __init__(self, pairs: np.ndarray, counts: np.ndarray | None, num_items: int) -> None:
        self.pairs = pairs
        self.counts = counts
        u_src = pairs // num_items
        u_dst = pairs % num_items
        self.succ_indptr = np.searchsorted(u_src, np.arange(num_items + 1))
        self.succ_items = u_dst.astype(np.int32)
        order = np.lexsort((u_src, u_dst))
        self.pred_indptr = np.searchsorted(u_dst[order], np.arange(num_items + 1))
        self.pred_items = u_src[order].astype(np.int32)

    @classmethod
    def from_occurrences(cls, src: np.ndarray, dst: np.ndarray, num_items: int,
                         counted: bool) -> "_PairTable":
        if src.size:
            enc = src.astype(np.int64) * num_items + dst.astype(np.int64)
            if counted:
                pairs, counts = np.unique(enc, return_counts=True)
            else:
                pairs, counts = np.unique(enc), None
        else:
            pairs = _EMPTY_I64
            counts = _EMPTY_I64 if counted else None
        return cls(pairs, counts, num_items)

    def contains(self, source: int, dest: int, num_items: int) -> bool:
        key = source * num_items + dest
        pos = np.searchsorted(self.pairs, key)
        return bool(pos < self.pairs.size and self.pairs[pos] == key)

    def count(self, source: int, dest: int, num_items: int) -> int:
        key = source * num_items + dest
        pos = np.searchsorted(self.pairs, key)
        if pos < self.pairs.size and self.pairs[pos] == key:
            return int(self.counts[pos])
        return 0

    def succ(self, item: int) -> np.ndarray:
        return self.succ_items[self.succ_indptr[item] : self.succ_indptr[item + 1]]

    def pred(self, item: int) -> np.ndarray:
        return self.pred_items[self.pred_indptr[item] : self.pred_indptr[item + 1]]


class TransitionIndex:
    """Read-only transition statistics over a training corpus.

    For every hop h in [1..max_hop] the index answers, in near-constant time:
    membership of a (source, dest) pair at exact gap h, its occurrence count,
    the sorted successor/predecessor sets, and per-item outgoing totals.  The
    any-gap relation (ordered co-occurrence within a single sequence) is kept
    separately.  Queries are lock-free reads; instances are immutable after
    construction and safe to share across workers.
    """

    def __init__(self, num_items: int, max_hop: int, hop_tables: list[_PairTable],
                 out_totals: list[np.ndarray], any_gap: _PairTable) -> None:
        self.num_items = num_items
        self.max_hop = max_hop
        self._hops = hop_tables
        self._out_totals = out_totals
        self._any = any_gap

    # -- membership / counts -------------------------------------------------

    def contains(self, query: TransitionQuery) -> bool:
        """True iff the pair was observed at exactly ``query.hop``."""
        if not 1 <= query.hop <= self.max_hop:
            raise ValueError(f"hop {query.hop} out of range [1..{self.max_hop}]")
        return self._hops[query.hop - 1].contains(query.source, query.dest, self.num_items)

    def contains_hop(self, source: int, dest: int, hop: int = 1) -> bool:
        """Unchecked fast path used by the attribution inner loop."""
        return self._hops[hop - 1].contains(source, dest, self.num_items)

    def contains_any_gap(self, source: int, dest: int) -> bool:
        """True iff some training sequence contains source strictly before dest."""
        return self._any.contains(source, dest, self.num_items)

    def count(self, source: int, dest: int, hop: int = 1) -> int:
        if not 1 <= hop <= self.max_hop:
            raise ValueError(f"hop {hop} out of range [1..{self.max_hop}]")
        return self._hops[hop - 1].count(source, dest, self.num_items)

    def out_total(self, source: int, hop: int = 1) -> int:
        """Total outgoing transition occurrences of ``source`` at ``hop``."""
        if not 1 <= hop <= self.max_hop:
            raise ValueError(f"hop {hop} out of range [1..{self.max_hop}]")
        return int(self._out_totals[hop - 1][source])

    # -- adjacency sets --------------------------------------------------------

    def succ(self, item: int, hop: int = 1) -> np.ndarray:
        """Sorted successor set of ``item`` at exact gap ``hop``."""
        return self._hops[hop - 1].succ(item)

    def pred(self, item: int, hop: int = 1) -> np.ndarray:
        return self._hops[hop - 1].pred(item)

    def any_gap_succ(self, item: int) -> np.ndarray:
        return self._any.succ(item)

    def any_gap_pred(self, item: int) -> np.ndarray:
        return self._any.pred(item)

    def pair_count_table(self, hop: int) -> tuple[np.ndarray, np.ndarray]:
        """(sorted encoded pairs, counts) at ``hop``; encoding is src*N + dst."""
        table = self._hops[hop - 1]
        return table.pairs, table.counts

    # -- serialization ---------------------------------------------------------

    def save(self, path: str) -> None:
        """Versioned little-endian binary cache; see ``load``."""
        if self.num_items > 0xFFFFFFFF:
            raise ValueError("item space exceeds 32-bit cache format")
        with open(path, "wb") as fh:
            fh.write(_MAGIC)
            fh.write(struct.pack("<B", _FORMAT_VERSION))
            fh.write(struct.pack("<II", self.num_items, self.max_hop))
            for hop in range(1, self.max_hop + 1):
                table = self._hops[hop - 1]
                if table.counts.size and int(table.counts.max()) > 0xFFFFFFFF:
                    raise ValueError("count exceeds 32-bit cache format")
                fh.write(struct.pack("<I", table.pairs.size))
                fh.write((table.pairs // self.num_items).astype("<u4").tobytes())
                fh.write((table.pairs % self.num_items).astype("<u4").tobytes())
                fh.write(table.counts.astype("<u4").tobytes())
            fh.write(struct.pack("<I", self._any.pairs.size))
            fh.write((self._any.pairs // self.num_items).astype("<u4").tobytes())
            fh.write((self._any.pairs % self.num_items).astype("<u4").tobytes())

    @classmethod
    def load(cls, path: str) -> "TransitionIndex":
        with open(path, "rb") as fh:
            data = fh.read()
        if data[: len(_MAGIC)] != _MAGIC:
            raise ValueError("not a transition index cache (bad magic)")
        offset = len(_MAGIC)
        (version,) = struct.unpack_from("<B", data, offset)
        offset += 1
        if version != _FORMAT_VERSION:
            raise ValueError(f"unsupported cache format version {version}")
        num_items, max_hop = struct.unpack_from("<II", data, offset)
        offset += 8

        def read_u32(count: int) -> np.ndarray:
            nonlocal offset
            arr = np.frombuffer(data, dtype="<u4", count=count, offset=offset)
            offset += 4 * count
            return arr.astype(np.int64)

        hop_tables: list[_PairTable] = []
        out_totals: list[np.ndarray] = []
        for _ in range(max_hop):
            (n_pairs,) = struct.unpack_from("<I", data, offset)
            offset += 4
            src = read_u32(n_pairs)
            dst = read_u32(n_pairs)
            cnt = read_u32(n_pairs)
            hop_tables.append(_PairTable(src * num_items + dst, cnt, num_items))
            totals = np.zeros(num_items, dtype=np.int64)
            if n_pairs:
                np.add.at(totals, src, cnt)
            out_totals.append(totals)
        (n_any,) = struct.unpack_from("<I", data, offset)
        offset += 4
        src = read_u32(n_any)
        dst = read_u32(n_any)
        any_table = _PairTable(src * num_items + dst, None, num_items)
        return cls(num_items, max_hop, hop_tables, out_totals, any_table)


def flatten_corpus(train: Dataset) -> tuple[np.ndarray, np.ndarray]:
    """Concatenated item stream and parallel sequence-id array."""
    seqs = train.sequences
    if not seqs:
        return _EMPTY_I32, _EMPTY_I32
    lengths = np.fromiter((len(s.items) for s in seqs), dtype=np.int64, count=len(seqs))
    flat = np.concatenate([np.asarray(s.items, dtype=np.int32) for s in seqs])
    seq_ids = np.repeat(np.arange(len(seqs), dtype=np.int32), lengths)
    return flat, seq_ids


def hop_pairs(flat: np.ndarray, seq_ids: np.ndarray, hop: int) -> tuple[np.ndarray, np.ndarray]:
    """All (source, dest) occurrences at exact gap ``hop``, with multiplicity."""
    if flat.size <= hop:
        return _EMPTY_I32, _EMPTY_I32
    valid = seq_ids[:-hop] == seq_ids[hop:]
    return flat[:-hop][valid], flat[hop:][valid]


def _any_gap_arrays(train: Dataset) -> tuple[np.ndarray, np.ndarray]:
    srcs: list[np.ndarray] = []
    dsts: list[np.ndarray] = []
    triu_cache: dict[int, tuple[np.ndarray, np.ndarray]] = {}
    for seq in train.sequences:
        length = len(seq.items)
        if length < 2:
            continue
        idx = triu_cache.get(length)
        if idx is None:
            idx = np.triu_indices(length, k=1)
            triu_cache[length] = idx
        arr = np.asarray(seq.items, dtype=np.int32)
        srcs.append(arr[idx[0]])
        dsts.append(arr[idx[1]])
    if not srcs:
        return _EMPTY_I32, _EMPTY_I32
    return np.concatenate(srcs), np.concatenate(dsts)


def build_index(train: Dataset, max_hop: int) -> TransitionIndex:
    """Materialize per-hop pair counts up to ``max_hop`` plus the any-gap relation.

    Repeated items and self-transitions are counted per occurrence, not
    deduplicated per user.
    """
    if max_hop < 1:
        raise ValueError("max_hop must be >= 1")
    num_items = train.num_items
    flat, seq_ids = flatten_corpus(train)
    hop_tables: list[_PairTable] = []
    out_totals: list[np.ndarray] = []
    for hop in range(1, max_hop + 1):
        src, dst = hop_pairs(flat, seq_ids, hop)
        hop_tables.append(_PairTable.from_occurrences(src, dst, num_items, counted=True))
        if src.size:
            totals = np.bincount(src, minlength=num_items).astype(np.int64)
        else:
            totals = np.zeros(num_items, dtype=np.int64)
        out_totals.append(totals)
    any_src, any_dst = _any_gap_arrays(train)
    any_table = _PairTable.from_occurrences(any_src, any_dst, num_items, counted=False)
    return TransitionIndex(num_items, max_hop, hop_tables, out_totals, any_table)
