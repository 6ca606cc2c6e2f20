"""Prefix statistics over semantic-ID tokenizations."""
from __future__ import annotations

import random

import numpy as np
import pytest

from conftest import build_dataset, make_inst
from memlens.attribution import check_memorization
from memlens.domain import make_instances
from memlens.index import build_index
from memlens.synth import SidSpec, random_corpus
from memlens.tokens import (
    SemanticIdMap,
    build_prefix_index,
    max_memorizable_n,
    phi,
    prefix,
    prefix_memorizable,
    psi,
    support,
)


def two_level_fixture():
    """Train {[A,B,C]} with tok A=[0,0], B=[0,1], C=[1,0]."""
    ds = build_dataset([["A", "B", "C"]])
    sid = SemanticIdMap({0: (0, 0), 1: (0, 1), 2: (1, 0)}, length=2)
    pidx = build_prefix_index(ds, sid, max_hop=2)
    return ds, sid, pidx


def random_sid_map(seed: int, num_items: int, length: int = 3, codebook: int = 4) -> SemanticIdMap:
    """Injective random map: random prefix levels, identifier last level."""
    rng = random.Random(seed)
    tokens = {}
    id_counts: dict[tuple[int, ...], int] = {}
    for item in range(num_items):
        head = tuple(rng.randrange(codebook) for _ in range(length - 1))
        tokens[item] = head + (id_counts.get(head, 0),)
        id_counts[head] = id_counts.get(head, 0) + 1
    return SemanticIdMap(tokens, length, num_items=num_items)


class TestSemanticIdMap:
    def test_wrong_length_rejected(self):
        with pytest.raises(ValueError, match="tokens"):
            SemanticIdMap({0: (1, 2, 3)}, length=2)

    def test_duplicate_full_sequence_rejected(self):
        with pytest.raises(ValueError, match="duplicate"):
            SemanticIdMap({0: (1, 2), 1: (1, 2)}, length=2)

    def test_codebook_bound_enforced(self):
        with pytest.raises(ValueError, match="codebook"):
            SemanticIdMap({0: (5, 0)}, length=2, codebook_sizes=[4, 1])


class TestPrefix:
    def test_first_n_tokens(self):
        sid = SemanticIdMap({0: (0, 1, 7)}, length=3)
        assert prefix(sid, 0, 2) == (0, 1)

    def test_full_length_is_identity(self):
        sid = SemanticIdMap({0: (0, 1, 7)}, length=3)
        assert prefix(sid, 0, 3) == (0, 1, 7)

    def test_zero_length_matches_everything(self):
        sid = SemanticIdMap({0: (0, 1, 7)}, length=3)
        assert prefix(sid, 0, 0) == ()

    def test_untokenized_item_rejected(self):
        sid = SemanticIdMap({0: (0, 1)}, length=2, num_items=3)
        with pytest.raises(ValueError, match="untokenized"):
            prefix(sid, 2, 1)


class TestBuildPrefixIndex:
    def test_level_one_counts(self):
        ds, sid, pidx = two_level_fixture()
        a, b, c = 0, 1, 2
        # pref_1: A,B -> 0, C -> 1; pairs (A,B) and (B,C) at hop 1
        assert pidx.count(a, b, n=1, hop=1) == 1  # (0 -> 0)
        assert pidx.count(b, c, n=1, hop=1) == 1  # (0 -> 1)
        assert pidx.count(c, c, n=1, hop=1) == 0

    def test_full_length_equals_item_counts(self):
        ds, sid, pidx = two_level_fixture()
        idx = build_index(ds, max_hop=2)
        for src in range(3):
            for dst in range(3):
                for hop in (1, 2):
                    assert pidx.count(src, dst, n=2, hop=hop) == idx.count(src, dst, hop)

    def test_counts_accumulate(self):
        ds = build_dataset([["A", "B"], ["A", "B"]])
        sid = SemanticIdMap({0: (0, 0), 1: (1, 0)}, length=2)
        pidx = build_prefix_index(ds, sid, max_hop=1)
        assert pidx.count(0, 1, n=1, hop=1) == 2

    def test_untokenized_training_item_rejected(self):
        ds = build_dataset([["A", "B"]])
        sid = SemanticIdMap({0: (0, 0)}, length=2, num_items=2)
        with pytest.raises(ValueError, match="untokenized"):
            build_prefix_index(ds, sid)


class TestPrefixMemorizable:
    def test_shared_prefix_pair(self):
        ds, sid, pidx = two_level_fixture()
        # X=A shares pref_1 0 with B; Y=C has pref_1 1: pair (0 -> 1) observed via (B, C)
        inst = make_inst(ds, ["A"], "C")
        assert prefix_memorizable(pidx, sid, inst, n=1) == 1

    def test_full_length_reduces_to_item_membership(self):
        ds, sid, pidx = two_level_fixture()
        idx = build_index(ds, max_hop=2)
        inst = make_inst(ds, ["A", "B"], "C")
        assert prefix_memorizable(pidx, sid, inst, n=2) == 1
        assert idx.contains_hop(1, 2, 1)

    def test_unseen_prefix_is_none(self):
        ds = build_dataset([["A", "B"]], extra_items=("Z",))
        sid = SemanticIdMap({0: (0, 0), 1: (0, 1), 2: (3, 0)}, length=2)
        pidx = build_prefix_index(ds, sid, max_hop=2)
        inst = make_inst(ds, ["A"], "Z")  # Z's prefix 3 never occurs in training
        assert prefix_memorizable(pidx, sid, inst, n=1) is None


class TestMaxMemorizableN:
    def test_exact_item_pair_reaches_full_length(self):
        ds, sid, pidx = two_level_fixture()
        inst = make_inst(ds, ["A"], "B")
        assert max_memorizable_n(pidx, sid, inst) == 2

    def test_unseen_first_token_gives_zero(self):
        ds = build_dataset([["A", "B"]], extra_items=("Z",))
        sid = SemanticIdMap({0: (0, 0), 1: (0, 1), 2: (3, 0)}, length=2)
        pidx = build_prefix_index(ds, sid, max_hop=2)
        inst = make_inst(ds, ["A"], "Z")
        assert max_memorizable_n(pidx, sid, inst) == 0


class TestSupport:
    def test_zero_without_matches(self):
        ds = build_dataset([["A", "B"]], extra_items=("Z",))
        sid = SemanticIdMap({0: (0, 0), 1: (0, 1), 2: (3, 0)}, length=2)
        pidx = build_prefix_index(ds, sid, max_hop=4)
        assert support(pidx, sid, make_inst(ds, ["A"], "Z"), n=1) == 0

    def test_sums_across_hops(self):
        # history [P, Q], target T: hop-1 pair (Q,T) counted twice, hop-2 pair
        # (P,T) once, so the summed support is 3
        ds = build_dataset([["Q", "T"], ["Q", "T"], ["P", "Z", "T"]])
        sid = SemanticIdMap({0: (0, 0), 1: (1, 0), 2: (2, 0), 3: (3, 0)}, length=2)
        pidx = build_prefix_index(ds, sid, max_hop=4)
        inst = make_inst(ds, ["P", "Q"], "T")
        q, t, p = 0, 1, 2
        assert pidx.count(q, t, n=1, hop=1) == 2
        assert pidx.count(p, t, n=1, hop=2) == 1
        assert support(pidx, sid, inst, n=1) == 3

    def test_short_history_truncates(self):
        ds = build_dataset([["A", "B"], ["A", "X", "B"]])
        sid = SemanticIdMap({0: (0, 0), 1: (1, 0), 2: (2, 0)}, length=2)
        pidx = build_prefix_index(ds, sid, max_hop=4)
        inst = make_inst(ds, ["A"], "B")  # history length 1: only hop 1 contributes
        assert support(pidx, sid, inst, n=1) == 1


class TestPhi:
    def test_half(self):
        ds = build_dataset([["B", "C"], ["B", "E"]])
        idx = build_index(ds, max_hop=1)
        value = phi(idx, make_inst(ds, ["B"], "C"))
        assert value == (0.5, True)

    def test_unobserved_pair_is_zero(self):
        ds = build_dataset([["B", "C"], ["B", "E"]], extra_items=("Q",))
        idx = build_index(ds, max_hop=1)
        assert phi(idx, make_inst(ds, ["B"], "Q")) == (0.0, True)

    def test_deterministic_successor_is_one(self):
        ds = build_dataset([["B", "C"]])
        idx = build_index(ds, max_hop=1)
        assert phi(idx, make_inst(ds, ["B"], "C")) == (1.0, True)

    def test_zero_out_degree_flagged_undefined(self):
        ds = build_dataset([["B", "C"]])
        idx = build_index(ds, max_hop=1)
        value = phi(idx, make_inst(ds, ["C"], "B"))
        assert value == (0.0, False)


class TestPsi:
    def test_all_successors_share_target_prefix(self):
        ds = build_dataset([["A", "B"], ["A", "C"]])
        sid = SemanticIdMap({0: (0, 0), 1: (1, 0), 2: (1, 1)}, length=2)
        pidx = build_prefix_index(ds, sid, max_hop=1)
        assert psi(pidx, sid, make_inst(ds, ["A"], "B"), n=1) == (1.0, True)

    def test_unseen_source_prefix_flagged_undefined(self):
        ds = build_dataset([["A", "B"]], extra_items=("Z",))
        sid = SemanticIdMap({0: (0, 0), 1: (0, 1), 2: (3, 0)}, length=2)
        pidx = build_prefix_index(ds, sid, max_hop=1)
        assert psi(pidx, sid, make_inst(ds, ["Z"], "B"), n=1) == (0.0, False)

    def test_hand_counted_half(self):
        # source prefix 0 has hop-1 prefix counts {(0->0): 2, (0->1): 2}
        ds = build_dataset([["A", "B"], ["A", "B"], ["A", "C"], ["A", "C"]])
        sid = SemanticIdMap({0: (0, 0), 1: (0, 1), 2: (1, 0)}, length=2)
        pidx = build_prefix_index(ds, sid, max_hop=1)
        value = psi(pidx, sid, make_inst(ds, ["A"], "C"), n=1)
        assert value == (0.5, True)


class TestProperties:
    def _corpus(self, seed):
        ds = random_corpus(seed=seed, num_users=50, num_items=20, max_len=10)
        split = make_instances(ds)
        sid = random_sid_map(seed, ds.num_items)
        pidx = build_prefix_index(split.train, sid, max_hop=4)
        return ds, split, sid, pidx

    def test_prefix_monotonicity(self):
        for seed in (61, 62):
            ds, split, sid, pidx = self._corpus(seed)
            for inst in split.test:
                hops = [prefix_memorizable(pidx, sid, inst, n) for n in range(1, sid.length + 1)]
                for n in range(1, sid.length):
                    if hops[n] is not None:  # memorizable at n+1
                        assert hops[n - 1] is not None
                        assert hops[n - 1] <= hops[n]

    def test_aggregation_consistency(self):
        # counts at length n equal the sum of counts over all length-(n+1) extensions
        ds, split, sid, pidx = self._corpus(63)
        for n in range(1, sid.length):
            for hop in range(1, 5):
                fine_pairs: dict[tuple, int] = {}
                coarse: dict[tuple, int] = {}
                for src in range(ds.num_items):
                    for dst in range(ds.num_items):
                        count = pidx.count(src, dst, n=n + 1, hop=hop)
                        if count:
                            key = (prefix(sid, src, n + 1), prefix(sid, dst, n + 1))
                            fine_pairs[key] = count  # same value for every item pair
                        coarse_count = pidx.count(src, dst, n=n, hop=hop)
                        if coarse_count:
                            coarse[(prefix(sid, src, n), prefix(sid, dst, n))] = coarse_count
                rolled_up: dict[tuple, int] = {}
                for (src_pref, dst_pref), count in fine_pairs.items():
                    key = (src_pref[:n], dst_pref[:n])
                    rolled_up[key] = rolled_up.get(key, 0) + count
                assert coarse == rolled_up

    def test_full_length_hop1_equals_memorization(self):
        ds, split, sid, pidx = self._corpus(64)
        idx = build_index(split.train, 4)
        for inst in split.test:
            token_mem = prefix_memorizable(pidx, sid, inst, n=sid.length, max_hop=1) == 1
            assert token_mem == check_memorization(idx, inst)

    def test_ratio_ranges_and_flow_conservation(self):
        ds, split, sid, pidx = self._corpus(65)
        idx = build_index(split.train, 4)
        for inst in split.test:
            value, _ = phi(idx, inst)
            assert 0.0 <= value <= 1.0
            value, _ = psi(pidx, sid, inst, n=2)
            assert 0.0 <= value <= 1.0
        for src in range(ds.num_items):
            outgoing = sum(idx.count(src, int(d), 1) for d in idx.succ(src, 1))
            assert outgoing == idx.out_total(src, 1)

    def test_max_n_bucket_invariant_to_sid_map_choice(self):
        # the full-length bucket depends only on item-level membership
        ds, split, sid_a, pidx_a = self._corpus(66)
        sid_b = random_sid_map(999, ds.num_items)
        pidx_b = build_prefix_index(split.train, sid_b, max_hop=4)
        bucket_a = {
            i for i, inst in enumerate(split.test)
            if max_memorizable_n(pidx_a, sid_a, inst) == sid_a.length
        }
        bucket_b = {
            i for i, inst in enumerate(split.test)
            if max_memorizable_n(pidx_b, sid_b, inst) == sid_b.length
        }
        assert bucket_a == bucket_b
