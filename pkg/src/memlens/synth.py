"""Deterministic synthetic corpora with planted category structure.

Corpora are built as full interaction lines and pushed through the standard
leave-last-out split, so writing them to disk and re-reading them through
the normal pipeline reproduces the planted labels exactly.  Planted units
draw from disjoint item blocks and are verified against the brute-force
attribution oracle before emission.

Planting constraints imposed by the split (the training prefix of a test
line enters the training data):

* substitutability at hops 3-4 needs a two-intermediate training witness,
  which the split pads with two throwaway trailing items; each such padded
  line forces one extra uncategorized test instance, charged against the
  requested uncategorized quota;
* symmetry is plantable at hops 1-2 only: at hop >= 3 the prefix chain
  combines with the reversed training pair into a reverse-path match at a
  smaller hop, so exact planting is impossible by construction.

Filler sequences are training-only (length 1-2) and use their own item
range, so they can never change planted labels.
"""
from __future__ import annotations

import json
import random
from dataclasses import dataclass, field

import numpy as np

from .attribution import (
    COMMON_CAUSE,
    COMMON_EFFECT,
    REVERSE_PATH,
    AttributionConfig,
    CategoryRecord,
    attribute_bruteforce,
)
from .domain import Dataset, IdMap, Instance, Sequence, make_instances
from .tokens import SemanticIdMap

PLANT_MAX_HOP = 4

_KINDS = (COMMON_CAUSE, COMMON_EFFECT, REVERSE_PATH)


@dataclass(frozen=True)
class SidSpec:
    """Synthetic semantic-ID assignment: ``length`` tokens per item, the
    first length-1 levels drawn from a ``codebook``-sized vocabulary and the
    last level a disambiguating identifier.  ``collision_rate`` is the
    probability that an item reuses a previously assigned prefix."""

    length: int = 3
    codebook: int = 8
    collision_rate: float = 0.0

    def __post_init__(self) -> None:
        if self.length < 2:
            raise ValueError("sid length must be >= 2 (prefix plus identifier token)")
        if self.codebook < 1:
            raise ValueError("sid codebook must be >= 1")
        if not 0.0 <= self.collision_rate <= 1.0:
            raise ValueError("collision_rate must lie in [0, 1]")


@dataclass
class PlantSpec:
    """Counts of planted category units plus filler and SID parameters."""

    seed: int = 0
    memorization: int = 0
    substitutability: dict[int, int] = field(default_factory=dict)  # hop (2-4) -> count
    symmetry: dict[int, int] = field(default_factory=dict)          # hop (1-2) -> count
    transitivity: dict[int, int] = field(default_factory=dict)      # hop (1-4) -> count
    second_symmetry: dict[tuple[int, str], int] = field(default_factory=dict)
    uncategorized: int = 0
    filler_sequences: int = 0
    filler_items: int = 0
    item_pool: int | None = None
    sid: SidSpec | None = None

    def validate(self) -> None:
        for hop, count in self.substitutability.items():
            if not 2 <= hop <= PLANT_MAX_HOP:
                raise ValueError(f"substitutability hop {hop} outside [2..{PLANT_MAX_HOP}]")
            _check_count(count)
        for hop, count in self.symmetry.items():
            if not 1 <= hop <= 2:
                raise ValueError(
                    f"symmetry hop {hop} cannot be planted through the leave-last-out "
                    "split; plantable symmetry hops are 1-2"
                )
            _check_count(count)
        for hop, count in self.transitivity.items():
            if not 1 <= hop <= PLANT_MAX_HOP:
                raise ValueError(f"transitivity hop {hop} outside [1..{PLANT_MAX_HOP}]")
            _check_count(count)
        for (hop, kind), count in self.second_symmetry.items():
            if not 1 <= hop <= PLANT_MAX_HOP:
                raise ValueError(f"second_symmetry hop {hop} outside [1..{PLANT_MAX_HOP}]")
            if kind not in _KINDS:
                raise ValueError(f"unknown second_symmetry kind {kind!r}")
            _check_count(count)
        for count in (self.memorization, self.uncategorized, self.filler_sequences):
            _check_count(count)
        forced = self.forced_uncategorized()
        if self.uncategorized < forced:
            raise ValueError(
                f"uncategorized count {self.uncategorized} cannot cover the {forced} "
                "instance(s) forced by padded substitutability training lines"
            )
        if self.filler_sequences and self.filler_items < 1:
            raise ValueError("filler_sequences require filler_items >= 1")

    def forced_uncategorized(self) -> int:
        """Extra uncategorized instances forced by hop-3/4 substitutability."""
        return sum(count for hop, count in self.substitutability.items() if hop >= 3)


def _check_count(count: int) -> None:
    if count < 0:
        raise ValueError("planted counts must be >= 0")


@dataclass
class GeneratedCorpus:
    dataset: Dataset               # full interaction lines (pre-split)
    train: Dataset
    test: list[Instance]
    expected: list[CategoryRecord]
    sid_map: SemanticIdMap | None


class _Builder:
    def __init__(self) -> None:
        self.lines: list[tuple[str, list[str]]] = []
        self.expected_by_user: dict[str, CategoryRecord] = {}
        self.next_item = 0
        self.next_user = 0

    def items(self, count: int) -> list[str]:
        block = [f"i{self.next_item + offset:07d}" for offset in range(count)]
        self.next_item += count
        return block

    def add_line(self, items: list[str], expect: CategoryRecord | None = None) -> None:
        user = f"u{self.next_user:07d}"
        self.next_user += 1
        self.lines.append((user, items))
        if expect is not None:
            self.expected_by_user[user] = expect


def _plant_memorization(b: _Builder) -> None:
    g, p, q = b.items(3)
    b.add_line([p, q])
    b.add_line([g, p, q], CategoryRecord(memorization=True))


def _plant_substitutability(b: _Builder, hop: int) -> None:
    if hop == 2:
        s, t, f1 = b.items(3)
        b.add_line([s, t])
        b.add_line([s, f1, t], CategoryRecord(substitutability_hop=2))
        return
    # hops 3-4: two-intermediate witness, padded to survive the split
    s, m1, m2, t, d1, d2 = b.items(6)
    fillers = b.items(hop - 1)
    b.add_line([s, m1, m2, t, d1, d2], CategoryRecord(uncategorized=True))
    b.add_line([s, *fillers, t], CategoryRecord(substitutability_hop=hop))


def _plant_symmetry(b: _Builder, hop: int) -> None:
    t, s = b.items(2)
    b.add_line([t, s])
    if hop == 1:
        (g,) = b.items(1)
        b.add_line([g, s, t], CategoryRecord(symmetry_hop=1))
    else:
        (f1,) = b.items(1)
        b.add_line([s, f1, t], CategoryRecord(symmetry_hop=2))


def _plant_transitivity(b: _Builder, hop: int) -> None:
    s, x, t = b.items(3)
    b.add_line([s, x])
    b.add_line([x, t])
    _add_generalization_test_line(b, s, t, hop, CategoryRecord(transitivity_hop=hop))


def _plant_second_symmetry(b: _Builder, hop: int, kind: str) -> None:
    s, x, t = b.items(3)
    if kind == COMMON_CAUSE:
        b.add_line([x, s])
        b.add_line([x, t])
    elif kind == COMMON_EFFECT:
        b.add_line([s, x])
        b.add_line([t, x])
    else:  # reverse path
        b.add_line([t, x])
        b.add_line([x, s])
    _add_generalization_test_line(
        b, s, t, hop, CategoryRecord(second_symmetry_hop=hop, second_symmetry_kind=kind)
    )


def _add_generalization_test_line(b: _Builder, source: str, target: str, hop: int,
                                  expect: CategoryRecord) -> None:
    if hop == 1:
        (g,) = b.items(1)
        b.add_line([g, source, target], expect)
    else:
        fillers = b.items(hop - 1)
        b.add_line([source, *fillers, target], expect)


def _plant_uncategorized(b: _Builder) -> None:
    g1, g2, u = b.items(3)
    b.add_line([g1, g2, u], CategoryRecord(uncategorized=True))


def _assign_sid(rng: random.Random, spec: SidSpec, num_items: int) -> SemanticIdMap:
    prefixes: list[tuple[int, ...]] = []
    tokens_by_item: dict[int, tuple[int, ...]] = {}
    id_counts: dict[tuple[int, ...], int] = {}
    for item in range(num_items):
        if prefixes and rng.random() < spec.collision_rate:
            prefix = prefixes[rng.randrange(len(prefixes))]
        else:
            prefix = tuple(rng.randrange(spec.codebook) for _ in range(spec.length - 1))
        prefixes.append(prefix)
        identifier = id_counts.get(prefix, 0)
        id_counts[prefix] = identifier + 1
        tokens_by_item[item] = prefix + (identifier,)
    id_codebook = max(id_counts.values(), default=1)
    sizes = [spec.codebook] * (spec.length - 1) + [id_codebook]
    return SemanticIdMap(tokens_by_item, spec.length, codebook_sizes=sizes, num_items=num_items)


def generate(spec: PlantSpec) -> GeneratedCorpus:
    """Build a corpus realizing the planted counts; a pure function of the
    seed.  Every test instance is verified against the brute-force oracle
    before emission and an infeasible spec raises."""
    spec.validate()
    rng = random.Random(spec.seed)
    b = _Builder()

    for _ in range(spec.memorization):
        _plant_memorization(b)
    for hop in sorted(spec.substitutability):
        for _ in range(spec.substitutability[hop]):
            _plant_substitutability(b, hop)
    for hop in sorted(spec.symmetry):
        for _ in range(spec.symmetry[hop]):
            _plant_symmetry(b, hop)
    for hop in sorted(spec.transitivity):
        for _ in range(spec.transitivity[hop]):
            _plant_transitivity(b, hop)
    for hop, kind in sorted(spec.second_symmetry):
        for _ in range(spec.second_symmetry[(hop, kind)]):
            _plant_second_symmetry(b, hop, kind)
    for _ in range(spec.uncategorized - spec.forced_uncategorized()):
        _plant_uncategorized(b)

    if spec.filler_sequences:
        filler_items = b.items(spec.filler_items)
        for _ in range(spec.filler_sequences):
            length = rng.choice((1, 2))
            b.add_line([rng.choice(filler_items) for _ in range(length)])

    if spec.item_pool is not None and b.next_item > spec.item_pool:
        raise ValueError(
            f"item pool too small: {b.next_item} items needed, {spec.item_pool} allowed"
        )

    item_dict = IdMap()
    user_dict = IdMap()
    sequences = []
    for user_raw, item_raws in b.lines:
        user = user_dict.add(user_raw)
        sequences.append(Sequence(user, [item_dict.add(raw) for raw in item_raws]))
    dataset = Dataset(sequences, item_dict, user_dict)
    split = make_instances(dataset)

    expected: list[CategoryRecord] = []
    cfg = AttributionConfig(max_hop=PLANT_MAX_HOP)
    for inst in split.test:
        want = b.expected_by_user[user_dict.raw(inst.user)]
        got = attribute_bruteforce(split.train, inst, cfg)
        if got != want:
            raise RuntimeError(
                f"planted corpus is inconsistent for user {user_dict.raw(inst.user)}: "
                f"expected {want}, oracle found {got}"
            )
        expected.append(want)

    sid_map = _assign_sid(rng, spec.sid, dataset.num_items) if spec.sid else None
    return GeneratedCorpus(
        dataset=dataset, train=split.train, test=split.test, expected=expected, sid_map=sid_map
    )


def load_plant_spec(path: str) -> PlantSpec:
    """Parse a PlantSpec from a JSON file; hop keys are strings, the
    second-symmetry keys are ``"hop:kind"``."""
    with open(path, encoding="utf-8") as fh:
        obj = json.load(fh)
    try:
        second = {}
        for key, count in obj.get("second_symmetry", {}).items():
            hop_str, _, kind = key.partition(":")
            second[(int(hop_str), kind)] = int(count)
        sid = SidSpec(**obj["sid"]) if obj.get("sid") else None
        spec = PlantSpec(
            seed=int(obj.get("seed", 0)),
            memorization=int(obj.get("memorization", 0)),
            substitutability={int(h): int(c) for h, c in obj.get("substitutability", {}).items()},
            symmetry={int(h): int(c) for h, c in obj.get("symmetry", {}).items()},
            transitivity={int(h): int(c) for h, c in obj.get("transitivity", {}).items()},
            second_symmetry=second,
            uncategorized=int(obj.get("uncategorized", 0)),
            filler_sequences=int(obj.get("filler_sequences", 0)),
            filler_items=int(obj.get("filler_items", 0)),
            item_pool=None if obj.get("item_pool") is None else int(obj["item_pool"]),
            sid=sid,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"{path}: invalid plant spec: {exc}") from None
    spec.validate()
    return spec


def random_corpus(seed: int, num_users: int, num_items: int, min_len: int = 1,
                  max_len: int = 15) -> Dataset:
    """Uniform random corpus used by property tests and benchmarks."""
    if num_users < 1 or num_items < 1:
        raise ValueError("need at least one user and one item")
    rng = np.random.default_rng(seed)
    lengths = rng.integers(min_len, max_len + 1, size=num_users)
    flat = rng.integers(0, num_items, size=int(lengths.sum()))
    item_dict = IdMap([f"i{idx}" for idx in range(num_items)])
    user_dict = IdMap([f"u{idx}" for idx in range(num_users)])
    sequences = []
    offset = 0
    for user in range(num_users):
        length = int(lengths[user])
        sequences.append(Sequence(user, [int(v) for v in flat[offset : offset + length]]))
        offset += length
    return Dataset(sequences, item_dict, user_dict)
