"""Core data model: interaction corpora, ID dictionaries, and evaluation instances."""
from __future__ import annotations

from dataclasses import dataclass, field


class IdMap:
    """Bidirectional map between raw string IDs and dense integer indices.

    Indices are assigned in first-appearance order so that repeated builds
    over the same input produce identical dictionaries.
    """

    __slots__ = ("_to_index", "_to_raw")

    def __init__(self, raw_ids: list[str] | None = None) -> None:
        self._to_index: dict[str, int] = {}
        self._to_raw: list[str] = []
        if raw_ids:
            for raw in raw_ids:
                self.add(raw)

    def add(self, raw: str) -> int:
        """Return the index for ``raw``, assigning the next free one if new."""
        idx = self._to_index.get(raw)
        if idx is None:
            idx = len(self._to_raw)
            self._to_index[raw] = idx
            self._to_raw.append(raw)
        return idx

    def index(self, raw: str) -> int:
        try:
            return self._to_index[raw]
        except KeyError:
            raise KeyError(f"unknown id {raw!r}") from None

    def raw(self, index: int) -> str:
        return self._to_raw[index]

    def __contains__(self, raw: str) -> bool:
        return raw in self._to_index

    def __len__(self) -> int:
        return len(self._to_raw)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, IdMap) and self._to_raw == other._to_raw


@dataclass
class Sequence:
    """One user's chronologically ordered interactions (dense item indices)."""

    user: int
    items: list[int]

    def __post_init__(self) -> None:
        if not self.items:
            raise ValueError("sequence must contain at least one item")


@dataclass
class Dataset:
    """A set of user sequences plus the ID dictionaries that index them.

    Immutable by convention after construction; safe to share read-only
    across workers.
    """

    sequences: list[Sequence]
    item_dict: IdMap = field(default_factory=IdMap)
    user_dict: IdMap = field(default_factory=IdMap)

    def __post_init__(self) -> None:
        n_items = len(self.item_dict)
        for seq in self.sequences:
            for item in seq.items:
                if not 0 <= item < n_items:
                    raise ValueError(
                        f"item index {item} out of range for dictionary of size {n_items}"
                    )

    @property
    def num_items(self) -> int:
        return len(self.item_dict)

    @property
    def num_users(self) -> int:
        return len(self.user_dict)

    def stats(self) -> dict:
        """Summary statistics: users, items, interactions, average length."""
        total = sum(len(s.items) for s in self.sequences)
        n_seq = len(self.sequences)
        return {
            "users": n_seq,
            "items": self.num_items,
            "interactions": total,
            "avg_length": total / n_seq if n_seq else 0.0,
        }


@dataclass(frozen=True)
class Instance:
    """A next-item evaluation instance: a history and the held-out target."""

    user: int
    history: tuple[int, ...]
    target: int

    def __post_init__(self) -> None:
        if not self.history:
            raise ValueError("instance history must be non-empty")


@dataclass(frozen=True)
class TransitionQuery:
    """A directed item pair at an exact positional gap (hop >= 1)."""

    source: int
    dest: int
    hop: int = 1

    def __post_init__(self) -> None:
        if self.hop < 1:
            raise ValueError("hop must be >= 1")


@dataclass(frozen=True)
class SplitSpec:
    """Parameters of the leave-last-out split.

    Sequences shorter than ``min_length`` contribute only to training and
    yield no validation/test instance.
    """

    min_length: int = 3

    def __post_init__(self) -> None:
        if self.min_length < 3:
            raise ValueError("min_length must be >= 3 (history, validation and test targets)")


@dataclass
class Split:
    train: Dataset
    val: list[Instance]
    test: list[Instance]


def make_instances(dataset: Dataset, split: SplitSpec = SplitSpec()) -> Split:
    """Leave-last-out split: last item per sequence is the test target, the
    second-to-last the validation target, and the remaining prefix trains.

    Instance histories exclude their own target: the test history is the full
    sequence minus its last item, the validation history is the training
    prefix.
    """
    if not dataset.sequences:
        raise ValueError("no sequences")
    train_seqs: list[Sequence] = []
    val: list[Instance] = []
    test: list[Instance] = []
    for seq in dataset.sequences:
        items = seq.items
        if len(items) < split.min_length:
            train_seqs.append(Sequence(seq.user, list(items)))
            continue
        train_seqs.append(Sequence(seq.user, list(items[:-2])))
        val.append(Instance(seq.user, tuple(items[:-2]), items[-2]))
        test.append(Instance(seq.user, tuple(items[:-1]), items[-1]))
    train = Dataset(train_seqs, dataset.item_dict, dataset.user_dict)
    return Split(train=train, val=val, test=test)
