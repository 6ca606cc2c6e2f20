"""Shared fixture helpers: tiny corpora from raw item strings."""
from __future__ import annotations

from memlens.domain import Dataset, IdMap, Instance, Sequence


def build_dataset(seq_items: list[list[str]], extra_items: tuple[str, ...] = ()) -> Dataset:
    """Dataset from raw item-string sequences; extra_items are registered in
    the dictionary without appearing in any sequence (unseen targets)."""
    item_dict = IdMap()
    user_dict = IdMap()
    seqs = []
    for i, items in enumerate(seq_items):
        user = user_dict.add(f"u{i}")
        seqs.append(Sequence(user, [item_dict.add(x) for x in items]))
    for raw in extra_items:
        item_dict.add(raw)
    return Dataset(seqs, item_dict, user_dict)


def make_inst(ds: Dataset, history: list[str], target: str, user: str = "q0") -> Instance:
    """Instance over raw strings; the query user is registered on demand."""
    return Instance(
        user=ds.user_dict.add(user),
        history=tuple(ds.item_dict.index(x) for x in history),
        target=ds.item_dict.index(target),
    )


def item(ds: Dataset, raw: str) -> int:
    return ds.item_dict.index(raw)
