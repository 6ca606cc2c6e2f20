"""Parsers, validators, and writers for all on-disk formats.

Formats are line-oriented UTF-8 TSV:

* interactions: ``user_id<TAB>item1,item2,...`` (one user per line,
  chronological order);
* predictions: ``user_id<TAB>item:score,item:score,...`` (descending);
* semantic-ID map: ``item_id<TAB>t1 t2 ... tL``;
* labels: fixed-header TSV of per-instance category records.

Reports are written deterministically: identical inputs produce identical
bytes (fixed key order, 4-decimal metric fields, 2-decimal ratio fields).
"""
from __future__ import annotations

import hashlib
import json

from .attribution import GENERALIZATION_TYPES, CategoryRecord, RatioSummary
from .domain import Dataset, IdMap, Sequence
from .metrics import PredictionList
from .tokens import SemanticIdMap

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_IO = 3

LABEL_HEADER = (
    "user\ttarget\tmemorization\tsubstitutability_hop\tsymmetry_hop\t"
    "transitivity_hop\tsecond_symmetry_hop\tsecond_symmetry_kind\tuncategorized"
)


class ValidationError(ValueError):
    """Malformed or inconsistent input; maps to exit code 2."""


def sha256_of(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


# -- interactions ---------------------------------------------------------------


def _parse_interaction_lines(path: str) -> list[tuple[str, list[str]]]:
    rows: list[tuple[str, list[str]]] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2 or not parts[0] or not parts[1]:
                raise ValidationError(f"{path}:{lineno}: malformed interaction line")
            items = parts[1].split(",")
            if any(not item for item in items):
                raise ValidationError(f"{path}:{lineno}: empty item id")
            rows.append((parts[0], items))
    if not rows:
        raise ValidationError(f"{path}: no sequences")
    return rows


def k_core_filter(rows: list[tuple[str, list[str]]], k: int) -> list[tuple[str, list[str]]]:
    """Iteratively drop items with fewer than k occurrences and users with
    fewer than k remaining interactions, until a fixpoint."""
    if k < 1:
        raise ValueError("k-core threshold must be >= 1")
    current = rows
    while True:
        item_counts: dict[str, int] = {}
        for _, items in current:
            for item in items:
                item_counts[item] = item_counts.get(item, 0) + 1
        keep_items = {item for item, count in item_counts.items() if count >= k}
        changed = False
        filtered: list[tuple[str, list[str]]] = []
        for user, items in current:
            kept = [item for item in items if item in keep_items]
            if len(kept) >= k:
                filtered.append((user, kept))
                if len(kept) != len(items):
                    changed = True
            else:
                changed = True
        current = filtered
        if not changed:
            return current


def read_interactions(path: str, kcore: int | None = None) -> Dataset:
    """Parse an interactions file into a Dataset, optionally applying an
    iterative k-core filter before dictionary assignment."""
    rows = _parse_interaction_lines(path)
    if kcore is not None:
        rows = k_core_filter(rows, kcore)
        if not rows:
            raise ValidationError(f"{path}: no sequences left after {kcore}-core filtering")
    item_dict = IdMap()
    user_dict = IdMap()
    sequences: list[Sequence] = []
    for user_raw, item_raws in rows:
        user = user_dict.add(user_raw)
        sequences.append(Sequence(user, [item_dict.add(raw) for raw in item_raws]))
    return Dataset(sequences, item_dict, user_dict)


def write_interactions(dataset: Dataset, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for seq in dataset.sequences:
            user_raw = dataset.user_dict.raw(seq.user)
            items = ",".join(dataset.item_dict.raw(item) for item in seq.items)
            fh.write(f"{user_raw}\t{items}\n")


# -- predictions ------------------------------------------------------------------


def read_predictions(path: str, dataset: Dataset,
                     expect_probability: bool = False) -> list[PredictionList]:
    """Parse per-user ranked prediction lists, validating monotone scores,
    duplicate items, and (optionally) sub-distribution probabilities."""
    preds: list[PredictionList] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2 or not parts[1]:
                raise ValidationError(f"{path}:{lineno}: malformed prediction line")
            user_raw = parts[0]
            if user_raw not in dataset.user_dict:
                raise ValidationError(f"{path}:{lineno}: unknown user {user_raw!r}")
            ranked: list[tuple[int, float]] = []
            for field in parts[1].split(","):
                item_raw, sep, score_raw = field.rpartition(":")
                if not sep or not item_raw:
                    raise ValidationError(f"{path}:{lineno}: malformed item:score field {field!r}")
                if item_raw not in dataset.item_dict:
                    raise ValidationError(f"{path}:{lineno}: unknown item {item_raw!r}")
                try:
                    score = float(score_raw)
                except ValueError:
                    raise ValidationError(f"{path}:{lineno}: bad score {score_raw!r}") from None
                ranked.append((dataset.item_dict.index(item_raw), score))
            try:
                preds.append(
                    PredictionList(
                        user=dataset.user_dict.index(user_raw),
                        ranked=ranked,
                        is_probability=expect_probability,
                    )
                )
            except ValueError as exc:
                raise ValidationError(f"{path}:{lineno}: {exc}") from None
    if not preds:
        raise ValidationError(f"{path}: no predictions")
    return preds


def write_predictions(preds: list[PredictionList], dataset: Dataset, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for pred in preds:
            fields = ",".join(
                f"{dataset.item_dict.raw(item)}:{score!r}" for item, score in pred.ranked
            )
            fh.write(f"{dataset.user_dict.raw(pred.user)}\t{fields}\n")


# -- semantic-ID maps -------------------------------------------------------------


def read_sid_map(path: str, dataset: Dataset) -> SemanticIdMap:
    """Parse an item -> token-sequence map; rejects ragged lines and duplicate
    full token sequences.  Items unknown to the dataset are skipped."""
    tokens_by_item: dict[int, tuple[int, ...]] = {}
    length: int | None = None
    seen_full: dict[tuple[int, ...], str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2 or not parts[1]:
                raise ValidationError(f"{path}:{lineno}: malformed token line")
            try:
                toks = tuple(int(t) for t in parts[1].split(" "))
            except ValueError:
                raise ValidationError(f"{path}:{lineno}: non-integer token") from None
            if length is None:
                length = len(toks)
            elif len(toks) != length:
                raise ValidationError(
                    f"{path}:{lineno}: ragged token line ({len(toks)} tokens, expected {length})"
                )
            if toks in seen_full:
                raise ValidationError(
                    f"{path}:{lineno}: duplicate token sequence (also used by {seen_full[toks]!r})"
                )
            seen_full[toks] = parts[0]
            if parts[0] in dataset.item_dict:
                tokens_by_item[dataset.item_dict.index(parts[0])] = toks
    if length is None:
        raise ValidationError(f"{path}: empty token map")
    return SemanticIdMap(tokens_by_item, length, num_items=dataset.num_items)


def write_sid_map(sid_map: SemanticIdMap, dataset: Dataset, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for item in range(dataset.num_items):
            if sid_map.has_tokens(item):
                toks = " ".join(str(int(t)) for t in sid_map.tokens[item])
                fh.write(f"{dataset.item_dict.raw(item)}\t{toks}\n")


# -- label files --------------------------------------------------------------------


def _hop_str(hop: int | None) -> str:
    return "-" if hop is None else str(hop)


def write_labels(records: list[CategoryRecord], instances, dataset: Dataset, path: str) -> None:
    if len(records) != len(instances):
        raise ValueError("records misaligned with instances")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(LABEL_HEADER + "\n")
        for rec, inst in zip(records, instances):
            fh.write(
                "\t".join(
                    [
                        dataset.user_dict.raw(inst.user),
                        dataset.item_dict.raw(inst.target),
                        str(int(rec.memorization)),
                        _hop_str(rec.substitutability_hop),
                        _hop_str(rec.symmetry_hop),
                        _hop_str(rec.transitivity_hop),
                        _hop_str(rec.second_symmetry_hop),
                        rec.second_symmetry_kind or "-",
                        str(int(rec.uncategorized)),
                    ]
                )
                + "\n"
            )


def read_labels(path: str) -> list[tuple[str, str, CategoryRecord]]:
    def parse_hop(text: str) -> int | None:
        return None if text == "-" else int(text)

    out: list[tuple[str, str, CategoryRecord]] = []
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        if header != LABEL_HEADER:
            raise ValidationError(f"{path}: unexpected label header")
        for lineno, line in enumerate(fh, start=2):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 9:
                raise ValidationError(f"{path}:{lineno}: malformed label line")
            record = CategoryRecord(
                memorization=parts[2] == "1",
                substitutability_hop=parse_hop(parts[3]),
                symmetry_hop=parse_hop(parts[4]),
                transitivity_hop=parse_hop(parts[5]),
                second_symmetry_hop=parse_hop(parts[6]),
                second_symmetry_kind=None if parts[7] == "-" else parts[7],
                uncategorized=parts[8] == "1",
            )
            out.append((parts[0], parts[1], record))
    return out


# -- reports ---------------------------------------------------------------------


class TableReport:
    """Plain header + rows report with a parallel JSON representation."""

    def __init__(self, header: list[str], rows: list[list[str]], json_obj: dict | None = None) -> None:
        self.header = header
        self.rows = rows
        self._json_obj = json_obj

    def to_table(self) -> tuple[list[str], list[list[str]]]:
        return self.header, self.rows

    def to_json_obj(self) -> dict:
        if self._json_obj is not None:
            return self._json_obj
        return {"rows": [dict(zip(self.header, row)) for row in self.rows]}


class SummaryReport:
    """Renderable wrapper around a `RatioSummary` for `write_report`."""

    def __init__(self, summary: RatioSummary, max_hop: int) -> None:
        self.summary = summary
        self.max_hop = max_hop

    def _entries(self) -> list[tuple[str, int, float]]:
        s = self.summary
        entries = [
            ("memorization", s.memorization, s.memorization_pct),
            ("generalization", s.generalization, s.generalization_pct),
            ("uncategorized", s.uncategorized, s.uncategorized_pct),
        ]
        for type_name in GENERALIZATION_TYPES:
            start = 2 if type_name == "substitutability" else 1
            for hop in range(start, self.max_hop + 1):
                count = s.per_type_hop.get(type_name, {}).get(hop, 0)
                entries.append((f"{type_name}@{hop}", count, s.type_hop_pct(type_name, hop)))
        return entries

    def to_table(self) -> tuple[list[str], list[list[str]]]:
        header = ["category", "count", "ratio_pct"]
        rows = [[label, str(count), f"{pct:.2f}"] for label, count, pct in self._entries()]
        rows.append(
            ["total", str(self.summary.total), "100.00" if self.summary.defined else "undefined"]
        )
        return header, rows

    def to_json_obj(self) -> dict:
        return {
            "defined": self.summary.defined,
            "total": self.summary.total,
            "categories": [
                {"label": label, "count": count, "ratio_pct": round(pct, 2)}
                for label, count, pct in self._entries()
            ],
        }


def write_report(report, path: str, fmt: str = "tsv", provenance: dict | None = None) -> None:
    """Serialize a report object deterministically.

    The object must expose ``to_table()`` for TSV and ``to_json_obj()`` for
    JSON.  Provenance (input hashes, config, tool version) is embedded as
    comment lines (TSV) or a top-level key (JSON).
    """
    if fmt not in ("tsv", "json"):
        raise ValueError(f"unknown report format {fmt!r}")
    if fmt == "json":
        obj = {"provenance": provenance or {}, "report": report.to_json_obj()}
        text = json.dumps(obj, sort_keys=True, indent=2) + "\n"
    else:
        header, rows = report.to_table()
        lines = []
        if provenance:
            lines.append("# provenance: " + json.dumps(provenance, sort_keys=True))
        lines.append("\t".join(header))
        lines.extend("\t".join(row) for row in rows)
        text = "\n".join(lines) + "\n"
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
