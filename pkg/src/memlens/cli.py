"""Command-line pipeline: index, attribute, tokenmem, evaluate, bins,
ensemble, synth.

Options can come from a flat key=value config file (via --config or the
MEMLENS_CONFIG environment variable); command-line flags override file
values.  Exit codes: 0 success, 2 validation failure, 3 I/O failure.
"""
from __future__ import annotations

import argparse
import json
import os
import sys

from . import __version__, ingest
from .attribution import GENERALIZATION_TYPES, AttributionConfig, attribute_all
from .domain import Dataset, Instance, make_instances
from .ensemble import (
    DEFAULT_ALPHA_STATIC_GRID,
    DEFAULT_Q_GRID,
    DEFAULT_TAU_GRID,
    EnsembleConfig,
    fuse,
    indicator_report,
    tune,
)
from .index import TransitionIndex, build_index
from .ingest import SummaryReport, TableReport, ValidationError, write_report
from .metrics import PredictionList, binned_report, breakdown, ndcg_at_k
from .synth import generate, load_plant_spec
from .tokens import build_prefix_index, max_memorizable_n, phi, prefix_memorizable, psi, support

CONFIG_ENV_VAR = "MEMLENS_CONFIG"

# option name -> cast, for values loadable from a config file
_CONFIG_OPTIONS = {
    "max_hop": int,
    "match_mode": str,
    "kcore": int,
    "k": int,
    "bins": int,
    "prefix_len": int,
    "threads": int,
    "q": float,
    "tau": float,
    "alpha_static": float,
    "mode": str,
    "normalization": str,
}


def _load_config_file(path: str) -> dict[str, str]:
    values: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ValidationError(f"{path}:{lineno}: expected key = value")
            values[key.strip()] = value.strip().strip('"')
    return values


def _apply_config(args: argparse.Namespace) -> None:
    path = args.config or os.environ.get(CONFIG_ENV_VAR)
    if not path:
        return
    values = _load_config_file(path)
    unknown = set(values) - set(_CONFIG_OPTIONS)
    if unknown:
        raise ValidationError(f"{path}: unknown config keys: {sorted(unknown)}")
    for key, cast in _CONFIG_OPTIONS.items():
        if key in values and getattr(args, key, None) is None:
            try:
                setattr(args, key, cast(values[key]))
            except ValueError:
                raise ValidationError(f"{path}: bad value for {key}: {values[key]!r}") from None


def _default(args: argparse.Namespace, name: str, value) -> None:
    if getattr(args, name, None) is None:
        setattr(args, name, value)


def _provenance(args: argparse.Namespace, inputs: dict[str, str], config: dict) -> dict:
    return {
        "tool": f"memlens {__version__}",
        "command": args.command,
        "config": config,
        "inputs": {name: ingest.sha256_of(path) for name, path in inputs.items() if path},
    }


def _load_split(args: argparse.Namespace) -> tuple[Dataset, Dataset, list[Instance], list[Instance]]:
    """Dataset plus leave-last-out pieces (full, train, val, test)."""
    dataset = ingest.read_interactions(args.interactions, kcore=args.kcore)
    split = make_instances(dataset)
    return dataset, split.train, split.val, split.test


def _align_predictions(preds: list[PredictionList], instances: list[Instance],
                       dataset: Dataset, name: str) -> list[PredictionList]:
    by_user = {p.user: p for p in preds}
    aligned = []
    for inst in instances:
        pred = by_user.get(inst.user)
        if pred is None:
            raise ValidationError(
                f"{name}: missing prediction list for user {dataset.user_dict.raw(inst.user)!r}"
            )
        aligned.append(pred)
    return aligned


def _write_formats(report, out_base: str, fmt: str, provenance: dict) -> list[str]:
    paths = []
    formats = ("tsv", "json") if fmt == "both" else (fmt,)
    for one in formats:
        path = f"{out_base}.{one}"
        write_report(report, path, fmt=one, provenance=provenance)
        paths.append(path)
    return paths


# -- subcommands -----------------------------------------------------------------


def cmd_index(args: argparse.Namespace) -> int:
    _default(args, "max_hop", 4)
    dataset, train, _, _ = _load_split(args)
    index = build_index(train, args.max_hop)
    index.save(args.out)
    stats = dataset.stats()
    print(
        f"indexed {stats['users']} users, {stats['items']} items, "
        f"{stats['interactions']} interactions (max_hop={args.max_hop}) -> {args.out}"
    )
    return ingest.EXIT_OK


def _attribution_config(args: argparse.Namespace) -> AttributionConfig:
    _default(args, "max_hop", 4)
    _default(args, "match_mode", "adjacent")
    return AttributionConfig(max_hop=args.max_hop, train_match_mode=args.match_mode)


def cmd_attribute(args: argparse.Namespace) -> int:
    _default(args, "threads", 1)
    cfg = _attribution_config(args)
    dataset, train, _, test = _load_split(args)
    if args.index:
        index = TransitionIndex.load(args.index)
    else:
        index = build_index(train, cfg.max_hop)
    records, summary = attribute_all(index, test, cfg, workers=args.threads)
    if args.labels:
        ingest.write_labels(records, test, dataset, args.labels)
    provenance = _provenance(
        args,
        {"interactions": args.interactions},
        {"max_hop": cfg.max_hop, "match_mode": cfg.train_match_mode, "kcore": args.kcore},
    )
    if args.summary:
        _write_formats(SummaryReport(summary, cfg.max_hop), args.summary, args.format, provenance)
    print(
        f"attributed {summary.total} instances: "
        f"mem {summary.memorization_pct:.2f}% / gen {summary.generalization_pct:.2f}% / "
        f"uncat {summary.uncategorized_pct:.2f}%"
    )
    return ingest.EXIT_OK


def _category_members(records) -> dict[str, list[int]]:
    members: dict[str, list[int]] = {
        "all": list(range(len(records))),
        "mem": [],
        "gen": [],
        "uncategorized": [],
    }
    for type_name in GENERALIZATION_TYPES:
        members[type_name] = []
    for i, rec in enumerate(records):
        if rec.memorization:
            members["mem"].append(i)
        elif rec.uncategorized:
            members["uncategorized"].append(i)
        else:
            members["gen"].append(i)
        for type_name in GENERALIZATION_TYPES:
            if rec.hop_of(type_name) is not None:
                members[type_name].append(i)
    return members


def cmd_tokenmem(args: argparse.Namespace) -> int:
    _default(args, "max_hop", 4)
    _default(args, "prefix_len", None)
    cfg = _attribution_config(args)
    dataset, train, _, test = _load_split(args)
    sid_map = ingest.read_sid_map(args.sid_map, dataset)
    pidx = build_prefix_index(train, sid_map, max_n=None, max_hop=cfg.max_hop)
    index = build_index(train, cfg.max_hop)
    records, _ = attribute_all(index, test, cfg, workers=1)

    length = sid_map.length
    max_ns = [max_memorizable_n(pidx, sid_map, inst, cfg.max_hop) for inst in test]
    total = len(test)

    bucket_counts = {n: 0 for n in range(length, -1, -1)}
    for value in max_ns:
        bucket_counts[value] += 1
    bucket_rows = [
        [f"n={n}", str(count), f"{100.0 * count / total:.2f}" if total else "0.00"]
        for n, count in bucket_counts.items()
    ]
    buckets = TableReport(
        ["bucket", "count", "ratio_pct"],
        bucket_rows,
        {
            "total": total,
            "buckets": [
                {"n": n, "count": c, "ratio_pct": round(100.0 * c / total, 2) if total else 0.0}
                for n, c in bucket_counts.items()
            ],
        },
    )

    members = _category_members(records)
    reduction_rows = []
    reduction_json = []
    for label in ("all", "mem", "gen", *GENERALIZATION_TYPES, "uncategorized"):
        idx = members[label]
        row = [label, str(len(idx))]
        ratios = {}
        for n in range(1, length + 1):
            hit = sum(
                1 for i in idx if prefix_memorizable(pidx, sid_map, test[i], n, cfg.max_hop) is not None
            )
            pct = 100.0 * hit / len(idx) if idx else 0.0
            row.append(f"{pct:.2f}")
            ratios[f"n={n}"] = round(pct, 2)
        reduction_rows.append(row)
        reduction_json.append({"category": label, "count": len(idx), "memorizable_pct": ratios})
    reduction = TableReport(
        ["category", "count"] + [f"n={n}" for n in range(1, length + 1)],
        reduction_rows,
        {"categories": reduction_json},
    )

    n_for_stats = args.prefix_len if args.prefix_len else length
    inst_rows = []
    for inst, max_n in zip(test, max_ns):
        support_value = support(pidx, sid_map, inst, n_for_stats, cfg.max_hop)
        phi_value = phi(index, inst)
        psi_value = psi(pidx, sid_map, inst, n_for_stats)
        inst_rows.append(
            [
                dataset.user_dict.raw(inst.user),
                dataset.item_dict.raw(inst.target),
                str(max_n),
                str(support_value),
                f"{phi_value.value:.6f}",
                str(int(phi_value.defined)),
                f"{psi_value.value:.6f}",
                str(int(psi_value.defined)),
            ]
        )
    instances_report = TableReport(
        ["user", "target", "max_n", f"support_n{n_for_stats}", "phi", "phi_defined", "psi", "psi_defined"],
        inst_rows,
    )

    provenance = _provenance(
        args,
        {"interactions": args.interactions, "sid_map": args.sid_map},
        {"max_hop": cfg.max_hop, "prefix_len": n_for_stats, "kcore": args.kcore},
    )
    os.makedirs(args.out_dir, exist_ok=True)
    _write_formats(buckets, os.path.join(args.out_dir, "buckets"), args.format, provenance)
    _write_formats(reduction, os.path.join(args.out_dir, "reduction"), args.format, provenance)
    write_report(
        instances_report,
        os.path.join(args.out_dir, "instances.tsv"),
        fmt="tsv",
        provenance=provenance,
    )
    print(f"token analysis over {total} instances -> {args.out_dir}")
    return ingest.EXIT_OK


def _read_labels_aligned(path: str, test: list[Instance], dataset: Dataset):
    rows = ingest.read_labels(path)
    by_user = {user: record for user, _, record in rows}
    records = []
    for inst in test:
        user_raw = dataset.user_dict.raw(inst.user)
        if user_raw not in by_user:
            raise ValidationError(f"{path}: no label row for user {user_raw!r}")
        records.append(by_user[user_raw])
    return records


def cmd_evaluate(args: argparse.Namespace) -> int:
    _default(args, "k", 10)
    _default(args, "max_hop", 4)
    dataset, _, _, test = _load_split(args)
    records = _read_labels_aligned(args.labels, test, dataset)
    preds_by_model = {}
    for name, path, prob in (("id", args.pred_id, True), ("gr", args.pred_gr, False)):
        if path:
            preds = ingest.read_predictions(path, dataset, expect_probability=prob and args.id_probability)
            preds_by_model[name] = _align_predictions(preds, test, dataset, path)
    if not preds_by_model:
        raise ValidationError("evaluate needs at least one of --pred-id/--pred-gr")
    targets = [inst.target for inst in test]
    report = breakdown(records, preds_by_model, targets, args.k, max_hop=args.max_hop)
    provenance = _provenance(
        args,
        {"interactions": args.interactions, "labels": args.labels,
         "pred_id": args.pred_id or "", "pred_gr": args.pred_gr or ""},
        {"k": args.k, "max_hop": args.max_hop, "kcore": args.kcore},
    )
    paths = _write_formats(report, args.out, args.format, provenance)
    print(f"breakdown over {report.total} instances -> {', '.join(paths)}")
    return ingest.EXIT_OK


def cmd_bins(args: argparse.Namespace) -> int:
    _default(args, "k", 10)
    _default(args, "bins", 5)
    _default(args, "max_hop", 4)
    _default(args, "prefix_len", None)
    dataset, train, _, test = _load_split(args)

    records = None
    if args.labels:
        records = _read_labels_aligned(args.labels, test, dataset)
    if args.filter != "all" and records is None:
        raise ValidationError("--filter needs --labels")

    keep = list(range(len(test)))
    if args.filter == "mem":
        keep = [i for i in keep if records[i].memorization]
    elif args.filter == "gen":
        keep = [i for i in keep if records[i].generalization]
    elif args.filter == "uncategorized":
        keep = [i for i in keep if records[i].uncategorized]
    if not keep:
        raise ValidationError(f"no instances match filter {args.filter!r}")
    instances = [test[i] for i in keep]

    id_needs_prob = args.id_probability or args.key == "msp"
    preds_by_model: dict[str, list[PredictionList]] = {}
    for name, path, prob in (("id", args.pred_id, id_needs_prob), ("gr", args.pred_gr, False)):
        if path:
            preds = ingest.read_predictions(path, dataset, expect_probability=prob)
            aligned = _align_predictions(preds, test, dataset, path)
            preds_by_model[name] = [aligned[i] for i in keep]
    metric_rows = {
        model: [ndcg_at_k(p, inst.target, args.k) for p, inst in zip(preds, instances)]
        for model, preds in preds_by_model.items()
    }
    mem_flags = [records[i].memorization for i in keep] if records else None

    if args.key == "msp":
        if "id" not in preds_by_model:
            raise ValidationError("--key msp needs --pred-id with probability scores")
        keys = [p.ranked[0][1] for p in preds_by_model["id"]]
    else:
        if not args.sid_map:
            raise ValidationError(f"--key {args.key} needs --sid-map")
        sid_map = ingest.read_sid_map(args.sid_map, dataset)
        pidx = build_prefix_index(train, sid_map, max_n=None, max_hop=args.max_hop)
        n = args.prefix_len or sid_map.length
        if args.key == "support":
            keys = [float(support(pidx, sid_map, inst, n, args.max_hop)) for inst in instances]
        else:  # phi-psi grid
            index = build_index(train, 1)
            keys = [
                (phi(index, inst).value, psi(pidx, sid_map, inst, n).value)
                for inst in instances
            ]
            if len(metric_rows) != 2:
                raise ValidationError("--key phi-psi needs both --pred-id and --pred-gr")
    if not metric_rows:
        raise ValidationError("bins needs at least one prediction file")

    report = binned_report(keys, metric_rows, args.bins, mem_flags=mem_flags)
    provenance = _provenance(
        args,
        {"interactions": args.interactions, "labels": args.labels or "",
         "sid_map": args.sid_map or "", "pred_id": args.pred_id or "",
         "pred_gr": args.pred_gr or ""},
        {"key": args.key, "bins": args.bins, "k": args.k, "filter": args.filter,
         "prefix_len": args.prefix_len, "kcore": args.kcore},
    )
    paths = _write_formats(report, args.out, args.format, provenance)
    print(f"binned report ({args.key}) over {len(instances)} instances -> {', '.join(paths)}")
    return ingest.EXIT_OK


def _ensemble_config(args: argparse.Namespace) -> EnsembleConfig:
    _default(args, "q", 1.0)
    _default(args, "tau", 0.0)
    _default(args, "alpha_static", 0.5)
    _default(args, "mode", "adaptive")
    _default(args, "normalization", "minmax")
    return EnsembleConfig(
        q=args.q,
        tau=args.tau,
        alpha_static=args.alpha_static,
        mode=args.mode,
        normalization=args.normalization,
    )


def cmd_ensemble_run(args: argparse.Namespace) -> int:
    cfg = _ensemble_config(args)
    dataset = ingest.read_interactions(args.interactions, kcore=args.kcore)
    preds_id = ingest.read_predictions(args.pred_id, dataset, expect_probability=True)
    preds_gr = ingest.read_predictions(args.pred_gr, dataset, expect_probability=False)
    gr_by_user = {p.user: p for p in preds_gr}
    fused = []
    alphas = []
    union_sizes = []
    for pred_id in preds_id:
        pred_gr = gr_by_user.get(pred_id.user)
        if pred_gr is None:
            raise ValidationError(
                f"{args.pred_gr}: missing prediction list for user "
                f"{dataset.user_dict.raw(pred_id.user)!r}"
            )
        result = fuse(pred_id, pred_gr, cfg)
        fused.append(result.fused)
        alphas.append(result.alpha)
        union_sizes.append(result.union_size)
    ingest.write_predictions(fused, dataset, args.out)
    if args.report:
        summary = TableReport(
            ["stat", "value"],
            [
                ["instances", str(len(fused))],
                ["mean_alpha", f"{sum(alphas) / len(alphas):.4f}"],
                ["mean_union_size", f"{sum(union_sizes) / len(union_sizes):.4f}"],
            ],
            {
                "instances": len(fused),
                "mean_alpha": round(sum(alphas) / len(alphas), 4),
                "mean_union_size": round(sum(union_sizes) / len(union_sizes), 4),
            },
        )
        provenance = _provenance(
            args,
            {"interactions": args.interactions, "pred_id": args.pred_id, "pred_gr": args.pred_gr},
            {"mode": cfg.mode, "q": cfg.q, "tau": cfg.tau, "alpha_static": cfg.alpha_static,
             "normalization": cfg.normalization},
        )
        _write_formats(summary, args.report, args.format, provenance)
    print(f"fused {len(fused)} prediction lists -> {args.out}")
    return ingest.EXIT_OK


def cmd_ensemble_tune(args: argparse.Namespace) -> int:
    _default(args, "k", 10)
    _default(args, "normalization", "minmax")
    dataset, _, val, _ = _load_split(args)
    preds_id = _align_predictions(
        ingest.read_predictions(args.pred_id, dataset, expect_probability=True),
        val, dataset, args.pred_id,
    )
    preds_gr = _align_predictions(
        ingest.read_predictions(args.pred_gr, dataset, expect_probability=False),
        val, dataset, args.pred_gr,
    )
    result = tune(val, preds_id, preds_gr, k=args.k, normalization=args.normalization)
    provenance = _provenance(
        args,
        {"interactions": args.interactions, "pred_id": args.pred_id, "pred_gr": args.pred_gr},
        {"k": args.k, "normalization": args.normalization,
         "q_grid": list(DEFAULT_Q_GRID), "tau_grid": list(DEFAULT_TAU_GRID),
         "alpha_static_grid": list(DEFAULT_ALPHA_STATIC_GRID)},
    )
    write_report(result, args.out, fmt="json", provenance=provenance)
    best_a = result.best_adaptive
    best_f = result.best_fixed
    print(
        f"tuned over {len(result.grid)} configs: adaptive(q={best_a.q}, tau={best_a.tau}) "
        f"fixed(alpha_static={best_f.alpha_static}) -> {args.out}"
    )
    return ingest.EXIT_OK


def cmd_synth(args: argparse.Namespace) -> int:
    spec = load_plant_spec(args.spec)
    corpus = generate(spec)
    os.makedirs(args.out_dir, exist_ok=True)
    interactions_path = os.path.join(args.out_dir, "interactions.tsv")
    labels_path = os.path.join(args.out_dir, "labels.tsv")
    ingest.write_interactions(corpus.dataset, interactions_path)
    ingest.write_labels(corpus.expected, corpus.test, corpus.dataset, labels_path)
    written = [interactions_path, labels_path]
    if corpus.sid_map is not None:
        sid_path = os.path.join(args.out_dir, "sid_map.tsv")
        ingest.write_sid_map(corpus.sid_map, corpus.dataset, sid_path)
        written.append(sid_path)
    print(
        f"generated {len(corpus.dataset.sequences)} sequences, {len(corpus.test)} planted "
        f"test instances -> {', '.join(written)}"
    )
    return ingest.EXIT_OK


# -- parser ------------------------------------------------------------------------


def _add_common(parser: argparse.ArgumentParser, interactions: bool = True) -> None:
    parser.add_argument("--config", help="key=value config file (flags override)")
    if interactions:
        parser.add_argument("--interactions", required=True, help="interactions TSV")
        parser.add_argument("--kcore", type=int, default=None,
                            help="iterative k-core preprocessing threshold")
    parser.add_argument("--format", choices=("tsv", "json", "both"), default="both",
                        help="report output format(s)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="memlens",
        description="Transition-pattern attribution, token-prefix statistics, "
        "and adaptive ensembling for sequential recommendation data.",
    )
    parser.add_argument("--version", action="version", version=f"memlens {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("index", help="build and cache a transition index")
    _add_common(p)
    p.add_argument("--max-hop", dest="max_hop", type=int, default=None)
    p.add_argument("--out", required=True, help="output cache file")
    p.set_defaults(func=cmd_index)

    p = sub.add_parser("attribute", help="label test instances with categories")
    _add_common(p)
    p.add_argument("--max-hop", dest="max_hop", type=int, default=None)
    p.add_argument("--match-mode", dest="match_mode", choices=("adjacent", "any_gap"), default=None)
    p.add_argument("--threads", type=int, default=None, help="worker processes")
    p.add_argument("--index", help="load a cached transition index instead of building")
    p.add_argument("--labels", help="write per-instance label TSV here")
    p.add_argument("--summary", help="write ratio summary report to this base path")
    p.set_defaults(func=cmd_attribute)

    p = sub.add_parser("tokenmem", help="semantic-ID prefix memorization analysis")
    _add_common(p)
    p.add_argument("--sid-map", dest="sid_map", required=True, help="item token map TSV")
    p.add_argument("--max-hop", dest="max_hop", type=int, default=None)
    p.add_argument("--match-mode", dest="match_mode", choices=("adjacent", "any_gap"), default=None)
    p.add_argument("--prefix-len", dest="prefix_len", type=int, default=None,
                   help="prefix length for support/psi columns (default: full length)")
    p.add_argument("--out-dir", dest="out_dir", required=True)
    p.set_defaults(func=cmd_tokenmem)

    p = sub.add_parser("evaluate", help="per-category metric breakdown")
    _add_common(p)
    p.add_argument("--labels", required=True, help="label TSV from `attribute`")
    p.add_argument("--pred-id", dest="pred_id", help="ID-model predictions")
    p.add_argument("--pred-gr", dest="pred_gr", help="generative-model predictions")
    p.add_argument("--id-probability", dest="id_probability", action="store_true",
                   help="validate ID-model scores as probabilities")
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--max-hop", dest="max_hop", type=int, default=None)
    p.add_argument("--out", required=True, help="report base path")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("bins", help="quantile-binned metric reports")
    _add_common(p)
    p.add_argument("--key", choices=("support", "phi-psi", "msp"), required=True)
    p.add_argument("--labels", help="label TSV (enables mem ratios and --filter)")
    p.add_argument("--filter", choices=("all", "mem", "gen", "uncategorized"), default="all")
    p.add_argument("--sid-map", dest="sid_map", help="item token map TSV")
    p.add_argument("--pred-id", dest="pred_id")
    p.add_argument("--pred-gr", dest="pred_gr")
    p.add_argument("--id-probability", dest="id_probability", action="store_true")
    p.add_argument("--prefix-len", dest="prefix_len", type=int, default=None)
    p.add_argument("--bins", type=int, default=None)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--max-hop", dest="max_hop", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_bins)

    p = sub.add_parser("ensemble", help="two-model score fusion")
    ens = p.add_subparsers(dest="ensemble_command", required=True)

    pr = ens.add_parser("run", help="fuse two prediction files")
    _add_common(pr)
    pr.add_argument("--pred-id", dest="pred_id", required=True)
    pr.add_argument("--pred-gr", dest="pred_gr", required=True)
    pr.add_argument("--q", type=float, default=None)
    pr.add_argument("--tau", type=float, default=None)
    pr.add_argument("--alpha-static", dest="alpha_static", type=float, default=None)
    pr.add_argument("--mode", choices=("adaptive", "fixed"), default=None)
    pr.add_argument("--normalization", choices=("minmax", "rank_reciprocal"), default=None)
    pr.add_argument("--out", required=True, help="fused predictions file")
    pr.add_argument("--report", help="fusion statistics report base path")
    pr.set_defaults(func=cmd_ensemble_run, command="ensemble run")

    pt = ens.add_parser("tune", help="grid-search fusion hyperparameters on validation")
    _add_common(pt)
    pt.add_argument("--pred-id", dest="pred_id", required=True,
                    help="ID-model predictions for validation instances")
    pt.add_argument("--pred-gr", dest="pred_gr", required=True)
    pt.add_argument("--k", type=int, default=None)
    pt.add_argument("--normalization", choices=("minmax", "rank_reciprocal"), default=None)
    pt.add_argument("--out", required=True, help="JSON grid record")
    pt.set_defaults(func=cmd_ensemble_tune, command="ensemble tune")

    p = sub.add_parser("synth", help="generate a planted synthetic corpus")
    p.add_argument("--config", help="key=value config file (flags override)")
    p.add_argument("--spec", required=True, help="plant spec JSON")
    p.add_argument("--out-dir", dest="out_dir", required=True)
    p.set_defaults(func=cmd_synth)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _apply_config(args)
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return ingest.EXIT_VALIDATION
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return ingest.EXIT_VALIDATION
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return ingest.EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
