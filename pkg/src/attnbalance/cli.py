"""Command-line orchestration.

Subcommands: ``gen-data`` builds the three question sets, ``run-sim`` runs
the toy decoder over an existence dataset with or without rebalancing,
``eval`` scores prediction files, ``sweep`` drives the three analysis
sweeps, and ``report`` renders figures from sweep tables, evaluation
reports, and correlation inputs.

Configuration precedence: command-line flags override ``ATTNBALANCE_*``
environment variables, which override ``--config`` file values, which
override built-in defaults. All randomness flows from one ``--seed``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 internal invariant
violation. Failures emit one machine-readable JSON record on stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import __version__
from .attention import save_attention
from .bench.annotations import (
    load_annotations_jsonl,
    load_similarity_csv,
    view_groups_from_annotations,
)
from .bench.builders import EXISTENCE_SUBTYPES, build_count_set, build_existence_set, build_identity_set
from .bench.correlation import correlation_analysis
from .bench.instances import read_dataset, write_dataset
from .bench.metrics import (
    compute_metrics,
    macro_average,
    read_predictions,
    report_row,
    write_predictions,
)
from .bench.sweeps import sweep_image_count, sweep_negative_position, sweep_negative_ratio
from .decoder import DecoderConfig, ReadoutModel, simulate_suite
from .errors import BalanceError, ConfigError, DataError, DimensionError, DomainError
from .manifest import RunManifest
from .rebalance import CLAMP_REDISTRIBUTE, RebalanceConfig
from .report import plot_correlation_cells, plot_eval_rows, plot_sweep, read_sweep_csv
from .seeding import child_seed

log = logging.getLogger("attnbalance")

ENV_PREFIX = "ATTNBALANCE_"

REPORT_SCHEMA = "attnbalance-report/1"

SWEEP_CSV_COLUMNS = (
    "sweep_kind", "point", "instances", "source",
    "accuracy", "precision", "recall", "f1", "yes_ratio", "status",
)

EVAL_CSV_COLUMNS = (
    "name", "tp", "fp", "tn", "fn", "total", "unparseable",
    "accuracy", "precision", "recall", "f1", "yes_ratio", "undefined",
)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # exit 1 on usage problems, not argparse's 2
        raise UsageError(message)


def _load_config_file(path) -> dict:
    if path is None:
        return {}
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read config file {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise DataError(f"config file {path} must hold a JSON object")
    return data


def _resolve(name: str, flag_value, config: dict, default, cast):
    """flag > ATTNBALANCE_<NAME> env var > config file > default."""
    if flag_value is not None:
        return flag_value
    env = os.environ.get(ENV_PREFIX + name.upper().replace("-", "_"))
    if env is not None:
        try:
            return cast(env)
        except ValueError as exc:
            raise ConfigError(f"bad value for {ENV_PREFIX}{name.upper()}: {env!r}") from exc
    if name in config:
        return cast(config[name])
    return default


def _shared_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON file with flag defaults")
    parser.add_argument("--seed", type=int, default=None, help="master seed (default 0)")
    parser.add_argument("--out-dir", required=True, help="directory for outputs")


def _rebalance_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--dab", action="store_true", help="apply attention rebalancing")
    parser.add_argument("--alpha", type=float, default=None, help="balancing coefficient (default 0.5)")
    parser.add_argument("--tau", type=float, default=None, help="eligibility threshold (default 0.2)")
    parser.add_argument("--clamp-mode", default=None,
                        choices=["clamp-redistribute", "clamp-renormalize"])
    parser.add_argument("--scope", default=None, choices=["per-row", "aggregated"])


def _sim_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--decoder-config", help="DecoderConfig JSON file")
    parser.add_argument("--skew", type=float, default=None, help="pre-softmax logit bias")
    parser.add_argument("--skew-target", type=int, default=None, help="0-based image index to boost")
    parser.add_argument("--readout", default=None, choices=["step", "linear"])
    parser.add_argument("--readout-threshold", type=float, default=None,
                        help="step location / linear threshold (default 0.5)")
    parser.add_argument("--all-layers", action="store_true",
                        help="feed the readout all layers instead of the final one")


def _resolve_rebalance(args, config: dict) -> RebalanceConfig:
    return RebalanceConfig(
        alpha=_resolve("alpha", args.alpha, config, 0.5, float),
        tau=_resolve("tau", args.tau, config, 0.2, float),
        clamp_mode=_resolve("clamp-mode", args.clamp_mode, config, CLAMP_REDISTRIBUTE, str),
        scope=_resolve("scope", args.scope, config, "per-row", str),
    )


def _seed_explicit(args, config: dict) -> bool:
    return (
        args.seed is not None
        or os.environ.get(ENV_PREFIX + "SEED") is not None
        or "seed" in config
    )


def _resolve_decoder(args, config: dict, seed: int, seed_explicit: bool) -> DecoderConfig:
    base = {}
    if getattr(args, "decoder_config", None):
        base = _load_config_file(args.decoder_config)
    # an explicit --seed / env / config seed beats the decoder file's own
    if seed_explicit or "seed" not in base:
        base["seed"] = seed
    if args.skew is not None:
        base["skew"] = args.skew
    if args.skew_target is not None:
        base["skew_target"] = args.skew_target
    if args.all_layers:
        base["readout_all_layers"] = True
    try:
        return DecoderConfig.from_dict(base)
    except TypeError as exc:
        raise ConfigError(f"bad decoder config: {exc}") from exc


def _resolve_readout(args, config: dict) -> tuple[ReadoutModel, str]:
    kind = _resolve("readout", args.readout, config, "step", str)
    threshold = _resolve("readout-threshold", args.readout_threshold, config, 0.5, float)
    if kind == "linear":
        return ReadoutModel.linear(threshold), kind
    if kind == "step":
        return ReadoutModel.step(threshold), kind
    raise ConfigError(f"unknown readout kind {kind!r}")


def _out_dir(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_csv(path: Path, columns, rows, manifest_hash: str) -> None:
    lines = [f"# manifest_hash={manifest_hash}", ",".join(columns)]
    for row in rows:
        lines.append(",".join(str(row.get(col, "")) for col in columns))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


# ----------------------------------------------------------------- gen-data


def cmd_gen_data(args) -> int:
    config = _load_config_file(args.config)
    seed = _resolve("seed", args.seed, config, 0, int)
    per_subtype = _resolve("existence-per-subtype", args.existence_per_subtype, config, 800, int)
    count_total = _resolve("count-total", args.count_total, config, 800, int)
    identity_total = _resolve("identity-total", args.identity_total, config, 800, int)
    out = _out_dir(args)

    manifest = RunManifest(command="gen-data", version=__version__)
    manifest.config = {
        "seed": seed,
        "existence_per_subtype": per_subtype,
        "count_total": count_total,
        "identity_total": identity_total,
    }
    manifest.add_input("annotations", args.annotations)
    manifest.add_input("views", args.views)
    manifest.add_input("similarity", args.similarity)
    manifest.outputs = ["existence.jsonl", "count.jsonl", "identity.jsonl"]
    digest = manifest.write(out / "gen-data.manifest.json")

    annotations = load_annotations_jsonl(args.annotations)
    views = load_annotations_jsonl(args.views)
    similarity = load_similarity_csv(args.similarity, symmetric=False)
    groups = view_groups_from_annotations(views)

    existence = []
    for subtype in EXISTENCE_SUBTYPES:
        existence.extend(
            build_existence_set(
                annotations, subtype, per_subtype, seed=child_seed(seed, "existence", subtype)
            )
        )
    count = build_count_set(annotations, count_total, seed=child_seed(seed, "count"))
    identity = build_identity_set(groups, similarity, identity_total,
                                  seed=child_seed(seed, "identity"))

    write_dataset(out / "existence.jsonl", existence, manifest_hash=digest)
    write_dataset(out / "count.jsonl", count, manifest_hash=digest)
    write_dataset(out / "identity.jsonl", identity, manifest_hash=digest)
    log.info("gen-data: %d existence + %d count + %d identity instances -> %s",
             len(existence), len(count), len(identity), out)
    return 0


# ------------------------------------------------------------------ run-sim


def cmd_run_sim(args) -> int:
    config = _load_config_file(args.config)
    seed = _resolve("seed", args.seed, config, 0, int)
    out = _out_dir(args)

    header, instances = read_dataset(args.dataset)
    non_existence = {inst.task for inst in instances} - {"existence"}
    if non_existence:
        raise DataError(
            f"run-sim handles existence datasets only; {args.dataset} contains "
            f"tasks {sorted(non_existence)}"
        )
    decoder = _resolve_decoder(args, config, seed, _seed_explicit(args, config))
    readout, readout_kind = _resolve_readout(args, config)
    rebalance = _resolve_rebalance(args, config) if args.dab else None

    manifest = RunManifest(command="run-sim", version=__version__)
    manifest.config = {
        "seed": seed,
        "decoder": decoder.to_dict(),
        "readout": {"kind": readout_kind,
                    "threshold": readout.decision_threshold},
        "dab": bool(args.dab),
        "rebalance": None if rebalance is None else {
            "alpha": rebalance.alpha, "tau": rebalance.tau,
            "clamp_mode": rebalance.clamp_mode, "scope": rebalance.scope,
        },
        "dump_attention": bool(args.dump_attention),
    }
    manifest.add_input("dataset", args.dataset)
    manifest.outputs = ["predictions.jsonl"]
    if args.dump_attention:
        manifest.outputs.append("attention/")
    digest = manifest.write(out / "run-sim.manifest.json")

    sink = None
    if args.dump_attention:
        dump_dir = out / "attention"
        dump_dir.mkdir(exist_ok=True)

        def sink(instance_id, tensor, segmap):
            save_attention(dump_dir / f"{instance_id}.json", tensor, segmap)

    records = simulate_suite(instances, decoder, readout, rebalance=rebalance,
                             attention_sink=sink)
    write_predictions(out / "predictions.jsonl", records, manifest_hash=digest)
    log.info("run-sim: %d predictions (dab=%s) -> %s", len(records), bool(args.dab), out)
    return 0


# --------------------------------------------------------------------- eval


def _grouped_rows(instances, predictions) -> list[dict]:
    by_id = {}
    for record in predictions:
        by_id[record.instance_id] = record
    missing = [inst.id for inst in instances if inst.id not in by_id]
    if missing:
        shown = ", ".join(missing[:10])
        more = "" if len(missing) <= 10 else f" (+{len(missing) - 10} more)"
        raise DataError(f"predictions are missing {len(missing)} instance ids: {shown}{more}")
    extra = set(by_id) - {inst.id for inst in instances}
    if extra:
        log.warning("eval: ignoring %d predictions without matching instances", len(extra))

    tasks = {inst.task for inst in instances}
    rows: list[dict] = []
    if tasks == {"existence"}:
        subtype_of = lambda inst: inst.meta.get("subtype", "all")
        subtypes = sorted({subtype_of(inst) for inst in instances})
        reports = []
        for subtype in subtypes:
            subset = [inst for inst in instances if subtype_of(inst) == subtype]
            report = compute_metrics([by_id[i.id] for i in subset], [i.gold for i in subset])
            reports.append(report)
            rows.append(report_row(subtype, report))
        rows.append(report_row("average", macro_average(reports)))
    else:
        for task in sorted(tasks):
            subset = [inst for inst in instances if inst.task == task]
            report = compute_metrics([by_id[i.id] for i in subset], [i.gold for i in subset])
            rows.append(report_row(task if len(tasks) > 1 else "overall", report))
    return rows


def cmd_eval(args) -> int:
    out = _out_dir(args)
    _, instances = read_dataset(args.dataset)
    if not instances:
        raise DataError(f"dataset {args.dataset} holds no instances")
    predictions = read_predictions(args.predictions)

    manifest = RunManifest(command="eval", version=__version__)
    manifest.add_input("dataset", args.dataset)
    manifest.add_input("predictions", args.predictions)
    manifest.outputs = ["report.json", "report.csv"]
    digest = manifest.write(out / "eval.manifest.json")

    rows = _grouped_rows(instances, predictions)
    document = {"schema_version": REPORT_SCHEMA, "manifest_hash": digest, "rows": rows}
    (out / "report.json").write_text(
        json.dumps(document, indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
    )
    csv_rows = [dict(row, undefined=";".join(row["undefined"])) for row in rows]
    _write_csv(out / "report.csv", EVAL_CSV_COLUMNS, csv_rows, digest)
    for row in rows:
        log.info("eval %-14s acc=%.2f f1=%.2f yes=%.2f",
                 row["name"], row["accuracy"], row["f1"], row["yes_ratio"])
    return 0


# -------------------------------------------------------------------- sweep


def _simulate_point(payload):
    """Worker for one sweep point; takes plain picklable inputs."""
    from .bench.instances import instance_from_dict

    instances = [instance_from_dict(d) for d in payload["instances"]]
    decoder = DecoderConfig.from_dict(payload["decoder"])
    readout_kind = payload["readout"]["kind"]
    threshold = payload["readout"]["threshold"]
    readout = ReadoutModel.linear(threshold) if readout_kind == "linear" else ReadoutModel.step(threshold)
    rebalance = RebalanceConfig(**payload["rebalance"]) if payload["rebalance"] else None
    records = simulate_suite(instances, decoder, readout, rebalance=rebalance)
    return payload["point"], [
        {"instance_id": r.instance_id, "raw_text": r.raw_text,
         "image_ratios": list(r.image_ratios or [])}
        for r in records
    ]


def cmd_sweep(args) -> int:
    config = _load_config_file(args.config)
    seed = _resolve("seed", args.seed, config, 0, int)
    per_point = _resolve("per-point", args.per_point, config, 800, int)
    workers = _resolve("workers", args.workers, config, 1, int)
    out = _out_dir(args)

    manifest = RunManifest(command="sweep", version=__version__)
    manifest.config = {"kind": args.kind, "seed": seed, "per_point": per_point,
                       "simulate": bool(args.simulate)}

    if args.kind == "image-count":
        if not args.annotations:
            raise UsageError("--annotations is required for the image-count sweep")
        manifest.add_input("annotations", args.annotations)
        annotations = load_annotations_jsonl(args.annotations)
        lengths = [int(v) for v in args.lengths.split(",")] if args.lengths else [2, 3, 4, 5, 6]
        datasets = sweep_image_count(annotations, lengths=lengths, per_length=per_point, seed=seed)
        points = {str(length): instances for length, instances in datasets.items()}
    else:
        if not (args.views and args.similarity):
            raise UsageError(f"--views and --similarity are required for the {args.kind} sweep")
        manifest.add_input("views", args.views)
        manifest.add_input("similarity", args.similarity)
        groups = view_groups_from_annotations(load_annotations_jsonl(args.views))
        similarity = load_similarity_csv(args.similarity)
        if args.kind == "negative-position":
            datasets = sweep_negative_position(groups, similarity, seq_len=args.seq_len,
                                               per_position=per_point, seed=seed)
            points = {str(position): instances for position, instances in datasets.items()}
        else:
            positives = [int(v) for v in args.positives.split(",")] if args.positives else [2, 3, 4, 5]
            datasets = sweep_negative_ratio(groups, similarity, positives_per_instance=positives,
                                            per_config=per_point, seed=seed)
            points = {str(ratio): instances for ratio, instances in datasets.items()}

    if args.simulate and args.kind != "image-count":
        raise DataError(f"the simulator answers existence questions only; "
                        f"supply --predictions-template for the {args.kind} sweep")

    manifest.outputs = ["aggregate.csv"]
    for point in points:
        safe = point.replace("/", "-")
        manifest.outputs.append(f"datasets/point-{safe}.jsonl")
        manifest.outputs.append(f"reports/point-{safe}.json")
    digest = manifest.write(out / "sweep.manifest.json")

    (out / "datasets").mkdir(exist_ok=True)
    (out / "reports").mkdir(exist_ok=True)
    if args.simulate:
        (out / "predictions").mkdir(exist_ok=True)

    for point, instances in points.items():
        write_dataset(out / "datasets" / f"point-{point.replace('/', '-')}.jsonl",
                      instances, manifest_hash=digest)

    predictions_by_point: dict[str, list] = {}
    if args.simulate:
        decoder = _resolve_decoder(args, config, seed, _seed_explicit(args, config))
        readout, readout_kind = _resolve_readout(args, config)
        rebalance = _resolve_rebalance(args, config) if args.dab else None
        payloads = []
        for point, instances in points.items():
            payloads.append({
                "point": point,
                "instances": [
                    {"id": i.id, "task": i.task, "image_ids": list(i.image_ids),
                     "question": i.question, "gold": i.gold, "meta": i.meta}
                    for i in instances
                ],
                "decoder": decoder.to_dict(),
                "readout": {"kind": readout_kind,
                            "threshold": readout.decision_threshold},
                "rebalance": None if rebalance is None else {
                    "alpha": rebalance.alpha, "tau": rebalance.tau,
                    "clamp_mode": rebalance.clamp_mode, "scope": rebalance.scope,
                },
            })
        if workers > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(_simulate_point, payloads))
        else:
            results = [_simulate_point(p) for p in payloads]
        for point, raw_records in results:
            from .bench.metrics import PredictionRecord

            records = [
                PredictionRecord(instance_id=r["instance_id"], raw_text=r["raw_text"],
                                 image_ratios=tuple(r["image_ratios"]) or None)
                for r in raw_records
            ]
            predictions_by_point[point] = records
            safe = point.replace("/", "-")
            write_predictions(out / "predictions" / f"point-{safe}.jsonl",
                              records, manifest_hash=digest)
    elif args.predictions_template:
        for point in points:
            path = Path(args.predictions_template.format(point=point.replace("/", "-")))
            if path.exists():
                predictions_by_point[point] = read_predictions(path)

    aggregate_rows = []
    for point, instances in points.items():
        row = {"sweep_kind": args.kind, "point": point, "instances": len(instances)}
        records = predictions_by_point.get(point)
        if records is None:
            row.update({"source": "", "accuracy": "", "precision": "", "recall": "",
                        "f1": "", "yes_ratio": "", "status": "missing"})
            log.warning("sweep point %s: no predictions; leaving a gap marker", point)
        else:
            by_id = {r.instance_id: r for r in records}
            missing = [i.id for i in instances if i.id not in by_id]
            if missing:
                raise DataError(f"sweep point {point}: predictions missing ids {missing[:5]}")
            report = compute_metrics([by_id[i.id] for i in instances],
                                     [i.gold for i in instances])
            safe = point.replace("/", "-")
            point_doc = {"schema_version": REPORT_SCHEMA, "manifest_hash": digest,
                         "rows": [report_row(point, report)]}
            (out / "reports" / f"point-{safe}.json").write_text(
                json.dumps(point_doc, indent=2) + "\n", encoding="utf-8"
            )
            row.update({
                "source": "simulator" if args.simulate else "external",
                "accuracy": f"{report.accuracy:.2f}", "precision": f"{report.precision:.2f}",
                "recall": f"{report.recall:.2f}", "f1": f"{report.f1:.2f}",
                "yes_ratio": f"{report.yes_ratio:.2f}", "status": "ok",
            })
        aggregate_rows.append(row)
    _write_csv(out / "aggregate.csv", SWEEP_CSV_COLUMNS, aggregate_rows, digest)
    log.info("sweep %s: %d points -> %s", args.kind, len(points), out)
    return 0


# ------------------------------------------------------------------- report


def cmd_report(args) -> int:
    out = _out_dir(args)
    manifest = RunManifest(command="report", version=__version__)
    for i, path in enumerate(args.sweep_csv or []):
        manifest.add_input(f"sweep_csv_{i}", path)
    for i, path in enumerate(args.eval_report or []):
        manifest.add_input(f"eval_report_{i}", path)
    if args.correlation_input:
        manifest.add_input("correlation", args.correlation_input)
    if not manifest.inputs:
        raise UsageError("report needs at least one of --sweep-csv, --eval-report, "
                         "--correlation-input")
    manifest.outputs = ["report-table.csv"]
    digest = manifest.write(out / "report.manifest.json")

    table_rows: list[dict] = []
    columns = ["section", "name", "point", "accuracy", "precision", "recall", "f1",
               "yes_ratio", "value"]
    for path in args.sweep_csv or []:
        name = Path(path).stem
        plot_sweep(path, out / f"sweep-{name}.png", manifest_hash=digest)
        for row in read_sweep_csv(path):
            if row.get("status") != "ok":
                continue
            table_rows.append({
                "section": f"sweep:{row.get('sweep_kind', name)}", "name": name,
                "point": row["point"], "accuracy": row["accuracy"],
                "precision": row["precision"], "recall": row["recall"],
                "f1": row["f1"], "yes_ratio": row["yes_ratio"], "value": "",
            })
    if args.eval_report:
        named_rows = []
        labels = (args.labels.split(",") if args.labels else [])
        for i, path in enumerate(args.eval_report):
            try:
                document = json.loads(Path(path).read_text(encoding="utf-8"))
            except (OSError, json.JSONDecodeError) as exc:
                raise DataError(f"cannot read eval report {path}: {exc}") from exc
            label = labels[i] if i < len(labels) else Path(path).parent.name or f"run{i}"
            named_rows.append((label, document.get("rows", [])))
            for row in document.get("rows", []):
                table_rows.append({
                    "section": "eval", "name": f"{label}:{row['name']}", "point": "",
                    "accuracy": row["accuracy"], "precision": row["precision"],
                    "recall": row["recall"], "f1": row["f1"],
                    "yes_ratio": row["yes_ratio"], "value": "",
                })
        plot_eval_rows(named_rows, out / "eval-metrics.png", manifest_hash=digest)
    if args.correlation_input:
        single, multi = {}, {}
        for lineno, line in enumerate(
            Path(args.correlation_input).read_text(encoding="utf-8").splitlines(), start=1
        ):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                single[record["instance_id"]] = record["single_flags"]
                multi[record["instance_id"]] = record["multi_flags"]
            except (json.JSONDecodeError, KeyError) as exc:
                raise DataError(
                    f"{args.correlation_input}:{lineno}: malformed correlation record: {exc}"
                ) from exc
        result = correlation_analysis(single, multi)
        plot_correlation_cells(result.proportions, result.pearson,
                               out / "correlation-cells.png", manifest_hash=digest)
        for (x, y), share in sorted(result.proportions.items()):
            table_rows.append({
                "section": "correlation", "name": f"cell({x},{y})", "point": "",
                "accuracy": "", "precision": "", "recall": "", "f1": "", "yes_ratio": "",
                "value": f"{100 * share:.2f}",
            })
        table_rows.append({
            "section": "correlation", "name": "pearson", "point": "", "accuracy": "",
            "precision": "", "recall": "", "f1": "", "yes_ratio": "",
            "value": f"{result.pearson:.4f}",
        })
        log.info("correlation: pearson=%.4f over %d instances", result.pearson, result.total)
    _write_csv(out / "report-table.csv", columns, table_rows, digest)
    log.info("report: %d table rows -> %s", len(table_rows), out)
    return 0


# --------------------------------------------------------------------- main


def build_parser() -> _Parser:
    parser = _Parser(prog="attnbalance", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version", version=f"attnbalance {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="build the three question sets")
    _shared_flags(p)
    p.add_argument("--annotations", required=True, help="annotation JSONL (existence/count)")
    p.add_argument("--views", required=True, help="view-group annotation JSONL (identity)")
    p.add_argument("--similarity", required=True, help="similarity CSV over view images")
    p.add_argument("--existence-per-subtype", type=int, default=None)
    p.add_argument("--count-total", type=int, default=None)
    p.add_argument("--identity-total", type=int, default=None)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("run-sim", help="run the toy decoder over an existence dataset")
    _shared_flags(p)
    p.add_argument("--dataset", required=True, help="existence dataset JSONL")
    _sim_flags(p)
    _rebalance_flags(p)
    p.add_argument("--dump-attention", action="store_true",
                   help="write per-instance attention tensors")
    p.set_defaults(func=cmd_run_sim)

    p = sub.add_parser("eval", help="score predictions against a dataset")
    _shared_flags(p)
    p.add_argument("--dataset", required=True)
    p.add_argument("--predictions", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="run an analysis sweep")
    _shared_flags(p)
    p.add_argument("--kind", required=True,
                   choices=["image-count", "negative-position", "negative-ratio"])
    p.add_argument("--annotations", help="annotation JSONL (image-count)")
    p.add_argument("--views", help="view-group JSONL (identity sweeps)")
    p.add_argument("--similarity", help="similarity CSV (identity sweeps)")
    p.add_argument("--lengths", help="comma list of sequence lengths (default 2,3,4,5,6)")
    p.add_argument("--seq-len", type=int, default=4)
    p.add_argument("--positives", help="comma list of positives per instance (default 2,3,4,5)")
    p.add_argument("--per-point", type=int, default=None)
    p.add_argument("--workers", type=int, default=None, help="parallel sweep workers (default 1)")
    p.add_argument("--simulate", action="store_true",
                   help="answer points with the toy decoder (image-count only)")
    p.add_argument("--predictions-template",
                   help="path template with {point} for external predictions")
    _sim_flags(p)
    _rebalance_flags(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("report", help="render figures and a tidy table")
    _shared_flags(p)
    p.add_argument("--sweep-csv", action="append", help="aggregate.csv from a sweep")
    p.add_argument("--eval-report", action="append", help="report.json from eval")
    p.add_argument("--labels", help="comma list of labels for the eval reports")
    p.add_argument("--correlation-input",
                   help="JSONL of {instance_id, single_flags, multi_flags}")
    p.set_defaults(func=cmd_report)
    return parser


def _emit_error(kind: str, exc: Exception) -> None:
    record = {"error": kind, "type": type(exc).__name__, "message": str(exc)}
    print(json.dumps(record), file=sys.stderr)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    logging.getLogger("matplotlib").setLevel(logging.WARNING)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (DataError, DomainError, DimensionError, ConfigError) as exc:
        _emit_error("data", exc)
        return 2
    except BalanceError as exc:
        _emit_error("invariant", exc)
        return 3
    except Exception as exc:  # noqa: BLE001  - last-resort guard for exit code 3
        _emit_error("internal", exc)
        return 3


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
