"""Operator commands: prepare, simulate, evaluate, report, serve, send-model.

Configuration is a flat namespace resolved in three layers: built-in
defaults, then a ``key = value`` config file (``--config`` flag or the
``FIDS_CONFIG`` environment variable), then command-line flags. Exit
codes are stable across commands: 0 success, 1 configuration error,
2 data or model error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
from dataclasses import dataclass
from pathlib import Path

from .dataio import (
    ColumnSchema,
    Dataset,
    LabelMap,
    class_histogram,
    load_csv,
    load_csv_with_report,
    partition,
    train_test_split,
    write_csv,
)
from .errors import ConfigError, DataError
from .federation import (
    ENSEMBLE_MAGIC,
    EnsembleModel,
    RoundConfig,
    TcpDialer,
    TcpListener,
    device_grid_seed,
    device_split_seed,
    deserialize_ensemble,
    deserialize_model,
    edge_client_rounds,
    ensemble_predict,
    run_federated_simulation,
    serialize_model,
    serve_rounds,
)
from .gbdt import GridSpec, grid_search, predict
from .metrics import (
    ConfusionMatrix,
    confusion,
    format_percent,
    score_csv_row,
    score_lines,
    summarize,
)
from .preprocess import SmoteConfig, remove_outliers_with_report, smote_resample
from .svgchart import render_grouped_bars

ROUNDS_HEADER = ["device", "round", "accuracy", "precision", "recall", "kappa", "stop_reason"]

PART_FILES = ("part1.csv", "part2.csv", "part_server.csv")

_TRANSPORTS = {"inproc": "inprocess", "tcp": "tcp"}

DEFAULTS = {
    "dataset": "",
    "label_column": "Label",
    "classes": "Benign,Bot,Brute Force,DoS,Infiltration,Port Scan,Web Attack",
    "seed": "0",
    "smote_targets": "",
    "k_neighbors": "5",
    "contamination": "0.05",
    "n_trees": "100",
    "subsample_size": "256",
    "depths": "3,4,5,6,7",
    "iterations": "50,100,150,200",
    "learning_rates": "0.1,0.25,0.5,0.75,1.0",
    "max_rounds": "1",
    "epsilon": "0.0",
    "train_fraction": "0.8",
    "output_dir": "out",
    "transport": "inproc",
    "port": "0",
    "host": "127.0.0.1",
}


# ---------------------------------------------------------------------------
# configuration plumbing


def read_config_file(path) -> dict:
    """Parse flat ``key = value`` lines; ``#`` lines are comments."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    values = {}
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        if key not in DEFAULTS:
            raise ConfigError(f"{path}:{lineno}: unknown config key {key!r}")
        values[key] = value.strip()
    return values


def _parse_int(raw, key, minimum=None) -> int:
    try:
        value = int(str(raw).strip())
    except ValueError:
        raise ConfigError(f"{key} must be an integer, got {raw!r}") from None
    if minimum is not None and value < minimum:
        raise ConfigError(f"{key} must be >= {minimum}, got {value}")
    return value


def _parse_float(raw, key) -> float:
    try:
        return float(str(raw).strip())
    except ValueError:
        raise ConfigError(f"{key} must be a number, got {raw!r}") from None


def _parse_list(raw, key):
    parts = [p.strip() for p in str(raw).split(",")]
    parts = [p for p in parts if p]
    if not parts:
        raise ConfigError(f"{key} must be a non-empty comma-separated list")
    return parts


def _parse_targets(raw, label_map: LabelMap) -> dict:
    """``Name:count`` or ``id:count`` pairs, comma separated."""
    raw = str(raw).strip()
    if not raw:
        return {}
    targets = {}
    for item in _parse_list(raw, "smote_targets"):
        name, sep, count = item.rpartition(":")
        if not sep or not name.strip():
            raise ConfigError(
                f"smote_targets entries must look like 'class:count', got {item!r}"
            )
        name = name.strip()
        if name.isdigit():
            cid = int(name)
            if not 0 <= cid < label_map.n_classes:
                raise ConfigError(f"smote_targets class id {cid} out of range")
        else:
            try:
                cid = label_map.id_of(name)
            except DataError:
                raise ConfigError(f"smote_targets names unknown class {name!r}") from None
        if cid in targets:
            raise ConfigError(f"smote_targets lists class {name!r} twice")
        targets[cid] = _parse_int(count, f"smote_targets[{name}]", minimum=0)
    return targets


@dataclass(frozen=True)
class RunConfig:
    """Every knob the commands share, after parsing and validation."""

    dataset: str
    label_column: str
    classes: tuple
    seed: int
    smote_targets: dict
    k_neighbors: int
    contamination: float
    n_trees: int
    subsample_size: int
    grid: GridSpec
    max_rounds: int
    epsilon: float
    train_fraction: float
    output_dir: str
    transport: str
    port: int
    host: str

    @property
    def label_map(self) -> LabelMap:
        return LabelMap.from_names(self.classes)

    @property
    def schema(self) -> ColumnSchema:
        return ColumnSchema(label_column=self.label_column)


def build_run_config(args) -> RunConfig:
    values = dict(DEFAULTS)
    config_path = getattr(args, "config", None) or os.environ.get("FIDS_CONFIG")
    if config_path:
        values.update(read_config_file(config_path))
    for key in DEFAULTS:
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = str(flag)

    classes = tuple(_parse_list(values["classes"], "classes"))
    label_map = LabelMap.from_names(classes)
    transport = values["transport"].strip()
    if transport not in _TRANSPORTS:
        raise ConfigError(f"transport must be one of {sorted(_TRANSPORTS)}, got {transport!r}")
    contamination = _parse_float(values["contamination"], "contamination")
    if not 0.0 <= contamination < 1.0:
        raise ConfigError(f"contamination must be in [0, 1), got {contamination}")
    epsilon = _parse_float(values["epsilon"], "epsilon")
    if epsilon < 0.0:
        raise ConfigError(f"epsilon must be >= 0, got {epsilon}")
    train_fraction = _parse_float(values["train_fraction"], "train_fraction")
    if not 0.0 < train_fraction < 1.0:
        raise ConfigError(f"train_fraction must be in (0, 1), got {train_fraction}")
    grid = GridSpec(
        depths=tuple(_parse_int(d, "depths", minimum=1)
                     for d in _parse_list(values["depths"], "depths")),
        iterations=tuple(_parse_int(i, "iterations", minimum=1)
                         for i in _parse_list(values["iterations"], "iterations")),
        learning_rates=tuple(_parse_float(r, "learning_rates")
                             for r in _parse_list(values["learning_rates"], "learning_rates")),
    )
    port = _parse_int(values["port"], "port", minimum=0)
    if port > 65535:
        raise ConfigError(f"port must be <= 65535, got {port}")
    return RunConfig(
        dataset=values["dataset"].strip(),
        label_column=values["label_column"].strip(),
        classes=classes,
        seed=_parse_int(values["seed"], "seed", minimum=0),
        smote_targets=_parse_targets(values["smote_targets"], label_map),
        k_neighbors=_parse_int(values["k_neighbors"], "k_neighbors", minimum=1),
        contamination=contamination,
        n_trees=_parse_int(values["n_trees"], "n_trees", minimum=1),
        subsample_size=_parse_int(values["subsample_size"], "subsample_size", minimum=2),
        grid=grid,
        max_rounds=_parse_int(values["max_rounds"], "max_rounds", minimum=1),
        epsilon=epsilon,
        train_fraction=train_fraction,
        output_dir=values["output_dir"].strip(),
        transport=transport,
        port=port,
        host=values["host"].strip(),
    )


def _round_config(cfg: RunConfig) -> RoundConfig:
    return RoundConfig(
        max_rounds=cfg.max_rounds,
        epsilon=cfg.epsilon,
        grid=cfg.grid,
        seed=cfg.seed,
        train_fraction=cfg.train_fraction,
    )


def _require_dataset(cfg: RunConfig) -> str:
    if not cfg.dataset:
        raise ConfigError("no dataset given (set --dataset or the 'dataset' config key)")
    return cfg.dataset


# ---------------------------------------------------------------------------
# commands


def _histogram_lines(prefix: str, data: Dataset) -> list:
    return [
        f"{prefix}_class_{cid}={count}"
        for cid, (_, count) in enumerate(class_histogram(data))
    ]


def cmd_prepare(args) -> int:
    cfg = build_run_config(args)
    data, load_report = load_csv_with_report(
        _require_dataset(cfg), cfg.schema, cfg.label_map
    )
    lines = list(load_report.lines())
    lines += [
        f"class_{cid}_name={name}" for name, cid in ((n, cfg.label_map.id_of(n)) for n in cfg.classes)
    ]
    lines += _histogram_lines("before", data)

    balanced = data
    if cfg.smote_targets:
        balanced = smote_resample(
            data,
            SmoteConfig(
                targets=cfg.smote_targets,
                k_neighbors=cfg.k_neighbors,
                seed=cfg.seed,
            ),
        )
        lines += _histogram_lines("after_smote", balanced)

    cleaned = balanced
    if cfg.contamination > 0.0:
        cleaned, removal = remove_outliers_with_report(
            balanced,
            cfg.contamination,
            n_trees=cfg.n_trees,
            subsample_size=cfg.subsample_size,
            seed=cfg.seed,
        )
        lines += removal.lines()
    lines += _histogram_lines("after", cleaned)

    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    parts = partition(cleaned, len(PART_FILES), seed=cfg.seed)
    for part, name in zip(parts, PART_FILES):
        write_csv(part, out / name)
        lines.append(f"{Path(name).stem}_rows={part.n_rows}")
    (out / "prepare_report.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    for line in lines:
        print(line)
    print(f"output_dir={out}")
    return 0


def _write_rounds_csv(path, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(ROUNDS_HEADER)
        writer.writerows(rows)


def cmd_simulate(args) -> int:
    cfg = build_run_config(args)
    out = Path(cfg.output_dir)
    parts = [load_csv(out / name, cfg.schema, cfg.label_map) for name in PART_FILES]
    reports = run_federated_simulation(
        parts,
        _round_config(cfg),
        transport=_TRANSPORTS[cfg.transport],
        transcript_path=out / "transcript.bin",
        final_models_dir=out / "final_models",
    )
    rows = []
    for report in reports:
        for result in report.results:
            rows.append(
                score_csv_row(result.device, report.round, result.scores)
                + [report.stop_reason]
            )
    _write_rounds_csv(out / "rounds.csv", rows)
    for row in rows:
        print(
            f"device={row[0]} round={row[1]} accuracy={row[2]} "
            f"stop_reason={row[6] or '-'}"
        )
    print(f"rounds_csv={out / 'rounds.csv'}")
    print(f"final_models={out / 'final_models'}")
    print(f"transcript={out / 'transcript.bin'}")
    return 0


def _load_any_model(path):
    """Read either a single serialized model or a voting bundle."""
    blob = Path(path).read_bytes()
    if blob[:4] == ENSEMBLE_MAGIC:
        members, origins = deserialize_ensemble(blob)
        return EnsembleModel(members=tuple(members), member_origins=tuple(origins))
    return deserialize_model(blob)


def cmd_evaluate(args) -> int:
    cfg = build_run_config(args)
    model = _load_any_model(args.model_path)
    data = load_csv(args.test_csv, cfg.schema, cfg.label_map)
    if model.n_features != data.n_features:
        raise DataError(
            f"model expects {model.n_features} features, dataset has {data.n_features}"
        )
    if model.n_classes != data.n_classes:
        raise DataError(
            f"model has {model.n_classes} classes, dataset has {data.n_classes}"
        )
    if isinstance(model, EnsembleModel):
        pred = ensemble_predict(model, data.features)
    else:
        pred = predict(model, data.features)
    matrix = confusion(data.labels, pred, data.n_classes)
    scores = summarize(matrix)
    for line in score_lines(scores):
        print(line)
    print(f"accuracy_percent={format_percent(scores.accuracy)}")
    k = matrix.n_classes
    print(f"confusion_matrix={k}x{k}")
    for row in matrix.counts:
        print(" ".join(str(int(v)) for v in row))
    return 0


METRIC_COLUMNS = ("accuracy", "precision", "recall", "kappa")


def read_rounds_csv(path):
    """Rows of the per-round report, with metric values parsed."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ROUNDS_HEADER:
            raise DataError(
                f"unexpected columns {reader.fieldnames} (want {ROUNDS_HEADER})"
            )
        rows = []
        for lineno, row in enumerate(reader, 2):
            for column in METRIC_COLUMNS:
                if not (row[column] or "").strip():
                    raise DataError(f"{path}:{lineno}: empty {column} value")
            try:
                parsed = {c: float(row[c]) for c in METRIC_COLUMNS}
            except ValueError:
                raise DataError(f"{path}:{lineno}: non-numeric metric value") from None
            parsed["device"] = row["device"]
            parsed["round"] = _parse_int(row["round"], "round")
            parsed["stop_reason"] = row["stop_reason"]
            rows.append(parsed)
    if not rows:
        raise DataError(f"{path} holds no data rows")
    return rows


def cmd_report(args) -> int:
    rows = read_rounds_csv(args.rounds_csv)
    final_round = max(r["round"] for r in rows)
    final = [r for r in rows if r["round"] == final_round]
    svg = render_grouped_bars(
        [r["device"] for r in final],
        METRIC_COLUMNS,
        [[r[c] * 100.0 for c in METRIC_COLUMNS] for r in final],
        title=f"Per-device scores, round {final_round}",
    )
    Path(args.output).write_text(svg, encoding="utf-8")
    header = f"{'device':<10} {'round':>5}  " + "  ".join(
        f"{c:>10}" for c in METRIC_COLUMNS
    )
    print(header)
    for r in final:
        cells = "  ".join(f"{format_percent(r[c]):>10}" for c in METRIC_COLUMNS)
        print(f"{r['device']:<10} {r['round']:>5}  {cells}")
    print(f"svg={args.output}")
    return 0


def cmd_serve(args) -> int:
    cfg = build_run_config(args)
    data = load_csv(_require_dataset(cfg), cfg.schema, cfg.label_map)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    listener = TcpListener(cfg.host, cfg.port)
    try:
        print(f"listening_host={listener.host}", flush=True)
        print(f"listening_port={listener.port}", flush=True)
        rows = serve_rounds(
            listener,
            data,
            _round_config(cfg),
            n_edges=args.edges,
            transcript_path=out / "transcript.bin",
            final_models_dir=out / "final_models",
        )
    finally:
        listener.close()
    csv_rows = [
        score_csv_row("server", round_index, scores) + [stop_reason]
        for round_index, scores, _, stop_reason in rows
    ]
    _write_rounds_csv(out / "rounds.csv", csv_rows)
    for round_index, scores, _, stop_reason in rows:
        joined = " ".join(score_lines(scores))
        print(f"round={round_index} {joined} stop_reason={stop_reason or '-'}")
    print(f"rounds_csv={out / 'rounds.csv'}")
    return 0


def cmd_send_model(args) -> int:
    cfg = build_run_config(args)
    device_id = _parse_int(args.device_id, "device-id", minimum=1)
    if args.model and cfg.dataset:
        raise ConfigError("give either --model or a dataset, not both")

    if args.model:
        blob = Path(args.model).read_bytes()
        deserialize_model(blob)  # fail fast on a bad file

        def model_for_round(round_index):
            return blob

    else:
        data = load_csv(_require_dataset(cfg), cfg.schema, cfg.label_map)
        split = train_test_split(
            data, cfg.train_fraction, seed=device_split_seed(cfg.seed, device_id)
        )
        params, model, _ = grid_search(
            split.train, cfg.grid, seed=device_grid_seed(cfg.seed, device_id)
        )
        pred = predict(model, split.test.features)
        local = summarize(confusion(split.test.labels, pred, split.test.n_classes))
        print(f"local_params=depth:{params.depth},iterations:{params.iterations},"
              f"learning_rate:{params.learning_rate}")
        for line in score_lines(local):
            print(f"local_{line}")
        blob = serialize_model(model)

        def model_for_round(round_index):
            return blob

    def on_global(round_index, members, origins):
        print(f"round={round_index} global_members={len(members)} "
              f"origins={','.join(str(o) for o in origins)}")

    dialer = TcpDialer(cfg.host, cfg.port)
    completed = edge_client_rounds(
        dialer, device_id, model_for_round, on_global=on_global
    )
    print(f"completed_rounds={completed}")
    return 0


# ---------------------------------------------------------------------------
# argument parsing


class _Parser(argparse.ArgumentParser):
    """Routes argparse usage failures through the config exit code."""

    def error(self, message):
        raise ConfigError(message)


def _add_flags(parser, *names):
    flags = {
        "dataset": dict(help="input CSV path"),
        "label_column": dict(help="name of the label column"),
        "classes": dict(help="comma-separated class names, in id order"),
        "seed": dict(help="master random seed"),
        "smote_targets": dict(help="per-class targets, e.g. 'Bot:20000,Infiltration:20036'"),
        "k_neighbors": dict(help="SMOTE neighbor count"),
        "contamination": dict(help="per-class outlier removal fraction in [0,1)"),
        "n_trees": dict(help="isolation forest size"),
        "subsample_size": dict(help="isolation forest subsample"),
        "depths": dict(help="tree depth grid, comma separated"),
        "iterations": dict(help="boosting round grid, comma separated"),
        "learning_rates": dict(help="learning rate grid, comma separated"),
        "max_rounds": dict(help="maximum federation rounds"),
        "epsilon": dict(help="minimum accuracy improvement to keep going"),
        "train_fraction": dict(help="per-device train share"),
        "output_dir": dict(help="where outputs land"),
        "transport": dict(help="inproc or tcp"),
        "port": dict(help="TCP port (0 picks one)"),
        "host": dict(help="TCP host/interface"),
    }
    parser.add_argument("--config", help="config file (else $FIDS_CONFIG)")
    for name in names:
        parser.add_argument(
            "--" + name.replace("_", "-"), dest=name, **flags[name]
        )


def make_parser() -> _Parser:
    parser = _Parser(prog="fids", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("prepare", help="clean, balance, and partition a CSV")
    _add_flags(p, "dataset", "label_column", "classes", "seed", "smote_targets",
               "k_neighbors", "contamination", "n_trees", "subsample_size",
               "output_dir")
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("simulate", help="run the full edge/server exchange")
    _add_flags(p, "label_column", "classes", "seed", "depths", "iterations",
               "learning_rates", "max_rounds", "epsilon", "train_fraction",
               "output_dir", "transport", "port")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("evaluate", help="score a stored model against a CSV")
    p.add_argument("model_path", help="serialized model or ensemble file")
    p.add_argument("test_csv", help="dataset to score on")
    _add_flags(p, "label_column", "classes")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("report", help="render per-device bars from rounds.csv")
    p.add_argument("rounds_csv", help="per-round report written by simulate")
    p.add_argument("output", help="SVG file to write")
    p.add_argument("--config", help="config file (else $FIDS_CONFIG)")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("serve", help="stand-alone TCP server side")
    _add_flags(p, "dataset", "label_column", "classes", "seed", "depths",
               "iterations", "learning_rates", "max_rounds", "epsilon",
               "train_fraction", "output_dir", "host", "port")
    p.add_argument("--edges", type=int, default=2,
                   help="how many edge clients to wait for (default 2)")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("send-model", help="stand-alone TCP edge client")
    _add_flags(p, "dataset", "label_column", "classes", "seed", "depths",
               "iterations", "learning_rates", "train_fraction", "host", "port")
    p.add_argument("--device-id", required=True, help="this edge's id (>= 1)")
    p.add_argument("--model", help="send this serialized model instead of training")
    p.set_defaults(func=cmd_send_model)
    return parser


def main(argv=None) -> int:
    try:
        args = make_parser().parse_args(argv)
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


def entrypoint() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    entrypoint()
