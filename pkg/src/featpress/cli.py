"""``featpress`` command line.

Exit codes: 0 success, 1 usage error, 2 malformed data, 3 file I/O error.
Diagnostics go to stderr; stdout carries data only.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import codec
from .errors import DataError
from .experiment import PipelineConfig, fit_pipeline, operating_region, run_config, run_config_grouped, sweep
from .forest import ForestParams
from .quantizer import decode, encode
from .report import report_rows, write_report
from .tabular import FeatureTable, SynthSpec, load_csv, stratified_split, synth_generate, write_csv

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_IO = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse would exit with status 2
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _opt(cast):
    """Parse a value where the literal ``none`` means "stage absent"."""

    def parse(text: str):
        if text.strip().lower() == "none":
            return None
        return cast(text)

    parse.__name__ = cast.__name__
    return parse


def _opt_list(cast):
    item = _opt(cast)

    def parse(text: str):
        values = [item(t) for t in text.split(",") if t.strip()]
        if not values:
            raise argparse.ArgumentTypeError("empty list")
        return values

    parse.__name__ = f"{cast.__name__} list"
    return parse


def _max_features(text: str):
    return text if text == "sqrt" else int(text)


def _add_load_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--label-column", default="label", help="class label column")
    p.add_argument(
        "--timestamp-column",
        default="timestamp",
        help="timestamp column in seconds; used when present in the header, 'none' to treat it as a feature",
    )
    p.add_argument("--group-column", type=_opt(str), default=None, help="group key column (e.g. AS), or none")


def _add_forest_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--trees", type=int, default=100, help="trees per forest")
    p.add_argument("--max-features", type=_max_features, default="sqrt", help="features tried per split")
    p.add_argument("--min-samples-split", type=int, default=2, help="smallest node that may be split")
    p.add_argument("--max-depth", type=_opt(int), default=None, help="tree depth limit, none for unlimited")
    p.add_argument("--seed", type=int, default=0, help="root seed for every random choice")
    p.add_argument("--f1-average", choices=("macro", "weighted"), default="macro", help="F1 averaging mode")
    p.add_argument("--duration", type=float, default=None, help="log duration in seconds for bit/s (default: timestamp span)")
    p.add_argument("--level", type=int, default=codec.DEFAULT_LEVEL, help="DEFLATE level 1-9")
    p.add_argument("--no-standardize", action="store_true", help="run PCA on raw rather than z-scored features")


def _load(path: str, args, classes=None) -> FeatureTable:
    ts = args.timestamp_column
    if ts is not None and ts.lower() == "none":
        ts = None
    if ts is not None and ts == "timestamp":
        # default name: only used when the file actually has it
        with open(path, encoding="utf-8", newline="") as fh:
            header = next(csv.reader(fh), [])
        if ts not in [h.strip() for h in header]:
            ts = None
    return load_csv(path, args.label_column, ts, args.group_column, classes=classes)


def _forest(args) -> ForestParams:
    return ForestParams(args.trees, args.max_features, args.min_samples_split, args.max_depth, args.seed)


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = _Parser(prog="featpress", description="Task-aware lossy compression of traffic feature logs.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="write a seeded synthetic feature log", formatter_class=fmt)
    p.add_argument("--classes", type=int, default=5, help="number of classes")
    p.add_argument("--informative", type=int, default=20, help="class-dependent features")
    p.add_argument("--noise", type=int, default=10, help="class-independent features")
    p.add_argument("--rows-per-class", type=int, default=400, help="rows generated per class")
    p.add_argument("--separation", type=float, default=3.0, help="class mean spacing in within-class deviations")
    p.add_argument("--heavy-tail", type=float, default=0.3, help="share of informative features drawn log-normal")
    p.add_argument("--rate", type=float, default=1.0, help="records per second for the timestamp column")
    p.add_argument("--seed", type=int, default=0, help="generator seed")
    p.add_argument("-o", "--output", required=True, help="output CSV path")

    p = sub.add_parser("split", help="stratified train/test split of a CSV log", formatter_class=fmt)
    p.add_argument("input", help="input CSV")
    _add_load_flags(p)
    p.add_argument("--test-fraction", type=float, default=0.3, help="share of each class held out")
    p.add_argument("--seed", type=int, default=0, help="shuffle seed")
    p.add_argument("--train-out", required=True, help="train CSV path")
    p.add_argument("--test-out", required=True, help="test CSV path")

    p = sub.add_parser("compress", help="quantize a CSV log into a .nfq container", formatter_class=fmt)
    p.add_argument("input", help="input CSV")
    _add_load_flags(p)
    p.add_argument("--bits", type=int, default=8, help="bits per value, 1-32")
    p.add_argument("--pca", type=_opt(float), default=None, help="PCA variance target, or none")
    p.add_argument("--select-k", type=_opt(int), default=None, help="keep the k top-ranked features, or none")
    p.add_argument("--fit", default=None, help="CSV to fit ranges/PCA/ranking on (default: the input itself)")
    p.add_argument("--seed", type=int, default=0, help="seed of the feature-ranking forest")
    p.add_argument("--level", type=int, default=codec.DEFAULT_LEVEL, help="DEFLATE level 1-9")
    p.add_argument("--no-standardize", action="store_true", help="run PCA on raw rather than z-scored features")
    p.add_argument("-o", "--output", required=True, help="output .nfq path; labels go to <output>.sidecar.json")

    p = sub.add_parser("decompress", help="decode a .nfq container back to CSV", formatter_class=fmt)
    p.add_argument("input", help="input .nfq")
    p.add_argument("--no-sidecar", action="store_true", help="ignore <input>.sidecar.json, write features only")
    p.add_argument("-o", "--output", required=True, help="output CSV path")

    p = sub.add_parser("eval", help="score one pipeline config; prints a report row", formatter_class=fmt)
    p.add_argument("--train", required=True, help="train CSV")
    p.add_argument("--test", required=True, help="test CSV")
    _add_load_flags(p)
    p.add_argument("--bits", type=_opt(int), default=None, help="bits per value, or none for lossless")
    p.add_argument("--pca", type=_opt(float), default=None, help="PCA variance target, or none")
    p.add_argument("--select-k", type=_opt(int), default=None, help="top-k feature selection, or none")
    p.add_argument("--per-group", action="store_true", help="one pipeline and forest per --group-column value")
    p.add_argument("--no-header", action="store_true", help="omit the CSV header line")
    p.add_argument("--no-timing", action="store_true", help="leave wall_time_seconds empty")
    _add_forest_flags(p)

    p = sub.add_parser("sweep", help="sweep bits x PCA x selection; writes report CSV/SVG", formatter_class=fmt)
    p.add_argument("--train", required=True, help="train CSV")
    p.add_argument("--test", required=True, help="test CSV")
    _add_load_flags(p)
    p.add_argument("--bits-list", type=_opt_list(int), default="none,32,16,8,4,2", help="bit widths")
    p.add_argument("--pca-list", type=_opt_list(float), default="none", help="PCA variance targets")
    p.add_argument("--select-list", type=_opt_list(int), default="none", help="selection sizes")
    p.add_argument("--epsilon", type=float, default=0.02, help="allowed F1 drop for the operating region")
    p.add_argument("--jobs", type=int, default=1, help="configs run in parallel (output does not depend on it)")
    p.add_argument("--per-group", action="store_true", help="one pipeline and forest per --group-column value")
    p.add_argument("--no-svg", action="store_true", help="skip the SVG plot")
    p.add_argument("--no-timing", action="store_true", help="leave wall_time_seconds empty (byte-stable reports)")
    _add_forest_flags(p)
    p.add_argument("-o", "--output", required=True, help="report directory")

    p = sub.add_parser("inspect", help="print the header of a .nfq container", formatter_class=fmt)
    p.add_argument("input", help="input .nfq")
    return parser


def _sidecar_path(nfq: str | Path) -> Path:
    return Path(str(nfq) + ".sidecar.json")


def cmd_synth(args) -> int:
    spec = SynthSpec(
        args.classes, args.informative, args.noise, args.rows_per_class, args.separation, args.heavy_tail, args.rate, args.seed
    )
    write_csv(synth_generate(spec), args.output)
    return EXIT_OK


def cmd_split(args) -> int:
    table = _load(args.input, args)
    train, test = stratified_split(table, args.test_fraction, args.seed)
    write_csv(train, args.train_out, args.label_column)
    write_csv(test, args.test_out, args.label_column)
    print(f"train {train.n_rows} rows, test {test.n_rows} rows", file=sys.stderr)
    return EXIT_OK


def cmd_compress(args) -> int:
    table = _load(args.input, args)
    fit_on = table if args.fit is None else _load(args.fit, args)
    config = PipelineConfig(args.select_k, args.pca, args.bits, seed=args.seed, standardize=not args.no_standardize)
    fitted = fit_pipeline(fit_on, config)
    staged = fitted.stage(table)
    size = codec.write_container(args.output, codec.pack(encode(staged, fitted.ranges, args.bits), fitted.ranges), args.level)
    side = {"label_column": args.label_column, "labels": table.label_names()}
    if table.timestamps is not None:
        side["timestamp_column"] = args.timestamp_column
        side["timestamps"] = table.timestamps.tolist()
    if table.groups is not None:
        side["group_column"] = args.group_column
        side["groups"] = list(table.groups)
    _sidecar_path(args.output).write_text(json.dumps(side), encoding="utf-8")
    print(f"{args.output}: {size} bytes, {staged.n_rows} rows x {staged.n_features} features at {args.bits} bits", file=sys.stderr)
    return EXIT_OK


def cmd_decompress(args) -> int:
    codes, ranges = codec.unpack(codec.read_container(args.input))
    table = decode(codes, ranges)
    side = _sidecar_path(args.input)
    if args.no_sidecar or not side.exists():
        write_csv(table, args.output, label_column=None)
        return EXIT_OK
    meta = json.loads(side.read_text(encoding="utf-8"))
    labels = meta["labels"]
    if len(labels) != table.n_rows:
        raise DataError(f"sidecar has {len(labels)} labels for {table.n_rows} rows")
    names = list(dict.fromkeys(labels))
    index = {c: i for i, c in enumerate(names)}
    table = FeatureTable(
        table.feature_names,
        table.values,
        np.array([index[c] for c in labels], dtype=np.int64),
        tuple(names),
        meta.get("timestamps"),
        meta.get("groups"),
    )
    write_csv(
        table,
        args.output,
        meta["label_column"],
        meta.get("timestamp_column") or "timestamp",
        meta.get("group_column") or "group",
    )
    return EXIT_OK


def _split_pair(args) -> tuple[FeatureTable, FeatureTable]:
    train = _load(args.train, args)
    test = _load(args.test, args, classes=train.class_names)
    return train, test


def cmd_eval(args) -> int:
    train, test = _split_pair(args)
    config = PipelineConfig(args.select_k, args.pca, args.bits, _forest(args), args.seed, not args.no_standardize)
    runner = run_config_grouped if args.per_group else run_config
    point = runner(train, test, config, duration=args.duration, average=args.f1_average, level=args.level)
    lines = report_rows([point], include_timing=not args.no_timing)
    sys.stdout.write("\n".join(lines[1:] if args.no_header else lines) + "\n")
    return EXIT_OK


def cmd_sweep(args) -> int:
    train, test = _split_pair(args)
    forest = _forest(args)
    configs = [
        PipelineConfig(k, pca, bits, forest, args.seed, not args.no_standardize)
        for k in args.select_list
        for pca in args.pca_list
        for bits in args.bits_list
    ]
    for k in {c.selection_k for c in configs} - {None}:
        if k > train.n_features:
            raise DataError(f"selection size {k} exceeds the {train.n_features} features in {args.train}")
    points = sweep(
        train, test, configs, jobs=args.jobs, grouped=args.per_group,
        duration=args.duration, average=args.f1_average, level=args.level,
    )
    has_baselines = all(c.stage_key in {d.stage_key for d in configs if d.bits is None} for c in configs)
    region = operating_region(points, args.epsilon) if has_baselines else None
    if region is None:
        print("no 'none' entry in --bits-list: operating region skipped", file=sys.stderr)
    for path in write_report(points, region, args.output, svg=not args.no_svg, include_timing=not args.no_timing):
        print(f"wrote {path}", file=sys.stderr)
    return EXIT_OK


def cmd_inspect(args) -> int:
    data = Path(args.input).read_bytes()
    c = codec.unseal(data)
    out = sys.stdout
    out.write(f"magic: {codec.MAGIC.decode()}\nversion: {c.version}\nbits: {c.bits}\n")
    out.write(f"n_features: {len(c.feature_names)}\nn_rows: {c.n_rows}\n")
    out.write(f"payload_bytes: {len(c.payload)}\nfile_bytes: {len(data)}\n")
    out.write("feature,lo,hi\n")
    for name, lo, hi in zip(c.feature_names, c.ranges.lo, c.ranges.hi):
        out.write(f"{name},{float(lo)!r},{float(hi)!r}\n")
    return EXIT_OK


COMMANDS = {
    "synth": cmd_synth,
    "split": cmd_split,
    "compress": cmd_compress,
    "decompress": cmd_decompress,
    "eval": cmd_eval,
    "sweep": cmd_sweep,
    "inspect": cmd_inspect,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    try:
        return COMMANDS[args.command](args)
    except (DataError, csv.Error, UnicodeDecodeError, json.JSONDecodeError, KeyError) as exc:
        print(f"featpress {args.command}: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"featpress {args.command}: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
