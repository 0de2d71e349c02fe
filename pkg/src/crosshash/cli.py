"""Command-line pipeline: synthesize data, train the hashing nets, encode
points, and evaluate retrieval.

Every subcommand accepts ``--config FILE`` pointing at a flat ``key = value``
text file; explicit flags override file values.  All randomness in a command
derives from its single ``--seed`` flag: the master seed is expanded with
numpy's SeedSequence into four 64-bit sub-seeds, used in a fixed order for
the data split, the image-net init, the text-net init, and the training
loop.  Repeated invocations with the same inputs and seed produce
byte-identical data, checkpoint, code, and metric files.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass
from types import SimpleNamespace

import numpy as np

from .data import (
    MultiModalDataset,
    SplitSpec,
    build_similarity,
    load_dataset,
    save_dataset,
    split,
    synth_dataset,
)
from .mathops import NumericError, make_rng
from .net import LayerSpec, init_net
from .objective import Hyperparams
from .reports import (
    TrainingLog,
    default_figure_path,
    plot_pr_curve,
    plot_training_log,
    write_map_summary,
    write_pr_points,
)
from .retrieval import (
    CodeDatabase,
    GroundTruth,
    load_codes,
    mean_average_precision,
    pr_curve,
    queries_without_relevant,
    save_codes,
)
from .training import encode, load_checkpoint, save_checkpoint, train

TASK_LABELS = {"i2t": "Image → Text", "t2i": "Text → Image"}


@dataclass(frozen=True)
class Option:
    flag: str
    type: object = str
    default: object = None
    help: str = ""
    required: bool = False
    choices: tuple | None = None
    boolean: bool = False

    @property
    def dest(self) -> str:
        return self.flag.replace("-", "_")


COMMAND_OPTIONS: dict[str, list[Option]] = {
    "synth": [
        Option("out", str, required=True, help="output dataset file path"),
        Option("classes", int, required=True, help="number of classes (>= 2)"),
        Option("per-class", int, required=True, help="points per class"),
        Option("d-image", int, 32, help="image feature dimension (default: 32)"),
        Option("d-text", int, 64, help="text vocabulary size (default: 64)"),
        Option("noise", float, 0.1, help="image feature noise level (default: 0.1)"),
        Option("tokens-per-text", int, 64, help="tokens drawn per text point (default: 64)"),
        Option("topic-concentration", float, 0.15,
               help="Dirichlet concentration of the class topics (default: 0.15)"),
        Option("seed", int, 0, help="master seed (default: 0)"),
    ],
    "train": [
        Option("data", str, required=True, help="input dataset file"),
        Option("checkpoint", str, required=True, help="output checkpoint file"),
        Option("log", str, help="output per-iteration loss CSV (default: <checkpoint>.log.csv)"),
        Option("code-length", int, 16,
               help="hash code length in bits (default: 16; typical: 16, 32, 64)"),
        Option("gamma", float, 1.0, help="quantization weight (default: 1.0)"),
        Option("eta", float, 1.0, help="bit-balance weight (default: 1.0)"),
        Option("batch-size", int, 128, help="mini-batch size (default: 128)"),
        Option("outer-iters", int, 500, help="outer training iterations (default: 500)"),
        Option("lr", float, 0.01, help="SGD learning rate (default: 0.01)"),
        Option("hidden-image", str, "64",
               help="comma-separated hidden widths of the image net, empty for linear (default: 64)"),
        Option("hidden-text", str, "64",
               help="comma-separated hidden widths of the text net, empty for linear (default: 64)"),
        Option("query-count", int, 0, help="points held out as queries (default: 0)"),
        Option("train-count", int,
               help="training points drawn from the database (default: all database points)"),
        Option("seed", int, 0, help="master seed (default: 0)"),
        Option("plot", bool, True, boolean=True,
               help="render the loss-curve figure next to the log CSV (default: on)"),
    ],
    "encode": [
        Option("checkpoint", str, required=True, help="trained checkpoint file"),
        Option("data", str, required=True, help="dataset file the checkpoint was trained from"),
        Option("out", str, required=True, help="output code file"),
        Option("modality", str, required=True, choices=("image", "text"),
               help="which network encodes the points: image or text"),
        Option("subset", str, "database", choices=("query", "database", "train", "all"),
               help="split subset to encode: query, database, train or all (default: database)"),
        Option("compare", str,
               help="existing code file to compare against; prints the bit agreement rate"),
    ],
    "eval": [
        Option("queries", str, required=True, help="query code file"),
        Option("database", str, required=True, help="database code file"),
        Option("data", str, required=True, help="dataset file providing the labels"),
        Option("task", str, required=True, choices=("i2t", "t2i"),
               help="retrieval direction: i2t (image query) or t2i (text query)"),
        Option("out-prefix", str, required=True,
               help="prefix for <prefix>_map.csv, <prefix>_pr.csv and <prefix>_pr.png"),
        Option("top-k", int, help="optional ranking cutoff for MAP (default: full ranking)"),
        Option("average", str, "micro", choices=("micro", "macro"),
               help="PR-curve averaging across queries: micro or macro (default: micro)"),
        Option("plot", bool, True, boolean=True,
               help="render the PR-curve figure next to the CSVs (default: on)"),
    ],
}

COMMAND_HELP = {
    "synth": "generate a synthetic two-modality dataset file",
    "train": "train the two hashing networks on a dataset split",
    "encode": "hash a dataset subset with a trained network",
    "eval": "score query codes against database codes (MAP + PR curve)",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="crosshash",
        description="cross-modal hash training and Hamming-retrieval evaluation",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    for command, options in COMMAND_OPTIONS.items():
        sub = subparsers.add_parser(command, help=COMMAND_HELP[command])
        sub.add_argument("--config", default=None,
                         help="flat key = value config file; flags override it")
        for opt in options:
            if opt.boolean:
                sub.add_argument(f"--{opt.flag}", action=argparse.BooleanOptionalAction,
                                 default=None, help=opt.help)
            else:
                sub.add_argument(f"--{opt.flag}", type=str, default=None,
                                 choices=None, help=opt.help)
    return parser


def parse_config_file(path: str) -> dict[str, str]:
    values: dict[str, str] = {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ValueError(f"cannot read config file {path}: {exc}") from exc
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        key, _, value = line.partition("=")
        values[key.strip().replace("_", "-")] = value.strip()
    return values


def _convert(opt: Option, raw: str):
    if opt.boolean:
        lowered = raw.lower()
        if lowered in ("1", "true", "yes", "on"):
            return True
        if lowered in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"config key '{opt.flag}' must be a boolean, got {raw!r}")
    try:
        return opt.type(raw)
    except (TypeError, ValueError) as exc:
        raise ValueError(f"invalid value for '{opt.flag}': {raw!r} ({exc})") from exc


def resolve_options(command: str, args: argparse.Namespace) -> SimpleNamespace:
    """Merge CLI flags over config-file values over defaults, then validate."""
    options = COMMAND_OPTIONS[command]
    config = parse_config_file(args.config) if args.config else {}
    known = {opt.flag for opt in options}
    for key in config:
        if key not in known:
            raise ValueError(f"unknown config key '{key}' for command '{command}'")
    resolved = {}
    for opt in options:
        value = getattr(args, opt.dest)
        if value is not None and not opt.boolean:
            value = _convert(opt, value)
        if value is None and opt.flag in config:
            value = _convert(opt, config[opt.flag])
        if value is None:
            value = opt.default
        if value is None and opt.required:
            raise ValueError(f"missing required flag --{opt.flag} (or config key '{opt.flag}')")
        if opt.choices is not None and value is not None and value not in opt.choices:
            raise ValueError(f"--{opt.flag} must be one of {opt.choices}, got {value!r}")
        resolved[opt.dest] = value
    return SimpleNamespace(**resolved)


def derive_seeds(master: int) -> dict[str, int]:
    """Fixed fan-out of the master seed into per-stage 64-bit sub-seeds."""
    words = np.random.SeedSequence(int(master)).generate_state(4, np.uint64)
    return {
        "split": int(words[0]),
        "net_image": int(words[1]),
        "net_text": int(words[2]),
        "train": int(words[3]),
    }


def _parse_hidden(raw: str, flag: str) -> list[int]:
    text = raw.strip()
    if not text:
        return []
    widths = []
    for piece in text.split(","):
        piece = piece.strip()
        try:
            width = int(piece)
        except ValueError:
            raise ValueError(f"--{flag} expects comma-separated integers, got {raw!r}") from None
        if width < 1:
            raise ValueError(f"--{flag} widths must be >= 1, got {width}")
        widths.append(width)
    return widths


def _layer_specs(input_dim: int, hidden: list[int], code_length: int) -> list[LayerSpec]:
    dims = [input_dim, *hidden, code_length]
    specs = []
    for k in range(len(dims) - 1):
        last = k == len(dims) - 2
        specs.append(LayerSpec(dims[k], dims[k + 1], "identity" if last else "relu"))
    return specs


def cmd_synth(opts: SimpleNamespace) -> int:
    ds = synth_dataset(
        opts.classes, opts.per_class, opts.d_image, opts.d_text,
        opts.noise, opts.seed, tokens_per_text=opts.tokens_per_text,
        topic_concentration=opts.topic_concentration,
    )
    save_dataset(ds, opts.out)
    print(
        f"wrote {opts.out}: n={ds.size} d_image={ds.image_features.shape[0]} "
        f"d_text={ds.text_features.shape[0]} classes={len(ds.label_names)}"
    )
    return 0


def cmd_train(opts: SimpleNamespace) -> int:
    ds = load_dataset(opts.data)
    seeds = derive_seeds(opts.seed)
    train_count = opts.train_count
    if train_count is None:
        train_count = ds.size - opts.query_count
    parts = split(ds, SplitSpec(opts.query_count, train_count, seeds["split"]))
    trainset = parts.train
    similarity = build_similarity(trainset.labels, trainset.labels)

    hyper = Hyperparams(
        code_length=opts.code_length, gamma=opts.gamma, eta=opts.eta,
        batch_size=opts.batch_size, outer_iters=opts.outer_iters, lr=opts.lr,
    )
    net_image = init_net(
        _layer_specs(ds.image_features.shape[0], _parse_hidden(opts.hidden_image, "hidden-image"),
                     hyper.code_length),
        make_rng(seeds["net_image"]),
    )
    net_text = init_net(
        _layer_specs(ds.text_features.shape[0], _parse_hidden(opts.hidden_text, "hidden-text"),
                     hyper.code_length),
        make_rng(seeds["net_text"]),
    )

    log_path = opts.log if opts.log is not None else opts.checkpoint + ".log.csv"
    initial = []
    log = TrainingLog(log_path)
    try:
        state = train(
            trainset.image_features, trainset.text_features, similarity,
            net_image, net_text, hyper, make_rng(seeds["train"]),
            on_iteration=lambda stats: (
                initial.append(stats) if stats.iteration == 0 else log.append(stats)
            ),
        )
    finally:
        log.close()

    save_checkpoint(
        opts.checkpoint, state, opts.seed,
        extra={
            "query_count": opts.query_count,
            "train_count": train_count,
            "split_seed": seeds["split"],
            "data_points": ds.size,
        },
    )
    print(f"initial loss: {initial[0].total:.6g}")
    print(f"final loss (iteration {hyper.outer_iters}): {log.rows[-1].total:.6g}")
    print(f"wrote checkpoint: {opts.checkpoint}")
    print(f"wrote training log: {log_path}")
    if opts.plot:
        figure = default_figure_path(log_path)
        plot_training_log(figure, log.rows, f"training loss (c={hyper.code_length})")
        print(f"wrote figure: {figure}")
    return 0


def _split_indices(ds: MultiModalDataset, extra: dict, subset: str) -> np.ndarray:
    if subset == "all":
        return np.arange(ds.size)
    for key in ("query_count", "train_count", "split_seed", "data_points"):
        if key not in extra:
            raise ValueError(f"checkpoint lacks split metadata '{key}'; encode --subset all instead")
    if extra["data_points"] != ds.size:
        raise ValueError(
            f"dataset has {ds.size} points but the checkpoint was trained from {extra['data_points']}"
        )
    parts = split(ds, SplitSpec(extra["query_count"], extra["train_count"], extra["split_seed"]))
    return {
        "query": parts.query_indices,
        "database": parts.database_indices,
        "train": parts.train_indices,
    }[subset]


def cmd_encode(opts: SimpleNamespace) -> int:
    checkpoint = load_checkpoint(opts.checkpoint)
    ds = load_dataset(opts.data)
    indices = _split_indices(ds, checkpoint.extra, opts.subset)
    if opts.modality == "image":
        net = checkpoint.net_image
        features = ds.image_features[:, indices]
    else:
        net = checkpoint.net_text
        features = ds.text_features[:, indices]
    codes = encode(net, features)
    db = CodeDatabase(codes, [str(int(i)) for i in indices])
    save_codes(db, opts.out)
    print(f"wrote {opts.out}: {db.size} {opts.modality} codes of length {db.code_length}")
    if opts.compare is not None:
        other = load_codes(opts.compare)
        if other.ids != db.ids:
            raise ValueError(f"{opts.compare} covers different points; cannot compare codes")
        agreement = float(np.mean(other.codes == db.codes)) if db.size else 1.0
        print(f"bit agreement vs {opts.compare}: {agreement:.4f}")
    return 0


def cmd_eval(opts: SimpleNamespace) -> int:
    queries = load_codes(opts.queries)
    database = load_codes(opts.database)
    if queries.code_length != database.code_length:
        raise ValueError(
            f"code length mismatch: queries {queries.code_length}, "
            f"database {database.code_length}"
        )
    ds = load_dataset(opts.data)

    def labels_for(code_db: CodeDatabase, which: str):
        out = []
        for raw in code_db.ids:
            try:
                index = int(raw)
            except ValueError:
                raise ValueError(f"{which} id {raw!r} is not a dataset row index") from None
            if not 0 <= index < ds.size:
                raise ValueError(f"{which} id {index} outside dataset of {ds.size} points")
            out.append(ds.labels[index])
        return out

    truth = GroundTruth.from_labels(labels_for(queries, "query"), labels_for(database, "database"))
    map_value = mean_average_precision(queries, database, truth, top_k=opts.top_k)
    excluded = queries_without_relevant(truth)
    evaluated = queries.size - excluded
    points = pr_curve(queries, database, truth, average=opts.average)

    task = TASK_LABELS[opts.task]
    c = queries.code_length
    map_path = opts.out_prefix + "_map.csv"
    pr_path = opts.out_prefix + "_pr.csv"
    write_map_summary(map_path, task, c, map_value, evaluated, excluded)
    write_pr_points(pr_path, task, c, points)
    print(f"{task}: MAP {map_value:.4f} over {evaluated} queries ({excluded} excluded)")
    print(f"wrote {map_path}")
    print(f"wrote {pr_path}")
    if opts.plot:
        figure = opts.out_prefix + "_pr.png"
        plot_pr_curve(figure, points, f"{task} (c={c})")
        print(f"wrote figure: {figure}")
    return 0


COMMANDS = {
    "synth": cmd_synth,
    "train": cmd_train,
    "encode": cmd_encode,
    "eval": cmd_eval,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        opts = resolve_options(args.command, args)
        return COMMANDS[args.command](opts)
    except (ValueError, OSError, NumericError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
