"""Command-line interface: ``transientpy <command> [options]``.

Exit codes: 0 success, 1 usage or configuration error, 2 data error (including
unreadable files), 3 failed gradient check.
"""

import argparse
import logging
import sys
from collections.abc import Sequence

from transientpy import __version__
from transientpy.errors import ConfigError, DataError, TransientPyError
from transientpy.io.checkpoint import load_checkpoint, save_model
from transientpy.io.export import (
    dumps,
    write_curves,
    write_history,
    write_json,
    write_probabilities,
    write_report,
    write_sequences,
)
from transientpy.io.ingest import describe_dataset, read_table, split_train_validation, write_table
from transientpy.nn.gradcheck import DEFAULT_TOLERANCE, check_gradients
from transientpy.nn.lstm import predict
from transientpy.nn.trainer import TrainConfig, balanced_class_weights, train
from transientpy.preprocess.ops import SEQUENCE_LENGTH
from transientpy.preprocess.pipeline import DEFAULT_TIME_SCALE, PreprocessConfig, preprocess_dataset
from transientpy.stats.metrics import evaluate
from transientpy.synth.generate import generate_dataset
from transientpy.utils.config import configure_logging, load_environment, log_run_config

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_GRADCHECK = 3


class UsageError(Exception):
    """Raised instead of exiting when the command line cannot be parsed."""


class ArgumentParser(argparse.ArgumentParser):
    """Parser that raises `UsageError` so `run` controls the exit code."""

    def error(self, message: str):
        msg = f"{self.format_usage()}{self.prog}: error: {message}"
        raise UsageError(msg)


def parse_class_weights(value: str | None, train_labels: Sequence[int]):
    """`balanced`, five comma-separated positive reals, or None."""
    if value is None:
        return None
    if value.strip().lower() == "balanced":
        return balanced_class_weights(train_labels)
    try:
        weights = tuple(float(v) for v in value.split(","))
    except ValueError as err:
        msg = f"Invalid --class-weights {value!r}: expected 'balanced' or 5 numbers."
        raise ConfigError(msg) from err
    return weights


def cmd_synth(args: argparse.Namespace) -> int:
    log_run_config("synth", n_per_class=args.n_per_class, seed=args.seed, out=args.out)
    dataset = generate_dataset(args.n_per_class, args.seed, progress=args.verbose > 0)
    write_table(dataset, args.out)
    print(f"Wrote {len(dataset)} objects to {args.out}")
    return EXIT_OK


def cmd_train(args: argparse.Namespace) -> int:
    preprocess_config = PreprocessConfig(
        target_len=args.target_len, time_scale=args.time_scale
    )
    dataset = read_table(args.data, has_labels=True)
    train_set, val_set = split_train_validation(dataset, args.val_fraction, args.seed)
    train_labels = [c.generalized_class for c in train_set]
    cfg = TrainConfig(
        max_epochs=args.epochs,
        batch_size=args.batch,
        learning_rate=args.lr,
        patience=args.patience,
        class_weights=parse_class_weights(args.class_weights, train_labels),
        seed=args.seed,
        hidden_size=args.hidden,
        oversample=args.oversample,
    )
    log_run_config(
        "train",
        data=args.data,
        out=args.out,
        val_fraction=args.val_fraction,
        train=cfg.to_dict(),
        preprocess=preprocess_config.to_dict(),
    )

    params, history = train(
        train_set, val_set, cfg, preprocess_config, progress=args.verbose > 0
    )
    save_model(params, args.out, seed=args.seed, preprocess_config=preprocess_config)
    if args.history:
        write_history(history, args.history)

    best = history.records[history.best_epoch - 1]
    print(
        f"best_epoch={history.best_epoch} val_loss={best.val_loss:.6f} "
        f"val_acc={best.val_acc:.4f} epochs_run={len(history.records)}"
    )
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    checkpoint = load_checkpoint(args.model)
    config = checkpoint.preprocess_config
    log_run_config(
        "eval",
        model=args.model,
        data=args.data,
        horizon_days=args.horizon_days,
        report=args.report,
        curves=args.curves,
        preprocess=config.to_dict(),
    )
    dataset = read_table(args.data, has_labels=True)
    report = evaluate(checkpoint.params, dataset, args.horizon_days, config)

    if args.report:
        write_report(report, args.report)
    else:
        print(dumps(report.to_dict()))
    if args.curves:
        write_curves(report.curves, args.curves)
    return EXIT_OK


def cmd_predict(args: argparse.Namespace) -> int:
    checkpoint = load_checkpoint(args.model)
    config = checkpoint.preprocess_config
    log_run_config(
        "predict",
        model=args.model,
        data=args.data,
        out=args.out,
        horizon_days=args.horizon_days,
        preprocess=config.to_dict(),
    )
    dataset = read_table(args.data, has_labels=False)
    seqs, _ = preprocess_dataset(dataset, horizon_days=args.horizon_days, config=config)
    probs = predict(checkpoint.params, seqs)
    write_probabilities([s.object_id for s in seqs], probs, args.out)
    return EXIT_OK


def cmd_gradcheck(args: argparse.Namespace) -> int:
    log_run_config(
        "gradcheck",
        seed=args.seed,
        hidden=args.hidden,
        length=args.length,
        batch=args.batch,
        tolerance=args.tolerance,
    )
    result = check_gradients(
        seed=args.seed,
        hidden=args.hidden,
        length=args.length,
        batch=args.batch,
        tolerance=args.tolerance,
        progress=args.verbose > 0,
    )
    status = "ok" if result.passed else "FAILED"
    print(
        f"max relative error: {result.max_rel_error:.3e} "
        f"(at {result.worst_parameter}, {result.n_params} parameters) {status}"
    )
    return EXIT_OK if result.passed else EXIT_GRADCHECK


def cmd_describe(args: argparse.Namespace) -> int:
    log_run_config("describe", data=args.data, target_len=args.target_len)
    dataset = read_table(args.data, has_labels=not args.unlabeled)
    summary = describe_dataset(dataset, args.target_len)
    if args.out:
        write_json(summary, args.out)
    else:
        print(dumps(summary))
    return EXIT_OK


def cmd_preprocess(args: argparse.Namespace) -> int:
    config = PreprocessConfig(
        target_len=args.target_len,
        time_scale=args.time_scale,
        horizon_days=args.horizon_days,
    )
    log_run_config("preprocess", data=args.data, out=args.out, preprocess=config.to_dict())
    dataset = read_table(args.data, has_labels=not args.unlabeled)
    seqs, summary = preprocess_dataset(dataset, config=config)
    write_sequences(seqs, args.out)
    print(f"Wrote {summary.n_output} sequences to {args.out} ({summary.n_dropped} dropped)")
    return EXIT_OK


def _add_preprocess_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--target-len", type=int, default=SEQUENCE_LENGTH)
    parser.add_argument("--time-scale", type=float, default=DEFAULT_TIME_SCALE)


def build_parser() -> ArgumentParser:
    parser = ArgumentParser(
        prog="transientpy",
        description="Classify transient light curves with a bidirectional LSTM.",
    )
    parser.add_argument(
        "-v", "--verbose", action="count", default=0, help="-v for INFO, -vv for DEBUG"
    )
    parser.add_argument("--run-log", help="Also write the run log to this file.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    p = sub.add_parser("synth", help="Generate a synthetic labeled dataset (CSV).")
    p.add_argument("--n-per-class", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="Train a model on a labeled CSV.")
    p.add_argument("--data", required=True)
    p.add_argument("--val-fraction", type=float, default=0.1)
    p.add_argument("--hidden", type=int, default=64)
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--batch", type=int, default=32)
    p.add_argument("--lr", type=float, default=0.001)
    p.add_argument("--patience", type=int, default=5)
    p.add_argument(
        "--class-weights", help="'balanced' or five comma-separated weights."
    )
    p.add_argument("--oversample", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="Checkpoint path.")
    p.add_argument("--history", help="Write per-epoch history as JSON lines.")
    _add_preprocess_options(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="Evaluate a model on a labeled CSV.")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--horizon-days", type=float)
    p.add_argument("--report", help="Report JSON path; printed when omitted.")
    p.add_argument("--curves", help="ROC/PR points CSV path.")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("predict", help="Write class probabilities for a CSV.")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--horizon-days", type=float)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("gradcheck", help="Verify gradients by finite differences.")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--hidden", type=int, default=8)
    p.add_argument("--length", type=int, default=12)
    p.add_argument("--batch", type=int, default=4)
    p.add_argument("--tolerance", type=float, default=DEFAULT_TOLERANCE)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("describe", help="Summarize classes and sequence lengths.")
    p.add_argument("--data", required=True)
    p.add_argument("--target-len", type=int, default=SEQUENCE_LENGTH)
    p.add_argument("--unlabeled", action="store_true")
    p.add_argument("--out", help="JSON path; printed when omitted.")
    p.set_defaults(func=cmd_describe)

    p = sub.add_parser("preprocess", help="Export preprocessed sequences to Parquet.")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--horizon-days", type=float)
    p.add_argument("--unlabeled", action="store_true")
    _add_preprocess_options(p)
    p.set_defaults(func=cmd_preprocess)

    return parser


def run(argv: Sequence[str] | None = None) -> int:
    """
    Execute one command and return its exit code.

    Args:
        argv (Sequence[str] | None): Arguments without the program name; defaults to
            ``sys.argv[1:]``.

    Returns:
        int: 0 on success, 1 on usage/configuration errors, 2 on data errors, 3 when
            the gradient check fails.
    """
    load_environment()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as err:
        print(err, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as err:
        # --help and --version
        return int(err.code or 0)

    configure_logging(args.verbose, args.run_log)
    try:
        return args.func(args)
    except ConfigError as err:
        print(f"transientpy: configuration error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as err:
        print(f"transientpy: data error: {err}", file=sys.stderr)
        return EXIT_DATA
    except OSError as err:
        path = err.filename if err.filename is not None else ""
        print(f"transientpy: cannot access {path}: {err.strerror or err}", file=sys.stderr)
        return EXIT_DATA
    except TransientPyError as err:
        print(f"transientpy: error: {err}", file=sys.stderr)
        return EXIT_USAGE


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
