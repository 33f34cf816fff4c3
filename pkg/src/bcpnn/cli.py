"""Command-line harness: ``bcpnn {train-unsup,train-sup,eval,dump-rf}``.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric error.
"""

import argparse
import logging
import math
import os
import sys

from . import checkpoint
from .config import load_config
from .errors import BCPNNError, DataError
from .metrics import histogram_csv, write_metrics
from .mnist import load_mnist_dir
from .receptive_fields import dump_receptive_fields
from .training import (
    VIEW_STREAM,
    check_resumable,
    evaluate,
    run_supervised,
    run_unsupervised,
    split_for,
    stream,
)

log = logging.getLogger("bcpnn")


def _resolve(args, model=None):
    """Config from checkpoint echo (if any), then --config, --set, --seed."""
    base = model.config if model is not None else None
    return load_config(args.config, args.set, args.seed, base=base)


def _load_model(args, required=True):
    if not args.checkpoint or not os.path.exists(args.checkpoint):
        if required:
            raise DataError(f"checkpoint {args.checkpoint!r} does not exist")
        return None, None
    model = checkpoint.load_checkpoint(args.checkpoint)
    config = _resolve(args, model)
    if (config.hidden_hcs, config.hidden_mcs) != (model.hidden_layer.n_hc,
                                                  model.hidden_layer.mc_per_hc):
        # reparse with the expectation so the error is reported uniformly
        checkpoint.load_checkpoint(args.checkpoint, expect=config)
    check_resumable(config, model)
    return model, config


def _data(args, config):
    if not args.mnist_dir:
        raise DataError("--mnist-dir is required")
    return split_for(config, load_mnist_dir(args.mnist_dir, "train"))


def _header(config, out_dir):
    os.makedirs(out_dir, exist_ok=True)
    lines = config.header_lines()
    for key, value in config.deviations().items():
        log.warning("deviation from table defaults: %s = %r", key, value)
    with open(os.path.join(out_dir, "run_header.txt"), "w", encoding="utf-8") as f:
        f.write("\n".join(lines) + "\n")


def cmd_train_unsup(args):
    model, config = (None, None)
    if args.resume:
        model, config = _load_model(args, required=False)
    resumed = model is not None
    if not resumed:
        config = _resolve(args)
    train, _ = _data(args, config)
    _header(config, args.out)
    model, record = run_unsupervised(config, train, model=model, max_epochs=args.epochs)
    write_metrics(record, args.out, append=resumed,
                  only={"unsup_epochs.csv", "marginal_entropy.csv", "flips.csv"})
    checkpoint.save_checkpoint(model, args.checkpoint)
    log.info("wrote %s after %d unsupervised epochs", args.checkpoint, model.unsup_epochs)


def cmd_train_sup(args):
    model, config = _load_model(args)
    train, val = _data(args, config)
    _header(config, args.out)
    resumed = model.classifier is not None
    _, record = run_supervised(config, model, train, val, max_epochs=args.epochs,
                               threads=args.threads)
    write_metrics(record, args.out, append=resumed, only={"sup_epochs.csv"})
    checkpoint.save_checkpoint(model, args.checkpoint)
    if record.sup:
        print(f"validation accuracy {record.sup[-1].val_accuracy:.4f}")


def cmd_eval(args):
    model, config = _load_model(args)
    if args.split == "test":
        dataset = load_mnist_dir(args.mnist_dir, "test")
    else:
        train, val = _data(args, config)
        dataset = train if args.split == "train" else val
    result = evaluate(model, dataset, threads=args.threads)
    os.makedirs(args.out, exist_ok=True)
    upper = math.log(model.hidden_layer.mc_per_hc)
    files = {
        f"eval_{args.split}.csv": (
            "split,n_samples,accuracy,mean_marginal_entropy,mean_conditional_entropy\n"
            f"{args.split},{len(dataset)},{result.accuracy!r},"
            f"{float(result.marginal_entropy.mean())!r},"
            f"{float(result.conditional_entropy.mean()) if len(dataset) else 0.0!r}\n"),
        f"hist_marginal_entropy_{args.split}.csv": histogram_csv(result.marginal_entropy, upper),
        f"hist_conditional_entropy_{args.split}.csv": histogram_csv(result.conditional_entropy, upper),
    }
    for name, text in files.items():
        with open(os.path.join(args.out, name), "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
    print(f"{args.split} accuracy {result.accuracy:.4f} on {len(dataset)} samples")


def cmd_dump_rf(args):
    model, config = _load_model(args)
    paths = dump_receptive_fields(model, args.out, n_hcs=args.n_hcs, n_mcs=args.n_mcs,
                                  rng=stream(config.seed, VIEW_STREAM))
    print(f"wrote {len(paths)} images to {args.out}")


def build_parser():
    parser = argparse.ArgumentParser(prog="bcpnn", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat 'key = value' config file")
    common.add_argument("--mnist-dir", help="directory with the standard IDX files")
    common.add_argument("--seed", type=int)
    common.add_argument("--checkpoint", required=True)
    common.add_argument("--out", default=".")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override any config key (repeatable)")
    common.add_argument("--threads", type=int, default=1,
                        help="evaluation fan-out; 1 is bit-exact")
    common.add_argument("-v", "--verbose", action="store_true")

    p = sub.add_parser("train-unsup", parents=[common], help="unsupervised phase")
    p.add_argument("--resume", action="store_true",
                   help="continue from --checkpoint if it exists")
    p.add_argument("--epochs", type=int, help="run at most this many epochs now")
    p.set_defaults(func=cmd_train_unsup)

    p = sub.add_parser("train-sup", parents=[common], help="Go/No-Go read-out")
    p.add_argument("--epochs", type=int, help="run at most this many epochs now")
    p.set_defaults(func=cmd_train_sup)

    p = sub.add_parser("eval", parents=[common], help="accuracy and entropy histograms")
    p.add_argument("--split", choices=("train", "val", "test"), default="val")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("dump-rf", parents=[common], help="receptive-field PGMs")
    p.add_argument("--n-hcs", type=int, default=None)
    p.add_argument("--n-mcs", type=int, default=9)
    p.set_defaults(func=cmd_dump_rf)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except BCPNNError as exc:
        print(f"bcpnn: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"bcpnn: error: {exc}", file=sys.stderr)
        return DataError.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
