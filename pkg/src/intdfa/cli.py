"""Command-line entry point: ``train``, ``eval``, ``audit`` and ``baseline``.

Every option may also come from a ``--config`` file of ``key=value`` lines
using the long flag names without dashes (``lr-inverse=1000``). Flags given on
the command line win over the file, and the file wins over built-in defaults.

Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import baseline, network, overflow, trainer
from .activations import Activation
from .data import DATA_DIR_ENV, DataError, IdxFormatError, dataset_paths, default_data_dir, load_dataset
from .rng import Rng, derive_seed

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2

# Sub-stream used for feedback-matrix initialisation; the shuffle uses the seed itself.
INIT_STREAM = 1


class UsageError(Exception):
    pass


def _int_list(text: str) -> list[int]:
    try:
        return [int(t) for t in str(text).split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _bool(text: str) -> bool:
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


# name -> (type, default). None default means "no default", which some commands require.
_DATA_OPTS = {
    "data-dir": (str, None),
    "train-images": (str, None),
    "train-labels": (str, None),
    "val-images": (str, None),
    "val-labels": (str, None),
    "train-subset": (int, 0),
}

OPTIONS = {
    "train": {
        "arch": (_int_list, "784,100,50,10"),
        "actv": (str, "pocket_tanh"),
        "epochs": (int, 100),
        "batch": (int, 20),
        "lr-inverse": (int, 1000),
        "lr-double-every": (int, 10),
        "seed": (int, 1),
        "mode": (str, "dfa-int"),
        "shuffle": (_bool, True),
        "pre-div": (_int_list, str(network.DEFAULT_PRE_DIV)),
        "feedback-range": (_int_list, "{},{}".format(*network.DEFAULT_FEEDBACK_RANGE)),
        "output-feedback": (str, "identity"),
        "hot-value": (int, 127),
        "model": (str, "model.pknn"),
        "metrics": (str, "metrics.csv"),
        **_DATA_OPTS,
    },
    "eval": {
        "model": (str, None),
        "data-dir": (str, None),
        "val-images": (str, None),
        "val-labels": (str, None),
    },
    "baseline": {
        "arch": (_int_list, "784,100,50,10"),
        "epochs": (int, 100),
        "batch": (int, 20),
        "lr": (float, 0.1),
        "lr-halve-every": (int, 10),
        "seed": (int, 1),
        "shuffle": (_bool, True),
        "metrics": (str, "baseline.csv"),
        **_DATA_OPTS,
    },
    "audit": {
        "hidden": (int, None),
        "e": (int, 8),
        "w": (int, 8),
        "r": (int, 8),
        "acc": (int, 32),
        "widths": (_int_list, ""),
        "csv": (_bool, False),
    },
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="intdfa", description="Integer-only DFA training for fully connected networks.")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "train": "train an integer network",
        "eval": "evaluate a saved model",
        "baseline": "train the float64 backprop reference",
        "audit": "print BP vs DFA delta bit bounds",
    }
    for command, opts in OPTIONS.items():
        p = sub.add_parser(command, help=helps[command])
        p.add_argument("--config", help="key=value file; command-line flags override it")
        for name, (kind, default) in opts.items():
            dest = name.replace("-", "_")
            if kind is _bool:
                p.add_argument(f"--{name}", dest=dest, nargs="?", const="true", type=_bool, default=None,
                               help=f"default {default}")
                p.add_argument(f"--no-{name}", dest=dest, action="store_const", const=False)
            else:
                p.add_argument(f"--{name}", dest=dest, type=kind, default=None,
                               help=None if default is None else f"default {default}")
    return parser


def read_config(path) -> dict[str, str]:
    values = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc.strerror}") from None
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        values[key.lstrip("-").replace("_", "-")] = value
    return values


def resolve(command: str, args: argparse.Namespace) -> dict:
    """Merge flags, config file and defaults into one dict keyed by option name."""
    opts = OPTIONS[command]
    file_values = read_config(args.config) if args.config else {}
    unknown = sorted(set(file_values) - set(opts))
    if unknown:
        raise UsageError(f"unknown config keys for {command}: {', '.join(unknown)}")
    resolved = {}
    for name, (kind, default) in opts.items():
        value = getattr(args, name.replace("-", "_"))
        if value is None and name in file_values:
            raw = file_values[name]
        elif value is None:
            raw = default
        else:
            resolved[name] = value
            continue
        if raw is None:
            resolved[name] = None
            continue
        try:
            resolved[name] = kind(raw) if not isinstance(raw, bool) else raw
        except (ValueError, argparse.ArgumentTypeError) as exc:
            raise UsageError(f"bad value for {name}: {exc}") from None
    if "data-dir" in resolved and resolved["data-dir"] is None:
        env = default_data_dir()
        resolved["data-dir"] = str(env) if env else None
    return resolved


def print_config(command: str, cfg: dict) -> None:
    print(f"# {command} configuration")
    for key in sorted(cfg):
        value = cfg[key]
        if isinstance(value, list):
            value = ",".join(str(v) for v in value)
        print(f"{key} = {value}")
    sys.stdout.flush()


def _data_path(cfg: dict, key: str) -> Path:
    if cfg.get(key):
        path = Path(cfg[key])
    elif cfg.get("data-dir"):
        path = dataset_paths(cfg["data-dir"])[key.replace("-", "_")]
    else:
        raise UsageError(f"no path for --{key}; pass it or set --data-dir / {DATA_DIR_ENV}")
    if not path.is_file():
        raise UsageError(f"dataset file not found: {path}")
    return path


def _load(cfg: dict, split: str, num_classes: int = 10):
    ds = load_dataset(_data_path(cfg, f"{split}-images"), _data_path(cfg, f"{split}-labels"), num_classes)
    if split == "train" and cfg.get("train-subset"):
        ds = ds.subset(cfg["train-subset"])
    return ds


def _arch(cfg: dict) -> list[int]:
    arch = cfg["arch"]
    if len(arch) < 2 or any(d < 1 for d in arch):
        raise UsageError(f"--arch needs at least two positive sizes, got {arch}")
    return arch


def _positive(cfg: dict, *names: str) -> None:
    for name in names:
        if cfg[name] is None or cfg[name] < 1:
            raise UsageError(f"--{name} must be a positive integer, got {cfg[name]}")


def _write(path, content, binary: bool = False) -> None:
    path = Path(path)
    if path.parent != Path("."):
        path.parent.mkdir(parents=True, exist_ok=True)
    if binary:
        path.write_bytes(content)
    else:
        path.write_text(content)


def cmd_train(cfg: dict) -> int:
    dims = _arch(cfg)
    _positive(cfg, "batch", "lr-inverse", "lr-double-every")
    if cfg["epochs"] < 0:
        raise UsageError("--epochs must be >= 0")
    try:
        actv = Activation.from_name(cfg["actv"])
        mode = trainer.Mode(cfg["mode"])
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if len(cfg["feedback-range"]) != 2:
        raise UsageError("--feedback-range takes lo,hi")
    pre_div = cfg["pre-div"]
    if len(pre_div) == 1:
        pre_div = pre_div[0]
    train_data = _load(cfg, "train", dims[-1])
    val_data = _load(cfg, "val", dims[-1])
    try:
        net = network.build(dims, actv, pre_div, Rng(derive_seed(cfg["seed"], INIT_STREAM)),
                            tuple(cfg["feedback-range"]), cfg["output-feedback"])
        tc = trainer.TrainConfig(cfg["epochs"], cfg["batch"], cfg["lr-inverse"], cfg["lr-double-every"],
                                 cfg["seed"], mode, cfg["shuffle"], cfg["hot-value"])
    except ValueError as exc:
        raise UsageError(str(exc)) from None

    def report(m: trainer.EpochMetrics) -> None:
        print(trainer.metrics_row(m), flush=True)

    print(trainer.CSV_HEADER)
    history = trainer.train(net, train_data, val_data, tc, on_epoch=report)
    _write(cfg["metrics"], trainer.metrics_csv(history))
    _write(cfg["model"], network.serialize(net), binary=True)
    final = history[-1].val_accuracy if history else trainer.evaluate(net, val_data)
    print(f"final val accuracy {final!r}")
    if history:
        print(f"best val accuracy {trainer.best_val_accuracy(history)!r}")
    return EXIT_OK


def cmd_eval(cfg: dict) -> int:
    if not cfg["model"]:
        raise UsageError("--model is required")
    path = Path(cfg["model"])
    if not path.is_file():
        raise UsageError(f"model file not found: {path}")
    net = network.deserialize(path.read_bytes())
    data = _load(cfg, "val", net.num_classes)
    print(f"accuracy {trainer.evaluate(net, data)!r}")
    return EXIT_OK


def cmd_baseline(cfg: dict) -> int:
    dims = _arch(cfg)
    _positive(cfg, "batch", "lr-halve-every")
    if cfg["epochs"] < 0 or not cfg["lr"] > 0:
        raise UsageError("need --epochs >= 0 and --lr > 0")
    train_data = _load(cfg, "train", dims[-1])
    val_data = _load(cfg, "val", dims[-1])
    print(trainer.CSV_HEADER)
    _, history = baseline.fp_train(
        dims, train_data, val_data, cfg["epochs"], cfg["batch"], cfg["lr"], cfg["lr-halve-every"],
        cfg["seed"], cfg["shuffle"], on_epoch=lambda m: print(trainer.metrics_row(m), flush=True),
    )
    _write(cfg["metrics"], trainer.metrics_csv(history))
    print(f"final val accuracy {history[-1].val_accuracy!r}")
    print(f"best val accuracy {trainer.best_val_accuracy(history)!r}")
    return EXIT_OK


def cmd_audit(cfg: dict) -> int:
    if cfg["hidden"] is None:
        raise UsageError("--hidden is required")
    _positive(cfg, "hidden", "e", "w", "r", "acc")
    report = overflow.audit(cfg["hidden"], cfg["e"], cfg["w"], cfg["r"], cfg["acc"], cfg["widths"] or None)
    print(overflow.format_table(report))
    if cfg["csv"]:
        print()
        print(overflow.format_csv(report))
    return EXIT_OK


COMMANDS = {"train": cmd_train, "eval": cmd_eval, "baseline": cmd_baseline, "audit": cmd_audit}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        cfg = resolve(args.command, args)
        print_config(args.command, cfg)
        return COMMANDS[args.command](cfg)
    except UsageError as exc:
        print(f"intdfa {args.command}: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (network.FormatError, IdxFormatError, DataError) as exc:
        print(f"intdfa {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (OSError, ValueError, ArithmeticError, RuntimeError) as exc:
        print(f"intdfa {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
