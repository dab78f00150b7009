"""Command-line interface: ``sdforest {pairs,train,predict,experiment}``.

Exit codes: 0 success, 1 usage, 2 data error, 3 config error, 4 internal
invariant violation.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace

from . import __version__
from .cascade import CascadeConfig, predict_batch, train_cascade
from .data import generate_pairs, load_csv, load_pairs, save_pairs
from .errors import ConfigError, DataError, SDFError
from .experiment import ExperimentSpec, run_experiment
from .persist import load_model, save_model

log = logging.getLogger("sdforest")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _label_col(text: str):
    if text in ("last", "none"):
        return text
    try:
        return int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'last', 'none' or a column index, got {text!r}")


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _common() -> argparse.ArgumentParser:
    # defaults are suppressed so flags given before or after the subcommand both work
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="root random seed")
    p.add_argument("--config", default=argparse.SUPPRESS, help="JSON config file")
    p.add_argument("--quiet", action="store_true", default=argparse.SUPPRESS,
                   help="suppress progress output")
    return p


def _data_args(p):
    p.add_argument("--label-col", type=_label_col, default="last",
                   help="label column: zero-based index, 'last' or 'none' (default last)")
    p.add_argument("--header", action="store_true", help="first CSV row is a header")


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = _Parser(prog="sdforest", parents=[common],
                     description="Weighted deep-forest metric learning on example pairs.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("pairs", parents=[common], help="generate a labelled pair file")
    p.add_argument("--input", required=True, help="samples CSV with a label column")
    _data_args(p)
    p.add_argument("--n", type=int, required=True, help="number of pairs")
    p.add_argument("--balance", type=float, default=0.5, help="fraction of similar pairs")
    p.add_argument("--out", required=True, help="output pair CSV")

    p = sub.add_parser("train", parents=[common], help="train a cascade on a pair file")
    p.add_argument("--samples", required=True, help="samples CSV")
    _data_args(p)
    p.add_argument("--pairs", required=True, help="pair CSV (header i,j,y)")
    p.add_argument("--out", required=True, help="output model file")
    p.add_argument("--baseline", action="store_true", help="keep uniform tree weights")
    p.add_argument("--lambda", dest="lam", type=float, help="ridge strength (overrides config)")
    p.add_argument("--trees", type=int, help="trees per forest (overrides config)")
    p.add_argument("--log", help="write the training log here instead of stderr")

    p = sub.add_parser("predict", parents=[common], help="score pairs with a trained model")
    p.add_argument("--model", required=True)
    p.add_argument("--samples", required=True)
    _data_args(p)
    p.add_argument("--pairs", required=True)
    p.add_argument("--tau", type=float, default=0.0, help="decision threshold (default 0)")
    p.add_argument("--out", help="output CSV (default stdout)")

    p = sub.add_parser("experiment", parents=[common],
                       help="repeated train/test comparison of weighted and uniform cascades")
    p.add_argument("--dataset", required=True, help="labelled samples CSV")
    _data_args(p)
    p.add_argument("--T", type=_int_list, default=[100], help="trees per forest, comma list")
    p.add_argument("--N", type=_int_list, default=[100, 500, 1000, 2000],
                   help="training pair counts, comma list")
    p.add_argument("--repetitions", type=int, default=20)
    p.add_argument("--lambda", dest="lam", type=_float_list, default=[0.01],
                   help="ridge strengths; the best mean per cell is reported")
    p.add_argument("--mode", choices=["gcf", "sdf", "both"], default="both")
    p.add_argument("--tau", type=float, default=0.0)
    p.add_argument("--balance", type=float, default=0.5)
    p.add_argument("--out", help="write the JSON report here")
    p.add_argument("--timings", action="store_true", help="include wall-clock runtime in the JSON")
    return parser


def _read_config(path) -> dict:
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise DataError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    return cfg


def _emit(args, msg: str, stream=None) -> None:
    if not args.quiet:
        print(msg, file=stream or sys.stderr)


def cmd_pairs(args) -> int:
    ds = load_csv(args.input, args.label_col, args.header)
    pd = generate_pairs(ds, args.n, args.balance, args.seed)
    save_pairs(pd, args.out)
    _emit(args, f"wrote {len(pd)} pairs ({len(pd.similar)} similar) to {args.out}")
    return 0


def _training_log(model) -> list[str]:
    meta = model.metadata
    lines = [f"levels kept: {len(model.levels)}"]
    for q, acc in enumerate(meta["validation_trace"], start=1):
        shown = "n/a" if acc is None else f"{acc:.4f}"
        lines.append(f"level {q}: validation accuracy {shown}")
    for e in meta["qp"]:
        lines.append(f"level {e['level']} slot {e['slot']} fold {e['fold']}: "
                     f"objective uniform {e['objective_uniform']:.6g} -> "
                     f"final {e['objective_final']:.6g} ({e['iterations']} iterations)")
    return lines


def cmd_train(args) -> int:
    raw = _read_config(args.config)
    cfg = CascadeConfig.from_dict(raw, seed=args.seed if args.seed_given else None,
                                  trees_per_forest=args.trees)
    if args.lam is not None:
        cfg = replace(cfg, qp=replace(cfg.qp, lam=args.lam))
    if args.baseline:
        cfg = replace(cfg, baseline=True)
    ds = load_csv(args.samples, args.label_col, args.header)
    pairs = load_pairs(args.pairs, ds)
    model = train_cascade(pairs, cfg)
    save_model(model, args.out)
    lines = _training_log(model)
    if args.log:
        try:
            with open(args.log, "w", encoding="utf-8") as fh:
                fh.write("\n".join(lines) + "\n")
        except OSError as exc:
            raise DataError(f"cannot write log {args.log}: {exc}") from exc
    else:
        for line in lines:
            _emit(args, line)
    _emit(args, f"model written to {args.out}")
    return 0


def cmd_predict(args) -> int:
    model = load_model(args.model)
    ds = load_csv(args.samples, args.label_col, args.header)
    if ds.d != model.d:
        raise DataError(f"model expects {model.d} features per sample, {args.samples} has {ds.d}")
    pairs = load_pairs(args.pairs, ds)
    verdicts = predict_batch(model, pairs, tau=args.tau)
    lines = ["i,j,diff,label"]
    lines += [f"{int(a)},{int(b)},{v.diff!r},{v.label}"
              for a, b, v in zip(pairs.i, pairs.j, verdicts)]
    text = "\n".join(lines) + "\n"
    if args.out:
        try:
            with open(args.out, "w", encoding="utf-8") as fh:
                fh.write(text)
        except OSError as exc:
            raise DataError(f"cannot write {args.out}: {exc}") from exc
    else:
        sys.stdout.write(text)
    return 0


def cmd_experiment(args) -> int:
    overrides = _read_config(args.config)
    spec = ExperimentSpec(args.dataset, tuple(args.T), tuple(args.N), args.repetitions,
                          args.seed, tuple(args.lam), args.mode, args.tau, args.balance,
                          overrides)
    ds = load_csv(args.dataset, args.label_col, args.header)
    progress = None if args.quiet else (lambda msg: print(msg, file=sys.stderr))
    report = run_experiment(spec, ds, progress=progress)
    print(report.table())
    if args.out:
        try:
            with open(args.out, "w", encoding="utf-8") as fh:
                fh.write(report.to_json(args.timings))
        except OSError as exc:
            raise DataError(f"cannot write {args.out}: {exc}") from exc
    return 0


COMMANDS = {"pairs": cmd_pairs, "train": cmd_train, "predict": cmd_predict,
            "experiment": cmd_experiment}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("sdforest: a subcommand is required "
                             "(pairs, train, predict, experiment)")
    except UsageError as exc:
        print(exc, file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 1
    args.seed_given = hasattr(args, "seed")
    for name, default in (("seed", 0), ("config", None), ("quiet", False)):
        if not hasattr(args, name):
            setattr(args, name, default)
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except SDFError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
