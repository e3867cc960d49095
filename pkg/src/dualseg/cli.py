"""Command-line frontend.

Subcommands are thin wrappers over the module operations:

    dualseg gen-data <spec.json> <out_dir>
    dualseg pretrain <config.json>
    dualseg train <config.json>
    dualseg eval <checkpoint> <dataset> [--split SPLIT] [--out CSV]
    dualseg verify-prop1 <spec.json> [--out CSV]
    dualseg plot-log <train.csv> <out.png>

Exit codes: 0 success, 1 validation error (or a failed variance-suppression
check), 2 I/O or file-format error, 64 usage error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

from .errors import FormatError, ValidationError

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_IO = 2
EXIT_USAGE = 64


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would sys.exit(2); we want 64
        raise _UsageError(message)


def _load_json(path) -> dict:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ValidationError(f"{path} must hold a JSON object")
    return data


def _cmd_gen_data(args) -> int:
    from .synthdata import DatasetSpec, generate_dataset

    spec = DatasetSpec.from_dict(_load_json(args.spec))
    manifest = generate_dataset(spec, args.out_dir)
    print(
        f"wrote {len(manifest.ids)} samples to {args.out_dir} "
        f"({len(manifest.labeled_ids)} labeled, {len(manifest.unlabeled_ids)} unlabeled)"
    )
    return EXIT_OK


def _cmd_pretrain(args) -> int:
    from .trainer import load_config, pretrain

    cfg = load_config(args.config)
    ckpt = pretrain(cfg)
    print(f"pretrained checkpoint written to {ckpt}")
    return EXIT_OK


def _cmd_train(args) -> int:
    from .trainer import load_config, self_train

    cfg = load_config(args.config)
    init = Path(args.init) if args.init else Path(cfg.out_dir) / "pretrain"
    if not init.is_dir():
        raise ValidationError(f"no init checkpoint at {init}; run `dualseg pretrain` first or pass --init")
    result = self_train(cfg, init)
    print(f"teacher checkpoint written to {result.teacher_final}")
    if result.teacher_best is not None:
        print(f"best teacher (val dice {result.best_val_dice:.4f}) at {result.teacher_best}")
    print(f"training log written to {result.log_path}")
    return EXIT_OK


def _cmd_eval(args) -> int:
    from .trainer import evaluate

    out = args.out if args.out else Path(args.checkpoint) / f"eval_{args.split}.csv"
    records = evaluate(args.checkpoint, args.dataset, args.split, out_csv=out)
    dice = sum(r.dice for _, r in records) / len(records)
    print(f"evaluated {len(records)} cases, mean dice {dice:.4f}; report at {out}")
    return EXIT_OK


def _cmd_verify_prop1(args) -> int:
    from .theory import (
        NoiseModelSpec,
        check_suppression,
        simulate_deviation,
        write_suppression_csv,
    )

    raw = _load_json(args.spec)
    if "lambda" in raw:
        raw["lambda_"] = raw.pop("lambda")
    if "loss_params" in raw:
        raw["loss_params"] = tuple(raw["loss_params"])
    spec = NoiseModelSpec(**raw)
    res_std = simulate_deviation(spec, "standard_ema")
    res_la = simulate_deviation(spec, "la_ema")
    report = check_suppression(res_std, res_la)
    if args.out:
        write_suppression_csv(report, args.out)
        print(f"report written to {args.out}")
    shown = report.rows[: min(5, len(report.rows))]
    for r in shown:
        print(
            f"t={r.t:4d} ratio={r.ratio:.4f} (+/- {r.ratio_se:.4f}) "
            f"{'PASS' if r.passed else 'FAIL'} {r.note}"
        )
    if len(report.rows) > len(shown):
        print(f"... {len(report.rows) - len(shown)} more rows")
    n_pass = sum(r.passed for r in report.rows)
    print(f"{n_pass}/{len(report.rows)} iterations passed")
    return EXIT_OK if report.all_passed() else EXIT_VALIDATION


def _cmd_plot_log(args) -> int:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    from .trainer import read_train_log

    rows = read_train_log(args.log)
    pts = [(r.t, r.val_dice) for r in rows if not math.isnan(r.val_dice)]
    if not pts:
        raise ValidationError(f"{args.log} holds no validation entries to plot")
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o")
    ax.set_xlabel("iteration")
    ax.set_ylabel("teacher validation dice")
    ax.set_title("Teacher quality over self-training")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(args.out, dpi=120)
    plt.close(fig)
    print(f"plot written to {args.out}")
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="dualseg", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("gen-data", help="generate a synthetic dataset")
    p.add_argument("spec", help="dataset spec JSON")
    p.add_argument("out_dir", help="output directory")
    p.set_defaults(func=_cmd_gen_data)

    p = sub.add_parser("pretrain", help="supervised pre-training on the labeled split")
    p.add_argument("config", help="training config JSON")
    p.set_defaults(func=_cmd_pretrain)

    p = sub.add_parser("train", help="dual-student self-training")
    p.add_argument("config", help="training config JSON")
    p.add_argument("--init", help="init checkpoint (default: <out_dir>/pretrain)")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a dataset split")
    p.add_argument("checkpoint")
    p.add_argument("dataset")
    p.add_argument("--split", default="all", choices=("labeled", "unlabeled", "all"))
    p.add_argument("--out", help="report CSV path")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("verify-prop1", help="Monte Carlo check of EMA variance suppression")
    p.add_argument("spec", help="noise model spec JSON")
    p.add_argument("--out", help="report CSV path")
    p.set_defaults(func=_cmd_verify_prop1)

    p = sub.add_parser("plot-log", help="plot the teacher validation curve from a training log")
    p.add_argument("log", help="train_log.csv")
    p.add_argument("out", help="output PNG")
    p.set_defaults(func=_cmd_plot_log)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "func", None) is None:
            parser.print_usage(sys.stderr)
            return EXIT_USAGE
        return args.func(args)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (FormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
