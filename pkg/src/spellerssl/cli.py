"""Command-line pipeline: synth -> pretrain -> finetune -> evaluate ->
report. Every subcommand serializes its resolved configuration next to
its outputs and, for a fixed seed, produces byte-identical artifacts.

Exit codes: 0 success, 2 configuration error, 3 data-integrity error,
4 numeric failure (non-finite training loss).
"""

import argparse
import csv
import json
import sys

import numpy as np

from .aggregation import blocks_from_epochs, build_training_set
from .data import (SynthConfig, apply_checkpoint, load_checkpoint, read_epb,
                   save_checkpoint, split_calibration, synth_generate, write_epb)
from .erphead import ErpHead, HeadConfig, finetune
from .errors import (CollationError, ConfigurationError, DataIntegrityError,
                     FormatError, LabelError, LoadError, NumericError, ShapeError,
                     SpellerError, StatisticsError)
from .metrics import MetricsReport
from .pipeline import evaluate_speller
from .preprocessing import MaskSpec
from .unet import UNet1d, UNetConfig, pretrain


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_config(output_path: str, args: argparse.Namespace):
    resolved = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    with open(f"{output_path}.config.json", "w") as fh:
        json.dump(resolved, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")


def _write_rows_csv(path: str, fieldnames, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(fieldnames)
        for row in rows:
            writer.writerow([_fmt(row[name]) for name in fieldnames])


def _report_fieldnames(reps: int):
    return (["pretraining", "G", "calibration"]
            + [f"crr_{i}" for i in range(1, reps + 1)]
            + ["acc", "b_f1", "fdr"]
            + [f"itr_{i}" for i in range(1, reps + 1)])


def report_row(report: MetricsReport) -> dict:
    row = {"pretraining": report.pretraining, "G": report.group_size,
           "calibration": report.calibration_fraction,
           "acc": report.accuracy, "b_f1": report.binary_f1, "fdr": report.fdr}
    for i, value in enumerate(report.crr_per_repetition, start=1):
        row[f"crr_{i}"] = float(value)
    for i, value in enumerate(report.itr_per_repetition, start=1):
        row[f"itr_{i}"] = float(value)
    return row


def write_metrics_csv(path: str, report: MetricsReport):
    _write_rows_csv(path, _report_fieldnames(report.crr_per_repetition.size),
                    [report_row(report)])


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_synth(args) -> int:
    config = SynthConfig(n_characters=args.characters, channels=args.channels,
                         n_repetitions=args.reps, p300_amplitude=args.amplitude,
                         noise_sigma=args.noise_sigma, seed=args.seed)
    epochs = synth_generate(config)
    write_epb(args.output, epochs)
    _write_config(args.output, args)
    print(f"wrote {epochs.n_trials} trials ({args.characters} characters x "
          f"{args.reps} repetitions x 12 stimuli) to {args.output}")
    return 0


def cmd_pretrain(args) -> int:
    epochs = read_epb(args.input)
    model = UNet1d(UNetConfig(in_channels=epochs.n_channels,
                              width_multiplier=args.width_mult), seed=args.seed)
    mask = MaskSpec(time_mask_ratio=args.mask_ratio, seed=args.seed)
    checkpoint, log = pretrain(model, epochs.data, epochs=args.epochs,
                               batch_size=args.batch, mask=mask, lam=getattr(args, "lambda"),
                               seed=args.seed + 1)
    save_checkpoint(args.output, checkpoint)
    _write_rows_csv(f"{args.output}.loss.csv",
                    ["epoch", "step", "lr", "time_loss", "freq_loss", "total"], log)
    _write_config(args.output, args)
    print(f"pretrained {args.epochs} epochs over {epochs.n_trials} trials; "
          f"final loss {log[-1]['total']:.6f}; checkpoint at {args.output}")
    return 0


def _build_models(args, n_channels: int):
    unet = UNet1d(UNetConfig(in_channels=n_channels, width_multiplier=args.width_mult),
                  seed=args.seed)
    head = ErpHead(HeadConfig(unet.cfg.bottleneck_channels, hidden_width=args.head_width),
                   seed=args.seed + 1)
    return unet, head


def cmd_finetune(args) -> int:
    epochs = read_epb(args.input)
    epochs = split_calibration(epochs, args.calibration)
    trainset = build_training_set(blocks_from_epochs(epochs), args.G)
    unet, head = _build_models(args, epochs.n_channels)
    checkpoint = load_checkpoint(args.from_checkpoint) if args.from_checkpoint else None
    result, log = finetune(unet, head, trainset, checkpoint=checkpoint,
                           epochs=args.epochs, batch_size=args.batch,
                           freeze_encoder=args.freeze_encoder, lr=args.lr,
                           seed=args.seed + 2)
    save_checkpoint(args.output, result)
    _write_rows_csv(f"{args.output}.train.csv", ["epoch", "step", "lr", "loss"], log)
    _write_config(args.output, args)
    print(f"fine-tuned on {trainset.n_trials} trials (G={args.G}, "
          f"calibration={args.calibration}); checkpoint at {args.output}")
    return 0


def cmd_evaluate(args) -> int:
    epochs = read_epb(args.input)
    unet, head = _build_models(args, epochs.n_channels)
    checkpoint = load_checkpoint(args.from_checkpoint)
    apply_checkpoint(unet, checkpoint, prefixes=("enc.", "bottleneck."))
    apply_checkpoint(head, checkpoint, prefixes=("head.",))
    report = evaluate_speller(unet, head, epochs, pretraining=args.pretraining,
                              group_size=args.G, calibration_fraction=args.calibration)
    write_metrics_csv(args.output, report)
    _write_config(args.output, args)
    crr = report.crr_per_repetition
    print(f"evaluated {epochs.n_characters} characters: CRR@1 {crr[0]:.1f}%, "
          f"CRR@{crr.size} {crr[-1]:.1f}%, acc {report.accuracy:.2f}%, "
          f"F1 {report.binary_f1:.4f}, FDR {report.fdr:.4f}")
    return 0


def cmd_report(args) -> int:
    rows = []
    keys = set()
    fieldnames = None
    for path in args.inputs:
        try:
            with open(path, newline="") as fh:
                reader = csv.DictReader(fh)
                file_rows = list(reader)
                names = reader.fieldnames
        except OSError as exc:
            raise CollationError(f"cannot read report input {path}: {exc}") from exc
        if not file_rows:
            raise CollationError(f"{path}: no report rows")
        if fieldnames is None:
            fieldnames = names
        elif names != fieldnames:
            raise CollationError(f"{path}: column mismatch with earlier inputs")
        for row in file_rows:
            key = (row["pretraining"], row["G"], row["calibration"])
            if key in keys:
                raise CollationError(f"duplicate report key {key} from {path}")
            keys.add(key)
            rows.append(row)
    rows.sort(key=lambda r: (r["pretraining"], float(r["G"]), float(r["calibration"])))
    for row in rows:
        for name in row:
            if name.startswith("crr_"):
                row[name] = int(round(float(row[name])))
    _write_rows_csv(args.output, fieldnames, rows)
    print(f"collated {len(rows)} runs into {args.output}")
    return 0


# ---------------------------------------------------------------------------
# argument parsing and exit-code mapping
# ---------------------------------------------------------------------------

def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spellerssl",
                                     description="P300 speller decoding pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic EPB dataset")
    p.add_argument("--output", required=True)
    p.add_argument("--characters", type=int, default=36)
    p.add_argument("--reps", type=int, default=15)
    p.add_argument("--channels", type=int, default=8)
    p.add_argument("--amplitude", type=float, default=1.0)
    p.add_argument("--noise-sigma", type=float, default=1.0)
    _add_common(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("pretrain", help="masked-reconstruction pretraining")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--batch", type=int, default=64)
    p.add_argument("--width-mult", type=float, default=1.0)
    p.add_argument("--mask-ratio", type=float, default=0.5)
    p.add_argument("--lambda", type=float, default=1.0)
    _add_common(p)
    p.set_defaults(func=cmd_pretrain)

    p = sub.add_parser("finetune", help="supervised fine-tuning on calibration data")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--from-checkpoint", default=None)
    p.add_argument("--G", type=int, default=1)
    p.add_argument("--calibration", type=float, default=1.0)
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--batch", type=int, default=64)
    p.add_argument("--width-mult", type=float, default=1.0)
    p.add_argument("--head-width", type=int, default=128)
    p.add_argument("--lr", type=float, default=1e-4)
    p.add_argument("--freeze-encoder", action="store_true")
    _add_common(p)
    p.set_defaults(func=cmd_finetune)

    p = sub.add_parser("evaluate", help="score a test set and emit metrics CSV")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--from-checkpoint", required=True)
    p.add_argument("--width-mult", type=float, default=1.0)
    p.add_argument("--head-width", type=int, default=128)
    p.add_argument("--pretraining", choices=("scratch", "checkpoint"), default="scratch")
    p.add_argument("--G", type=int, default=1)
    p.add_argument("--calibration", type=float, default=1.0)
    _add_common(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("report", help="merge evaluation CSVs into one table")
    p.add_argument("inputs", nargs="+")
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_report)

    return parser


def _exit_code(exc: Exception) -> int:
    if isinstance(exc, (FormatError, DataIntegrityError, LabelError, StatisticsError)):
        return 3
    if isinstance(exc, NumericError):
        return 4
    if isinstance(exc, (ConfigurationError, LoadError, ShapeError, SpellerError)):
        return 2
    raise exc


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SpellerError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _exit_code(exc)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
