"""Command line for the dataset converters."""

import argparse
import sys

from . import ConversionError, RetryableFetchError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spellerssl-convert",
                                     description="Convert public EEG datasets to EPB files")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bci3", help="BCI Competition III-II MATLAB session files")
    p.add_argument("--train", required=True, help="calibration session .mat")
    p.add_argument("--test", required=True, help="test session .mat")
    p.add_argument("--test-labels", required=True,
                   help="published true character string for the test session")
    p.add_argument("--out-dir", required=True)

    p = sub.add_parser("physionet", help="PhysionetMI via MOABB (cross-domain pretraining)")
    p.add_argument("--subjects", type=int, nargs="+", required=True)
    p.add_argument("--output", required=True)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "bci3":
            from .bci3 import convert_bci3
            manifest = convert_bci3(args.train, args.test, args.out_dir,
                                    test_target_chars=args.test_labels)
        else:
            from .physionet import convert_physionet
            manifest = convert_physionet(args.subjects, args.output)
    except RetryableFetchError as exc:
        print(f"fetch error (retryable): {exc}", file=sys.stderr)
        return 4
    except (ConversionError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for out in manifest.outputs:
        print(f"{out.path}: {out.n_trials} trials, sha256 {out.sha256[:16]}...")
    return 0


if __name__ == "__main__":
    sys.exit(main())
