"""Command-line front end.

Exit codes: 0 success (and, for ``detect``, M consistent with zero), 1 error
detected, 2 invalid config or input file, 3 degenerate preparations or a
degenerate calibration fit.
"""

import argparse
import sys

from . import pipeline
from .config import ExperimentConfig, load_config
from .errors import ConfigError, FitDegenerate, SingularMatrix

EXIT_OK = 0
EXIT_DETECTED = 1
EXIT_INVALID = 2
EXIT_DEGENERATE = 3


def _common(p):
    p.add_argument("--config", help="experiment config JSON (defaults if omitted)")
    p.add_argument("--out", help="output directory (overrides config out_dir)")
    p.add_argument("--seed", type=int, help="override the config seed")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="tfqkd-spam",
        description="Simulate twin-field QKD runs and test for correlated SPAM errors.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run the three-party experiment")
    _common(p)
    p.add_argument("--workers", type=int, help="parallel worker processes")

    p = sub.add_parser("detect", help="analyse an ensemble file")
    _common(p)
    p.add_argument("--ensemble", required=True, help="ensemble JSON from simulate")

    p = sub.add_parser("predict", help="noise-free M and its expected spread")
    _common(p)

    p = sub.add_parser("calibrate", help="phase-scan calibration fits")
    _common(p)
    p.add_argument("--noiseless", action="store_true", help="exact scans, no jitter")

    p = sub.add_parser("init-config", help="write the default config")
    p.add_argument("path")
    return parser


def _config(args):
    config = load_config(args.config)
    updates = {}
    if args.seed is not None:
        updates["seed"] = args.seed
    if getattr(args, "noiseless", False):
        updates["calibration_noiseless"] = True
    if updates:
        config = type(config).model_validate({**config.model_dump(), **updates})
    return config


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "init-config":
            with open(args.path, "w") as fh:
                fh.write(ExperimentConfig().to_json())
            return EXIT_OK
        config = _config(args)
        out = args.out or config.out_dir
        if args.command == "simulate":
            results = pipeline.simulate(config, out, workers=args.workers)
            flags = [f for r in results for f in r.flags]
            for f in flags:
                print(f"warning: {f}", file=sys.stderr)
            print(f"wrote {len(results)} trials to {out}")
            return EXIT_OK
        if args.command == "detect":
            report = pipeline.detect(args.ensemble, config, out)
            print(f"min_p = {report.min_p:.3g}")
            print(f"verdict: {report.verdict}")
            return EXIT_DETECTED if report.detected else EXIT_OK
        if args.command == "predict":
            M_th, dM_th = pipeline.predict(config, out)
            print(f"max |M_th| = {abs(M_th).max():.3g}, max dM_th = {dM_th.max():.3g}")
            return EXIT_OK
        if args.command == "calibrate":
            result = pipeline.calibrate(config, out)
            for c in result.curves:
                print(f"bob phase {c.bob_phase:.4f}: recovered {c.recovered_bob_phase:.4f}, "
                      f"fit phase std {c.phase_std:.4f} rad")
            print(f"pooled phase std = {result.pooled_phase_std:.4f} rad")
            return EXIT_OK
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (SingularMatrix, FitDegenerate) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
