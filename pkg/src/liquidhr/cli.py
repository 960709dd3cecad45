"""Command-line interface for the heart-rate estimation pipeline.

Stages run individually (synth / encode / train / estimate / qrs / eval) or
end to end (run). Every subcommand shares the config flags: `--config` for a
key=value file, `--set key=value` (repeatable) for overrides, `--seed` for
the master seed, and `--out` for the artifact directory. Log verbosity comes
from the LIQUIDHR_LOG environment variable (DEBUG/INFO/WARNING/ERROR).
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

from liquidhr import ecg
from liquidhr.config import load_config, parse_overrides
from liquidhr.pipeline import (
    StageError,
    run_pipeline,
    stage_encode,
    stage_estimate,
    stage_eval,
    stage_qrs,
    stage_synth,
    stage_train,
)

EXIT_OK = 0
EXIT_STAGE_ERROR = 1
EXIT_CONFIG_ERROR = 2


def _common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="key=value config file")
    parser.add_argument("--seed", type=int, help="master seed override")
    parser.add_argument("--set", dest="overrides", action="append", default=[],
                        metavar="KEY=VALUE", help="config override (repeatable)")
    parser.add_argument("--out", default=".", help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="liquidhr", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic ECG record with annotations")
    _common_flags(p)
    p.add_argument("--bpm", type=float, default=72.0)
    p.add_argument("--duration", type=float, default=360.0, help="seconds")
    p.add_argument("--fs", type=float, default=256.0)
    p.add_argument("--noise-std", type=float, default=0.03, help="mV")
    p.add_argument("--drift", type=float, default=0.1, help="baseline drift amplitude, mV")

    p = sub.add_parser("encode", help="encode an ECG record into a spike train")
    _common_flags(p)
    p.add_argument("--record", required=True, help="voltage-per-line CSV")

    p = sub.add_parser("train", help="train the liquid and fit the readout")
    _common_flags(p)
    p.add_argument("--spikes", required=True, help="spike-train CSV from encode")

    p = sub.add_parser("estimate", help="estimate heart rate for every post-training window")
    _common_flags(p)
    p.add_argument("--spikes", required=True)
    p.add_argument("--weights", required=True, help="weights.csv from train")
    p.add_argument("--model", required=True, help="model.json from train")

    p = sub.add_parser("qrs", help="extract detected QRS event times")
    _common_flags(p)
    p.add_argument("--results", required=True, help="results.jsonl from estimate")

    p = sub.add_parser("eval", help="score results against golden annotations")
    _common_flags(p)
    p.add_argument("--results", required=True)
    p.add_argument("--annotations", required=True)

    p = sub.add_parser("run", help="run the full pipeline on one record")
    _common_flags(p)
    p.add_argument("--record", required=True)
    p.add_argument("--annotations", help="optional golden R-peak times for scoring")

    return parser


def _configure_logging() -> None:
    level = os.environ.get("LIQUIDHR_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def main(argv: list[str] | None = None) -> int:
    _configure_logging()
    args = build_parser().parse_args(argv)

    try:
        cfg = load_config(args.config, overrides=parse_overrides(args.overrides), seed=args.seed)
    except (OSError, ValueError, KeyError) as exc:
        print(f"[config] {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR

    try:
        if args.command == "synth":
            synth_cfg = ecg.SynthConfig(bpm=args.bpm, duration_s=args.duration, fs=args.fs,
                                        noise_std=args.noise_std, baseline_drift_amp=args.drift,
                                        seed=cfg.seed)
            record_path, ann_path = stage_synth(synth_cfg, args.out)
            print(f"wrote {record_path} and {ann_path}")
        elif args.command == "encode":
            spikes_path, density = stage_encode(cfg, args.record, args.out)
            print(f"wrote {spikes_path}")
            print(f"data density: {density:.2f} bits/spike")
        elif args.command == "train":
            weights_path, model_path = stage_train(cfg, args.spikes, args.out)
            print(f"wrote {weights_path} and {model_path}")
        elif args.command == "estimate":
            results_path = stage_estimate(cfg, args.spikes, args.weights, args.model, args.out)
            print(f"wrote {results_path}")
        elif args.command == "qrs":
            qrs_path = stage_qrs(args.results, args.out)
            print(f"wrote {qrs_path}")
        elif args.command == "eval":
            report_path, hist_path = stage_eval(cfg, args.results, args.annotations, args.out)
            print(f"wrote {report_path} and {hist_path}")
        elif args.command == "run":
            result = run_pipeline(cfg, args.record, args.out, annotations_path=args.annotations)
            print(f"wrote {result.results_path}")
            print(f"data density: {result.data_density:.2f} bits/spike")
            print(f"mean excitatory rate: {result.diagnostics['mean_excitatory_rate_hz']:.1f} Hz")
            if result.report_path is not None:
                print(f"wrote {result.report_path}")
    except StageError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_CONFIG_ERROR if exc.stage == "config" else EXIT_STAGE_ERROR
    except (OSError, ValueError) as exc:
        print(f"[{args.command}] {exc}", file=sys.stderr)
        return EXIT_STAGE_ERROR
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
