"""Command line entry point: ``irsbeam run|validate|eta``."""
import argparse
import json
import logging
import math
import sys

from . import asymptotics, harness
from .errors import BudgetExceeded, ConfigError

EXIT_OK, EXIT_CONFIG, EXIT_BUDGET, EXIT_IO = 0, 2, 3, 4


def _parser():
    p = argparse.ArgumentParser(prog="irsbeam", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run an experiment and write a CSV table")
    src = r.add_mutually_exclusive_group(required=True)
    src.add_argument("--config", help="JSON configuration file")
    src.add_argument("--preset", choices=sorted(harness.PRESETS))
    r.add_argument("--seed", type=int)
    r.add_argument("--trials", type=int)
    r.add_argument("--out", help="CSV output path (manifest goes next to it)")
    r.add_argument("--raw", help="optional per-trial CSV dump")
    r.add_argument("--workers", type=int)

    v = sub.add_parser("validate", help="check a configuration file")
    v.add_argument("--config", required=True)

    e = sub.add_parser("eta", help="asymptotic power ratio of b-bit phase shifts")
    e.add_argument("--bits", required=True, help="positive integer or 'inf'")
    return p


def _bits(text):
    if text.strip().lower() in ("inf", "infinity"):
        return math.inf
    try:
        b = int(text)
    except ValueError:
        raise ConfigError("bits", f"expected a positive integer or 'inf', got {text!r}") from None
    if b < 1:
        raise ConfigError("bits", "bits must be >= 1")
    return b


def _run(args):
    overrides = {"seed": args.seed, "trials": args.trials, "output": args.out,
                 "raw_output": args.raw, "workers": args.workers}
    if args.preset:
        cfg = harness.preset(args.preset, **overrides)
    else:
        cfg = harness.load_config(args.config, **overrides)
    rows, records, manifest = harness.run(cfg, workers=cfg["workers"])
    out = cfg["output"]
    harness.emit_csv(rows, out)
    harness.emit_manifest(manifest, harness.manifest_path(out))
    if cfg.get("raw_output"):
        harness.emit_raw(records, cfg["raw_output"])
    print(f"wrote {len(rows)} rows to {out}")


def main(argv=None):
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "run":
            _run(args)
        elif args.command == "validate":
            cfg = harness.load_config(args.config)
            print(json.dumps({"valid": True, "scenario": cfg["scenario"]}))
        elif args.command == "eta":
            b = _bits(args.bits)
            print(f"eta({args.bits}) = {asymptotics.eta(b)!r} ({asymptotics.eta_db(b):.4f} dB)")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BudgetExceeded as exc:
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
