"""Command-line entry point: ``hedgehog-lab <experiment> [flags]``.

Flags are generated from the experiment parameter table in
:mod:`hedgehog_lab.runner`; list-valued parameters take comma-separated
values.  ``--config FILE`` replaces the flags entirely.  Exit codes: 0 pass
or warn, 1 any failed check, 2 usage or validation error.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import __version__
from .errors import ConfigError, LabError, PartialRunError
from .runner import OUT_ENV, PARAMS, dump_json, load_config, output_root, run, suite

EXIT_PASS, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def _flag_type(spec):
    t = spec.get("type")
    if t == "array":
        item = spec.get("items", {}).get("type")
        conv = int if item == "integer" else str
        return lambda s: [conv(v.strip()) for v in s.split(",") if v.strip()]
    if t == "integer":
        return int
    if isinstance(t, list) and "integer" in t:
        return lambda s: None if s.lower() == "none" else int(s)
    if isinstance(t, list) and "null" in t:
        return lambda s: None if s.lower() == "none" else s
    return str


def build_parser():
    parser = argparse.ArgumentParser(prog="hedgehog-lab",
                                     description="Small-divisor dynamics laboratory.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="kind", required=True)
    for kind, table in PARAMS.items():
        p = sub.add_parser(kind, help=f"run the {kind} experiment")
        for name, (spec, default) in table.items():
            shown = ",".join(map(str, default)) if isinstance(default, list) else default
            flags = [f"--{name.replace('_', '-')}"]
            if name in ("levels", "checks"):
                flags.append(f"--{name[:-1]}")
            if spec.get("type") == "boolean":
                p.add_argument(*flags, dest=name, type=lambda s: s.lower() in ("1", "true", "yes"),
                               default=None, help=f"true/false, default: {shown}")
                continue
            p.add_argument(*flags, dest=name, type=_flag_type(spec),
                           default=None, help=f"default: {shown}")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--config", help="JSON config file; overrides all flags")
        p.add_argument("--out", help=f"output root (default ${OUT_ENV} or ./runs)")
    s = sub.add_parser("suite", help="run a list of config files and aggregate")
    s.add_argument("configs", nargs="*", help="config JSON files")
    s.add_argument("--out", help=f"output root (default ${OUT_ENV} or ./runs)")
    return parser


def _config_from_args(args):
    if args.config:
        return load_config(args.config)
    params = {k: getattr(args, k) for k in PARAMS[args.kind] if getattr(args, k) is not None}
    return {"kind": args.kind, "seed": args.seed, "params": params}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.kind == "suite":
            agg, code = suite(args.configs, args.out)
            root = output_root(args.out)
            root.mkdir(parents=True, exist_ok=True)
            (root / "suite.json").write_text(dump_json(agg), encoding="ascii")
            sys.stdout.write(dump_json(agg))
            return code
        manifest = run(_config_from_args(args), args.out)
    except ConfigError as exc:
        print(f"error: {exc} (at {exc.path})", file=sys.stderr)
        return EXIT_USAGE
    except PartialRunError as exc:
        print(f"error: {exc}; partial artifacts in {exc.path}", file=sys.stderr)
        return EXIT_FAIL
    except LabError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL
    print(json.dumps({"path": manifest.path, "overall": manifest.overall,
                      "statuses": manifest.statuses}, indent=2, sort_keys=True))
    return EXIT_FAIL if manifest.overall == "fail" else EXIT_PASS


if __name__ == "__main__":
    sys.exit(main())
