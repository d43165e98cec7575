"""Command-line entry point.

Exit codes: 0 success, 2 bad usage or configuration, 3 unreadable or invalid
input data, 4 pipeline failure, 5 output directory not writable.
"""
import argparse
import json
import logging
import sys
from pathlib import Path

import yaml

from .config import ConfigError, benchmark_config, config_from_dict, dump_config
from .data import DataError, SyntheticProfile, generate_synthetic, write_csv
from .experiment import (
    OutputError,
    PipelineError,
    build_scenarios,
    emit_reports,
    ensure_writable,
    load_results,
    load_scenarios,
    run_experiment_matrix,
)
from .seeding import derive_int

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_PIPELINE = 4
EXIT_OUTPUT = 5

logger = logging.getLogger("evshield")


def _add_common(p, config_required=True):
    p.add_argument("-c", "--config", required=config_required, help="experiment YAML file")
    p.add_argument("-o", "--output", help="output directory (overrides output_dir)")
    p.add_argument("--seed", type=int, help="master seed (overrides seed)")
    p.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                   help="override any config entry, e.g. --set federation.rounds=2")


def build_parser():
    parser = argparse.ArgumentParser(prog="evshield", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="write synthetic client series as CSV")
    _add_common(gen, config_required=False)
    gen.add_argument("--benchmark", action="store_true",
                     help="use the three-client synthetic benchmark instead of --config")

    scen = sub.add_parser("build-scenarios", help="build and persist clean/attacked/filtered scenarios")
    _add_common(scen)

    run = sub.add_parser("run", help="build scenarios, train the four arms, write reports")
    _add_common(run)
    run.add_argument("--scenarios", help="reuse scenarios persisted under this directory")

    rep = sub.add_parser("report", help="re-emit report tables from a results.json")
    rep.add_argument("results", help="path to results.json")
    rep.add_argument("-o", "--output", required=True)
    return parser


def _parse_value(text):
    return yaml.safe_load(text)


def resolve_config(args):
    if args.config:
        with open(args.config) as fh:
            raw = yaml.safe_load(fh) or {}
    elif getattr(args, "benchmark", False):
        raw = benchmark_config().to_dict()
    else:
        raise ConfigError("a --config file is required")
    for item in args.set:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects SECTION.KEY=VALUE, got {item!r}")
        *path, leaf = key.split(".")
        node = raw
        for part in path:
            node = node.setdefault(part, {})
        node[leaf] = _parse_value(value)
    if args.seed is not None:
        raw["seed"] = args.seed
    if args.output:
        raw["output_dir"] = args.output
    config = config_from_dict(raw)
    # relative CSV paths are read relative to the config file
    if args.config:
        base = Path(args.config).resolve().parent
        clients = tuple(
            c if c.csv is None or Path(c.csv).is_absolute() else type(c)(c.id, str(base / c.csv), None)
            for c in config.clients
        )
        config = config.with_overrides(clients=clients)
    return config


def cmd_generate(args):
    config = resolve_config(args)
    out = ensure_writable(Path(config.output_dir) / "data")
    for client in config.clients:
        if client.synthetic is None:
            continue
        profile = dict(client.synthetic)
        profile.setdefault("seed", derive_int(config.seed, "data", client.id))
        series = generate_synthetic(SyntheticProfile(client_id=client.id, **profile))
        path = out / f"{client.id}.csv"
        write_csv(path, series)
        print(path)
    return EXIT_OK


def cmd_build_scenarios(args):
    config = resolve_config(args)
    out = ensure_writable(config.output_dir)
    dump_config(config, out / "config.resolved.yaml")
    bundle = build_scenarios(config, out)
    for sc in bundle:
        print(f"{sc.client_id}: {len(sc.clean)} steps, {int(sc.truth_mask.sum())} attacked, "
              f"{int(sc.predicted_mask.sum())} flagged, {len(sc.segments)} segments interpolated")
    return EXIT_OK


def cmd_run(args):
    config = resolve_config(args)
    out = ensure_writable(config.output_dir)
    dump_config(config, out / "config.resolved.yaml")
    bundle = load_scenarios(args.scenarios) if args.scenarios else build_scenarios(config, out)
    results = run_experiment_matrix(bundle, config)
    emit_reports(results, out)
    print(json.dumps({a.name: a.mean_r2() for a in results.arms}, indent=2))
    print(f"reports written to {out}")
    return EXIT_OK


def cmd_report(args):
    results = load_results(args.results)
    for name in emit_reports(results, args.output):
        print(Path(args.output) / name)
    return EXIT_OK


COMMANDS = {
    "generate": cmd_generate,
    "build-scenarios": cmd_build_scenarios,
    "run": cmd_run,
    "report": cmd_report,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OutputError as exc:
        print(f"output error: {exc}", file=sys.stderr)
        return EXIT_OUTPUT
    except PipelineError as exc:
        code = EXIT_DATA if exc.stage == "load" else EXIT_PIPELINE
        print(f"pipeline error: {exc}", file=sys.stderr)
        return code
    except (DataError, FileNotFoundError, json.JSONDecodeError, yaml.YAMLError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
