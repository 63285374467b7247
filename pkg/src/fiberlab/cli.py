"""Command line entry point.

    fiberlab bench build --config bench.json --out out/ [--expose-ground-truth]
    fiberlab calibrate   --config campaign.json --out out/
    fiberlab synthesize  --config campaign.json --out out/
    fiberlab campaign    --config campaign.json --seed 7 --out out/
    fiberlab stability   --config campaign.json --out out/
    fiberlab report      --config out/report.json --out out/

Failures exit with status 2 and a JSON object ``{"error": code, "message": ...}`` on stderr.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import benchlab
from .bench import BenchConfig, build_device, export_device
from .errors import FiberLabError, InvalidConfig
from .fieldcore import CircuitSpec, matrix_from_json
from .synthesis import SynthesisObjective, implement_circuit

log = logging.getLogger("fiberlab")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _fail(code: str, message: str) -> int:
    sys.stderr.write(json.dumps({"error": code, "message": message}, sort_keys=True) + "\n")
    return 2


def _read_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InvalidConfig(f"cannot read {path}: {exc}") from exc


def _campaign_config(args) -> benchlab.CampaignConfig:
    data = _read_json(args.config)
    data.pop("target", None)  # synthesize-only key
    if "bench" not in data and "n_fiber_modes" in data:
        data = {"bench": data}
    config = benchlab.CampaignConfig.from_dict(data)
    if args.seed is not None:
        config = config.with_seed(args.seed)
    return config


def _write(out: Path, name: str, text: str):
    out.mkdir(parents=True, exist_ok=True)
    (out / name).write_text(text)


def cmd_bench_build(args):
    if args.expose_ground_truth:
        log.warning("--expose-ground-truth: the hidden transfer matrix is written to disk; "
                    "use for oracle tests only")
    data = _read_json(args.config)
    bench = BenchConfig.from_dict(data.get("bench", data))
    if args.seed is not None:
        bench = replace(bench, seed=args.seed)
    device = build_device(bench)
    state = export_device(device, expose_ground_truth=args.expose_ground_truth)
    _write(args.out, "device.json", benchlab.dumps(state))


def cmd_calibrate(args):
    config = _campaign_config(args)
    n = config.configurations[0][0] if config.configurations else config.bench.n_inputs
    _, est = benchlab.calibrated_device(config, n)
    _write(args.out, "estimated_tm.json", benchlab.dumps(est.to_json()))


def cmd_synthesize(args):
    config = _campaign_config(args)
    raw = _read_json(args.config)
    n, m = config.configurations[0]
    if "target" in raw:
        target = matrix_from_json(raw["target"])
        spec = CircuitSpec(target, label="target")
        m = spec.shape[1]
        config = replace(config, configurations=((n, m),))
        seed = config.seed
    else:
        seed = benchlab.circuit_seed(config.seed, n, m, 0)
        spec = CircuitSpec.haar(m, seed, label=f"haar-{n}x{m}-0")
    device, est = benchlab.calibrated_device(config, n)
    measured = implement_circuit(device, est, spec, SynthesisObjective(config.objective, config.alpha),
                                 config.de.params(seed), seed)
    record = benchlab.circuit_record(0, seed, spec, measured)
    out = {"schema_version": benchlab.SCHEMA_VERSION, "target": spec.to_json(),
           "measured": measured.to_json(), "summary": record, "config": config.to_dict()}
    _write(args.out, "measured_circuit.json", benchlab.dumps(out))


def cmd_campaign(args):
    config = _campaign_config(args)
    report = benchlab.run_campaign(config)
    _write(args.out, "report.json", benchlab.dumps(report))
    _write(args.out, "circuits.csv", benchlab.circuits_csv(report))


def cmd_stability(args):
    config = _campaign_config(args)
    if config.stability is None:
        config = replace(config, stability=benchlab.StabilitySettings())
    report = benchlab.run_stability(config)
    _write(args.out, "stability.json", benchlab.dumps(report))
    _write(args.out, "stability.csv", benchlab.stability_csv(report))


def cmd_report(args):
    report = _read_json(args.config)
    if report.get("kind") != "campaign":
        raise InvalidConfig("report expects a campaign report.json")
    rows = benchlab.loss_report(report)
    _write(args.out, "loss_report.json", benchlab.dumps({"schema_version": benchlab.SCHEMA_VERSION,
                                                         "loss_report": rows}))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n", "m", "loss_db", "loss_db_antireflection", "difference_db"])
    for r in rows:
        w.writerow([r["n"], r["m"], repr(r["loss_db"]), repr(r["loss_db_antireflection"]),
                    repr(r["difference_db"])])
    _write(args.out, "loss_report.csv", buf.getvalue())


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", required=True, type=Path)
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--out", type=Path, default=Path("."))
    common.add_argument("--expose-ground-truth", action="store_true",
                        help="write the hidden transfer matrix (oracle tests only)")

    parser = _Parser(prog="fiberlab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    bench = sub.add_parser("bench", help="virtual bench utilities")
    bench_sub = bench.add_subparsers(dest="bench_command", required=True, parser_class=_Parser)
    bench_sub.add_parser("build", parents=[common]).set_defaults(func=cmd_bench_build)
    for name, func in (("calibrate", cmd_calibrate), ("synthesize", cmd_synthesize),
                       ("campaign", cmd_campaign), ("stability", cmd_stability),
                       ("report", cmd_report)):
        sub.add_parser(name, parents=[common]).set_defaults(func=func)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        return _fail("usage", str(exc))
    try:
        args.func(args)
    except FiberLabError as exc:
        return _fail(exc.code, str(exc))
    return 0
