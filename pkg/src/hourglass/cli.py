"""Command-line entry point.

Exit codes: 0 success, 2 bad input (config, trace, arguments), 3 protocol or
invariant failure (including oracle divergence and golden mismatch), 4 latency
bound violation.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import warnings
from pathlib import Path

from . import analysis, workloads
from .core import CacheGeometry, ConfigError, ProtocolViolation, SimConfig
from .engine import MUTATIONS, Simulator, bus_log_lines
from .trace import AlignmentWarning, format_trace, parse_trace

EXIT_OK, EXIT_INPUT, EXIT_PROTOCOL, EXIT_BOUND = 0, 2, 3, 4
log = logging.getLogger("hourglass")


def _load_config(path, seed=None) -> SimConfig:
    config = SimConfig() if path is None else SimConfig.from_json(Path(path).read_text())
    if seed is not None:
        config = config.replace(seed=seed)
    return config


def _emit(text: str, out) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _mutations(values) -> tuple:
    muts = []
    for v in values or ():
        muts.extend(x for x in v.split(",") if x)
    bad = [m for m in muts if m not in MUTATIONS]
    if bad:
        raise ConfigError(f"unknown mutation(s) {bad}; choose from {', '.join(MUTATIONS)}")
    return tuple(muts)


def cmd_run(args) -> int:
    config = _load_config(args.config, args.seed)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", AlignmentWarning)
        trace = parse_trace(Path(args.trace).read_text(), n_cores=config.n_cores,
                            line_bytes=config.cache_geometry.line_bytes)
    for w in caught:
        log.warning("%s", w.message)
    sim = Simulator(config, trace, mutations=_mutations(args.mutate), bus_log=bool(args.bus_log))
    try:
        report = sim.run()
    except ProtocolViolation as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        if args.bus_log:
            Path(args.bus_log).write_text("".join(json.dumps(e, sort_keys=True) + "\n" for e in sim.bus_log))
        print(json.dumps({"error": type(exc).__name__, "message": str(exc), "state": sim.dump_state(),
                          "trace_prefix": format_trace(trace)}, indent=2))
        return EXIT_PROTOCOL
    doc = report.to_dict()
    code = EXIT_OK
    if not report.oracle_pass:
        code = EXIT_PROTOCOL
    if args.check_bounds:
        verdict = analysis.check_bounds(report, analysis.wcl_total(config))
        doc["bounds"] = verdict.to_dict()
        if not verdict.passed and code == EXIT_OK:
            code = EXIT_BOUND
    if args.bus_log:
        Path(args.bus_log).write_text(bus_log_lines(report))
    _emit(json.dumps(doc, indent=2, sort_keys=True) + "\n", args.out)
    return code


def cmd_gen(args) -> int:
    config = _load_config(args.config, args.seed)
    seed = config.seed
    if args.generator == "max-sharing":
        trace = workloads.gen_max_sharing(args.n_cores or config.n_cores, args.n_lines, args.ops_per_core,
                                          args.store_ratio, seed, line_bytes=config.cache_geometry.line_bytes)
    elif args.generator == "critical-instance":
        trace = workloads.gen_critical_instance(config)
    else:
        trace = workloads.gen_reuse_locality(args.n_cores or config.n_cores, args.reuse_window, seed,
                                             n_cr=config.n_cr, line_bytes=config.cache_geometry.line_bytes)
    _emit(format_trace(trace), args.out)
    return EXIT_OK


def cmd_bounds(args) -> int:
    config = _load_config(args.config, args.seed)
    print(json.dumps(analysis.wcl_total(config).to_dict(), indent=2, sort_keys=True))
    return EXIT_OK


def _sweep_workload(name: str, seed: int):
    if name == "none":
        return None
    if name == "max-sharing":
        return lambda cfg: workloads.gen_max_sharing(cfg.n_cores, 2, 40, 0.5, seed)
    if name == "reuse-locality":
        return lambda cfg: workloads.gen_reuse_locality(cfg.n_cores, 4, seed, n_cr=cfg.n_cr)
    return workloads.gen_critical_instance


def cmd_sweep(args) -> int:
    config = _load_config(args.config, args.seed)
    values = [float(v) if "." in v else int(v) for v in args.values.split(",") if v]
    rows = analysis.sweep(args.axis, values, config, _sweep_workload(args.workload, config.seed),
                          workers=args.workers)
    _emit(analysis.rows_to_csv(rows), args.out)
    return EXIT_OK


def cmd_verify(args) -> int:
    from .verify import explore

    if args.config:
        config = _load_config(args.config, args.seed)
    else:
        config = SimConfig(n_cr=args.n_cr, n_ncr=args.n_ncr, cache_geometry=CacheGeometry(sets=1))
    if config.n_cores > 3 or args.lines > 2:
        raise ConfigError("verification scope is limited to 3 cores and 2 lines")
    result = explore(config, args.lines, args.depth, _mutations(args.mutate), with_think=args.think)
    print(json.dumps(result.to_dict(), indent=2))
    if not result.ok:
        if args.counterexample_out:
            Path(args.counterexample_out).write_text(format_trace(result.counterexample))
        return EXIT_PROTOCOL
    return EXIT_OK


def cmd_overhead(args) -> int:
    rep = analysis.hardware_overhead(args.n_cores, args.addr_bits, args.line_bytes)
    print(json.dumps(rep.to_dict(), indent=2, sort_keys=True))
    return EXIT_OK


def cmd_golden(args) -> int:
    mismatch, _ = workloads.run_golden(args.scenario)
    if mismatch is not None:
        print(json.dumps({"scenario": args.scenario, "verdict": "FAIL", "first_difference": mismatch}, indent=2))
        return EXIT_PROTOCOL
    print(json.dumps({"scenario": args.scenario, "verdict": "PASS"}))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hourglass", allow_abbrev=False,
                                description="Time-based coherence simulator and worst-case latency toolkit.")
    p.add_argument("--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config=True):
        if config:
            sp.add_argument("--config", help="SimConfig JSON file (defaults built in)")
        sp.add_argument("--seed", type=int)
        return sp

    sp = common(sub.add_parser("run", allow_abbrev=False, help="simulate a trace"))
    sp.add_argument("--trace", required=True)
    sp.add_argument("--out")
    sp.add_argument("--bus-log", help="write the per-slot JSON-lines bus log here")
    sp.add_argument("--check-bounds", action="store_true")
    sp.add_argument("--mutate", action="append",
                    help=f"inject a known bug for checker sensitivity tests (not for production): {', '.join(MUTATIONS)}")
    sp.set_defaults(func=cmd_run)

    sp = common(sub.add_parser("gen", allow_abbrev=False, help="generate a synthetic trace"))
    sp.add_argument("--generator", required=True, choices=["max-sharing", "critical-instance", "reuse-locality"])
    sp.add_argument("--n-cores", type=int)
    sp.add_argument("--n-lines", type=int, default=4)
    sp.add_argument("--ops-per-core", type=int, default=100)
    sp.add_argument("--store-ratio", type=float, default=0.5)
    sp.add_argument("--reuse-window", type=int, default=4)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_gen)

    sp = common(sub.add_parser("bounds", allow_abbrev=False, help="analytical worst-case latency"))
    sp.set_defaults(func=cmd_bounds)

    sp = common(sub.add_parser("sweep", allow_abbrev=False, help="bound and measurement sweep as CSV"))
    sp.add_argument("--axis", required=True, choices=analysis.SWEEP_AXES)
    sp.add_argument("--values", required=True, help="comma-separated axis values")
    sp.add_argument("--workload", default="none", choices=["none", "max-sharing", "reuse-locality", "critical-instance"])
    sp.add_argument("--workers", type=int, default=1)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_sweep)

    sp = common(sub.add_parser("verify", allow_abbrev=False, help="exhaustive small-scope exploration"))
    sp.add_argument("--n-cr", type=int, default=2)
    sp.add_argument("--n-ncr", type=int, default=1)
    sp.add_argument("--lines", type=int, default=1)
    sp.add_argument("--depth", type=int, default=3)
    sp.add_argument("--think", action="store_true", help="also branch on a one-slot think gap")
    sp.add_argument("--mutate", action="append")
    sp.add_argument("--counterexample-out")
    sp.set_defaults(func=cmd_verify)

    sp = common(sub.add_parser("overhead", allow_abbrev=False, help="hardware storage overhead"), config=False)
    sp.add_argument("--n-cores", type=int, default=4)
    sp.add_argument("--addr-bits", type=int, default=32)
    sp.add_argument("--line-bytes", type=int, default=64)
    sp.set_defaults(func=cmd_overhead)

    sp = common(sub.add_parser("golden", allow_abbrev=False, help="replay a bundled scenario"), config=False)
    sp.add_argument("--scenario", required=True, choices=workloads.SCENARIOS)
    sp.set_defaults(func=cmd_golden)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, OSError, ValueError) as exc:
        log.error("%s", exc)
        return EXIT_INPUT
    except ProtocolViolation as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        return EXIT_PROTOCOL


if __name__ == "__main__":
    sys.exit(main())
