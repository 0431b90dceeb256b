"""Synthetic trace generators and the bundled scenario fixtures."""
from __future__ import annotations

import json
import random
from importlib import resources
from typing import Optional

from .core import ConfigError, SimConfig
from .trace import OpKind, TraceFile, TraceOp, format_trace, parse_trace

LINE_A = 0x1000


class InfeasibleConfig(ConfigError):
    pass


def line_address(index: int, line_bytes: int = 64, base: int = LINE_A) -> int:
    """Address of the index-th synthetic line; consecutive lines map to distinct sets."""
    return base + index * line_bytes


def gen_max_sharing(n_cores: int, n_lines: int, ops_per_core: int, store_ratio: float, seed: int,
                    line_bytes: int = 64, think_ratio: float = 0.25, max_think: int = 200) -> TraceFile:
    """Every core runs the same random op sequence over the same ``n_lines`` lines.

    Think gaps are part of that shared sequence, so cores drift in and out of
    lockstep the same way on every core.
    """
    if n_lines < 1:
        raise ConfigError("n_lines must be >= 1")
    if not 0.0 <= store_ratio <= 1.0:
        raise ConfigError("store_ratio must lie in [0, 1]")
    rng = random.Random(seed)
    seq = []
    while len([k for k, _ in seq if k is not OpKind.THINK]) < ops_per_core:
        if think_ratio and rng.random() < think_ratio:
            seq.append((OpKind.THINK, rng.randint(1, max_think)))
            continue
        kind = OpKind.STORE if rng.random() < store_ratio else OpKind.LOAD
        seq.append((kind, line_address(rng.randrange(n_lines), line_bytes)))
    ops = [TraceOp(c, k, v) for c in range(n_cores) for k, v in seq]
    return TraceFile.from_ops(n_cores, ops, comment=f"max-sharing seed={seed} lines={n_lines} store_ratio={store_ratio}")


def _critical_trace(config: SimConfig, ncr_at: int, writer_at: list) -> TraceFile:
    sw = config.slot_width_cycles
    victim, ncr = 0, config.n_cr
    ops = [TraceOp(victim, OpKind.LOAD, LINE_A), TraceOp(victim, OpKind.STORE, LINE_A)]
    if ncr_at:
        ops.append(TraceOp(ncr, OpKind.THINK, ncr_at))
    ops.append(TraceOp(ncr, OpKind.LOAD, LINE_A))
    for k, at in enumerate(writer_at, start=1):
        if at:
            ops.append(TraceOp(k, OpKind.THINK, at))
        ops.append(TraceOp(k, OpKind.STORE, LINE_A))
    return TraceFile.from_ops(config.n_cores, ops,
                              comment=f"critical instance: victim c0, ncr c{ncr}, writers c1..c{config.n_cr - 1}, SW={sw}")


def _victim_latency(config: SimConfig, trace: TraceFile) -> int:
    from .engine import run

    report = run(config, trace)
    stores = [r for r in report.records if r.core == 0 and r.op == "Store"]
    return stores[0].total if stores else -1


def gen_critical_instance(config: SimConfig, passes: int = 2) -> TraceFile:
    """Build the four-step worst case for the victim store of cr core 0.

    1. c0 loads A and immediately stores to it, so the store waits on its own timer.
    2. An ncr core reads A while c0 still holds it.
    3./4. The other cr cores write A before c0's timer runs out.

    Arrival times of steps 2-4 are chosen on slot boundaries inside the windows
    the timers leave open, keeping whichever placement maximizes the victim's
    observed latency.
    """
    if config.n_cr < 2:
        raise InfeasibleConfig("step 3 needs another critical core (n_cr >= 2)")
    if config.n_ncr < 1:
        raise InfeasibleConfig("step 2 needs a non-critical core (n_ncr >= 1)")
    sw, period = config.slot_width_cycles, config.period
    t = config.timers
    # the victim holds A in S from cycle SW until SW + v(cr,cr)
    horizon = sw + t.cr_cr + period
    candidates = list(range(0, horizon + sw, sw))
    ncr_at = sw
    writers = [sw + t.cr_cr] * (config.n_cr - 1)
    best = _victim_latency(config, _critical_trace(config, ncr_at, writers))
    for _ in range(passes):
        for slot in range(-1, len(writers)):
            for cand in candidates:
                trial_ncr = cand if slot < 0 else ncr_at
                trial_w = list(writers)
                if slot >= 0:
                    trial_w[slot] = cand
                lat = _victim_latency(config, _critical_trace(config, trial_ncr, trial_w))
                if lat > best:
                    best, ncr_at, writers = lat, trial_ncr, trial_w
    return _critical_trace(config, ncr_at, writers)


def gen_reuse_locality(n_cores: int, reuse_window: int, seed: int, n_cr: int = 2, bursts: int = 12,
                       n_lines: int = 1, line_bytes: int = 64, gap: int = 20, cr_think: int = 300) -> TraceFile:
    """Non-critical cores re-access the line they just acquired ``reuse_window`` times.

    Critical cores keep writing the same lines in the background, so how long
    an ncr core may hold a line decides how many of its re-accesses hit, and
    how long a cr core holds a line decides how long ncr misses wait.
    The defaults (one hot line, long cr think gaps) keep the contention
    pattern regular enough for trend comparisons across timer values.
    """
    if reuse_window < 1:
        raise ConfigError("reuse_window must be >= 1")
    rng = random.Random(seed)
    ops = []
    for c in range(n_cores):
        if c < n_cr:
            for _ in range(bursts * reuse_window // 2 + 1):
                ops.append(TraceOp(c, OpKind.STORE, line_address(rng.randrange(n_lines), line_bytes)))
                ops.append(TraceOp(c, OpKind.THINK, cr_think))
            continue
        for _ in range(bursts):
            addr = line_address(rng.randrange(n_lines), line_bytes)
            kind = OpKind.STORE if rng.random() < 0.5 else OpKind.LOAD
            for _ in range(reuse_window):
                ops.append(TraceOp(c, kind, addr))
                ops.append(TraceOp(c, OpKind.THINK, gap))
    return TraceFile.from_ops(n_cores, ops, comment=f"reuse-locality window={reuse_window} seed={seed}")


def coverage_suite(seeds: int = 4):
    """Yield (config, trace) pairs that together exercise every legal table cell.

    Direct-mapped single-set caches force replacements; three timer settings
    cover zero, default and long hold times; up to four cores per class let
    several requests pile up behind a pending fill.
    """
    from .core import CacheGeometry, TimerConfig

    timers = (TimerConfig(), TimerConfig(0, 0, 0, 0), TimerConfig(4, 4, 4, 4))
    for n in (2, 3, 4):
        for tc in timers:
            for sets in (1, 256):
                config = SimConfig(n_cr=n, n_ncr=n, timer_config=tc, cache_geometry=CacheGeometry(sets=sets))
                for seed in range(seeds):
                    for n_lines in (1, 3):
                        yield config, gen_max_sharing(config.n_cores, n_lines, 30, 0.5, seed, max_think=120)


def run_coverage_suite(seeds: int = 4) -> dict:
    """Union the coverage of the whole suite and report what is still missing."""
    from .engine import check_transition_coverage, run

    covered: set = set()
    for config, trace in coverage_suite(seeds):
        covered |= run(config, trace).coverage
    return check_transition_coverage(covered)


# ---- bundled scenarios ------------------------------------------------

SCENARIOS = ("fig7", "fig1a", "fig1b")


def _fixture_text(name: str) -> str:
    return resources.files("hourglass").joinpath("fixtures", name).read_text()


def scenario(name: str) -> tuple[SimConfig, TraceFile, dict]:
    """Config, trace and per-slot expectations of a bundled scenario."""
    if name not in SCENARIOS:
        raise ConfigError(f"unknown scenario {name!r}; choose from {', '.join(SCENARIOS)}")
    expected = json.loads(_fixture_text(f"{name}.json"))
    config = SimConfig.from_dict(expected["config"])
    trace = parse_trace(_fixture_text(f"{name}.trace"), n_cores=config.n_cores,
                        line_bytes=config.cache_geometry.line_bytes)
    return config, trace, expected


def compare_snapshots(snapshots: list, expected: dict) -> Optional[dict]:
    """First slot whose annotated core states differ from the simulated ones, else None."""
    by_slot = {s["slot"]: s for s in snapshots}
    for ann in expected["slots"]:
        got = by_slot.get(ann["slot"])
        if got is None:
            return {"slot": ann["slot"], "reason": "slot not simulated"}
        for core, state in ann["states"].items():
            if got["states"].get(core) != state:
                return {"slot": ann["slot"], "core": core, "expected": state, "got": got["states"].get(core)}
        if "memory" in ann and got["memory"] != ann["memory"]:
            return {"slot": ann["slot"], "core": "memory", "expected": ann["memory"], "got": got["memory"]}
    return None


__all__ = [
    "InfeasibleConfig",
    "gen_max_sharing",
    "gen_critical_instance",
    "gen_reuse_locality",
    "coverage_suite",
    "run_coverage_suite",
    "scenario",
    "compare_snapshots",
    "run_golden",
    "format_trace",
    "parse_trace",
    "SCENARIOS",
]


def run_golden(name: str):
    """Simulate a bundled scenario; returns (first mismatch or None, report)."""
    from .engine import run

    config, trace, expected = scenario(name)
    report = run(config, trace, snapshot_address=int(expected["address"], 16))
    mismatch = compare_snapshots(report.snapshots, expected)
    if mismatch is None:
        for core, hits in expected.get("expected_hits", {}).items():
            got = report.per_core[int(core)]["hits"]
            if got != hits:
                mismatch = {"core": core, "expected_hits": hits, "got": got}
                break
    return mismatch, report
