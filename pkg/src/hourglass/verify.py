"""Exhaustive small-scope exploration of op interleavings.

Every time a core is ready for its next op the explorer branches over all
Load/Store choices on a tiny address set.  The rest of the run is fixed by the
deterministic slot schedule.  States that already occurred up to a time shift
of whole TDM periods are pruned.  Tokens are reduced to "fresh or stale"
because only freshness influences the outcome.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .analysis import check_bounds, wcl_total
from .core import ProtocolViolation, SimConfig
from .engine import Simulator, Stall, check_transition_coverage
from .trace import OpKind, TraceFile, TraceOp
from .workloads import line_address


class BoundViolation(ProtocolViolation):
    pass


@dataclass
class VerifyResult:
    ok: bool
    states: int
    leaves: int
    coverage: set
    error: Optional[str] = None
    counterexample: Optional[TraceFile] = None
    coverage_report: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        from .trace import format_trace

        return {
            "verdict": "PASS" if self.ok else "FAIL",
            "states": self.states,
            "leaves": self.leaves,
            "error": self.error,
            "counterexample": format_trace(self.counterexample) if self.counterexample else None,
            "coverage_fraction": round(self.coverage_report.get("fraction", 0.0), 4),
            "a1_missing": self.coverage_report.get("a1_missing", []),
            "table_i_missing": self.coverage_report.get("table_i_missing", []),
        }


def _rel(x, now):
    return None if x is None else x - now


def canonical_state(sim: Simulator, given: tuple) -> tuple:
    now = sim.now
    latest = sim.latest

    def fresh(addr, token):
        return token == latest.get(addr, 0)

    cores = []
    for c in sim.cores:
        rec = c.record
        rec_key = None if rec is None else (
            rec.op, rec.address, rec.hit, rec.issue_cycle - now, _rel(rec.eligible_cycle, now),
            _rel(rec.grant_cycle, now), _rel(rec.transfer_start_cycle, now))
        ready = c.ready_at - now if c.stall in (Stall.THINK, Stall.HIT) else None
        lines = tuple(sorted(
            (ln.tag, ln.state.value, max(ln.cr_deadline - now, -1), max(ln.ncr_deadline - now, -1),
             ln.cr_dest, ln.ncr_dest, fresh(ln.tag, ln.data_token), ln.observed_remote_write,
             sim.lru[c.id].get(ln.tag, -1) - now)
            for ln in sim.all_lines(c.id)))
        cores.append((c.stall.value, ready, c.pending and (c.pending[0].value, c.pending[1]), c.yielded,
                      c.victim, c.waiting_op and (c.waiting_op.kind.value, c.waiting_op.value),
                      tuple((op.kind.value, op.value) for op in c.ops[c.pc:]), rec_key, lines))
    mem_lines = tuple(sorted(
        (a, ml.state.value, tuple(sorted(ml.sharers)), ml.owner, fresh(a, ml.token), ml.awaiting_allinv)
        for a, ml in sim.memory.lines.items()))
    lut = tuple((e.address, e.requester, e.criticality.value, e.kind.value, e.arrival - now)
                for e in sim.memory.lut if e.valid)
    prsp = tuple(sorted(((e.seq, e.origin, e.address, e.kind.value, e.destination) for e in sim.prsp.entries())))
    prsp = tuple(x[1:] for x in prsp)
    transfers = tuple(sorted((t.complete_at - now, t.dest, t.address, fresh(t.address, t.token))
                             for t in sim.transfers))
    return (now % sim.period, tuple(cores), mem_lines, lut, prsp, transfers, sim.rr,
            min(now - sim.last_progress, sim.deadlock_window + 1), given, tuple(sorted(sim.open_cores)))


def _choices(n_lines: int, line_bytes: int, with_think: bool, sw: int):
    ops = []
    for i in range(n_lines):
        addr = line_address(i, line_bytes)
        ops.append((OpKind.LOAD, addr))
        ops.append((OpKind.STORE, addr))
    if with_think:
        ops.append((OpKind.THINK, sw))
    return ops


def _check_records(sim: Simulator, seen_records: int, bound) -> int:
    new = sim.records[seen_records:]
    if new:
        probe = type("R", (), {"records": new})()
        verdict = check_bounds(probe, bound)
        if not verdict.passed:
            r = verdict.violations[0]
            raise BoundViolation(
                f"cr request of core {r.core} to {r.address:#x} took {r.total} cycles "
                f"(arb {r.arb_latency}, coh {r.coh_latency}); bound is {bound.total} "
                f"(arb {bound.arb}, coh {bound.coh})")
    return len(sim.records)


def _trace_of(sim: Simulator) -> TraceFile:
    return TraceFile(len(sim.cores), [list(c.ops) for c in sim.cores], comment="verifier counterexample")


def replay(config: SimConfig, trace: TraceFile, mutations=()) -> Optional[str]:
    """Run a closed trace with every check on; returns the failure message or None."""
    sim = Simulator(config, trace, mutations=mutations, strict_oracle=True)
    bound = wcl_total(config)
    try:
        sim.run()
        _check_records(sim, 0, bound)
    except ProtocolViolation as exc:
        return f"{type(exc).__name__}: {exc}"
    return None


def shrink(config: SimConfig, trace: TraceFile, mutations=()) -> TraceFile:
    """Greedily drop ops while the trace keeps failing."""
    current = TraceFile(trace.n_cores, [list(s) for s in trace.streams], comment=trace.comment)
    changed = True
    while changed:
        changed = False
        for c in range(current.n_cores):
            i = 0
            while i < len(current.streams[c]):
                cand = TraceFile(current.n_cores, [list(s) for s in current.streams], comment=current.comment)
                del cand.streams[c][i]
                if replay(config, cand, mutations) is not None:
                    current = cand
                    changed = True
                else:
                    i += 1
    return current


def explore(config: SimConfig, n_lines: int = 1, depth: int = 3, mutations=(), with_think: bool = False,
            max_states: int = 2_000_000) -> VerifyResult:
    """Depth-first search over every per-core op sequence of length ``depth``.

    Asserts SWMR, the load-value oracle, liveness (deadlock detection) and the
    cr latency bound on every path.  Stops at the first violation and returns a
    shrunk counterexample trace.
    """
    n = config.n_cores
    bound = wcl_total(config)
    choices = _choices(n_lines, config.cache_geometry.line_bytes, with_think, config.slot_width_cycles)
    root = Simulator(config, TraceFile(n), mutations=mutations, strict_oracle=True, open_cores=range(n))
    stack = [(root, (0,) * n, 0)]
    seen = set()
    coverage: set = set()
    states = leaves = 0
    while stack:
        sim, given, nrec = stack.pop()
        states += 1
        if states > max_states:
            raise RuntimeError(f"state budget of {max_states} exhausted")
        try:
            sim.run()
            nrec = _check_records(sim, nrec, bound)
        except ProtocolViolation as exc:
            coverage |= sim.coverage
            trace = shrink(config, _trace_of(sim), mutations)
            return VerifyResult(False, states, leaves, coverage, f"{type(exc).__name__}: {exc}", trace,
                                check_transition_coverage(coverage))
        coverage |= sim.coverage
        core = sim.needs_op
        if core is None:
            leaves += 1
            continue
        if given[core] >= depth:
            sim.resume(core, None)
            stack.append((sim, given, nrec))
            continue
        nxt = given[:core] + (given[core] + 1,) + given[core + 1:]
        for kind, value in choices:
            child = sim.clone()
            child.resume(core, TraceOp(core, kind, value))
            key = canonical_state(child, nxt)
            if key in seen:
                continue
            seen.add(key)
            stack.append((child, nxt, nrec))
    return VerifyResult(True, states, leaves, coverage, coverage_report=check_transition_coverage(coverage))
