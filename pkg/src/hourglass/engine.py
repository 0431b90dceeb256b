"""Cycle-accurate simulator: in-order cores, private controllers, TDM bus and shared memory.

Time advances by jumping between cycles where something can happen.  Within
a cycle the order is fixed: data transfers that finish land first, then line
timers are evaluated, then cores advance, and finally, on a slot boundary,
the bus runs the slot.
"""
from __future__ import annotations

import copy
import enum
import json
from collections import Counter
from dataclasses import dataclass, field
from typing import Optional

from .bus import (
    Decision,
    LatencyRecord,
    PrspBuffers,
    decide_slot,
    invalidate_stale_ncr_responses,
    record_latency_marks,
    slot_owner,
)
from .controller import (
    Act,
    BusEvent,
    CoreEvent,
    Ctx,
    LineMeta,
    handle_bus_event,
    handle_core_event,
    legal_a1_cells,
    next_timer_deadline,
    table_i_cells,
    tick_timers,
    timeout_due,
)
from .core import (
    READER_STATES,
    WRITER_STATES,
    Criticality,
    MessageKind,
    ProtocolViolation,
    SimConfig,
    State,
    criticality_of,
)
from .memory import SharedMemory
from .trace import OpKind, TraceFile, TraceOp

MUTATIONS = ("skip-allinv", "overwrite-dest", "grant-ncr-reserved-slot")


class DeadlockDetected(ProtocolViolation):
    pass


class InvariantViolation(ProtocolViolation):
    pass


class Stall(enum.Enum):
    NONE = "none"
    THINK = "think"
    HIT = "hit"
    MISS = "miss"
    EVICT = "evict"
    DONE = "done"


@dataclass
class CoreModel:
    id: int
    criticality: Criticality
    ops: list
    pc: int = 0
    stall: Stall = Stall.NONE
    ready_at: int = 0
    pending: Optional[tuple] = None  # (MessageKind, address) not yet on the bus
    yielded: bool = False  # pending request was reissued because of a cr request
    record: Optional[LatencyRecord] = None
    waiting_op: Optional[TraceOp] = None  # op blocked behind an eviction
    victim: Optional[int] = None
    hits: int = 0
    misses: int = 0
    reissues: int = 0
    evictions: int = 0


@dataclass
class Transfer:
    complete_at: int
    dest: int
    address: int
    token: int


@dataclass
class Divergence:
    core: int
    cycle: int
    address: int
    expected: int
    got: int

    def to_dict(self) -> dict:
        return {"core": self.core, "cycle": self.cycle, "address": hex(self.address),
                "expected": self.expected, "got": self.got}


@dataclass
class SimReport:
    config: SimConfig
    cycles: int
    records: list
    per_core: list
    bus_utilization: float
    timer_events: dict
    oracle_pass: bool
    oracle_divergence: Optional[Divergence]
    coverage: set
    bus_log: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)

    def cr_records(self) -> list:
        return [r for r in self.records if r.criticality is Criticality.CR]

    def to_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "cycles": self.cycles,
            "records": [r.to_dict() for r in self.records],
            "per_core": self.per_core,
            "bus_utilization": self.bus_utilization,
            "timer_events": dict(self.timer_events),
            "oracle": {
                "verdict": "PASS" if self.oracle_pass else "FAIL",
                "first_divergence": self.oracle_divergence.to_dict() if self.oracle_divergence else None,
            },
            "coverage": coverage_keys(self.coverage),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def coverage_key(key) -> str:
    return "/".join(k.value if isinstance(k, enum.Enum) else str(k) for k in key)


def coverage_keys(coverage) -> list:
    return sorted(coverage_key(k) for k in coverage)


def check_transition_coverage(coverage) -> dict:
    """List the legal table cells a set of runs never exercised."""
    covered = set(coverage)
    a1 = legal_a1_cells()
    t1 = table_i_cells()
    missing_a1 = [coverage_key(c) for c in a1 if c not in covered]
    missing_t1 = [coverage_key(c) for c in t1 if c not in covered]
    return {
        "a1_total": len(a1),
        "a1_missing": missing_a1,
        "table_i_total": len(t1),
        "table_i_missing": missing_t1,
        "fraction": 1 - (len(missing_a1) + len(missing_t1)) / (len(a1) + len(t1)),
    }


def check_oracle(report: SimReport) -> tuple[bool, Optional[Divergence]]:
    return report.oracle_pass, report.oracle_divergence


class Simulator:
    """One simulation instance; ``clone`` gives the exhaustive verifier cheap snapshots."""

    def __init__(
        self,
        config: SimConfig,
        trace: Optional[TraceFile] = None,
        mutations=(),
        bus_log: bool = False,
        snapshot_address: Optional[int] = None,
        strict_oracle: bool = False,
        open_cores=None,
    ):
        unknown = set(mutations) - set(MUTATIONS)
        if unknown:
            raise ValueError(f"unknown mutations: {sorted(unknown)}")
        self.config = config
        self.mutations = frozenset(mutations)
        self.sw = config.slot_width_cycles
        self.period = config.period
        self.timers = config.timers
        self.lbytes = config.cache_geometry.line_bytes
        self.sets = config.cache_geometry.sets
        self.ways = config.cache_geometry.ways
        n = config.n_cores
        if trace is not None and trace.n_cores > n:
            raise ValueError(f"trace uses {trace.n_cores} cores, config has {n}")
        streams = trace.streams if trace is not None else []
        self.cores = [
            CoreModel(i, criticality_of(i, config), list(streams[i]) if i < len(streams) else [])
            for i in range(n)
        ]
        self.ncr_ids = [i for i in range(n) if self.cores[i].criticality is Criticality.NCR]
        self.coverage: set = set()
        self.ctx = [
            Ctx(i, self.cores[i].criticality, self.timers, overwrite_dest="overwrite-dest" in self.mutations,
                coverage=self.coverage)
            for i in range(n)
        ]
        self.caches: list[dict] = [dict() for _ in range(n)]  # set index -> list[LineMeta]
        self.lru: list[dict] = [dict() for _ in range(n)]
        self.memory = SharedMemory(n, skip_allinv="skip-allinv" in self.mutations)
        self.prsp = PrspBuffers(n)
        self.rr = 0
        self.transfers: list[Transfer] = []
        self.now = 0
        self.records: list[LatencyRecord] = []
        self.latest: dict[int, int] = {}
        self.store_seq = 0
        self.divergence: Optional[Divergence] = None
        self.strict_oracle = strict_oracle
        self.timer_events = Counter()
        self.slots_used = 0
        self.last_progress = 0
        self.deadlock_window = 2 * self.period + self.timers.max() + self.sw
        self.bus_log_enabled = bus_log
        self.bus_log: list = []
        self.snapshot_address = snapshot_address
        self.snapshots: list = []
        # cores that ask for more ops instead of finishing (exhaustive exploration)
        self.open_cores = set(open_cores or ())
        self.needs_op: Optional[int] = None
        self._phases_done = -1

    def clone(self) -> "Simulator":
        """Independent copy; much cheaper than ``copy.deepcopy``."""
        new = copy.copy(self)
        new.coverage = set(self.coverage)
        new.cores = []
        for c in self.cores:
            nc = copy.copy(c)
            nc.ops = list(c.ops)
            nc.record = copy.copy(c.record)
            new.cores.append(nc)
        new.ctx = []
        for ctx in self.ctx:
            nctx = copy.copy(ctx)
            nctx.coverage = new.coverage
            new.ctx.append(nctx)
        new.caches = [{k: [copy.copy(ln) for ln in ways] for k, ways in cache.items()} for cache in self.caches]
        new.lru = [dict(d) for d in self.lru]
        mem = copy.copy(self.memory)
        mem.lines = {}
        for a, ml in self.memory.lines.items():
            nml = copy.copy(ml)
            nml.sharers = set(ml.sharers)
            mem.lines[a] = nml
        mem.lut = [copy.copy(e) for e in self.memory.lut]
        new.memory = mem
        prsp = copy.copy(self.prsp)
        prsp.buffers = [[copy.copy(e) for e in buf] for buf in self.prsp.buffers]
        new.prsp = prsp
        new.transfers = [copy.copy(t) for t in self.transfers]
        new.records = list(self.records)
        new.latest = dict(self.latest)
        new.timer_events = Counter(self.timer_events)
        new.bus_log = list(self.bus_log)
        new.snapshots = list(self.snapshots)
        new.open_cores = set(self.open_cores)
        return new

    # ---- cache lookup -------------------------------------------------
    def line_addr(self, addr: int) -> int:
        return addr - addr % self.lbytes

    def set_of(self, addr: int) -> int:
        return (addr // self.lbytes) % self.sets

    def lookup(self, core: int, addr: int) -> Optional[LineMeta]:
        for line in self.caches[core].get(self.set_of(addr), ()):
            if line.tag == addr:
                return line
        return None

    def all_lines(self, core: int):
        for ways in self.caches[core].values():
            yield from ways

    # ---- main loop ----------------------------------------------------
    def finished(self) -> bool:
        return all(c.stall is Stall.DONE for c in self.cores) and not self.transfers

    def run(self) -> SimReport:
        while True:
            self.step()
            if self.finished() or self.needs_op is not None:
                break
            nxt = self.next_time()
            if nxt is None:
                break
            if nxt >= self.config.max_cycles:
                self.now = self.config.max_cycles
                break
            self.now = nxt
        return self.report()

    def resume(self, core: int, op: Optional[TraceOp]) -> None:
        """Feed the next op to a core that asked for one (None closes its stream)."""
        if op is None:
            self.open_cores.discard(core)
        else:
            self.cores[core].ops.append(op)
        self.needs_op = None

    def step(self) -> None:
        t = self.now
        for ctx in self.ctx:
            ctx.now = t
        if self._phases_done != t:
            # a resumed step (after feeding an op) must not redo these
            self._complete_transfers(t)
            self._tick_timers(t)
            self._phases_done = t
        self._advance_cores(t)
        if self.needs_op is not None:
            return
        if t % self.sw == 0:
            if self.snapshot_address is not None and t > 0:
                self._snapshot(t)
            if self._bus_has_work():
                self._run_slot(t)
        self._check_swmr()

    def tick(self) -> None:
        """Process the current cycle and move the clock forward by one."""
        self.step()
        if self.needs_op is None:
            self.now += 1

    def next_time(self) -> Optional[int]:
        t = self.now
        cands = [tr.complete_at for tr in self.transfers]
        for c in self.cores:
            if c.stall in (Stall.THINK, Stall.HIT):
                cands.append(c.ready_at)
            elif c.stall is Stall.NONE:
                cands.append(t + 1)
            elif c.stall is Stall.EVICT and self._victim_released(c):
                cands.append(t + 1)
        for i, ctx in enumerate(self.ctx):
            for line in self.all_lines(i):
                d = next_timer_deadline(line, ctx)
                if d is not None:
                    cands.append(d)
        if self._bus_has_work() or (self.snapshot_address is not None and not self.finished()):
            cands.append((t // self.sw + 1) * self.sw)
        cands = [x for x in cands if x > t]
        if not cands:
            if not self.finished():
                raise DeadlockDetected(self._deadlock_message("no further event can occur"))
            return None
        nxt = min(cands)
        if self._outstanding() and nxt - self.last_progress > self.deadlock_window:
            raise DeadlockDetected(self._deadlock_message(f"no progress since cycle {self.last_progress}"))
        return nxt

    def _outstanding(self) -> bool:
        return any(c.stall in (Stall.MISS, Stall.EVICT) for c in self.cores)

    def _deadlock_message(self, why: str) -> str:
        waiting = [(c.id, c.stall.value, c.record.address if c.record else c.victim) for c in self.cores
                   if c.stall in (Stall.MISS, Stall.EVICT)]
        return f"deadlock at cycle {self.now}: {why}; waiting cores {waiting}"

    # ---- phase 1: data transfers -------------------------------------
    def _complete_transfers(self, t: int) -> None:
        done = [tr for tr in self.transfers if tr.complete_at == t]
        if not done:
            return
        self.transfers = [tr for tr in self.transfers if tr.complete_at != t]
        for tr in done:
            core = self.cores[tr.dest]
            line = self.lookup(tr.dest, tr.address)
            line, acts = handle_bus_event(line, BusEvent("Data", tr.address, token=tr.token), self.ctx[tr.dest])
            self._apply(tr.dest, line, acts)
            rec = core.record
            rec.completion_cycle = t
            self._retire(core, rec)
            self._poll(tr.dest, line)

    # ---- phase 2: timers ---------------------------------------------
    def _tick_timers(self, t: int) -> None:
        for i, ctx in enumerate(self.ctx):
            for line in list(self.all_lines(i)):
                line, ev = tick_timers(line, ctx)
                if ev is not None:
                    self._core_event(i, line, ev)

    def _poll(self, core: int, line: LineMeta) -> None:
        if timeout_due(line, self.ctx[core]):
            self._core_event(core, line, CoreEvent("Timeout", line.tag, None))

    def _core_event(self, core: int, line: LineMeta, ev: CoreEvent) -> None:
        if ev.kind == "Timeout":
            self.timer_events["timeout"] += 1
        line, acts = handle_core_event(line, ev, self.ctx[core])
        self._apply(core, line, acts)
        self._poll(core, line)

    # ---- phase 3: cores ----------------------------------------------
    def _advance_cores(self, t: int) -> None:
        for core in self.cores:
            self._advance_core(core, t)
            if self.needs_op is not None:
                return

    def _advance_core(self, core: CoreModel, t: int) -> None:
        while True:
            if core.stall in (Stall.THINK, Stall.HIT):
                if core.ready_at > t:
                    return
                if core.stall is Stall.HIT:
                    core.record.completion_cycle = core.ready_at
                    self._retire(core, core.record)
                core.stall = Stall.NONE
            elif core.stall is Stall.EVICT:
                if not self._victim_released(core):
                    return
                victim = self._victim_line(core)
                if victim is not None and victim.state is State.SI:
                    line, acts = handle_core_event(victim, CoreEvent("Replacement", victim.tag), self.ctx[core.id])
                    self._apply(core.id, line, acts)
                op = core.waiting_op
                core.waiting_op = None
                core.victim = None
                core.stall = Stall.NONE
                self._start_mem_op(core, op, t)
                continue
            elif core.stall is not Stall.NONE:
                return
            if core.pc >= len(core.ops):
                if core.id in self.open_cores:
                    self.needs_op = core.id
                else:
                    core.stall = Stall.DONE
                return
            op = core.ops[core.pc]
            core.pc += 1
            if op.kind is OpKind.THINK:
                if op.value > 0:
                    core.stall = Stall.THINK
                    core.ready_at = t + op.value
                continue
            self._start_mem_op(core, op, t)

    def _victim_line(self, core: CoreModel) -> Optional[LineMeta]:
        return None if core.victim is None else self.lookup(core.id, core.victim)

    def _victim_released(self, core: CoreModel) -> bool:
        line = self._victim_line(core)
        return line is None or line.state in (State.I, State.SI)

    def _start_mem_op(self, core: CoreModel, op: TraceOp, t: int) -> None:
        self.last_progress = t
        addr = self.line_addr(op.value)
        line = self.lookup(core.id, addr)
        if line is None:
            line = self._allocate(core, addr, op)
            if line is None:
                return  # stalled behind an eviction
        self.lru[core.id][addr] = t
        kind = "Load" if op.kind is OpKind.LOAD else "Store"
        rec = LatencyRecord(core.id, core.criticality, kind, addr, issue_cycle=t)
        core.record = rec
        line, acts = handle_core_event(line, CoreEvent(kind, addr), self.ctx[core.id])
        kinds = {a.kind for a in acts}
        if Act.HIT in kinds:
            rec.hit = True
            core.hits += 1
            core.stall = Stall.HIT
            core.ready_at = t + self.config.hit_latency
        else:
            core.misses += 1
            core.stall = Stall.MISS
        self._apply(core.id, line, acts)
        self._poll(core.id, line)
        if core.stall is Stall.HIT and self.config.hit_latency == 0:
            core.record.completion_cycle = t
            self._retire(core, core.record)
            core.stall = Stall.NONE

    def _allocate(self, core: CoreModel, addr: int, op: TraceOp) -> Optional[LineMeta]:
        ways = self.caches[core.id].setdefault(self.set_of(addr), [])
        if len(ways) < self.ways:
            line = LineMeta(tag=addr)
            ways.append(line)
            return line
        free = [w for w in ways if w.state is State.I]
        if free:
            line = free[0]
        else:
            line = min(ways, key=lambda w: self.lru[core.id].get(w.tag, -1))
            if line.state is not State.SI:
                core.evictions += 1
                victim, acts = handle_core_event(line, CoreEvent("Replacement", line.tag), self.ctx[core.id])
                self._apply(core.id, victim, acts)
                if victim.state is not State.I:
                    core.stall = Stall.EVICT
                    core.victim = victim.tag
                    core.waiting_op = op
                    return None
            else:
                core.evictions += 1
                handle_core_event(line, CoreEvent("Replacement", line.tag), self.ctx[core.id])
        self.lru[core.id].pop(line.tag, None)
        line.clear()
        line.tag = addr
        line.cr_deadline = line.ncr_deadline = 0
        return line

    def _retire(self, core: CoreModel, rec: LatencyRecord) -> None:
        record_latency_marks(rec)
        self.records.append(rec)
        core.record = None
        core.stall = Stall.NONE
        self.last_progress = self.now

    # ---- action execution --------------------------------------------
    def _apply(self, core_id: int, line: LineMeta, acts) -> None:
        core = self.cores[core_id]
        for a in acts:
            k = a.kind
            if k is Act.ISSUE or k is Act.REISSUE:
                if core.pending is not None:
                    raise ProtocolViolation(f"core {core_id} would have two outstanding requests")
                core.pending = (a.msg, line.tag)
                rec = core.record
                if (a.msg is not MessageKind.PUT_M and rec is not None and rec.address == line.tag
                        and rec.eligible_cycle is None):
                    rec.eligible_cycle = self.now
                if k is Act.REISSUE:
                    core.yielded = True
                    core.reissues += 1
                    if core.record is not None:
                        core.record.was_reissued = True
            elif k is Act.WITHDRAW:
                if core.pending == (MessageKind.PUT_M, line.tag):
                    core.pending = None
            elif k is Act.POST:
                dest = a.core
                self.prsp.post(core_id, line.tag, a.msg, dest, self.cores[dest].criticality, self.now)
            elif k is Act.RESTART_TIMERS:
                self.timer_events["restart"] += 1
            elif k is Act.LOAD_TIMERS:
                self.timer_events["load"] += 1
            elif k is Act.LOAD_VALUE:
                self._oracle_load(core_id, line)
            elif k is Act.STORE_VALUE:
                self.store_seq += 1
                token = ((core_id + 1) << 32) | self.store_seq
                line.data_token = token
                self.latest[line.tag] = token

    def _oracle_load(self, core_id: int, line: LineMeta) -> None:
        expected = self.latest.get(line.tag, 0)
        if line.data_token != expected and self.divergence is None:
            self.divergence = Divergence(core_id, self.now, line.tag, expected, line.data_token)
            if self.strict_oracle:
                raise InvariantViolation(f"oracle: core {core_id} read stale data of {line.tag:#x} "
                                         f"at cycle {self.now} (expected {expected}, got {line.data_token})")

    # ---- phase 4: the bus --------------------------------------------
    def _request_ready(self, c: int) -> bool:
        """Whether core ``c`` may put its queued request on the bus.

        A request reissued because of a cr request waits until no cr request
        for that line is pending at memory; it would only be cancelled again.
        """
        core = self.cores[c]
        if core.pending is None:
            return False
        if not core.yielded:
            return True
        addr = core.pending[1]
        return not any(e.criticality is Criticality.CR for e in self.memory.pending(addr))

    def _bus_has_work(self) -> bool:
        if any(c.pending is not None for c in self.cores):
            return True
        if any(True for _ in self.prsp.entries()):
            return True
        return any(self.memory.serviceable(c.id) is not None for c in self.cores)

    def _run_slot(self, t: int) -> None:
        owner = slot_owner(t, self.config.n_cr, self.sw)
        decision, self.rr = decide_slot(
            owner,
            self.prsp,
            self._request_ready,
            lambda c: self.memory.serviceable(c) is not None,
            self.ncr_ids,
            self.rr,
            grant_ncr_first="grant-ncr-reserved-slot" in self.mutations,
        )
        msgs: list = []
        if decision.kind is not Decision.IDLE:
            self.slots_used += 1
            self._serve(decision.holder, t, msgs)
        if msgs:
            self.last_progress = t
        if self.bus_log_enabled:
            first = msgs[0] if msgs else {}
            self.bus_log.append({
                "cycle": t,
                "slot_owner": owner,
                "decision": decision.kind.value,
                "holder": decision.holder,
                "kind": first.get("kind"),
                "address": first.get("address"),
                "origin": first.get("origin"),
                "destination": first.get("destination"),
                "messages": msgs,
            })

    def _serve(self, h: int, t: int, msgs: list) -> None:
        data_used = False
        own_done = False
        progress = True
        while progress:
            progress = False
            for e in self.prsp.destined_to(h):
                if e.kind is MessageKind.SELF_INV and e.valid:
                    self._deliver_selfinv(e, h, msgs)
                    progress = True
            if not data_used:
                for e in self.prsp.destined_to(h):
                    if e.kind is MessageKind.SEND_DATA:
                        self._deliver_send_data(e, h, t, msgs)
                        data_used = progress = True
                        break
            core = self.cores[h]
            if not own_done and self._request_ready(h):
                kind, addr = core.pending
                if kind is MessageKind.PUT_M:
                    if not data_used:
                        self._broadcast_putm(h, addr, msgs)
                        own_done = data_used = progress = True
                else:
                    self._broadcast_request(h, kind, addr, t, msgs)
                    own_done = progress = True
            if not data_used:
                entry = self.memory.serviceable(h)
                if entry is not None:
                    token = self.memory.supply(entry)
                    msgs.append({"kind": "Data", "address": hex(entry.address), "origin": "mem", "destination": h})
                    self._start_transfer(h, entry.address, token, t)
                    data_used = progress = True

    def _mark_grant(self, core_id: int, addr: int) -> None:
        rec = self.cores[core_id].record
        if rec is not None and rec.address == addr and rec.grant_cycle is None:
            rec.grant_cycle = self.now

    def _deliver_selfinv(self, e, cause: int, msgs: list) -> None:
        e.valid = False
        o, addr = e.origin, e.address
        msgs.append({"kind": "SelfInv", "address": hex(addr), "origin": o, "destination": cause})
        line = self.lookup(o, addr)
        line, acts = handle_bus_event(line, BusEvent("OwnSelfInv", addr), self.ctx[o])
        self._apply(o, line, acts)
        if self.memory.observe_selfinv(addr, o, cause):
            msgs.append({"kind": "AllInv", "address": hex(addr), "origin": "mem", "destination": None})
            for c in range(len(self.cores)):
                ln = self.lookup(c, addr)
                if ln is not None and ln.state is State.SI:
                    ln, acts = handle_bus_event(ln, BusEvent("AllInv", addr), self.ctx[c])
                    self._apply(c, ln, acts)

    def _deliver_send_data(self, e, dest: int, t: int, msgs: list) -> None:
        e.valid = False
        o, addr = e.origin, e.address
        msgs.append({"kind": "SendData", "address": hex(addr), "origin": o, "destination": dest})
        line = self.lookup(o, addr)
        token = line.data_token
        line, _ = handle_bus_event(line, BusEvent("OwnSendData", addr, requester=dest), self.ctx[o])
        self.memory.observe_send_data(addr, o, dest, token)
        self._start_transfer(dest, addr, token, t)

    def _broadcast_putm(self, h: int, addr: int, msgs: list) -> None:
        msgs.append({"kind": "PutM", "address": hex(addr), "origin": h, "destination": "mem"})
        self.cores[h].pending = None
        line = self.lookup(h, addr)
        token = line.data_token
        line, _ = handle_bus_event(line, BusEvent("OwnPutM", addr), self.ctx[h])
        self.memory.observe_writeback(addr, h, token)

    def _broadcast_request(self, h: int, kind: MessageKind, addr: int, t: int, msgs: list) -> None:
        core = self.cores[h]
        crit = core.criticality
        core.pending = None
        core.yielded = False
        msgs.append({"kind": kind.value, "address": hex(addr), "origin": h, "destination": None})
        self._mark_grant(h, addr)
        self.memory.observe_request(kind, addr, h, crit, t)
        if crit is Criticality.CR:
            invalidate_stale_ncr_responses(self.prsp, addr)
        own = "OwnGetS" if kind is MessageKind.GET_S else "OwnGetM"
        other = "OtherGetS" if kind is MessageKind.GET_S else "OtherGetM"
        line = self.lookup(h, addr)
        line, acts = handle_bus_event(line, BusEvent(own, addr), self.ctx[h])
        self._apply(h, line, acts)
        for c in range(len(self.cores)):
            if c == h:
                continue
            ln = self.lookup(c, addr)
            if ln is None:
                continue
            ln, acts = handle_bus_event(ln, BusEvent(other, addr, requester=h, requester_crit=crit), self.ctx[c])
            self._apply(c, ln, acts)
            self._poll(c, ln)

    def _start_transfer(self, dest: int, addr: int, token: int, t: int) -> None:
        rec = self.cores[dest].record
        if rec is not None and rec.address == addr:
            rec.transfer_start_cycle = t
        self.transfers.append(Transfer(t + self.config.access_latency, dest, addr, token))

    # ---- checks and observation --------------------------------------
    def _check_swmr(self) -> None:
        seen: dict = {}
        for i in range(len(self.cores)):
            for line in self.all_lines(i):
                if line.state in WRITER_STATES or line.state in READER_STATES:
                    w, r = seen.setdefault(line.tag, ([], []))
                    (w if line.state in WRITER_STATES else r).append(i)
        for addr, (w, r) in seen.items():
            if len(w) > 1 or (w and r):
                raise InvariantViolation(
                    f"SWMR violated for {addr:#x} at cycle {self.now}: writers {w}, readers {r}")

    def _snapshot(self, t: int) -> None:
        states = {}
        for i in range(len(self.cores)):
            line = self.lookup(i, self.snapshot_address)
            states[str(i)] = line.state.value if line is not None else State.I.value
        self.snapshots.append({"slot": t // self.sw - 1, "cycle": t, "states": states,
                               "memory": self.memory.line(self.snapshot_address).dump()["state"]})

    def dump_state(self) -> dict:
        return {
            "cycle": self.now,
            "cores": [
                {"id": c.id, "pc": c.pc, "stall": c.stall.value,
                 "pending": None if c.pending is None else [c.pending[0].value, hex(c.pending[1])],
                 "lines": [ln.dump(self.now) for ln in self.all_lines(c.id)]}
                for c in self.cores
            ],
            "memory": self.memory.dump(),
            "prsp": self.prsp.dump(),
        }

    def report(self) -> SimReport:
        cycles = self.now
        per_core = []
        for c in self.cores:
            done = [r for r in self.records if r.core == c.id]
            # a core's bandwidth is measured over its own active span
            span = max((r.completion_cycle for r in done), default=0)
            per_core.append({
                "core": c.id,
                "criticality": c.criticality.value,
                "hits": c.hits,
                "misses": c.misses,
                "reissues": c.reissues,
                "evictions": c.evictions,
                "completed": len(done),
                "finish_cycle": span,
                "bandwidth": 1000.0 * len(done) / span if span else 0.0,
            })
        total_slots = max(1, -(-cycles // self.sw))
        return SimReport(
            config=self.config,
            cycles=cycles,
            records=list(self.records),
            per_core=per_core,
            bus_utilization=min(1.0, self.slots_used / total_slots),
            timer_events=dict(self.timer_events),
            oracle_pass=self.divergence is None,
            oracle_divergence=self.divergence,
            coverage=set(self.coverage),
            bus_log=list(self.bus_log),
            snapshots=list(self.snapshots),
        )


def run(config: SimConfig, trace: TraceFile, **kwargs) -> SimReport:
    return Simulator(config, trace, **kwargs).run()


def bus_log_lines(report: SimReport) -> str:
    return "".join(json.dumps(entry, sort_keys=True) + "\n" for entry in report.bus_log)
