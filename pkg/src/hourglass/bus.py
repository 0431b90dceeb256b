"""Criticality-aware TDM snooping bus: slot schedule, PRSP buffers and slack-slot round robin."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional

from .core import Criticality, MessageKind, ProtocolViolation


class SlotOverflow(ProtocolViolation):
    pass


@dataclass
class PrspEntry:
    origin: int
    address: int
    kind: MessageKind  # SELF_INV or SEND_DATA
    destination: int
    destination_criticality: Criticality
    seq: int
    created: int
    valid: bool = True

    @property
    def self_caused(self) -> bool:
        return self.destination == self.origin


class PrspBuffers:
    """One pending-response buffer of capacity N per core.

    A core holds at most one live response per line; posting a response with a
    new destination replaces the old one.
    """

    def __init__(self, n_cores: int):
        self.n_cores = n_cores
        self.buffers: list[list[PrspEntry]] = [[] for _ in range(n_cores)]
        self._seq = 0

    def live(self, origin: int, address: int) -> Optional[PrspEntry]:
        for e in self.buffers[origin]:
            if e.valid and e.address == address:
                return e
        return None

    def post(self, origin: int, address: int, kind: MessageKind, dest: int, dest_crit: Criticality, now: int) -> PrspEntry:
        current = self.live(origin, address)
        if current is not None:
            if current.destination == dest and current.kind is kind:
                return current
            current.valid = False
        buf = self.buffers[origin]
        buf[:] = [e for e in buf if e.valid]
        if len(buf) >= self.n_cores:
            raise ProtocolViolation(f"PRSP buffer of core {origin} overflow")
        self._seq += 1
        entry = PrspEntry(origin, address, kind, dest, dest_crit, self._seq, now)
        buf.append(entry)
        return entry

    def drop(self, origin: int, address: int) -> None:
        for e in self.buffers[origin]:
            if e.address == address:
                e.valid = False

    def destined_to(self, core: int) -> list[PrspEntry]:
        out = [e for buf in self.buffers for e in buf if e.valid and e.destination == core]
        out.sort(key=lambda e: e.seq)
        return out

    def entries(self) -> Iterable[PrspEntry]:
        for buf in self.buffers:
            for e in buf:
                if e.valid:
                    yield e

    def dump(self) -> list[list[dict]]:
        return [
            [{"address": hex(e.address), "kind": e.kind.value, "destination": e.destination,
              "destination_criticality": e.destination_criticality.value} for e in buf if e.valid]
            for buf in self.buffers
        ]


def invalidate_stale_ncr_responses(prsp: PrspBuffers, address: int) -> PrspBuffers:
    """A cr request to ``address`` cancels responses already queued for ncr requesters.

    Self-caused entries (replacements, own upgrades) are not responses to anyone
    and stay valid.
    """
    for e in prsp.entries():
        if e.address == address and e.destination_criticality is Criticality.NCR and not e.self_caused:
            e.valid = False
    return prsp


class Decision(enum.Enum):
    DELIVER_RESPONSE = "DeliverResponse"
    SERVE_OWN_REQUEST = "ServeOwnRequest"
    SLACK_GRANT = "SlackGrant"
    IDLE = "Idle"


@dataclass(frozen=True)
class SlotDecision:
    kind: Decision
    holder: Optional[int]
    owner: int


def slot_owner(cycle: int, n_cr: int, slot_width: int) -> int:
    return (cycle // slot_width) % n_cr


def decide_slot(
    owner: int,
    prsp: PrspBuffers,
    has_request: Callable[[int], bool],
    memory_ready: Callable[[int], bool],
    ncr_cores: list[int],
    rr_next: int,
    grant_ncr_first: bool = False,
) -> tuple[SlotDecision, int]:
    """Pick the single core the slot serves; returns the decision and the new round-robin pointer.

    The owner keeps its slot when a response is destined to it, when it has a
    request to put on the bus, or when memory can answer it.  Otherwise the
    slot is donated to the next ncr core (round robin) that has any of those.
    """

    def response_for(core: int) -> bool:
        return bool(prsp.destined_to(core)) or memory_ready(core)

    def slack() -> Optional[int]:
        n = len(ncr_cores)
        for k in range(n):
            cand = ncr_cores[(rr_next + k) % n]
            if response_for(cand) or has_request(cand):
                return cand
        return None

    if grant_ncr_first and ncr_cores:
        cand = slack()
        if cand is not None:
            return SlotDecision(Decision.SLACK_GRANT, cand, owner), (ncr_cores.index(cand) + 1) % len(ncr_cores)
    if response_for(owner):
        return SlotDecision(Decision.DELIVER_RESPONSE, owner, owner), rr_next
    if has_request(owner):
        return SlotDecision(Decision.SERVE_OWN_REQUEST, owner, owner), rr_next
    if ncr_cores:
        cand = slack()
        if cand is not None:
            return SlotDecision(Decision.SLACK_GRANT, cand, owner), (ncr_cores.index(cand) + 1) % len(ncr_cores)
    return SlotDecision(Decision.IDLE, None, owner), rr_next


@dataclass
class LatencyRecord:
    """Timestamps of one memory operation and its latency decomposition.

    ``eligible_cycle`` is when the GetS/GetM was first queued for the bus and
    ``grant_cycle`` when it was first broadcast.  For a plain miss the request
    is eligible at issue.  An S->M upgrade first waits for its own timer and
    for its SelfInv to be ordered; that wait counts as coherence latency.
    """

    core: int
    criticality: Criticality
    op: str
    address: int
    issue_cycle: int
    eligible_cycle: Optional[int] = None
    grant_cycle: Optional[int] = None
    transfer_start_cycle: Optional[int] = None
    completion_cycle: Optional[int] = None
    hit: bool = False
    was_reissued: bool = False
    arb_latency: int = 0
    coh_latency: int = 0
    acc_latency: int = 0

    @property
    def total(self) -> int:
        return self.completion_cycle - self.issue_cycle

    def to_dict(self) -> dict:
        return {
            "core": self.core,
            "criticality": self.criticality.value,
            "op": self.op,
            "address": hex(self.address),
            "issue_cycle": self.issue_cycle,
            "eligible_cycle": self.eligible_cycle,
            "grant_cycle": self.grant_cycle,
            "transfer_start_cycle": self.transfer_start_cycle,
            "completion_cycle": self.completion_cycle,
            "arb_latency": self.arb_latency,
            "coh_latency": self.coh_latency,
            "acc_latency": self.acc_latency,
            "total": self.total if self.completion_cycle is not None else None,
            "hit": self.hit,
            "was_reissued": self.was_reissued,
        }


def record_latency_marks(record: LatencyRecord) -> LatencyRecord:
    """Fill in the arbitration / coherence / access split from the timestamps."""
    if record.hit:
        record.arb_latency = record.coh_latency = record.acc_latency = 0
        return record
    eligible = record.issue_cycle if record.eligible_cycle is None else record.eligible_cycle
    grant = record.grant_cycle
    start = record.transfer_start_cycle
    if grant is None or start is None or record.completion_cycle is None:
        raise ValueError("record is missing bus timestamps")
    record.arb_latency = grant - eligible
    record.coh_latency = (eligible - record.issue_cycle) + (start - grant)
    record.acc_latency = record.completion_cycle - start
    return record
