"""Shared-memory side of the protocol: I/S/M line tracking, sharer bits and the PR LUT."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional

from .core import Criticality, MessageKind, ProtocolViolation


class UnknownSharer(ProtocolViolation):
    pass


class MemState(enum.Enum):
    I = "I"
    S = "S"
    M = "M"


@dataclass
class PrLutEntry:
    address: int
    requester: int
    criticality: Criticality
    kind: MessageKind
    arrival: int
    seq: int
    valid: bool = True


@dataclass
class MemLine:
    state: MemState = MemState.I
    sharers: set = field(default_factory=set)
    owner: Optional[int] = None
    token: int = 0
    # a sharer self-invalidated on behalf of a remote requester; its holder waits for AllInv
    awaiting_allinv: bool = False

    def dump(self) -> dict:
        return {
            "state": self.state.value,
            "sharers": sorted(self.sharers),
            "owner": self.owner,
            "token": self.token,
        }


def cancel_ncr_on_cr(address: int, kind: MessageKind, lut: list[PrLutEntry]) -> list[PrLutEntry]:
    """Invalidate the ncr entries for ``address`` that a cr request of ``kind`` preempts.

    A cr GetM cancels every pending ncr request; a cr GetS cancels pending ncr
    GetMs only, because an ncr reader waiting for data keeps its request.
    """
    for entry in lut:
        if entry.valid and entry.address == address and entry.criticality is Criticality.NCR:
            if kind is MessageKind.GET_M or entry.kind is MessageKind.GET_M:
                entry.valid = False
    return lut


def service_order(lut: list[PrLutEntry], address: int) -> Optional[PrLutEntry]:
    """Oldest valid cr entry for ``address``, else the oldest valid ncr entry."""
    best = None
    for entry in lut:
        if not entry.valid or entry.address != address:
            continue
        if best is None:
            best = entry
            continue
        rank = (entry.criticality is not Criticality.CR, entry.arrival, entry.seq)
        if rank < (best.criticality is not Criticality.CR, best.arrival, best.seq):
            best = entry
    return best


class SharedMemory:
    """Memory-side coherence engine.

    Requests always enter the PR LUT; ``serviceable`` tells the bus whether the
    memory can answer a given requester in the current slot.
    """

    def __init__(self, n_cores: int, skip_allinv: bool = False):
        self.n_cores = n_cores
        self.lines: dict[int, MemLine] = {}
        self.lut: list[PrLutEntry] = []
        self._seq = 0
        self.skip_allinv = skip_allinv  # mutation: grant writers without waiting for sharers

    def line(self, address: int) -> MemLine:
        ml = self.lines.get(address)
        if ml is None:
            ml = self.lines[address] = MemLine()
        return ml

    def pending(self, address: int) -> list[PrLutEntry]:
        return [e for e in self.lut if e.valid and e.address == address]

    def entry_for(self, core: int) -> Optional[PrLutEntry]:
        for e in self.lut:
            if e.valid and e.requester == core:
                return e
        return None

    def _gc(self) -> None:
        self.lut = [e for e in self.lut if e.valid]

    def observe_request(self, kind: MessageKind, address: int, requester: int, crit: Criticality, now: int) -> None:
        if kind not in (MessageKind.GET_S, MessageKind.GET_M):
            raise ProtocolViolation(f"memory cannot queue {kind.value}")
        if self.entry_for(requester) is not None:
            raise ProtocolViolation(f"core {requester} already has a pending request")
        if crit is Criticality.CR:
            cancel_ncr_on_cr(address, kind, self.lut)
            self._gc()
        if len(self.lut) >= self.n_cores:
            raise ProtocolViolation("PR LUT overflow")
        self._seq += 1
        self.lut.append(PrLutEntry(address, requester, crit, kind, now, self._seq))

    def writer_pending(self, address: int) -> bool:
        return any(e.kind is MessageKind.GET_M for e in self.pending(address))

    def serviceable(self, core: int) -> Optional[PrLutEntry]:
        """The entry of ``core`` if memory itself can supply its data now."""
        entry = self.entry_for(core)
        if entry is None:
            return None
        if service_order(self.lut, entry.address) is not entry:
            return None
        ml = self.line(entry.address)
        if ml.state is MemState.M:
            return None
        if entry.kind is MessageKind.GET_M and ml.sharers and not self.skip_allinv:
            return None
        return entry

    def supply(self, entry: PrLutEntry) -> int:
        """Send data for ``entry``; returns the token carried."""
        ml = self.line(entry.address)
        if ml.state is MemState.M:
            raise ProtocolViolation("memory supplied data while a writer exists")
        entry.valid = False
        self._gc()
        if entry.kind is MessageKind.GET_S:
            ml.state = MemState.S
            ml.sharers.add(entry.requester)
        else:
            ml.state = MemState.M
            ml.owner = entry.requester
            ml.sharers.clear()
        return ml.token

    def observe_selfinv(self, address: int, sender: int, cause: int) -> bool:
        """Drop ``sender`` from the sharers; returns True when AllInv must be broadcast."""
        ml = self.line(address)
        if sender not in ml.sharers:
            raise UnknownSharer(f"core {sender} is not a sharer of {address:#x}")
        ml.sharers.discard(sender)
        if cause != sender:
            ml.awaiting_allinv = True
        if ml.sharers:
            return False
        ml.state = MemState.I
        if ml.awaiting_allinv or self.writer_pending(address):
            ml.awaiting_allinv = False
            return True
        return False

    def observe_send_data(self, address: int, origin: int, dest: int, token: int) -> None:
        """Cache-to-cache transfer: memory snoops the data and tracks the new holder."""
        ml = self.line(address)
        if ml.state is not MemState.M or ml.owner != origin:
            raise ProtocolViolation(f"SendData from non-owner {origin} for {address:#x}")
        ml.token = token
        entry = self.entry_for(dest)
        if entry is None or entry.address != address:
            raise ProtocolViolation(f"SendData to core {dest} without a pending request")
        entry.valid = False
        self._gc()
        if entry.kind is MessageKind.GET_M:
            ml.owner = dest
        else:
            ml.state = MemState.S
            ml.owner = None
            ml.sharers = {dest}

    def observe_writeback(self, address: int, origin: int, token: int) -> None:
        ml = self.line(address)
        if ml.state is not MemState.M or ml.owner != origin:
            raise ProtocolViolation(f"PutM from non-owner {origin} for {address:#x}")
        ml.token = token
        ml.state = MemState.I
        ml.owner = None

    def dump(self) -> dict:
        return {
            "lines": {hex(a): ml.dump() for a, ml in sorted(self.lines.items())},
            "pr_lut": [
                {"address": hex(e.address), "requester": e.requester, "criticality": e.criticality.value,
                 "kind": e.kind.value, "arrival": e.arrival}
                for e in self.lut if e.valid
            ],
        }
