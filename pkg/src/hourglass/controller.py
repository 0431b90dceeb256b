"""Private cache controller: the complete HourGlass line FSM with dual timers.

The controller functions are deterministic and mutate the ``LineMeta`` they are
given; they return it together with the list of actions the engine must carry
out (bus requests, pending responses, data movement).  Cells of the transition
table that can never occur raise :class:`ProtocolViolation`.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

from .core import Criticality, MessageKind, ProtocolViolation, State, TimerCycles, timer_initial_values

S_ = State

CORE_COLUMNS = ("Load", "Store", "Replacement", "Timeout")
BUS_COLUMNS = (
    "OwnGetS", "OwnGetM", "OwnPutM", "OwnSelfInv", "AllInv", "OwnSendData", "Data", "OtherGetS", "OtherGetM",
)
COLUMNS = CORE_COLUMNS + BUS_COLUMNS

# 'T' transition, '-' observed without effect, 'x' impossible, '*' resolved per criticality
_A1_ROWS = {
    # state:    Load Store Repl Tmo  OGetS OGetM OPutM OSInv AInv OSend Data OthS OthM
    S_.I:      "T T x x x x x x x x x - -",
    S_.IS_AD:  "x x x x T x x x x x x - -",
    S_.IS_D:   "x x x x x x x x x x T * *",
    S_.IS_DI:  "x x x x x x x x x x T * *",
    S_.S:      "T T T T x x x x x x x - T",
    S_.S_T_I:  "T T T T x x x x x x x - T",
    S_.SI_A:   "T T T x x x x T x x x - T",
    S_.SI:     "T T T x x x x x T x x - -",
    S_.S_T_M:  "T x x T x x x x x x x - T",
    S_.SM_A:   "T x x x x x x T x x x - T",
    S_.IM_AD:  "x x x x x T x x x x x - -",
    S_.IM_D:   "x x x x x x x x x x T * *",
    S_.IM_DI:  "x x x x x x x x x x T * *",
    S_.M:      "T T T T x x x x x x x T T",
    S_.M_T_I:  "T T T T x x x x x x x T T",
    S_.MI_R:   "T T x x x x T x x T x T T",
    S_.MI_A:   "T T T x x x T x x T x T T",
}
TABLE_A1: dict[State, dict[str, str]] = {
    state: dict(zip(COLUMNS, row.split())) for state, row in _A1_ROWS.items()
}

# Cells the table defines but an in-order core with one outstanding request never
# produces: the core is stalled on its own store (S_T_M, SM_A) or on the miss that
# forced the eviction (MI_R), and PutM is only ever issued from MI_R.
UNREACHABLE_A1 = frozenset({
    (S_.S_T_M, "Load"),
    (S_.SM_A, "Load"),
    (S_.MI_R, "Load"),
    (S_.MI_R, "Store"),
    (S_.MI_A, "OwnPutM"),
})

D_STATES = (S_.IS_D, S_.IS_DI, S_.IM_D, S_.IM_DI)
OTHER_COLUMNS = ("OtherGetS-cr", "OtherGetS-ncr", "OtherGetM-cr", "OtherGetM-ncr")


def legal_a1_cells() -> list[tuple[State, str]]:
    """Legal stable-state cells the coverage suite must exercise (criticality-split cells excluded)."""
    return [
        (state, col)
        for state, row in TABLE_A1.items()
        for col, mark in row.items()
        if mark in ("T", "-") and (state, col) not in UNREACHABLE_A1
    ]


def table_i_cells() -> list[tuple[Criticality, State, str]]:
    return [(crit, state, col) for crit in Criticality for state in D_STATES for col in OTHER_COLUMNS]


class Act(enum.Enum):
    ISSUE = "issue"              # own bus request (GetS/GetM/PutM)
    REISSUE = "reissue"          # own request re-arbitrated after a cr request
    WITHDRAW = "withdraw"        # drop own pending PutM in favour of SendData
    POST = "post"                # deferred response into this core's PRSP buffer
    HIT = "hit"
    WAIT_TIMER = "wait_timer"
    LOAD_TIMERS = "load_timers"
    RESTART_TIMERS = "restart_timers"
    RECORD_DEST = "record_dest"
    SUPPLY_DATA = "supply_data"
    WRITE_BACK = "write_back"
    LOAD_VALUE = "load_value"
    STORE_VALUE = "store_value"


class Action(NamedTuple):
    kind: Act
    msg: Optional[MessageKind] = None
    core: Optional[int] = None
    crit: Optional[Criticality] = None


@dataclass
class LineMeta:
    """Tag-side metadata of one private cache line.

    Timers are kept as absolute deadlines; ``cr_timer(now)`` gives the count
    remaining.  In S and M an expired timer is restarted in place.
    """

    tag: int
    state: State = State.I
    cr_deadline: int = 0
    ncr_deadline: int = 0
    cr_dest: Optional[int] = None
    ncr_dest: Optional[int] = None
    data_token: int = 0
    observed_remote_write: bool = False

    def cr_timer(self, now: int) -> int:
        return max(0, self.cr_deadline - now)

    def ncr_timer(self, now: int) -> int:
        return max(0, self.ncr_deadline - now)

    def clear(self) -> None:
        self.state = State.I
        self.cr_dest = self.ncr_dest = None
        self.observed_remote_write = False

    def dump(self, now: int) -> dict:
        return {
            "tag": self.tag,
            "state": self.state.value,
            "cr_timer": self.cr_timer(now),
            "ncr_timer": self.ncr_timer(now),
            "cr_dest": self.cr_dest,
            "ncr_dest": self.ncr_dest,
            "token": self.data_token,
        }


@dataclass
class Ctx:
    """Per-controller constants plus the current cycle."""

    core: int
    crit: Criticality
    timers: TimerCycles
    now: int = 0
    overwrite_dest: bool = False  # mutation: break destination stickiness
    coverage: Optional[set] = field(default=None, repr=False)

    def cover(self, key) -> None:
        if self.coverage is not None:
            self.coverage.add(key)


class CoreEvent(NamedTuple):
    kind: str  # Load | Store | Replacement | Timeout
    address: int
    which_timer: Optional[Criticality] = None


class BusEvent(NamedTuple):
    kind: str  # one of BUS_COLUMNS
    address: int
    requester: Optional[int] = None
    requester_crit: Optional[Criticality] = None
    token: int = 0


def _illegal(line: LineMeta, col: str):
    raise ProtocolViolation(f"illegal event {col} in state {line.state.value} for line {line.tag:#x}")


def _record(line: LineMeta, crit: Criticality, core: int, ctx: Ctx) -> list[Action]:
    if crit is Criticality.CR:
        if line.cr_dest is None or ctx.overwrite_dest:
            line.cr_dest = core
    elif line.ncr_dest is None or ctx.overwrite_dest:
        line.ncr_dest = core
    return [Action(Act.RECORD_DEST, core=core, crit=crit)]


def response_target(line: LineMeta, ctx: Ctx) -> int:
    """Destination of a timer-released response: cr requester first, then ncr, else self."""
    if line.cr_dest is not None:
        return line.cr_dest
    if line.ncr_dest is not None:
        return line.ncr_dest
    return ctx.core


def upgrade_cause(line: LineMeta, ctx: Ctx) -> int:
    # an own S->M upgrade never waits on a slack slot of some ncr requester
    return line.cr_dest if line.cr_dest is not None else ctx.core


def own_timer(line: LineMeta, ctx: Ctx) -> int:
    return line.cr_timer(ctx.now) if ctx.crit is Criticality.CR else line.ncr_timer(ctx.now)


def _load_timers(line: LineMeta, ctx: Ctx) -> Action:
    cr_v, ncr_v = timer_initial_values(ctx.crit, ctx.timers)
    line.cr_deadline = ctx.now + cr_v
    line.ncr_deadline = ctx.now + ncr_v
    line.observed_remote_write = False
    return Action(Act.LOAD_TIMERS)


def handle_core_event(line: LineMeta, event: CoreEvent, ctx: Ctx) -> tuple[LineMeta, list[Action]]:
    st = line.state
    col = event.kind
    if TABLE_A1[st][col] == "x":
        _illegal(line, col)
    ctx.cover((st, col))
    if col == "Load":
        if st is S_.I:
            line.state = S_.IS_AD
            return line, [Action(Act.ISSUE, MessageKind.GET_S)]
        return line, [Action(Act.HIT), Action(Act.LOAD_VALUE)]
    if col == "Store":
        if st is S_.I or st is S_.SI:
            line.state = S_.IM_AD
            return line, [Action(Act.ISSUE, MessageKind.GET_M)]
        if st is S_.S or st is S_.S_T_I:
            line.state = S_.S_T_M
            return line, [Action(Act.WAIT_TIMER)]
        if st is S_.SI_A:
            line.state = S_.SM_A
            return line, [Action(Act.POST, MessageKind.SELF_INV, upgrade_cause(line, ctx))]
        return line, [Action(Act.HIT), Action(Act.STORE_VALUE)]
    if col == "Replacement":
        if st is S_.S or st is S_.S_T_I:
            line.state = S_.SI_A
            return line, [Action(Act.POST, MessageKind.SELF_INV, response_target(line, ctx))]
        if st is S_.SI_A:
            return line, [Action(Act.POST, MessageKind.SELF_INV, response_target(line, ctx))]
        if st is S_.SI:
            line.clear()
            return line, []
        if st is S_.M:
            line.state = S_.MI_R
            return line, [Action(Act.ISSUE, MessageKind.PUT_M)]
        if st is S_.M_T_I:
            line.state = S_.MI_R
            return line, [Action(Act.POST, MessageKind.SEND_DATA, response_target(line, ctx))]
        # MI_A: the SendData already queued carries the line out
        line.state = S_.MI_R
        return line, []
    # Timeout
    if st is S_.S or st is S_.M:
        return line, [Action(Act.RESTART_TIMERS, crit=event.which_timer)]
    if st is S_.S_T_I:
        line.state = S_.SI_A
        return line, [Action(Act.POST, MessageKind.SELF_INV, response_target(line, ctx))]
    if st is S_.S_T_M:
        line.state = S_.SM_A
        return line, [Action(Act.POST, MessageKind.SELF_INV, upgrade_cause(line, ctx))]
    line.state = S_.MI_A
    return line, [Action(Act.POST, MessageKind.SEND_DATA, response_target(line, ctx))]


def _table_i(line: LineMeta, event: BusEvent, ctx: Ctx) -> tuple[LineMeta, list[Action]]:
    st = line.state
    is_getm = event.kind == "OtherGetM"
    req_crit = event.requester_crit
    col = f"{event.kind}-{req_crit.value}"
    ctx.cover((ctx.crit, st, col))
    reading = st is S_.IS_D or st is S_.IS_DI
    if reading and not is_getm:
        return line, []
    if ctx.crit is Criticality.NCR and req_crit is Criticality.CR:
        line.cr_dest = line.ncr_dest = None
        if reading:
            line.state = S_.IS_AD
            return line, [Action(Act.REISSUE, MessageKind.GET_S)]
        line.state = S_.IM_AD
        return line, [Action(Act.REISSUE, MessageKind.GET_M)]
    acts = _record(line, req_crit, event.requester, ctx)
    if st is S_.IS_D:
        line.state = S_.IS_DI
    elif st is S_.IM_D:
        line.state = S_.IM_DI
    return line, acts


def handle_bus_event(line: LineMeta, event: BusEvent, ctx: Ctx) -> tuple[LineMeta, list[Action]]:
    st = line.state
    col = event.kind
    mark = TABLE_A1[st][col]
    if mark == "x":
        _illegal(line, col)
    if mark == "*":
        return _table_i(line, event, ctx)
    ctx.cover((st, col))
    if mark == "-":
        return line, []
    if col == "OwnGetS":
        line.state = S_.IS_D
        return line, []
    if col == "OwnGetM":
        line.state = S_.IM_D
        return line, []
    if col == "OwnSelfInv":
        line.cr_dest = line.ncr_dest = None
        if st is S_.SI_A:
            line.state = S_.SI
            return line, []
        line.state = S_.IM_AD
        return line, [Action(Act.ISSUE, MessageKind.GET_M)]
    if col == "AllInv":
        line.clear()
        return line, []
    if col == "OwnPutM" or col == "OwnSendData":
        line, act = respond_with_data(line, event, ctx)
        return line, [act]
    if col == "Data":
        line.data_token = event.token
        timers = _load_timers(line, ctx)
        if st is S_.IS_D or st is S_.IS_DI:
            line.state = S_.S if st is S_.IS_D else S_.S_T_I
            return line, [Action(Act.LOAD_VALUE), timers]
        line.state = S_.M if st is S_.IM_D else S_.M_T_I
        return line, [Action(Act.STORE_VALUE), timers]
    # OtherGetS / OtherGetM on a line holding valid data
    acts = _record(line, event.requester_crit, event.requester, ctx)
    if col == "OtherGetM":
        line.observed_remote_write = True
    if st is S_.S:
        line.state = S_.S_T_I
        acts.append(Action(Act.WAIT_TIMER))
    elif st is S_.M:
        line.state = S_.M_T_I
        acts.append(Action(Act.WAIT_TIMER))
    elif st is S_.SI_A:
        acts.append(Action(Act.POST, MessageKind.SELF_INV, response_target(line, ctx)))
    elif st is S_.SM_A:
        acts.append(Action(Act.POST, MessageKind.SELF_INV, upgrade_cause(line, ctx)))
    elif st is S_.MI_R or st is S_.MI_A:
        acts.append(Action(Act.POST, MessageKind.SEND_DATA, response_target(line, ctx)))
        if st is S_.MI_R:
            acts.append(Action(Act.WITHDRAW, MessageKind.PUT_M))
    return line, acts


def respond_with_data(line: LineMeta, event: BusEvent, ctx: Ctx) -> tuple[LineMeta, Action]:
    """Release the line once its own PutM or SendData is ordered on the bus."""
    st = line.state
    if event.kind == "OwnPutM":
        if st is not S_.MI_R:
            _illegal(line, event.kind)
        line.clear()
        return line, Action(Act.WRITE_BACK)
    if event.kind == "OwnSendData":
        if st is not S_.MI_R and st is not S_.MI_A:
            _illegal(line, event.kind)
        if event.requester is None:
            raise ProtocolViolation(f"SendData for line {line.tag:#x} has no destination")
        line.clear()
        return line, Action(Act.SUPPLY_DATA, core=event.requester)
    if event.kind == "OwnSelfInv" and st is S_.SI_A:
        line.state = S_.SI
        return line, Action(Act.HIT)
    _illegal(line, event.kind)


def timeout_due(line: LineMeta, ctx: Ctx) -> bool:
    """Whether a held line must now release its pending response."""
    st = line.state
    now = ctx.now
    due = (line.cr_dest is not None and line.cr_deadline <= now) or (
        line.ncr_dest is not None and line.ncr_deadline <= now
    )
    if st is S_.S_T_M:
        return due or own_timer(line, ctx) == 0
    if st is S_.S_T_I or st is S_.M_T_I:
        return due
    return False


def tick_timers(line: LineMeta, ctx: Ctx) -> tuple[LineMeta, Optional[CoreEvent]]:
    """Evaluate the line's timers at ``ctx.now``.

    In S and M an expired timer is restarted (RT) and reported as a Timeout on
    that timer; in the waiting states the Timeout fires once the timer
    governing a recorded requester (or the own upgrade) reaches zero.
    """
    st = line.state
    now = ctx.now
    if st is S_.S or st is S_.M:
        cr_v, ncr_v = timer_initial_values(ctx.crit, ctx.timers)
        which = None
        if line.cr_deadline == now:
            which = Criticality.CR
            if cr_v:
                line.cr_deadline = now + cr_v
        if line.ncr_deadline == now:
            which = which or Criticality.NCR
            if ncr_v:
                line.ncr_deadline = now + ncr_v
        if which is None:
            return line, None
        return line, CoreEvent("Timeout", line.tag, which)
    if timeout_due(line, ctx):
        which = Criticality.CR if line.cr_deadline <= now else Criticality.NCR
        return line, CoreEvent("Timeout", line.tag, which)
    return line, None


def next_timer_deadline(line: LineMeta, ctx: Ctx) -> Optional[int]:
    """Earliest future cycle at which ``tick_timers`` may produce an event."""
    st = line.state
    now = ctx.now
    if st is S_.S or st is S_.M:
        cands = [d for d in (line.cr_deadline, line.ncr_deadline) if d > now]
    elif st is S_.S_T_M:
        own = line.cr_deadline if ctx.crit is Criticality.CR else line.ncr_deadline
        cands = [own]
        if line.cr_dest is not None:
            cands.append(line.cr_deadline)
        if line.ncr_dest is not None:
            cands.append(line.ncr_deadline)
        cands = [d for d in cands if d > now]
    elif st is S_.S_T_I or st is S_.M_T_I:
        cands = []
        if line.cr_dest is not None and line.cr_deadline > now:
            cands.append(line.cr_deadline)
        if line.ncr_dest is not None and line.ncr_deadline > now:
            cands.append(line.ncr_deadline)
    else:
        return None
    return min(cands) if cands else None
