import pytest

from hourglass.controller import (
    TABLE_A1,
    UNREACHABLE_A1,
    Act,
    BusEvent,
    CoreEvent,
    Ctx,
    LineMeta,
    handle_bus_event,
    handle_core_event,
    legal_a1_cells,
    respond_with_data,
    table_i_cells,
    tick_timers,
)
from hourglass.core import Criticality, MessageKind, ProtocolViolation, State, TimerCycles

A = 0x1000
CR, NCR = Criticality.CR, Criticality.NCR
TIMERS = TimerCycles(200, 400, 100, 200)


def ctx(core=0, crit=CR, now=0, timers=TIMERS):
    return Ctx(core, crit, timers, now)


def kinds(actions):
    return [(a.kind, a.msg) for a in actions]


def test_load_miss_issues_gets():
    line, acts = handle_core_event(LineMeta(A), CoreEvent("Load", A), ctx())
    assert line.state is State.IS_AD
    assert kinds(acts) == [(Act.ISSUE, MessageKind.GET_S)]


def test_store_in_s_waits_for_timer():
    line, acts = handle_core_event(LineMeta(A, State.S), CoreEvent("Store", A), ctx())
    assert line.state is State.S_T_M
    assert kinds(acts) == [(Act.WAIT_TIMER, None)]


def test_load_in_m_hits():
    line, acts = handle_core_event(LineMeta(A, State.M), CoreEvent("Load", A), ctx())
    assert line.state is State.M
    assert acts[0].kind is Act.HIT


def test_upgrade_timeout_posts_selfinv_then_getm():
    line, acts = handle_core_event(LineMeta(A, State.S_T_M), CoreEvent("Timeout", A, CR), ctx())
    assert line.state is State.SM_A
    assert kinds(acts) == [(Act.POST, MessageKind.SELF_INV)]
    # the GetM follows once the SelfInv is ordered on the bus
    line, acts = handle_bus_event(line, BusEvent("OwnSelfInv", A), ctx())
    assert line.state is State.IM_AD
    assert kinds(acts) == [(Act.ISSUE, MessageKind.GET_M)]


def test_replacement_of_m_issues_putm():
    line, acts = handle_core_event(LineMeta(A, State.M), CoreEvent("Replacement", A), ctx())
    assert line.state is State.MI_R
    assert kinds(acts) == [(Act.ISSUE, MessageKind.PUT_M)]


def test_ncr_in_im_d_reissues_on_cr_getm():
    line, acts = handle_bus_event(LineMeta(A, State.IM_D), BusEvent("OtherGetM", A, 0, CR), ctx(2, NCR))
    assert line.state is State.IM_AD
    assert kinds(acts) == [(Act.REISSUE, MessageKind.GET_M)]


def test_cr_in_im_d_records_ncr_requester():
    line, acts = handle_bus_event(LineMeta(A, State.IM_D), BusEvent("OtherGetM", A, 2, NCR), ctx(0, CR))
    assert line.state is State.IM_DI
    assert line.ncr_dest == 2
    assert acts[0].kind is Act.RECORD_DEST and acts[0].crit is NCR


@pytest.mark.parametrize("self_crit", [CR, NCR])
def test_m_sees_cr_gets(self_crit):
    line, acts = handle_bus_event(LineMeta(A, State.M), BusEvent("OtherGetS", A, 1, CR), ctx(3, self_crit))
    assert line.state is State.M_T_I
    assert line.cr_dest == 1
    assert [a.kind for a in acts] == [Act.RECORD_DEST, Act.WAIT_TIMER]


def test_data_fill_without_dest_goes_to_m():
    line, acts = handle_bus_event(LineMeta(A, State.IM_D), BusEvent("Data", A, token=5), ctx(now=40))
    assert line.state is State.M
    assert line.data_token == 5
    assert Act.STORE_VALUE in [a.kind for a in acts]
    assert (line.cr_deadline, line.ncr_deadline) == (240, 440)


def test_data_fill_with_dest_goes_to_m_t_i():
    line = LineMeta(A, State.IM_DI, ncr_dest=2)
    line, acts = handle_bus_event(line, BusEvent("Data", A, token=1), ctx())
    assert line.state is State.M_T_I
    assert Act.LOAD_TIMERS in [a.kind for a in acts]


def test_allinv_clears_si():
    line, acts = handle_bus_event(LineMeta(A, State.SI), BusEvent("AllInv", A), ctx())
    assert line.state is State.I
    assert acts == []


def test_tick_plain_decrement():
    line = LineMeta(A, State.M, cr_deadline=5, ncr_deadline=8)
    line, ev = tick_timers(line, ctx(now=1))
    assert ev is None
    assert (line.cr_timer(1), line.ncr_timer(1)) == (4, 7)


def test_tick_restarts_idle_m():
    line = LineMeta(A, State.M, cr_deadline=200, ncr_deadline=400)
    line, ev = tick_timers(line, ctx(now=200))
    assert ev == CoreEvent("Timeout", A, CR)
    line, acts = handle_core_event(line, ev, ctx(now=200))
    assert line.state is State.M
    assert acts[0].kind is Act.RESTART_TIMERS
    assert line.cr_deadline == 400


def test_m_t_i_timeout_sends_data_to_cr_dest():
    line = LineMeta(A, State.M_T_I, cr_deadline=200, ncr_deadline=400, cr_dest=0)
    line, ev = tick_timers(line, ctx(3, NCR, now=199))
    assert ev is None
    line, ev = tick_timers(line, ctx(3, NCR, now=200))
    assert ev is not None
    line, acts = handle_core_event(line, ev, ctx(3, NCR, now=200))
    assert line.state is State.MI_A
    assert len(acts) == 1
    assert acts[0].msg is MessageKind.SEND_DATA and acts[0].core == 0


def test_respond_prefers_cr_destination():
    line = LineMeta(A, State.MI_A, cr_dest=0, ncr_dest=2)
    _, acts = handle_core_event(LineMeta(A, State.M_T_I, cr_dest=0, ncr_dest=2), CoreEvent("Timeout", A, CR), ctx(3, NCR))
    assert acts[0].core == 0
    line, act = respond_with_data(line, BusEvent("OwnSendData", A, requester=0), ctx(3, NCR))
    assert line.state is State.I
    assert act.kind is Act.SUPPLY_DATA and act.core == 0


def test_putm_writes_back():
    line, act = respond_with_data(LineMeta(A, State.MI_R), BusEvent("OwnPutM", A), ctx())
    assert line.state is State.I
    assert act.kind is Act.WRITE_BACK


def test_own_selfinv_from_si_a():
    line, _ = handle_bus_event(LineMeta(A, State.SI_A, cr_dest=1), BusEvent("OwnSelfInv", A), ctx())
    assert line.state is State.SI
    assert line.cr_dest is None


def test_first_destination_sticks():
    line = LineMeta(A, State.M)
    line, _ = handle_bus_event(line, BusEvent("OtherGetM", A, 1, CR), ctx(2, NCR))
    line, _ = handle_bus_event(line, BusEvent("OtherGetS", A, 3, NCR), ctx(2, NCR))
    assert (line.cr_dest, line.ncr_dest) == (1, 3)


def test_illegal_cells_raise():
    illegal = [(st, col) for st, row in TABLE_A1.items() for col, mark in row.items() if mark == "x"]
    assert illegal
    for st, col in illegal:
        line = LineMeta(A, st)
        with pytest.raises(ProtocolViolation):
            if col in ("Load", "Store", "Replacement", "Timeout"):
                handle_core_event(line, CoreEvent(col, A, CR), ctx())
            else:
                handle_bus_event(line, BusEvent(col, A, 1, CR), ctx())


def test_cell_inventories():
    legal = legal_a1_cells()
    assert not set(legal) & UNREACHABLE_A1
    assert len(set(legal)) == len(legal)
    assert len(table_i_cells()) == 2 * 4 * 4
