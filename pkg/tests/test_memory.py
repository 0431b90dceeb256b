from hourglass.core import Criticality, MessageKind
from hourglass.memory import MemState, PrLutEntry, SharedMemory, cancel_ncr_on_cr, service_order

A, B = 0x1000, 0x1040
CR, NCR = Criticality.CR, Criticality.NCR
GETS, GETM = MessageKind.GET_S, MessageKind.GET_M


def entry(core, crit, t, addr=A, kind=GETM, seq=None):
    return PrLutEntry(addr, core, crit, kind, t, seq if seq is not None else t)


def test_getm_on_idle_line_supplied_by_memory():
    mem = SharedMemory(4)
    mem.observe_request(GETM, A, 3, NCR, 0)
    e = mem.serviceable(3)
    assert e is not None
    mem.supply(e)
    ml = mem.line(A)
    assert ml.state is MemState.M and ml.owner == 3


def test_getm_defers_until_sharers_selfinvalidate():
    mem = SharedMemory(4)
    for c in (0, 2):
        mem.observe_request(GETS, A, c, CR if c == 0 else NCR, c)
        mem.supply(mem.serviceable(c))
    assert mem.line(A).sharers == {0, 2}
    mem.observe_request(GETM, A, 1, CR, 10)
    assert mem.serviceable(1) is None
    assert mem.observe_selfinv(A, 0, cause=1) is False
    assert mem.line(A).sharers == {2}
    assert mem.observe_selfinv(A, 2, cause=1) is True
    assert mem.line(A).state is MemState.I
    assert mem.serviceable(1) is not None


def test_reader_joins_sharers():
    mem = SharedMemory(8)
    mem.observe_request(GETS, A, 5, NCR, 0)
    mem.supply(mem.serviceable(5))
    mem.observe_request(GETS, A, 2, CR, 1)
    mem.supply(mem.serviceable(2))
    assert mem.line(A).sharers == {5, 2}
    assert mem.line(A).state is MemState.S


def test_replacement_selfinv_without_writer():
    mem = SharedMemory(4)
    mem.observe_request(GETS, A, 1, CR, 0)
    mem.supply(mem.serviceable(1))
    assert mem.observe_selfinv(A, 1, cause=1) is False
    assert mem.line(A).state is MemState.I


def test_cancel_ncr_same_address():
    lut = [entry(2, NCR, 0)]
    cancel_ncr_on_cr(A, GETM, lut)
    assert not lut[0].valid


def test_cancel_ncr_other_address_untouched():
    lut = [entry(2, NCR, 0, addr=B)]
    cancel_ncr_on_cr(A, GETM, lut)
    assert lut[0].valid


def test_cr_gets_cancels_all_ncr_writers():
    lut = [entry(2, NCR, 0), entry(3, NCR, 1)]
    cancel_ncr_on_cr(A, GETS, lut)
    assert not any(e.valid for e in lut)


def test_cr_entries_never_cancelled():
    lut = [entry(1, CR, 0)]
    cancel_ncr_on_cr(A, GETM, lut)
    assert lut[0].valid


def test_service_order():
    assert service_order([entry(2, NCR, 5), entry(0, CR, 9)], A).requester == 0
    assert service_order([entry(0, CR, 3), entry(1, CR, 7)], A).requester == 0
    assert service_order([entry(2, NCR, 5)], A).requester == 2
    assert service_order([entry(2, NCR, 5)], B) is None


def test_skip_allinv_mutation_grants_early():
    mem = SharedMemory(4, skip_allinv=True)
    mem.observe_request(GETS, A, 0, CR, 0)
    mem.supply(mem.serviceable(0))
    mem.observe_request(GETM, A, 1, CR, 1)
    assert mem.serviceable(1) is not None


def test_cr_gets_keeps_ncr_reader():
    lut = [entry(2, NCR, 0, kind=GETS)]
    cancel_ncr_on_cr(A, GETS, lut)
    assert lut[0].valid
