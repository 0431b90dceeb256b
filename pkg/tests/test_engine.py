import pytest

from hourglass import SimConfig, TraceFile, parse_trace, run
from hourglass.analysis import check_bounds, wcl_total
from hourglass.core import Criticality
from hourglass.engine import (
    MUTATIONS,
    InvariantViolation,
    Simulator,
    bus_log_lines,
    check_oracle,
    check_transition_coverage,
)
from hourglass.workloads import gen_max_sharing, scenario


def test_quiescent_tick():
    sim = Simulator(SimConfig(), TraceFile(4))
    sim.tick()
    before = sim.dump_state()
    sim.tick()
    after = sim.dump_state()
    assert after["cycle"] == before["cycle"] + 1
    before.pop("cycle"), after.pop("cycle")
    assert after == before


def test_empty_trace():
    report = run(SimConfig(), TraceFile(4))
    assert report.records == []
    assert report.cycles == 0
    assert report.oracle_pass


def test_fig7_after_seven_slots():
    config, trace, expected = scenario("fig7")
    report = run(config, trace, snapshot_address=int(expected["address"], 16))
    last = {s["slot"]: s for s in report.snapshots}[6]
    assert last["states"]["0"] == "M"
    assert last["states"]["3"] == "I"
    # c2's reissued write is still waiting for the bus
    assert last["states"]["2"] == "IM_AD"
    assert report.per_core[2]["reissues"] == 1


def test_same_seed_same_log():
    cfg = SimConfig()
    trace = gen_max_sharing(4, 2, 40, 0.5, seed=11)
    a = run(cfg, trace, bus_log=True)
    b = run(cfg, trace, bus_log=True)
    assert bus_log_lines(a) == bus_log_lines(b)
    assert a.to_json() == b.to_json()


def test_max_sharing_within_bound():
    cfg = SimConfig()
    report = run(cfg, gen_max_sharing(4, 1, 60, 0.7, seed=4))
    assert report.cr_records()
    assert check_bounds(report, wcl_total(cfg)).passed


def test_oracle_passes_on_clean_run():
    report = run(SimConfig(), gen_max_sharing(4, 2, 40, 0.5, seed=2))
    ok, divergence = check_oracle(report)
    assert ok and divergence is None


def test_skip_allinv_breaks_invariants():
    trace = parse_trace("# cores: 3\n0 L 0x1000\n1 L 0x1000\n2 D 60\n2 S 0x1000\n2 D 200\n0 L 0x1000\n1 L 0x1000\n"
                        "0 D 400\n0 L 0x1000\n1 D 400\n1 L 0x1000\n")
    cfg = SimConfig(n_cr=2, n_ncr=1)
    assert run(cfg, trace).oracle_pass
    with pytest.raises(InvariantViolation):
        run(cfg, trace, mutations=("skip-allinv",), strict_oracle=True)


def test_single_core_oracle():
    cfg = SimConfig(n_cr=1, n_ncr=0)
    report = run(cfg, gen_max_sharing(1, 3, 40, 0.5, seed=0))
    assert report.oracle_pass


def test_read_only_trace_leaves_write_cells():
    report = run(SimConfig(), gen_max_sharing(4, 2, 30, 0.0, seed=1))
    cov = check_transition_coverage(report.coverage)
    missing = cov["a1_missing"] + cov["table_i_missing"]
    assert any("Store" in m for m in missing)
    assert all("OtherGetM" not in k and "OwnGetM" not in k and "/Store" not in k for k in map(str, report.to_dict()["coverage"]))


def test_single_ncr_core_never_sees_cr_requests():
    cfg = SimConfig(n_cr=1, n_ncr=1)
    trace = parse_trace("# cores: 2\n1 L 0x1000\n1 S 0x1000\n1 L 0x1040\n")
    report = run(cfg, trace)
    keys = report.to_dict()["coverage"]
    assert not any(k.endswith("-cr") or k.startswith("cr/") for k in keys)


def test_cr_records_are_critical():
    report = run(SimConfig(), gen_max_sharing(4, 1, 20, 0.5, seed=3))
    assert all(r.criticality is Criticality.CR for r in report.cr_records())


def test_unknown_mutation_rejected():
    with pytest.raises(ValueError):
        Simulator(SimConfig(), TraceFile(4), mutations=("nope",))


def test_documented_mutations():
    assert set(MUTATIONS) == {"skip-allinv", "overwrite-dest", "grant-ncr-reserved-slot"}
