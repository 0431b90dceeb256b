import json

import pytest

from hourglass.core import (
    CacheGeometry,
    ConfigError,
    Criticality,
    SimConfig,
    TimerConfig,
    criticality_of,
    tdm_period,
    timer_initial_values,
)


@pytest.mark.parametrize("core,n_cr,n_ncr,expected", [
    (0, 2, 2, Criticality.CR),
    (3, 2, 2, Criticality.NCR),
    (0, 1, 0, Criticality.CR),
])
def test_criticality_of(core, n_cr, n_ncr, expected):
    assert criticality_of(core, SimConfig(n_cr=n_cr, n_ncr=n_ncr)) is expected


def test_criticality_of_out_of_range():
    with pytest.raises(ConfigError):
        criticality_of(4, SimConfig())


@pytest.mark.parametrize("n_cr,period", [(2, 100), (1, 50), (4, 200)])
def test_tdm_period(n_cr, period):
    assert tdm_period(SimConfig(n_cr=n_cr, slot_width_cycles=50)) == period


def test_timer_initial_values():
    tc = TimerConfig(2, 4, 1, 2)
    assert timer_initial_values(Criticality.CR, tc, 100) == (200, 400)
    assert timer_initial_values(Criticality.NCR, tc, 100) == (100, 200)
    assert timer_initial_values(Criticality.CR, TimerConfig(0, 0, 0, 0), 100) == (0, 0)


def test_timer_periods_need_period():
    with pytest.raises(ConfigError):
        timer_initial_values(Criticality.CR, TimerConfig())


def test_timers_in_cycles():
    tc = TimerConfig(7, 8, 9, 10, in_cycles=True)
    assert timer_initial_values(Criticality.NCR, tc) == (9, 10)


def test_default_config_values():
    cfg = SimConfig()
    assert cfg.n_cores == 4
    assert cfg.period == 100
    assert cfg.access_latency == 50
    t = cfg.timers
    assert (t.cr_cr, t.cr_ncr, t.ncr_cr, t.ncr_ncr) == (200, 400, 100, 200)


@pytest.mark.parametrize("kwargs", [
    dict(n_cr=0),
    dict(n_ncr=-1),
    dict(slot_width_cycles=0),
    dict(access_latency=51),
    dict(access_latency=0),
])
def test_bad_config(kwargs):
    with pytest.raises(ConfigError):
        SimConfig(**kwargs)


def test_negative_timer_rejected():
    with pytest.raises(ConfigError):
        TimerConfig(-1, 0, 0, 0)


def test_bad_geometry():
    with pytest.raises(ConfigError):
        CacheGeometry(line_bytes=48)


def test_config_json_round_trip():
    cfg = SimConfig(n_cr=3, n_ncr=1, timer_config=TimerConfig(1, 2, 3, 4), seed=9)
    again = SimConfig.from_json(json.dumps(cfg.to_dict()))
    assert again == cfg


def test_config_unknown_field():
    with pytest.raises(ConfigError, match="unknown"):
        SimConfig.from_dict({"n_cr": 2, "bogus": 1})
