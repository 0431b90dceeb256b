"""Closed-form worst-case latency bounds, hardware overhead and trend sweeps."""
from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

from .core import ConfigError, Criticality, SimConfig, TimerConfig

SWEEP_AXES = ("v_cr_ncr", "v_ncr_cr", "n_cr", "n_ncr", "sw")
CSV_COLUMNS = ("axis_value", "wcl_arb", "wcl_coh", "wcl_total", "obs_max_cr", "obs_max_arb", "obs_max_coh",
               "ncr_bw", "ncr_hit_rate")


@dataclass(frozen=True)
class WclBound:
    arb: int
    coh: int
    acc: int
    total: int
    n_cr: int
    sw: int
    timers: tuple  # (cr_cr, cr_ncr, ncr_cr, ncr_ncr) in cycles
    coh_raw: int = 0  # before clamping at zero

    def to_dict(self) -> dict:
        return {"arb": self.arb, "coh": self.coh, "coh_raw": self.coh_raw, "acc": self.acc,
                "total": self.total, "n_cr": self.n_cr, "sw": self.sw, "timers": list(self.timers)}


def wcl_arb(n_cr: int, sw: int) -> int:
    if n_cr < 1 or sw < 1:
        raise ConfigError("n_cr and sw must be >= 1")
    return n_cr * sw


def wcl_coh_raw(n_cr: int, sw: int, v_cr_cr: int, v_ncr_cr: int) -> int:
    others = n_cr - 1
    return v_cr_cr + (v_ncr_cr + others * sw) + others * (v_cr_cr + others * sw) - n_cr * sw


def wcl_coh(n_cr: int, sw: int, v_cr_cr: int, v_ncr_cr: int) -> int:
    """Worst-case coherence latency; timers in cycles.  Negative values clamp to 0."""
    if n_cr < 1 or sw < 1:
        raise ConfigError("n_cr and sw must be >= 1")
    if v_cr_cr < 0 or v_ncr_cr < 0:
        raise ConfigError("timers must be non-negative")
    return max(0, wcl_coh_raw(n_cr, sw, v_cr_cr, v_ncr_cr))


def wcl_total(config: SimConfig) -> WclBound:
    t = config.timers
    sw = config.slot_width_cycles
    arb = wcl_arb(config.n_cr, sw)
    raw = wcl_coh_raw(config.n_cr, sw, t.cr_cr, t.ncr_cr)
    coh = max(0, raw)
    acc = config.access_latency
    return WclBound(arb, coh, acc, arb + coh + acc, config.n_cr, sw,
                    (t.cr_cr, t.cr_ncr, t.ncr_cr, t.ncr_ncr), raw)


@dataclass
class BoundVerdict:
    passed: bool
    obs_max_total: int
    obs_max_arb: int
    obs_max_coh: int
    obs_max_acc: int
    violations: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "verdict": "PASS" if self.passed else "FAIL",
            "obs_max_total": self.obs_max_total,
            "obs_max_arb": self.obs_max_arb,
            "obs_max_coh": self.obs_max_coh,
            "obs_max_acc": self.obs_max_acc,
            "violations": [r.to_dict() for r in self.violations[:20]],
            "violation_count": len(self.violations),
        }


def check_bounds(report, bound: WclBound) -> BoundVerdict:
    """Every cr request must respect the total bound and each component bound."""
    misses = [r for r in report.records if r.criticality is Criticality.CR and not r.hit]
    crs = [r for r in report.records if r.criticality is Criticality.CR]
    bad = [r for r in crs if r.total > bound.total or r.arb_latency > bound.arb or r.coh_latency > bound.coh]
    return BoundVerdict(
        passed=not bad,
        obs_max_total=max((r.total for r in crs), default=0),
        obs_max_arb=max((r.arb_latency for r in misses), default=0),
        obs_max_coh=max((r.coh_latency for r in misses), default=0),
        obs_max_acc=max((r.acc_latency for r in misses), default=0),
        violations=bad,
    )


@dataclass(frozen=True)
class OverheadReport:
    private_line_extra_bits: int
    memory_line_sharer_bits: int
    pr_lut_extra_bits_per_entry: int
    prsp_bits_per_entry: int

    def to_dict(self) -> dict:
        return dict(self.__dict__)


MESSAGE_KIND_BITS = 3  # GetS, GetM, PutM, SelfInv, SendData, AllInv, Data fit in 3 bits


def hardware_overhead(n_cores: int, phys_addr_bits: int = 32, line_bytes: int = 64) -> OverheadReport:
    """Extra storage HourGlass needs per line, per LUT entry and per PRSP entry.

    Each private line carries two 64-bit timers and two destination core ids;
    memory keeps a sharer bit vector; the LUT gains a criticality bit; a PRSP
    entry holds the line address, a message kind, a core id and a valid bit.
    """
    if n_cores < 2 or n_cores & (n_cores - 1):
        raise ConfigError("n_cores must be a power of two >= 2")
    if phys_addr_bits < 1:
        raise ConfigError("phys_addr_bits must be >= 1")
    core_bits = int(math.log2(n_cores))
    line_addr_bits = max(0, phys_addr_bits - int(math.log2(line_bytes)))
    return OverheadReport(
        private_line_extra_bits=64 + 64 + 2 * core_bits,
        memory_line_sharer_bits=n_cores,
        pr_lut_extra_bits_per_entry=1,
        prsp_bits_per_entry=line_addr_bits + MESSAGE_KIND_BITS + core_bits + 1,
    )


# ---- sweeps -----------------------------------------------------------

def _apply_axis(base: SimConfig, axis: str, value) -> SimConfig:
    tc = base.timer_config
    if axis == "v_cr_ncr":
        return base.replace(timer_config=TimerConfig(tc.v_cr_cr, value, tc.v_ncr_cr, tc.v_ncr_ncr, tc.in_cycles))
    if axis == "v_ncr_cr":
        return base.replace(timer_config=TimerConfig(tc.v_cr_cr, tc.v_cr_ncr, value, tc.v_ncr_ncr, tc.in_cycles))
    if axis == "n_cr":
        return base.replace(n_cr=int(value))
    if axis == "n_ncr":
        return base.replace(n_ncr=int(value))
    if axis == "sw":
        return base.replace(slot_width_cycles=int(value), access_latency=None)
    raise ConfigError(f"unknown sweep axis {axis!r}; choose from {', '.join(SWEEP_AXES)}")


def sweep_row(axis: str, value, base: SimConfig, workload: Optional[Callable] = None) -> dict:
    from .engine import run

    config = _apply_axis(base, axis, value)
    bound = wcl_total(config)
    row = {"axis_value": value, "wcl_arb": bound.arb, "wcl_coh": bound.coh, "wcl_total": bound.total,
           "obs_max_cr": 0, "obs_max_arb": 0, "obs_max_coh": 0, "ncr_bw": 0.0, "ncr_hit_rate": 0.0}
    if workload is None:
        return row
    report = run(config, workload(config))
    verdict = check_bounds(report, bound)
    ncr = [r for r in report.records if r.criticality is Criticality.NCR]
    ncr_span = max((p["finish_cycle"] for p in report.per_core if p["criticality"] == "ncr"), default=0)
    row.update(
        obs_max_cr=verdict.obs_max_total,
        obs_max_arb=verdict.obs_max_arb,
        obs_max_coh=verdict.obs_max_coh,
        ncr_bw=round(1000.0 * len(ncr) / ncr_span, 6) if ncr_span else 0.0,
        ncr_hit_rate=round(sum(r.hit for r in ncr) / len(ncr), 6) if ncr else 0.0,
    )
    return row


def sweep(axis: str, values, base: SimConfig, workload: Optional[Callable] = None, workers: int = 1) -> list:
    """One row per axis value, ordered by value regardless of completion order."""
    if axis not in SWEEP_AXES:
        raise ConfigError(f"unknown sweep axis {axis!r}; choose from {', '.join(SWEEP_AXES)}")
    values = list(values)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(lambda v: sweep_row(axis, v, base, workload), values))
    else:
        rows = [sweep_row(axis, v, base, workload) for v in values]
    return rows


def rows_to_csv(rows: list) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: row[k] for k in CSV_COLUMNS})
    return buf.getvalue()
