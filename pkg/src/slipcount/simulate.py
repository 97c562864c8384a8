"""Counting-day throughput projection.

Back-of-envelope but exact: booths follow from total voters at 1500 per
booth, counting units spread across centers by voter proportion
(largest-remainder apportionment), and each machine takes a fixed
per-machine time (capture + prediction + handling). A center's makespan
is ceil(machines / units) rounds of that time; the overall makespan is
the slowest center.

Default per-machine time budget: 10 min capture + 1500 slips x 40 ms
prediction (= 1 min) + 4 min handling overhead = 15 minutes. The handling
overhead is an explicit knob so the 15-minute headline reconciles with
its stated components.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import TooFewUnits

_SHARE_TOL = 1e-9


@dataclass(frozen=True)
class SimConfig:
    total_voters: int
    units_available: int
    voters_per_booth: int = 1500
    capture_minutes_per_evm: float = 10.0
    predict_ms_per_slip: float = 40.0
    slips_per_evm: int = 1500
    handling_overhead_minutes: float = 4.0
    centers: tuple[tuple[str, float], ...] = (("center-1", 1.0),)
    time_jitter_minutes: float = 0.0  # hook; 0 keeps the closed form exact
    jitter_seed: int = 0

    def __post_init__(self) -> None:
        share_sum = sum(share for _, share in self.centers)
        if abs(share_sum - 1.0) > _SHARE_TOL:
            raise ValueError(f"voter shares must sum to 1, got {share_sum}")
        positive = [
            self.total_voters,
            self.units_available,
            self.voters_per_booth,
            self.predict_ms_per_slip,
            self.slips_per_evm,
        ]
        # the two additive time components may be zeroed to isolate the
        # prediction term
        if any(v <= 0 for v in positive):
            raise ValueError("counts and rates must be positive")
        if self.capture_minutes_per_evm < 0 or self.handling_overhead_minutes < 0:
            raise ValueError("time components must be non-negative")
        if any(share <= 0 for _, share in self.centers):
            raise ValueError("every center needs a positive voter share")


@dataclass(frozen=True)
class CenterReport:
    center_id: str
    evms: int
    units: int
    makespan_minutes: float


@dataclass(frozen=True)
class SimReport:
    booths: int
    per_evm_minutes: float
    per_center: tuple[CenterReport, ...]
    makespan_minutes: float


def largest_remainder(shares: list[tuple[str, float]], total: int) -> dict[str, int]:
    """Apportion ``total`` integer units proportionally to shares.

    Floors of the exact quotas first; leftover units go to the largest
    fractional remainders, ties broken by input order.
    """
    quotas = [(name, share * total) for name, share in shares]
    alloc = {name: int(math.floor(q)) for name, q in quotas}
    leftover = total - sum(alloc.values())
    remainders = sorted(
        ((q - math.floor(q), -i, name) for i, (name, q) in enumerate(quotas)),
        reverse=True,
    )
    for k in range(leftover):
        alloc[remainders[k][2]] += 1
    return alloc


def allocate_units(centers: list[tuple[str, float]], total_units: int) -> dict[str, int]:
    """Largest-remainder split of counting units, minimum one per center."""
    if total_units < len(centers):
        raise TooFewUnits(f"{total_units} units cannot cover {len(centers)} centers")
    alloc = largest_remainder(centers, total_units)
    # a tiny center can floor to zero; borrow from the largest allocation
    order = [name for name, _ in centers]
    for name in order:
        while alloc[name] == 0:
            donor = max(order, key=lambda n: (alloc[n], -order.index(n)))
            alloc[donor] -= 1
            alloc[name] += 1
    return alloc


def per_evm_minutes(config: SimConfig) -> float:
    """Minutes to process one machine: capture + prediction + handling."""
    predict_minutes = config.slips_per_evm * config.predict_ms_per_slip / 60000.0
    return config.capture_minutes_per_evm + predict_minutes + config.handling_overhead_minutes


def simulate_counting(config: SimConfig) -> SimReport:
    """Project the counting-day makespan for a whole election."""
    booths = math.ceil(config.total_voters / config.voters_per_booth)
    centers = list(config.centers)
    evms_per_center = largest_remainder(centers, booths)
    units_per_center = allocate_units(centers, config.units_available)
    evm_minutes = per_evm_minutes(config)
    reports = []
    for center_id, _ in centers:
        evms = evms_per_center[center_id]
        units = units_per_center[center_id]
        if config.time_jitter_minutes > 0:
            makespan = _jittered_makespan(config, center_id, evms, units, evm_minutes)
        else:
            makespan = math.ceil(evms / units) * evm_minutes
        reports.append(CenterReport(center_id, evms, units, makespan))
    overall = max((r.makespan_minutes for r in reports), default=0.0)
    return SimReport(
        booths=booths,
        per_evm_minutes=evm_minutes,
        per_center=tuple(reports),
        makespan_minutes=overall,
    )


def _jittered_makespan(
    config: SimConfig, center_id: str, evms: int, units: int, base_minutes: float
) -> float:
    """Round-robin schedule with uniform per-machine time jitter."""
    rng = np.random.default_rng([config.jitter_seed, hash(center_id) & 0x7FFFFFFF])
    j = config.time_jitter_minutes
    times = base_minutes + rng.uniform(-j, j, size=evms)
    loads = np.zeros(units)
    for k, t in enumerate(times):
        loads[k % units] += max(t, 0.0)
    return float(loads.max()) if evms else 0.0


# presets and serialisation ----------------------------------------------------

# the 60M-voter state scenario: 40,000 booths, 1500 units, single center,
# 15 minutes per machine -> 27 rounds -> 405 minutes (6.75 h)
PRESETS: dict[str, SimConfig] = {
    "paper-state": SimConfig(total_voters=60_000_000, units_available=1500),
    # 50% machine verification of the same state: half the booths' slips
    "paper-state-50pct": SimConfig(total_voters=30_000_000, units_available=1500),
    # sampled verification at national scale: 1 machine per assembly
    # segment = 4,125 machines; the court-ordered 5 per segment = 20,625
    "evm-sample-1": SimConfig(total_voters=4_125 * 1500, units_available=1500),
    "evm-sample-5": SimConfig(total_voters=20_625 * 1500, units_available=1500),
}


def config_from_dict(doc: dict) -> SimConfig:
    centers = tuple(
        (str(c["center_id"]), float(c["voter_share"])) for c in doc.get("centers", [])
    ) or (("center-1", 1.0),)
    kwargs = {k: doc[k] for k in (
        "total_voters",
        "units_available",
        "voters_per_booth",
        "capture_minutes_per_evm",
        "predict_ms_per_slip",
        "slips_per_evm",
        "handling_overhead_minutes",
        "time_jitter_minutes",
        "jitter_seed",
    ) if k in doc}
    return SimConfig(centers=centers, **kwargs)


def load_config(path: str | Path) -> SimConfig:
    return config_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def config_to_dict(config: SimConfig) -> dict:
    return {
        "total_voters": config.total_voters,
        "units_available": config.units_available,
        "voters_per_booth": config.voters_per_booth,
        "capture_minutes_per_evm": config.capture_minutes_per_evm,
        "predict_ms_per_slip": config.predict_ms_per_slip,
        "slips_per_evm": config.slips_per_evm,
        "handling_overhead_minutes": config.handling_overhead_minutes,
        "centers": [
            {"center_id": cid, "voter_share": share} for cid, share in config.centers
        ],
        "time_jitter_minutes": config.time_jitter_minutes,
        "jitter_seed": config.jitter_seed,
    }


def report_to_dict(report: SimReport) -> dict:
    return {
        "booths": report.booths,
        "per_evm_minutes": report.per_evm_minutes,
        "per_center": [
            {
                "center_id": r.center_id,
                "evms": r.evms,
                "units": r.units,
                "makespan_minutes": r.makespan_minutes,
            }
            for r in report.per_center
        ],
        "makespan_minutes": report.makespan_minutes,
    }


def report_table(report: SimReport) -> str:
    """Aligned human-readable rendering of a simulation report."""
    lines = [
        f"booths            : {report.booths}",
        f"minutes per EVM   : {report.per_evm_minutes:g}",
        f"makespan (min)    : {report.makespan_minutes:g}",
        f"makespan (hours)  : {report.makespan_minutes / 60.0:g}",
        "",
        f"{'center':<16}{'evms':>8}{'units':>8}{'makespan_min':>14}",
    ]
    for r in report.per_center:
        lines.append(f"{r.center_id:<16}{r.evms:>8}{r.units:>8}{r.makespan_minutes:>14g}")
    return "\n".join(lines)


def with_overrides(config: SimConfig, **kwargs) -> SimConfig:
    return replace(config, **kwargs)
