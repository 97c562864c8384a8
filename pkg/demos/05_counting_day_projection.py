#!/usr/bin/env python3
"""Counting-day throughput projections at state and national scale.

Per machine: 10 min capture + 1 min prediction (1500 slips x 40 ms) +
4 min handling = 15 minutes. A 60M-voter state needs 40,000 booths; with
1500 counting units that is 27 rounds of 15 minutes = 405 minutes, i.e.
every paper slip verified in under 7 hours.
"""

from slipcount.simulate import (
    PRESETS,
    SimConfig,
    per_evm_minutes,
    report_table,
    simulate_counting,
    with_overrides,
)

print("== preset scenarios ==")
for name, cfg in PRESETS.items():
    report = simulate_counting(cfg)
    print(f"{name:<18} booths {report.booths:>7,}  "
          f"makespan {report.makespan_minutes:>7.0f} min "
          f"({report.makespan_minutes / 60:.2f} h)")

print("\n== the 60M-voter state in detail ==")
print(report_table(simulate_counting(PRESETS["paper-state"])))

print("\n== sensitivity: more counting units ==")
for units in (750, 1500, 3000, 6000):
    cfg = with_overrides(PRESETS["paper-state"], units_available=units)
    r = simulate_counting(cfg)
    print(f"  {units:>5} units -> {r.makespan_minutes:>6.0f} min")

print("\n== distributed counting across district centers ==")
cfg = SimConfig(
    total_voters=60_000_000,
    units_available=1500,
    centers=(("north", 0.4), ("south", 0.35), ("east", 0.15), ("west", 0.10)),
)
print(report_table(simulate_counting(cfg)))
print("\nunits spread by voter share (largest remainder), so the slowest")
print("center sets the overall makespan.")
