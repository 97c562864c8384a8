import math

import numpy as np
import pytest

from slipcount.errors import TooFewUnits
from slipcount.simulate import (
    PRESETS,
    SimConfig,
    allocate_units,
    config_from_dict,
    config_to_dict,
    largest_remainder,
    per_evm_minutes,
    simulate_counting,
    with_overrides,
)


def test_single_center_gets_everything():
    assert allocate_units([("only", 1.0)], 17) == {"only": 17}


def test_two_equal_centers_split_evenly():
    assert allocate_units([("a", 0.5), ("b", 0.5)], 10) == {"a": 5, "b": 5}


def test_hand_derived_largest_remainder():
    # quotas {3.5, 2.1, 1.4} -> floors {3, 2, 1}, last unit to the .5 remainder
    got = allocate_units([("a", 0.5), ("b", 0.3), ("c", 0.2)], 7)
    assert got == {"a": 4, "b": 2, "c": 1}


def test_every_center_gets_at_least_one():
    got = allocate_units([("big", 0.99), ("s1", 0.005), ("s2", 0.005)], 3)
    assert got == {"big": 1, "s1": 1, "s2": 1}


def test_too_few_units():
    with pytest.raises(TooFewUnits):
        allocate_units([("a", 0.5), ("b", 0.5)], 1)


def test_apportionment_conserves_totals(rng):
    for _ in range(200):
        k = int(rng.integers(1, 9))
        raw = rng.random(k) + 0.01
        shares = raw / raw.sum()
        centers = [(f"c{i}", float(s)) for i, s in enumerate(shares)]
        total = int(rng.integers(k, 5000))
        alloc = allocate_units(centers, total)
        assert sum(alloc.values()) == total
        assert all(v >= 1 for v in alloc.values())
        plain = largest_remainder(centers, total)
        assert sum(plain.values()) == total


def test_default_per_evm_is_15_minutes():
    cfg = SimConfig(total_voters=1500, units_available=1)
    assert per_evm_minutes(cfg) == pytest.approx(15.0)


def test_predict_component_is_one_minute():
    cfg = SimConfig(
        total_voters=1500,
        units_available=1,
        capture_minutes_per_evm=0.0,
        handling_overhead_minutes=0.0,
    )
    assert per_evm_minutes(cfg) == pytest.approx(1.0)


def test_paper_state_scenario():
    report = simulate_counting(PRESETS["paper-state"])
    assert report.booths == 40_000
    assert report.per_evm_minutes == pytest.approx(15.0)
    assert report.makespan_minutes == pytest.approx(math.ceil(40_000 / 1500) * 15.0)
    assert report.makespan_minutes == pytest.approx(405.0)
    assert report.makespan_minutes <= 420.0


def test_single_evm_single_unit():
    cfg = SimConfig(total_voters=1500, units_available=1)
    report = simulate_counting(cfg)
    assert report.booths == 1
    assert report.makespan_minutes == pytest.approx(15.0)


def test_doubling_units_cuts_rounds():
    cfg = with_overrides(PRESETS["paper-state"], units_available=3000)
    report = simulate_counting(cfg)
    assert report.makespan_minutes == pytest.approx(math.ceil(40_000 / 3000) * 15.0)
    assert report.makespan_minutes == pytest.approx(210.0)


def test_makespan_monotone_in_units(rng):
    for _ in range(100):
        voters = int(rng.integers(1500, 10_000_000))
        base_units = int(rng.integers(1, 2000))
        cfg1 = SimConfig(total_voters=voters, units_available=base_units)
        cfg2 = SimConfig(total_voters=voters, units_available=base_units + int(rng.integers(1, 500)))
        assert (
            simulate_counting(cfg2).makespan_minutes
            <= simulate_counting(cfg1).makespan_minutes
        )


def test_makespan_monotone_in_voters(rng):
    for _ in range(100):
        voters = int(rng.integers(1500, 10_000_000))
        units = int(rng.integers(1, 2000))
        cfg1 = SimConfig(total_voters=voters, units_available=units)
        cfg2 = SimConfig(
            total_voters=voters + int(rng.integers(1, 5_000_000)), units_available=units
        )
        assert (
            simulate_counting(cfg2).makespan_minutes
            >= simulate_counting(cfg1).makespan_minutes
        )


def test_single_center_matches_closed_form(rng):
    for _ in range(100):
        voters = int(rng.integers(1500, 50_000_000))
        units = int(rng.integers(1, 3000))
        cfg = SimConfig(total_voters=voters, units_available=units)
        report = simulate_counting(cfg)
        evms = math.ceil(voters / 1500)
        assert report.makespan_minutes == pytest.approx(
            math.ceil(evms / units) * per_evm_minutes(cfg)
        )


def test_multi_center_apportionment():
    cfg = SimConfig(
        total_voters=6_000_000,
        units_available=150,
        centers=(("north", 0.5), ("south", 0.3), ("west", 0.2)),
    )
    report = simulate_counting(cfg)
    assert sum(r.evms for r in report.per_center) == report.booths
    assert sum(r.units for r in report.per_center) == 150
    assert report.makespan_minutes == max(r.makespan_minutes for r in report.per_center)


def test_sample_presets_reproduce_machine_counts():
    assert simulate_counting(PRESETS["evm-sample-1"]).booths == 4_125
    assert simulate_counting(PRESETS["evm-sample-5"]).booths == 20_625


def test_share_validation():
    with pytest.raises(ValueError):
        SimConfig(total_voters=1, units_available=1, centers=(("a", 0.5), ("b", 0.4)))


def test_config_roundtrip():
    cfg = SimConfig(
        total_voters=123_456,
        units_available=7,
        centers=(("x", 0.25), ("y", 0.75)),
        handling_overhead_minutes=2.5,
    )
    assert config_from_dict(config_to_dict(cfg)) == cfg


def test_jitter_hook_default_zero_is_exact():
    cfg = PRESETS["paper-state"]
    assert cfg.time_jitter_minutes == 0.0
    jittered = with_overrides(cfg, time_jitter_minutes=1.0)
    r = simulate_counting(jittered)
    # jittered schedule stays near the closed form but is not forced onto it
    assert abs(r.makespan_minutes - 405.0) < 30.0
