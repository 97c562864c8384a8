#!/usr/bin/env python3
"""Timestamp forensics: mock-poll separation and rate anomalies.

If each slip carries its print timestamp, two checks become cheap:
slips printed before the poll opened (mock polls) can be excluded
automatically, and any minute in which more slips printed than a human
can physically vote (more than 8) is flagged for investigation.
"""

from datetime import datetime, timedelta, timezone

import numpy as np

from slipcount.tally import SlipRecord, detect_rate_anomalies, separate_mock_polls

poll_open = datetime(2026, 4, 1, 7, 0, 0, tzinfo=timezone.utc)
rng = np.random.default_rng(5)

# mock polls at 6:40, then normal voting (~2/minute), then a stuffing burst
stamps = [poll_open - timedelta(minutes=20) + timedelta(seconds=int(s))
          for s in sorted(rng.integers(0, 300, size=6))]
t = poll_open
for _ in range(120):
    t += timedelta(seconds=int(rng.integers(18, 60)))
    stamps.append(t)
burst_start = t + timedelta(minutes=3)
stamps += [burst_start + timedelta(seconds=int(s))
           for s in sorted(rng.integers(0, 55, size=14))]
stamps.sort()

slips = [
    SlipRecord(slip_id=f"s{i:03d}", evm_id="EVM-9", image_path=f"s{i:03d}.png",
               sequence_no=i + 1, timestamp=ts)
    for i, ts in enumerate(stamps)
]

mock, valid = separate_mock_polls(slips, poll_open)
print(f"{len(slips)} stamped slips: {len(mock)} mock-poll, {len(valid)} valid")

windows = detect_rate_anomalies(sorted(s.timestamp for s in valid))
print(f"\nrate anomalies (more than 8 slips per minute): {len(windows)}")
for w in windows:
    print(f"  {w.window_start:%H:%M:%S} .. {w.window_end:%H:%M:%S}  "
          f"{w.slip_count} slips")
print("\nexactly 8 slips in a minute is legal; the detector only fires above it.")
