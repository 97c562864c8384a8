#!/usr/bin/env python3
"""Count a one-machine batch, adjudicate the queue, reconcile the totals.

Simulates a counting table: 60 captured slips (a few of them unreadable),
automatic counting above the 0.80 confidence threshold, human decisions
for the queue, then reconciliation against the machine's electronic
counts, where the paper count prevails on any discrepancy.
"""

from pathlib import Path

import numpy as np

from slipcount.augment import AugmentationSpec
from slipcount.classifier import fit
from slipcount.dataset import build_labeled_dataset, split_dataset
from slipcount.registry import SymbolRegistry
from slipcount.tally import (
    REJECTED,
    SlipRecord,
    apply_adjudication,
    count_slips,
    reconcile,
)

FIXTURES = Path(__file__).resolve().parents[1] / "fixtures" / "49"

registry = SymbolRegistry.load(FIXTURES)
dataset = build_labeled_dataset(registry, AugmentationSpec(noise_seed=42))
train, _ = split_dataset(dataset, 0.8, 42)
model = fit(train)

rng = np.random.default_rng(11)
records = registry.records[:6]
slips, images, truth = [], {}, {}
for i in range(60):
    rec = records[int(rng.integers(0, len(records)))]
    sid = f"s{i:03d}"
    if i % 15 == 7:  # an unreadable slip: heavy sensor noise
        img = rng.integers(0, 256, size=(180, 180)).astype(np.uint8)
    else:
        img = rec.image
        truth[rec.party_id] = truth.get(rec.party_id, 0) + 1
    slips.append(SlipRecord(slip_id=sid, evm_id="EVM-42", image_path=f"{sid}.png",
                            sequence_no=i + 1))
    images[sid] = img

tally = count_slips(model, slips, threshold=0.80, images=images)
print(f"batch of {tally.total_slips} slips on {tally.evm_id}")
print(f"  auto-counted: {sum(tally.auto_counts.values())}")
print(f"  queued for human review: {len(tally.review_queue)}")

print("\nreview queue (most ambiguous first):")
for slip_id, pred in tally.review_queue:
    top = ", ".join(f"{p}:{s:.2f}" for p, s in pred.top_k[:3])
    print(f"  {slip_id}  confidence {pred.confidence:.3f}  candidates: {top}")

for slip_id, pred in list(tally.review_queue):
    apply_adjudication(tally, slip_id, REJECTED)  # official: unreadable
print("\nafter adjudication: queue empty, "
      f"{tally.rejected} rejected, conservation holds")

evm_counts = dict(truth)
evm_counts[records[0].party_id] += 1  # machine claims one extra vote
result = reconcile(tally, evm_counts)
print(f"\nreconciliation: {result.status}")
for party in sorted(result.deltas):
    d = result.deltas[party]
    mark = "" if d == 0 else f"   delta {d:+d}"
    print(f"  {party}: paper {result.vvpat_counts[party]:>3} "
          f"vs machine {result.evm_counts[party]:>3}{mark}")
print("final counts follow the paper trail:", result.final_counts == result.vvpat_counts)
