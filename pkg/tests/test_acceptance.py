"""Acceptance criteria, one test per criterion.

Each test prints a single PASS/FAIL line (visible with ``pytest -s`` or in
the captured output) and enforces the criterion's stated tolerance with
assertions. Run just this module via::

    pytest tests/test_acceptance.py -s
"""

import contextlib
import hashlib
import itertools
import json
import math
import time
from datetime import datetime, timedelta, timezone
from pathlib import Path

import numpy as np
import pytest

from slipcount.augment import AugmentationSpec
from slipcount.bench import benchmark_predict
from slipcount.classifier import evaluate, fit
from slipcount.dataset import build_labeled_dataset, split_dataset
from slipcount.cli import run
from slipcount.errors import SlipCountError
from slipcount.service import AdjudicationService, replay_journal
from slipcount.simulate import PRESETS, simulate_counting
from slipcount.tally import (
    REJECTED,
    TallySheet,
    apply_adjudication,
    detect_rate_anomalies,
    reconcile,
)
from slipcount.classifier import Prediction

from test_anomaly import brute_force_windows
from test_service import FakeClock, write_batch

REPO_ROOT = Path(__file__).resolve().parents[1]
FIXTURES_49 = REPO_ROOT / "fixtures" / "49"
T0 = datetime(2026, 4, 1, 8, 0, 0, tzinfo=timezone.utc)


@contextlib.contextmanager
def criterion(name: str):
    try:
        yield
    except BaseException:
        print(f"ACCEPTANCE {name}: FAIL")
        raise
    print(f"ACCEPTANCE {name}: PASS")


def _png_digest(root: Path) -> str:
    h = hashlib.sha256()
    for p in sorted(root.rglob("*.png")):
        h.update(p.relative_to(root).as_posix().encode())
        h.update(p.read_bytes())
    return h.hexdigest()


def test_dataset_construction(tmp_path):
    """49-symbol registry -> exactly 931 images, 180x180, reproducible, <10 s."""
    with criterion("dataset-construction"):
        t0 = time.perf_counter()
        rc = run([
            "gen-dataset", "--registry", str(FIXTURES_49),
            "--out", str(tmp_path / "run1"), "--seed", "42",
        ])
        elapsed = time.perf_counter() - t0
        assert rc == 0
        pngs = list((tmp_path / "run1").rglob("*.png"))
        assert len(pngs) == 931
        from PIL import Image

        for p in pngs[::97]:
            with Image.open(p) as im:
                assert im.size == (180, 180)
        assert elapsed < 10.0, f"gen-dataset took {elapsed:.1f}s"
        rc = run([
            "gen-dataset", "--registry", str(FIXTURES_49),
            "--out", str(tmp_path / "run2"), "--seed", "42",
        ])
        assert rc == 0
        assert _png_digest(tmp_path / "run1") == _png_digest(tmp_path / "run2")
        print(f"  931 images in {elapsed:.2f}s, byte-reproducible at seed 42")


def test_classification_quality(registry49):
    """Accuracy >= 0.95 on the 196-item stratified test split at seed 42.

    The 98%/99% published figures are CNN transfer-learning benchmarks and
    are not reproducible with the native reference classifier; 0.95 is the
    acceptance floor for the nearest-centroid model.
    """
    with criterion("classification-quality"):
        ds = build_labeled_dataset(registry49, AugmentationSpec(noise_seed=42))
        assert len(ds) == 931
        train, test = split_dataset(ds, 0.8, 42)
        assert len(test) == 196
        metrics = evaluate(fit(train), test)
        assert metrics.accuracy >= 0.95, f"accuracy {metrics.accuracy:.4f} < 0.95"
        print(
            f"  measured accuracy {metrics.accuracy:.4f} on 196 items "
            "(CNN benchmark baselines: 0.98 / 0.99)"
        )


def test_prediction_latency(canonical_model, canonical_dataset):
    """Mean predict < 40 ms/image; 1500-image batch < 60 s."""
    with criterion("prediction-latency"):
        pool = [it.image for it in canonical_dataset.items]
        batch = list(itertools.islice(itertools.cycle(pool), 1500))
        result = benchmark_predict(canonical_model, batch)
        assert result.images == 1500
        assert result.mean_ms_per_image < 40.0, f"{result.mean_ms_per_image:.2f} ms"
        assert result.total_seconds < 60.0, f"{result.total_seconds:.1f} s"
        print(
            f"  mean {result.mean_ms_per_image:.3f} ms/image, "
            f"1500-image batch in {result.total_seconds:.2f}s"
        )


def test_throughput_model():
    """paper-state preset: booths = 40,000 and makespan = 405 min <= 420."""
    with criterion("throughput-model"):
        report = simulate_counting(PRESETS["paper-state"])
        assert report.booths == 40_000
        assert report.per_evm_minutes == 15.0
        oracle = math.ceil(40_000 / 1500) * 15.0
        assert report.makespan_minutes == oracle == 405.0
        assert report.makespan_minutes <= 420.0
        print(f"  booths 40000, makespan {report.makespan_minutes:g} min (<= 420)")


def test_reconciliation_law():
    """1,000 randomized pairs: MATCH <=> all deltas zero; paper prevails."""
    with criterion("reconciliation-law"):
        rng = np.random.default_rng(2026)
        parties = [f"{i:03d}" for i in range(8)]
        mismatches = 0
        for _ in range(1000):
            vvpat = {p: int(rng.integers(0, 40)) for p in parties if rng.random() > 0.3}
            evm = {p: int(rng.integers(0, 40)) for p in parties if rng.random() > 0.3}
            if rng.random() < 0.25:
                evm = dict(vvpat)  # force exact agreement on a quarter of trials
            tally = TallySheet(
                evm_id="E",
                confidence_threshold=0.8,
                total_slips=sum(vvpat.values()),
                auto_counts=dict(vvpat),
            )
            result = reconcile(tally, evm)
            all_zero = all(d == 0 for d in result.deltas.values())
            assert (result.status == "MATCH") == all_zero
            if result.status == "MISMATCH":
                mismatches += 1
                assert result.final_counts == {
                    p: vvpat.get(p, 0) for p in result.final_counts
                }
        assert mismatches > 0
        print(f"  1000 randomized pairs exact ({mismatches} mismatches, paper prevailed)")


def test_anomaly_oracle_equivalence():
    """detect_rate_anomalies == O(n^2) brute force on 10,000 random sets."""
    with criterion("anomaly-oracle-equivalence"):
        # boundary first: exactly 8 slips in a minute is legal
        boundary = [T0 + timedelta(seconds=s) for s in (0, 5, 10, 20, 30, 40, 50, 59)]
        assert detect_rate_anomalies(boundary) == []
        assert brute_force_windows(boundary) == []

        rng = np.random.default_rng(777)
        spans = [20, 60, 120, 400, 1800, 3600]
        cache: dict[int, datetime] = {}

        def ts(s: int) -> datetime:
            if s not in cache:
                cache[s] = T0 + timedelta(seconds=s)
            return cache[s]

        for _ in range(10_000):
            n = int(rng.integers(0, 51))
            span = spans[int(rng.integers(0, len(spans)))]
            stamps = sorted(ts(int(s)) for s in rng.integers(0, span + 1, size=n))
            assert detect_rate_anomalies(stamps) == brute_force_windows(stamps)
        print("  10000 randomized sets match the brute-force oracle (n <= 50)")


def test_conservation_and_order_independence():
    """Conservation after every op; final counts invariant under order."""
    with criterion("conservation-order-independence"):
        rng = np.random.default_rng(99)
        parties = [f"{i:03d}" for i in range(6)]

        def random_sheet():
            auto = {p: int(rng.integers(0, 30)) for p in parties if rng.random() > 0.4}
            queue = [
                (f"q{i}", Prediction(
                    party_id=parties[int(rng.integers(0, len(parties)))],
                    confidence=float(rng.random() * 0.8),
                    margin=0.0,
                    top_k=[],
                ))
                for i in range(int(rng.integers(0, 7)))
            ]
            sheet = TallySheet(
                evm_id="E",
                confidence_threshold=0.8,
                total_slips=sum(auto.values()) + len(queue),
                auto_counts=auto,
                review_queue=queue,
            )
            decisions = [
                (sid, REJECTED if rng.random() < 0.2
                 else parties[int(rng.integers(0, len(parties)))])
                for sid, _ in queue
            ]
            return sheet, decisions

        import copy

        for _ in range(300):
            base, decisions = random_sheet()
            finals = set()
            n_orders = min(6, math.factorial(len(decisions))) if decisions else 1
            perms = itertools.islice(itertools.permutations(decisions), 24)
            for k, perm in enumerate(perms):
                if k >= n_orders and len(decisions) > 4:
                    break
                sheet = copy.deepcopy(base)
                for slip_id, decision in perm:
                    apply_adjudication(sheet, slip_id, decision)
                    sheet.check_conservation()
                finals.add(
                    (tuple(sorted(sheet.vvpat_counts().items())), sheet.rejected)
                )
            assert len(finals) == 1
        print("  300 randomized batches, all adjudication orders agree")


def test_journal_replay(tmp_path, small_model, small_registry):
    """Kill-and-replay reproduces state exactly after every decision."""
    with criterion("journal-replay"):
        clock = FakeClock()
        journal = tmp_path / "journal.jsonl"
        service = AdjudicationService(
            model=small_model, journal_path=journal, threshold=0.8, now_fn=clock
        )
        manifest = write_batch(tmp_path / "batch", small_registry, pristine=4, grey=5)
        service.load_batch(manifest)
        decided = 0
        while (task := service.claim_next_task("w1")) is not None:
            decision = REJECTED if decided % 3 == 2 else task.prediction.top_k[0][0]
            service.submit_decision(task.task_id, "w1", decision)
            decided += 1
            live = service.state_snapshot()
            # full prefix replay from disk (as a fresh process would see it)
            replayed = replay_journal(journal).state_snapshot()
            assert replayed == live, f"replay diverged after decision {decided}"
            # and a revived service instance continues from the same state
            revived = AdjudicationService(
                model=small_model, journal_path=journal, threshold=0.8, now_fn=clock
            )
            assert revived.state_snapshot() == live
            revived.close()
        assert decided == 5
        print(f"  state reproduced exactly after each of {decided} decisions")
