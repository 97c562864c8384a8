import copy
import itertools
from datetime import datetime, timedelta, timezone

import numpy as np
import pytest

from slipcount.classifier import Prediction
from slipcount.errors import (
    AlreadyAdjudicated,
    BatchTooLarge,
    MissingTimestamp,
    MixedEvm,
    UnknownSlip,
    UnresolvedQueue,
)
from slipcount.tally import (
    REJECTED,
    SlipRecord,
    TallySheet,
    apply_adjudication,
    count_slips,
    load_slip_manifest,
    reconcile,
    separate_mock_polls,
    tally_from_dict,
    tally_to_dict,
)

T0 = datetime(2026, 4, 1, 8, 0, 0, tzinfo=timezone.utc)


def _slip(i, evm="EVM-1", ts=None):
    return SlipRecord(
        slip_id=f"s{i:04d}", evm_id=evm, image_path=f"{i}.png", sequence_no=i + 1, timestamp=ts
    )


def _pred(party="000", conf=0.5):
    return Prediction(party_id=party, confidence=conf, margin=0.1, top_k=[(party, 0.9)])


def _sheet(queue_confs, auto=None):
    """Hand-built tally sheet with the given queued confidences."""
    auto = auto or {}
    queue = [(f"q{i}", _pred(conf=c)) for i, c in enumerate(queue_confs)]
    return TallySheet(
        evm_id="EVM-1",
        confidence_threshold=0.8,
        total_slips=sum(auto.values()) + len(queue),
        auto_counts=dict(auto),
        review_queue=queue,
    )


# count_slips ------------------------------------------------------------------


def test_batch_too_large(small_model):
    slips = [_slip(i) for i in range(1501)]
    with pytest.raises(BatchTooLarge):
        count_slips(small_model, slips, 0.8)


def test_mixed_evm_rejected(small_model):
    slips = [_slip(0, "EVM-1"), _slip(1, "EVM-2")]
    with pytest.raises(MixedEvm):
        count_slips(small_model, slips, 0.8)


def test_empty_batch(small_model):
    tally = count_slips(small_model, [], 0.8)
    assert tally.total_slips == 0
    assert tally.auto_counts == {} and tally.review_queue == []


def test_pristine_batch_counts_match_ground_truth(small_registry, small_model):
    slips, images, truth = [], {}, {}
    i = 0
    for record in small_registry:
        for _ in range(3):
            s = _slip(i)
            slips.append(s)
            images[s.slip_id] = record.image
            truth[record.party_id] = truth.get(record.party_id, 0) + 1
            i += 1
    tally = count_slips(small_model, slips, 0.8, images=images)
    assert tally.review_queue == []
    assert tally.auto_counts == truth
    assert sum(tally.auto_counts.values()) == len(slips)


def test_uniform_grey_slips_all_queue(small_model):
    grey = np.full((180, 180), 128, dtype=np.uint8)
    slips = [_slip(i) for i in range(5)]
    images = {s.slip_id: grey for s in slips}
    tally = count_slips(small_model, slips, 0.8, images=images)
    assert len(tally.review_queue) == 5
    assert tally.auto_counts == {}


def test_queue_sorted_ascending_confidence(small_registry, small_model, rng):
    # mix pristine symbols with noisy ones; queue must be ascending
    slips, images = [], {}
    recs = small_registry.records
    for i in range(20):
        rec = recs[i % len(recs)]
        noisy = np.clip(
            rec.image.astype(np.int16) + rng.integers(-120, 120, rec.image.shape), 0, 255
        ).astype(np.uint8)
        s = _slip(i)
        slips.append(s)
        images[s.slip_id] = noisy
    tally = count_slips(small_model, slips, 0.99, images=images)
    confs = [p.confidence for _, p in tally.review_queue]
    assert confs == sorted(confs)


def test_monotone_threshold_queue_growth(small_registry, small_model, rng):
    slips, images = [], {}
    recs = small_registry.records
    for i in range(30):
        rec = recs[i % len(recs)]
        noisy = np.clip(
            rec.image.astype(np.int16) + rng.integers(-100, 100, rec.image.shape), 0, 255
        ).astype(np.uint8)
        s = _slip(i)
        slips.append(s)
        images[s.slip_id] = noisy
    previous = -1
    for thr in (0.0, 0.2, 0.5, 0.8, 0.95, 1.0):
        tally = count_slips(small_model, slips, thr, images=images)
        tally.check_conservation()
        assert len(tally.review_queue) >= previous
        previous = len(tally.review_queue)


# adjudication -----------------------------------------------------------------


def test_adjudicate_single_slip():
    tally = _sheet([0.3])
    apply_adjudication(tally, "q0", "004")
    assert tally.adjudicated_counts == {"004": 1}
    assert tally.review_queue == []
    tally.check_conservation()


def test_adjudicate_rejected():
    tally = _sheet([0.3])
    apply_adjudication(tally, "q0", REJECTED)
    assert tally.rejected == 1
    tally.check_conservation()


def test_double_decision_rejected():
    tally = _sheet([0.3, 0.4])
    apply_adjudication(tally, "q0", "001")
    with pytest.raises(AlreadyAdjudicated):
        apply_adjudication(tally, "q0", "002")


def test_unknown_slip():
    tally = _sheet([0.3])
    with pytest.raises(UnknownSlip):
        apply_adjudication(tally, "nope", "001")


def test_adjudication_order_independence():
    decisions = [("q0", "001"), ("q1", REJECTED), ("q2", "002"), ("q3", "001")]
    outcomes = set()
    for perm in itertools.permutations(decisions):
        tally = _sheet([0.1, 0.2, 0.3, 0.4], auto={"001": 2})
        for slip_id, decision in perm:
            apply_adjudication(tally, slip_id, decision)
            tally.check_conservation()
        outcomes.add(
            (
                tuple(sorted(tally.adjudicated_counts.items())),
                tally.rejected,
                tuple(sorted(tally.vvpat_counts().items())),
            )
        )
    assert len(outcomes) == 1


# reconcile --------------------------------------------------------------------


def test_reconcile_mismatch_paper_prevails():
    tally = _sheet([], auto={"A": 499, "B": 401})
    result = reconcile(tally, {"A": 500, "B": 400})
    assert result.status == "MISMATCH"
    assert result.final_counts == {"A": 499, "B": 401}
    assert result.deltas == {"A": -1, "B": 1}


def test_reconcile_match():
    tally = _sheet([], auto={"A": 10, "B": 3})
    result = reconcile(tally, {"A": 10, "B": 3})
    assert result.status == "MATCH"
    assert all(d == 0 for d in result.deltas.values())


def test_reconcile_missing_party_treated_as_zero():
    tally = _sheet([], auto={"A": 4, "C": 2})
    result = reconcile(tally, {"A": 4})
    assert result.status == "MISMATCH"
    assert result.deltas["C"] == 2
    assert result.evm_counts["C"] == 0


def test_reconcile_requires_empty_queue():
    tally = _sheet([0.4], auto={"A": 1})
    with pytest.raises(UnresolvedQueue):
        reconcile(tally, {"A": 1})


def test_reconcile_excludes_rejected_from_counts():
    tally = _sheet([0.4], auto={"A": 5})
    apply_adjudication(tally, "q0", REJECTED)
    result = reconcile(tally, {"A": 5})
    assert result.status == "MATCH"
    assert result.vvpat_counts == {"A": 5}


def test_reconcile_randomized_law(rng):
    # MATCH iff all deltas zero; final = vvpat on MISMATCH
    parties = [f"{i:03d}" for i in range(6)]
    for _ in range(1000):
        vvpat = {p: int(rng.integers(0, 50)) for p in parties if rng.random() > 0.2}
        evm = {p: int(rng.integers(0, 50)) for p in parties if rng.random() > 0.2}
        tally = _sheet([], auto=vvpat)
        result = reconcile(tally, evm)
        all_zero = all(d == 0 for d in result.deltas.values())
        assert (result.status == "MATCH") == all_zero
        if result.status == "MISMATCH":
            for p in result.final_counts:
                assert result.final_counts[p] == vvpat.get(p, 0)


# mock polls -------------------------------------------------------------------


def test_mock_poll_partition(rng):
    poll_open = T0
    slips = [
        _slip(i, ts=T0 + timedelta(seconds=int(rng.integers(-600, 600))))
        for i in range(40)
    ]
    mock, valid = separate_mock_polls(slips, poll_open)
    assert len(mock) + len(valid) == len(slips)
    # oracle: plain linear scan
    for s in slips:
        if s.timestamp < poll_open:
            assert s in mock and s not in valid
        else:
            assert s in valid and s not in mock


def test_mock_poll_all_after():
    slips = [_slip(i, ts=T0 + timedelta(seconds=i)) for i in range(5)]
    mock, valid = separate_mock_polls(slips, T0)
    assert mock == [] and len(valid) == 5


def test_mock_poll_all_before():
    slips = [_slip(i, ts=T0 - timedelta(seconds=i + 1)) for i in range(5)]
    mock, valid = separate_mock_polls(slips, T0)
    assert valid == [] and len(mock) == 5


def test_mock_poll_missing_timestamp():
    with pytest.raises(MissingTimestamp):
        separate_mock_polls([_slip(0)], T0)


# serialisation ----------------------------------------------------------------


def test_tally_roundtrip():
    tally = _sheet([0.2, 0.6], auto={"001": 4, "002": 1})
    apply_adjudication(tally, "q0", "001")
    doc = tally_to_dict(tally)
    restored = tally_from_dict(copy.deepcopy(doc))
    assert tally_to_dict(restored) == doc


def test_manifest_roundtrip(tmp_path):
    lines = [
        '{"slip_id": "s1", "evm_id": "E", "image_path": "a.png", "sequence_no": 1, "timestamp": "2026-04-01T08:00:00+00:00"}',
        '{"slip_id": "s2", "evm_id": "E", "image_path": "b.png", "sequence_no": 2}',
    ]
    p = tmp_path / "batch.jsonl"
    p.write_text("\n".join(lines) + "\n", encoding="utf-8")
    slips = load_slip_manifest(p)
    assert [s.slip_id for s in slips] == ["s1", "s2"]
    assert slips[0].timestamp == T0
    assert slips[1].timestamp is None
    assert slips[0].image_path.endswith("a.png")


def test_manifest_rejects_unordered_timestamps(tmp_path):
    from slipcount.errors import ManifestError

    lines = [
        '{"slip_id": "s1", "evm_id": "E", "image_path": "a.png", "sequence_no": 1, "timestamp": "2026-04-01T08:10:00+00:00"}',
        '{"slip_id": "s2", "evm_id": "E", "image_path": "b.png", "sequence_no": 2, "timestamp": "2026-04-01T08:00:00+00:00"}',
    ]
    p = tmp_path / "batch.jsonl"
    p.write_text("\n".join(lines) + "\n", encoding="utf-8")
    with pytest.raises(ManifestError):
        load_slip_manifest(p)
