"""Per-machine counting, human adjudication, reconciliation, anomalies.

A batch of captured slip images for one machine is classified into a
:class:`TallySheet`; slips below the confidence threshold queue up for
human adjudication (most ambiguous first). Once the queue is resolved the
sheet reconciles against the machine's electronic counts, with the paper
count prevailing on any discrepancy.

The conservation identity

    sum(auto) + sum(adjudicated) + rejected + len(queue) == total_slips

holds after every operation and is re-checked internally.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from pathlib import Path

from .classifier import Model, Prediction, predict
from .errors import (
    AlreadyAdjudicated,
    BatchTooLarge,
    EmptyModel,
    ManifestError,
    MissingTimestamp,
    MixedEvm,
    UnknownSlip,
    UnresolvedQueue,
    UnsortedInput,
)
from .images import load_image

MAX_SLIPS_PER_EVM = 1500  # one booth serves at most 1500 voters
REJECTED = "REJECTED"
DEFAULT_CONFIDENCE_THRESHOLD = 0.80
DEFAULT_RATE_LIMIT = 8  # slips per minute considered physically plausible
DEFAULT_RATE_WINDOW_S = 60.0


@dataclass(frozen=True)
class SlipRecord:
    slip_id: str
    evm_id: str
    image_path: str
    sequence_no: int
    timestamp: datetime | None = None


@dataclass
class TallySheet:
    evm_id: str
    confidence_threshold: float
    total_slips: int = 0
    auto_counts: dict[str, int] = field(default_factory=dict)
    adjudicated_counts: dict[str, int] = field(default_factory=dict)
    rejected: int = 0
    review_queue: list[tuple[str, Prediction]] = field(default_factory=list)
    decided: set[str] = field(default_factory=set)

    def check_conservation(self) -> None:
        counted = (
            sum(self.auto_counts.values())
            + sum(self.adjudicated_counts.values())
            + self.rejected
            + len(self.review_queue)
        )
        if counted != self.total_slips:
            raise AssertionError(
                f"conservation violated on {self.evm_id}: {counted} != {self.total_slips}"
            )

    def vvpat_counts(self) -> dict[str, int]:
        """Paper counts per party: auto plus adjudicated (rejected excluded)."""
        out = dict(self.auto_counts)
        for party, n in self.adjudicated_counts.items():
            out[party] = out.get(party, 0) + n
        return out


@dataclass(frozen=True)
class ReconciliationResult:
    evm_id: str
    status: str  # "MATCH" | "MISMATCH"
    evm_counts: dict[str, int]
    vvpat_counts: dict[str, int]
    deltas: dict[str, int]
    final_counts: dict[str, int]


@dataclass(frozen=True)
class AnomalyWindow:
    window_start: datetime
    window_end: datetime
    slip_count: int


def count_slips(
    model: Model,
    slips: list[SlipRecord],
    threshold: float = DEFAULT_CONFIDENCE_THRESHOLD,
    images: dict[str, "object"] | None = None,
) -> TallySheet:
    """Classify a one-machine batch into a tally sheet.

    Slips at or above the threshold count automatically; the rest join the
    review queue ordered by ascending confidence (ties keep batch order).
    ``images`` may pre-supply decoded rasters keyed by slip_id; otherwise
    each slip's image_path is loaded from disk.
    """
    if not 0.0 <= threshold <= 1.0:
        raise ValueError(f"threshold must be in [0, 1], got {threshold}")
    if not model.centroids:
        raise EmptyModel("model holds no classes")
    if len(slips) > MAX_SLIPS_PER_EVM:
        raise BatchTooLarge(f"{len(slips)} slips exceeds the {MAX_SLIPS_PER_EVM} cap")
    evm_ids = {s.evm_id for s in slips}
    if len(evm_ids) > 1:
        raise MixedEvm(f"batch spans multiple machines: {sorted(evm_ids)}")
    evm_id = slips[0].evm_id if slips else "unknown"
    tally = TallySheet(evm_id=evm_id, confidence_threshold=threshold, total_slips=len(slips))
    pending: list[tuple[float, int, str, Prediction]] = []
    for i, slip in enumerate(slips):
        image = images[slip.slip_id] if images is not None else load_image(slip.image_path)
        pred = predict(model, image)
        if pred.confidence >= threshold:
            tally.auto_counts[pred.party_id] = tally.auto_counts.get(pred.party_id, 0) + 1
        else:
            pending.append((pred.confidence, i, slip.slip_id, pred))
    pending.sort(key=lambda t: (t[0], t[1]))
    tally.review_queue = [(slip_id, pred) for _, _, slip_id, pred in pending]
    tally.check_conservation()
    return tally


def apply_adjudication(tally: TallySheet, slip_id: str, decision: str) -> TallySheet:
    """Resolve one queued slip with a human decision.

    ``decision`` is a party_id or the literal ``REJECTED``. A slip can be
    decided exactly once; the final counts are independent of the order in
    which queued slips get resolved.
    """
    if slip_id in tally.decided:
        raise AlreadyAdjudicated(f"slip {slip_id} was already decided")
    idx = next((i for i, (sid, _) in enumerate(tally.review_queue) if sid == slip_id), None)
    if idx is None:
        raise UnknownSlip(f"slip {slip_id} is not in the review queue")
    tally.review_queue.pop(idx)
    tally.decided.add(slip_id)
    if decision == REJECTED:
        tally.rejected += 1
    else:
        tally.adjudicated_counts[decision] = tally.adjudicated_counts.get(decision, 0) + 1
    tally.check_conservation()
    return tally


def reconcile(tally: TallySheet, evm_counts: dict[str, int]) -> ReconciliationResult:
    """Compare paper counts against machine counts; paper prevails.

    Every queued slip must be resolved first. Parties missing from either
    side count as zero there. On MISMATCH the final counts are the paper
    (vvpat) counts, per the governing rule that the paper trail overrides
    the machine total.
    """
    if tally.review_queue:
        raise UnresolvedQueue(
            f"{len(tally.review_queue)} slips still await adjudication on {tally.evm_id}"
        )
    vvpat = tally.vvpat_counts()
    parties = sorted(set(vvpat) | set(evm_counts))
    deltas = {p: vvpat.get(p, 0) - evm_counts.get(p, 0) for p in parties}
    status = "MATCH" if all(d == 0 for d in deltas.values()) else "MISMATCH"
    final = {p: vvpat.get(p, 0) for p in parties}
    return ReconciliationResult(
        evm_id=tally.evm_id,
        status=status,
        evm_counts={p: evm_counts.get(p, 0) for p in parties},
        vvpat_counts={p: vvpat.get(p, 0) for p in parties},
        deltas=deltas,
        final_counts=final,
    )


def detect_rate_anomalies(
    timestamps: list[datetime],
    limit: int = DEFAULT_RATE_LIMIT,
    window_seconds: float = DEFAULT_RATE_WINDOW_S,
) -> list[AnomalyWindow]:
    """Windows where more slips printed than physically plausible.

    Scans windows [t_i, t_i + window) anchored at each slip time; any
    anchored window holding more than ``limit`` slips is a violation, and
    overlapping violations at consecutive anchors merge into one maximal
    window. Input must be sorted non-decreasing.
    """
    for a, b in zip(timestamps, timestamps[1:]):
        if b < a:
            raise UnsortedInput("timestamps must be sorted non-decreasing")
    n = len(timestamps)
    window = timedelta(seconds=window_seconds)
    violating: list[int] = []
    j = 0
    lo = 0
    for i in range(n):
        # the window is a time interval: equal timestamps before the anchor
        # index still fall inside [t_i, t_i + window)
        if i > 0 and timestamps[i] != timestamps[i - 1]:
            lo = i
        if j < i:
            j = i
        while j < n and timestamps[j] - timestamps[i] < window:
            j += 1
        if j - lo > limit:
            violating.append(i)
    out: list[AnomalyWindow] = []
    k = 0
    while k < len(violating):
        first = violating[k]
        last = first
        while (
            k + 1 < len(violating)
            and violating[k + 1] == violating[k] + 1
            and timestamps[violating[k + 1]] - timestamps[last] < window
        ):
            k += 1
            last = violating[k]
        start = timestamps[first]
        end = timestamps[last] + window
        count = sum(1 for t in timestamps if start <= t < end)
        out.append(AnomalyWindow(window_start=start, window_end=end, slip_count=count))
        k += 1
    return out


def separate_mock_polls(
    slips: list[SlipRecord], poll_open: datetime
) -> tuple[list[SlipRecord], list[SlipRecord]]:
    """Split a batch into pre-opening (mock) and real slips by timestamp."""
    for s in slips:
        if s.timestamp is None:
            raise MissingTimestamp(f"slip {s.slip_id} has no timestamp")
    mock = [s for s in slips if s.timestamp < poll_open]
    valid = [s for s in slips if s.timestamp >= poll_open]
    return mock, valid


# manifests and serialisation -------------------------------------------------


def parse_timestamp(text: str) -> datetime:
    return datetime.fromisoformat(text.replace("Z", "+00:00"))


def load_slip_manifest(path: str | Path) -> list[SlipRecord]:
    """Read a newline-delimited slip batch manifest.

    Records carry slip_id, evm_id, image_path, sequence_no, and an optional
    ISO-8601 timestamp. Relative image paths resolve against the manifest's
    directory. Per machine, slip_ids must be unique and timestamps (when
    present) non-decreasing with sequence_no.
    """
    p = Path(path)
    base = p.parent
    records: list[SlipRecord] = []
    for lineno, line in enumerate(p.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ManifestError(f"{p}:{lineno}: invalid record: {exc}") from exc
        ts = parse_timestamp(rec["timestamp"]) if rec.get("timestamp") else None
        image_path = rec["image_path"]
        if not Path(image_path).is_absolute():
            image_path = str(base / image_path)
        records.append(
            SlipRecord(
                slip_id=str(rec["slip_id"]),
                evm_id=str(rec["evm_id"]),
                image_path=image_path,
                sequence_no=int(rec["sequence_no"]),
                timestamp=ts,
            )
        )
    per_evm: dict[str, list[SlipRecord]] = {}
    for r in records:
        per_evm.setdefault(r.evm_id, []).append(r)
    for evm_id, group in per_evm.items():
        seen = set()
        for r in group:
            if r.slip_id in seen:
                raise ManifestError(f"duplicate slip_id {r.slip_id!r} on {evm_id}")
            seen.add(r.slip_id)
        stamped = sorted(
            (r for r in group if r.timestamp is not None), key=lambda r: r.sequence_no
        )
        for a, b in zip(stamped, stamped[1:]):
            if b.timestamp < a.timestamp:
                raise ManifestError(
                    f"timestamps decrease with sequence_no on {evm_id} "
                    f"({a.slip_id} -> {b.slip_id})"
                )
    return records


def prediction_to_dict(pred: Prediction) -> dict:
    return {
        "party_id": pred.party_id,
        "confidence": pred.confidence,
        "margin": pred.margin,
        "top_k": [[p, s] for p, s in pred.top_k],
    }


def prediction_from_dict(doc: dict) -> Prediction:
    return Prediction(
        party_id=doc["party_id"],
        confidence=float(doc["confidence"]),
        margin=float(doc["margin"]),
        top_k=[(p, float(s)) for p, s in doc["top_k"]],
    )


def tally_to_dict(tally: TallySheet) -> dict:
    return {
        "evm_id": tally.evm_id,
        "confidence_threshold": tally.confidence_threshold,
        "total_slips": tally.total_slips,
        "auto_counts": {p: tally.auto_counts[p] for p in sorted(tally.auto_counts)},
        "adjudicated_counts": {
            p: tally.adjudicated_counts[p] for p in sorted(tally.adjudicated_counts)
        },
        "rejected": tally.rejected,
        "review_queue": [
            {"slip_id": sid, "prediction": prediction_to_dict(pred)}
            for sid, pred in tally.review_queue
        ],
        "decided": sorted(tally.decided),
    }


def tally_from_dict(doc: dict) -> TallySheet:
    tally = TallySheet(
        evm_id=doc["evm_id"],
        confidence_threshold=float(doc["confidence_threshold"]),
        total_slips=int(doc["total_slips"]),
        auto_counts={p: int(n) for p, n in doc["auto_counts"].items()},
        adjudicated_counts={p: int(n) for p, n in doc["adjudicated_counts"].items()},
        rejected=int(doc["rejected"]),
        review_queue=[
            (entry["slip_id"], prediction_from_dict(entry["prediction"]))
            for entry in doc["review_queue"]
        ],
        decided=set(doc.get("decided", [])),
    )
    tally.check_conservation()
    return tally


def reconciliation_to_dict(result: ReconciliationResult) -> dict:
    return {
        "evm_id": result.evm_id,
        "status": result.status,
        "evm_counts": result.evm_counts,
        "vvpat_counts": result.vvpat_counts,
        "deltas": result.deltas,
        "final_counts": result.final_counts,
    }


def anomalies_to_dicts(windows: list[AnomalyWindow]) -> list[dict]:
    return [
        {
            "window_start": w.window_start.isoformat(),
            "window_end": w.window_end.isoformat(),
            "slip_count": w.slip_count,
        }
        for w in windows
    ]
