"""Live adjudication service: review tasks, decisions, views, journal.

The core (:class:`AdjudicationService`) is plain Python guarded by one
lock; every state mutation appends a journal entry (fsync per decision)
BEFORE acknowledging, and constructing a service on an existing journal
replays it, so a crash-restart lands exactly on the pre-crash state.

Batch loads store the full classified tally in the journal payload, which
keeps replay independent of model files and slip images.

The HTTP layer (:func:`create_app`) is a thin FastAPI wrapper; all bodies
are JSON. Claims carry a lease (default 120 s) so an abandoned console
session returns its task to the queue without admin action.
"""

import hashlib
import json
import os
import threading
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Callable, Optional

from .classifier import Model, load_model
from .errors import (
    AlreadyDecided,
    DuplicateBatch,
    NotClaimant,
    SlipCountError,
    UnknownTask,
)
from .registry import SymbolRegistry
from .tally import (
    DEFAULT_CONFIDENCE_THRESHOLD,
    AnomalyWindow,
    Prediction,
    ReconciliationResult,
    TallySheet,
    anomalies_to_dicts,
    count_slips,
    detect_rate_anomalies,
    load_slip_manifest,
    parse_timestamp,
    prediction_from_dict,
    prediction_to_dict,
    reconcile,
    reconciliation_to_dict,
    tally_from_dict,
    tally_to_dict,
)

DEFAULT_LEASE_SECONDS = 120.0

PENDING = "PENDING"
CLAIMED = "CLAIMED"
DECIDED = "DECIDED"


@dataclass
class ReviewTask:
    task_id: str
    slip_id: str
    evm_id: str
    image_path: str
    prediction: Prediction
    state: str = PENDING
    claimed_by: Optional[str] = None
    claimed_at: Optional[datetime] = None
    decision: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "task_id": self.task_id,
            "slip_id": self.slip_id,
            "evm_id": self.evm_id,
            "image_path": self.image_path,
            "prediction": prediction_to_dict(self.prediction),
            "state": self.state,
            "claimed_by": self.claimed_by,
            "claimed_at": self.claimed_at.isoformat() if self.claimed_at else None,
            "decision": self.decision,
        }


def _utcnow() -> datetime:
    return datetime.now(timezone.utc)


class AdjudicationService:
    """Single-writer counting state with an append-only journal."""

    def __init__(
        self,
        model: Model,
        journal_path: str | Path,
        threshold: float = DEFAULT_CONFIDENCE_THRESHOLD,
        lease_seconds: float = DEFAULT_LEASE_SECONDS,
        now_fn: Callable[[], datetime] = _utcnow,
        registry: Optional[SymbolRegistry] = None,
    ) -> None:
        self._model = model
        self._threshold = threshold
        self._lease = timedelta(seconds=lease_seconds)
        self._now = now_fn
        self._registry = registry
        self._lock = threading.RLock()
        self._seq = 0
        self._tallies: dict[str, TallySheet] = {}
        self._tasks: dict[str, ReviewTask] = {}
        self._task_counter = 0
        self._digests: set[str] = set()
        self._evm_counts: dict[str, dict[str, int]] = {}
        self._reconciliations: dict[str, ReconciliationResult] = {}
        self._anomalies: dict[str, list[AnomalyWindow]] = {}
        self._journal_path = Path(journal_path)
        self._journal_path.parent.mkdir(parents=True, exist_ok=True)
        if self._journal_path.exists():
            self._replay_file()
        self._journal_file = open(self._journal_path, "a", encoding="utf-8")

    # journal -----------------------------------------------------------------

    def _append(self, kind: str, payload: dict) -> None:
        self._seq += 1
        entry = {
            "seq": self._seq,
            "ts": self._now().isoformat(),
            "kind": kind,
            "payload": payload,
        }
        self._journal_file.write(json.dumps(entry) + "\n")
        self._journal_file.flush()
        os.fsync(self._journal_file.fileno())

    def _replay_file(self) -> None:
        for line in self._journal_path.read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            self.apply_entry(json.loads(line))

    def apply_entry(self, entry: dict) -> None:
        """Apply one journal entry to in-memory state (no re-journaling)."""
        kind, payload = entry["kind"], entry["payload"]
        if entry["seq"] != self._seq + 1:
            raise SlipCountError(
                f"journal gap: expected seq {self._seq + 1}, got {entry['seq']}"
            )
        self._seq = entry["seq"]
        if kind == "BATCH_LOADED":
            tally = tally_from_dict(payload["tally"])
            self._tallies[tally.evm_id] = tally
            self._digests.add(payload["digest"])
            for t in payload["tasks"]:
                task = ReviewTask(
                    task_id=t["task_id"],
                    slip_id=t["slip_id"],
                    evm_id=t["evm_id"],
                    image_path=t["image_path"],
                    prediction=prediction_from_dict(t["prediction"]),
                )
                self._tasks[task.task_id] = task
                self._task_counter = max(self._task_counter, int(task.task_id[1:]))
            stamps = [parse_timestamp(s) for s in payload["timestamps"]]
            self._anomalies[tally.evm_id] = detect_rate_anomalies(stamps)
        elif kind == "TASK_CLAIMED":
            task = self._tasks[payload["task_id"]]
            task.state = CLAIMED
            task.claimed_by = payload["worker"]
            task.claimed_at = parse_timestamp(payload["claimed_at"])
        elif kind == "DECISION":
            task = self._tasks[payload["task_id"]]
            tally = self._tallies[task.evm_id]
            from .tally import apply_adjudication

            apply_adjudication(tally, task.slip_id, payload["decision"])
            task.state = DECIDED
            task.decision = payload["decision"]
        elif kind == "EVM_COUNTS":
            self._evm_counts[payload["evm_id"]] = {
                p: int(n) for p, n in payload["counts"].items()
            }
        elif kind == "RECONCILED":
            evm_id = payload["evm_id"]
            result = reconcile(self._tallies[evm_id], self._evm_counts[evm_id])
            self._reconciliations[evm_id] = result
        else:
            raise SlipCountError(f"unknown journal event kind: {kind}")

    # operations ----------------------------------------------------------------

    def load_batch(self, manifest_path: str | Path, threshold: Optional[float] = None) -> dict:
        """Classify a slip batch and queue its low-confidence slips."""
        manifest_path = Path(manifest_path)
        data = manifest_path.read_bytes()
        digest = hashlib.sha256(data).hexdigest()
        thr = self._threshold if threshold is None else threshold
        with self._lock:
            if digest in self._digests:
                raise DuplicateBatch(f"manifest already loaded (digest {digest[:12]})")
            slips = load_slip_manifest(manifest_path)
            evm_ids = {s.evm_id for s in slips}
            if len(evm_ids) == 1 and next(iter(evm_ids)) in self._tallies:
                raise DuplicateBatch(f"EVM {next(iter(evm_ids))} already has an active batch")
            tally = count_slips(self._model, slips, thr)
            by_id = {s.slip_id: s for s in slips}
            tasks = []
            for slip_id, pred in tally.review_queue:
                self._task_counter += 1
                task = ReviewTask(
                    task_id=f"t{self._task_counter:05d}",
                    slip_id=slip_id,
                    evm_id=tally.evm_id,
                    image_path=by_id[slip_id].image_path,
                    prediction=pred,
                )
                self._tasks[task.task_id] = task
                tasks.append(task)
            self._tallies[tally.evm_id] = tally
            self._digests.add(digest)
            stamped = sorted(
                (s.timestamp for s in slips if s.timestamp is not None)
            )
            self._anomalies[tally.evm_id] = detect_rate_anomalies(stamped)
            self._append(
                "BATCH_LOADED",
                {
                    "manifest_path": str(manifest_path),
                    "digest": digest,
                    "threshold": thr,
                    "tally": tally_to_dict(tally),
                    "tasks": [
                        {
                            "task_id": t.task_id,
                            "slip_id": t.slip_id,
                            "evm_id": t.evm_id,
                            "image_path": t.image_path,
                            "prediction": prediction_to_dict(t.prediction),
                        }
                        for t in tasks
                    ],
                    "timestamps": [s.isoformat() for s in stamped],
                },
            )
            return {
                "evm_id": tally.evm_id,
                "digest": digest,
                "total_slips": tally.total_slips,
                "auto_counts": dict(sorted(tally.auto_counts.items())),
                "queue_size": len(tally.review_queue),
                "anomaly_windows": len(self._anomalies[tally.evm_id]),
            }

    def _sweep_leases(self) -> None:
        now = self._now()
        for task in self._tasks.values():
            if task.state == CLAIMED and task.claimed_at is not None:
                if now - task.claimed_at >= self._lease:
                    task.state = PENDING
                    task.claimed_by = None
                    task.claimed_at = None

    def claim_next_task(self, worker_id: str) -> Optional[ReviewTask]:
        """Atomically claim the most ambiguous pending slip, if any."""
        with self._lock:
            self._sweep_leases()
            pending = [t for t in self._tasks.values() if t.state == PENDING]
            if not pending:
                return None
            task = min(pending, key=lambda t: (t.prediction.confidence, t.task_id))
            now = self._now()
            task.state = CLAIMED
            task.claimed_by = worker_id
            task.claimed_at = now
            self._append(
                "TASK_CLAIMED",
                {"task_id": task.task_id, "worker": worker_id, "claimed_at": now.isoformat()},
            )
            return task

    def submit_decision(self, task_id: str, worker_id: str, decision: str) -> dict:
        """Record a human decision for a claimed task; returns the new tally."""
        with self._lock:
            task = self._tasks.get(task_id)
            if task is None:
                raise UnknownTask(f"no such task: {task_id}")
            if task.state == DECIDED:
                raise AlreadyDecided(f"task {task_id} already decided")
            self._sweep_leases()
            if task.state != CLAIMED or task.claimed_by != worker_id:
                raise NotClaimant(f"task {task_id} is not claimed by {worker_id}")
            from .tally import apply_adjudication

            tally = self._tallies[task.evm_id]
            apply_adjudication(tally, task.slip_id, decision)
            task.state = DECIDED
            task.decision = decision
            self._append(
                "DECISION",
                {"task_id": task_id, "worker": worker_id, "decision": decision},
            )
            return tally_to_dict(tally)

    def upload_evm_counts(self, evm_id: str, counts: dict[str, int]) -> None:
        with self._lock:
            clean = {str(p): int(n) for p, n in counts.items()}
            self._evm_counts[evm_id] = clean
            self._append("EVM_COUNTS", {"evm_id": evm_id, "counts": clean})

    def reconcile_evm(self, evm_id: Optional[str] = None) -> list[dict]:
        """Reconcile one machine (or every machine with uploaded counts)."""
        with self._lock:
            targets = [evm_id] if evm_id else sorted(self._evm_counts)
            results = []
            for eid in targets:
                if eid not in self._tallies:
                    raise UnknownTask(f"no batch loaded for EVM {eid}")
                if eid not in self._evm_counts:
                    raise SlipCountError(f"no EVM counts uploaded for {eid}")
                result = reconcile(self._tallies[eid], self._evm_counts[eid])
                self._reconciliations[eid] = result
                self._append(
                    "RECONCILED", {"evm_id": eid, "counts": self._evm_counts[eid]}
                )
                results.append(reconciliation_to_dict(result))
            return results

    # views ---------------------------------------------------------------------

    def get_views(self) -> dict:
        """Read-only snapshot for dashboards: tally, reconciliation, anomalies."""
        with self._lock:
            return {
                "tally": self.tally_view(),
                "reconciliation": self.reconciliation_view(),
                "anomalies": self.anomaly_view(),
            }

    def tally_view(self) -> dict:
        with self._lock:
            return {
                "evms": [tally_to_dict(self._tallies[e]) for e in sorted(self._tallies)],
                "pending_tasks": sum(
                    1 for t in self._tasks.values() if t.state != DECIDED
                ),
            }

    def reconciliation_view(self) -> dict:
        with self._lock:
            return {
                "reconciliations": [
                    reconciliation_to_dict(self._reconciliations[e])
                    for e in sorted(self._reconciliations)
                ]
            }

    def anomaly_view(self) -> dict:
        with self._lock:
            return {
                "evms": {
                    e: anomalies_to_dicts(w) for e, w in sorted(self._anomalies.items())
                }
            }

    def task_image_path(self, slip_id: str) -> Path:
        with self._lock:
            for task in self._tasks.values():
                if task.slip_id == slip_id:
                    return Path(task.image_path)
        raise UnknownTask(f"no task references slip {slip_id}")

    def party_listing(self) -> list[dict]:
        if self._registry is None:
            return []
        return [
            {"party_id": r.party_id, "party_name": r.party_name}
            for r in self._registry
        ]

    def state_snapshot(self) -> dict:
        """Canonical full-state dict (used to verify journal replay)."""
        with self._lock:
            return {
                "seq": self._seq,
                "tallies": {e: tally_to_dict(t) for e, t in sorted(self._tallies.items())},
                "tasks": {tid: t.to_dict() for tid, t in sorted(self._tasks.items())},
                "digests": sorted(self._digests),
                "evm_counts": {e: c for e, c in sorted(self._evm_counts.items())},
                "reconciliations": {
                    e: reconciliation_to_dict(r)
                    for e, r in sorted(self._reconciliations.items())
                },
                "anomalies": {
                    e: anomalies_to_dicts(w) for e, w in sorted(self._anomalies.items())
                },
            }

    def close(self) -> None:
        self._journal_file.close()


def replay_journal(
    journal_path: str | Path, upto_seq: Optional[int] = None
) -> AdjudicationService:
    """Rebuild a service's state purely from its journal (no model needed).

    ``upto_seq`` replays only a prefix, for checking that every prefix of
    the journal lands on the state the live service had at that point.
    """
    svc = AdjudicationService.__new__(AdjudicationService)
    svc._model = None  # replay never classifies
    svc._threshold = DEFAULT_CONFIDENCE_THRESHOLD
    svc._lease = timedelta(seconds=DEFAULT_LEASE_SECONDS)
    svc._now = _utcnow
    svc._registry = None
    svc._lock = threading.RLock()
    svc._seq = 0
    svc._tallies = {}
    svc._tasks = {}
    svc._task_counter = 0
    svc._digests = set()
    svc._evm_counts = {}
    svc._reconciliations = {}
    svc._anomalies = {}
    svc._journal_path = Path(journal_path)
    svc._journal_file = None
    for line in svc._journal_path.read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        entry = json.loads(line)
        if upto_seq is not None and entry["seq"] > upto_seq:
            break
        svc.apply_entry(entry)
    return svc


# HTTP layer -------------------------------------------------------------------


def create_app(service: AdjudicationService, console_dist: Optional[Path] = None):
    """Wrap a service in the JSON-over-HTTP API used by the console."""
    from fastapi import FastAPI, HTTPException, Response
    from fastapi.responses import FileResponse, JSONResponse
    from pydantic import BaseModel

    class BatchRequest(BaseModel):
        manifest_path: str
        threshold: Optional[float] = None

    class DecisionRequest(BaseModel):
        worker: str
        decision: str

    class EvmCountsRequest(BaseModel):
        evm_id: str
        counts: dict[str, int]

    class ReconcileRequest(BaseModel):
        evm_id: Optional[str] = None

    app = FastAPI(title="slipcount adjudication service")

    def _http_error(exc: SlipCountError) -> HTTPException:
        status = 400
        if isinstance(exc, (DuplicateBatch, AlreadyDecided)):
            status = 409
        elif isinstance(exc, UnknownTask):
            status = 404
        elif isinstance(exc, NotClaimant):
            status = 403
        return HTTPException(status_code=status, detail=str(exc))

    @app.post("/api/batches")
    def post_batch(req: BatchRequest):
        try:
            return service.load_batch(req.manifest_path, req.threshold)
        except FileNotFoundError as exc:
            raise HTTPException(status_code=400, detail=f"manifest not readable: {exc}")
        except SlipCountError as exc:
            raise _http_error(exc)

    @app.get("/api/tasks/next")
    def next_task(worker: str):
        task = service.claim_next_task(worker)
        if task is None:
            return Response(status_code=204)
        return task.to_dict()

    @app.post("/api/tasks/{task_id}/decision")
    def decide(task_id: str, req: DecisionRequest):
        try:
            return service.submit_decision(task_id, req.worker, req.decision)
        except SlipCountError as exc:
            raise _http_error(exc)

    @app.get("/api/tally")
    def tally_view():
        return service.tally_view()

    @app.get("/api/reconciliation")
    def reconciliation_view():
        return service.reconciliation_view()

    @app.get("/api/anomalies")
    def anomaly_view():
        return service.anomaly_view()

    @app.post("/api/evm-counts")
    def evm_counts(req: EvmCountsRequest):
        service.upload_evm_counts(req.evm_id, req.counts)
        return {"evm_id": req.evm_id, "parties": len(req.counts)}

    @app.post("/api/reconcile")
    def do_reconcile(req: Optional[ReconcileRequest] = None):
        try:
            return {"reconciliations": service.reconcile_evm(req.evm_id if req else None)}
        except SlipCountError as exc:
            raise _http_error(exc)

    @app.get("/api/slips/{slip_id}/image")
    def slip_image(slip_id: str):
        try:
            path = service.task_image_path(slip_id)
        except SlipCountError as exc:
            raise _http_error(exc)
        media = "image/png" if path.suffix.lower() == ".png" else "image/jpeg"
        return FileResponse(path, media_type=media)

    @app.get("/api/parties")
    def parties():
        return JSONResponse(service.party_listing())

    if console_dist is not None and Path(console_dist).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/console", StaticFiles(directory=console_dist, html=True), name="console")

    return app


def serve(
    model_path: str | Path,
    journal_path: str | Path,
    port: int = 8000,
    threshold: float = DEFAULT_CONFIDENCE_THRESHOLD,
    registry_dir: Optional[str] = None,
    console_dist: Optional[str] = None,
    host: str = "127.0.0.1",
) -> None:
    """Run the HTTP service (blocking)."""
    import uvicorn

    registry = SymbolRegistry.load(registry_dir) if registry_dir else None
    service = AdjudicationService(
        model=load_model(model_path),
        journal_path=journal_path,
        threshold=threshold,
        registry=registry,
    )
    app = create_app(service, Path(console_dist) if console_dist else None)
    uvicorn.run(app, host=host, port=port, log_level="warning")
