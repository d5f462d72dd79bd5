"""Disk-persisted job manager for long-running generation and editing runs.

Jobs move queued -> running -> done|failed, report monotone progress, and
persist their request, result, and trace under the data directory so
editing sessions can resume after a restart. A bounded queue guards the
single-core guidance workloads.
"""

import json
import threading
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

JOB_KINDS = ("generate", "edit", "recover", "interpolate")
STATUSES = ("queued", "running", "done", "failed")


class QueueFullError(RuntimeError):
    pass


@dataclass
class Job:
    id: str
    kind: str
    status: str = "queued"
    progress: float = 0.0
    error: str = ""
    request: dict = field(default_factory=dict)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def to_json_dict(self) -> dict:
        return {
            "id": self.id,
            "kind": self.kind,
            "status": self.status,
            "progress": self.progress,
            "error": self.error,
            "result": f"/jobs/{self.id}/result",
            "trace": f"/jobs/{self.id}/trace",
        }

    def set_progress(self, value: float):
        with self._lock:
            self.progress = max(self.progress, min(float(value), 1.0))


class JobManager:
    """Runs jobs on worker threads with a bounded pending queue."""

    def __init__(self, root: Path, queue_limit: int = 4, workers: int = 1):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.queue_limit = queue_limit
        self.jobs: dict[str, Job] = {}
        self._lock = threading.Lock()
        self._queue: list[tuple[Job, callable]] = []
        self._wake = threading.Condition(self._lock)
        self._workers = [
            threading.Thread(target=self._work, daemon=True) for _ in range(workers)
        ]
        self._stop = False
        for w in self._workers:
            w.start()
        self._load_persisted()

    # ----------------------------------------------------------- lifecycle

    def submit(self, kind: str, request: dict, runner) -> Job:
        """runner(job) -> dict of artifact name -> json-serializable payload."""
        if kind not in JOB_KINDS:
            raise ValueError(f"unknown job kind {kind!r}")
        with self._lock:
            active = sum(1 for j in self.jobs.values() if j.status in ("queued", "running"))
            if active >= self.queue_limit:
                raise QueueFullError("job queue is full")
            job = Job(id=uuid.uuid4().hex[:12], kind=kind, request=request)
            self.jobs[job.id] = job
            self._persist_request(job)
            self._queue.append((job, runner))
            self._wake.notify()
        return job

    def get(self, job_id: str) -> Optional[Job]:
        with self._lock:
            return self.jobs.get(job_id)

    def shutdown(self):
        with self._lock:
            self._stop = True
            self._wake.notify_all()

    def _work(self):
        while True:
            with self._lock:
                while not self._queue and not self._stop:
                    self._wake.wait()
                if self._stop:
                    return
                job, runner = self._queue.pop(0)
                job.status = "running"
            try:
                artifacts = runner(job)
                for name, payload in (artifacts or {}).items():
                    self._persist(job, name, payload)
                with self._lock:
                    job.progress = 1.0
                    job.status = "done"
            except Exception as exc:  # jobs must never take a worker down
                with self._lock:
                    job.status = "failed"
                    job.error = f"{type(exc).__name__}: {exc}"
            self._persist_status(job)

    # ----------------------------------------------------------- persistence

    def _job_dir(self, job: Job) -> Path:
        d = self.root / job.id
        d.mkdir(parents=True, exist_ok=True)
        return d

    def _persist_request(self, job: Job):
        d = self._job_dir(job)
        (d / "request.json").write_text(json.dumps(
            {"kind": job.kind, "request": job.request}))
        self._persist_status(job)

    def _persist_status(self, job: Job):
        (self._job_dir(job) / "status.json").write_text(json.dumps(job.to_json_dict()))

    def _persist(self, job: Job, name: str, payload):
        path = self._job_dir(job) / f"{name}.json"
        if name == "trace":
            lines = "\n".join(json.dumps(entry) for entry in payload)
            (self._job_dir(job) / "trace.jsonl").write_text(lines)
        else:
            path.write_text(json.dumps(payload))

    def artifact_path(self, job_id: str, name: str) -> Path:
        suffix = "trace.jsonl" if name == "trace" else f"{name}.json"
        return self.root / job_id / suffix

    def _load_persisted(self):
        """Recover finished jobs from disk so sessions can resume."""
        for status_file in self.root.glob("*/status.json"):
            try:
                data = json.loads(status_file.read_text())
            except (OSError, json.JSONDecodeError):
                continue
            if data.get("status") not in ("done", "failed"):
                continue
            job = Job(
                id=data["id"],
                kind=data.get("kind", "generate"),
                status=data["status"],
                progress=float(data.get("progress", 1.0)),
                error=data.get("error", ""),
            )
            self.jobs[job.id] = job
