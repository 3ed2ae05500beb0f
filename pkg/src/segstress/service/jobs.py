"""In-process job registry for long-running experiments."""
from __future__ import annotations

import threading
import traceback
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field


@dataclass
class Job:
    job_id: str
    kind: str
    out_dir: str
    state: str = "queued"
    error: str | None = None
    summary: dict | None = None
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def snapshot(self) -> dict:
        with self._lock:
            return {
                "job_id": self.job_id,
                "kind": self.kind,
                "state": self.state,
                "out_dir": self.out_dir,
                "error": self.error,
                "summary": self.summary,
            }


class JobRegistry:
    """Experiments run on worker threads; subprocess-heavy work releases the GIL."""

    def __init__(self, max_workers: int = 2):
        self._jobs: dict[str, Job] = {}
        self._lock = threading.Lock()
        self._pool = ThreadPoolExecutor(max_workers=max_workers, thread_name_prefix="job")

    def submit(self, kind: str, out_dir: str, fn) -> Job:
        job = Job(job_id=uuid.uuid4().hex[:12], kind=kind, out_dir=out_dir)
        with self._lock:
            self._jobs[job.job_id] = job

        def run():
            with job._lock:
                job.state = "running"
            try:
                summary = fn()
                with job._lock:
                    job.summary = summary
                    job.state = "done"
            except Exception as exc:
                with job._lock:
                    job.error = f"{exc}\n{traceback.format_exc(limit=5)}"
                    job.state = "failed"

        self._pool.submit(run)
        return job

    def get(self, job_id: str) -> Job | None:
        with self._lock:
            return self._jobs.get(job_id)

    def all(self) -> list[Job]:
        with self._lock:
            return list(self._jobs.values())
