"""Background execution of pipeline stages.

Each submitted job runs on its own daemon thread; the manager records
progress messages, the final result payload, and the stage's exit code.
Config parsing happens synchronously at submit time so an invalid config
is rejected with an immediate error instead of a failed job.
"""

import itertools
import threading
import uuid
from typing import Dict, List, Optional

from ..config import ExperimentConfig, parse_config_text
from ..errors import ConfigError, SegLabError
from ..experiment import EXIT_ALL_FAILED, EXIT_CONFIG, EXIT_OK, EXIT_PARTIAL, execute_stage
from .schemas import JobInfo, Overrides

_MAX_MESSAGES = 5000


class Job:
    def __init__(self, job_id: str, kind: str, cfg: ExperimentConfig, order: int):
        self.id = job_id
        self.kind = kind
        self.cfg = cfg
        self.order = order
        self.lock = threading.Lock()
        self.state = "queued"
        self.exit_code: Optional[int] = None
        self.messages: List[str] = []
        self.result: Optional[dict] = None
        self.error: Optional[str] = None
        self.thread: Optional[threading.Thread] = None

    def log(self, message: str) -> None:
        with self.lock:
            if len(self.messages) < _MAX_MESSAGES:
                self.messages.append(message)
            elif len(self.messages) == _MAX_MESSAGES:
                self.messages.append("... (further output truncated)")

    def info(self) -> JobInfo:
        with self.lock:
            return JobInfo(
                id=self.id,
                kind=self.kind,
                state=self.state,
                exit_code=self.exit_code,
                messages=list(self.messages),
                result=self.result,
                error=self.error,
            )


class JobManager:
    def __init__(self):
        self._jobs: Dict[str, Job] = {}
        self._lock = threading.Lock()
        self._counter = itertools.count()

    def submit(self, kind: str, config_text: str, overrides: Overrides) -> Job:
        cfg = parse_config_text(config_text).with_overrides(
            seeds=overrides.seeds,
            output_dir=overrides.output_dir,
            device=overrides.device,
            deterministic=overrides.deterministic,
            jobs=overrides.jobs,
        )
        job = Job(uuid.uuid4().hex[:12], kind, cfg, next(self._counter))
        with self._lock:
            self._jobs[job.id] = job
        job.thread = threading.Thread(target=self._execute, args=(job,), daemon=True)
        job.thread.start()
        return job

    def _execute(self, job: Job) -> None:
        with job.lock:
            job.state = "running"
        try:
            code, result = execute_stage(job.kind, job.cfg, progress=job.log)
        except ConfigError as exc:
            with job.lock:
                job.state, job.error, job.exit_code = "failed", str(exc), EXIT_CONFIG
        except SegLabError as exc:
            with job.lock:
                job.state, job.error, job.exit_code = "failed", str(exc), EXIT_ALL_FAILED
        except Exception as exc:  # keep the server alive; surface the error on the job
            with job.lock:
                job.state = "failed"
                job.error = f"{type(exc).__name__}: {exc}"
                job.exit_code = EXIT_ALL_FAILED
        else:
            with job.lock:
                job.exit_code = code
                job.result = result
                if code == EXIT_OK:
                    job.state = "succeeded"
                elif code == EXIT_PARTIAL:
                    job.state = "partial"
                else:
                    job.state = "failed"

    def get(self, job_id: str) -> Optional[Job]:
        with self._lock:
            return self._jobs.get(job_id)

    def list(self) -> List[Job]:
        with self._lock:
            return sorted(self._jobs.values(), key=lambda j: j.order)
