"""Python client for the service.

With a base URL it talks to a running server over HTTP; without one it
mounts the application in-process, so the full pipeline works with no
server running — same routes, same payloads, no sockets.
"""

import time
from typing import Callable, Optional

import httpx

from .errors import SegLabError

TERMINAL_STATES = ("succeeded", "partial", "failed")


class ServiceError(SegLabError):
    """An error response from the service, with its HTTP status and kind."""

    def __init__(self, status_code: int, kind: str, detail: str):
        super().__init__(detail)
        self.status_code = status_code
        self.kind = kind
        self.detail = detail


class SegLabClient:
    def __init__(self, base_url: Optional[str] = None, timeout: float = 600.0):
        if base_url:
            self._client = httpx.Client(base_url=base_url, timeout=timeout)
        else:
            # sync-over-ASGI bridge; an httpx.Client subclass, so both
            # branches expose the same interface
            import warnings

            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                from starlette.testclient import TestClient

            from .service.app import create_app

            self._client = TestClient(
                create_app(),
                base_url="http://seglab.internal",
                raise_server_exceptions=False,
            )

    def close(self) -> None:
        self._client.close()

    def __enter__(self) -> "SegLabClient":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def _request(self, method: str, url: str, **kwargs) -> httpx.Response:
        response = self._client.request(method, url, **kwargs)
        if response.status_code >= 400:
            kind, detail = "error", response.text
            try:
                payload = response.json()
                detail = payload.get("detail", detail)
                kind = payload.get("error_kind", kind)
            except ValueError:
                pass
            raise ServiceError(response.status_code, kind, str(detail))
        return response

    # -- stateless endpoints ----------------------------------------------
    def health(self) -> dict:
        return self._request("GET", "/health").json()

    def validate_config(self, config_text: str) -> dict:
        return self._request("POST", "/config/validate", json={"config_text": config_text}).json()

    def compute_weights(self, stats: dict, schemes=None, zero_floor: bool = False) -> dict:
        body = {"stats": stats, "schemes": schemes, "zero_floor": zero_floor}
        return self._request("POST", "/compute/weights", json=body).json()["weights"]

    def compute_iou(self, pred, gt, empty_union: str = "one", iou_class: str = "foreground") -> dict:
        body = {"pred": pred, "gt": gt, "empty_union": empty_union, "iou_class": iou_class}
        return self._request("POST", "/compute/iou", json=body).json()

    def compute_mean_ci(self, values, level: float = 0.95) -> dict:
        return self._request(
            "POST", "/compute/mean_ci", json={"values": list(values), "level": level}
        ).json()

    def compute_cosine_lr(self, t: int, **kwargs) -> float:
        return self._request("POST", "/compute/cosine_lr", json={"t": t, **kwargs}).json()["lr"]

    # -- jobs ----------------------------------------------------------------
    def submit_job(self, kind: str, config_text: str, overrides: Optional[dict] = None) -> dict:
        body = {"kind": kind, "config_text": config_text, "overrides": overrides or {}}
        return self._request("POST", "/jobs", json=body).json()

    def get_job(self, job_id: str) -> dict:
        return self._request("GET", f"/jobs/{job_id}").json()

    def list_jobs(self) -> list:
        return self._request("GET", "/jobs").json()

    def wait_job(
        self,
        job_id: str,
        poll: float = 0.5,
        on_message: Optional[Callable[[str], None]] = None,
    ) -> dict:
        """Poll until the job reaches a terminal state, streaming new messages."""
        seen = 0
        while True:
            info = self.get_job(job_id)
            messages = info.get("messages", [])
            if on_message is not None:
                for message in messages[seen:]:
                    on_message(message)
            seen = len(messages)
            if info["state"] in TERMINAL_STATES:
                return info
            time.sleep(poll)

    def fetch_artifact(self, job_id: str, name: str) -> str:
        return self._request("GET", f"/jobs/{job_id}/files/{name}").text
