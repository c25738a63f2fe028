"""The FastAPI application: stage jobs plus stateless compute endpoints."""

import json
from typing import List

import numpy as np
from fastapi import FastAPI, HTTPException
from fastapi.responses import JSONResponse, PlainTextResponse

from .. import __version__
from ..class_weights import SCHEMES, DatasetStats, compute_weights
from ..config import config_hash, parse_config_text
from ..errors import ConfigError, SegLabError
from ..experiment import workspace
from ..metrics import iou, mean_ci, pixel_accuracy
from ..schedule import cosine_lr
from .jobs import JobManager
from .schemas import (
    CosineLRRequest,
    CosineLRResponse,
    HealthResponse,
    IoURequest,
    IoUResponse,
    JobInfo,
    JobSubmitRequest,
    MeanCIRequest,
    MeanCIResponse,
    ValidateRequest,
    ValidateResponse,
    WeightPairPayload,
    WeightsComputeRequest,
    WeightsComputeResponse,
)


def create_app() -> FastAPI:
    app = FastAPI(title="seglab", version=__version__)
    manager = JobManager()
    app.state.jobs = manager

    @app.exception_handler(ConfigError)
    async def _config_error(request, exc):
        return JSONResponse(status_code=400, content={"error_kind": "config", "detail": str(exc)})

    @app.exception_handler(SegLabError)
    async def _domain_error(request, exc):
        return JSONResponse(
            status_code=422,
            content={"error_kind": type(exc).__name__, "detail": str(exc)},
        )

    @app.get("/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        return HealthResponse(status="ok", version=__version__)

    @app.post("/config/validate", response_model=ValidateResponse)
    def validate_config(req: ValidateRequest) -> ValidateResponse:
        cfg = parse_config_text(req.config_text)
        return ValidateResponse(
            valid=True,
            config_hash=config_hash(cfg),
            dataset=cfg.dataset,
            grid_cells=len(cfg.grid_cells()),
            seeds=list(cfg.seeds),
        )

    @app.post("/compute/weights", response_model=WeightsComputeResponse)
    def compute_weights_endpoint(req: WeightsComputeRequest) -> WeightsComputeResponse:
        try:
            stats = DatasetStats(
                pixels_per_class=dict(enumerate(req.stats.pixels_per_class)),
                presence_total_per_class=dict(enumerate(req.stats.presence_total_per_class)),
                total_pixels=req.stats.total_pixels,
                image_count=req.stats.image_count,
            )
        except ValueError as exc:
            raise ConfigError(f"inconsistent statistics: {exc}") from exc
        schemes = req.schemes or list(SCHEMES)
        for scheme in schemes:
            if scheme not in SCHEMES:
                raise ConfigError(
                    f"unknown scheme {scheme!r}; expected one of {{{', '.join(SCHEMES)}}}"
                )
        pairs = {s: compute_weights(stats, s, zero_floor=req.zero_floor) for s in schemes}
        return WeightsComputeResponse(
            weights={
                s: WeightPairPayload(w_background=p.w_background, w_foreground=p.w_foreground)
                for s, p in pairs.items()
            }
        )

    @app.post("/compute/iou", response_model=IoUResponse)
    def compute_iou(req: IoURequest) -> IoUResponse:
        try:
            pred = np.asarray(req.pred, dtype=np.uint8)
            gt = np.asarray(req.gt, dtype=np.uint8)
        except ValueError as exc:
            raise ConfigError(f"masks must be rectangular integer grids: {exc}") from exc
        return IoUResponse(
            iou=iou(pred, gt, empty_union=req.empty_union, iou_class=req.iou_class),
            pixel_accuracy=pixel_accuracy(pred, gt),
        )

    @app.post("/compute/mean_ci", response_model=MeanCIResponse)
    def compute_mean_ci(req: MeanCIRequest) -> MeanCIResponse:
        try:
            result = mean_ci(req.values, level=req.level)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        return MeanCIResponse(mean=result.mean, ci_half_width=result.half_width, n=result.n)

    @app.post("/compute/cosine_lr", response_model=CosineLRResponse)
    def compute_cosine_lr(req: CosineLRRequest) -> CosineLRResponse:
        try:
            value = cosine_lr(req.t, lr_max=req.lr_max, lr_min=req.lr_min, t_max=req.t_max)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        return CosineLRResponse(lr=value)

    @app.post("/jobs", response_model=JobInfo, status_code=202)
    def submit_job(req: JobSubmitRequest) -> JobInfo:
        job = manager.submit(req.kind, req.config_text, req.overrides)
        return job.info()

    @app.get("/jobs", response_model=List[JobInfo])
    def list_jobs() -> List[JobInfo]:
        return [job.info() for job in manager.list()]

    @app.get("/jobs/{job_id}", response_model=JobInfo)
    def get_job(job_id: str) -> JobInfo:
        job = manager.get(job_id)
        if job is None:
            raise HTTPException(status_code=404, detail=f"no such job: {job_id}")
        return job.info()

    @app.get("/jobs/{job_id}/files/{name}")
    def get_job_file(job_id: str, name: str):
        job = manager.get(job_id)
        if job is None:
            raise HTTPException(status_code=404, detail=f"no such job: {job_id}")
        path = workspace(job.cfg).artifact(name)
        if not path.exists():
            raise HTTPException(status_code=404, detail=f"artifact {name!r} not written yet")
        if name.endswith(".json"):
            return JSONResponse(json.loads(path.read_text()))
        return PlainTextResponse(path.read_text())

    return app
