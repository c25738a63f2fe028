"""Request/response payloads for the HTTP service."""

from typing import Dict, List, Literal, Optional

from pydantic import BaseModel, Field

JobKind = Literal["prepare", "weights", "train", "report", "all"]
JobState = Literal["queued", "running", "succeeded", "partial", "failed"]


class HealthResponse(BaseModel):
    status: str
    version: str


class Overrides(BaseModel):
    """Optional command-line-style overrides applied on top of the config text."""

    seeds: Optional[List[int]] = None
    output_dir: Optional[str] = None
    device: Optional[str] = None
    deterministic: Optional[bool] = None
    jobs: Optional[int] = Field(default=None, ge=1)


class JobSubmitRequest(BaseModel):
    kind: JobKind
    config_text: str
    overrides: Overrides = Overrides()


class JobInfo(BaseModel):
    id: str
    kind: JobKind
    state: JobState
    exit_code: Optional[int] = None
    messages: List[str] = []
    result: Optional[dict] = None
    error: Optional[str] = None


class ValidateRequest(BaseModel):
    config_text: str


class ValidateResponse(BaseModel):
    valid: bool
    config_hash: str
    dataset: str
    grid_cells: int
    seeds: List[int]


class StatsPayload(BaseModel):
    """Per-class pixel statistics, ordered (background, foreground)."""

    pixels_per_class: List[int] = Field(min_length=2, max_length=2)
    presence_total_per_class: List[int] = Field(min_length=2, max_length=2)
    total_pixels: int
    image_count: int


class WeightsComputeRequest(BaseModel):
    stats: StatsPayload
    schemes: Optional[List[str]] = None
    zero_floor: bool = False


class WeightPairPayload(BaseModel):
    w_background: float
    w_foreground: float


class WeightsComputeResponse(BaseModel):
    weights: Dict[str, WeightPairPayload]


class IoURequest(BaseModel):
    pred: List[List[int]]
    gt: List[List[int]]
    empty_union: Literal["one", "skip"] = "one"
    iou_class: Literal["foreground", "mean"] = "foreground"


class IoUResponse(BaseModel):
    iou: float
    pixel_accuracy: float


class MeanCIRequest(BaseModel):
    values: List[float]
    level: float = 0.95


class MeanCIResponse(BaseModel):
    mean: float
    ci_half_width: float
    n: int


class CosineLRRequest(BaseModel):
    t: int
    lr_max: float = 3.6e-4
    lr_min: float = 3.4e-4
    t_max: int = 50


class CosineLRResponse(BaseModel):
    lr: float
