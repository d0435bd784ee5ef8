"""Request and response models for the HTTP service.

File paths in requests are resolved on the machine the service runs on; the
bundled CLI runs the service in-process by default, so paths behave like
local paths there.
"""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field


class ServiceModel(BaseModel):
    # allow field names like model_path without tripping pydantic's namespace
    model_config = ConfigDict(protected_namespaces=())


class HealthResponse(ServiceModel):
    status: str
    version: str
    model_loaded: bool


class TrainRequest(ServiceModel):
    baskets_path: str
    basket_format: Literal["lines", "csv"] = "lines"
    features_path: Optional[str] = None
    embedding_dim: int = Field(default=10, ge=1)
    hidden_widths: list[int] = Field(default_factory=list)
    alpha: Optional[float] = Field(default=None, ge=0)
    batch_size: int = Field(default=200, ge=1)
    max_iterations: int = Field(default=1000, ge=0)
    learning_rate: float = Field(default=1e-3, gt=0)
    convergence_rel_tol: float = Field(default=1e-4, gt=0)
    validation_check_period: int = Field(default=10, ge=1)
    seed: int = 0
    workers: int = Field(default=1, ge=1)
    test_count: int = Field(default=2000, ge=1)
    val_count: int = Field(default=300, ge=1)
    max_basket_size: int = Field(default=100, ge=1)
    hash_width: int = Field(default=64, ge=1)
    output_path: str = "model.json"
    log_path: Optional[str] = None


class TrainResponse(ServiceModel):
    model_path: str
    log_path: str
    iterations: int
    final_train_loss: Optional[float]
    final_val_loglik: Optional[float]
    catalog_size: int
    train_baskets: int
    validation_baskets: int
    test_baskets: int
    dropped_oversized: int


class SegmentRow(ServiceModel):
    segment: str
    estimate: float
    ci_low: float
    ci_high: float
    count: int


class MetricReport(ServiceModel):
    metric: str
    segments: list[SegmentRow]


class EvalRequest(ServiceModel):
    model_path: str
    baskets_path: str
    basket_format: Literal["lines", "csv"] = "lines"
    metric: Literal["mpr", "auc", "both"] = "both"
    seed: int = 0
    use_split: bool = False  # evaluate on the file's test split instead of the whole file
    test_count: int = Field(default=2000, ge=1)
    val_count: int = Field(default=300, ge=1)
    output_prefix: Optional[str] = None


class EvalResponse(ServiceModel):
    reports: list[MetricReport]
    report_files: list[str]
    evaluated_baskets: int
    skipped_baskets: int


class LoadModelRequest(ServiceModel):
    model_path: str


class ModelInfo(ServiceModel):
    model_path: str
    catalog_size: int
    embedding_dim: int
    hidden_widths: list[int]
    meta_width: int


class Prediction(ServiceModel):
    item_id: str
    probability: float


class PredictRequest(ServiceModel):
    basket: list[str]
    top_k: int = Field(default=10, ge=1)
    model_path: Optional[str] = None


class PredictResponse(ServiceModel):
    basket: list[str]
    predictions: list[Prediction]


class SynthRequest(ServiceModel):
    kind: Literal["planted", "xor"]
    catalog_size: int = Field(default=12, ge=1)
    embedding_dim: int = Field(default=3, ge=1)
    basket_count: int = Field(default=1000, ge=1)
    seed: int = 0
    basket_format: Literal["lines", "csv"] = "lines"
    output_path: str = "baskets.txt"
    truth_path: Optional[str] = None


class SynthResponse(ServiceModel):
    output_path: str
    truth_path: str
    catalog_size: int
    basket_count: int


class ExportRequest(ServiceModel):
    model_path: str
    output_path: str


class ExportResponse(ServiceModel):
    output_path: str
    rows: int
    columns: int
