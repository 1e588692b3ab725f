"""Pydantic models for the gateway's JSON wire format."""

from __future__ import annotations

from pydantic import BaseModel, field_validator


class PredictRequest(BaseModel):
    """Single prediction input; at least one of diff/commit_message must be
    non-empty (enforced by the endpoint so the error maps to 400)."""

    diff: str = ""
    commit_message: str = ""
    metrics: dict[str, float] | None = None


class PredictResponse(BaseModel):
    probability: float
    label: str  # "risky" | "safe"
    confidence: float
    threshold: float
    scorer_id: str
    truncated: bool
    sha: str | None = None


class BatchSlotError(BaseModel):
    """Per-slot failure inside a batch response; keeps the slot index-aligned."""

    error: str
    detail: str


class ShaRequest(BaseModel):
    owner_repo: str
    commit_sha: str

    @field_validator("owner_repo")
    @classmethod
    def _one_slash(cls, value: str) -> str:
        if value.count("/") != 1 or value.startswith("/") or value.endswith("/"):
            raise ValueError("owner_repo must look like 'owner/name'")
        return value


class HealthResponse(BaseModel):
    status: str
    version: str
    backend: str


class HistoryResponse(BaseModel):
    items: list[PredictResponse]
