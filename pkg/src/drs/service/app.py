"""FastAPI gateway orchestrating parsing, metrics, structuring, and scoring.

Shared state (settings, calibration, baseline model, scorer) is built once
at startup and treated as immutable afterwards; the only mutable piece is
a bounded in-memory ring of recent predictions that feeds the dashboard.
"""

from __future__ import annotations

import logging
import time
import uuid
from collections import deque
from dataclasses import dataclass, field as dataclass_field
from pathlib import Path
from typing import Any

from fastapi import Body, FastAPI, HTTPException, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, PlainTextResponse
from pydantic import ValidationError

import drs
from drs.config import Settings
from drs.diffcore import (
    Commit,
    DiffDocument,
    parse_unified_diff,
    structure_commit,
    truncate_to_budget,
)
from drs.errors import (
    BackendTimeout,
    BackendUnavailable,
    BudgetTooSmall,
    CommitNotFound,
    DiffTooLarge,
    DrsError,
    HostingServiceError,
    InvalidPayload,
    MalformedBackendResponse,
    MalformedDiff,
)
from drs.hosting import GitHubClient
from drs.metrics import (
    METRIC_FIELDS,
    METRIC_TOKEN_NAMES,
    BucketThresholds,
    bucket_metrics,
    compute_diff_metrics,
    load_calibration,
    render_metric_tokens,
)
from drs.scoring import (
    BaselineModel,
    RemoteScorerClient,
    ScoreInput,
    Scorer,
    ScorerConfig,
    load_model,
)
from drs.service.schemas import (
    BatchSlotError,
    HealthResponse,
    HistoryResponse,
    PredictRequest,
    PredictResponse,
    ShaRequest,
)

logger = logging.getLogger("drs.gateway")

_METRIC_NAME_ALIASES = {name: name for name in METRIC_FIELDS}
_METRIC_NAME_ALIASES.update(dict(zip(METRIC_TOKEN_NAMES, METRIC_FIELDS)))

# (status, error code) per domain error type; first match wins.
_ERROR_MAP: list[tuple[type[DrsError], int, str]] = [
    (InvalidPayload, 400, "InvalidPayload"),
    (MalformedDiff, 400, "InvalidPayload"),
    (DiffTooLarge, 413, "DiffTooLarge"),
    (BudgetTooSmall, 413, "DiffTooLarge"),
    (BackendTimeout, 504, "BackendTimeout"),
    (MalformedBackendResponse, 502, "BackendFailure"),
    (BackendUnavailable, 502, "BackendFailure"),
    (CommitNotFound, 404, "CommitNotFound"),
    (HostingServiceError, 502, "HostingServiceError"),
]


def _to_http(exc: DrsError) -> HTTPException:
    for kind, status, code in _ERROR_MAP:
        if isinstance(exc, kind):
            headers = None
            if isinstance(exc, HostingServiceError) and exc.retry_after:
                headers = {"Retry-After": str(exc.retry_after)}
            return HTTPException(
                status_code=status,
                detail={"error": code, "detail": str(exc)},
                headers=headers,
            )
    return HTTPException(status_code=500, detail={"error": "Internal", "detail": str(exc)})


def _slot_error(exc: Exception) -> BatchSlotError:
    for kind, _, code in _ERROR_MAP:
        if isinstance(exc, kind):
            return BatchSlotError(error=code, detail=str(exc))
    if isinstance(exc, ValidationError):
        return BatchSlotError(error="InvalidPayload", detail=str(exc.errors()[:1]))
    return BatchSlotError(error="Internal", detail=str(exc))


@dataclass
class GatewayState:
    settings: Settings
    scorer: Scorer
    thresholds: BucketThresholds | None
    hosting: GitHubClient | None
    history: deque = dataclass_field(default_factory=lambda: deque(maxlen=200))


def build_state(
    settings: Settings,
    scorer: Scorer | None = None,
    hosting: GitHubClient | None = None,
) -> GatewayState:
    thresholds = None
    if settings.calibration_path and Path(settings.calibration_path).exists():
        thresholds = load_calibration(settings.calibration_path)

    if scorer is None:
        model = BaselineModel()
        if settings.model_path and Path(settings.model_path).exists():
            model = load_model(settings.model_path)
        scorer = Scorer(
            ScorerConfig(
                backend=settings.backend_kind,
                base_url=settings.backend_url,
                timeout_ms=settings.timeout_ms,
                max_diff_bytes=settings.max_diff_bytes,
                threshold=settings.threshold,
            ),
            model=model,
        )

    if hosting is None and settings.github_token:
        hosting = GitHubClient(
            settings.github_token,
            api_url=settings.github_api_url,
            timeout_ms=settings.timeout_ms,
        )

    return GatewayState(
        settings=settings,
        scorer=scorer,
        thresholds=thresholds,
        hosting=hosting,
        history=deque(maxlen=settings.history_size),
    )


def run_prediction(
    state: GatewayState, request: PredictRequest, sha: str | None = None
) -> PredictResponse:
    """Full pipeline: parse, metrics, buckets, structure, truncate, score."""
    if not request.diff and not request.commit_message:
        raise InvalidPayload("at least one of diff/commit_message must be non-empty")
    settings = state.settings
    if len(request.diff.encode("utf-8")) > settings.max_diff_bytes:
        raise DiffTooLarge(
            f"diff exceeds the configured limit of {settings.max_diff_bytes} bytes"
        )

    doc = parse_unified_diff(request.diff) if request.diff.strip() else DiffDocument()
    metrics = compute_diff_metrics(doc)
    for key, value in (request.metrics or {}).items():
        field_name = _METRIC_NAME_ALIASES.get(key)
        if field_name is not None:
            setattr(metrics, field_name, float(value))

    buckets = bucket_metrics(metrics, state.thresholds)
    commit = Commit(repo="", sha=sha or "", author_timestamp=0.0,
                    message=request.commit_message, raw_diff=request.diff)
    structured = structure_commit(
        commit, render_metric_tokens(buckets), doc, counter=settings.unit_counter
    )
    structured = truncate_to_budget(
        structured, settings.max_seq_units, counter=settings.unit_counter
    )

    risk = state.scorer.score(
        ScoreInput(
            structured=structured,
            buckets=buckets,
            diff=request.diff,
            commit_message=request.commit_message,
            metrics=request.metrics,
        )
    )
    response = PredictResponse(
        probability=risk.probability,
        label=risk.label,
        confidence=risk.confidence,
        threshold=risk.threshold,
        scorer_id=risk.scorer_id,
        truncated=structured.truncated,
        sha=sha,
    )
    state.history.append(response)
    return response


def create_app(
    settings: Settings | None = None,
    scorer: Scorer | None = None,
    hosting: GitHubClient | None = None,
) -> FastAPI:
    """Build the gateway application around immutable startup state."""
    settings = settings if settings is not None else Settings.from_env()
    state = build_state(settings, scorer=scorer, hosting=hosting)
    app = FastAPI(title="drs-gateway", version=drs.__version__)
    app.state.gateway = state
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )

    @app.exception_handler(RequestValidationError)
    async def on_validation_error(_request: Request, exc: RequestValidationError):
        return JSONResponse(
            status_code=400,
            content={"error": "InvalidPayload", "detail": str(exc.errors()[:2])},
        )

    @app.exception_handler(DrsError)
    async def on_domain_error(_request: Request, exc: DrsError):
        http = _to_http(exc)
        return JSONResponse(
            status_code=http.status_code, content=http.detail, headers=http.headers
        )

    @app.middleware("http")
    async def access_log(request: Request, call_next):
        request_id = uuid.uuid4().hex[:12]
        started = time.perf_counter()
        response = await call_next(request)
        logger.info(
            "rid=%s %s %s -> %d in %.1fms req_bytes=%s",
            request_id,
            request.method,
            request.url.path,
            response.status_code,
            (time.perf_counter() - started) * 1e3,
            request.headers.get("content-length", "-"),
        )
        return response

    @app.get("/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        if state.scorer.cfg.backend == "remote":
            reachable = state.scorer.client is not None and state.scorer.client.healthy()
            backend = f"remote:{state.scorer.cfg.base_url}" if reachable else "unavailable"
        else:
            backend = "builtin"
        return HealthResponse(status="ok", version=drs.__version__, backend=backend)

    def predict(request: PredictRequest) -> PredictResponse:
        return run_prediction(state, request)

    app.post("/seq-cls/predict", response_model=PredictResponse)(predict)
    # optional alias kept for deployments that route the versioned path
    app.post("/api/v1/drs/predict", response_model=PredictResponse)(predict)

    @app.post("/seq-cls/predict_batch")
    def predict_batch(body: list[Any] = Body(...)):
        if not body:
            raise InvalidPayload("batch must be a non-empty array")
        if len(body) > settings.batch_cap:
            raise HTTPException(
                status_code=413,
                detail={
                    "error": "BatchTooLarge",
                    "detail": f"batch of {len(body)} exceeds cap {settings.batch_cap}",
                },
            )
        slots: list[dict] = []
        for item in body:
            try:
                request = PredictRequest.model_validate(item)
                slots.append(run_prediction(state, request).model_dump())
            except (DrsError, ValidationError) as exc:
                slots.append(_slot_error(exc).model_dump())
        return slots

    @app.post("/seq-cls/predict_by_sha", response_model=PredictResponse)
    def predict_by_sha(request: ShaRequest) -> PredictResponse:
        if state.hosting is None:
            raise HTTPException(
                status_code=401,
                detail={
                    "error": "MissingCredentials",
                    "detail": "no hosting-service token configured",
                },
            )
        hosted = state.hosting.get_commit(request.owner_repo, request.commit_sha)
        return run_prediction(
            state,
            PredictRequest(diff=hosted.diff, commit_message=hosted.message),
            sha=hosted.sha,
        )

    def _clm_client() -> RemoteScorerClient:
        if not settings.explain_enabled:
            raise HTTPException(
                status_code=403,
                detail={"error": "FeatureDisabled", "detail": "explanations are disabled"},
            )
        if isinstance(state.scorer.client, RemoteScorerClient):
            return state.scorer.client
        raise BackendUnavailable("no remote backend configured for explanations")

    @app.post("/clm/predict", response_class=PlainTextResponse)
    def clm_predict(payload: dict[str, Any] = Body(...)) -> str:
        return _clm_client().clm_predict(payload)

    @app.post("/clm/predict_by_sha", response_class=PlainTextResponse)
    def clm_predict_by_sha(payload: dict[str, Any] = Body(...)) -> str:
        return _clm_client().clm_predict(payload, by_sha=True)

    @app.get("/history", response_model=HistoryResponse)
    def history_endpoint() -> HistoryResponse:
        return HistoryResponse(items=list(state.history))

    return app
