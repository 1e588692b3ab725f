"""Risk scorers: probability out of a structured commit plus bucketed metrics.

Two backends share one contract: a built-in logistic baseline over bucket
indicators (runs anywhere, no model checkpoint needed) and a remote client
speaking the model-service JSON protocol.  A CLM helper maps a generated
first token onto a binary label for backends without a classifier head.
"""

from __future__ import annotations

import enum
import json
import random
import time
from dataclasses import dataclass, field
from pathlib import Path

import httpx
import numpy as np

from drs.diffcore import StructuredText
from drs.errors import (
    BackendTimeout,
    BackendUnavailable,
    DegenerateTrainingSet,
    DiffTooLarge,
    MalformedBackendResponse,
)
from drs.metrics import METRIC_FIELDS, BucketedMetrics, BucketLevel

N_LEVELS = len(BucketLevel)
N_FEATURES = len(METRIC_FIELDS) * N_LEVELS + 1  # one-hot levels plus bias

BUILTIN_SCORER_ID = "builtin-logistic"


@dataclass(frozen=True)
class RiskScore:
    """A scored commit: probability, decision threshold, derived label."""

    probability: float
    threshold: float
    label: str  # "risky" | "safe"
    confidence: float
    scorer_id: str

    @classmethod
    def from_probability(cls, p: float, threshold: float, scorer_id: str) -> "RiskScore":
        risky = p >= threshold
        return cls(
            probability=p,
            threshold=threshold,
            label="risky" if risky else "safe",
            confidence=p if risky else 1.0 - p,
            scorer_id=scorer_id,
        )


@dataclass(frozen=True)
class ScorerConfig:
    """Scorer selection and the limits applied before dispatch."""

    backend: str = "builtin"  # "builtin" | "remote"
    base_url: str | None = None
    timeout_ms: int = 30_000
    max_diff_bytes: int = 1_000_000
    threshold: float = 0.5

    def __post_init__(self):
        if self.backend not in ("builtin", "remote"):
            raise ValueError(f"unknown backend: {self.backend!r}")
        if self.backend == "remote" and not self.base_url:
            raise ValueError("remote backend requires base_url")
        if self.timeout_ms <= 0 or self.max_diff_bytes <= 0:
            raise ValueError("timeout_ms and max_diff_bytes must be positive")
        if not 0.0 <= self.threshold <= 1.0:
            raise ValueError(f"threshold must be in [0,1]: {self.threshold}")


@dataclass
class ScoreInput:
    """Everything a scorer may need; backends pick the parts they use."""

    structured: StructuredText
    buckets: BucketedMetrics
    diff: str = ""
    commit_message: str = ""
    metrics: dict | None = None


def _sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


def _feature_vector(buckets: BucketedMetrics) -> np.ndarray:
    x = np.zeros(N_FEATURES)
    for i, name in enumerate(METRIC_FIELDS):
        x[i * N_LEVELS + int(buckets[name])] = 1.0
    x[-1] = 1.0  # bias
    return x


@dataclass
class BaselineModel:
    """Logistic regression over (metric, level) indicators plus bias."""

    weights: np.ndarray = field(default_factory=lambda: np.zeros(N_FEATURES))
    trained: bool = False

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        if self.weights.shape != (N_FEATURES,):
            raise ValueError(f"weight vector must have length {N_FEATURES}")

    def predict_proba(self, buckets: BucketedMetrics) -> float:
        return float(_sigmoid(_feature_vector(buckets) @ self.weights))


def train_baseline(
    train: list[tuple[BucketedMetrics, bool]],
    learning_rate: float = 0.5,
    iterations: int = 800,
) -> BaselineModel:
    """Fit the baseline by full-batch gradient descent from zero weights.

    Deterministic for a fixed iteration count.  Raises
    :class:`DegenerateTrainingSet` unless both classes appear at least
    twice.
    """
    labels = np.array([1.0 if buggy else 0.0 for _, buggy in train])
    if len(train) < 4 or (labels == 1.0).sum() < 2 or (labels == 0.0).sum() < 2:
        raise DegenerateTrainingSet(
            "need at least two examples of each class, got "
            f"{int((labels == 1.0).sum())} buggy / {int((labels == 0.0).sum())} clean"
        )
    x = np.stack([_feature_vector(b) for b, _ in train])
    w = np.zeros(N_FEATURES)
    for _ in range(iterations):
        gradient = x.T @ (_sigmoid(x @ w) - labels) / len(train)
        w -= learning_rate * gradient
    return BaselineModel(weights=w, trained=True)


MODEL_VERSION = "drs-baseline/1"


def save_model(model: BaselineModel, path) -> None:
    """Persist baseline weights as a small versioned JSON document."""
    Path(path).write_text(
        json.dumps(
            {
                "version": MODEL_VERSION,
                "trained": model.trained,
                "weights": model.weights.tolist(),
            }
        )
        + "\n",
        encoding="utf-8",
    )


def load_model(path) -> BaselineModel:
    """Load weights written by :func:`save_model`."""
    body = json.loads(Path(path).read_text(encoding="utf-8"))
    if body.get("version") != MODEL_VERSION:
        raise ValueError(f"unsupported model file version: {body.get('version')!r}")
    return BaselineModel(weights=np.array(body["weights"]), trained=bool(body["trained"]))


class ClmLabel(enum.Enum):
    RISKY = "risky"
    SAFE = "safe"
    UNPARSEABLE = "unparseable"


def clm_token_to_label(first_token: str) -> ClmLabel:
    """Map a causal model's first generated token onto a binary label."""
    token = first_token.strip()
    if token == "1":
        return ClmLabel.RISKY
    if token == "0":
        return ClmLabel.SAFE
    return ClmLabel.UNPARSEABLE


class RemoteScorerClient:
    """HTTP client for the model-service contract.

    Request: ``{"diff": str, "commit_message": str, "metrics": object?}``;
    response: ``{"probability": number, "label": str?}``.  One retry with
    jitter on transient transport failures, then the error surfaces.
    """

    def __init__(self, base_url: str, timeout_ms: int = 30_000, transport=None):
        self.base_url = base_url.rstrip("/")
        self._client = httpx.Client(
            base_url=self.base_url,
            timeout=timeout_ms / 1000.0,
            transport=transport,
        )

    def close(self) -> None:
        self._client.close()

    def _post(self, path: str, payload) -> httpx.Response:
        last_error: Exception | None = None
        for attempt in range(2):
            try:
                return self._client.post(path, json=payload)
            except httpx.TimeoutException as exc:
                last_error = BackendTimeout(f"POST {path} timed out: {exc}")
            except httpx.TransportError as exc:
                last_error = BackendUnavailable(f"POST {path} failed: {exc}")
            if attempt == 0:
                time.sleep(random.uniform(0.05, 0.25))
        raise last_error

    @staticmethod
    def _extract_probability(item) -> float:
        if not isinstance(item, dict) or not isinstance(
            item.get("probability"), (int, float)
        ):
            raise MalformedBackendResponse(f"no numeric probability in {item!r}")
        p = float(item["probability"])
        if not 0.0 <= p <= 1.0:
            raise MalformedBackendResponse(f"probability out of range: {p}")
        return p

    def predict(self, payload: dict) -> float:
        """Single prediction via ``/seq-cls/predict``."""
        response = self._post("/seq-cls/predict", payload)
        if response.status_code != 200:
            raise BackendUnavailable(
                f"backend answered {response.status_code} for /seq-cls/predict"
            )
        try:
            body = response.json()
        except ValueError as exc:
            raise MalformedBackendResponse(f"non-JSON backend response: {exc}") from exc
        return self._extract_probability(body)

    def predict_batch(self, payloads: list[dict]) -> list[float]:
        """Batch prediction via ``/seq-cls/predict_batch``, order preserved."""
        response = self._post("/seq-cls/predict_batch", payloads)
        if response.status_code != 200:
            raise BackendUnavailable(
                f"backend answered {response.status_code} for /seq-cls/predict_batch"
            )
        try:
            body = response.json()
        except ValueError as exc:
            raise MalformedBackendResponse(f"non-JSON backend response: {exc}") from exc
        if not isinstance(body, list) or len(body) != len(payloads):
            raise MalformedBackendResponse(
                f"expected {len(payloads)} batch results, got {body!r}"
            )
        return [self._extract_probability(item) for item in body]

    def clm_predict(self, payload: dict, by_sha: bool = False) -> str:
        """Raw-text explanation via the CLM endpoints."""
        path = "/clm/predict_by_sha" if by_sha else "/clm/predict"
        response = self._post(path, payload)
        if response.status_code != 200:
            raise BackendUnavailable(f"backend answered {response.status_code} for {path}")
        return response.text

    def healthy(self) -> bool:
        try:
            return self._client.get("/health").status_code == 200
        except httpx.HTTPError:
            return False


class Scorer:
    """Dispatches scoring to the configured backend and derives the label."""

    def __init__(
        self,
        cfg: ScorerConfig,
        model: BaselineModel | None = None,
        client: RemoteScorerClient | None = None,
    ):
        self.cfg = cfg
        self.model = model if model is not None else BaselineModel()
        if cfg.backend == "remote":
            self.client = client if client is not None else RemoteScorerClient(
                cfg.base_url, cfg.timeout_ms
            )
        else:
            self.client = client

    @property
    def scorer_id(self) -> str:
        if self.cfg.backend == "remote":
            return f"remote:{self.cfg.base_url}"
        return BUILTIN_SCORER_ID

    def score(self, inp: ScoreInput) -> RiskScore:
        if len(inp.diff.encode("utf-8")) > self.cfg.max_diff_bytes:
            raise DiffTooLarge(
                f"diff is {len(inp.diff.encode('utf-8'))} bytes, "
                f"limit {self.cfg.max_diff_bytes}"
            )
        if self.cfg.backend == "remote":
            payload = {"diff": inp.diff, "commit_message": inp.commit_message}
            if inp.metrics is not None:
                payload["metrics"] = inp.metrics
            p = self.client.predict(payload)
        else:
            p = self.model.predict_proba(inp.buckets)
        return RiskScore.from_probability(p, self.cfg.threshold, self.scorer_id)


def score(
    inp: ScoreInput,
    cfg: ScorerConfig,
    model: BaselineModel | None = None,
    client: RemoteScorerClient | None = None,
) -> RiskScore:
    """One-shot convenience around :class:`Scorer`."""
    return Scorer(cfg, model=model, client=client).score(inp)
