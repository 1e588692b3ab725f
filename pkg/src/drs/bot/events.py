"""Webhook event model, HMAC verification, dedup, and command parsing."""

from __future__ import annotations

import enum
import hashlib
import hmac
from collections import deque
from dataclasses import dataclass

from drs.errors import SignatureMismatch

COMMAND_TOKEN = "/drs"


class EventKind(enum.Enum):
    PULL_REQUEST_OPENED = "pull_request_opened"
    PULL_REQUEST_SYNCHRONIZE = "pull_request_synchronize"
    PUSH = "push"
    ISSUE_COMMENT = "issue_comment"


@dataclass(frozen=True)
class WebhookEvent:
    kind: EventKind
    repo: str
    delivery_id: str
    pr_number: int | None = None
    comment_body: str | None = None

    def __post_init__(self):
        if self.kind is not EventKind.PUSH and self.pr_number is None:
            raise ValueError(f"{self.kind.value} events require pr_number")


@dataclass(frozen=True)
class PostComment:
    repo: str
    pr_number: int
    body: str


@dataclass(frozen=True)
class Ignore:
    reason: str


Action = PostComment | Ignore


def verify_signature(secret: str, raw_body: bytes, signature_header: str | None) -> None:
    """Check the ``sha256=...`` HMAC header over the raw body.

    Raises :class:`SignatureMismatch` on a missing or wrong signature.
    """
    if not signature_header or not signature_header.startswith("sha256="):
        raise SignatureMismatch("missing or malformed signature header")
    expected = hmac.new(secret.encode("utf-8"), raw_body, hashlib.sha256).hexdigest()
    if not hmac.compare_digest(signature_header[len("sha256=") :], expected):
        raise SignatureMismatch("signature does not match payload")


def parse_webhook(
    event_name: str, payload: dict, delivery_id: str
) -> WebhookEvent | None:
    """Map a hosting-service webhook onto our event model.

    Returns ``None`` for deliveries the bot never acts on (unrelated
    event names, PR actions other than opened/synchronize, non-PR
    comments).
    """
    repo = payload.get("repository", {}).get("full_name", "")
    if event_name == "pull_request":
        action = payload.get("action")
        if action not in ("opened", "synchronize"):
            return None
        kind = (
            EventKind.PULL_REQUEST_OPENED
            if action == "opened"
            else EventKind.PULL_REQUEST_SYNCHRONIZE
        )
        return WebhookEvent(
            kind=kind,
            repo=repo,
            delivery_id=delivery_id,
            pr_number=payload.get("pull_request", {}).get("number"),
        )
    if event_name == "push":
        return WebhookEvent(kind=EventKind.PUSH, repo=repo, delivery_id=delivery_id)
    if event_name == "issue_comment":
        if payload.get("action") != "created":
            return None
        issue = payload.get("issue", {})
        if "pull_request" not in issue:
            return None  # plain issue comment, not a PR
        return WebhookEvent(
            kind=EventKind.ISSUE_COMMENT,
            repo=repo,
            delivery_id=delivery_id,
            pr_number=issue.get("number"),
            comment_body=payload.get("comment", {}).get("body", ""),
        )
    return None


def is_drs_command(comment_body: str) -> bool:
    """True when the first non-whitespace token is exactly the command."""
    tokens = comment_body.split()
    return bool(tokens) and tokens[0] == COMMAND_TOKEN


class DeliveryLog:
    """Bounded memory of processed delivery ids for idempotent handling."""

    def __init__(self, retention: int = 1024):
        self._order: deque[str] = deque(maxlen=retention)
        self._seen: set[str] = set()

    def seen_before(self, delivery_id: str) -> bool:
        """Record the id; True when it was already processed."""
        if delivery_id in self._seen:
            return True
        if len(self._order) == self._order.maxlen:
            self._seen.discard(self._order[0])
        self._order.append(delivery_id)
        self._seen.add(delivery_id)
        return False
