"""Bot wiring: webhook endpoint, gateway client, comment orchestration."""

from __future__ import annotations

import json
import logging
import threading
from collections import defaultdict

import httpx
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from drs.bot.cards import CARD_MARKER, CardRow, render_card
from drs.bot.events import (
    Action,
    DeliveryLog,
    EventKind,
    Ignore,
    PostComment,
    WebhookEvent,
    is_drs_command,
    parse_webhook,
    verify_signature,
)
from drs.config import Settings
from drs.errors import BackendUnavailable, DrsError, SignatureMismatch
from drs.hosting import GitHubClient

logger = logging.getLogger("drs.bot")


class GatewayClient:
    """Thin client for the gateway's batch prediction endpoint."""

    def __init__(self, base_url: str, timeout_ms: int = 30_000, transport=None):
        self._client = httpx.Client(
            base_url=base_url.rstrip("/"),
            timeout=timeout_ms / 1000.0,
            transport=transport,
        )

    def predict_batch(self, payloads: list[dict]) -> list[dict]:
        try:
            response = self._client.post("/seq-cls/predict_batch", json=payloads)
        except httpx.HTTPError as exc:
            raise BackendUnavailable(f"gateway unreachable: {exc}") from exc
        if response.status_code != 200:
            raise BackendUnavailable(f"gateway answered {response.status_code}")
        body = response.json()
        if not isinstance(body, list) or len(body) != len(payloads):
            raise BackendUnavailable(f"gateway returned a malformed batch: {body!r}")
        return body


class BotService:
    """Scores PR commits through the gateway and maintains one card per PR."""

    def __init__(self, settings: Settings, hosting, gateway):
        self.settings = settings
        self.hosting = hosting
        self.gateway = gateway
        self.deliveries = DeliveryLog()
        self._locks: dict[tuple[str, int], threading.Lock] = defaultdict(threading.Lock)
        self._locks_guard = threading.Lock()

    def _pr_lock(self, repo: str, pr_number: int) -> threading.Lock:
        with self._locks_guard:
            return self._locks[(repo, pr_number)]

    def handle_webhook(self, event: WebhookEvent) -> Action:
        """Decide what to do with a verified event; scoring happens here."""
        if self.deliveries.seen_before(event.delivery_id):
            return Ignore(f"duplicate delivery {event.delivery_id}")
        if event.kind is EventKind.PUSH:
            return Ignore("push events are not scored; PR events carry the card")
        if event.kind is EventKind.ISSUE_COMMENT:
            return self.handle_command(event.comment_body or "", event.repo, event.pr_number)
        return self._score_pr(event.repo, event.pr_number)

    def handle_command(self, comment_body: str, repo: str, pr_number: int) -> Action:
        """``/drs`` as the leading token re-scores the PR; anything else is data."""
        if not is_drs_command(comment_body):
            return Ignore("comment does not start with /drs")
        return self._score_pr(repo, pr_number)

    def _score_pr(self, repo: str, pr_number: int) -> Action:
        try:
            commits = self.hosting.list_pr_commits(repo, pr_number)
        except DrsError as exc:
            logger.warning("commit listing failed for %s#%d: %s", repo, pr_number, exc)
            return PostComment(
                repo, pr_number, render_card([], degraded=f"could not list commits: {exc}")
            )
        if not commits:
            return PostComment(repo, pr_number, render_card([]))

        payloads = []
        shas = []
        for entry in commits:
            shas.append(entry["sha"])
            try:
                diff = self.hosting.get_commit(repo, entry["sha"]).diff
            except DrsError as exc:
                diff = ""
                logger.warning("diff fetch failed for %s: %s", entry["sha"], exc)
            payloads.append({"diff": diff, "commit_message": entry.get("message", "")})

        try:
            results = self.gateway.predict_batch(payloads)
        except DrsError as exc:
            logger.warning("gateway batch failed for %s#%d: %s", repo, pr_number, exc)
            rows = [CardRow(sha[:7], "error", note="gateway failure") for sha in shas]
            return PostComment(
                repo, pr_number, render_card(rows, degraded=str(exc))
            )

        rows = []
        scorer_id, threshold = "", None
        for sha, slot in zip(shas, results):
            if "error" in slot:
                rows.append(CardRow(sha[:7], "error", note=slot["error"]))
            else:
                rows.append(CardRow(sha[:7], slot["label"], slot["confidence"]))
                scorer_id = scorer_id or slot.get("scorer_id", "")
                threshold = threshold if threshold is not None else slot.get("threshold")
        return PostComment(
            repo, pr_number, render_card(rows, scorer_id=scorer_id, threshold=threshold)
        )

    def execute(self, action: Action) -> str:
        """Post the card, editing the bot's previous card when one exists."""
        if isinstance(action, Ignore):
            return "ignored"
        previous = None
        for comment in self.hosting.list_issue_comments(action.repo, action.pr_number):
            if CARD_MARKER in comment.get("body", ""):
                previous = comment["id"]
                break
        if previous is not None:
            self.hosting.update_comment(action.repo, previous, action.body)
            return "updated"
        self.hosting.create_comment(action.repo, action.pr_number, action.body)
        return "posted"

    def process(self, event: WebhookEvent) -> str:
        """Handle and execute under a per-PR lock to avoid comment races."""
        if event.pr_number is None:
            action = self.handle_webhook(event)
            return "ignored" if isinstance(action, Ignore) else self.execute(action)
        with self._pr_lock(event.repo, event.pr_number):
            action = self.handle_webhook(event)
            return "ignored" if isinstance(action, Ignore) else self.execute(action)


def create_bot_app(
    settings: Settings | None = None, hosting=None, gateway=None
) -> FastAPI:
    """Webhook ingress app; hosting and gateway clients are injectable."""
    settings = settings if settings is not None else Settings.from_env()
    if not settings.webhook_secret:
        raise ValueError("bot requires DRS_WEBHOOK_SECRET")
    if hosting is None:
        if not settings.github_token:
            raise ValueError("bot requires DRS_GITHUB_TOKEN")
        hosting = GitHubClient(
            settings.github_token,
            api_url=settings.github_api_url,
            timeout_ms=settings.timeout_ms,
        )
    if gateway is None:
        if not settings.gateway_url:
            raise ValueError("bot requires DRS_GATEWAY_URL")
        gateway = GatewayClient(settings.gateway_url, timeout_ms=settings.timeout_ms)

    service = BotService(settings, hosting, gateway)
    app = FastAPI(title="drs-bot")
    app.state.bot = service

    @app.post("/webhook")
    async def webhook(request: Request):
        raw = await request.body()
        try:
            verify_signature(
                settings.webhook_secret, raw, request.headers.get("X-Hub-Signature-256")
            )
        except SignatureMismatch as exc:
            return JSONResponse(
                status_code=401, content={"error": "SignatureMismatch", "detail": str(exc)}
            )
        try:
            payload = json.loads(raw)
        except ValueError:
            return JSONResponse(
                status_code=400,
                content={"error": "InvalidPayload", "detail": "body is not JSON"},
            )
        event = parse_webhook(
            request.headers.get("X-GitHub-Event", ""),
            payload,
            request.headers.get("X-GitHub-Delivery", ""),
        )
        if event is None:
            return {"action": "ignored", "reason": "event not handled"}
        return {"action": service.process(event)}

    return app
