"""Minimal GitHub REST client: commit lookup, PR commits, issue comments.

Only the calls the gateway and bot need.  404 maps to
:class:`CommitNotFound`; rate limits and 5xx map to
:class:`HostingServiceError` with any Retry-After value surfaced.
"""

from __future__ import annotations

from dataclasses import dataclass

import httpx

from drs.errors import CommitNotFound, HostingServiceError

DIFF_MEDIA_TYPE = "application/vnd.github.diff"
JSON_MEDIA_TYPE = "application/vnd.github+json"


@dataclass(frozen=True)
class HostedCommit:
    """Commit content as fetched from the hosting service."""

    sha: str
    message: str
    diff: str


class GitHubClient:
    """Token-authenticated client against the GitHub REST API."""

    def __init__(
        self,
        token: str,
        api_url: str = "https://api.github.com",
        timeout_ms: int = 30_000,
        transport=None,
    ):
        self._client = httpx.Client(
            base_url=api_url.rstrip("/"),
            timeout=timeout_ms / 1000.0,
            headers={
                "Authorization": f"Bearer {token}",
                "X-GitHub-Api-Version": "2022-11-28",
            },
            transport=transport,
        )

    def close(self) -> None:
        self._client.close()

    def _get(self, path: str, accept: str) -> httpx.Response:
        try:
            response = self._client.get(path, headers={"Accept": accept})
        except httpx.HTTPError as exc:
            raise HostingServiceError(f"GET {path} failed: {exc}") from exc
        if response.status_code == 404:
            raise CommitNotFound(f"not found: {path}")
        if response.status_code in (403, 429) and (
            response.headers.get("Retry-After")
            or response.headers.get("X-RateLimit-Remaining") == "0"
        ):
            raise HostingServiceError(
                f"rate limited on GET {path}",
                retry_after=response.headers.get("Retry-After")
                or response.headers.get("X-RateLimit-Reset"),
            )
        if response.status_code >= 400:
            raise HostingServiceError(f"GET {path} answered {response.status_code}")
        return response

    def _send_json(self, method: str, path: str, payload: dict) -> dict:
        try:
            response = self._client.request(method, path, json=payload)
        except httpx.HTTPError as exc:
            raise HostingServiceError(f"{method} {path} failed: {exc}") from exc
        if response.status_code >= 400:
            raise HostingServiceError(
                f"{method} {path} answered {response.status_code}"
            )
        return response.json()

    def get_commit(self, owner_repo: str, sha: str) -> HostedCommit:
        """Fetch message and unified diff for one commit."""
        meta = self._get(f"/repos/{owner_repo}/commits/{sha}", JSON_MEDIA_TYPE).json()
        diff = self._get(f"/repos/{owner_repo}/commits/{sha}", DIFF_MEDIA_TYPE).text
        return HostedCommit(
            sha=meta.get("sha", sha),
            message=meta.get("commit", {}).get("message", ""),
            diff=diff,
        )

    def list_pr_commits(self, owner_repo: str, pr_number: int) -> list[dict]:
        """Commits of a PR: list of ``{"sha": ..., "message": ...}``."""
        body = self._get(
            f"/repos/{owner_repo}/pulls/{pr_number}/commits", JSON_MEDIA_TYPE
        ).json()
        return [
            {"sha": item["sha"], "message": item.get("commit", {}).get("message", "")}
            for item in body
        ]

    def list_issue_comments(self, owner_repo: str, issue_number: int) -> list[dict]:
        body = self._get(
            f"/repos/{owner_repo}/issues/{issue_number}/comments", JSON_MEDIA_TYPE
        ).json()
        return [{"id": item["id"], "body": item.get("body", "")} for item in body]

    def create_comment(self, owner_repo: str, issue_number: int, body: str) -> int:
        created = self._send_json(
            "POST", f"/repos/{owner_repo}/issues/{issue_number}/comments", {"body": body}
        )
        return created["id"]

    def update_comment(self, owner_repo: str, comment_id: int, body: str) -> None:
        self._send_json(
            "PATCH", f"/repos/{owner_repo}/issues/comments/{comment_id}", {"body": body}
        )
