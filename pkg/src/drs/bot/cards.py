"""Markdown comment cards: one row per scored commit."""

from __future__ import annotations

from dataclasses import dataclass

#: Hidden marker so the bot can find and edit its own previous card.
CARD_MARKER = "<!-- drs-bot-card -->"

CARD_TITLE = "### Diff risk report"


@dataclass(frozen=True)
class CardRow:
    sha_short: str  # 7-hex abbreviation
    label: str  # "risky" | "safe" | "error"
    confidence: float | None = None
    note: str | None = None


def render_card(
    rows: list[CardRow],
    scorer_id: str = "",
    threshold: float | None = None,
    degraded: str | None = None,
) -> str:
    """Deterministic markdown card for a PR comment.

    Columns: commit, label, confidence (two decimals).  A ``degraded``
    message replaces nothing; it is appended so partial results stay
    visible.
    """
    lines = [CARD_MARKER, CARD_TITLE, ""]
    if not rows:
        lines.append("No commits to score.")
    else:
        lines.append("| commit | label | confidence |")
        lines.append("| --- | --- | --- |")
        for row in rows:
            confidence = f"{row.confidence:.2f}" if row.confidence is not None else "-"
            label = row.label if not row.note else f"{row.label} ({row.note})"
            lines.append(f"| `{row.sha_short}` | {label} | {confidence} |")
    if degraded:
        lines.append("")
        lines.append(f"> scoring degraded: {degraded}")
    footer = []
    if scorer_id:
        footer.append(f"scorer: {scorer_id}")
    if threshold is not None:
        footer.append(f"threshold: {threshold:.2f}")
    if footer:
        lines.append("")
        lines.append(f"_{' · '.join(footer)}_")
    return "\n".join(lines)
