"""Webhook bot: scores PR commits and posts per-commit label cards."""

from drs.bot.app import BotService, create_bot_app
from drs.bot.cards import CardRow, render_card
from drs.bot.events import (
    Action,
    EventKind,
    Ignore,
    PostComment,
    WebhookEvent,
    is_drs_command,
    parse_webhook,
    verify_signature,
)

__all__ = [
    "Action",
    "BotService",
    "CardRow",
    "EventKind",
    "Ignore",
    "PostComment",
    "WebhookEvent",
    "create_bot_app",
    "is_drs_command",
    "parse_webhook",
    "render_card",
    "verify_signature",
]
