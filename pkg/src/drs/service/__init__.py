"""REST gateway: request/response schemas and the FastAPI application."""

from drs.service.app import create_app

__all__ = ["create_app"]
