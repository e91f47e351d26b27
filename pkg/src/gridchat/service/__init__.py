"""HTTP service, persistence and configuration."""

from .app import create_app
from .config import ServiceConfig, load_config
from .stores import JsonlStore

__all__ = ["create_app", "ServiceConfig", "load_config", "JsonlStore"]
