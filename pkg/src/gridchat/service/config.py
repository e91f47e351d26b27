"""Service configuration: one TOML file plus environment overrides for
secrets (credentials never live in config files, stores or traces)."""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

__all__ = ["ServiceConfig", "load_config"]

ENV_API_KEY = "GRIDCHAT_BACKEND_API_KEY"


@dataclass(frozen=True)
class ServiceConfig:
    data_dir: Path = Path("data")
    host: str = "127.0.0.1"
    port: int = 8000
    max_sessions: int = 64
    backend_kind: str = "command"          # command | live
    backend_endpoint: str = ""
    backend_model: str = ""
    backend_temperature: float = 0.0

    def __post_init__(self):
        if self.backend_kind not in ("command", "live"):
            raise ValueError(f"unknown backend kind {self.backend_kind!r}")
        if not (0 < self.port < 65536):
            raise ValueError("port out of range")

    @property
    def backend_api_key(self) -> str:
        return os.environ.get(ENV_API_KEY, "")


def load_config(path: str | Path | None = None) -> ServiceConfig:
    """Parse the TOML config; missing keys fall back to defaults."""
    if path is None:
        return ServiceConfig()
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"config file not found: {p}")
    doc = tomllib.loads(p.read_text())
    svc = doc.get("service", {})
    be = doc.get("backend", {})
    return ServiceConfig(
        data_dir=Path(svc.get("data_dir", "data")),
        host=svc.get("host", "127.0.0.1"),
        port=int(svc.get("port", 8000)),
        max_sessions=int(svc.get("max_sessions", 64)),
        backend_kind=be.get("kind", "command"),
        backend_endpoint=be.get("endpoint", ""),
        backend_model=be.get("model", ""),
        backend_temperature=float(be.get("temperature", 0.0)),
    )
