"""Environment-driven runtime settings for the CLI and HTTP surfaces."""

from __future__ import annotations

from dataclasses import dataclass
import os

from dotenv import load_dotenv

from config.defaults import DEFAULT_ATOL, DEFAULT_RTOL

DEFAULT_OUTPUT_DIR = "yamabe-out"


def _parse_bool(value: str | None, default: bool) -> bool:
    if value is None:
        return default
    normalized = value.strip().lower()
    if normalized in {"1", "true", "yes", "on"}:
        return True
    if normalized in {"0", "false", "no", "off"}:
        return False
    return default


def _parse_csv(value: str | None) -> list[str]:
    if value is None:
        return []
    return [item.strip() for item in value.split(",") if item.strip()]


def _parse_int(value: str | None, default: int, *, minimum: int = 1) -> int:
    if value is None:
        return default
    try:
        parsed = int(value.strip())
    except ValueError:
        return default
    return parsed if parsed >= minimum else default


def _parse_float(value: str | None, default: float) -> float:
    if value is None:
        return default
    try:
        parsed = float(value.strip())
    except ValueError:
        return default
    return parsed if parsed > 0.0 else default


@dataclass
class RuntimeSettings:
    app_env: str
    threads: int
    tol_abs: float
    tol_rel: float
    output_dir: str
    cors_allowed_origins: list[str]
    expose_verbose_errors: bool

    @property
    def is_production(self) -> bool:
        return self.app_env == "production"


def load_settings() -> RuntimeSettings:
    load_dotenv()
    app_env = os.getenv("APP_ENV", "development").strip().lower() or "development"
    is_production = app_env == "production"

    configured_origins = _parse_csv(os.getenv("CORS_ALLOWED_ORIGINS"))
    if configured_origins:
        cors_allowed_origins = configured_origins
    elif is_production:
        cors_allowed_origins = []
    else:
        cors_allowed_origins = [
            "http://localhost:5173",
            "http://127.0.0.1:5173",
        ]

    return RuntimeSettings(
        app_env=app_env,
        threads=_parse_int(os.getenv("YAMABE_PHASE_THREADS"), min(4, os.cpu_count() or 1)),
        tol_abs=_parse_float(os.getenv("YAMABE_PHASE_TOL_ABS"), DEFAULT_ATOL),
        tol_rel=_parse_float(os.getenv("YAMABE_PHASE_TOL_REL"), DEFAULT_RTOL),
        output_dir=(os.getenv("YAMABE_PHASE_OUT") or "").strip() or DEFAULT_OUTPUT_DIR,
        cors_allowed_origins=cors_allowed_origins,
        expose_verbose_errors=_parse_bool(os.getenv("EXPOSE_VERBOSE_ERRORS"), not is_production),
    )
