"""FastAPI application exposing classification, curves and soliton pipelines."""

from __future__ import annotations

import logging
from tempfile import TemporaryDirectory
from typing import Any

from fastapi import FastAPI
from fastapi.concurrency import run_in_threadpool
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, Response
from pydantic import BaseModel, ConfigDict, Field

try:  # pragma: no cover - supports script execution
    from . import __version__
    from .core import Regime, SolitonParams, resolve_params
    from .dynsys import critical_point_table
    from .export import (
        build_manifest,
        build_output_zip,
        curve_rows,
        portrait_panel,
        render_portrait_svg,
        write_certificate,
        write_json,
    )
    from .integrate import IntegrationError
    from .settings import RuntimeSettings, load_settings
    from .solitons import (
        SweepSpec,
        Verdict,
        certify_steady_nonexistence,
        find_rotational,
        find_shrinker_gamma,
    )
except ImportError:  # pragma: no cover
    from yamabe_phase import __version__
    from yamabe_phase.core import Regime, SolitonParams, resolve_params
    from yamabe_phase.dynsys import critical_point_table
    from yamabe_phase.export import (
        build_manifest,
        build_output_zip,
        curve_rows,
        portrait_panel,
        render_portrait_svg,
        write_certificate,
        write_json,
    )
    from yamabe_phase.integrate import IntegrationError
    from yamabe_phase.settings import RuntimeSettings, load_settings
    from yamabe_phase.solitons import (
        SweepSpec,
        Verdict,
        certify_steady_nonexistence,
        find_rotational,
        find_shrinker_gamma,
    )

from config.defaults import CURVE_SAMPLES, DEFAULT_TERMS, PORTRAIT_GRID, PORTRAIT_WINDOW, ROTATIONAL_OFFSET, STEADY_GRID

logger = logging.getLogger(__name__)
SETTINGS: RuntimeSettings = load_settings()


class ApiErrorBody(BaseModel):
    code: str
    message: str
    details: object | None = None


class ApiErrorEnvelope(BaseModel):
    error: ApiErrorBody


class ParamsRequest(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    n: int = Field(..., ge=3, description="Dimension of the warped product.")
    regime: Regime = Field(..., description="steady or shrinking.")
    lam: float | None = Field(default=None, alias="lambda", gt=0, description="Normalized lambda.")
    Rbar: float | None = Field(default=None, gt=0, description="Fiber scalar curvature (input units).")
    rho: float | None = Field(default=None, gt=0, description="Soliton constant (input units, shrinking).")

    def resolve(self) -> SolitonParams:
        return resolve_params(self.n, self.regime, lam=self.lam, Rbar=self.Rbar, rho=self.rho)


class WindowRequest(ParamsRequest):
    window: tuple[float, float, float, float] = Field(default=PORTRAIT_WINDOW, description="zmin, zmax, wmin, wmax.")


class CurvesRequest(WindowRequest):
    count: int = Field(default=CURVE_SAMPLES, ge=2, le=5000)


class PortraitRequest(WindowRequest):
    grid: tuple[int, int] = Field(default=PORTRAIT_GRID, description="Starts along z and w.")


class ShrinkerRequest(ParamsRequest):
    terms: int = Field(default=DEFAULT_TERMS, ge=1, le=64)
    z_seed: float | None = Field(default=None, alias="zSeed", gt=0)


class SteadyRequest(ParamsRequest):
    grid: tuple[int, int] = Field(default=STEADY_GRID)


class RotationalRequest(ParamsRequest):
    offset: float = Field(default=ROTATIONAL_OFFSET, ge=0)
    terms: int = Field(default=DEFAULT_TERMS, ge=1, le=64)


def _error_response(
    status_code: int,
    code: str,
    message: str,
    details: object | None = None,
) -> JSONResponse:
    payload = ApiErrorEnvelope(error=ApiErrorBody(code=code, message=message, details=details))
    return JSONResponse(status_code=status_code, content=payload.model_dump())


def _failure_response(exc: Exception) -> JSONResponse:
    if isinstance(exc, ValueError):
        return _error_response(422, "invalid_request", str(exc))
    if isinstance(exc, IntegrationError):
        details = {"terminal": exc.terminal.value} if hasattr(exc, "terminal") else None
        return _error_response(409, "integration_failed", str(exc), details)
    logger.exception("Pipeline failed: %s", exc)
    message = str(exc) if SETTINGS.expose_verbose_errors else "Computation failed. Check server logs for details."
    return _error_response(500, "internal_error", message)


async def _run(func, *args: Any, **kwargs: Any):
    return await run_in_threadpool(func, *args, **kwargs)


app = FastAPI(
    title="Yamabe Phase API",
    description="Phase-plane analysis of gradient Yamabe solitons on warped products.",
)

app.add_middleware(
    CORSMiddleware,
    allow_origins=SETTINGS.cors_allowed_origins,
    allow_credentials=False,
    allow_methods=["*"],
    allow_headers=["*"],
)


@app.exception_handler(RequestValidationError)
async def handle_validation_error(_, exc: RequestValidationError):  # pragma: no cover
    return _error_response(
        status_code=422,
        code="validation_error",
        message="Request validation failed.",
        details=exc.errors(),
    )


@app.exception_handler(Exception)
async def handle_unexpected_error(_, exc: Exception):  # pragma: no cover
    logger.exception("Unhandled API error: %s", exc)
    return _error_response(
        status_code=500,
        code="internal_error",
        message="Unexpected server error.",
    )


@app.get("/health")
def health() -> dict[str, str | int | bool]:
    return {
        "status": "ok",
        "version": __version__,
        "threads": SETTINGS.threads,
        "app_env": SETTINGS.app_env,
    }


@app.post("/v1/params")
def normalized_params(payload: ParamsRequest):
    try:
        p = payload.resolve()
    except ValueError as exc:
        return _failure_response(exc)
    return {"params": p.to_dict(), "aboveThreshold": p.above_threshold}


@app.post("/v1/classify")
def classify(payload: ParamsRequest):
    try:
        p = payload.resolve()
        table = critical_point_table(p)
    except Exception as exc:
        return _failure_response(exc)
    return {"params": p.to_dict(), "criticalPoints": table}


@app.post("/v1/curves")
def curves(payload: CurvesRequest):
    try:
        p = payload.resolve()
        rows = curve_rows(p, payload.window, payload.count)
    except Exception as exc:
        return _failure_response(exc)
    return {
        "params": p.to_dict(),
        "points": [{"z": z, "w": w, "curve": cid} for z, w, cid in rows],
    }


@app.post("/v1/shrinker")
async def shrinker(payload: ShrinkerRequest):
    try:
        p = payload.resolve()
        cert = await _run(
            find_shrinker_gamma,
            p,
            terms=payload.terms,
            z_seed=payload.z_seed,
            atol=SETTINGS.tol_abs,
            rtol=SETTINGS.tol_rel,
        )
    except Exception as exc:
        return _failure_response(exc)
    return cert.to_dict()


@app.post("/v1/steady")
async def steady(payload: SteadyRequest):
    try:
        p = payload.resolve()
        cert = await _run(
            certify_steady_nonexistence,
            p,
            SweepSpec(grid=payload.grid),
            threads=SETTINGS.threads,
            atol=SETTINGS.tol_abs,
            rtol=SETTINGS.tol_rel,
        )
    except Exception as exc:
        return _failure_response(exc)
    return cert.to_dict()


@app.post("/v1/rotational")
async def rotational(payload: RotationalRequest):
    try:
        p = payload.resolve()
        cert = await _run(
            find_rotational,
            p,
            offset=payload.offset,
            terms=payload.terms,
            atol=SETTINGS.tol_abs,
            rtol=SETTINGS.tol_rel,
        )
    except Exception as exc:
        return _failure_response(exc)
    return cert.to_dict()


@app.post("/v1/shrinker/archive")
async def shrinker_archive(payload: ShrinkerRequest):
    try:
        p = payload.resolve()
        cert = await _run(
            find_shrinker_gamma,
            p,
            terms=payload.terms,
            z_seed=payload.z_seed,
            atol=SETTINGS.tol_abs,
            rtol=SETTINGS.tol_rel,
        )
        with TemporaryDirectory(prefix="yamabe-") as root:
            files = write_certificate(root, cert)
            write_json(
                root,
                "manifest.json",
                build_manifest(
                    "shrinker-find",
                    [p],
                    payload.model_dump(mode="json", by_alias=True, exclude_none=True),
                    files + ["manifest.json"],
                    status="inconclusive" if cert.verdict is Verdict.INCONCLUSIVE else "ok",
                ),
            )
            archive = build_output_zip(root)
    except Exception as exc:
        return _failure_response(exc)
    return Response(
        content=archive,
        media_type="application/zip",
        headers={"Content-Disposition": 'attachment; filename="shrinker.zip"'},
    )


@app.post("/v1/portrait")
async def portrait(payload: PortraitRequest):
    try:
        p = payload.resolve()
        panel = await _run(portrait_panel, p, payload.window, payload.grid)
        svg = render_portrait_svg([panel])
    except Exception as exc:
        return _failure_response(exc)
    return Response(content=svg, media_type="image/svg+xml")
