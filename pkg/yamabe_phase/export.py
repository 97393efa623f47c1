"""Output directory service: CSV/JSON writers, SVG portraits and run manifests."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from io import BytesIO
import json
import logging
import math
from pathlib import Path
import xml.etree.ElementTree as ET
import zipfile

import numpy as np

from config.defaults import (
    BOUNDARY_FLOOR,
    CHART_SWITCH_Z,
    CURVE_SAMPLES,
    PORTRAIT_GRID,
    PORTRAIT_SPAN,
    PORTRAIT_WINDOW,
)

from . import __version__
from .core import DomainError, SolitonParams
from .dynsys import COORDINATES, CurveId, VectorFieldId, analysis_curve, curve_eval
from .integrate import Direction, IntegrationError, InvalidStart, StopSpec, Trajectory, integrate

logger = logging.getLogger(__name__)

Window = tuple[float, float, float, float]

PANEL_SIZE = 400
PANEL_MARGIN = 40
CURVE_COLORS = {
    CurveId.S1: "#d62728",
    CurveId.S2A: "#2ca02c",
    CurveId.S2B: "#9467bd",
    CurveId.S3: "#ff7f0e",
}
TRAJECTORY_COLOR = "#1f77b4"


class ExportValidationError(ValueError):
    """Raised when an output path or export input is invalid."""


def check_window(window: Window) -> Window:
    zmin, zmax, wmin, wmax = (float(v) for v in window)
    if not all(math.isfinite(v) for v in (zmin, zmax, wmin, wmax)):
        raise ExportValidationError("window bounds must be finite.")
    if not (zmin < zmax and wmin < wmax):
        raise ExportValidationError("window ranges must be ordered: zmin < zmax and wmin < wmax.")
    if zmax <= 0.0:
        raise ExportValidationError("window must include some z > 0.")
    return zmin, zmax, wmin, wmax


def _coerce_relative_path(path: str) -> str:
    value = (path or "").strip()
    if not value or value == ".":
        raise ExportValidationError("path must not be empty.")
    raw_path = Path(value)
    if raw_path.is_absolute():
        raise ExportValidationError("Absolute paths are not allowed.")
    if raw_path.drive:
        raise ExportValidationError("Drive-qualified paths are not allowed.")
    return value


def resolve_output_path(root: Path | str, path: str) -> Path:
    """Resolve a relative path inside the output root with traversal protection."""
    base = Path(root).resolve()
    resolved = (base / _coerce_relative_path(path)).resolve()
    try:
        resolved.relative_to(base)
    except ValueError as exc:
        raise ExportValidationError("Path escapes output root.") from exc
    return resolved


def write_text(root: Path | str, path: str, content: str) -> str:
    target = resolve_output_path(root, path)
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(content, encoding="utf-8")
    return target.relative_to(Path(root).resolve()).as_posix()


def dumps_json(payload: object) -> str:
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def write_json(root: Path | str, path: str, payload: object) -> str:
    return write_text(root, path, dumps_json(payload))


def _cell(value: object) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv(root: Path | str, path: str, header: tuple[str, ...], rows) -> str:
    lines = [",".join(header)]
    lines.extend(",".join(_cell(value) for value in row) for row in rows)
    return write_text(root, path, "\n".join(lines) + "\n")


PROFILE_HEADER = ("r", "phi", "phiPrime", "R")
POTENTIAL_HEADER = ("r", "f")


def trajectory_pieces(traj: Trajectory) -> list[tuple[tuple[str, str, str], list[tuple[float, float, float]]]]:
    """Header and native-chart rows of every piece; continuation pieces skip their duplicated first sample."""
    pieces = []
    piece: Trajectory | None = traj
    first = True
    while piece is not None:
        start = 0 if first else 1
        rows = [(float(s), float(a), float(b)) for s, (a, b) in zip(piece.s[start:], piece.y[start:])]
        pieces.append((COORDINATES[piece.vf], rows))
        first = False
        piece = piece.continuation
    return pieces


def write_trajectory(root: Path | str, name: str, traj: Trajectory) -> list[str]:
    """trajectories/<name>.csv for the first chart, <name>.<k>.csv per continuation, plus the events sidecar."""
    files = []
    for index, (header, rows) in enumerate(trajectory_pieces(traj)):
        suffix = "" if index == 0 else f".{index}"
        files.append(write_csv(root, f"trajectories/{name}{suffix}.csv", header, rows))
    files.append(write_json(root, f"trajectories/{name}.events.json", traj.to_dict()))
    return files


def write_profile(root: Path | str, profile, path: str = "profile.csv") -> list[str]:
    """profile.csv with r,phi,phiPrime,R and the potential f(r) next to it in potential.csv."""
    potential = Path(path).with_name("potential.csv").as_posix()
    return [
        write_csv(root, path, PROFILE_HEADER, profile.rows()),
        write_csv(root, potential, POTENTIAL_HEADER, profile.potential_rows()),
    ]


def write_certificate(root: Path | str, cert) -> list[str]:
    """certificate.json, profile and potential CSVs when a profile exists, and every certificate trajectory."""
    files = [write_json(root, "certificate.json", cert.to_dict())]
    if cert.profile is not None:
        files.extend(write_profile(root, cert.profile))
    for index, traj in enumerate(cert.trajectories):
        files.extend(write_trajectory(root, f"{cert.kind.value.lower()}-{index}", traj))
    return files


def _curve_ids(p: SolitonParams) -> list[CurveId]:
    if p.shrinking:
        return [CurveId.S1, CurveId.S2A, CurveId.S2B, CurveId.S3]
    return [CurveId.S1]


def curve_samples(p: SolitonParams, window: Window, count: int = CURVE_SAMPLES) -> dict[CurveId, np.ndarray]:
    """Points (z, w) of each analysis curve over the window's z range."""
    zmin, zmax, _, _ = check_window(window)
    out: dict[CurveId, np.ndarray] = {}
    for cid in _curve_ids(p):
        curve = analysis_curve(cid, p)
        lo = max(zmin, curve.domain_lo)
        if lo >= zmax:
            continue
        if lo <= 0.0:
            lo = zmax * 1e-3
        points = []
        for z in np.linspace(lo, zmax, count):
            try:
                points.append((float(z), curve_eval(curve, p, float(z))))
            except DomainError:
                continue
        if points:
            out[cid] = np.array(points)
    return out


def curve_rows(p: SolitonParams, window: Window, count: int = CURVE_SAMPLES) -> list[tuple[float, float, str]]:
    rows = []
    for cid, pts in curve_samples(p, window, count).items():
        rows.extend((float(z), float(w), cid.value) for z, w in pts)
    return rows


@dataclass
class PortraitPanel:
    title: str
    window: Window
    trajectories: list[np.ndarray] = field(default_factory=list)
    curves: dict[CurveId, np.ndarray] = field(default_factory=dict)
    sources: list[Trajectory] = field(default_factory=list)


def _portrait_starts(window: Window, grid: tuple[int, int]) -> list[tuple[float, float]]:
    zmin, zmax, wmin, wmax = window
    nz, nw = grid
    zmin = max(zmin, 0.0)
    zs = [zmin + (i + 0.5) * (zmax - zmin) / nz for i in range(nz)]
    ws = [wmin + (j + 0.5) * (wmax - wmin) / nw for j in range(nw)]
    return [(z, w) for z in zs for w in ws]


def portrait_panel(
    p: SolitonParams,
    window: Window = PORTRAIT_WINDOW,
    grid: tuple[int, int] = PORTRAIT_GRID,
    *,
    span: float = PORTRAIT_SPAN,
    atol: float | None = None,
    rtol: float | None = None,
) -> PortraitPanel:
    """Integrate a grid of starts both ways over a bounded span and sample the analysis curves."""
    win = check_window(window)
    if grid[0] < 0 or grid[1] < 0:
        raise ExportValidationError("portrait grid counts must be non-negative.")
    size = max(abs(v) for v in win)
    stop = StopSpec(
        max_span=span,
        boundary=BOUNDARY_FLOOR,
        escape_radius=10.0 * size,
        target=(p.xi, 0.0) if p.shrinking else None,
        chart_switch_z=CHART_SWITCH_Z if p.n < 6 else None,
    )
    if atol is not None and rtol is not None:
        stop = replace(stop, atol=atol, rtol=rtol)
    title = f"n={p.n} {p.regime.value} lambda={p.lam:.6g}"
    panel = PortraitPanel(title=title, window=win, curves=curve_samples(p, win))
    starts = _portrait_starts(win, grid) if grid[0] and grid[1] else []
    for start in starts:
        legs = []
        try:
            for way in (Direction.BACKWARD, Direction.FORWARD):
                legs.append(integrate(VectorFieldId.ZW, p, start, way, stop))
        except (IntegrationError, InvalidStart, DomainError) as exc:
            logger.debug("portrait start %s skipped: %s", start, exc)
            continue
        back_z, back_w = legs[0].zw_arrays()
        fwd_z, fwd_w = legs[1].zw_arrays()
        z = np.concatenate([back_z[::-1], fwd_z[1:]])
        w = np.concatenate([back_w[::-1], fwd_w[1:]])
        panel.trajectories.append(np.column_stack([z, w]))
        panel.sources.extend(legs)
    return panel


def _fmt(value: float) -> str:
    return f"{value:.3f}"


def _polyline(parent: ET.Element, pts: np.ndarray, window: Window, ox: float, oy: float, **attrs: str) -> None:
    zmin, zmax, wmin, wmax = window
    xs = ox + (pts[:, 0] - zmin) / (zmax - zmin) * PANEL_SIZE
    ys = oy + (wmax - pts[:, 1]) / (wmax - wmin) * PANEL_SIZE
    finite = np.isfinite(xs) & np.isfinite(ys)
    coords = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in zip(xs[finite], ys[finite]))
    ET.SubElement(parent, "polyline", {"points": coords, "fill": "none", **attrs})


def render_portrait_svg(panels: list[PortraitPanel]) -> str:
    """SVG with one panel per entry: axes, one polyline per trajectory and per curve, and a legend."""
    count = max(1, len(panels))
    width = count * (PANEL_SIZE + 2 * PANEL_MARGIN)
    height = PANEL_SIZE + 3 * PANEL_MARGIN
    svg = ET.Element(
        "svg",
        {
            "xmlns": "http://www.w3.org/2000/svg",
            "width": str(width),
            "height": str(height),
            "viewBox": f"0 0 {width} {height}",
        },
    )
    svg.append(ET.Comment(f" generator: yamabe-phase {__version__} "))
    defs = ET.SubElement(svg, "defs")

    for index, panel in enumerate(panels):
        zmin, zmax, wmin, wmax = panel.window
        ox = index * (PANEL_SIZE + 2 * PANEL_MARGIN) + PANEL_MARGIN
        oy = PANEL_MARGIN
        clip_id = f"panel-{index}"
        clip = ET.SubElement(defs, "clipPath", {"id": clip_id})
        ET.SubElement(clip, "rect", {"x": str(ox), "y": str(oy), "width": str(PANEL_SIZE), "height": str(PANEL_SIZE)})

        group = ET.SubElement(svg, "g", {"class": "panel"})
        title = ET.SubElement(group, "text", {"x": str(ox), "y": str(oy - 12), "font-size": "13"})
        title.text = panel.title
        ET.SubElement(
            group,
            "rect",
            {"x": str(ox), "y": str(oy), "width": str(PANEL_SIZE), "height": str(PANEL_SIZE), "fill": "none", "stroke": "#999"},
        )

        axes = ET.SubElement(group, "g", {"class": "axes", "stroke": "#000", "stroke-width": "1"})
        if wmin <= 0.0 <= wmax:
            y0 = oy + wmax / (wmax - wmin) * PANEL_SIZE
            ET.SubElement(axes, "line", {"x1": str(ox), "y1": _fmt(y0), "x2": str(ox + PANEL_SIZE), "y2": _fmt(y0)})
        if zmin <= 0.0 <= zmax:
            x0 = ox - zmin / (zmax - zmin) * PANEL_SIZE
            ET.SubElement(axes, "line", {"x1": _fmt(x0), "y1": str(oy), "x2": _fmt(x0), "y2": str(oy + PANEL_SIZE)})
        for label, x, y in (
            (f"z={zmin:g}", ox, oy + PANEL_SIZE + 14),
            (f"z={zmax:g}", ox + PANEL_SIZE - 40, oy + PANEL_SIZE + 14),
            (f"w={wmax:g}", ox - PANEL_MARGIN + 2, oy + 10),
            (f"w={wmin:g}", ox - PANEL_MARGIN + 2, oy + PANEL_SIZE),
        ):
            text = ET.SubElement(axes, "text", {"x": str(x), "y": str(y), "font-size": "10", "stroke": "none"})
            text.text = label

        plot = ET.SubElement(group, "g", {"clip-path": f"url(#{clip_id})"})
        for pts in panel.trajectories:
            _polyline(plot, pts, panel.window, ox, oy, stroke=TRAJECTORY_COLOR, **{"stroke-width": "0.8", "class": "trajectory"})
        for cid, pts in panel.curves.items():
            _polyline(plot, pts, panel.window, ox, oy, stroke=CURVE_COLORS[cid], **{"stroke-width": "1.6", "class": f"curve {cid.value}"})

        legend = ET.SubElement(group, "g", {"class": "legend", "font-size": "11"})
        for slot, cid in enumerate(panel.curves):
            x = ox + slot * 60
            y = oy + PANEL_SIZE + 34
            ET.SubElement(legend, "line", {"x1": str(x), "y1": str(y - 4), "x2": str(x + 16), "y2": str(y - 4), "stroke": CURVE_COLORS[cid], "stroke-width": "2"})
            text = ET.SubElement(legend, "text", {"x": str(x + 20), "y": str(y)})
            text.text = cid.value

    ET.indent(svg)
    return ET.tostring(svg, encoding="unicode") + "\n"


def list_output_files(root: Path | str) -> list[str]:
    base = Path(root).resolve()
    if not base.exists():
        return []
    return sorted(path.relative_to(base).as_posix() for path in base.rglob("*") if path.is_file())


def build_manifest(
    command: str,
    params: list[SolitonParams],
    inputs: dict[str, object],
    files: list[str],
    *,
    status: str,
) -> dict[str, object]:
    """Run manifest naming both the raw inputs and the normalized parameters."""
    return {
        "tool": "yamabe-phase",
        "version": __version__,
        "command": command,
        "inputs": inputs,
        "params": [p.to_dict() for p in params],
        "files": sorted(files),
        "status": status,
    }


def build_output_zip(root: Path | str) -> bytes:
    base = Path(root).resolve()
    buffer = BytesIO()
    with zipfile.ZipFile(buffer, mode="w", compression=zipfile.ZIP_DEFLATED) as archive:
        for path in sorted((item for item in base.rglob("*") if item.is_file()), key=lambda p: p.as_posix()):
            archive.write(path, arcname=path.relative_to(base).as_posix())
    return buffer.getvalue()
