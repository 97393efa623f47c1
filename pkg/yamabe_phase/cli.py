"""Command-line entry point: `python -m yamabe_phase <command> ...`."""

from __future__ import annotations

import argparse
from collections import Counter
import logging
from pathlib import Path
import sys

from config.defaults import DEFAULT_TERMS, PORTRAIT_GRID, PORTRAIT_SPAN, PORTRAIT_WINDOW, ROTATIONAL_OFFSET, STEADY_GRID

from .core import Regime, SolitonParams, resolve_params
from .dynsys import VectorFieldId, critical_point_table
from .export import (
    build_manifest,
    curve_rows,
    list_output_files,
    portrait_panel,
    render_portrait_svg,
    write_certificate,
    write_csv,
    write_json,
    write_profile,
    write_text,
    write_trajectory,
)
from .integrate import Direction, StopSpec, integrate
from .settings import RuntimeSettings, load_settings
from .solitons import (
    SolitonCertificate,
    SweepSpec,
    Verdict,
    certify_steady_nonexistence,
    find_rotational,
    find_shrinker_gamma,
    product_profile,
    reconstruct_warp,
    residual_eq12,
)

logger = logging.getLogger("yamabe_phase")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_INCONCLUSIVE = 2


def parse_grid(value: str) -> tuple[int, int]:
    """'10x10' -> (10, 10)."""
    parts = value.lower().split("x")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"grid must look like 10x10, got {value!r}.")
    try:
        nz, nw = int(parts[0]), int(parts[1])
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"grid counts must be integers, got {value!r}.") from exc
    if nz < 0 or nw < 0:
        raise argparse.ArgumentTypeError("grid counts must be non-negative.")
    return nz, nw


def parse_window(value: str) -> tuple[float, float, float, float]:
    """'zmin,zmax,wmin,wmax' -> floats; ordering is checked by the exporter."""
    parts = value.split(",")
    if len(parts) != 4:
        raise argparse.ArgumentTypeError("window must be zmin,zmax,wmin,wmax.")
    try:
        zmin, zmax, wmin, wmax = (float(part) for part in parts)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"window bounds must be numbers, got {value!r}.") from exc
    return zmin, zmax, wmin, wmax


def parse_point(value: str) -> tuple[float, float]:
    parts = value.split(",")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError("start must be z,w.")
    try:
        return float(parts[0]), float(parts[1])
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"start must be two numbers, got {value!r}.") from exc


def _add_common(
    sub: argparse.ArgumentParser,
    *,
    multi: bool = False,
    regime: Regime = Regime.SHRINKING,
) -> None:
    nargs = "+" if multi else None
    sub.add_argument("--n", type=int, required=True, nargs=nargs, help="Dimension n >= 3.")
    sub.add_argument("--regime", choices=[r.value for r in Regime], default=regime.value)
    group = sub.add_mutually_exclusive_group()
    group.add_argument("--lambda", dest="lam", type=float, nargs=nargs, help="Normalized lambda.")
    group.add_argument("--Rbar", dest="rbar", type=float, help="Fiber scalar curvature (input units).")
    sub.add_argument("--rho", type=float, help="Soliton constant in input units (with --Rbar).")
    sub.add_argument("--tol-abs", type=float, help="Absolute integration tolerance.")
    sub.add_argument("--tol-rel", type=float, help="Relative integration tolerance.")
    sub.add_argument("--terms", type=int, default=DEFAULT_TERMS, help="Series truncation order.")
    sub.add_argument("--out", help="Output directory (default: YAMABE_PHASE_OUT or yamabe-out).")
    sub.add_argument("--verbose", "-v", action="store_true", help="Log at DEBUG level.")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="yamabe-phase",
        description="Phase-plane analysis of gradient Yamabe solitons on warped products.",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    classify = subparsers.add_parser("classify", help="List and classify the rest points of every chart.")
    _add_common(classify)

    portrait = subparsers.add_parser("portrait", help="Write an SVG phase portrait with analysis curves.")
    _add_common(portrait, multi=True)
    portrait.add_argument("--grid", type=parse_grid, default=PORTRAIT_GRID, help="Starts along z and w, e.g. 6x6.")
    portrait.add_argument("--window", type=parse_window, default=PORTRAIT_WINDOW, help="zmin,zmax,wmin,wmax.")
    portrait.add_argument("--span", type=float, default=PORTRAIT_SPAN, help="Parameter span per leg.")

    steady = subparsers.add_parser("steady-certify", help="Sweep steady trajectories for a convergent end.")
    _add_common(steady, regime=Regime.STEADY)
    steady.add_argument("--grid", type=parse_grid, default=STEADY_GRID, help="Sweep starts, e.g. 10x10.")

    shrinker = subparsers.add_parser("shrinker-find", help="Integrate and certify the shrinker separatrix.")
    _add_common(shrinker)
    shrinker.add_argument("--z-seed", type=float, help="Abscissa of the series seed.")

    rotational = subparsers.add_parser("rotational", help="Shoot the rotationally symmetric soliton from the pole.")
    _add_common(rotational)
    rotational.add_argument("--offset", type=float, default=ROTATIONAL_OFFSET, help="Seed distance from the pole.")

    reconstruct = subparsers.add_parser("reconstruct", help="Rebuild phi(r) along a trajectory or the product.")
    _add_common(reconstruct)
    reconstruct.add_argument("--start", type=parse_point, help="Start z,w; omit for the product profile.")
    reconstruct.add_argument("--span", type=float, default=PORTRAIT_SPAN, help="Parameter span of the leg.")
    return parser


def _configure_logging(verbose: bool) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )


def _params_for(args: argparse.Namespace, n: int, lam: float | None) -> SolitonParams:
    return resolve_params(n, args.regime, lam=lam, Rbar=args.rbar, rho=args.rho)


def _params(args: argparse.Namespace) -> SolitonParams:
    return _params_for(args, args.n, args.lam)


def _tolerances(args: argparse.Namespace, settings: RuntimeSettings) -> tuple[float, float]:
    atol = args.tol_abs if args.tol_abs is not None else settings.tol_abs
    rtol = args.tol_rel if args.tol_rel is not None else settings.tol_rel
    if atol <= 0.0 or rtol <= 0.0:
        raise ValueError("tolerances must be positive.")
    return atol, rtol


def _inputs(args: argparse.Namespace) -> dict[str, object]:
    skip = {"command", "out", "verbose"}
    inputs = {}
    for key, value in sorted(vars(args).items()):
        if key in skip or value is None:
            continue
        inputs[key] = list(value) if isinstance(value, tuple) else value
    return inputs


def _exit_code(verdict: Verdict) -> int:
    return EXIT_INCONCLUSIVE if verdict is Verdict.INCONCLUSIVE else EXIT_OK


def _certificate_lines(cert: SolitonCertificate) -> list[str]:
    p = cert.params
    lines = [
        f"{cert.kind.value}: n={p.n} regime={p.regime.value} lambda={p.lam:.6g} Rbar={p.Rbar:.6g} rho={p.rho:.6g}",
        f"verdict: {cert.verdict.value}",
    ]
    for verdict in cert.completeness:
        if verdict is not None:
            lines.append(f"{verdict.direction.value}: {verdict.verdict.value} ({verdict.rate_model})")
    if cert.pole_closure is not None:
        lines.append(f"pole closure: {cert.pole_closure}")
    if cert.profile is not None:
        lines.append(f"phi positive: {cert.phi_positive}; residual max: {cert.residual_max:.3e}")
    lines.extend(f"note: {note}" for note in cert.notes)
    return lines


def cmd_classify(args: argparse.Namespace, root: Path, settings: RuntimeSettings):
    p = _params(args)
    table = critical_point_table(p)
    write_json(root, "critical_points.json", {"params": p.to_dict(), "criticalPoints": table})
    lines = [f"n={p.n} regime={p.regime.value} lambda={p.lam:.6g}"]
    for system, points in table.items():
        for point in points:
            lines.append(f"{system}: ({point['location'][0]:.6g}, {point['location'][1]:.6g}) {point['class']}")
    return [p], lines, EXIT_OK


def cmd_portrait(args: argparse.Namespace, root: Path, settings: RuntimeSettings):
    atol, rtol = _tolerances(args, settings)
    lams = args.lam or [None]
    params = [_params_for(args, n, lam) for n in args.n for lam in lams]
    panels = []
    for index, p in enumerate(params):
        panel = portrait_panel(p, args.window, args.grid, span=args.span, atol=atol, rtol=rtol)
        panels.append(panel)
        for leg, traj in enumerate(panel.sources):
            write_trajectory(root, f"panel{index}-{leg // 2:03d}-{'back' if leg % 2 == 0 else 'fwd'}", traj)
        write_csv(root, f"curves/panel{index}.csv", ("z", "w", "curve_id"), curve_rows(p, args.window))
    write_text(root, "portrait.svg", render_portrait_svg(panels))
    lines = [f"{panel.title}: {len(panel.trajectories)} trajectories, curves {', '.join(c.value for c in panel.curves)}" for panel in panels]
    return params, lines, EXIT_OK


def _case_summary(cert: SolitonCertificate) -> list[str]:
    counts = Counter(case["case"] for case in cert.details.get("cases", []))
    return [f"case {label}: {count}" for label, count in sorted(counts.items())]


def cmd_steady_certify(args: argparse.Namespace, root: Path, settings: RuntimeSettings):
    atol, rtol = _tolerances(args, settings)
    p = _params(args)
    cert = certify_steady_nonexistence(p, SweepSpec(grid=args.grid), threads=settings.threads, atol=atol, rtol=rtol)
    write_certificate(root, cert)
    return [p], _certificate_lines(cert) + _case_summary(cert), _exit_code(cert.verdict)


def cmd_shrinker_find(args: argparse.Namespace, root: Path, settings: RuntimeSettings):
    atol, rtol = _tolerances(args, settings)
    p = _params(args)
    cert = find_shrinker_gamma(p, terms=args.terms, z_seed=args.z_seed, atol=atol, rtol=rtol)
    write_certificate(root, cert)
    lines = _certificate_lines(cert)
    z0 = cert.details.get("z0")
    lines.append(f"first rising crossing z0: {z0:.9g}" if z0 is not None else "no rising z-axis crossing")
    lines.append(f"approach to (xi, 0): {cert.details['approach']}")
    return [p], lines, _exit_code(cert.verdict)


def cmd_rotational(args: argparse.Namespace, root: Path, settings: RuntimeSettings):
    atol, rtol = _tolerances(args, settings)
    p = _params(args)
    cert = find_rotational(p, offset=args.offset, terms=args.terms, atol=atol, rtol=rtol)
    write_certificate(root, cert)
    return [cert.params], _certificate_lines(cert), _exit_code(cert.verdict)


def cmd_reconstruct(args: argparse.Namespace, root: Path, settings: RuntimeSettings):
    atol, rtol = _tolerances(args, settings)
    p = _params(args)
    if args.start is None:
        profile = product_profile(p)
        label = "product metric at (xi, 0)"
    else:
        stop = StopSpec(max_span=args.span, atol=atol, rtol=rtol)
        traj = integrate(VectorFieldId.ZW, p, args.start, Direction.FORWARD, stop)
        write_trajectory(root, "reconstruct", traj)
        profile = reconstruct_warp(traj, p, anchor=float(traj.s[0]))
        label = f"forward leg from z={args.start[0]:.6g}, w={args.start[1]:.6g} ({traj.terminal.value})"
    residual = residual_eq12(profile, p) if len(profile) >= 5 else None
    write_profile(root, profile)
    write_json(root, "reconstruction.json", {"profile": profile.to_dict(), "residualMax": residual})
    lines = [label, f"{len(profile)} samples; residual max: {residual if residual is None else f'{residual:.3e}'}"]
    return [p], lines, EXIT_OK


HANDLERS = {
    "classify": cmd_classify,
    "portrait": cmd_portrait,
    "steady-certify": cmd_steady_certify,
    "shrinker-find": cmd_shrinker_find,
    "rotational": cmd_rotational,
    "reconstruct": cmd_reconstruct,
}


def run(args: argparse.Namespace, settings: RuntimeSettings | None = None) -> int:
    settings = settings or load_settings()
    root = Path(args.out or settings.output_dir)
    root.mkdir(parents=True, exist_ok=True)
    params, lines, code = HANDLERS[args.command](args, root, settings)
    status = "inconclusive" if code == EXIT_INCONCLUSIVE else "ok"
    write_text(root, "summary.txt", "\n".join(lines) + "\n")
    files = list_output_files(root)
    files.append("manifest.json")
    write_json(root, "manifest.json", build_manifest(args.command, params, _inputs(args), sorted(set(files)), status=status))
    print("\n".join(lines))
    return code


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _configure_logging(args.verbose)
    try:
        return run(args)
    except Exception as exc:
        logger.error("%s failed: %s", args.command, exc)
        logger.debug("traceback", exc_info=True)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
