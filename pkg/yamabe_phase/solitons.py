"""Soliton pipelines: shrinker separatrix, steady nonexistence sweep, rotational shooting."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum
import logging
import math

import numpy as np
from scipy.integrate import cumulative_trapezoid, quad

from config.defaults import (
    BOUNDARY_FLOOR,
    CHART_SWITCH_Z,
    DEFAULT_ATOL,
    DEFAULT_RTOL,
    DEFAULT_TERMS,
    ESCAPE_RADIUS,
    PHI_POSITIVE_FRACTION,
    POLE_CLOSURE_TOL,
    PROFILE_REL_CHANGE,
    REGION_REL_TOL,
    RESIDUAL_LIMIT,
    ROTATIONAL_ESCAPE_RADIUS,
    ROTATIONAL_OFFSET,
    ROTATIONAL_SWITCH_X,
    SEED_FACTOR,
    STEADY_GRID,
    STEADY_MAX_STEPS,
    STEADY_S_EXCLUSION,
    STEADY_W_RANGE,
    STEADY_Z_RANGE,
    TAIL_EXTENSION_FACTOR,
    UNIQUENESS_OFFSET,
)

from . import __version__
from .asymptotics import (
    CompletenessVerdict,
    Divergence,
    EndDirection,
    InsufficientSamples,
    completeness_integral,
    fit_tail,
    rotational_saddle_seed,
    shrink_tail_seed,
    steady_origin_seed,
    verdict_from_fit,
)
from .core import (
    DomainError,
    ParameterError,
    PhasePoint,
    SolitonParams,
    phi_fn,
    with_rbar,
    zw_from_xy,
)
from .dynsys import (
    Classification,
    CurveId,
    VectorFieldId,
    critical_points,
    curve_eval,
    trap_floor,
)
from .integrate import (
    Direction,
    Event,
    EventKind,
    IntegrationError,
    StopSpec,
    Terminal,
    Trajectory,
    arc_length,
    dr_dparam,
    integrate,
    z_axis_crossings,
)

logger = logging.getLogger(__name__)


class SeedRejected(ValueError):
    """Raised when a series seed is requested outside its validity range."""


class TrajectoryLeftRegion(RuntimeError):
    """Raised when the shrinker separatrix leaves the region bounded by S1, S2a and S3."""

    def __init__(self, message: str, point: PhasePoint) -> None:
        super().__init__(message)
        self.point = point


class ClassificationFailed(RuntimeError):
    """Raised when a shot trajectory cannot be assigned an end behavior."""


class NonPositivePhi(ValueError):
    """Raised when a warp profile would include a sample with z <= 0."""


class CertificateKind(str, Enum):
    SHRINKER_GAMMA = "ShrinkerGamma"
    STEADY_SWEEP = "SteadySweep"
    ROTATIONAL = "Rotational"


class Verdict(str, Enum):
    COMPLETE_NON_PRODUCT = "CompleteNonProduct"
    NO_COMPLETE_NON_PRODUCT = "NoCompleteNonProduct"
    INCONCLUSIVE = "Inconclusive"


def _finite(value: float | None) -> float | None:
    if value is None or not math.isfinite(value):
        return None
    return float(value)


@dataclass(frozen=True, eq=False)
class WarpProfile:
    r: np.ndarray
    phi: np.ndarray
    phi_prime: np.ndarray
    phi_second: np.ndarray
    scalar_curvature: np.ndarray
    potential: np.ndarray
    r_origin: str

    def __len__(self) -> int:
        return int(self.r.size)

    def where(self, mask: np.ndarray) -> "WarpProfile":
        return WarpProfile(
            self.r[mask],
            self.phi[mask],
            self.phi_prime[mask],
            self.phi_second[mask],
            self.scalar_curvature[mask],
            self.potential[mask],
            self.r_origin,
        )

    def rows(self) -> list[tuple[float, float, float, float]]:
        """(r, phi, phi', R) per sample."""
        return [
            (float(a), float(b), float(c), float(d))
            for a, b, c, d in zip(self.r, self.phi, self.phi_prime, self.scalar_curvature)
        ]

    def potential_rows(self) -> list[tuple[float, float]]:
        return [(float(a), float(b)) for a, b in zip(self.r, self.potential)]

    def to_dict(self) -> dict[str, object]:
        return {
            "rOrigin": self.r_origin,
            "points": len(self),
            "rRange": [float(self.r[0]), float(self.r[-1])] if len(self) else [],
            "phiMin": float(self.phi.min()) if len(self) else None,
        }


@dataclass(frozen=True, eq=False)
class SolitonCertificate:
    params: SolitonParams
    kind: CertificateKind
    verdict: Verdict
    trajectories: tuple[Trajectory, ...] = ()
    completeness: tuple[CompletenessVerdict | None, CompletenessVerdict | None] = (None, None)
    phi_positive: bool = False
    residual_max: float = math.nan
    notes: tuple[str, ...] = ()
    profile: WarpProfile | None = None
    details: dict[str, object] = field(default_factory=dict)
    atol: float = DEFAULT_ATOL
    rtol: float = DEFAULT_RTOL
    pole_closure: bool | None = None

    def __post_init__(self) -> None:
        if self.verdict is Verdict.COMPLETE_NON_PRODUCT and not self.meets_completeness():
            raise ValueError("CompleteNonProduct needs both ends complete, phi > 0 and a residual within the limit.")

    def end_complete(self, index: int) -> bool:
        """An end is complete when its integral diverges; a missing small end counts only if it closes at a pole."""
        end = self.completeness[index]
        if end is None:
            return index == 1 and self.pole_closure is True
        return end.verdict is Divergence.DIVERGES

    def meets_completeness(self) -> bool:
        return (
            self.end_complete(0)
            and self.end_complete(1)
            and self.phi_positive
            and self.residual_max <= RESIDUAL_LIMIT
        )

    def to_dict(self) -> dict[str, object]:
        return {
            "version": __version__,
            "params": self.params.to_dict(),
            "kind": self.kind.value,
            "verdict": self.verdict.value,
            "completeness": [c.to_dict() if c is not None else None for c in self.completeness],
            "poleClosure": self.pole_closure,
            "phiPositive": self.phi_positive,
            "residualMax": _finite(self.residual_max),
            "notes": list(self.notes),
            "details": self.details,
            "profile": self.profile.to_dict() if self.profile is not None else None,
            "trajectories": [traj.to_dict() for traj in self.trajectories],
            "tolerances": {"atol": self.atol, "rtol": self.rtol},
        }


def _chain(traj: Trajectory) -> list[Trajectory]:
    pieces = []
    piece: Trajectory | None = traj
    while piece is not None:
        pieces.append(piece)
        piece = piece.continuation
    return pieces


def _warp_columns(p: SolitonParams, piece: Trajectory) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """phi, phi' and phi'' at every sample; phi'' is the field derivative of phi' divided by dr/ds."""
    n = p.n
    a, b = piece.y[:, 0], piece.y[:, 1]
    da, db = piece.f[:, 0], piece.f[:, 1]
    if piece.vf is VectorFieldId.XY:
        if np.any(a <= 0.0):
            raise NonPositivePhi("profile samples need x > 0.")
        return a.copy(), b.copy(), db / dr_dparam(piece)
    if piece.vf is VectorFieldId.ZW:
        z = a
        log_rate = np.divide(da, a, out=np.zeros_like(a), where=a > 0.0)
    else:
        z = np.clip(a, 0.0, None) ** (n + 2)
        log_rate = (n + 2) * np.divide(da, a, out=np.zeros_like(a), where=a > 0.0)
    if np.any(z <= 0.0):
        raise NonPositivePhi("profile samples need z > 0.")
    damp = (p.k * z) ** (-p.beta)
    ddphi = damp * (db - p.beta * b * log_rate) / dr_dparam(piece)
    return (p.k * z) ** (2.0 / (n + 2)), b * damp, ddphi


def _param_to_r(s: np.ndarray, r: np.ndarray, at: float) -> float:
    if s[0] > s[-1]:
        s, r = s[::-1], r[::-1]
    return float(np.interp(at, s, r))


def reconstruct_warp(
    traj: Trajectory,
    p: SolitonParams,
    anchor: Event | float | None = None,
    r_at_start: float = 0.0,
) -> WarpProfile:
    """Warp function phi(r), phi'(r), phi''(r), R(r) and potential f(r) along a trajectory.

    r is arc length dr = dphi / phi' integrated by the corrected trapezoid rule.
    With an anchor (an event or a parameter value on the first piece) r = 0
    there; otherwise the first sample sits at r_at_start and phi is taken to
    vanish at r = 0.
    """
    pieces = _chain(traj)
    r_parts, phi_parts, dphi_parts, ddphi_parts = [], [], [], []
    offset = 0.0
    anchor_r = None
    for index, piece in enumerate(pieces):
        phi, dphi, ddphi = _warp_columns(p, piece)
        r = arc_length(piece) if len(piece) > 1 else np.zeros(1)
        if index == 0 and anchor is not None:
            at = anchor.param if isinstance(anchor, Event) else float(anchor)
            anchor_r = _param_to_r(piece.s, r, at)
        r = r + offset
        start = 0 if index == 0 else 1
        r_parts.append(r[start:])
        phi_parts.append(phi[start:])
        dphi_parts.append(dphi[start:])
        ddphi_parts.append(ddphi[start:])
        offset = float(r[-1])

    r = np.concatenate(r_parts)
    phi = np.concatenate(phi_parts)
    dphi = np.concatenate(dphi_parts)
    ddphi = np.concatenate(ddphi_parts)
    if anchor_r is not None:
        r = r - anchor_r
        label = "anchor event"
    else:
        r = r + r_at_start
        label = "pole" if r_at_start else "first sample"

    if r.size > 1 and r[0] > r[-1]:
        r, phi, dphi, ddphi = r[::-1], phi[::-1], dphi[::-1], ddphi[::-1]
    keep = np.concatenate([[True], np.diff(r) > 1e-12 * np.maximum(1.0, np.abs(r[1:]))])
    r, phi, dphi, ddphi = r[keep], phi[keep], dphi[keep], ddphi[keep]

    if r.size > 1:
        f = cumulative_trapezoid(phi, r, initial=0.0)
    else:
        f = np.zeros(1)
    if anchor_r is not None and r[0] <= 0.0 <= r[-1]:
        f = f - float(np.interp(0.0, r, f))
    elif anchor_r is None and r_at_start:
        f = f + 0.5 * r[0] * phi[0]
    return WarpProfile(r, phi, dphi, ddphi, dphi + p.rho, f, label)


def product_profile(p: SolitonParams, r_span: tuple[float, float] = (-10.0, 10.0), count: int = 21) -> WarpProfile:
    """Constant warp function of the product metric at the rest point (xi, 0)."""
    if not p.shrinking:
        raise ParameterError("the product rest point exists in the shrinking regime only.")
    r = np.linspace(r_span[0], r_span[1], count)
    phi0 = (p.k * p.xi) ** (2.0 / (p.n + 2))
    phi = np.full(count, phi0)
    zero = np.zeros(count)
    return WarpProfile(r, phi, zero, zero.copy(), zero + p.rho, phi0 * r, "product")


def residual_eq12(profile: WarpProfile, p: SolitonParams) -> float:
    """max |phi' + rho - (Rbar/phi^2 - (n-1)(n-2)(phi'/phi)^2 - 2(n-1) phi''/phi)| over the samples.

    phi'' is the pointwise value carried by the profile, so the result does
    not depend on how the samples are spaced in r.
    """
    if len(profile) < 5:
        raise ValueError("residual needs at least 5 profile points.")
    n = p.n
    phi, dphi, ddphi = profile.phi, profile.phi_prime, profile.phi_second
    lhs = dphi + p.rho
    rhs = p.Rbar / phi**2 - (n - 1) * (n - 2) * (dphi / phi) ** 2 - 2.0 * (n - 1) * ddphi / phi
    return float(np.max(np.abs(lhs - rhs)))


def scalar_curvature_along(traj: Trajectory, p: SolitonParams) -> np.ndarray:
    """R = phi' + rho = rho + w (K z)^(-(n-2)/(n+2)) at every sample, continuation included."""
    z, w = traj.zw_arrays()
    if np.any(z <= 0.0):
        raise NonPositivePhi("scalar curvature needs z > 0 at every sample.")
    return p.rho + w * (p.k * z) ** (-p.beta)


def _gamma_stop(p: SolitonParams, atol: float, rtol: float) -> StopSpec:
    return StopSpec(
        target=(p.xi, 0.0),
        boundary=BOUNDARY_FLOOR * max(1.0, p.xi),
        events=(EventKind.Z_AXIS, EventKind.TRAP_ENTRY),
        chart_switch_z=CHART_SWITCH_Z if p.n < 6 else None,
        max_rel_change=PROFILE_REL_CHANGE,
        atol=atol,
        rtol=rtol,
    )


def _region_violation(p: SolitonParams, z: float, w: float) -> str | None:
    tol = REGION_REL_TOL * max(1.0, abs(w))
    upper = phi_fn(p, z)
    if w > upper + tol:
        return "above S1"
    if w < -(z**p.beta) - tol:
        return "below S3"
    if z >= trap_floor(p) and w < curve_eval(CurveId.S2A, p, z) - tol:
        return "below S2a"
    return None


def _check_region(p: SolitonParams, traj: Trajectory, strict: bool, notes: list[str]) -> None:
    for z, w in traj.y:
        if w >= 0.0:
            break
        problem = _region_violation(p, float(z), float(w))
        if problem is None:
            continue
        point = PhasePoint(float(z), float(w))
        if strict:
            raise TrajectoryLeftRegion(f"separatrix left the region ({problem}) at z={z:.9g}, w={w:.9g}.", point)
        notes.append(f"region check: {problem} at z={z:.6g}, w={w:.6g}")
        return


def _large_end_verdict(p: SolitonParams, traj: Trajectory, seed_z: float, terms: int) -> CompletenessVerdict:
    seed = shrink_tail_seed(p, terms)
    grid = np.geomspace(seed_z, TAIL_EXTENSION_FACTOR * seed_z, 64)[1:]
    ext_w = np.array([seed.evaluate(float(zz))[0].w for zz in grid])
    z = np.concatenate([traj.y[:, 0], grid])
    w = np.concatenate([traj.y[:, 1], ext_w])
    end = EndDirection.TOWARD_LARGE_END
    fit = fit_tail(p, z, w, end)

    def integrand(zz: float) -> float:
        return zz ** (-2.0 / (p.n + 2)) / seed.evaluate(zz)[0].w

    tail, _ = quad(integrand, seed_z, TAIL_EXTENSION_FACTOR * seed_z, limit=200)
    model = f"integrand ~ {fit.coefficient:.6g} * z^({fit.exponent:.6g})"
    return CompletenessVerdict(end, verdict_from_fit(fit, end), float(tail), model, fit)


def find_shrinker_gamma(
    p: SolitonParams,
    *,
    terms: int = DEFAULT_TERMS,
    z_seed: float | None = None,
    atol: float = DEFAULT_ATOL,
    rtol: float = DEFAULT_RTOL,
) -> SolitonCertificate:
    """Integrate the tail separatrix gamma from a series seed to the rest point (xi, 0) and certify it."""
    if not p.shrinking:
        raise ParameterError("find_shrinker_gamma requires the shrinking regime.")
    notes: list[str] = []
    strict = p.above_threshold
    if not strict:
        logger.warning("lambda = %.6g is not above the threshold %.6g; result will not be certified.", p.lam, p.beta)
        notes.append(f"below threshold: lambda = {p.lam:.6g} <= (n-2)/(n+2) = {p.beta:.6g}")

    seed = shrink_tail_seed(p, terms)
    z_start = z_seed if z_seed is not None else SEED_FACTOR * max(1.0, p.xi)
    if z_start < seed.z_min_valid:
        raise SeedRejected(f"z_seed = {z_start:.6g} is below the series validity bound {seed.z_min_valid:.6g}.")
    start, _ = seed.evaluate(z_start)
    logger.info("shrinker gamma: n=%d lambda=%.6g seeded at z=%.6g", p.n, p.lam, z_start)

    traj = integrate(VectorFieldId.ZW, p, (start.z, start.w), Direction.FORWARD, _gamma_stop(p, atol, rtol))
    _check_region(p, traj, strict, notes)

    rising = z_axis_crossings(traj, direction=1)
    z0 = rising[0] if rising else None
    if z0 is not None and not 0.0 < z0 < p.xi:
        notes.append(f"first rising z-axis crossing z0 = {z0:.6g} lies outside (0, xi)")
    if len(rising) > 1 and any(b <= a for a, b in zip(rising, rising[1:])):
        notes.append("rising crossing abscissae are not increasing")
    elif len(rising) > 1:
        notes.append("no periodic orbit detected: rising crossing abscissae increase")

    final = _chain(traj)[-1]
    z_all, _ = traj.zw_arrays()
    phi_positive = final.terminal is not Terminal.HIT_BOUNDARY and float(z_all.min()) > PHI_POSITIVE_FRACTION * p.xi

    large = _large_end_verdict(p, traj, z_start, terms)
    small = completeness_integral(traj, p, EndDirection.TOWARD_SMALL_END)

    anchor: Event | None = None
    for event in traj.events:
        if event.kind is EventKind.Z_AXIS and event.direction == 1:
            anchor = event
            break
    if anchor is None:
        converged = [e for e in traj.all_events() if e.kind is EventKind.CONVERGENCE]
        if converged and final is traj:
            anchor = converged[0]
    if anchor is None:
        anchor = float(traj.s[-1])
        notes.append("profile anchored at the last sample")

    profile = reconstruct_warp(traj, p, anchor)
    residual = residual_eq12(profile, p) if len(profile) >= 5 else math.nan
    curvature = scalar_curvature_along(traj, p)

    both = large.verdict is Divergence.DIVERGES and small.verdict is Divergence.DIVERGES
    if both and phi_positive and residual <= RESIDUAL_LIMIT:
        verdict = Verdict.COMPLETE_NON_PRODUCT if strict else Verdict.INCONCLUSIVE
    elif not phi_positive or Divergence.CONVERGES in (large.verdict, small.verdict):
        verdict = Verdict.NO_COMPLETE_NON_PRODUCT
    else:
        verdict = Verdict.INCONCLUSIVE
    if not residual <= RESIDUAL_LIMIT:
        notes.append(f"profile residual {residual:.3e} exceeds {RESIDUAL_LIMIT:.0e}")

    approach = approach_type(p)
    details: dict[str, object] = {
        "zSeed": z_start,
        "z0": z0,
        "risingCrossings": rising,
        "crossings": len(z_axis_crossings(traj)),
        "approach": approach.value,
        "terminal": final.terminal.value,
        "minZ": float(z_all.min()),
        "scalarCurvatureMin": float(curvature.min()),
        "seed": seed.to_dict(),
    }
    logger.info("shrinker gamma verdict: %s", verdict.value)
    return SolitonCertificate(
        params=p,
        kind=CertificateKind.SHRINKER_GAMMA,
        verdict=verdict,
        trajectories=(traj,),
        completeness=(large, small),
        phi_positive=phi_positive,
        residual_max=residual,
        notes=tuple(notes),
        profile=profile,
        details=details,
        atol=atol,
        rtol=rtol,
    )


@dataclass(frozen=True)
class SeparatrixExit:
    offset: float
    event: EventKind | None
    z: float
    terminal: Terminal

    @property
    def exited(self) -> bool:
        return self.event is not None

    def to_dict(self) -> dict[str, object]:
        return {
            "offset": self.offset,
            "event": self.event.value if self.event is not None else None,
            "z": self.z,
            "terminal": self.terminal.value,
        }


def uniqueness_probe(
    p: SolitonParams,
    offset: float = UNIQUENESS_OFFSET,
    *,
    terms: int = DEFAULT_TERMS,
    z_seed: float | None = None,
) -> tuple[SeparatrixExit, SeparatrixExit]:
    """Perturb the tail seed by +/- offset in w and follow both toward larger z until they leave the S1-S2a corridor."""
    if not p.shrinking:
        raise ParameterError("uniqueness_probe requires the shrinking regime.")
    seed = shrink_tail_seed(p, terms)
    z_start = z_seed if z_seed is not None else SEED_FACTOR * max(1.0, p.xi)
    if z_start < seed.z_min_valid:
        raise SeedRejected(f"z_seed = {z_start:.6g} is below the series validity bound {seed.z_min_valid:.6g}.")
    base = seed.evaluate(z_start)[0]
    stop = StopSpec(stop_on=(EventKind.S1_CROSSING, EventKind.TRAP_ENTRY))
    exits = []
    for delta in (offset, -offset):
        traj = integrate(VectorFieldId.ZW, p, (base.z, base.w + delta), Direction.BACKWARD, stop)
        if traj.terminal is Terminal.STOP_EVENT:
            last = traj.events[-1]
            exits.append(SeparatrixExit(delta, last.kind, last.state[0], traj.terminal))
        else:
            exits.append(SeparatrixExit(delta, None, float(traj.y[-1, 0]), traj.terminal))
    return exits[0], exits[1]


def seed_consistency(
    p: SolitonParams,
    z_far: float = 4e4,
    z_near: float = 1e4,
    terms: int = DEFAULT_TERMS,
) -> float:
    """Relative mismatch in w between an integrated tail seed and the series, seeded at z_far and compared at z_near."""
    if not 0.0 < z_near < z_far:
        raise ParameterError("seed_consistency needs 0 < z_near < z_far.")
    seed = shrink_tail_seed(p, terms)
    start = seed.evaluate(z_far)[0]
    stop = StopSpec(boundary=z_near)
    traj = integrate(VectorFieldId.ZW, p, (start.z, start.w), Direction.FORWARD, stop)
    if traj.terminal is not Terminal.HIT_BOUNDARY:
        raise IntegrationError(f"tail integration ended with {traj.terminal.value} before z = {z_near!r}.")
    z_end, w_end = traj.final_state
    w_series = seed.evaluate(z_end)[0].w
    return abs(w_end - w_series) / abs(w_series)


@dataclass(frozen=True)
class SweepSpec:
    grid: tuple[int, int] = STEADY_GRID
    z_range: tuple[float, float] = STEADY_Z_RANGE
    w_range: tuple[float, float] = STEADY_W_RANGE
    exclusion: float = STEADY_S_EXCLUSION

    def __post_init__(self) -> None:
        nz, nw = self.grid
        if nz < 1 or nw < 1:
            raise ParameterError("sweep grid counts must be >= 1.")
        if not 0.0 < self.z_range[0] <= self.z_range[1]:
            raise ParameterError("sweep z range must satisfy 0 < zmin <= zmax.")
        if not self.w_range[0] <= self.w_range[1]:
            raise ParameterError("sweep w range must be ordered.")

    def to_dict(self) -> dict[str, object]:
        return {"grid": list(self.grid), "zRange": list(self.z_range), "wRange": list(self.w_range)}


def sweep_grid(p: SolitonParams, spec: SweepSpec | None = None) -> list[PhasePoint]:
    """Log-spaced z by linear w starts; for n = 6 starts on the invariant line w = Phi are skipped."""
    spec = spec or SweepSpec()
    nz, nw = spec.grid
    zs = np.geomspace(spec.z_range[0], spec.z_range[1], nz)
    ws = np.linspace(spec.w_range[0], spec.w_range[1], nw)
    starts = []
    for z in zs:
        for w in ws:
            if p.n == 6 and not p.shrinking and abs(w - phi_fn(p, float(z))) < spec.exclusion:
                continue
            starts.append(PhasePoint(float(z), float(w)))
    return starts


@dataclass(frozen=True)
class SweepCase:
    start: PhasePoint
    labels: tuple[str, str]
    terminals: tuple[str, str]
    verdicts: tuple[CompletenessVerdict | None, CompletenessVerdict | None]
    ends: tuple[tuple[float, float], tuple[float, float]] | None = None
    error: str | None = None

    @property
    def converges_somewhere(self) -> bool:
        return any(v is not None and v.verdict is Divergence.CONVERGES for v in self.verdicts)

    @property
    def case(self) -> str:
        return " / ".join(self.labels)

    def to_dict(self) -> dict[str, object]:
        return {
            "start": self.start.to_dict(),
            "case": self.case,
            "forward": {
                "terminal": self.terminals[0],
                "verdict": self.verdicts[0].to_dict() if self.verdicts[0] else None,
            },
            "backward": {
                "terminal": self.terminals[1],
                "verdict": self.verdicts[1].to_dict() if self.verdicts[1] else None,
            },
            "convergesSomewhere": self.converges_somewhere,
            "error": self.error,
        }


def _steady_stop(p: SolitonParams, atol: float, rtol: float) -> StopSpec:
    # legs creeping along w ~ Phi are stiff; their verdict comes from the tail fit within the budget
    return StopSpec(
        boundary=BOUNDARY_FLOOR,
        escape_radius=ESCAPE_RADIUS,
        max_steps=STEADY_MAX_STEPS,
        chart_switch_z=CHART_SWITCH_Z if p.n < 6 else None,
        atol=atol,
        rtol=rtol,
    )


def _end_label(p: SolitonParams, terminal: Terminal, z: float, w: float) -> str:
    if terminal is Terminal.HIT_BOUNDARY:
        a0 = steady_origin_seed(p, 1).coeffs[0]
        if abs(w) <= 10.0 * a0 * max(z, 0.0) ** p.beta:
            return "origin hit"
        return "P1 w-axis hit" if w > 0.0 else "P2 w-axis hit"
    if terminal is Terminal.ESCAPED:
        if w < 0.0:
            return "4th-quadrant decay (w < -z)" if w < -z else "4th-quadrant escape"
        return "escape with w > 0"
    return f"unresolved ({terminal.value})"


def _steady_leg(p: SolitonParams, start: PhasePoint, way: Direction, stop: StopSpec):
    traj = integrate(VectorFieldId.ZW, p, (start.z, start.w), way, stop)
    terminal = _chain(traj)[-1].terminal
    z, w = traj.zw_arrays()
    label = _end_label(p, terminal, float(z[-1]), float(w[-1]))
    end = EndDirection.TOWARD_SMALL_END if z[-1] < z[0] else EndDirection.TOWARD_LARGE_END
    try:
        verdict = completeness_integral(traj, p, end)
    except InsufficientSamples as exc:
        logger.debug("sweep start %s %s: %s", start, way.value, exc)
        verdict = None
    return label, terminal.value, verdict, (float(z[-1]), float(w[-1]))


def _steady_case(p: SolitonParams, start: PhasePoint, stop: StopSpec) -> SweepCase:
    legs = []
    try:
        for way in (Direction.FORWARD, Direction.BACKWARD):
            legs.append(_steady_leg(p, start, way, stop))
    except (IntegrationError, DomainError) as exc:
        logger.info("sweep start (%.6g, %.6g) failed: %s", start.z, start.w, exc)
        while len(legs) < 2:
            legs.append(("error", "error", None, (math.nan, math.nan)))
        return SweepCase(
            start,
            (legs[0][0], legs[1][0]),
            (legs[0][1], legs[1][1]),
            (legs[0][2], legs[1][2]),
            (legs[0][3], legs[1][3]),
            error=str(exc),
        )
    return SweepCase(
        start,
        (legs[0][0], legs[1][0]),
        (legs[0][1], legs[1][1]),
        (legs[0][2], legs[1][2]),
        (legs[0][3], legs[1][3]),
    )


def _special_trajectory(p: SolitonParams, atol: float, rtol: float) -> dict[str, object]:
    stop = replace(_steady_stop(p, atol, rtol), max_span=50.0)
    forward = integrate(VectorFieldId.ZW, p, (1.0, 1.0), Direction.FORWARD, stop)
    deviation = float(np.max(np.abs(forward.y[:, 1] - 1.0)))
    backward = integrate(VectorFieldId.ZW, p, (1.0, 1.0), Direction.BACKWARD, _steady_stop(p, atol, rtol))
    small = completeness_integral(backward, p, EndDirection.TOWARD_SMALL_END)
    return {"maxDeviation": deviation, "smallEnd": small.to_dict()}


def certify_steady_nonexistence(
    p: SolitonParams,
    sweep: SweepSpec | None = None,
    *,
    threads: int = 1,
    atol: float = DEFAULT_ATOL,
    rtol: float = DEFAULT_RTOL,
) -> SolitonCertificate:
    """Show that every sweep trajectory has an end where the completeness integral converges."""
    if p.shrinking:
        raise ParameterError("certify_steady_nonexistence requires the steady regime.")
    spec = sweep or SweepSpec()
    starts = sweep_grid(p, spec)
    stop = _steady_stop(p, atol, rtol)
    logger.info("steady sweep: n=%d, %d starts, %d threads", p.n, len(starts), threads)
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        cases = list(pool.map(lambda q: _steady_case(p, q, stop), starts))

    notes: list[str] = []
    details: dict[str, object] = {"sweep": spec.to_dict(), "cases": [case.to_dict() for case in cases]}
    unresolved = [case for case in cases if not case.converges_somewhere]
    if p.n == 6:
        special = _special_trajectory(p, atol, rtol)
        details["specialTrajectory"] = special
        notes.append("invariant line w = 1 fails completeness toward z -> 0")
    if p.n < 6:
        vertical = sum(
            1
            for case in cases
            if case.ends is not None
            and any(t == Terminal.ESCAPED.value and end[0] < 1.0 for t, end in zip(case.terminals, case.ends))
        )
        details["verticalAsymptotes"] = vertical
        if vertical:
            notes.append(f"{vertical} trajectories escape with z < 1")

    verdict = Verdict.INCONCLUSIVE if unresolved or not cases else Verdict.NO_COMPLETE_NON_PRODUCT
    if unresolved:
        notes.append(f"{len(unresolved)} starts resisted classification")
    logger.info("steady sweep verdict: %s", verdict.value)
    return SolitonCertificate(
        params=p,
        kind=CertificateKind.STEADY_SWEEP,
        verdict=verdict,
        notes=tuple(notes),
        details=details,
        atol=atol,
        rtol=rtol,
    )


def find_rotational(
    p: SolitonParams,
    *,
    offset: float = ROTATIONAL_OFFSET,
    terms: int = DEFAULT_TERMS,
    atol: float = DEFAULT_ATOL,
    rtol: float = DEFAULT_RTOL,
) -> SolitonCertificate:
    """Shoot the rotationally symmetric soliton from the XY saddle (0, 1) along its unstable manifold.

    The XY leg stops at x = ROTATIONAL_SWITCH_X and the orbit continues in
    the ZW chart, where the far end is not stiff.
    """
    q = with_rbar(p, float((p.n - 1) * (p.n - 2)))
    seed = rotational_saddle_seed(q, terms)
    if offset > seed.validity_hint:
        raise SeedRejected(f"offset {offset!r} exceeds the series validity radius {seed.validity_hint!r}.")
    start = seed.evaluate_chart(offset)

    xy_stop = StopSpec(boundary=ROTATIONAL_SWITCH_X, max_rel_change=PROFILE_REL_CHANGE, atol=atol, rtol=rtol)
    xy_leg = integrate(VectorFieldId.XY, q, (start.first, start.second), Direction.FORWARD, xy_stop)
    if len(xy_leg) < 2:
        raise ClassificationFailed("the shot starts on a rest point and never leaves it.")
    if xy_leg.terminal is not Terminal.HIT_BOUNDARY:
        raise ClassificationFailed(f"XY leg ended with {xy_leg.terminal.value} before x = {ROTATIONAL_SWITCH_X}.")

    x_end, y_end = xy_leg.final_state
    handoff = zw_from_xy(q, x_end, y_end)
    if q.shrinking:
        zw_stop = StopSpec(target=(q.xi, 0.0), max_rel_change=PROFILE_REL_CHANGE, atol=atol, rtol=rtol)
    else:
        zw_stop = StopSpec(
            escape_radius=ROTATIONAL_ESCAPE_RADIUS, max_rel_change=PROFILE_REL_CHANGE, atol=atol, rtol=rtol
        )
    zw_leg = integrate(VectorFieldId.ZW, q, (handoff.z, handoff.w), Direction.FORWARD, zw_stop)
    traj = replace(xy_leg, continuation=zw_leg)

    expected = Terminal.CONVERGED if q.shrinking else Terminal.ESCAPED
    if zw_leg.terminal is not expected:
        raise ClassificationFailed(f"rotational shot ended with {zw_leg.terminal.value}, expected {expected.value}.")

    large = completeness_integral(traj, q, EndDirection.TOWARD_LARGE_END)
    b = seed.coeffs[2] if len(seed.coeffs) > 2 else 0.0
    profile = reconstruct_warp(traj, q, r_at_start=offset - b * offset**3 / 3.0)
    phi_positive = bool(np.all(profile.phi > 0.0))
    residual = residual_eq12(profile, q) if len(profile) >= 5 else math.nan
    # the small end is the pole r = 0, where phi ~ r and phi' -> 1
    pole_closure = bool(
        abs(profile.phi[0] / profile.r[0] - 1.0) <= POLE_CLOSURE_TOL
        and abs(profile.phi_prime[0] - 1.0) <= POLE_CLOSURE_TOL
    )

    notes: list[str] = []
    if not pole_closure:
        notes.append(f"pole closure off by more than {POLE_CLOSURE_TOL:.0e} at r = {profile.r[0]:.6g}")
    if large.verdict is Divergence.DIVERGES and pole_closure and phi_positive and residual <= RESIDUAL_LIMIT:
        verdict = Verdict.COMPLETE_NON_PRODUCT
    elif large.verdict is Divergence.CONVERGES:
        verdict = Verdict.NO_COMPLETE_NON_PRODUCT
    else:
        verdict = Verdict.INCONCLUSIVE
    details: dict[str, object] = {
        "offset": offset,
        "seed": seed.to_dict(),
        "switchX": ROTATIONAL_SWITCH_X,
        "terminal": zw_leg.terminal.value,
        "poleStart": [float(profile.r[0]), float(profile.phi[0]), float(profile.phi_prime[0])],
    }
    if q.shrinking:
        details["restPoint"] = [math.sqrt(q.Rbar / q.rho), 0.0]
    logger.info("rotational soliton verdict: %s", verdict.value)
    return SolitonCertificate(
        params=q,
        kind=CertificateKind.ROTATIONAL,
        verdict=verdict,
        trajectories=(traj,),
        completeness=(large, None),
        phi_positive=phi_positive,
        residual_max=residual,
        notes=tuple(notes),
        profile=profile,
        details=details,
        atol=atol,
        rtol=rtol,
        pole_closure=pole_closure,
    )


def approach_type(p: SolitonParams) -> Classification:
    """Focus or node approach of gamma to (xi, 0)."""
    return critical_points(VectorFieldId.ZW, p)[0].classification
