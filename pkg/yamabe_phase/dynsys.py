"""Vector fields, rest points and the analysis curves S1, S2a, S2b, S3."""

from __future__ import annotations

from collections.abc import Callable, Sequence
import cmath
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
import math

import numpy as np
from scipy.optimize import bisect

from .core import (
    Chart,
    ChartPoint,
    DomainError,
    ParameterError,
    PhasePoint,
    SolitonParams,
    phi_fn,
    phi_prime,
)

StateLike = Sequence[float] | np.ndarray | PhasePoint | ChartPoint
Field = Callable[[np.ndarray], np.ndarray]


class CurveDomainError(DomainError):
    """Raised when a curve is evaluated outside its domain."""


class VectorFieldId(str, Enum):
    ZW = "zw"
    XY = "xy"
    UW_STEADY = "uw_steady"
    UW_SHRINK = "uw_shrink"


class Classification(str, Enum):
    SADDLE = "Saddle"
    TOPOLOGICAL_SADDLE = "TopologicalSaddle"
    STABLE_NODE = "StableNode"
    STABLE_FOCUS = "StableFocus"
    UNSTABLE_NODE = "UnstableNode"
    UNSTABLE_FOCUS = "UnstableFocus"
    DEGENERATE = "Degenerate"


class CurveId(str, Enum):
    S1 = "S1"
    S2A = "S2a"
    S2B = "S2b"
    S3 = "S3"


# first/second coordinate names per system, used by exports
COORDINATES: dict[VectorFieldId, tuple[str, str, str]] = {
    VectorFieldId.ZW: ("s", "z", "w"),
    VectorFieldId.XY: ("t", "x", "y"),
    VectorFieldId.UW_STEADY: ("t", "u", "w"),
    VectorFieldId.UW_SHRINK: ("t", "u", "w"),
}


def uw_field_for(p: SolitonParams) -> VectorFieldId:
    return VectorFieldId.UW_SHRINK if p.shrinking else VectorFieldId.UW_STEADY


def _pair(state: StateLike) -> tuple[float, float]:
    if isinstance(state, PhasePoint):
        return state.z, state.w
    if isinstance(state, ChartPoint):
        return state.first, state.second
    first, second = state
    return float(first), float(second)


def _check_regime(vf: VectorFieldId, p: SolitonParams) -> None:
    if vf is VectorFieldId.UW_STEADY and p.shrinking:
        raise ParameterError("UW_STEADY requires the steady regime.")
    if vf is VectorFieldId.UW_SHRINK and not p.shrinking:
        raise ParameterError("UW_SHRINK requires the shrinking regime.")


def make_field(vf: VectorFieldId, p: SolitonParams, *, check_domain: bool = True) -> Field:
    """Right-hand side as a closure over p, for repeated evaluation by the integrator.

    The XY and UW systems are polynomial; with check_domain=False they are
    evaluated on the whole plane so boundary events can be bracketed.
    """
    _check_regime(vf, p)
    n = p.n
    lam = p.lam

    if vf is VectorFieldId.ZW:
        def zw(y: np.ndarray) -> np.ndarray:
            z, w = y[0], y[1]
            return np.array([w, phi_fn(p, z) - w])

        return zw

    if vf is VectorFieldId.XY:
        a = 2.0 * (n - 1)
        b = float((n - 1) * (n - 2))
        rbar, rho = p.Rbar, p.rho

        def xy(y: np.ndarray) -> np.ndarray:
            x, v = y[0], y[1]
            if check_domain and x < 0.0:
                raise DomainError(f"XY chart requires x >= 0, got {x!r}.")
            return np.array([a * x * v, rbar - b * v * v - x * x * (v + rho)])

        return xy

    m = float(n + 2)
    shrink = vf is VectorFieldId.UW_SHRINK

    def uw(y: np.ndarray) -> np.ndarray:
        u, w = y[0], y[1]
        if check_domain and u < 0.0:
            raise DomainError(f"UW chart requires u >= 0, got {u!r}.")
        force = lam * u ** (2 * n - 5)
        if shrink:
            force -= u ** (2 * n - 1)
        return np.array([w, m * (force - u ** (n + 1) * w)])

    return uw


def rhs(vf: VectorFieldId, p: SolitonParams, state: StateLike, *, check_domain: bool = True) -> np.ndarray:
    return make_field(vf, p, check_domain=check_domain)(np.asarray(_pair(state), dtype=float))


def jacobian(vf: VectorFieldId, p: SolitonParams, state: StateLike) -> np.ndarray:
    _check_regime(vf, p)
    first, second = _pair(state)
    n = p.n
    if vf is VectorFieldId.ZW:
        return np.array([[0.0, 1.0], [phi_prime(p, first), -1.0]])
    if vf is VectorFieldId.XY:
        x, y = first, second
        return np.array(
            [
                [2.0 * (n - 1) * y, 2.0 * (n - 1) * x],
                [-2.0 * x * (y + p.rho), -2.0 * (n - 1) * (n - 2) * y - x * x],
            ]
        )
    u, w = first, second
    d_force = p.lam * (2 * n - 5) * u ** (2 * n - 6)
    if vf is VectorFieldId.UW_SHRINK:
        d_force -= (2 * n - 1) * u ** (2 * n - 2)
    m = float(n + 2)
    return np.array([[0.0, 1.0], [m * (d_force - (n + 1) * u**n * w), -m * u ** (n + 1)]])


def eigenpair(jac: np.ndarray) -> tuple[complex, complex]:
    tr = jac[0, 0] + jac[1, 1]
    det = jac[0, 0] * jac[1, 1] - jac[0, 1] * jac[1, 0]
    root = cmath.sqrt(tr * tr - 4.0 * det)
    return (tr + root) / 2.0, (tr - root) / 2.0


def classify_linearization(jac: np.ndarray) -> Classification:
    """Trace/determinant classification of a planar linearization."""
    tr = jac[0, 0] + jac[1, 1]
    det = jac[0, 0] * jac[1, 1] - jac[0, 1] * jac[1, 0]
    if det < 0.0:
        return Classification.SADDLE
    if det == 0.0 or tr == 0.0:
        return Classification.DEGENERATE
    focus = tr * tr - 4.0 * det < 0.0
    if tr < 0.0:
        return Classification.STABLE_FOCUS if focus else Classification.STABLE_NODE
    return Classification.UNSTABLE_FOCUS if focus else Classification.UNSTABLE_NODE


@dataclass(frozen=True)
class CriticalPoint:
    vf: VectorFieldId
    location: PhasePoint | ChartPoint
    jacobian: np.ndarray
    eigenvalues: tuple[complex, complex]
    classification: Classification

    @property
    def coords(self) -> tuple[float, float]:
        return _pair(self.location)

    def to_dict(self) -> dict[str, object]:
        return {
            "location": list(self.coords),
            "jacobian": self.jacobian.tolist(),
            "eigenvalues": [[ev.real, ev.imag] for ev in self.eigenvalues],
            "class": self.classification.value,
        }


def _critical(
    vf: VectorFieldId,
    location: PhasePoint | ChartPoint,
    jac: np.ndarray,
    classification: Classification | None = None,
) -> CriticalPoint:
    return CriticalPoint(
        vf=vf,
        location=location,
        jacobian=jac,
        eigenvalues=eigenpair(jac),
        classification=classification or classify_linearization(jac),
    )


def critical_points(vf: VectorFieldId, p: SolitonParams) -> list[CriticalPoint]:
    """Rest points of the selected system in its closed chart domain."""
    _check_regime(vf, p)
    n = p.n
    points: list[CriticalPoint] = []

    if vf is VectorFieldId.ZW:
        if p.shrinking:
            jac = np.array([[0.0, 1.0], [-4.0 / ((n + 2) * p.lam), -1.0]])
            node = (n + 2) * p.lam >= 16.0
            points.append(
                _critical(
                    vf,
                    PhasePoint(p.xi, 0.0),
                    jac,
                    Classification.STABLE_NODE if node else Classification.STABLE_FOCUS,
                )
            )
        return points

    if vf is VectorFieldId.XY:
        y0 = math.sqrt(p.Rbar / ((n - 1) * (n - 2)))
        for y in (y0, -y0):
            loc = ChartPoint(Chart.XY, 0.0, y)
            points.append(_critical(vf, loc, jacobian(vf, p, loc)))
        if p.rho > 0.0:
            loc = ChartPoint(Chart.XY, math.sqrt(p.Rbar / p.rho), 0.0)
            points.append(_critical(vf, loc, jacobian(vf, p, loc)))
        return points

    origin = ChartPoint(Chart.UW, 0.0, 0.0)
    jac = jacobian(vf, p, origin)
    points.append(_critical(vf, origin, jac, None if n == 3 else Classification.TOPOLOGICAL_SADDLE))
    if vf is VectorFieldId.UW_SHRINK:
        loc = ChartPoint(Chart.UW, p.lam**0.25, 0.0)
        points.append(_critical(vf, loc, jacobian(vf, p, loc)))
    return points


def critical_point_table(p: SolitonParams) -> dict[str, list[dict[str, object]]]:
    """Rest points of the ZW, XY and matching UW systems, keyed by system id."""
    systems = (VectorFieldId.ZW, VectorFieldId.XY, uw_field_for(p))
    return {vf.value: [cp.to_dict() for cp in critical_points(vf, p)] for vf in systems}


def z_alpha(p: SolitonParams) -> float:
    """Largest positive root of 4 Phi'(z) + 1 = 0 (0 when none exists for n > 6)."""
    if not p.shrinking:
        raise ParameterError("z_alpha is defined for the shrinking regime only.")
    n = p.n
    if n == 6:
        raise ParameterError("z_alpha is not used when n = 6; the curve domain starts at 4.")

    def g(z: float) -> float:
        return 4.0 * phi_prime(p, z) + 1.0

    if n > 6:
        if (n + 2) * (n - 6) * p.lam >= (n - 2) ** 2:
            return 0.0
        # vertex of the quadratic in t = z^(4/(n+2)) sits between the two roots
        lo = (2.0 * p.beta) ** ((n + 2) / 4.0)
    else:
        lo = 1e-12
    hi = max(1.0, 2.0 * lo)
    while g(hi) <= 0.0:
        hi *= 2.0
    return bisect(g, lo, hi, xtol=1e-15, rtol=1e-15, maxiter=400)


@lru_cache(maxsize=256)
def trap_floor(p: SolitonParams) -> float:
    """Left end of the S2a/S2b domain and of the trapping region."""
    if not p.shrinking:
        raise ParameterError("the trapping region exists for the shrinking regime only.")
    if p.n == 6:
        return max(4.0, p.lam**2)
    return max(z_alpha(p), p.xi)


@dataclass(frozen=True)
class AnalysisCurve:
    id: CurveId
    domain_lo: float
    domain_hi: float = math.inf

    def contains(self, z: float) -> bool:
        return self.domain_lo <= z <= self.domain_hi

    def to_dict(self) -> dict[str, object]:
        return {"id": self.id.value, "domainLo": self.domain_lo, "domainHi": self.domain_hi}


def analysis_curve(curve_id: CurveId | str, p: SolitonParams) -> AnalysisCurve:
    cid = CurveId(curve_id)
    if cid in (CurveId.S2A, CurveId.S2B):
        return AnalysisCurve(cid, trap_floor(p))
    return AnalysisCurve(cid, 0.0)


def curve_eval(curve: AnalysisCurve | CurveId | str, p: SolitonParams, z: float) -> float:
    c = curve if isinstance(curve, AnalysisCurve) else analysis_curve(curve, p)
    if not c.contains(z):
        raise CurveDomainError(f"{c.id.value} is defined on [{c.domain_lo}, {c.domain_hi}], got z = {z!r}.")
    if c.id is CurveId.S1:
        return phi_fn(p, z)
    if c.id is CurveId.S3:
        return -(z ** p.beta)

    phi = phi_fn(p, z)
    slope = phi_prime(p, z)
    arg = 1.0 + 4.0 * slope
    if arg < 0.0:
        if arg < -1e-12:
            raise CurveDomainError(f"1 + 4 Phi'(z) < 0 at z = {z!r}.")
        arg = 0.0
    root = math.sqrt(arg)
    if c.id is CurveId.S2A:
        return 2.0 * phi / (1.0 + root)
    return -phi * (1.0 + root) / (2.0 * slope)


def trap_distance(p: SolitonParams, q: PhasePoint) -> float:
    """Signed distance-like gauge for the trapping region; non-negative inside."""
    floor = trap_floor(p)
    gap = q.z - floor
    if gap < 0.0:
        return gap
    upper = curve_eval(CurveId.S2A, p, q.z) - q.w
    lower = q.w - curve_eval(CurveId.S2B, p, q.z)
    return min(upper, lower, gap)


def in_trap(p: SolitonParams, q: PhasePoint) -> bool:
    return trap_distance(p, q) >= 0.0
