"""Series seeds at the singular ends and the completeness integral classifier."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
import logging
import math

import numpy as np
from numpy.polynomial import polynomial as poly
from scipy.integrate import quad

from config.defaults import DEFAULT_TERMS, FIT_MARGIN, MIN_TAIL_SAMPLES, SEED_VALIDITY_FRACTION

from .core import (
    Chart,
    ChartPoint,
    DomainError,
    ParameterError,
    PhasePoint,
    SolitonParams,
    dr_ds_factor,
    phi_fn,
)
from .integrate import Terminal, Trajectory, arc_length

logger = logging.getLogger(__name__)


class SeriesError(ValueError):
    """Raised when a series seed is requested with invalid options or outside its validity radius."""


class InsufficientSamples(RuntimeError):
    """Raised when too few samples lie near the end being classified."""


class SeedKind(str, Enum):
    STEADY_ORIGIN = "SteadyOrigin"
    SHRINK_ORIGIN = "ShrinkOrigin"
    SHRINK_TAIL = "ShrinkTail"
    ROTATIONAL_SADDLE = "RotationalSaddle"


class EndDirection(str, Enum):
    TOWARD_SMALL_END = "TowardSmallEnd"
    TOWARD_LARGE_END = "TowardLargeEnd"


class Divergence(str, Enum):
    DIVERGES = "Diverges"
    CONVERGES = "Converges"
    INCONCLUSIVE = "Inconclusive"


_VARIABLES = {
    SeedKind.STEADY_ORIGIN: "u = z^(1/(n+2)), w = u^(n-2) * sum a_i u^i",
    SeedKind.SHRINK_ORIGIN: "u = z^(1/(n+2)), w = u^(n-2) * sum a_i u^i",
    SeedKind.SHRINK_TAIL: "X = z^(-4/(n+2)), w = z^((n-2)/(n+2)) / sum a_i X^i",
    SeedKind.ROTATIONAL_SADDLE: "x near 0, y = sum a_i x^i",
}


@dataclass(frozen=True)
class SeriesSeed:
    kind: SeedKind
    params: SolitonParams
    coeffs: tuple[float, ...]
    truncation: int
    validity_hint: float
    eigenvalues: tuple[float, float] | None = None

    @property
    def variable(self) -> str:
        return _VARIABLES[self.kind]

    @property
    def z_min_valid(self) -> float:
        """Smallest z at which the tail series may seed an integration."""
        if self.kind is not SeedKind.SHRINK_TAIL:
            raise SeriesError("z_min_valid applies to the tail series only.")
        if math.isinf(self.validity_hint):
            return 0.0
        return self.validity_hint ** (-(self.params.n + 2) / 4.0)

    def _sum(self, v: float) -> tuple[float, float]:
        c = np.asarray(self.coeffs)
        return float(poly.polyval(v, c)), float(poly.polyval(v, poly.polyder(c)))

    def evaluate(self, z: float) -> tuple[PhasePoint, float]:
        """Seeded (z, w) and the slope dw/dz there."""
        p = self.params
        n = p.n
        if z <= 0.0:
            raise DomainError(f"series seeds need z > 0, got {z!r}.")
        if self.kind is SeedKind.SHRINK_TAIL:
            e = 4.0 / (n + 2)
            x = z ** (-e)
            total, slope = self._sum(x)
            if total == 0.0:
                raise SeriesError(f"tail series vanishes at z = {z!r}.")
            w = z**p.beta / total
            dwdz = x * (p.beta * total + e * x * slope) / total**2
            return PhasePoint(z, w), dwdz
        if self.kind is SeedKind.ROTATIONAL_SADDLE:
            raise SeriesError("the rotational seed lives in the XY chart; use evaluate_chart.")
        u = z ** (1.0 / (n + 2))
        total, slope = self._sum(u)
        w = u ** (n - 2) * total
        dwdu = u ** (n - 3) * ((n - 2) * total + u * slope)
        dudz = u / ((n + 2) * z)
        return PhasePoint(z, w), dwdu * dudz

    def evaluate_chart(self, v: float) -> ChartPoint:
        """Seeded point in the chart of the expansion variable (UW for origins, XY for the saddle)."""
        n = self.params.n
        total, _ = self._sum(v)
        if self.kind is SeedKind.ROTATIONAL_SADDLE:
            return ChartPoint(Chart.XY, v, total)
        if self.kind is SeedKind.SHRINK_TAIL:
            raise SeriesError("the tail series is evaluated in z; use evaluate.")
        return ChartPoint(Chart.UW, v, v ** (n - 2) * total)

    def residual(self, v: float) -> float:
        """Absolute residual of the defining equation at the expansion variable v."""
        p = self.params
        n = p.n
        q, dq = self._sum(v)
        if self.kind is SeedKind.SHRINK_TAIL:
            lhs = v * (p.beta * q + (4.0 / (n + 2)) * v * dq)
            rhs = (p.lam * v - 1.0) * q**3 - q**2
        elif self.kind is SeedKind.ROTATIONAL_SADDLE:
            lhs = 2.0 * (n - 1) * v * q * dq
            rhs = p.Rbar - (n - 1) * (n - 2) * q * q - v * v * (q + p.rho)
        else:
            lhs = q * ((n - 2) * q + v * dq)
            shrink = 1.0 if p.shrinking else 0.0
            rhs = (n + 2) * (p.lam - shrink * v**4 - v**4 * q)
        return abs(lhs - rhs)

    def to_dict(self) -> dict[str, object]:
        payload: dict[str, object] = {
            "kind": self.kind.value,
            "variable": self.variable,
            "coeffs": list(self.coeffs),
            "truncation": self.truncation,
            "validityHint": self.validity_hint,
        }
        if self.eigenvalues is not None:
            payload["eigenvalues"] = list(self.eigenvalues)
        return payload


def _check_terms(terms: int) -> int:
    if isinstance(terms, bool) or int(terms) != terms or terms < 1:
        raise SeriesError(f"terms must be a positive integer, got {terms!r}.")
    return int(terms)


def _truncate(c: np.ndarray, size: int) -> np.ndarray:
    out = np.zeros(size)
    out[: min(size, c.size)] = c[:size]
    return out


def validity_radius(coeffs: tuple[float, ...]) -> float:
    """Root-test estimate of where the terms stop shrinking, scaled by a safety fraction."""
    a0 = abs(coeffs[0])
    ratios = [(a0 / abs(a)) ** (1.0 / i) for i, a in enumerate(coeffs) if i > 0 and a != 0.0]
    if not ratios:
        return math.inf
    return SEED_VALIDITY_FRACTION * min(ratios)


def _origin_coeffs(p: SolitonParams, terms: int) -> tuple[float, ...]:
    n = p.n
    shrink = 1.0 if p.shrinking else 0.0
    a = np.zeros(terms)
    a[0] = math.sqrt((n + 2) * p.lam / (n - 2))
    for k in range(1, terms):
        # Q((n-2)Q + uQ') = (n+2)(lambda - s u^4 - u^4 Q), order k without a_k
        cross = sum(a[i] * a[k - i] * (n - 2 + k - i) for i in range(1, k))
        rhs = 0.0
        if k == 4:
            rhs -= (n + 2) * shrink
        if k >= 4:
            rhs -= (n + 2) * a[k - 4]
        a[k] = (rhs - cross) / (a[0] * (2 * n - 4 + k))
    return tuple(float(v) for v in a)


def steady_origin_seed(p: SolitonParams, terms: int = DEFAULT_TERMS) -> SeriesSeed:
    """Separatrix through the UW origin of the steady system, positive branch."""
    terms = _check_terms(terms)
    if p.shrinking:
        raise ParameterError("steady_origin_seed requires the steady regime.")
    coeffs = _origin_coeffs(p, terms)
    return SeriesSeed(SeedKind.STEADY_ORIGIN, p, coeffs, terms, validity_radius(coeffs))


def shrink_origin_seed(p: SolitonParams, terms: int = DEFAULT_TERMS) -> SeriesSeed:
    """Separatrix through the UW origin of the shrinking system (n >= 7), positive branch."""
    terms = _check_terms(terms)
    if not p.shrinking:
        raise ParameterError("shrink_origin_seed requires the shrinking regime.")
    if p.n <= 6:
        raise ParameterError(f"the origin is a rest point of the shrinking system only for n >= 7, got n = {p.n}.")
    coeffs = _origin_coeffs(p, terms)
    return SeriesSeed(SeedKind.SHRINK_ORIGIN, p, coeffs, terms, validity_radius(coeffs))


def _warn_exceptional(p: SolitonParams) -> None:
    if p.n == 6 and math.isclose(p.lam, 2.0, rel_tol=1e-12):
        logger.warning("lambda = 2 with n = 6 also admits the exceptional k = 1 tail family; it is not seeded.")


def shrink_tail_seed(p: SolitonParams, terms: int = DEFAULT_TERMS) -> SeriesSeed:
    """Tail series w ~ -z^((n-2)/(n+2)) by power matching in X = z^(-4/(n+2)).

    P(X) = sum a_i X^i with w = z^beta / P solves
    X (beta P + e X P') = (lambda X - 1) P^3 - P^2 with e = 4/(n+2), a_0 = -1.
    The unknown a_k enters order k with coefficient -1, so each step is explicit.
    """
    terms = _check_terms(terms)
    if not p.shrinking:
        raise ParameterError("shrink_tail_seed requires the shrinking regime.")
    _warn_exceptional(p)
    b = p.beta
    e = 4.0 / (p.n + 2)
    a = np.zeros(terms)
    a[0] = -1.0
    for k in range(1, terms):
        sq = _truncate(poly.polymul(a, a), k + 1)
        cube = _truncate(poly.polymul(sq, a), k + 1)
        a[k] = p.lam * cube[k - 1] - cube[k] - sq[k] - a[k - 1] * (b + e * (k - 1))
    coeffs = tuple(float(v) for v in a)
    return SeriesSeed(SeedKind.SHRINK_TAIL, p, coeffs, terms, validity_radius(coeffs))


def printed_tail_recurrence(lam: float, terms: int = DEFAULT_TERMS) -> tuple[float, ...]:
    """n = 6 tail coefficients from (i+1) a_i = 2 lam (P^3)_i - 2 (P^3)_{i+1} - 2 (P^2)_{i+1}.

    The relation is affine in a_{i+1}; each coefficient is recovered from two
    evaluations of the unsolved form.
    """
    terms = _check_terms(terms)
    a = np.zeros(terms)
    a[0] = -1.0

    def relation(i: int) -> float:
        sq = _truncate(poly.polymul(a, a), i + 2)
        cube = _truncate(poly.polymul(sq, a), i + 2)
        return 2.0 * lam * cube[i] - 2.0 * cube[i + 1] - 2.0 * sq[i + 1] - (i + 1) * a[i]

    for i in range(terms - 1):
        a[i + 1] = 0.0
        r0 = relation(i)
        a[i + 1] = 1.0
        slope = relation(i) - r0
        a[i + 1] = -r0 / slope
    return tuple(float(v) for v in a)


def rotational_saddle_seed(p: SolitonParams, terms: int = DEFAULT_TERMS) -> SeriesSeed:
    """Unstable manifold of the XY saddle (0, y0) leaving along the positive x direction.

    With y = sum a_i x^i the orbit equation
    2(n-1) x y y' = Rbar - (n-1)(n-2) y^2 - x^2 (y + rho)
    fixes a_k through the factor 2(n-1) a_0 (k + n - 2).
    """
    terms = _check_terms(terms)
    n = p.n
    m = float((n - 1) * (n - 2))
    y0 = math.sqrt(p.Rbar / m)
    a = np.zeros(max(terms, 1))
    a[0] = y0
    for k in range(1, terms):
        lhs = 2.0 * (n - 1) * sum(a[i] * (k - i) * a[k - i] for i in range(1, k))
        sq = sum(a[i] * a[k - i] for i in range(1, k))
        rhs = -m * sq
        if k >= 2:
            rhs -= a[k - 2]
        if k == 2:
            rhs -= p.rho
        a[k] = (rhs - lhs) / (2.0 * (n - 1) * y0 * (k + n - 2))
    coeffs = tuple(float(v) for v in a)
    eig = (2.0 * (n - 1) * y0, -2.0 * (n - 1) * (n - 2) * y0)
    return SeriesSeed(SeedKind.ROTATIONAL_SADDLE, p, coeffs, terms, validity_radius(coeffs), eig)


@dataclass(frozen=True)
class TailFit:
    exponent: float
    coefficient: float
    residual: float
    samples: int

    def to_dict(self) -> dict[str, object]:
        return {
            "exponent": self.exponent,
            "coefficient": self.coefficient,
            "residual": self.residual,
            "samples": self.samples,
        }


@dataclass(frozen=True)
class CompletenessVerdict:
    direction: EndDirection
    verdict: Divergence
    numeric_tail: float
    rate_model: str
    fit: TailFit | None = None

    def to_dict(self) -> dict[str, object]:
        return {
            "direction": self.direction.value,
            "verdict": self.verdict.value,
            "numericTail": self.numeric_tail if math.isfinite(self.numeric_tail) else None,
            "rateModel": self.rate_model,
            "fit": self.fit.to_dict() if self.fit is not None else None,
        }


def fit_tail(p: SolitonParams, z: np.ndarray, w: np.ndarray, direction: EndDirection) -> TailFit:
    """Least-squares fit of |w^-1 z^(-2/(n+2))| ~ c z^p over the last decade toward the end."""
    mask = (z > 0.0) & (w != 0.0) & np.isfinite(z) & np.isfinite(w)
    z, w = z[mask], w[mask]
    if z.size == 0:
        raise InsufficientSamples("no usable samples for the tail fit.")
    if direction is EndDirection.TOWARD_LARGE_END:
        near = z >= z.max() / 10.0
    else:
        near = z <= z.min() * 10.0
    if int(near.sum()) < MIN_TAIL_SAMPLES:
        raise InsufficientSamples(
            f"{int(near.sum())} samples in the last decade; at least {MIN_TAIL_SAMPLES} are needed."
        )
    lz = np.log(z[near])
    lg = np.log(np.abs(z[near] ** (-2.0 / (p.n + 2)) / w[near]))
    slope, intercept = np.polyfit(lz, lg, 1)
    resid = float(np.sqrt(np.mean((lg - (slope * lz + intercept)) ** 2)))
    return TailFit(float(slope), float(math.exp(intercept)), resid, int(near.sum()))


def verdict_from_fit(fit: TailFit, direction: EndDirection) -> Divergence:
    p = fit.exponent
    # the z^p tail diverges at infinity iff p >= -1 and at zero iff p <= -1
    if direction is EndDirection.TOWARD_LARGE_END:
        if p >= -1.0 + FIT_MARGIN:
            return Divergence.DIVERGES
        if p <= -1.0 - FIT_MARGIN:
            return Divergence.CONVERGES
    else:
        if p >= -1.0 + FIT_MARGIN:
            return Divergence.CONVERGES
        if p <= -1.0 - FIT_MARGIN:
            return Divergence.DIVERGES
    return Divergence.INCONCLUSIVE


def _integral(traj: Trajectory) -> float:
    total = 0.0
    piece: Trajectory | None = traj
    while piece is not None:
        if len(piece) > 1:
            total += float(arc_length(piece)[-1])
        piece = piece.continuation
    return total / dr_ds_factor(traj.params)


def _final(traj: Trajectory) -> Trajectory:
    while traj.continuation is not None:
        traj = traj.continuation
    return traj


def completeness_integral(
    traj: Trajectory,
    p: SolitonParams,
    direction: EndDirection | str,
) -> CompletenessVerdict:
    """Classify I = int w^-1 z^(-2/(n+2)) dz toward one end of a trajectory."""
    end = EndDirection(direction)
    z, w = traj.zw_arrays()
    if z.size < 2:
        raise InsufficientSamples("trajectory has fewer than two samples.")
    pick_last = z[-1] < z[0] if end is EndDirection.TOWARD_SMALL_END else z[-1] > z[0]
    try:
        total = _integral(traj)
    except DomainError:
        total = math.nan
    tail = total if pick_last else -total

    if pick_last:
        last = _final(traj)
        if last.terminal is Terminal.CONVERGED:
            if z[-1] > 1e-6 * max(1.0, p.xi):
                return CompletenessVerdict(end, Divergence.DIVERGES, tail, "interior critical point: s comparable to r")
            return CompletenessVerdict(end, Divergence.CONVERGES, tail, "bounded endpoint at the origin")
        if last.terminal is Terminal.HIT_BOUNDARY:
            return CompletenessVerdict(end, Divergence.CONVERGES, tail, "reaches the w-axis at finite r")

    fit = fit_tail(p, z, w, end)
    verdict = verdict_from_fit(fit, end)
    model = f"integrand ~ {fit.coefficient:.6g} * z^({fit.exponent:.6g})"
    logger.debug("completeness toward %s: %s (%s)", end.value, verdict.value, model)
    return CompletenessVerdict(end, verdict, tail, model, fit)


def separation_slope(p: SolitonParams, z_lo: float = 1e3, z_hi: float = 1e4, terms: int = DEFAULT_TERMS) -> float:
    """Growth of log-separation between neighboring tail solutions, relative to ((n+2)/4) z^(4/(n+2)).

    Neighbors of w_gamma obey d(delta)/dz = -Phi / w_gamma^2 * delta to first order.
    """
    if not p.shrinking:
        raise ParameterError("separation_slope requires the shrinking regime.")
    if not 0.0 < z_lo < z_hi:
        raise ParameterError("separation window must satisfy 0 < z_lo < z_hi.")
    seed = shrink_tail_seed(p, terms)
    if z_lo < seed.z_min_valid:
        raise SeriesError(f"z_lo = {z_lo!r} lies below the series validity bound {seed.z_min_valid!r}.")

    def rate(z: float) -> float:
        w = seed.evaluate(z)[0].w
        return -phi_fn(p, z) / (w * w)

    growth, _ = quad(rate, z_lo, z_hi, limit=200)
    e = 4.0 / (p.n + 2)
    reference = (z_hi**e - z_lo**e) / e
    return growth / reference
