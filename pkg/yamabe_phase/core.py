"""Soliton parameters, the driving function Phi and exact chart transforms."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
import math

from pydantic import BaseModel, ConfigDict, Field, model_validator


class ParameterError(ValueError):
    """Raised when soliton parameters violate the normalization rules."""


class DomainError(ValueError):
    """Raised when a point lies outside the domain of a chart or formula."""


class Regime(str, Enum):
    STEADY = "steady"
    SHRINKING = "shrinking"


class Chart(str, Enum):
    XY = "xy"
    UW = "uw"


def k_const(n: int) -> float:
    """(n-1)(n+2), the constant that ties the (x, y) and (z, w) charts."""
    return float((n - 1) * (n + 2))


def beta(n: int) -> float:
    return (n - 2) / (n + 2)


def threshold(n: int) -> float:
    """Critical value of lambda for the shrinking existence result."""
    return beta(n)


def rho_normal(n: int) -> float:
    return k_const(n) ** (-beta(n))


def curvature_factor(n: int) -> float:
    """A = ((n-1)(n+2))^((n-6)/(n+2)), so that lambda = A * Rbar."""
    return k_const(n) ** ((n - 6) / (n + 2))


def rbar_threshold(n: int, rho: float) -> float:
    """Rbar bound of the shrinking existence statement expressed through rho."""
    return rho * beta(n) * k_const(n) ** (4.0 / (n + 2))


class SolitonParams(BaseModel):
    """Normalized problem instance; `scale` maps normalized z and w back to input units."""

    model_config = ConfigDict(frozen=True, populate_by_name=True)

    n: int = Field(..., ge=3, description="Dimension of the warped product.")
    regime: Regime = Field(..., description="Steady (rho = 0) or shrinking (rho > 0).")
    Rbar: float = Field(..., gt=0, description="Normalized scalar curvature of the fiber.")
    rho: float = Field(..., ge=0, description="Normalized soliton constant.")
    lam: float = Field(..., gt=0, alias="lambda", description="lambda = A * Rbar.")
    xi: float = Field(..., ge=0, description="Abscissa of the interior rest point (0 when steady).")
    scale: float = Field(1.0, gt=0, description="Factor mu with z_input = mu * z, w_input = mu * w.")

    @model_validator(mode="after")
    def _check_regime(self) -> "SolitonParams":
        if self.regime is Regime.STEADY and self.rho != 0.0:
            raise ValueError("steady regime requires rho = 0.")
        if self.regime is Regime.SHRINKING and self.rho <= 0.0:
            raise ValueError("shrinking regime requires rho > 0.")
        return self

    @property
    def shrinking(self) -> bool:
        return self.regime is Regime.SHRINKING

    @property
    def k(self) -> float:
        return k_const(self.n)

    @property
    def beta(self) -> float:
        return beta(self.n)

    @property
    def above_threshold(self) -> bool:
        return self.shrinking and self.lam > threshold(self.n)

    def to_dict(self) -> dict[str, object]:
        return self.model_dump(mode="json", by_alias=True)

    @classmethod
    def from_dict(cls, payload: dict[str, object]) -> "SolitonParams":
        return cls.model_validate(payload)


def _coerce_regime(regime: Regime | str) -> Regime:
    try:
        return Regime(regime.lower() if isinstance(regime, str) else regime)
    except ValueError as exc:
        raise ParameterError(f"unknown regime {regime!r}; expected 'steady' or 'shrinking'.") from exc


def _check_dimension(n: int) -> None:
    if isinstance(n, bool) or int(n) != n or n < 3:
        raise ParameterError(f"n must be an integer >= 3, got {n!r}.")


def make_params(
    n: int,
    regime: Regime | str,
    Rbar: float,
    rho: float | None = None,
) -> SolitonParams:
    """Build normalized parameters.

    Steady instances are rescaled to lambda = 1. Shrinking instances use the
    normalized rho; when a different rho is supplied the instance is mapped
    through the scaling symmetry z -> mu z, w -> mu w of the reduced equation,
    under which Rbar / rho**2 is invariant.
    """
    _check_dimension(n)
    n = int(n)
    kind = _coerce_regime(regime)
    if not math.isfinite(Rbar) or Rbar <= 0.0:
        raise ParameterError(f"Rbar must be a positive finite number, got {Rbar!r}.")

    factor = curvature_factor(n)
    if kind is Regime.STEADY:
        if rho not in (None, 0.0):
            raise ParameterError("steady regime requires rho = 0.")
        mu = (factor * Rbar) ** ((n + 2) / 8.0)
        return SolitonParams(n=n, regime=kind, Rbar=1.0 / factor, rho=0.0, lam=1.0, xi=0.0, scale=mu)

    rho_n = rho_normal(n)
    if rho is None:
        mu = 1.0
        rbar_n = Rbar
    else:
        if not math.isfinite(rho) or rho <= 0.0:
            raise ParameterError("shrinking regime requires rho > 0; the expanding case is not supported.")
        mu = (rho / rho_n) ** ((n + 2) / 4.0)
        rbar_n = Rbar * (rho_n / rho) ** 2
    lam = factor * rbar_n
    return SolitonParams(
        n=n,
        regime=kind,
        Rbar=rbar_n,
        rho=rho_n,
        lam=lam,
        xi=lam ** ((n + 2) / 4.0),
        scale=mu,
    )


def params_from_lambda(n: int, regime: Regime | str, lam: float) -> SolitonParams:
    """Normalized instance from lambda directly (steady only admits lambda = 1)."""
    _check_dimension(n)
    kind = _coerce_regime(regime)
    if not math.isfinite(lam) or lam <= 0.0:
        raise ParameterError(f"lambda must be a positive finite number, got {lam!r}.")
    if kind is Regime.STEADY and lam != 1.0:
        raise ParameterError("steady instances are normalized to lambda = 1.")
    return make_params(int(n), kind, lam / curvature_factor(int(n)))


def resolve_params(
    n: int,
    regime: Regime | str,
    *,
    lam: float | None = None,
    Rbar: float | None = None,
    rho: float | None = None,
) -> SolitonParams:
    """Normalized parameters from either lambda (normalized mode) or Rbar with optional rho."""
    if lam is not None and Rbar is not None:
        raise ParameterError("give either lambda or Rbar, not both.")
    if lam is not None:
        if rho is not None:
            raise ParameterError("rho is only accepted together with Rbar.")
        return params_from_lambda(n, regime, lam)
    if Rbar is not None:
        return make_params(n, regime, Rbar, rho)
    if _coerce_regime(regime) is Regime.STEADY:
        return params_from_lambda(n, regime, 1.0)
    raise ParameterError("shrinking runs need lambda or Rbar.")


def with_rbar(p: SolitonParams, Rbar: float) -> SolitonParams:
    """Same n and rho with a different fiber curvature, lambda and xi rederived."""
    if Rbar <= 0.0:
        raise ParameterError("Rbar must be positive.")
    lam = curvature_factor(p.n) * Rbar
    if p.shrinking:
        xi = lam ** ((p.n + 2) / 4.0)
    else:
        xi = 0.0
    return p.model_copy(update={"Rbar": Rbar, "lam": lam, "xi": xi})


@dataclass(frozen=True)
class PhasePoint:
    z: float
    w: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.z) and math.isfinite(self.w)):
            raise DomainError("phase point coordinates must be finite.")

    @property
    def in_half_plane(self) -> bool:
        return self.z > 0.0

    def to_dict(self) -> dict[str, float]:
        return {"z": self.z, "w": self.w}


@dataclass(frozen=True)
class ChartPoint:
    chart: Chart
    first: float
    second: float

    def __post_init__(self) -> None:
        if self.chart is Chart.UW and self.first < 0.0:
            raise DomainError("UW chart requires u >= 0.")

    def to_dict(self) -> dict[str, object]:
        return {"chart": self.chart.value, "first": self.first, "second": self.second}


def phi_fn(p: SolitonParams, z: float) -> float:
    """Phi(z) = lambda z^((n-6)/(n+2)) [- z^((n-2)/(n+2)) when shrinking]."""
    n = p.n
    if z < 0.0 or not math.isfinite(z):
        raise DomainError(f"Phi is undefined for z = {z!r}.")
    if z == 0.0:
        if n < 6:
            raise DomainError("Phi diverges at z = 0 for n < 6.")
        return p.lam if n == 6 else 0.0
    value = p.lam * z ** ((n - 6) / (n + 2))
    if p.shrinking:
        value -= z ** p.beta
    return value


def phi_prime(p: SolitonParams, z: float) -> float:
    n = p.n
    if z <= 0.0 or not math.isfinite(z):
        raise DomainError(f"Phi' is undefined for z = {z!r}.")
    a = (n - 6) / (n + 2)
    value = p.lam * a * z ** (a - 1.0)
    if p.shrinking:
        value -= p.beta * z ** (p.beta - 1.0)
    return value


def zw_from_xy(p: SolitonParams, x: float, y: float) -> PhasePoint:
    if x <= 0.0:
        raise DomainError(f"x must be positive, got {x!r}.")
    n = p.n
    return PhasePoint(z=x ** ((n + 2) / 2.0) / p.k, w=y * x ** ((n - 2) / 2.0))


def xy_from_zw(p: SolitonParams, q: PhasePoint) -> ChartPoint:
    if q.z <= 0.0:
        raise DomainError(f"z must be positive, got {q.z!r}.")
    kz = p.k * q.z
    return ChartPoint(Chart.XY, kz ** (2.0 / (p.n + 2)), q.w * kz ** (-p.beta))


def u_from_z(p: SolitonParams, z: float) -> float:
    if z < 0.0:
        raise DomainError(f"z must be non-negative, got {z!r}.")
    return z ** (1.0 / (p.n + 2))


def z_from_u(p: SolitonParams, u: float) -> float:
    if u < 0.0:
        raise DomainError(f"u must be non-negative, got {u!r}.")
    return u ** (p.n + 2)


def uw_from_zw(p: SolitonParams, q: PhasePoint) -> ChartPoint:
    return ChartPoint(Chart.UW, u_from_z(p, q.z), q.w)


def zw_from_uw(p: SolitonParams, c: ChartPoint) -> PhasePoint:
    if c.chart is not Chart.UW:
        raise DomainError("expected a UW chart point.")
    return PhasePoint(z=z_from_u(p, c.first), w=c.second)


def dr_ds_factor(p: SolitonParams) -> float:
    """c with dr = c * z^(-2/(n+2)) ds along a (z, w) trajectory."""
    n = p.n
    return (2.0 / (n + 2)) * p.k ** (n / (n + 2))
