"""Adaptive Dormand-Prince integration with dense output and event location."""

from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass, field, replace
from enum import Enum
import logging
import math

import numpy as np

from config.defaults import (
    CONVERGENCE_RADIUS,
    DEFAULT_ATOL,
    DEFAULT_RTOL,
    ESCAPE_RADIUS,
    EVENT_TOL,
    MAX_REL_CHANGE,
    MAX_SPAN,
    MAX_STEPS,
)

from .core import DomainError, ParameterError, PhasePoint, SolitonParams, dr_ds_factor, xy_from_zw, zw_from_xy
from .dynsys import (
    COORDINATES,
    StateLike,
    VectorFieldId,
    _pair,
    curve_eval,
    make_field,
    trap_distance,
    trap_floor,
    uw_field_for,
)

logger = logging.getLogger(__name__)

# Dormand-Prince 5(4) tableau; the seventh stage is evaluated at the new point (FSAL).
_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0)
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
)
_B = (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84)
_E = (71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40)


class IntegrationError(RuntimeError):
    """Raised when a trajectory cannot be continued numerically."""


class StepSizeUnderflow(IntegrationError):
    """Raised when the accepted step size falls below the representable minimum."""


class DomainExit(IntegrationError):
    """Raised when a trajectory leaves the chart domain without a requested boundary."""


class NoReturn(IntegrationError):
    """Raised when a trajectory ends before returning to the z-axis."""

    def __init__(self, message: str, terminal: "Terminal", trajectory: "Trajectory") -> None:
        super().__init__(message)
        self.terminal = terminal
        self.trajectory = trajectory


class ReturnMapViolation(IntegrationError):
    """Raised when a first-return abscissa does not exceed its start."""


class InvalidStart(ValueError):
    """Raised when an integration start point is not admissible."""


class Direction(str, Enum):
    FORWARD = "forward"
    BACKWARD = "backward"

    @property
    def sign(self) -> float:
        return 1.0 if self is Direction.FORWARD else -1.0


class EventKind(str, Enum):
    # declaration order breaks ties between simultaneous events
    W_AXIS = "WAxisCrossing"
    Z_AXIS = "ZAxisCrossing"
    S1_CROSSING = "S1Crossing"
    TRAP_ENTRY = "TrapEntry"
    TRAP_EXIT = "TrapExit"
    ESCAPE = "Escape"
    CONVERGENCE = "Convergence"


_EVENT_ORDER = {kind: index for index, kind in enumerate(EventKind)}


class Terminal(str, Enum):
    CONVERGED = "ConvergedToCriticalPoint"
    ESCAPED = "Escaped"
    HIT_BOUNDARY = "HitBoundary"
    MAX_STEPS = "MaxSteps"
    SPAN_EXHAUSTED = "SpanExhausted"
    STOP_EVENT = "StopEvent"


@dataclass(frozen=True)
class Event:
    kind: EventKind
    param: float
    state: tuple[float, float]
    direction: int = 0

    def to_dict(self) -> dict[str, object]:
        return {
            "kind": self.kind.value,
            "param": self.param,
            "state": list(self.state),
            "direction": self.direction,
        }


@dataclass(frozen=True)
class StopSpec:
    """Stopping rules and tolerances for one integration run."""

    max_span: float = MAX_SPAN
    max_steps: int = MAX_STEPS
    escape_radius: float = ESCAPE_RADIUS
    boundary: float | None = None
    target: tuple[float, float] | None = None
    convergence_radius: float = CONVERGENCE_RADIUS
    events: tuple[EventKind, ...] = ()
    stop_on: tuple[EventKind, ...] = ()
    stop_direction: int = 0
    chart_switch_z: float | None = None
    max_step: float = math.inf
    max_rel_change: float = MAX_REL_CHANGE
    atol: float = DEFAULT_ATOL
    rtol: float = DEFAULT_RTOL

    def to_dict(self) -> dict[str, object]:
        return {
            "maxSpan": self.max_span,
            "maxSteps": self.max_steps,
            "escapeRadius": self.escape_radius,
            "boundary": self.boundary,
            "target": list(self.target) if self.target is not None else None,
            "convergenceRadius": self.convergence_radius,
            "atol": self.atol,
            "rtol": self.rtol,
        }


@dataclass(frozen=True, eq=False)
class Trajectory:
    vf: VectorFieldId
    params: SolitonParams
    direction: Direction
    s: np.ndarray
    y: np.ndarray
    f: np.ndarray
    events: tuple[Event, ...]
    terminal: Terminal
    continuation: "Trajectory | None" = None
    stop: StopSpec = field(default_factory=StopSpec)

    def __len__(self) -> int:
        return int(self.s.size)

    @property
    def samples(self) -> list[tuple[float, tuple[float, float]]]:
        return [(float(s), (float(a), float(b))) for s, (a, b) in zip(self.s, self.y)]

    @property
    def final_state(self) -> tuple[float, float]:
        last = self.continuation if self.continuation is not None else self
        return float(last.y[-1, 0]), float(last.y[-1, 1])

    def all_events(self) -> list[Event]:
        found = list(self.events)
        if self.continuation is not None:
            found.extend(self.continuation.all_events())
        return found

    def zw_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """(z, w) along the trajectory, continuation pieces mapped back to the ZW chart."""
        p = self.params
        if self.vf is VectorFieldId.ZW:
            z, w = self.y[:, 0].copy(), self.y[:, 1].copy()
        elif self.vf is VectorFieldId.XY:
            pts = [zw_from_xy(p, x, v) if x > 0.0 else PhasePoint(0.0, 0.0) for x, v in self.y]
            z = np.array([q.z for q in pts])
            w = np.array([q.w for q in pts])
        else:
            z = np.clip(self.y[:, 0], 0.0, None) ** (p.n + 2)
            w = self.y[:, 1].copy()
        if self.continuation is not None:
            cz, cw = self.continuation.zw_arrays()
            z = np.concatenate([z, cz[1:]])
            w = np.concatenate([w, cw[1:]])
        return z, w

    def to_dict(self) -> dict[str, object]:
        payload: dict[str, object] = {
            "vf": self.vf.value,
            "coordinates": list(COORDINATES[self.vf]),
            "direction": self.direction.value,
            "terminal": self.terminal.value,
            "samples": len(self),
            "events": [event.to_dict() for event in self.events],
            "stop": self.stop.to_dict(),
        }
        if self.continuation is not None:
            payload["continuation"] = self.continuation.to_dict()
        return payload


def hermite(y0: np.ndarray, k0: np.ndarray, y1: np.ndarray, k1: np.ndarray, h: float, theta: float) -> np.ndarray:
    t2 = theta * theta
    t3 = t2 * theta
    return (
        (2 * t3 - 3 * t2 + 1) * y0
        + (t3 - 2 * t2 + theta) * h * k0
        + (-2 * t3 + 3 * t2) * y1
        + (t3 - t2) * h * k1
    )


def _size(vf: VectorFieldId, p: SolitonParams, y: np.ndarray) -> float:
    if vf in (VectorFieldId.UW_STEADY, VectorFieldId.UW_SHRINK):
        return max(abs(y[0]) ** (p.n + 2), abs(y[1]))
    return max(abs(y[0]), abs(y[1]))


def _event_functions(
    vf: VectorFieldId, p: SolitonParams, stop: StopSpec
) -> dict[str, Callable[[np.ndarray], float]]:
    funcs: dict[str, Callable[[np.ndarray], float]] = {}
    kinds = set(stop.events) | set(stop.stop_on)
    if stop.boundary is not None or EventKind.W_AXIS in kinds:
        floor = stop.boundary or 0.0
        funcs["w_axis"] = lambda y: y[0] - floor
    if EventKind.Z_AXIS in kinds:
        funcs["z_axis"] = lambda y: y[1]
    if vf is VectorFieldId.ZW and EventKind.S1_CROSSING in kinds:
        funcs["s1"] = lambda y: y[1] - curve_eval("S1", p, y[0])
    if vf is VectorFieldId.ZW and p.shrinking and kinds & {EventKind.TRAP_ENTRY, EventKind.TRAP_EXIT}:
        trap_floor(p)
        funcs["trap"] = lambda y: trap_distance(p, PhasePoint(float(y[0]), float(y[1])))
    funcs["escape"] = lambda y: _size(vf, p, y) - stop.escape_radius
    if vf is VectorFieldId.ZW and stop.chart_switch_z is not None and p.n < 6:
        funcs["switch"] = lambda y: y[0] - stop.chart_switch_z
    return funcs


def _safe(g: Callable[[np.ndarray], float], y: np.ndarray) -> float:
    try:
        value = float(g(y))
    except DomainError:
        return math.nan
    return value


def _classify_hit(key: str, direction: int) -> EventKind | None:
    if key == "w_axis":
        return EventKind.W_AXIS
    if key == "z_axis":
        return EventKind.Z_AXIS
    if key == "s1":
        return EventKind.S1_CROSSING
    if key == "trap":
        return EventKind.TRAP_ENTRY if direction > 0 else EventKind.TRAP_EXIT
    if key == "escape":
        return EventKind.ESCAPE if direction > 0 else None
    return None


class _Integrator:
    def __init__(self, vf: VectorFieldId, p: SolitonParams, sign: float, stop: StopSpec) -> None:
        self.vf = vf
        self.p = p
        self.sign = sign
        self.stop = stop
        self.field = make_field(vf, p, check_domain=False)
        self.events_fns = _event_functions(vf, p, stop)

    def k(self, y: np.ndarray) -> np.ndarray:
        return self.sign * self.field(y)

    def step(self, y: np.ndarray, k1: np.ndarray, h: float) -> tuple[np.ndarray, np.ndarray, float]:
        ks = [k1]
        for i in range(1, 6):
            yi = y + h * sum(a * kj for a, kj in zip(_A[i], ks))
            ks.append(self.k(yi))
        y_new = y + h * sum(b * kj for b, kj in zip(_B, ks))
        k7 = self.k(y_new)
        ks.append(k7)
        err_vec = h * sum(e * kj for e, kj in zip(_E, ks))
        scale = self.stop.atol + self.stop.rtol * np.maximum(np.abs(y), np.abs(y_new))
        err = float(np.sqrt(np.mean((err_vec / scale) ** 2)))
        return y_new, k7, err

    def cap(self, y: np.ndarray, k: np.ndarray) -> float:
        speed = float(np.linalg.norm(k))
        if speed == 0.0:
            return math.inf
        return self.stop.max_rel_change * max(float(np.linalg.norm(y)), 1e-3) / speed

    def at_rest(self, y: np.ndarray) -> bool:
        target = self.stop.target
        if target is None:
            return False
        radius = self.stop.convergence_radius
        if float(np.hypot(y[0] - target[0], y[1] - target[1])) > radius:
            return False
        return float(np.linalg.norm(self.field(y))) <= radius

    def locate(
        self, g: Callable[[np.ndarray], float], g0: float, y0: np.ndarray, k0: np.ndarray,
        y1: np.ndarray, k1: np.ndarray, h: float,
    ) -> float:
        lo, hi = 0.0, 1.0
        for _ in range(200):
            if (hi - lo) * h <= EVENT_TOL:
                break
            mid = 0.5 * (lo + hi)
            gm = _safe(g, hermite(y0, k0, y1, k1, h, mid))
            if math.isnan(gm):
                hi = mid
                continue
            if gm == 0.0:
                return mid
            if (gm > 0.0) == (g0 > 0.0):
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)

    def run(self, y0: np.ndarray, s0: float) -> Trajectory:
        stop = self.stop
        sign = self.sign
        direction = Direction.FORWARD if sign > 0 else Direction.BACKWARD
        if not np.all(np.isfinite(y0)):
            raise InvalidStart("start point must be finite.")
        try:
            k = self.k(y0)
        except DomainError as exc:
            raise InvalidStart(str(exc)) from exc

        times = [s0]
        states = [y0]
        derivs = [sign * k]
        events: list[Event] = []

        def build(terminal: Terminal, continuation: Trajectory | None = None) -> Trajectory:
            return Trajectory(
                vf=self.vf,
                params=self.p,
                direction=direction,
                s=np.array(times),
                y=np.array(states),
                f=np.array(derivs),
                events=tuple(events),
                terminal=terminal,
                continuation=continuation,
                stop=stop,
            )

        if float(np.linalg.norm(k)) == 0.0 or self.at_rest(y0):
            events.append(Event(EventKind.CONVERGENCE, s0, (float(y0[0]), float(y0[1]))))
            return build(Terminal.CONVERGED)

        gvals = {key: _safe(g, y0) for key, g in self.events_fns.items()}
        if "switch" in gvals and gvals["switch"] <= 0.0:
            return build(Terminal.STOP_EVENT, self._switch(y0, s0))

        y = y0
        tau = 0.0
        h = min(1e-3 * max(float(np.linalg.norm(y)), 1e-3) / float(np.linalg.norm(k)), stop.max_step)
        steps = 0
        while True:
            if steps >= stop.max_steps:
                return build(Terminal.MAX_STEPS)
            remaining = stop.max_span - tau
            if remaining <= 1e-14 * max(1.0, abs(tau)):
                return build(Terminal.SPAN_EXHAUSTED)
            h = min(h, remaining, stop.max_step, self.cap(y, k))
            h_min = 1e-14 * max(1.0, abs(tau))
            if h < h_min:
                raise StepSizeUnderflow(f"step size {h:.3e} underflowed at state {y.tolist()}.")
            try:
                y_new, k_new, err = self.step(y, k, h)
            except DomainError as exc:
                if stop.boundary is None:
                    raise DomainExit(f"trajectory left the chart domain near {y.tolist()}: {exc}") from exc
                logger.debug("domain rejection at %s, halving step %.3e", y.tolist(), h)
                h *= 0.5
                continue
            if not (np.all(np.isfinite(y_new)) and math.isfinite(err)):
                h *= 0.5
                continue
            if err > 1.0:
                h *= max(0.2, 0.9 * err ** -0.2)
                continue

            steps += 1
            hits = self._scan(gvals, y, k, y_new, k_new, h)
            terminal_hit: tuple[float, EventKind | str, np.ndarray] | None = None
            for theta, kind, state, crossing in hits:
                param = s0 + sign * (tau + theta * h)
                if kind == "switch":
                    terminal_hit = (param, kind, state)
                    break
                events.append(Event(kind, param, (float(state[0]), float(state[1])), crossing))
                if self._is_terminal(kind, crossing):
                    terminal_hit = (param, kind, state)
                    break

            if terminal_hit is not None:
                param, kind, state = terminal_hit
                times.append(param)
                states.append(state)
                derivs.append(self.field(state))
                if kind == "switch":
                    return build(Terminal.STOP_EVENT, self._switch(state, param))
                if kind is EventKind.ESCAPE:
                    return build(Terminal.ESCAPED)
                if kind is EventKind.W_AXIS and stop.boundary is not None:
                    return build(Terminal.HIT_BOUNDARY)
                return build(Terminal.STOP_EVENT)

            tau += h
            y, k = y_new, k_new
            times.append(s0 + sign * tau)
            states.append(y)
            derivs.append(sign * k)
            gvals = {key: _safe(g, y) for key, g in self.events_fns.items()}

            if self.at_rest(y):
                events.append(Event(EventKind.CONVERGENCE, times[-1], (float(y[0]), float(y[1]))))
                return build(Terminal.CONVERGED)

            factor = 5.0 if err == 0.0 else min(5.0, max(0.2, 0.9 * err ** -0.2))
            h *= factor

    def _is_terminal(self, kind: EventKind, crossing: int) -> bool:
        if kind is EventKind.ESCAPE:
            return True
        if kind is EventKind.W_AXIS and self.stop.boundary is not None:
            return True
        if kind in self.stop.stop_on:
            return self.stop.stop_direction == 0 or crossing == self.stop.stop_direction
        return False

    def _scan(
        self, gvals: dict[str, float], y0: np.ndarray, k0: np.ndarray,
        y1: np.ndarray, k1: np.ndarray, h: float,
    ) -> list[tuple[float, EventKind | str, np.ndarray, int]]:
        requested = set(self.stop.events) | set(self.stop.stop_on)
        hits: list[tuple[float, EventKind | str, np.ndarray, int]] = []
        for key, g in self.events_fns.items():
            g0 = gvals.get(key, math.nan)
            g1 = _safe(g, y1)
            if math.isnan(g0) or math.isnan(g1) or g0 == 0.0:
                continue
            if g1 != 0.0 and (g1 > 0.0) == (g0 > 0.0):
                continue
            crossing = 1 if g1 > g0 else -1
            if key == "switch":
                if crossing > 0:
                    continue
                theta = self.locate(g, g0, y0, k0, y1, k1, h)
                hits.append((theta, "switch", hermite(y0, k0, y1, k1, h, theta), crossing))
                continue
            kind = _classify_hit(key, crossing)
            if kind is None:
                continue
            if kind not in requested and kind is not EventKind.ESCAPE and not (
                kind is EventKind.W_AXIS and self.stop.boundary is not None
            ):
                continue
            theta = self.locate(g, g0, y0, k0, y1, k1, h)
            hits.append((theta, kind, hermite(y0, k0, y1, k1, h, theta), crossing))
        hits.sort(key=lambda hit: (hit[0], -1 if hit[1] == "switch" else _EVENT_ORDER[hit[1]]))
        return hits

    def _switch(self, state: np.ndarray, param: float) -> Trajectory:
        p = self.p
        root = 1.0 / (p.n + 2)
        stop = self.stop
        target = stop.target
        sub = replace(
            stop,
            boundary=(stop.boundary or 0.0) ** root,
            target=None if target is None else (max(target[0], 0.0) ** root, target[1]),
            events=tuple(kind for kind in stop.events if kind in (EventKind.W_AXIS, EventKind.Z_AXIS)),
            stop_on=tuple(kind for kind in stop.stop_on if kind in (EventKind.W_AXIS, EventKind.Z_AXIS)),
            chart_switch_z=None,
        )
        start = np.array([max(float(state[0]), 0.0) ** root, float(state[1])])
        logger.debug("switching to the UW chart at z=%.6g", float(state[0]))
        return _Integrator(uw_field_for(p), p, self.sign, sub).run(start, param)


def integrate(
    vf: VectorFieldId,
    p: SolitonParams,
    start: StateLike,
    direction: Direction | str = Direction.FORWARD,
    stop: StopSpec | None = None,
) -> Trajectory:
    """Integrate `vf` from `start` until a terminal condition of `stop` is met."""
    way = Direction(direction)
    spec = stop or StopSpec()
    if vf is VectorFieldId.ZW and spec.boundary is None:
        first, _ = _pair(start)
        if first <= 0.0:
            raise InvalidStart("ZW integration needs z > 0.")
    y0 = np.asarray(_pair(start), dtype=float)
    return _Integrator(vf, p, way.sign, spec).run(y0, 0.0)


def z_axis_crossings(traj: Trajectory, direction: int = 0) -> list[float]:
    """Abscissae of recorded z-axis crossings, optionally filtered by the sign of dw."""
    return [
        event.state[0]
        for event in traj.events
        if event.kind is EventKind.Z_AXIS and (direction == 0 or event.direction == direction)
    ]


def first_return_z(p: SolitonParams, z0: float, stop: StopSpec | None = None) -> float:
    """Abscissa z_b where the orbit of (z0, 0) first returns to the z-axis with w increasing."""
    if not p.shrinking:
        raise ParameterError("first_return_z is defined for the shrinking regime only.")
    if z0 == p.xi:
        raise InvalidStart("the start (xi, 0) is the critical point.")
    if not 0.0 < z0 < p.xi:
        raise InvalidStart(f"z0 must lie in (0, xi) = (0, {p.xi}), got {z0!r}.")
    spec = replace(
        stop or StopSpec(),
        target=(p.xi, 0.0),
        events=(EventKind.Z_AXIS,),
        stop_on=(EventKind.Z_AXIS,),
        stop_direction=1,
    )
    traj = integrate(VectorFieldId.ZW, p, (z0, 0.0), Direction.FORWARD, spec)
    if traj.terminal is not Terminal.STOP_EVENT:
        raise NoReturn(
            f"orbit from ({z0}, 0) ended with {traj.terminal.value} before returning.",
            traj.terminal,
            traj,
        )
    z_b = traj.events[-1].state[0]
    if not z_b > z0:
        raise ReturnMapViolation(f"return abscissa {z_b!r} does not exceed start {z0!r}.")
    return z_b


def dr_dparam(traj: Trajectory) -> np.ndarray:
    """dr/ds (dr/dt in the XY and UW charts) at every sample of `traj`, continuation excluded."""
    p = traj.params
    n = p.n
    if traj.vf is VectorFieldId.ZW:
        z = traj.y[:, 0]
        if np.any(z <= 0.0):
            raise DomainError("arc length needs z > 0 at every sample.")
        return dr_ds_factor(p) * z ** (-2.0 / (n + 2))
    if traj.vf is VectorFieldId.XY:
        return 2.0 * (n - 1) * traj.y[:, 0]
    return dr_ds_factor(p) * (n + 2) * traj.y[:, 0] ** (n - 1)


def arc_length(traj: Trajectory) -> np.ndarray:
    """Cumulative r along the samples of `traj` (continuation excluded), r = 0 at the first sample.

    Uses the endpoint-corrected trapezoid rule with the exact derivative of dr/ds.
    """
    n = traj.params.n
    g = dr_dparam(traj)
    if traj.vf is VectorFieldId.ZW:
        dg = -(2.0 / (n + 2)) * g / traj.y[:, 0] * traj.y[:, 1]
    elif traj.vf is VectorFieldId.XY:
        dg = 2.0 * (n - 1) * traj.f[:, 0]
    else:
        u = traj.y[:, 0]
        dg = dr_ds_factor(traj.params) * (n + 2) * (n - 1) * u ** (n - 2) * traj.f[:, 0]
    ds = np.diff(traj.s)
    pieces = 0.5 * ds * (g[:-1] + g[1:]) + ds * ds / 12.0 * (dg[:-1] - dg[1:])
    return np.concatenate([[0.0], np.cumsum(pieces)])


def to_xy(p: SolitonParams, traj: Trajectory) -> np.ndarray:
    """(x, y) at every ZW sample of `traj`."""
    if traj.vf is not VectorFieldId.ZW:
        raise ParameterError("to_xy expects a ZW trajectory.")
    out = np.empty_like(traj.y)
    for index, (z, w) in enumerate(traj.y):
        cp = xy_from_zw(p, PhasePoint(float(z), float(w)))
        out[index] = (cp.first, cp.second)
    return out
