from __future__ import annotations

import unittest

import numpy as np

from yamabe_phase.core import ParameterError, dr_ds_factor, params_from_lambda
from yamabe_phase.dynsys import VectorFieldId
from yamabe_phase.integrate import (
    Direction,
    EventKind,
    InvalidStart,
    StopSpec,
    Terminal,
    arc_length,
    first_return_z,
    integrate,
    to_xy,
    z_axis_crossings,
)


class InvariantLineTests(unittest.TestCase):
    """For n = 6 steady, w = 1 is invariant and z = z0 + s along it."""

    def setUp(self) -> None:
        self.p = params_from_lambda(6, "steady", 1.0)

    def test_span_is_respected_forward(self) -> None:
        traj = integrate(VectorFieldId.ZW, self.p, (1.0, 1.0), Direction.FORWARD, StopSpec(max_span=5.0))
        self.assertIs(traj.terminal, Terminal.SPAN_EXHAUSTED)
        z, w = traj.final_state
        self.assertAlmostEqual(z, 6.0, places=9)
        self.assertAlmostEqual(w, 1.0, places=12)
        self.assertAlmostEqual(float(traj.s[-1]), 5.0, places=12)
        self.assertTrue(np.all(np.diff(traj.s) > 0.0))

    def test_backward_runs_the_parameter_down(self) -> None:
        traj = integrate(VectorFieldId.ZW, self.p, (6.0, 1.0), "backward", StopSpec(max_span=5.0))
        self.assertIs(traj.direction, Direction.BACKWARD)
        self.assertAlmostEqual(traj.final_state[0], 1.0, places=9)
        self.assertAlmostEqual(float(traj.s[-1]), -5.0, places=12)
        self.assertTrue(np.all(np.diff(traj.s) < 0.0))

    def test_arc_length_matches_closed_form(self) -> None:
        traj = integrate(VectorFieldId.ZW, self.p, (1.0, 1.0), Direction.FORWARD, StopSpec(max_span=5.0))
        expected = dr_ds_factor(self.p) * (4.0 / 3.0) * (6.0**0.75 - 1.0)
        r = arc_length(traj)
        self.assertEqual(r[0], 0.0)
        self.assertAlmostEqual(float(r[-1]) / expected, 1.0, places=6)

    def test_escape_is_located(self) -> None:
        traj = integrate(VectorFieldId.ZW, self.p, (1.0, 1.0), Direction.FORWARD, StopSpec(escape_radius=10.0))
        self.assertIs(traj.terminal, Terminal.ESCAPED)
        self.assertAlmostEqual(traj.final_state[0], 10.0, places=8)
        self.assertIs(traj.events[-1].kind, EventKind.ESCAPE)

    def test_to_xy_maps_every_sample(self) -> None:
        traj = integrate(VectorFieldId.ZW, self.p, (1.0, 1.0), Direction.FORWARD, StopSpec(max_span=1.0))
        xy = to_xy(self.p, traj)
        self.assertEqual(xy.shape, traj.y.shape)
        self.assertTrue(np.all(xy[:, 0] > 0.0))


class ToleranceTests(unittest.TestCase):
    def test_end_state_converges_as_tolerance_tightens(self) -> None:
        p = params_from_lambda(6, "shrinking", 1.0)

        def end_state(tol: float) -> np.ndarray:
            stop = StopSpec(max_span=5.0, atol=tol, rtol=tol)
            traj = integrate(VectorFieldId.ZW, p, (0.5, 0.0), Direction.FORWARD, stop)
            self.assertIs(traj.terminal, Terminal.SPAN_EXHAUSTED)
            return np.asarray(traj.final_state)

        reference = end_state(1e-12)
        self.assertLess(float(np.max(np.abs(end_state(1e-10) - reference))), 1e-7)
        self.assertLess(float(np.max(np.abs(end_state(1e-6) - reference))), 1e-3)


class BoundaryTests(unittest.TestCase):
    def test_boundary_hit_is_located(self) -> None:
        p = params_from_lambda(6, "steady", 1.0)
        traj = integrate(VectorFieldId.ZW, p, (1.0, -3.0), Direction.FORWARD, StopSpec(boundary=0.1))
        self.assertIs(traj.terminal, Terminal.HIT_BOUNDARY)
        self.assertAlmostEqual(traj.final_state[0], 0.1, places=6)
        self.assertIs(traj.events[-1].kind, EventKind.W_AXIS)

    def test_start_outside_half_plane_is_rejected(self) -> None:
        p = params_from_lambda(6, "steady", 1.0)
        with self.assertRaises(InvalidStart):
            integrate(VectorFieldId.ZW, p, (0.0, 1.0))
        with self.assertRaises(InvalidStart):
            integrate(VectorFieldId.ZW, p, (-1.0, 1.0))

    def test_small_z_continues_in_uw_chart(self) -> None:
        p = params_from_lambda(5, "steady", 1.0)
        stop = StopSpec(boundary=1e-9, chart_switch_z=1e-4)
        traj = integrate(VectorFieldId.ZW, p, (1.0, -3.0), Direction.FORWARD, stop)
        self.assertIs(traj.terminal, Terminal.STOP_EVENT)
        self.assertIsNotNone(traj.continuation)
        self.assertIs(traj.continuation.vf, VectorFieldId.UW_STEADY)
        self.assertIs(traj.continuation.terminal, Terminal.HIT_BOUNDARY)
        z, _ = traj.zw_arrays()
        self.assertEqual(z.size, len(traj) + len(traj.continuation) - 1)
        self.assertLess(float(z[-1]), 1e-4)


class ReturnMapTests(unittest.TestCase):
    def setUp(self) -> None:
        self.p = params_from_lambda(6, "shrinking", 1.0)

    def test_return_lies_between_start_and_xi(self) -> None:
        z_b = first_return_z(self.p, 0.5)
        self.assertGreater(z_b, 0.5)
        self.assertLess(z_b, self.p.xi)

    def test_return_map_is_monotone(self) -> None:
        starts = np.linspace(0.05, 0.95, 10)
        returns = [first_return_z(self.p, float(z0)) for z0 in starts]
        for z0, z_b in zip(starts, returns):
            self.assertGreater(z_b, z0)
            self.assertLess(z_b, self.p.xi)
        self.assertTrue(np.all(np.diff(returns) > 0.0))

    def test_successive_returns_climb_toward_xi(self) -> None:
        stop = StopSpec(target=(self.p.xi, 0.0), events=(EventKind.Z_AXIS,), max_span=60.0)
        for z0 in np.linspace(0.05, 0.95, 10):
            traj = integrate(VectorFieldId.ZW, self.p, (float(z0), 0.0), Direction.FORWARD, stop)
            chain = [float(z0)] + z_axis_crossings(traj, direction=1)
            self.assertTrue(np.all(np.diff(chain) > 0.0), msg=f"z0={z0}: {chain}")
            self.assertLess(chain[-1], self.p.xi)

    def test_rest_point_and_bad_starts(self) -> None:
        with self.assertRaises(InvalidStart):
            first_return_z(self.p, self.p.xi)
        with self.assertRaises(InvalidStart):
            first_return_z(self.p, 1.5)
        with self.assertRaises(ParameterError):
            first_return_z(params_from_lambda(6, "steady", 1.0), 0.5)

    def test_crossings_are_recorded_with_direction(self) -> None:
        stop = StopSpec(target=(self.p.xi, 0.0), events=(EventKind.Z_AXIS,), max_span=30.0)
        traj = integrate(VectorFieldId.ZW, self.p, (0.5, 0.0), Direction.FORWARD, stop)
        downward = z_axis_crossings(traj, direction=-1)
        upward = z_axis_crossings(traj, direction=1)
        self.assertGreaterEqual(len(downward), 1)
        self.assertGreater(downward[0], self.p.xi)
        self.assertGreaterEqual(len(upward), 1)
        self.assertLess(upward[0], self.p.xi)


if __name__ == "__main__":
    unittest.main()
