from __future__ import annotations

import math
import unittest

import numpy as np

from yamabe_phase.asymptotics import (
    Divergence,
    EndDirection,
    InsufficientSamples,
    SeedKind,
    SeriesError,
    TailFit,
    completeness_integral,
    fit_tail,
    printed_tail_recurrence,
    rotational_saddle_seed,
    separation_slope,
    shrink_origin_seed,
    shrink_tail_seed,
    steady_origin_seed,
    validity_radius,
    verdict_from_fit,
)
from yamabe_phase.core import DomainError, ParameterError, params_from_lambda, with_rbar
from yamabe_phase.dynsys import VectorFieldId
from yamabe_phase.integrate import Direction, StopSpec, integrate


class TailSeriesTests(unittest.TestCase):
    def test_leading_coefficients_at_n6(self) -> None:
        p = params_from_lambda(6, "shrinking", 1.0)
        seed = shrink_tail_seed(p, 6)
        self.assertEqual(seed.kind, SeedKind.SHRINK_TAIL)
        self.assertEqual(seed.coeffs[0], -1.0)
        self.assertAlmostEqual(seed.coeffs[1], -0.5, places=14)
        self.assertAlmostEqual(seed.coeffs[2], -0.5, places=14)

    def test_first_two_orders_in_general(self) -> None:
        for n, lam in ((5, 1.0), (6, 3.0), (9, 0.8)):
            p = params_from_lambda(n, "shrinking", lam)
            a = shrink_tail_seed(p, 3).coeffs
            self.assertAlmostEqual(a[1], p.beta - p.lam, places=12, msg=f"n={n}")

    def test_printed_recurrence_agrees_with_matching(self) -> None:
        for lam in (1.0, 3.0):
            p = params_from_lambda(6, "shrinking", lam)
            matched = shrink_tail_seed(p, 11).coeffs
            printed = printed_tail_recurrence(lam, 11)
            for i, (a, b) in enumerate(zip(matched, printed)):
                self.assertTrue(math.isclose(a, b, rel_tol=1e-9, abs_tol=1e-12), msg=f"i={i}: {a} vs {b}")

    def test_tail_seed_solves_the_equation(self) -> None:
        p = params_from_lambda(7, "shrinking", 1.2)
        seed = shrink_tail_seed(p, 12)
        self.assertLess(seed.residual(1e-2), 1e-10)

    def test_tail_seed_evaluation(self) -> None:
        p = params_from_lambda(6, "shrinking", 1.0)
        seed = shrink_tail_seed(p)
        point, slope = seed.evaluate(1e4)
        self.assertLess(point.w, 0.0)
        self.assertAlmostEqual(point.w / -100.0, 1.0, delta=0.01)
        self.assertLess(slope, 0.0)
        self.assertGreater(seed.validity_hint, 0.0)
        self.assertLess(seed.z_min_valid, 1e3)
        with self.assertRaises(DomainError):
            seed.evaluate(0.0)
        with self.assertRaises(SeriesError):
            seed.evaluate_chart(0.1)

    def test_tail_seed_needs_shrinking_and_terms(self) -> None:
        with self.assertRaises(ParameterError):
            shrink_tail_seed(params_from_lambda(6, "steady", 1.0))
        with self.assertRaises(SeriesError):
            shrink_tail_seed(params_from_lambda(6, "shrinking", 1.0), 0)

    def test_exceptional_lambda_warns(self) -> None:
        with self.assertLogs("yamabe_phase.asymptotics", level="WARNING"):
            shrink_tail_seed(params_from_lambda(6, "shrinking", 2.0), 4)


class OriginSeriesTests(unittest.TestCase):
    def test_leading_coefficient(self) -> None:
        for n in range(7, 13):
            p = params_from_lambda(n, "shrinking", 1.0)
            a0 = shrink_origin_seed(p, 4).coeffs[0]
            self.assertAlmostEqual((n - 2) * a0 * a0, (n + 2) * p.lam, places=10, msg=f"n={n}")

    def test_steady_origin_residual(self) -> None:
        p = params_from_lambda(8, "steady", 1.0)
        seed = steady_origin_seed(p, 12)
        self.assertLess(seed.residual(0.05), 1e-12)
        chart = seed.evaluate_chart(0.05)
        point, _ = seed.evaluate(0.05**10)
        self.assertAlmostEqual(chart.second, point.w, places=12)

    def test_origin_seed_restrictions(self) -> None:
        with self.assertRaises(ParameterError):
            shrink_origin_seed(params_from_lambda(6, "shrinking", 1.0))
        with self.assertRaises(ParameterError):
            steady_origin_seed(params_from_lambda(8, "shrinking", 1.0))


class RotationalSeriesTests(unittest.TestCase):
    def _seed(self, n: int):
        q = with_rbar(params_from_lambda(n, "shrinking", 1.0), float((n - 1) * (n - 2)))
        return q, rotational_saddle_seed(q, 8)

    def test_saddle_eigenvalues(self) -> None:
        _, seed3 = self._seed(3)
        self.assertEqual(seed3.eigenvalues, (4.0, -4.0))
        _, seed6 = self._seed(6)
        self.assertEqual(seed6.eigenvalues, (10.0, -40.0))

    def test_second_order_coefficient(self) -> None:
        for n in (3, 4, 6):
            q, seed = self._seed(n)
            self.assertEqual(seed.coeffs[0], 1.0)
            self.assertEqual(seed.coeffs[1], 0.0)
            self.assertAlmostEqual(seed.coeffs[2], -(1.0 + q.rho) / (2 * n * (n - 1)), places=14)
            self.assertLess(seed.residual(1e-2), 1e-12)


class ValidityTests(unittest.TestCase):
    def test_root_test_radius(self) -> None:
        self.assertEqual(validity_radius((1.0, 0.0, 0.0)), math.inf)
        self.assertAlmostEqual(validity_radius((1.0, 0.5, 0.25)), 1.0, places=12)
        self.assertAlmostEqual(validity_radius((2.0, 0.0, 8.0)), 0.25, places=12)


class CompletenessTests(unittest.TestCase):
    def test_fit_recovers_tail_exponent(self) -> None:
        p = params_from_lambda(6, "shrinking", 1.0)
        z = np.geomspace(1.0, 1e4, 200)
        w = -(z**p.beta)
        fit = fit_tail(p, z, w, EndDirection.TOWARD_LARGE_END)
        self.assertAlmostEqual(fit.exponent, -0.75, places=9)
        self.assertIs(verdict_from_fit(fit, EndDirection.TOWARD_LARGE_END), Divergence.DIVERGES)

    def test_fit_needs_samples(self) -> None:
        p = params_from_lambda(6, "shrinking", 1.0)
        z = np.geomspace(1.0, 2.0, 5)
        with self.assertRaises(InsufficientSamples):
            fit_tail(p, z, -z, EndDirection.TOWARD_LARGE_END)

    def test_verdict_thresholds(self) -> None:
        def fit(exponent: float) -> TailFit:
            return TailFit(exponent, 1.0, 0.0, 20)

        large = EndDirection.TOWARD_LARGE_END
        small = EndDirection.TOWARD_SMALL_END
        self.assertIs(verdict_from_fit(fit(-0.5), large), Divergence.DIVERGES)
        self.assertIs(verdict_from_fit(fit(-1.5), large), Divergence.CONVERGES)
        self.assertIs(verdict_from_fit(fit(-1.0), large), Divergence.INCONCLUSIVE)
        self.assertIs(verdict_from_fit(fit(-0.5), small), Divergence.CONVERGES)
        self.assertIs(verdict_from_fit(fit(-1.5), small), Divergence.DIVERGES)
        self.assertIs(verdict_from_fit(fit(-1.02), small), Divergence.INCONCLUSIVE)

    def test_invariant_line_ends(self) -> None:
        p = params_from_lambda(6, "steady", 1.0)
        toward_origin = integrate(VectorFieldId.ZW, p, (1.0, 1.0), Direction.BACKWARD, StopSpec(boundary=1e-3))
        small = completeness_integral(toward_origin, p, EndDirection.TOWARD_SMALL_END)
        self.assertIs(small.verdict, Divergence.CONVERGES)

        outward = integrate(VectorFieldId.ZW, p, (1.0, 1.0), Direction.FORWARD, StopSpec(escape_radius=1e4))
        large = completeness_integral(outward, p, EndDirection.TOWARD_LARGE_END)
        self.assertIs(large.verdict, Divergence.DIVERGES)
        self.assertAlmostEqual(large.fit.exponent, -0.25, places=6)
        self.assertEqual(large.to_dict()["verdict"], "Diverges")

    def test_separation_slope_approaches_one(self) -> None:
        p = params_from_lambda(6, "shrinking", 1.0)
        self.assertAlmostEqual(separation_slope(p), 1.0, delta=0.01)
        with self.assertRaises(ParameterError):
            separation_slope(p, 10.0, 1.0)


if __name__ == "__main__":
    unittest.main()
