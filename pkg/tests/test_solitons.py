from __future__ import annotations

import unittest

import numpy as np

from yamabe_phase.asymptotics import CompletenessVerdict, Divergence, EndDirection
from yamabe_phase.core import ParameterError, PhasePoint, params_from_lambda
from yamabe_phase.dynsys import Classification, VectorFieldId
from yamabe_phase.integrate import Direction, EventKind, StopSpec, integrate
from yamabe_phase.solitons import (
    CertificateKind,
    ClassificationFailed,
    SeedRejected,
    SolitonCertificate,
    SweepSpec,
    Verdict,
    approach_type,
    certify_steady_nonexistence,
    find_rotational,
    find_shrinker_gamma,
    product_profile,
    reconstruct_warp,
    residual_eq12,
    seed_consistency,
    sweep_grid,
    uniqueness_probe,
)


class ProfileTests(unittest.TestCase):
    def test_product_profile_solves_the_warp_equation(self) -> None:
        for n, lam in ((6, 1.0), (8, 2.0), (4, 0.9)):
            p = params_from_lambda(n, "shrinking", lam)
            profile = product_profile(p)
            self.assertLessEqual(residual_eq12(profile, p), 1e-12, msg=f"n={n}")
            self.assertTrue(np.all(profile.phi_prime == 0.0))

    def test_product_profile_needs_shrinking(self) -> None:
        with self.assertRaises(ParameterError):
            product_profile(params_from_lambda(6, "steady", 1.0))

    def test_residual_needs_five_points(self) -> None:
        p = params_from_lambda(6, "shrinking", 1.0)
        with self.assertRaises(ValueError):
            residual_eq12(product_profile(p, count=4), p)

    def test_invariant_line_reconstructs_an_exact_solution(self) -> None:
        p = params_from_lambda(6, "steady", 1.0)
        stop = StopSpec(max_span=5.0, max_rel_change=5e-3)
        traj = integrate(VectorFieldId.ZW, p, (1.0, 1.0), Direction.FORWARD, stop)
        profile = reconstruct_warp(traj, p, anchor=float(traj.s[0]))
        self.assertEqual(profile.r[0], 0.0)
        self.assertEqual(profile.r_origin, "anchor event")
        self.assertTrue(np.all(np.diff(profile.r) > 0.0))
        np.testing.assert_allclose(profile.phi_prime, profile.phi**-2, rtol=1e-9)
        np.testing.assert_allclose(profile.phi_second, -2.0 * profile.phi**-5, rtol=1e-9)
        self.assertLess(residual_eq12(profile, p), 1e-9)
        self.assertEqual(len(profile.rows()), len(profile))

    def test_residual_does_not_depend_on_sample_spacing(self) -> None:
        p = params_from_lambda(6, "shrinking", 1.0)
        stop = StopSpec(max_span=8.0, max_rel_change=0.2)
        traj = integrate(VectorFieldId.ZW, p, (0.5, 0.0), Direction.FORWARD, stop)
        profile = reconstruct_warp(traj, p, anchor=float(traj.s[0]))
        steps = np.diff(profile.r)
        self.assertGreater(float((steps[1:] / steps[:-1]).max()), 1.5)
        self.assertLessEqual(residual_eq12(profile, p), 1e-9)
        thinned = profile.where(np.arange(len(profile)) % 3 == 0)
        self.assertLessEqual(residual_eq12(thinned, p), 1e-9)


class ShrinkerGammaTests(unittest.TestCase):
    @classmethod
    def setUpClass(cls) -> None:
        cls.p = params_from_lambda(6, "shrinking", 1.0)
        cls.cert = find_shrinker_gamma(cls.p)

    def test_certificate_is_complete_non_product(self) -> None:
        self.assertIs(self.cert.kind, CertificateKind.SHRINKER_GAMMA)
        self.assertIs(self.cert.verdict, Verdict.COMPLETE_NON_PRODUCT)
        self.assertTrue(self.cert.phi_positive)

    def test_both_ends_diverge(self) -> None:
        large, small = self.cert.completeness
        self.assertIs(large.direction, EndDirection.TOWARD_LARGE_END)
        self.assertIs(large.verdict, Divergence.DIVERGES)
        self.assertAlmostEqual(large.fit.exponent, -0.75, delta=0.05)
        self.assertIs(small.verdict, Divergence.DIVERGES)

    def test_first_rising_crossing_lies_left_of_xi(self) -> None:
        z0 = self.cert.details["z0"]
        self.assertIsNotNone(z0)
        self.assertGreater(z0, 0.0)
        self.assertLess(z0, self.p.xi)
        self.assertEqual(self.cert.details["approach"], Classification.STABLE_FOCUS.value)

    def test_profile_solves_the_warp_equation_with_positive_curvature(self) -> None:
        self.assertLessEqual(self.cert.residual_max, 1e-6)
        self.assertGreater(float(self.cert.profile.phi.min()), 0.0)
        self.assertGreater(float(self.cert.profile.scalar_curvature.min()), 0.0)
        self.assertGreater(self.cert.details["scalarCurvatureMin"], 0.0)

    def test_certificate_serializes(self) -> None:
        payload = self.cert.to_dict()
        self.assertEqual(payload["verdict"], "CompleteNonProduct")
        self.assertEqual(payload["params"]["lambda"], 1.0)
        self.assertIn("tolerances", payload)
        self.assertEqual(payload["trajectories"][0]["vf"], "zw")

    def test_seed_below_validity_is_rejected(self) -> None:
        with self.assertRaises(SeedRejected):
            find_shrinker_gamma(self.p, z_seed=1e-6)

    def test_steady_regime_is_rejected(self) -> None:
        with self.assertRaises(ParameterError):
            find_shrinker_gamma(params_from_lambda(6, "steady", 1.0))


class ShrinkerHigherDimensionTests(unittest.TestCase):
    def test_n8_gamma_is_complete_with_focus_approach(self) -> None:
        p = params_from_lambda(8, "shrinking", 1.0)
        cert = find_shrinker_gamma(p)
        self.assertIs(cert.verdict, Verdict.COMPLETE_NON_PRODUCT)
        self.assertEqual(cert.details["approach"], Classification.STABLE_FOCUS.value)
        self.assertLessEqual(cert.residual_max, 1e-6)
        self.assertTrue(all(end.verdict is Divergence.DIVERGES for end in cert.completeness))


class CertificateInvariantTests(unittest.TestCase):
    def setUp(self) -> None:
        self.p = params_from_lambda(6, "shrinking", 1.0)
        self.diverges = CompletenessVerdict(EndDirection.TOWARD_LARGE_END, Divergence.DIVERGES, 1.0, "z^-0.75")
        self.converges = CompletenessVerdict(EndDirection.TOWARD_SMALL_END, Divergence.CONVERGES, 0.5, "finite")

    def _certificate(self, **overrides) -> SolitonCertificate:
        fields = dict(
            params=self.p,
            kind=CertificateKind.ROTATIONAL,
            verdict=Verdict.COMPLETE_NON_PRODUCT,
            completeness=(self.diverges, self.diverges),
            phi_positive=True,
            residual_max=1e-9,
        )
        fields.update(overrides)
        return SolitonCertificate(**fields)

    def test_complete_verdict_needs_two_divergent_ends(self) -> None:
        self.assertTrue(self._certificate().meets_completeness())
        with self.assertRaises(ValueError):
            self._certificate(completeness=(self.diverges, self.converges))
        with self.assertRaises(ValueError):
            self._certificate(phi_positive=False)
        with self.assertRaises(ValueError):
            self._certificate(residual_max=1e-5)

    def test_missing_small_end_counts_only_with_pole_closure(self) -> None:
        with self.assertRaises(ValueError):
            self._certificate(completeness=(self.diverges, None))
        with self.assertRaises(ValueError):
            self._certificate(completeness=(self.diverges, None), pole_closure=False)
        cert = self._certificate(completeness=(self.diverges, None), pole_closure=True)
        self.assertTrue(cert.end_complete(1))
        with self.assertRaises(ValueError):
            self._certificate(completeness=(None, self.diverges), pole_closure=True)


class ShrinkerBelowThresholdTests(unittest.TestCase):
    def test_below_threshold_is_never_certified(self) -> None:
        p = params_from_lambda(6, "shrinking", 0.4)
        with self.assertLogs("yamabe_phase.solitons", level="WARNING"):
            cert = find_shrinker_gamma(p)
        self.assertIsNot(cert.verdict, Verdict.COMPLETE_NON_PRODUCT)
        self.assertTrue(any(note.startswith("below threshold") for note in cert.notes))

    def test_threshold_value_follows_the_invariant_line_into_the_origin(self) -> None:
        p = params_from_lambda(6, "shrinking", 0.5)
        with self.assertLogs("yamabe_phase.solitons", level="WARNING"):
            cert = find_shrinker_gamma(p)
        z, w = cert.trajectories[0].zw_arrays()
        window = (z >= 1.0) & (z <= 1e3)
        self.assertGreater(int(window.sum()), 10)
        deviation = np.abs(w[window] + np.sqrt(z[window])) / np.sqrt(z[window])
        self.assertLessEqual(float(deviation.max()), 1e-3)
        self.assertFalse(cert.phi_positive)
        self.assertIs(cert.verdict, Verdict.NO_COMPLETE_NON_PRODUCT)


class SeparatrixStabilityTests(unittest.TestCase):
    def setUp(self) -> None:
        self.p = params_from_lambda(6, "shrinking", 1.0)

    def test_perturbed_tails_leave_through_both_sides(self) -> None:
        above, below = uniqueness_probe(self.p)
        self.assertTrue(above.exited)
        self.assertTrue(below.exited)
        self.assertIs(above.event, EventKind.S1_CROSSING)
        self.assertIs(below.event, EventKind.TRAP_ENTRY)

    def test_series_and_integration_agree(self) -> None:
        self.assertLess(seed_consistency(self.p), 1e-6)
        with self.assertRaises(ParameterError):
            seed_consistency(self.p, z_far=1e3, z_near=1e4)

    def test_approach_type(self) -> None:
        self.assertIs(approach_type(self.p), Classification.STABLE_FOCUS)
        self.assertIs(approach_type(params_from_lambda(6, "shrinking", 3.0)), Classification.STABLE_NODE)


class SteadySweepTests(unittest.TestCase):
    def test_grid_skips_the_invariant_line_for_n6(self) -> None:
        p = params_from_lambda(6, "steady", 1.0)
        spec = SweepSpec(grid=(3, 3), w_range=(0.0, 2.0))
        starts = sweep_grid(p, spec)
        self.assertEqual(len(starts), 6)
        self.assertNotIn(PhasePoint(1.0, 1.0), starts)

    def test_invalid_sweep_spec(self) -> None:
        with self.assertRaises(ParameterError):
            SweepSpec(grid=(0, 3))
        with self.assertRaises(ParameterError):
            SweepSpec(z_range=(0.0, 1.0))

    def test_n8_sweep_finds_a_convergent_end_everywhere(self) -> None:
        p = params_from_lambda(8, "steady", 1.0)
        cert = certify_steady_nonexistence(p, SweepSpec(grid=(4, 4)), threads=2)
        self.assertIs(cert.kind, CertificateKind.STEADY_SWEEP)
        self.assertIs(cert.verdict, Verdict.NO_COMPLETE_NON_PRODUCT)
        cases = cert.details["cases"]
        self.assertEqual(len(cases), 16)
        self.assertTrue(all(case["convergesSomewhere"] for case in cases))

    def test_shrinking_regime_is_rejected(self) -> None:
        with self.assertRaises(ParameterError):
            certify_steady_nonexistence(params_from_lambda(8, "shrinking", 1.0))


class SteadyDimensionSweepTests(unittest.TestCase):
    @classmethod
    def setUpClass(cls) -> None:
        cls.certs = {
            n: certify_steady_nonexistence(params_from_lambda(n, "steady", 1.0), SweepSpec(), threads=4)
            for n in (3, 5, 6, 8)
        }

    def test_full_grid_has_no_complete_non_product(self) -> None:
        for n, cert in self.certs.items():
            self.assertIs(cert.verdict, Verdict.NO_COMPLETE_NON_PRODUCT, msg=f"n={n}")
            cases = cert.details["cases"]
            self.assertTrue(all(case["convergesSomewhere"] for case in cases), msg=f"n={n}")

    def test_n6_special_trajectory_stays_on_the_invariant_line(self) -> None:
        special = self.certs[6].details["specialTrajectory"]
        self.assertLessEqual(special["maxDeviation"], 1e-8)
        self.assertEqual(special["smallEnd"]["verdict"], "Converges")

    def test_n5_has_no_vertical_asymptote(self) -> None:
        self.assertEqual(self.certs[5].details["verticalAsymptotes"], 0)


class RotationalTests(unittest.TestCase):
    def test_n3_steady_shot_closes_at_the_pole(self) -> None:
        cert = find_rotational(params_from_lambda(3, "steady", 1.0))
        self.assertIs(cert.kind, CertificateKind.ROTATIONAL)
        self.assertIs(cert.verdict, Verdict.COMPLETE_NON_PRODUCT)
        self.assertIs(cert.pole_closure, True)
        self.assertIsNone(cert.completeness[1])
        self.assertIs(cert.completeness[0].verdict, Divergence.DIVERGES)
        self.assertGreaterEqual(cert.completeness[0].fit.exponent, -1.0)
        self.assertLessEqual(cert.residual_max, 1e-6)

    def test_n6_shrinking_shot_reaches_the_rest_point(self) -> None:
        cert = find_rotational(params_from_lambda(6, "shrinking", 1.0))
        self.assertIs(cert.verdict, Verdict.COMPLETE_NON_PRODUCT)
        self.assertIs(cert.pole_closure, True)
        payload = cert.to_dict()
        self.assertIsNone(payload["completeness"][1])
        self.assertIs(payload["poleClosure"], True)
        self.assertEqual(cert.details["terminal"], "ConvergedToCriticalPoint")

    def test_shot_from_the_saddle_itself_fails(self) -> None:
        with self.assertRaises(ClassificationFailed):
            find_rotational(params_from_lambda(3, "steady", 1.0), offset=0.0)

    def test_offset_beyond_series_radius_is_rejected(self) -> None:
        with self.assertRaises(SeedRejected):
            find_rotational(params_from_lambda(3, "shrinking", 1.0), offset=10.0)


if __name__ == "__main__":
    unittest.main()
