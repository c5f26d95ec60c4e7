import unittest
from dataclasses import replace
import numpy as np

from rmfnn_app.utils.constants import ProblemId
from rmfnn_app.utils.exceptions import DesignError, NormalizationError, InvalidInput, OutOfDomain, \
    UnsupportedProblem
from rmfnn_app.utils.FidelityManager import FidelityManager, FidelityPair, UniformGridStride, UniformGridCount, \
    UniformRandom, Normalization, PROVENANCE_REAL, PROVENANCE_SYNTHETIC
from rmfnn_app.utils.ForwardModels import ForwardModels, domain_for


class DesignTestCase(unittest.TestCase):
    """
    Test cases for the experimental designs.
    """

    def test_01_grid_stride(self):
        """Tests that every stride-th grid point goes to the first set."""
        plan = FidelityManager.build_design(domain_for('ivp'), 11, UniformGridStride(2))
        np.testing.assert_allclose(plan.points[:, 0], np.linspace(-1.0, 1.0, 11))
        self.assertEqual(plan.n_i, 6)
        self.assertEqual(plan.n_ii, 5)
        self.assertTrue(plan.first_set[0] and plan.first_set[10])
        with self.assertRaises(DesignError):
            FidelityManager.build_design(domain_for('ivp'), 11, UniformGridStride(1))

    def test_02_grid_count_reproduces_published_pairs(self):
        """Tests that the count rule selects exactly N_I of N grid points."""
        domain = domain_for(ProblemId.WAVE_IBVP)
        for n_i, n in ((324, 3498), (451, 4961), (714, 8003)):
            plan = FidelityManager.build_design(domain, n, UniformGridCount(n_i))
            self.assertEqual(plan.n, n)
            self.assertEqual(plan.n_i, n_i)
            self.assertTrue(np.all(domain.contains(plan.points)))
        plan = FidelityManager.build_design(domain_for('ivp'), 241, UniformGridCount(25))
        self.assertEqual(plan.n_i, 25)

    def test_03_grid_shape(self):
        """Tests the factorization of two-dimensional grids."""
        shape = FidelityManager.grid_shape(domain_for('wave'), 3498)
        self.assertEqual(shape[0] * shape[1], 3498)
        with self.assertRaises(DesignError):
            FidelityManager.grid_shape(domain_for('wave'), 7)
        with self.assertRaises(DesignError):
            FidelityManager.build_design(domain_for('pulsed'), 16, UniformGridStride(2))

    def test_04_random_design_is_seeded(self):
        """Tests that the random design depends on the seed only."""
        domain = domain_for('pulsed')
        first = FidelityManager.build_design(domain, 50, UniformRandom(3))
        second = FidelityManager.build_design(domain, 50, UniformRandom(3))
        other = FidelityManager.build_design(domain, 50, UniformRandom(4))
        np.testing.assert_array_equal(first.points, second.points)
        np.testing.assert_array_equal(first.first_set, second.first_set)
        self.assertFalse(np.array_equal(first.points, other.points))
        self.assertEqual(first.n_i, 25)
        self.assertTrue(np.all(domain.contains(first.points)))
        self.assertEqual(FidelityManager.build_design(domain, 50, UniformRandom(3, stride=1)).n_i, 50)

    def test_05_design_errors(self):
        """Tests the rejected designs."""
        with self.assertRaises(DesignError):
            FidelityManager.build_design(domain_for('ivp'), 1, UniformGridStride(2))
        with self.assertRaises(DesignError):
            FidelityManager.build_design(domain_for('ivp'), 10, UniformGridCount(11))
        with self.assertRaises(DesignError):
            FidelityManager.build_design(domain_for('ivp'), 10, UniformGridCount(4, grid_shape=(5,)))

    def test_06_summary(self):
        """Tests the plan summary."""
        summary = FidelityManager.build_design(domain_for('ivp'), 10, UniformGridCount(4)).summary()
        self.assertDictEqual(summary, {'rule': 'UniformGridCount', 'rule_args': {'n_i': 4, 'grid_shape': None},
                                       'n': 10, 'n_i': 4, 'n_ii': 6})


class NormalizationTestCase(unittest.TestCase):
    """
    Test cases for the normalization of parameter points.
    """

    def test_01_apply_and_invert(self):
        """Tests that the domain box is mapped onto the unit cube and back."""
        normalization = Normalization.of_domain(domain_for('pulsed'))
        corners = np.array([domain_for('pulsed').lower, domain_for('pulsed').upper])
        np.testing.assert_allclose(normalization.apply(corners), [[0.0] * 4, [1.0] * 4])
        points = np.random.default_rng(0).random((10, 4))
        np.testing.assert_allclose(normalization.apply(normalization.invert(points)), points, atol=1e-14)

    def test_02_constant_column(self):
        """Tests that a constant column gets a unit width."""
        normalization = Normalization.of_values(np.array([[1.0, 2.0], [1.0, 4.0]]))
        self.assertEqual(normalization.lower, (1.0, 2.0))
        self.assertEqual(normalization.upper, (2.0, 4.0))

    def test_03_degenerate_box(self):
        """Tests that an empty box is rejected."""
        with self.assertRaises(NormalizationError):
            Normalization((0.0, 1.0), (1.0, 1.0))
        with self.assertRaises(NormalizationError):
            Normalization((0.0,), (1.0, 2.0))


class FidelityManagerTestCase(unittest.TestCase):
    """
    Test cases for the fidelity pairs and the assembled datasets.
    """

    def test_01_pairs(self):
        """Tests the fidelity pairs of the problems."""
        ivp = FidelityManager.pair_for('ivp')
        self.assertEqual(ivp.ratio_s, 5.0)
        self.assertEqual((ivp.h_hf, ivp.h_lf), (0.1, 0.5))
        pulsed = FidelityManager.pair_for('pulsed')
        self.assertIsNone(pulsed.ratio_s)
        points = np.array([[10.0, 1.0, 0.1, 4.2]])
        np.testing.assert_array_equal(pulsed.q_hf(points), ForwardModels.pulsed_exact(points))
        with self.assertRaises(InvalidInput):
            FidelityManager.pair_for('ivp', 0.5, 0.1)
        with self.assertRaises(InvalidInput):
            FidelityPair('ivp', domain_for('ivp'), ivp.q_lf, ivp.q_hf, ratio_s=0.5)

    def test_02_exact_models(self):
        """Tests that only the problems with a closed form have an exact model."""
        exact = FidelityManager.exact_model('ivp')
        np.testing.assert_array_equal(exact(np.array([[0.3]])), ForwardModels.ivp_exact(np.array([0.3])))
        with self.assertRaises(UnsupportedProblem):
            FidelityManager.exact_model(ProblemId.DAMPED_OSCILLATOR)

    def test_03_assemble(self):
        """Tests that high-fidelity values are computed on the first set only."""
        pair = FidelityManager.pair_for('ivp')
        plan = FidelityManager.build_design(pair.domain, 21, UniformGridStride(4))
        data = FidelityManager.assemble(pair, plan)
        self.assertEqual(data.n, 21)
        np.testing.assert_array_equal(data.has_hf, plan.first_set)
        np.testing.assert_array_equal(data.q_lf, pair.q_lf(plan.points))
        np.testing.assert_array_equal(data.q_hf[plan.first_set], pair.q_hf(plan.theta_I))
        self.assertTrue(np.all(data.provenance == PROVENANCE_REAL))
        self.assertGreater(pair.cost_hf_s, 0.0)

    def test_04_assemble_with_workers(self):
        """Tests that the worker pool keeps the record order."""
        pair = FidelityManager.pair_for('pulsed')
        plan = FidelityManager.build_design(pair.domain, 40, UniformRandom(1))
        serial = FidelityManager.assemble(pair, plan)
        parallel = FidelityManager.assemble(pair, plan, workers=4)
        np.testing.assert_array_equal(serial.q_lf, parallel.q_lf)
        np.testing.assert_array_equal(serial.q_hf, parallel.q_hf)

    def test_05_evaluation_error_names_the_point(self):
        """Tests that a failing evaluation names the offending parameter point."""
        points = np.array([[10.0, 1.0, 0.1, 4.2], [70.0, 1.0, 0.1, 4.2]])
        with self.assertRaises(OutOfDomain) as context:
            FidelityManager.evaluate(ForwardModels.pulsed_exact, points, 'High-fidelity')
        self.assertIn('theta = [70.0', str(context.exception))

    def test_06_normalize_round_trip(self):
        """Tests that normalizing keeps the targets and maps the parameters to the unit cube."""
        pair = FidelityManager.pair_for('pulsed')
        data = FidelityManager.assemble(pair, FidelityManager.build_design(pair.domain, 20, UniformRandom(2)))
        normalized = FidelityManager.normalize(data)
        self.assertTrue(normalized.normalized)
        self.assertTrue(np.all((normalized.theta >= 0) & (normalized.theta <= 1)))
        np.testing.assert_array_equal(normalized.q_hf, data.q_hf)
        np.testing.assert_allclose(FidelityManager.denormalize(normalized).theta, data.theta)
        self.assertIs(FidelityManager.normalize(normalized), normalized)

    def test_07_synthetic_records_need_values(self):
        """Tests that a synthetic record without a high-fidelity value is rejected."""
        pair = FidelityManager.pair_for('ivp')
        data = FidelityManager.assemble(pair, FidelityManager.build_design(pair.domain, 6, UniformGridStride(2)))
        provenance = data.provenance.copy()
        provenance[1] = PROVENANCE_SYNTHETIC
        with self.assertRaises(InvalidInput):
            replace(data, provenance=provenance)

    def test_08_residual_bound(self):
        """Tests the residual bound (1 + s^q) eps_tol."""
        self.assertAlmostEqual(FidelityManager.residual_bound(5.0, 2.0, 1e-2), 0.26)
        with self.assertRaises(InvalidInput):
            FidelityManager.residual_bound(1.0, 2.0, 1e-2)

    def test_09_residual_ratio_of_pulsed_pair(self):
        """Tests that the pulsed residual is much smaller than the high-fidelity response on a grid."""
        pair = FidelityManager.pair_for('pulsed')
        grid = FidelityManager.tensor_grid(pair.domain, (8, 8, 8, 8))
        residual_max, hf_max, ratio = FidelityManager.residual_ratio(pair, grid)
        self.assertLess(ratio, 0.5)
        self.assertAlmostEqual(ratio, residual_max / hf_max)

    def test_10_measure_costs(self):
        """Tests that the measured costs are stored on the pair."""
        pair = FidelityManager.pair_for('ivp')
        w_lf, w_hf = FidelityManager.measure_costs(pair, np.array([[0.1], [0.2]]), repeats=3)
        self.assertGreater(w_hf, 0.0)
        self.assertEqual((pair.cost_lf_s, pair.cost_hf_s), (w_lf, w_hf))
        with self.assertRaises(InvalidInput):
            FidelityManager.measure_costs(pair, np.array([[0.1]]), repeats=0)

    def test_11_residual_bound_grows_with_its_arguments(self):
        """Tests that the residual bound increases strictly in s, q and eps_tol."""
        ratios = [1.5, 2.0, 4.0, 8.0]
        bounds = [FidelityManager.residual_bound(s, 2.0, 1e-2) for s in ratios]
        self.assertTrue(all(left < right for left, right in zip(bounds, bounds[1:])))
        bounds = [FidelityManager.residual_bound(5.0, q, 1e-2) for q in (0.5, 1.0, 2.0, 3.0)]
        self.assertTrue(all(left < right for left, right in zip(bounds, bounds[1:])))
        bounds = [FidelityManager.residual_bound(5.0, 2.0, eps) for eps in (1e-4, 1e-3, 1e-2, 1e-1)]
        self.assertTrue(all(left < right for left, right in zip(bounds, bounds[1:])))
