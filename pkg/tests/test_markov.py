# License: BSD 3 clause
"""Tests for the block-structured Markov chain layer."""

import math
import unittest
from itertools import product

import numpy as np
from numpy.testing import assert_allclose, assert_array_equal

from dmcl.markov import (
    Geometry,
    StepProbs,
    TransitionMatrix,
    assemble_transition_matrix,
    build_geometry_1d,
    build_geometry_grid2d,
    build_geometry_grid3d,
    build_geometry_lattice,
    column_drift,
    derive_step_probabilities,
    dump_matrix,
    evolve,
    load_matrix,
    matrix_power,
    observe,
    spectral_summary,
    stationary_distribution,
    verify_convergence_rate,
)
from dmcl.markov.utils import gth_stationary
from dmcl.utils.exceptions import ConvergenceError, DriftError, StabilityError
from dmcl.utils.testing import output_dir, reference_params, two_state_params, unlink


def two_state_matrix() -> TransitionMatrix:
    params = two_state_params()
    return assemble_transition_matrix(
        build_geometry_1d(params.n_free), derive_step_probabilities(params)
    )


class TestMarkov(unittest.TestCase):
    """Test class for geometries, matrix assembly and chain analyses."""

    @classmethod
    def setUpClass(cls):
        output_dir.mkdir(exist_ok=True)

    @classmethod
    def tearDownClass(cls):
        unlink(output_dir / "test_matrix_dump.txt")

    def test_step_probabilities_reference(self):
        sp = derive_step_probabilities(reference_params())
        self.assertAlmostEqual(sp.p_diff, 0.495, places=12)
        self.assertAlmostEqual(sp.p_bind, 4.95e-3, places=14)
        self.assertAlmostEqual(sp.p_unbind, 2.475e-5, places=16)

    def test_step_probabilities_out_of_range(self):
        with self.assertRaises(StabilityError):
            derive_step_probabilities(reference_params(dt=1e-3))
        with self.assertRaises(StabilityError):
            StepProbs(p_diff=0.1, p_bind=-0.1, p_unbind=0.0)

    def test_channel_params_validation(self):
        for changes in [{"n_free": 0}, {"dx": 0.0}, {"dt": -1.0}, {"k_off": -3.0}]:
            with self.subTest(changes=changes):
                with self.assertRaises(ValueError):
                    reference_params(**changes)

    def test_geometry_1d(self):
        geom = build_geometry_1d(3)
        self.assertEqual(geom.neighbors, ((1,), (0, 2), (1,)))
        self.assertEqual(geom.rx_adjacent, (2,))
        self.assertEqual(geom.n_states, 4)
        self.assertEqual(geom.degree(1), 2)

    def test_geometry_single_voxel(self):
        geom = build_geometry_1d(1)
        self.assertEqual(geom.neighbors, ((),))
        self.assertEqual(geom.rx_adjacent, (0,))

    def test_geometry_grid2d(self):
        geom = build_geometry_grid2d(3, 2, "top")
        self.assertEqual(geom.n_free, 6)
        # first axis varies fastest: voxel (x, y) has index x + 3 y
        self.assertEqual(geom.rx_adjacent, (3, 4, 5))
        self.assertEqual(geom.degree(0), 2)
        self.assertEqual(geom.degree(1), 3)
        self.assertEqual(geom.neighbors[4], (1, 3, 5))

    def test_geometry_grid3d(self):
        geom = build_geometry_grid3d(2, 2, 2, "back")
        self.assertEqual(geom.n_free, 8)
        self.assertEqual(geom.rx_adjacent, (4, 5, 6, 7))
        self.assertTrue(all(geom.degree(state) == 3 for state in range(8)))

    def test_geometry_lattice_two_bound_states(self):
        geom = build_geometry_lattice((4,), "left", n_bound=2)
        self.assertEqual(geom.rx_adjacent, (0,))
        assert_allclose(geom.alpha, [[0.5], [0.5]])
        assert_allclose(geom.beta, [[1.0, 1.0]])
        P = assemble_transition_matrix(geom, derive_step_probabilities(two_state_params()))
        self.assertEqual(P.n_states, 6)
        assert_allclose(P.entries[4:, 0], [0.15, 0.15], atol=1e-15)
        assert_allclose(P.entries[0, 4:], [0.2, 0.2], atol=1e-15)
        with self.assertRaisesRegex(ValueError, "Invalid edge id"):
            build_geometry_lattice((4,), "top")

    def test_geometry_invalid_face(self):
        for builder, face in [
            (lambda face: build_geometry_grid2d(2, 2, face), "front"),
            (lambda face: build_geometry_grid3d(2, 2, 2, face), "diagonal"),
        ]:
            with self.subTest(face=face):
                with self.assertRaisesRegex(ValueError, "Invalid edge id"):
                    builder(face)

    def test_geometry_asymmetric_neighbors(self):
        with self.assertRaisesRegex(ValueError, "not symmetric"):
            Geometry(
                n_free=2,
                neighbors=((1,), ()),
                rx_adjacent=(1,),
                n_bound=1,
                alpha=np.ones((1, 1)),
                beta=np.ones((1, 1)),
            )

    def test_assemble_small_chain(self):
        P = assemble_transition_matrix(
            build_geometry_1d(3), StepProbs(p_diff=0.2, p_bind=0.1, p_unbind=0.05)
        )
        expected = np.array(
            [
                [0.8, 0.2, 0.0, 0.0],
                [0.2, 0.6, 0.2, 0.0],
                [0.0, 0.2, 0.7, 0.05],
                [0.0, 0.0, 0.1, 0.95],
            ]
        )
        assert_allclose(P.entries, expected, rtol=0, atol=1e-15)
        assert_allclose(P.B, [[0.0, 0.0, 0.1]], atol=1e-15)
        assert_allclose(P.U, [[0.0], [0.0], [0.05]], atol=1e-15)
        assert_allclose(P.R, [[0.95]], atol=1e-15)
        self.assertLessEqual(column_drift(P.entries), 1e-12)

    def test_assemble_reference(self):
        params = reference_params()
        P = assemble_transition_matrix(
            build_geometry_1d(params.n_free), derive_step_probabilities(params)
        )
        self.assertEqual(P.entries.shape, (101, 101))
        self.assertTrue((P.entries >= 0).all())
        self.assertLessEqual(column_drift(P.entries), 1e-12)
        self.assertFalse(P.entries.flags.writeable)

    def test_assemble_unstable(self):
        with self.assertRaisesRegex(StabilityError, "Column 1"):
            assemble_transition_matrix(
                build_geometry_1d(3), StepProbs(p_diff=0.6, p_bind=0.0, p_unbind=0.0)
            )

    def test_transition_matrix_not_stochastic(self):
        with self.assertRaisesRegex(ValueError, "column-stochastic"):
            TransitionMatrix(n_free=1, n_bound=1, entries=np.array([[0.5, 0.2], [0.3, 0.8]]))

    def test_evolve_and_observe(self):
        P = two_state_matrix()
        x = evolve([1.0, 0.0], P, 1)
        assert_allclose(x, [0.7, 0.3], atol=1e-15)
        self.assertAlmostEqual(observe(x, [0, 1]), 0.3, places=15)
        x = evolve([1.0, 0.0], P, 40)
        self.assertAlmostEqual(x.sum(), 1.0, places=12)
        self.assertAlmostEqual(x[1], 0.6 * (1.0 - 0.5**40), places=12)

    def test_evolve_bad_inputs(self):
        P = two_state_matrix()
        with self.assertRaises(ValueError):
            evolve([0.5, 0.6], P, 1)
        with self.assertRaises(ValueError):
            evolve([1.0, 0.0, 0.0], P, 1)
        with self.assertRaises(ValueError):
            observe([0.5, 0.5], [0, 2])
        with self.assertRaises(ValueError):
            observe([0.5, 0.5], [1])

    def test_two_state_oracle_grid(self):
        # P = [[1 - b, u], [b, 1 - u]] has x_eq = (u, b) / (b + u) and lambda = 1 - b - u
        for p_bind, p_unbind in product([0.1, 0.25, 0.6], repeat=2):
            with self.subTest(p_bind=p_bind, p_unbind=p_unbind):
                P = assemble_transition_matrix(
                    build_geometry_1d(1), StepProbs(p_diff=0.0, p_bind=p_bind, p_unbind=p_unbind)
                )
                expected = np.array([p_unbind, p_bind]) / (p_bind + p_unbind)
                lam = 1.0 - p_bind - p_unbind
                assert_allclose(stationary_distribution(P), expected, rtol=0, atol=1e-8)
                assert_allclose(
                    stationary_distribution(P, method="gth"), expected, rtol=0, atol=1e-15
                )
                summary = spectral_summary(P, 1.0)
                self.assertAlmostEqual(summary.slem, abs(lam), places=12)
                self.assertAlmostEqual(summary.tau, 1.0 / (1.0 - abs(lam)), places=10)
                self.assertAlmostEqual(summary.t_eq, 5.0 / (1.0 - abs(lam)), places=10)
                for n in [1, 3, 8]:
                    self.assertAlmostEqual(
                        evolve([1.0, 0.0], P, n)[1], expected[1] * (1.0 - lam**n), places=13
                    )

    def test_matrix_power(self):
        P = two_state_matrix().entries
        for power in [0, 1, 2, 7, 8, 100]:
            with self.subTest(power=power):
                result, n_products = matrix_power(P, power)
                assert_allclose(result, np.linalg.matrix_power(P, power), atol=1e-14)
                if power > 1:
                    self.assertLessEqual(n_products, 2 * math.log2(power))
        assert_allclose(
            matrix_power(P, 2)[0], [[0.55, 0.30], [0.45, 0.70]], rtol=0, atol=1e-15
        )

    def test_matrix_power_drift(self):
        with self.assertRaises(DriftError):
            matrix_power(np.array([[1.1, 0.0], [0.0, 1.0]]), 3)
        with self.assertRaises(ValueError):
            matrix_power(np.eye(2), -1)

    def test_stationary_two_state(self):
        P = two_state_matrix()
        for method in ["power", "gth"]:
            with self.subTest(method=method):
                assert_allclose(stationary_distribution(P, method=method), [0.4, 0.6], atol=1e-9)

    def test_stationary_periodic_chain(self):
        # the damped iteration converges on a periodic chain
        swap = np.array([[0.0, 1.0], [1.0, 0.0]])
        assert_allclose(stationary_distribution(swap, x0=[1.0, 0.0]), [0.5, 0.5], atol=1e-10)

    def test_stationary_methods_agree(self):
        params = reference_params(n_free=20)
        P = assemble_transition_matrix(
            build_geometry_1d(params.n_free), derive_step_probabilities(params)
        )
        assert_allclose(
            stationary_distribution(P, method="power", tol=1e-12),
            stationary_distribution(P, method="gth"),
            rtol=1e-8,
        )

    def test_stationary_unknown_method(self):
        with self.assertRaises(ValueError):
            stationary_distribution(two_state_matrix(), method="eigen")

    def test_gth_reducible(self):
        with self.assertRaisesRegex(ValueError, "reducible"):
            gth_stationary(np.eye(2))

    def test_spectral_summary_two_state(self):
        summary = spectral_summary(two_state_matrix(), dt=1.0)
        self.assertAlmostEqual(summary.slem, 0.5, places=12)
        self.assertAlmostEqual(summary.tau, 2.0, places=10)
        self.assertAlmostEqual(summary.t_eq, 10.0, places=9)
        self.assertEqual(summary.method, "symmetric")

    def test_spectral_summary_power_matches_dense(self):
        params = reference_params(n_free=10)
        P = assemble_transition_matrix(
            build_geometry_1d(params.n_free), derive_step_probabilities(params)
        )
        dense = spectral_summary(P, params.dt, method="dense")
        power = spectral_summary(P, params.dt, method="power")
        self.assertAlmostEqual(power.slem, dense.slem, places=6)

    def test_spectral_summary_not_ergodic(self):
        with self.assertRaises(ConvergenceError):
            spectral_summary(np.eye(2), dt=1.0)

    def test_convergence_rate(self):
        report = verify_convergence_rate(two_state_matrix(), 1.0, [1.0, 0.0], horizon=60)
        self.assertFalse(report.degenerate)
        self.assertAlmostEqual(report.rate, math.log(2.0), delta=1e-3)
        self.assertTrue(report.passed)
        self.assertGreaterEqual(report.tail.sum(), 3)

    def test_convergence_rate_from_equilibrium(self):
        report = verify_convergence_rate(two_state_matrix(), 1.0, [0.4, 0.6], horizon=60)
        self.assertTrue(report.degenerate)
        self.assertTrue(report.passed)

    def test_dump_and_load_matrix(self):
        path = output_dir / "test_matrix_dump.txt"
        for n_states in [1, 3]:
            with self.subTest(n_states=n_states):
                matrix = np.random.default_rng(n_states).random((n_states, n_states))
                dump_matrix(matrix, path)
                assert_array_equal(load_matrix(path), matrix)
