# License: BSD 3 clause
"""Tests for the differential detectors and BER bookkeeping."""

import unittest
from itertools import product

import numpy as np
from numpy.testing import assert_allclose, assert_array_equal
from scipy.stats import norm

from dmcl.detectors import (
    BerResult,
    DetectorConfig,
    compare_ber,
    detect,
    dfe_detect,
    differential,
    evaluate_ber,
    merge_ber,
    midpoint_threshold,
    threshold_detect,
)
from dmcl.microarray import build_microarray_channel
from dmcl.simulation import run_trials
from dmcl.symbols import TxSequence, build_symbol_channel, differential_mean_sequence
from dmcl.utils.testing import reference_params, two_state_params


class TestDetectors(unittest.TestCase):
    """Test class for detectors and bit error rates."""

    @classmethod
    def setUpClass(cls):
        cls.ch = build_microarray_channel(two_state_params())
        cls.sym = build_symbol_channel(cls.ch, 1.0)
        cls.threshold = DetectorConfig.for_channel("threshold", cls.sym, 1000)

    def test_midpoint_threshold(self):
        self.assertEqual(midpoint_threshold(1000, 0.3), 150.0)
        self.assertAlmostEqual(self.threshold.eta, 150.0, places=10)
        self.assertEqual(self.threshold.label, "threshold")
        self.assertEqual(DetectorConfig("dfe", 1.0, L=3).label, "dfe_L3")

    def test_detector_config_validation(self):
        for kwargs in [
            {"kind": "mlse", "eta": 1.0},
            {"kind": "dfe", "eta": 1.0, "L": -1},
            {"kind": "threshold", "eta": 1.0, "L": 2},
        ]:
            with self.subTest(kwargs=kwargs):
                with self.assertRaises(ValueError):
                    DetectorConfig(**kwargs)

    def test_differential(self):
        assert_array_equal(differential(np.array([0, 300, 450])), [300, 150])
        with self.assertRaises(ValueError):
            differential(np.array([5]))

    def test_threshold_on_mean_observations(self):
        dz = differential_mean_sequence(TxSequence.from_bits([1, 0, 0], 1000), self.sym)
        assert_allclose(dz, [300.0, 150.0], atol=1e-9)
        # the comparison is strict, so a value on the threshold decides 0
        assert_array_equal(
            threshold_detect(np.array([300, 150]), DetectorConfig("threshold", 150.0)), [1, 0]
        )

    def test_dfe_without_memory_is_threshold(self):
        dz = np.random.default_rng(3).normal(150.0, 100.0, size=200)
        dfe = DetectorConfig.for_channel("dfe", self.sym, 1000, L=0)
        assert_array_equal(
            dfe_detect(dz, self.sym.delta_taps, dfe), threshold_detect(dz, self.threshold)
        )

    def test_dfe_cancels_post_cursor(self):
        dz = np.array([300.0, 200.0])
        dfe = DetectorConfig.for_channel("dfe", self.sym, 1000, L=1)
        assert_array_equal(threshold_detect(dz, self.threshold), [1, 1])
        assert_array_equal(dfe_detect(dz, self.sym.delta_taps, dfe), [1, 0])

    def test_dfe_on_repeated_ones(self):
        dz = differential_mean_sequence(TxSequence.from_bits([1, 1, 0], 1000), self.sym)
        dfe = DetectorConfig.for_channel("dfe", self.sym, 1000, L=2)
        assert_array_equal(detect(dz, dfe, self.sym.delta_taps), [1, 1])

    def test_dfe_argument_errors(self):
        with self.assertRaises(ValueError):
            dfe_detect([1.0], self.sym.delta_taps, DetectorConfig("dfe", 1.0, L=50))
        with self.assertRaises(ValueError):
            dfe_detect([1.0], self.sym.delta_taps, DetectorConfig("dfe", 1.0, L=1))
        with self.assertRaises(ValueError):
            detect([1.0], DetectorConfig("dfe", 1.0, L=1, Q=10))

    def test_wilson_interval(self):
        result = BerResult.from_counts(10, 1000)
        self.assertEqual(result.ber, 0.01)
        z = norm.ppf(0.975)
        n, p = 1000, 0.01
        center = (p + z**2 / (2 * n)) / (1 + z**2 / n)
        half = z / (1 + z**2 / n) * np.sqrt(p * (1 - p) / n + z**2 / (4 * n**2))
        self.assertAlmostEqual(result.ci_low, center - half, places=10)
        self.assertAlmostEqual(result.ci_high, center + half, places=10)
        self.assertAlmostEqual(result.ci95, half, places=10)
        zero = BerResult.from_counts(0, 100)
        self.assertAlmostEqual(zero.ci_low, 0.0, places=12)
        self.assertGreater(zero.ci_high, 0.0)

    def test_evaluate_ber(self):
        truth = np.array([1, 0, 1, 1, 0, 0, 1, 0])
        decisions = np.array([0, 0, 1, 0, 0, 0, 1, 1])
        result = evaluate_ber(truth, decisions, skip=2, detector="threshold", Q=500)
        self.assertEqual(result.n_symbols, 6)
        self.assertEqual(result.n_errors, 2)
        self.assertEqual(result.detector, "threshold")
        self.assertEqual(result.Q, 500)
        for kwargs in [{"skip": -1}, {"skip": 8}]:
            with self.subTest(kwargs=kwargs):
                with self.assertRaises(ValueError):
                    evaluate_ber(truth, decisions, **kwargs)
        with self.assertRaises(ValueError):
            evaluate_ber(truth, decisions[:-1])

    def test_merge_and_compare(self):
        parts = [BerResult.from_counts(3, 100, detector="dfe", L=1), BerResult.from_counts(5, 100)]
        merged = merge_ber(parts)
        self.assertEqual((merged.n_errors, merged.n_symbols), (8, 200))
        self.assertEqual((merged.detector, merged.L), ("dfe", 1))
        with self.assertRaises(ValueError):
            merge_ber([])

        low = BerResult.from_counts(10, 10000)
        high = BerResult.from_counts(300, 10000)
        self.assertEqual(compare_ber(low, high), -1)
        self.assertEqual(compare_ber(high, low), 1)
        self.assertEqual(compare_ber(low, BerResult.from_counts(12, 10000)), 0)

    def test_detectors_on_simulated_traces(self):
        traces = run_trials(self.ch, self.sym, 77, 10, n_symbols=30, Q=1000)
        dfe = DetectorConfig.for_channel("dfe", self.sym, 1000, L=3)
        results = {}
        for cfg in [self.threshold, dfe]:
            per_trial = []
            for trace in traces:
                decisions = detect(differential(trace), cfg, self.sym.delta_taps)
                per_trial.append(evaluate_ber(trace.tx.bits[:-1], decisions))
            results[cfg.label] = merge_ber(per_trial)
        self.assertEqual(results["threshold"].n_symbols, 290)
        self.assertLess(results["dfe_L3"].ber, results["threshold"].ber)

    def test_threshold_scales_with_batch_size(self):
        delta_h0 = self.sym.delta_tap(0)
        for Q in [10, 1000, 5000]:
            with self.subTest(Q=Q):
                cfg = DetectorConfig.for_channel("threshold", self.sym, Q)
                self.assertAlmostEqual(cfg.eta, Q * delta_h0 / 2, places=9)
                doubled = DetectorConfig.for_channel("threshold", self.sym, 2 * Q)
                self.assertAlmostEqual(doubled.eta, 2 * cfg.eta, places=9)

    def test_dfe_full_memory_recovers_mean_observations(self):
        bits = np.random.default_rng(29).integers(0, 2, size=200)
        reference = build_symbol_channel(build_microarray_channel(reference_params()), 0.1)
        for sym in [self.sym, reference]:
            for Q, L in product([10, 1000, 5000], [sym.L_trunc - 1, sym.L_trunc]):
                with self.subTest(L_trunc=sym.L_trunc, Q=Q, L=L):
                    dz = differential_mean_sequence(TxSequence(bits, Q), sym)
                    cfg = DetectorConfig.for_channel("dfe", sym, Q, L=L)
                    assert_array_equal(dfe_detect(dz, sym.delta_taps, cfg), bits[:-1])


class TestReferenceBer(unittest.TestCase):
    """Test class for bit error rates on the reference channel with strong memory."""

    batch_sizes = [500, 1000, 2000, 5000]
    memories = [0, 1, 3, 5]

    @classmethod
    def setUpClass(cls):
        ch = build_microarray_channel(reference_params())
        sym = build_symbol_channel(ch, 0.1)
        cls.ber = {}
        for Q in cls.batch_sizes:
            traces = run_trials(ch, sym, 2718, 20, n_symbols=120, Q=Q)
            for L in cls.memories:
                kind = "threshold" if L == 0 else "dfe"
                cfg = DetectorConfig.for_channel(kind, sym, Q, L=L)
                per_trial = [
                    evaluate_ber(
                        trace.tx.bits[:-1],
                        detect(differential(trace), cfg, sym.delta_taps),
                        skip=10,
                        detector=kind,
                        L=L,
                        Q=Q,
                    )
                    for trace in traces
                ]
                cls.ber[Q, L] = merge_ber(per_trial)

    def test_memory_ordering_at_large_batch(self):
        ber = {L: self.ber[5000, L] for L in self.memories}
        self.assertEqual(ber[0].n_symbols, 20 * (120 - 1 - 10))
        # a tie means the confidence intervals overlap
        self.assertLessEqual(compare_ber(ber[5], ber[3]), 0)
        self.assertLessEqual(compare_ber(ber[3], ber[1]), 0)
        self.assertLessEqual(compare_ber(ber[1], ber[0]), 0)
        self.assertLess(ber[5].ber, ber[0].ber)

    def test_ber_decreases_with_batch_size(self):
        for L in self.memories:
            for smaller, larger in zip(self.batch_sizes, self.batch_sizes[1:]):
                with self.subTest(L=L, smaller=smaller, larger=larger):
                    self.assertLessEqual(
                        compare_ber(self.ber[larger, L], self.ber[smaller, L]), 0
                    )
