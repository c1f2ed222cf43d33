# License: BSD 3 clause
"""Tests for DMCL inputs, mainly configuration files."""

import unittest
from itertools import chain

from dmcl.config import (
    DMCLConfigParser,
    ExperimentConfig,
    _setup_config_parser,
    default_config,
    parse_config_file,
)
from dmcl.config.utils import as_int, as_list, fix_json, load_value, resolve_path
from dmcl.experiments.utils import config_hash
from dmcl.utils.exceptions import BudgetError, ConfigError
from dmcl.utils.testing import (
    config_dir,
    fill_in_config_options,
    output_dir,
    reference_params,
    unlink,
)


class TestInput(unittest.TestCase):
    """Test class for input tests."""

    @classmethod
    def setUpClass(cls):
        output_dir.mkdir(exist_ok=True)

    @classmethod
    def tearDownClass(cls):
        """Clean up after tests."""
        for path in chain(
            config_dir.glob("test_config_parsing_*.cfg"),
            [config_dir / "test_config_parsing_raw.cfg"],
        ):
            unlink(path)

    def make_config(self, values, sub_prefix):
        return fill_in_config_options(
            config_dir / "test_config_parsing.template.cfg", values, sub_prefix
        )

    def write_raw_config(self, text):
        path = config_dir / "test_config_parsing_raw.cfg"
        path.write_text(text)
        return path

    def test_defaults(self):
        cfg = parse_config_file(self.make_config({}, "defaults"))
        self.assertEqual(cfg.name, "config_parsing")
        self.assertEqual(cfg.tasks, ())
        self.assertEqual(cfg.channel, reference_params())
        self.assertEqual(cfg.Tb_s, (0.1, 0.3))
        self.assertEqual(cfg.Q, (500, 1000, 2000, 5000))
        self.assertEqual(cfg.dfe_L, (1, 3, 5))
        self.assertIsNone(cfg.skip)
        self.assertIsNone(cfg.window_burn)
        self.assertIsNone(cfg.cir_t_max_s)
        self.assertEqual(cfg.output_dir, output_dir.resolve())
        self.assertEqual(cfg.trace_format, "csv")

    def test_values(self):
        values = {
            "experiment": {"tasks": "[taps, ber-sweep]", "trials": "4", "backend": "per_molecule"},
            "channel": {"N_f": "20", "k_off_per_s": "6"},
            "symbol": {"Tb_s": "0.2"},
            "calibration": {"teq_targets_s": "[0.75, 1.5]"},
            "transmitter": {"Q": "[100, 200]", "B": "5000"},
            "detector": {"kinds": "[dfe]", "skip": "50"},
            "detector.dfe": {"L": "[2]"},
            "noise": {"window_burn": "30"},
            "cir": {"t_max_s": "1.5", "heatmap": "true", "rate_factors": "[0.5, 2]"},
            "output": {"trace_format": "binary", "decisions": "True"},
        }
        cfg = parse_config_file(self.make_config(values, "values"))
        self.assertEqual(cfg.tasks, ("taps", "ber-sweep"))
        self.assertEqual(cfg.trials, 4)
        self.assertEqual(cfg.backend, "per_molecule")
        self.assertEqual(cfg.channel.n_free, 20)
        self.assertEqual(cfg.channel.k_off, 6.0)
        self.assertEqual(cfg.Tb_s, (0.2,))
        self.assertEqual(cfg.teq_targets_s, (0.75, 1.5))
        self.assertEqual((cfg.Q, cfg.B), ((100, 200), 5000))
        self.assertEqual(cfg.detector_kinds, ("dfe",))
        self.assertEqual(cfg.skip, 50)
        self.assertEqual(cfg.dfe_L, (2,))
        self.assertEqual(cfg.window_burn, 30)
        self.assertEqual(cfg.cir_t_max_s, 1.5)
        self.assertTrue(cfg.heatmap)
        self.assertEqual(cfg.rate_factors, (0.5, 2.0))
        self.assertEqual(cfg.trace_format, "binary")
        self.assertTrue(cfg.decisions)

    def test_unrecognized_section(self):
        config_path = self.make_config({"Tuning": {"grid_search": "true"}}, "bad_section")
        with self.assertRaisesRegex(ConfigError, "unrecognized sections"):
            parse_config_file(config_path)

    def test_unrecognized_option(self):
        config_path = self.make_config({"channel": {"k_on": "1e8"}}, "bad_option")
        with self.assertRaisesRegex(ConfigError, r"unrecognized options: \['channel.k_on'\]"):
            parse_config_file(config_path)

    def test_invalid_values(self):
        for values, key in [
            ({"experiment": {"backend": "gillespie"}}, "experiment.backend"),
            ({"experiment": {"tasks": "[fit]"}}, "experiment.tasks"),
            ({"experiment": {"trials": "0"}}, "experiment.trials"),
            ({"channel": {"N_f": "0"}}, "channel.N_f"),
            ({"channel": {"k_off_per_s": "fast"}}, "channel.k_off_per_s"),
            ({"symbol": {"Tb_s": "[0.1, -0.2]"}}, "symbol.Tb_s"),
            ({"transmitter": {"Q": "[1.5]"}}, "transmitter.Q"),
            ({"transmitter": {"Q": "[100"}}, "transmitter.Q"),
            ({"cir": {"heatmap": "maybe"}}, "cir.heatmap"),
            ({"output": {"trace_format": "hdf5"}}, "output.trace_format"),
        ]:
            with self.subTest(key=key, values=values):
                config_path = self.make_config(values, "invalid")
                with self.assertRaisesRegex(ConfigError, key.replace(".", r"\.")):
                    parse_config_file(config_path)

    def test_empty_lists(self):
        for values in [{"symbol": {"Tb_s": "[]"}}, {"transmitter": {"Q": "[]"}}]:
            with self.subTest(values=values):
                with self.assertRaises(ConfigError):
                    parse_config_file(self.make_config(values, "empty"))

    def test_option_outside_section(self):
        config_path = self.write_raw_config("seed = 5\n[experiment]\n")
        with self.assertRaisesRegex(ConfigError, "line 1"):
            parse_config_file(config_path)

    def test_duplicate_option(self):
        config_path = self.write_raw_config("[experiment]\nseed = 5\nseed = 6\n")
        with self.assertRaisesRegex(ConfigError, "line 3"):
            parse_config_file(config_path)

    def test_missing_file(self):
        with self.assertRaises(FileNotFoundError):
            parse_config_file(config_dir / "does_not_exist.cfg")
        with self.assertRaises(FileNotFoundError):
            parse_config_file("")

    def test_parser_value_defaults(self):
        config = _setup_config_parser(config_dir / "test_config_parsing.template.cfg")
        self.assertIsInstance(config, DMCLConfigParser)
        self.assertEqual(config.value("experiment", "name"), "config_parsing")
        self.assertEqual(config.value("detector.dfe", "L"), [1, 3, 5])
        self.assertEqual(config.value("detector", "skip"), "auto")

    def test_value_helpers(self):
        self.assertEqual(fix_json("['a', True, False]"), '["a", true, false]')
        self.assertEqual(load_value("6e8", "channel.k_on_per_M_s"), 6e8)
        self.assertEqual(as_list(None, "key"), [])
        self.assertEqual(as_list(3, "key"), [3])
        self.assertEqual(as_int(2.0, "key"), 2)
        with self.assertRaises(ConfigError):
            as_int(True, "key")
        self.assertEqual(resolve_path("sub", config_dir), (config_dir / "sub").resolve())
        self.assertEqual(resolve_path(output_dir.resolve(), config_dir), output_dir.resolve())

    def test_overrides(self):
        cfg = default_config().with_overrides(
            seed=7, trials=3, backend="per_molecule", output_dir=output_dir
        )
        self.assertEqual((cfg.seed, cfg.trials, cfg.backend), (7, 3, "per_molecule"))
        self.assertEqual(cfg.output_dir, output_dir.resolve())
        self.assertEqual(default_config().with_overrides(), ExperimentConfig())
        with self.assertRaises(ConfigError):
            default_config().with_overrides(trials=0)
        with self.assertRaises(ConfigError):
            default_config().with_overrides(backend="exact")

    def test_check_budget(self):
        default_config(B=1000, trials=5, budget=5000).check_budget()
        with self.assertRaises(BudgetError):
            default_config(B=1000, trials=6, budget=5000).check_budget()

    def test_config_hash(self):
        first = config_hash(default_config(seed=1))
        self.assertEqual(len(first), 12)
        self.assertEqual(first, config_hash(default_config(seed=2, name="other", n_jobs=4)))
        self.assertNotEqual(first, config_hash(default_config(B=5000)))
