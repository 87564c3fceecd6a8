"""
Tests for configuration loading, validation, overrides and the command-line entry point.
"""

import os
import tempfile
import unittest
from pathlib import Path
from unittest import mock

import yaml

import main as cli
from config.config_loader import (
    ConfigLoader,
    ExperimentConfig,
    apply_overrides,
    config_from_dict,
    config_to_dict,
    validate_config,
)
from src.utils.errors import ConfigError

TINY = {
    "experiment": {"name": "tiny", "method": "pi", "seeds": [0], "total_steps": 6, "eval_interval": 3},
    "dataset": {"n_train": 40, "n_test": 30, "n_labeled": 4},
    "batch": {"labeled": 4, "unlabeled": 8},
    "model": {"hidden": [8]},
    "mur": {"enabled": False, "radius": 0.2},
    "schedules": {"t_ru": 2, "t_rd": 2},
}


class ConfigFileCase(unittest.TestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def write_config(self, data, name="config.yaml"):
        path = self.dir / name
        path.write_text(yaml.safe_dump(data))
        return path


class TestConfigLoader(ConfigFileCase):

    def test_project_config_is_valid(self):
        config = ConfigLoader(Path(__file__).parent.parent / "config.yaml").load()
        self.assertEqual(config.experiment.method, "mut")
        self.assertEqual(config.experiment.seeds, [0, 1, 2, 3, 4])
        self.assertIsNone(config.mur.radius)

    def test_missing_keys_keep_defaults(self):
        config = ConfigLoader(self.write_config(TINY)).load()
        self.assertEqual(config.experiment.total_steps, 6)
        self.assertEqual(config.model.leaky_slope, ExperimentConfig().model.leaky_slope)
        self.assertEqual(config.optimizer.weight_decay, 1e-4)

    def test_empty_file_gives_defaults(self):
        path = self.dir / "empty.yaml"
        path.write_text("")
        self.assertEqual(ConfigLoader(path).load(), ExperimentConfig())

    def test_json_is_accepted(self):
        path = self.dir / "config.json"
        path.write_text('{"experiment": {"method": "mt"}}')
        self.assertEqual(ConfigLoader(path).load().experiment.method, "mt")

    def test_missing_file(self):
        with self.assertRaises(FileNotFoundError):
            ConfigLoader(self.dir / "absent.yaml").load()

    def test_environment_overrides(self):
        env = {"MURSSL_METHOD": "mt", "MURSSL_SEEDS": "3, 4", "MURSSL_TOTAL_STEPS": "8",
               "MURSSL_DEBUG_MODE": "yes"}
        with mock.patch.dict(os.environ, env):
            config = ConfigLoader(self.write_config(TINY)).load()
        self.assertEqual(config.experiment.method, "mt")
        self.assertEqual(config.experiment.seeds, [3, 4])
        self.assertEqual(config.experiment.total_steps, 8)
        self.assertTrue(config.logging.debug_mode)

    def test_save_and_reload(self):
        loader = ConfigLoader(self.write_config(TINY))
        config = loader.load()
        saved = self.dir / "copy" / "config.yaml"
        loader.save(config, saved)
        self.assertEqual(ConfigLoader(saved).load(), config)


class TestValidation(unittest.TestCase):

    def test_unknown_sections_and_keys(self):
        with self.assertRaises(ConfigError) as ctx:
            config_from_dict({"solver": {}, "mur": {"raduis": 0.1}})
        self.assertEqual(len(ctx.exception.problems), 2)

    def test_every_problem_is_listed(self):
        config = config_from_dict({
            "experiment": {"method": "vat", "total_steps": 0},
            "dataset": {"n_labeled": 3},
            "mur": {"solver": "newton", "radius": -1.0},
        })
        with self.assertRaises(ConfigError) as ctx:
            validate_config(config)
        self.assertGreaterEqual(len(ctx.exception.problems), 5)
        self.assertIn("vat", str(ctx.exception))

    def test_method_requirements(self):
        with self.assertRaises(ConfigError):
            validate_config(config_from_dict({"experiment": {"method": "mut"}, "mur": {"enabled": False}}))
        with self.assertRaises(ConfigError):
            validate_config(config_from_dict({"experiment": {"method": "mt"}, "teacher": {"ema_momentum": None}}))

    def test_ramps_must_fit_in_training(self):
        config = config_from_dict({"experiment": {"total_steps": 100}, "schedules": {"t_ru": 80, "t_rd": 40}})
        with self.assertRaises(ConfigError):
            validate_config(config)

    def test_zero_ramp_down_is_valid(self):
        validate_config(config_from_dict({"experiment": {"method": "mt"}, "schedules": {"t_rd": 0}}))

    def test_laga_alias_accepted(self):
        validate_config(config_from_dict({"mur": {"solver": "laga"}}))


class TestOverrides(unittest.TestCase):

    def test_dotted_overrides(self):
        config = apply_overrides(config_from_dict(TINY), {"experiment.seeds": [7], "mur.radius": None,
                                                          "mur.enabled": True})
        self.assertEqual(config.experiment.seeds, [7])
        self.assertIsNone(config.mur.radius)
        self.assertTrue(config.mur.enabled)

    def test_original_is_untouched(self):
        base = config_from_dict(TINY)
        apply_overrides(base, {"experiment.method": "mt"})
        self.assertEqual(base.experiment.method, "pi")

    def test_unknown_key(self):
        with self.assertRaises(ConfigError):
            apply_overrides(config_from_dict(TINY), {"mur.raduis": 0.1})

    def test_overrides_are_validated(self):
        with self.assertRaises(ConfigError):
            apply_overrides(config_from_dict(TINY), {"experiment.total_steps": -1})

    def test_dict_roundtrip(self):
        config = config_from_dict(TINY)
        self.assertEqual(config_from_dict(config_to_dict(config)), config)


class TestCommandLine(ConfigFileCase):

    def run_cli(self, *args):
        return cli.main(list(args) + ["--config", str(self.config_path)])

    def setUp(self):
        super().setUp()
        self.config_path = self.write_config(TINY)

    def test_validate_only(self):
        self.assertEqual(self.run_cli("train", "--validate-only"), cli.EXIT_OK)

    def test_print_config(self):
        with mock.patch("builtins.print") as printed:
            self.assertEqual(self.run_cli("train", "--print-config", "--method", "mt"), cli.EXIT_OK)
        self.assertEqual(yaml.safe_load(printed.call_args[0][0])["experiment"]["method"], "mt")

    def test_invalid_override_exits_with_error(self):
        self.assertEqual(self.run_cli("train", "--method", "mut", "--mur-solver", "off", "--validate-only"),
                         cli.EXIT_ERROR)
        self.assertEqual(self.run_cli("train", "--steps", "0", "--validate-only"), cli.EXIT_ERROR)

    def test_missing_config_exits_with_error(self):
        self.config_path = self.dir / "absent.yaml"
        self.assertEqual(self.run_cli("train", "--validate-only"), cli.EXIT_ERROR)

    def test_unexpected_error_exit_code(self):
        with mock.patch.object(cli, "run_command", side_effect=RuntimeError("boom")):
            self.assertEqual(self.run_cli("train"), cli.EXIT_UNEXPECTED)

    def test_train_writes_outputs(self):
        out = self.dir / "run"
        code = self.run_cli("train", "--seed", "2", "--mur-solver", "direct", "--out", str(out))
        self.assertEqual(code, cli.EXIT_OK)
        self.assertTrue((out / "seed_2" / "metrics.csv").exists())
        self.assertTrue((out / "seed_2" / "virtual_points.csv").exists())
        self.assertEqual(yaml.safe_load((out / "summary.yaml").read_text())["seeds"], [2])

    def test_sensitivity_on_trained_checkpoint(self):
        out = self.dir / "run"
        self.assertEqual(self.run_cli("train", "--out", str(out)), cli.EXIT_OK)
        code = self.run_cli("sensitivity", "--checkpoint", str(out / "seed_0" / "model.bin"),
                            "--out", str(self.dir / "sens"))
        self.assertEqual(code, cli.EXIT_OK)
        self.assertTrue((self.dir / "sens" / "sensitivity_hist.csv").exists())

    def test_check_kl_tolerance(self):
        args = ("check-kl", "--draws", "20000", "--out", str(self.dir / "kl"))
        self.assertEqual(self.run_cli(*args, "--tolerance", "0.5"), cli.EXIT_OK)
        self.assertEqual(self.run_cli(*args, "--tolerance", "1e-9"), cli.EXIT_ERROR)
        self.assertTrue((self.dir / "kl" / "kl_check.csv").exists())

    def test_cli_overrides(self):
        args = cli.build_parser().parse_args(["train", "--vbi", "on", "--mur-solver", "laga", "--radius", "0.3"])
        self.assertEqual(cli.cli_overrides(args), {"vbi.enabled": True, "mur.enabled": True,
                                                   "mur.solver": "laga", "mur.radius": 0.3})


if __name__ == '__main__':
    unittest.main()
