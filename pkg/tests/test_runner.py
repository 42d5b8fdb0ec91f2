import json
import tempfile
import unittest
from pathlib import Path

import numpy as np
import pandas as pd

from combgate.atomic import load_level_scheme
from combgate.errors import ConfigError
from combgate.runner import Experiment, chain_geometry, comb_config, run
from combgate.schemas import config_hash, parse_config
from combgate.settings import Settings

SMALL_PROFILE = ["run.profile_points=5", "run.profile_half_width_um=1.0"]

REFERENCE_SETUP = """
scheme:
  qubit_levels: ["S1/2(-1/2)", "D5/2(-1/2)"]
comb:
  carrier_wavelength_nm: 1000
  pulse_duration_fs: 20
  repetition_rate_mhz: 100
  polarization: [0, 0, 1]
  peak_rabi_rate_thz: 4.405
trap:
  axial_frequency_khz: 600
  n_ions: 1
"""


class TestExperiment(unittest.TestCase):

    def test_units(self):
        config = parse_config("", ["comb.pulse_duration_fs=25", "comb.peak_rabi_rate_thz=2.0"])
        cfg = comb_config(config)
        self.assertAlmostEqual(cfg.pulse_duration, 25e-15, places=28)
        self.assertEqual(cfg.peak_field, 2.0e12)
        self.assertAlmostEqual(cfg.period, 1e-8, places=20)

    def test_harmonic_chain(self):
        exp = Experiment.from_config(parse_config("", ["trap.n_ions=2"]))
        self.assertEqual(exp.geometry.n_ions, 2)
        self.assertAlmostEqual(exp.geometry.positions[1] * 1e6, 3.94, delta=0.05)
        self.assertEqual(exp.target_position, exp.geometry.positions[0])

    def test_explicit_positions(self):
        config = parse_config("", ["trap.n_ions=2", "trap.positions_um=[0.0, 10.0]", "trap.lamb_dicke=0.09"])
        exp = Experiment.from_config(config)
        np.testing.assert_allclose(exp.geometry.positions, [0.0, 10e-6], rtol=1e-15, atol=0.0)
        np.testing.assert_array_equal(exp.geometry.eta(1), [0.09])

    def test_invalid_positions(self):
        config = parse_config("", ["trap.n_ions=2", "trap.positions_um=[10.0, 0.0]"])
        with self.assertRaises(ConfigError):
            chain_geometry(config, load_level_scheme(), comb_config(config))

    def test_unknown_qubit_level(self):
        with self.assertRaises(ConfigError):
            Experiment.from_config(parse_config("", ["scheme.qubit_levels=[S1/2(-1/2), F7/2(-1/2)]"]))

    def test_target_outside_chain(self):
        exp = Experiment.from_config(parse_config("", ["gate.target=3"]))
        with self.assertRaises(ConfigError):
            exp.target_position


class TestRun(unittest.TestCase):

    def setUp(self) -> None:
        self._tmp = tempfile.TemporaryDirectory()
        self.tmp = Path(self._tmp.name)
        self.settings = Settings(log_config=None, output_dir=self.tmp / "default")

    def tearDown(self) -> None:
        self._tmp.cleanup()

    def test_profile_is_reproducible(self):
        config = parse_config("", SMALL_PROFILE)
        first = run(config, out_dir=self.tmp / "a", settings=self.settings)
        second = run(config, out_dir=self.tmp / "b", settings=self.settings)
        self.assertEqual(first.artifacts, ["profile.csv"])
        self.assertEqual(
            (self.tmp / "a" / "profile.csv").read_bytes(),
            (self.tmp / "b" / "profile.csv").read_bytes(),
        )
        frame = pd.read_csv(self.tmp / "a" / "profile.csv")
        self.assertEqual(list(frame.columns), ["x_m", "dtheta0_rad", "dtheta1_rad", "differential_rad"])
        self.assertEqual(len(frame), 5)
        np.testing.assert_allclose(second.summary["overlap_ratio"], [2.0, 2.0], atol=1e-3)

    def test_defaults_are_the_reference_setup(self):
        implicit = parse_config("", SMALL_PROFILE)
        explicit = parse_config(REFERENCE_SETUP, SMALL_PROFILE)
        self.assertEqual(config_hash(implicit), config_hash(explicit))
        run(implicit, out_dir=self.tmp / "implicit", settings=self.settings)
        run(explicit, out_dir=self.tmp / "explicit", settings=self.settings)
        self.assertEqual(
            (self.tmp / "implicit" / "profile.csv").read_bytes(),
            (self.tmp / "explicit" / "profile.csv").read_bytes(),
        )

    def test_manifest(self):
        config = parse_config("", SMALL_PROFILE)
        result = run(config, out_dir=self.tmp, settings=self.settings)
        manifest = json.loads((self.tmp / "manifest.json").read_text())
        self.assertEqual(set(manifest), {"config_sha256", "version", "mode", "wall_time_s", "artifacts"})
        self.assertEqual(manifest["config_sha256"], config_hash(config))
        self.assertEqual(manifest["mode"], "profile")
        self.assertEqual(manifest, result.manifest)

    def test_compile_writes_plan(self):
        config = parse_config("", ["run.mode=compile", "trap.n_ions=2", "trap.positions_um=[0.0, 10.0]"])
        result = run(config, out_dir=self.tmp, settings=self.settings)
        self.assertEqual(result.artifacts, ["plan.yaml", "chain.csv"])
        self.assertIn("sequence:", (self.tmp / "plan.yaml").read_text())
        chain = pd.read_csv(self.tmp / "chain.csv")
        self.assertEqual(len(chain), 2)
        self.assertGreaterEqual(result.summary["n_pulses"], 667)
        self.assertLessEqual(result.summary["n_pulses"], 1000)

    def test_output_dir_from_settings(self):
        run(parse_config("", SMALL_PROFILE), settings=self.settings)
        self.assertTrue((self.tmp / "default" / "profile.csv").is_file())


if __name__ == "__main__":
    unittest.main()
