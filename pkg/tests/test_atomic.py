import unittest

import numpy as np

from combgate.atomic import (
    DEFAULT_SCHEME_PATH,
    dipole_from_decay_rate,
    format_half,
    load_level_scheme,
    parse_half,
    parse_level_scheme,
)
from combgate.errors import ConfigError, LevelSchemeError
from tests.helpers import QUBIT, TOY_SCHEME, toy_scheme

TWO_PI = 2.0 * np.pi


class TestHalfIntegers(unittest.TestCase):

    def test_parse(self):
        self.assertEqual(parse_half("5/2"), 2.5)
        self.assertEqual(parse_half("-1/2"), -0.5)
        self.assertEqual(parse_half("1"), 1.0)
        with self.assertRaises(ValueError):
            parse_half("1/3")

    def test_format(self):
        self.assertEqual(format_half(-0.5, signed=True), "-1/2")
        self.assertEqual(format_half(1.5, signed=True), "+3/2")
        self.assertEqual(format_half(2.0), "2")


class TestCalciumScheme(unittest.TestCase):

    @classmethod
    def setUpClass(cls) -> None:
        cls.scheme = load_level_scheme()

    def test_sublevel_count(self):
        # S1/2, D3/2, D5/2, P1/2, P3/2 -> 2 + 4 + 6 + 2 + 4
        self.assertEqual(self.scheme.size, 18)
        self.assertEqual(len(set(self.scheme.labels)), 18)

    def test_qubit_levels_exist(self):
        for label in QUBIT:
            self.assertIn(label, self.scheme.labels)
        self.assertEqual(self.scheme.level(QUBIT[1]).linewidth, 0.0)

    def test_fine_structure_splitting(self):
        d3 = self.scheme.level("D3/2(+1/2)").term_energy
        d5 = self.scheme.level("D5/2(+1/2)").term_energy
        self.assertAlmostEqual((d5 - d3) / (TWO_PI * 1.828734e12), 1.0, places=9)

    def test_zeeman_shift(self):
        upper = self.scheme.level("S1/2(+1/2)").energy
        lower = self.scheme.level("S1/2(-1/2)").energy
        self.assertAlmostEqual((upper - lower) / (TWO_PI * 2.0e6), 1.0, places=6)

    def test_zeeman_override(self):
        scheme = load_level_scheme(zeeman_mhz=0.0)
        self.assertEqual(scheme.level("S1/2(+1/2)").energy, scheme.level("S1/2(-1/2)").energy)
        self.assertEqual(scheme.zeeman_hz, 0.0)

    def test_unknown_label(self):
        with self.assertRaises(LevelSchemeError) as ctx:
            self.scheme.index("F7/2(+1/2)")
        self.assertEqual(ctx.exception.labels, ("F7/2(+1/2)",))
        self.assertEqual(ctx.exception.exit_code, 1)

    def test_dipoles_are_hermitian(self):
        d = self.scheme.dipole_matrices()
        self.assertEqual(d.shape, (3, 18, 18))
        for axis in range(3):
            np.testing.assert_allclose(d[axis], d[axis].conj().T, atol=0.0)

    def test_no_dipole_between_equal_parity(self):
        d = np.abs(self.scheme.dipole_matrices()).sum(axis=0)
        s, d5 = self.scheme.index("S1/2(-1/2)"), self.scheme.index("D5/2(-1/2)")
        self.assertEqual(d[s, d5], 0.0)
        self.assertEqual(d[s, s], 0.0)

    def test_sum_rule_reconstructs_linewidths(self):
        rates = self.scheme.partial_decay_rates()
        for level in self.scheme.levels:
            i = self.scheme.index(level.label)
            if level.linewidth > 0:
                np.testing.assert_allclose(rates[i].sum(), level.linewidth, rtol=1e-6)
            else:
                self.assertEqual(rates[i].sum(), 0.0)

    def test_branching_of_p12(self):
        rates = self.scheme.partial_decay_rates()
        p = self.scheme.index("P1/2(-1/2)")
        to_s = sum(rates[p, self.scheme.index(f"S1/2({m})")] for m in ("-1/2", "+1/2"))
        self.assertAlmostEqual(to_s / 1.40e8, 1.0, places=5)

    def test_pi_light_selection_rules(self):
        coupling = self.scheme.coupling_matrix((0.0, 0.0, 1.0))
        s = self.scheme.index("S1/2(-1/2)")
        self.assertNotEqual(coupling[s, self.scheme.index("P1/2(-1/2)")], 0.0)
        self.assertEqual(coupling[s, self.scheme.index("P1/2(+1/2)")], 0.0)

    def test_decay_channels(self):
        channels = self.scheme.decay_channels()
        self.assertTrue(all(c.rate > 0 for c in channels))
        uppers = {self.scheme.level(c.upper).term for c in channels}
        self.assertEqual(uppers, {"P1/2", "P3/2"})

    def test_active_subspace(self):
        active = self.scheme.active_subspace(QUBIT, [(0.0, 0.0, 1.0)])
        for label in QUBIT + ("P1/2(-1/2)", "P3/2(-1/2)", "S1/2(+1/2)"):
            self.assertIn(label, active)
        self.assertNotIn("D5/2(+5/2)", active)

    def test_restricted(self):
        sub = self.scheme.restricted(QUBIT + ("P3/2(-1/2)",))
        self.assertEqual(sub.size, 3)
        self.assertFalse(sub.complete)
        with self.assertRaises(LevelSchemeError):
            self.scheme.restricted(["X1/2(+1/2)"])


class TestSchemeFiles(unittest.TestCase):

    def test_bundled_file(self):
        self.assertTrue(DEFAULT_SCHEME_PATH.is_file())

    def test_toy_scheme(self):
        scheme = toy_scheme()
        self.assertEqual(scheme.size, 8)
        self.assertEqual(scheme.species, "Toy")

    def test_missing_file(self):
        with self.assertRaises(ConfigError):
            load_level_scheme("/nonexistent/scheme.levels")

    def test_parity_violation(self):
        text = TOY_SCHEME + "D3/2  S1/2  1.0e3\n"
        with self.assertRaises(LevelSchemeError) as ctx:
            parse_level_scheme(text)
        self.assertIn("parity", ctx.exception.message)

    def test_sum_rule_violation(self):
        text = TOY_SCHEME.replace("4.0e7", "8.0e7")
        with self.assertRaises(LevelSchemeError) as ctx:
            parse_level_scheme(text)
        self.assertIn("P1/2", ctx.exception.labels)

    def test_unknown_unit(self):
        with self.assertRaises(LevelSchemeError):
            parse_level_scheme(TOY_SCHEME.replace("100.0   THz", "100.0   eV"))

    def test_unknown_manifold_in_lines(self):
        with self.assertRaises(LevelSchemeError):
            parse_level_scheme(TOY_SCHEME + "P3/2  S1/2  1.0e7\n")

    def test_wavenumber_units(self):
        text = TOY_SCHEME.replace("100.0   THz", "3335.64095198 cm-1")
        scheme = parse_level_scheme(text)
        d = scheme.level("D3/2(+1/2)").term_energy
        self.assertAlmostEqual(d / (TWO_PI * 100e12), 1.0, places=6)


class TestDipoleFromDecayRate(unittest.TestCase):

    def test_round_trip_through_emission_rate(self):
        omega = TWO_PI * 755.222765e12
        reduced = dipole_from_decay_rate(1.40e8, omega, 0.5, 0.5)
        self.assertGreater(reduced, 1.0)
        self.assertLess(reduced, 5.0)
        twice = dipole_from_decay_rate(4 * 1.40e8, omega, 0.5, 0.5)
        self.assertAlmostEqual(twice / reduced, 2.0, places=12)

    def test_invalid_inputs(self):
        with self.assertRaises(ConfigError):
            dipole_from_decay_rate(-1.0, 1e15, 0.5, 0.5)
        with self.assertRaises(ConfigError):
            dipole_from_decay_rate(1e8, 1e15, 2.5, 0.5)


if __name__ == "__main__":
    unittest.main()
