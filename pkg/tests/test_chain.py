import unittest

import numpy as np
from pydantic import ValidationError

from combgate.chain import (
    ChainGeometry,
    coulomb_length,
    delay_for_target,
    equilibrium_positions,
    lamb_dicke,
    target_from_delay,
)
from combgate.constants import AMU, C, PhysicalConstants
from combgate.errors import ConfigError

CA40 = 39.962590863 * AMU
OMEGA_AX = 2.0 * np.pi * 600e3
K_C = 2.0 * np.pi / 1000e-9


class TestLambDicke(unittest.TestCase):

    def test_reference_trap(self):
        self.assertAlmostEqual(lamb_dicke(OMEGA_AX, CA40, K_C), 0.0912, delta=5e-4)

    def test_scaling(self):
        eta = lamb_dicke(OMEGA_AX, CA40, K_C)
        self.assertAlmostEqual(lamb_dicke(4 * OMEGA_AX, CA40, K_C) / eta, 0.5, places=12)
        self.assertAlmostEqual(lamb_dicke(OMEGA_AX, 4 * CA40, K_C) / eta, 0.5, places=12)
        self.assertAlmostEqual(lamb_dicke(OMEGA_AX, CA40, 2 * K_C) / eta, 2.0, places=12)

    def test_constants_for_species(self):
        constants = PhysicalConstants.for_mass_amu(39.962590863)
        self.assertEqual(constants.mass, CA40)
        self.assertEqual(constants.c, C)
        geometry = ChainGeometry.harmonic(1, OMEGA_AX, 39.962590863, K_C)
        self.assertAlmostEqual(geometry.eta(0)[0], lamb_dicke(OMEGA_AX, constants.mass, K_C), places=15)

    def test_invalid_inputs(self):
        for args in ((0.0, CA40, K_C), (OMEGA_AX, -1.0, K_C), (OMEGA_AX, CA40, 0.0)):
            with self.assertRaises(ConfigError):
                lamb_dicke(*args)


class TestDelay(unittest.TestCase):

    def test_fifteen_microns(self):
        self.assertAlmostEqual(delay_for_target(15e-6) * 1e15, 100.069, places=3)

    def test_round_trip(self):
        for x in (-20e-6, 0.0, 3.3e-6, 15e-6):
            self.assertAlmostEqual(target_from_delay(delay_for_target(x)), x, places=18)


class TestEquilibrium(unittest.TestCase):

    def test_single_ion(self):
        np.testing.assert_array_equal(equilibrium_positions(1, OMEGA_AX, CA40), [0.0])

    def test_two_ions(self):
        length = coulomb_length(OMEGA_AX, CA40)
        positions = equilibrium_positions(2, OMEGA_AX, CA40)
        np.testing.assert_allclose(positions, np.array([-1.0, 1.0]) * 0.25 ** (1.0 / 3.0) * length, rtol=1e-10)
        self.assertAlmostEqual(positions[1] * 1e6, 3.94, delta=0.05)

    def test_three_ions(self):
        length = coulomb_length(OMEGA_AX, CA40)
        positions = equilibrium_positions(3, OMEGA_AX, CA40)
        expected = np.array([-1.0, 0.0, 1.0]) * 1.25 ** (1.0 / 3.0) * length
        np.testing.assert_allclose(positions, expected, rtol=1e-10, atol=1e-18)

    def test_many_ions_are_symmetric_and_ordered(self):
        positions = equilibrium_positions(7, OMEGA_AX, CA40)
        self.assertTrue(np.all(np.diff(positions) > 0))
        np.testing.assert_allclose(positions, -positions[::-1], atol=1e-15)
        # inner spacing is the smallest
        spacing = np.diff(positions)
        self.assertIn(int(np.argmin(spacing)), (2, 3))

    def test_invalid(self):
        with self.assertRaises(ConfigError):
            equilibrium_positions(0, OMEGA_AX, CA40)


class TestChainGeometry(unittest.TestCase):

    def test_from_positions(self):
        chain = ChainGeometry.from_positions([0.0, 10e-6], OMEGA_AX, 0.09)
        self.assertEqual(chain.n_ions, 2)
        self.assertEqual(chain.n_modes, 1)
        np.testing.assert_array_equal(chain.eta(1), [0.09])
        self.assertEqual(list(chain.neighbours(0)), [1])

    def test_harmonic_com_mode(self):
        chain = ChainGeometry.harmonic(4, OMEGA_AX, 39.962590863, K_C)
        single = lamb_dicke(OMEGA_AX, CA40, K_C)
        self.assertAlmostEqual(chain.eta(0)[0], single / 2.0, places=12)
        self.assertEqual(chain.mode_frequencies, (OMEGA_AX,))

    def test_rejects_unordered_positions(self):
        with self.assertRaises(ValidationError):
            ChainGeometry.from_positions([1e-6, 0.0], OMEGA_AX, 0.09)

    def test_rejects_bad_mode_frequency(self):
        with self.assertRaises(ValidationError):
            ChainGeometry.from_positions([0.0], -OMEGA_AX, 0.09)

    def test_ion_index_checked(self):
        chain = ChainGeometry.from_positions([0.0], OMEGA_AX, 0.09)
        with self.assertRaises(ConfigError):
            chain.eta(1)


if __name__ == "__main__":
    unittest.main()
