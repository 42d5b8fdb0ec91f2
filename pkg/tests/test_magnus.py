import unittest

import numpy as np

from combgate.atomic import load_level_scheme
from combgate.budget import leakage_channels, leakage_probability
from combgate.comb import CombConfig
from combgate.errors import ConfigError
from combgate.lindblad import MasterEquation, SimOptions
from combgate.magnus import (
    magnus_first_order,
    magnus_second_order,
    phase_shift_profile,
    pulse_pair_operator,
    spectral_windows,
    train_propagator,
)
from tests.helpers import QUBIT, analytic_profile, single_ion, toy_scheme

TWO_PI = 2.0 * np.pi


class TestSpectralWindows(unittest.TestCase):

    def test_diagonal_window_covers_carrier(self):
        cfg = CombConfig()
        windows = spectral_windows(0.0, cfg)
        self.assertTrue(any(lo <= cfg.omega_c <= hi for lo, hi in windows))
        self.assertTrue(all(lo < hi for lo, hi in windows))
        self.assertTrue(all(a[1] < b[0] for a, b in zip(windows, windows[1:])))

    def test_large_detuning_has_no_window(self):
        cfg = CombConfig()
        self.assertEqual(spectral_windows(10.0 * cfg.omega_c, cfg), [])


class TestToyPairOperator(unittest.TestCase):

    @classmethod
    def setUpClass(cls) -> None:
        cls.scheme = toy_scheme()
        cls.cfg = CombConfig()
        cls.operator = pulse_pair_operator(cls.scheme, cls.cfg, 0.0)

    def test_first_order_is_anti_hermitian(self):
        X = magnus_first_order(self.scheme, self.cfg, 0.3e-6)
        np.testing.assert_array_equal(X, -X.conj().T)

    def test_unitarity(self):
        self.assertLess(self.operator.unitarity_error, 1e-10)

    def test_undriven_levels_untouched(self):
        # pi light cannot reach the stretched D3/2 sublevels
        for label in ("D3/2(-3/2)", "D3/2(+3/2)"):
            self.assertAlmostEqual(self.operator.element(label, label), 1.0, places=12)

    def test_single_entry_matches_matrix(self):
        entry = magnus_second_order(self.scheme, self.cfg, 0.0, "S1/2(-1/2)", "S1/2(-1/2)")
        i = self.scheme.index("S1/2(-1/2)")
        self.assertEqual(entry, self.operator.Y[i, i])
        self.assertGreater(abs(entry.imag), 0.0)

    def test_field_scaling(self):
        stronger = self.cfg.scaled(2.0)
        X = magnus_first_order(self.scheme, self.cfg, 0.1e-6)
        np.testing.assert_allclose(magnus_first_order(self.scheme, stronger, 0.1e-6), 2.0 * X, rtol=1e-12, atol=0.0)
        i = self.scheme.index("S1/2(-1/2)")
        Y = magnus_second_order(self.scheme, stronger, 0.0, i, i)
        self.assertAlmostEqual(Y.imag / self.operator.Y[i, i].imag, 4.0, places=6)

    def test_zero_field_is_identity(self):
        operator = pulse_pair_operator(self.scheme, self.cfg.scaled(0.0), 0.0)
        np.testing.assert_allclose(operator.U, np.eye(self.scheme.size), atol=1e-15)
        np.testing.assert_array_equal(operator.Y, np.zeros((self.scheme.size,) * 2))

    def test_against_direct_integration(self):
        equation = MasterEquation(
            self.scheme, self.cfg, single_ion(), self.scheme.labels, options=SimOptions(n_max=0)
        )
        direct = equation.pair_propagator()
        difference = np.linalg.norm(self.operator.U - direct, ord=2)
        self.assertLess(difference, 1e-6)

    def test_train_propagator_is_ordered_product(self):
        cfg = self.cfg.with_pulses(3)
        total = train_propagator(self.scheme, cfg, operator=self.operator)
        step = np.mod(self.scheme.energies() * cfg.period, TWO_PI)
        expected = np.eye(self.scheme.size, dtype=complex)
        for k in range(3):
            free = np.exp(1j * np.mod(k * step, TWO_PI))
            expected = (free[:, None] * self.operator.U * free.conj()[None, :]) @ expected
        np.testing.assert_allclose(total, expected, atol=1e-12)

    def test_train_needs_pulses(self):
        with self.assertRaises(ConfigError):
            train_propagator(self.scheme, self.cfg.with_pulses(0), operator=self.operator)


class TestInterferenceEnvelope(unittest.TestCase):

    @classmethod
    def setUpClass(cls) -> None:
        cls.profile = analytic_profile()

    def test_full_ripple_at_overlap(self):
        self.assertAlmostEqual(self.profile.interference_envelope(0.0), self.profile.far_differential, places=15)

    def test_bounds_the_ripple(self):
        x = np.linspace(-1e-6, 1e-6, 401)
        ripple = np.abs(self.profile.differential_at(x) - self.profile.far_differential)
        envelope = self.profile.interference_envelope(x)
        self.assertEqual(envelope.shape, x.shape)
        self.assertTrue(np.all(ripple <= envelope * (1 + 1e-12) + 1e-18))

    def test_vanishes_far_away(self):
        self.assertLess(self.profile.interference_envelope(50e-6), 1e-12 * self.profile.far_differential)


class TestCalciumProfile(unittest.TestCase):
    """Reference parameters: 1000 nm, 20 fs, 100 MHz, pi light, e a0 E / hbar = 4.405e12 rad/s."""

    @classmethod
    def setUpClass(cls) -> None:
        cls.scheme = load_level_scheme()
        cls.cfg = CombConfig()
        cls.quarter = cls.cfg.carrier_wavelength / 4.0
        grid = np.array([-cls.quarter, 0.0, cls.quarter, 0.2e-6, 50e-6])
        cls.profile = phase_shift_profile(cls.scheme, cls.cfg, QUBIT, grid)

    def test_overlap_doubles_the_phase(self):
        ratio = self.profile.at(0.0) / self.profile.far
        np.testing.assert_allclose(ratio, [2.0, 2.0], atol=1e-3)

    def test_far_field_is_exact_beyond_overlap(self):
        np.testing.assert_array_equal(self.profile.at(50e-6), self.profile.far)

    def test_differential_phase_per_pair(self):
        per_pulse = self.profile.differential_at(0.0)
        self.assertGreater(per_pulse, 0.0)
        self.assertAlmostEqual(per_pulse / (np.pi / 1600), 1.0, delta=0.2)

    def test_standing_wave_nodes(self):
        node = self.profile.at(self.quarter)
        self.assertTrue(np.all(np.abs(node) < 0.05 * np.abs(self.profile.far)))
        np.testing.assert_allclose(self.profile.at(-self.quarter), node, rtol=0.0, atol=1e-8 * np.max(np.abs(self.profile.far)))

    def test_grid_matches_queries(self):
        np.testing.assert_allclose(self.profile.theta[:, 3], self.profile.at(0.2e-6), rtol=1e-7)

    def test_second_order_diagonal_is_the_stark_phase(self):
        centre = self.profile.at(0.0)
        for i, label in enumerate(QUBIT):
            Y = magnus_second_order(self.scheme, self.cfg, 0.0, label, label)
            self.assertAlmostEqual(Y.imag / centre[i], 1.0, delta=1e-4)

    def test_motional_average_below_peak(self):
        spread = 0.0912 / self.cfg.wavevector
        averaged = self.profile.motional_average(0.0, spread)
        self.assertTrue(np.all(np.abs(averaged) < np.abs(self.profile.at(0.0))))
        self.assertTrue(np.all(np.abs(averaged) > np.abs(self.profile.far)))

    def test_profile_frame(self):
        frame = self.profile.to_frame()
        self.assertEqual(list(frame.columns), ["x_m", "dtheta0_rad", "dtheta1_rad", "differential_rad"])
        self.assertEqual(len(frame), 5)

    def test_unknown_qubit_level(self):
        with self.assertRaises(ConfigError):
            phase_shift_profile(self.scheme, self.cfg, ("S1/2(-1/2)",), [0.0])


class TestCalciumPairOperator(unittest.TestCase):

    @classmethod
    def setUpClass(cls) -> None:
        cls.scheme = load_level_scheme()
        cls.cfg = CombConfig()
        cls.operator = pulse_pair_operator(cls.scheme, cls.cfg, 0.0)

    def test_unitarity(self):
        self.assertLess(self.operator.unitarity_error, 1e-10)

    def test_qubit_loss_is_small(self):
        for label in QUBIT:
            self.assertLess(abs(self.operator.loss[self.scheme.index(label)]), 1e-7)

    def test_no_direct_qubit_coupling(self):
        self.assertLess(abs(self.operator.element(QUBIT[1], QUBIT[0])), 1e-12)

    def _train(self, n_pulses):
        return train_propagator(self.scheme, self.cfg.with_pulses(n_pulses), operator=self.operator)

    def test_train_phase_is_additive(self):
        a, b = (self.scheme.index(label) for label in QUBIT)
        per_pair = np.angle(self.operator.U[b, b] * np.conj(self.operator.U[a, a]))
        profile = phase_shift_profile(self.scheme, self.cfg, QUBIT, [0.0])
        total = self._train(200)
        accumulated = np.angle(total[b, b] * np.conj(total[a, a]))
        self.assertAlmostEqual(accumulated / (200 * per_pair), 1.0, delta=1e-3)
        theta = profile.at(0.0)
        self.assertAlmostEqual(accumulated / (200 * (theta[1] - theta[0])), 1.0, delta=1e-3)

    def test_fine_structure_leakage_follows_geometric_sum(self):
        channel = next(
            c for c in leakage_channels(self.scheme, self.operator, QUBIT, self.cfg.period)
            if c.initial == QUBIT[1] and c.final == "D3/2(-1/2)"
        )
        g, a = self.scheme.index(channel.final), self.scheme.index(channel.initial)
        for n_pulses in (1, 2, 4, 7):
            expected = leakage_probability(channel, n_pulses).amplitude
            self.assertAlmostEqual(abs(self._train(n_pulses)[g, a]) / expected, 1.0, delta=5e-2)
        for n_pulses in (50, 400, 800):
            bound = leakage_probability(channel, n_pulses).bound_amplitude
            self.assertLessEqual(abs(self._train(n_pulses)[g, a]), 1.05 * bound)


if __name__ == "__main__":
    unittest.main()
