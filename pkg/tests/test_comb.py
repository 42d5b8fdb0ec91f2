import unittest

import numpy as np
from pydantic import ValidationError

from combgate.comb import (
    CombConfig,
    arrival_times,
    comb_fields_time,
    envelope,
    envelope_fourier,
    pair_field_fourier,
    pair_field_time,
    single_pulse_spectrum,
)
from combgate.constants import C


class TestCombConfig(unittest.TestCase):

    def test_reference_values(self):
        cfg = CombConfig()
        self.assertAlmostEqual(cfg.period, 1e-8, places=20)
        self.assertAlmostEqual(cfg.omega_c / (2 * np.pi * C / 1000e-9), 1.0, places=14)
        self.assertEqual(cfg.polarizations, ((0.0, 0.0, 1.0), (0.0, 0.0, 1.0)))

    def test_rejects_non_unit_polarization(self):
        with self.assertRaises(ValidationError):
            CombConfig(polarization=(1.0, 1.0, 0.0))

    def test_rejects_long_pulses(self):
        with self.assertRaises(ValidationError):
            CombConfig(pulse_duration=1e-10)

    def test_rejects_negative_field(self):
        with self.assertRaises(ValidationError):
            CombConfig(peak_field=-1.0)

    def test_targeting_moves_overlap(self):
        cfg = CombConfig().targeting(15e-6)
        self.assertAlmostEqual(cfg.delay_difference * 1e15, 100.069, places=3)
        self.assertAlmostEqual(cfg.overlap_center, 15e-6, places=18)
        t1, t2 = arrival_times(15e-6, cfg)
        self.assertAlmostEqual(t1, t2, places=26)


class TestEnvelope(unittest.TestCase):

    def setUp(self) -> None:
        self.cfg = CombConfig()

    def test_gaussian_shape(self):
        tau = self.cfg.pulse_duration
        self.assertEqual(envelope(0.0, self.cfg), self.cfg.peak_field)
        self.assertAlmostEqual(envelope(tau, self.cfg) / self.cfg.peak_field, np.exp(-1.0), places=14)

    def test_fourier_transform_against_direct_sum(self):
        tau = self.cfg.pulse_duration
        t = np.linspace(-12 * tau, 12 * tau, 8001)
        dt = t[1] - t[0]
        omega = np.linspace(-4.0 / tau, 4.0 / tau, 101)
        direct = np.exp(1j * np.outer(omega, t)) @ envelope(t, self.cfg) * dt
        np.testing.assert_allclose(direct, envelope_fourier(omega, self.cfg), rtol=1e-8, atol=1e-12 * self.cfg.peak_field * tau)

    def test_parseval(self):
        tau = self.cfg.pulse_duration
        t = np.linspace(-10 * tau, 10 * tau, 400001)
        field = 2.0 * envelope(t, self.cfg) * np.cos(self.cfg.omega_c * t)
        energy_time = np.sum(field**2) * (t[1] - t[0])

        span = 20.0 / tau
        omega = np.linspace(-self.cfg.omega_c - span, self.cfg.omega_c + span, 400001)
        spectrum = single_pulse_spectrum(omega, self.cfg)
        energy_freq = np.sum(np.abs(spectrum) ** 2) * (omega[1] - omega[0]) / (2 * np.pi)
        self.assertAlmostEqual(energy_time / energy_freq, 1.0, places=6)

    def test_spectrum_is_hermitian(self):
        cfg = CombConfig(carrier_envelope_phase=0.7)
        omega = cfg.omega_c + np.linspace(-3, 3, 7) / cfg.pulse_duration
        np.testing.assert_allclose(single_pulse_spectrum(-omega, cfg), np.conj(single_pulse_spectrum(omega, cfg)))


class TestPairField(unittest.TestCase):

    def setUp(self) -> None:
        self.cfg = CombConfig()
        self.single_peak = 2.0 * self.cfg.peak_field

    def test_constructive_overlap_at_centre(self):
        field = pair_field_time(0.0, 0.0, 0, self.cfg)
        np.testing.assert_allclose(field, [0.0, 0.0, 2.0 * self.single_peak])

    def test_no_overlap_far_away(self):
        tau = self.cfg.pulse_duration
        x = 20 * tau * C
        s = np.linspace(-3 * x / C, 3 * x / C, 200001)
        f1, f2 = comb_fields_time(s, x, self.cfg)
        self.assertLessEqual(np.max(np.abs(f1 + f2)), self.single_peak * (1.0 + 1e-9))

    def test_train_is_periodic(self):
        s = np.linspace(-100e-15, 100e-15, 41)
        x = 0.4e-6
        first = pair_field_time(s, x, 0, self.cfg)
        later = pair_field_time(s + 7 * self.cfg.period, x, 7, self.cfg)
        # absolute time loses ~1e-23 s to rounding at 7T
        np.testing.assert_allclose(later, first, rtol=0.0, atol=1e-6 * self.single_peak)

    def test_zero_outside_window(self):
        field = pair_field_time(0.6 * self.cfg.period, 0.0, 0, self.cfg)
        np.testing.assert_array_equal(field, np.zeros(3))

    def test_spectral_intensity_doubles_in_amplitude_at_centre(self):
        omega = self.cfg.omega_c + np.linspace(-2, 2, 9) / self.cfg.pulse_duration
        pair = pair_field_fourier(omega, 0.0, self.cfg)
        single = single_pulse_spectrum(omega, self.cfg)
        np.testing.assert_allclose(np.abs(pair) ** 2, 4.0 * np.abs(single) ** 2, rtol=1e-12)

    def test_standing_wave_period(self):
        wavelength = self.cfg.carrier_wavelength
        x = np.array([0.1e-6, 0.1e-6 + wavelength / 2.0])
        pair = pair_field_fourier(self.cfg.omega_c, x, self.cfg)
        self.assertAlmostEqual(abs(pair[0]) ** 2 / abs(pair[1]) ** 2, 1.0, places=6)

    def test_independent_polarizations(self):
        cfg = CombConfig(polarization=(1.0, 0.0, 0.0), polarization_2=(0.0, 1.0, 0.0))
        field = pair_field_time(0.0, 0.0, 0, cfg)
        np.testing.assert_allclose(field, [self.single_peak, self.single_peak, 0.0])


if __name__ == "__main__":
    unittest.main()
