"""
The two counter-propagating pulse trains.

Comb 1 travels towards +x and comb 2 towards -x. Within the k-th window
(|t - kT| < T/2) the real field is

    E(t, x) = sum_j [ E_env(s - t_j^x) exp(-i w_c (s - t_j^x) + i phi) + c.c. ] u_j

with s = t - kT, t_1^x = t_1 + x/c and t_2^x = t_2 - x/c. The carrier phase is
referenced to each pulse pair, which makes the train exactly T-periodic.

Fourier convention, used project-wide:

    E(w) = integral E(t) exp(+i w t) dt,    E(t) = integral E(w) exp(-i w t) dw / 2 pi
"""
from typing import Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator, model_validator

from .constants import C

POLARIZATION_TOLERANCE = 1e-9
SEPARABILITY = 1e-3


class CombConfig(BaseModel):
    """Physical parameters of the comb pair, SI units throughout."""

    model_config = ConfigDict(frozen=True)

    carrier_wavelength: float = 1000e-9
    pulse_duration: float = 20e-15
    repetition_rate: float = 100e6
    delay_1: float = 0.0
    delay_2: float = 0.0
    polarization: Tuple[float, float, float] = (0.0, 0.0, 1.0)
    polarization_2: Optional[Tuple[float, float, float]] = None
    # e * a0 * E_peak / hbar, rad/s
    peak_field: float = 4.405e12
    n_pulses: int = 1
    carrier_envelope_phase: float = 0.0

    @field_validator("polarization", "polarization_2")
    @classmethod
    def _unit_vector(cls, value):
        if value is not None and abs(np.linalg.norm(value) - 1.0) > POLARIZATION_TOLERANCE:
            raise ValueError(f"polarization {value} is not a unit vector")
        return value

    @field_validator("carrier_wavelength", "pulse_duration", "repetition_rate")
    @classmethod
    def _positive(cls, value):
        if value <= 0:
            raise ValueError("must be positive")
        return value

    @model_validator(mode="after")
    def _separable(self):
        if self.pulse_duration >= SEPARABILITY * self.period:
            raise ValueError(
                f"pulse duration {self.pulse_duration:.3e} s is not << period {self.period:.3e} s"
            )
        if self.peak_field < 0:
            raise ValueError("peak field must be >= 0")
        if self.n_pulses < 0:
            raise ValueError("n_pulses must be >= 0")
        return self

    @property
    def omega_c(self) -> float:
        return 2.0 * np.pi * C / self.carrier_wavelength

    @property
    def wavevector(self) -> float:
        return 2.0 * np.pi / self.carrier_wavelength

    @property
    def period(self) -> float:
        return 1.0 / self.repetition_rate

    @property
    def delay_difference(self) -> float:
        return self.delay_2 - self.delay_1

    @property
    def overlap_center(self) -> float:
        return C * self.delay_difference / 2.0

    @property
    def polarizations(self) -> Tuple[Tuple[float, float, float], Tuple[float, float, float]]:
        return self.polarization, self.polarization_2 or self.polarization

    def with_delays(self, delay_1: float, delay_2: float) -> "CombConfig":
        return self.model_copy(update={"delay_1": delay_1, "delay_2": delay_2})

    def targeting(self, x_target: float) -> "CombConfig":
        """Delays that put the overlap point on x_target (t1 = 0)."""
        return self.with_delays(0.0, 2.0 * x_target / C)

    def scaled(self, field_scale: float) -> "CombConfig":
        return self.model_copy(update={"peak_field": self.peak_field * field_scale})

    def with_pulses(self, n_pulses: int) -> "CombConfig":
        return self.model_copy(update={"n_pulses": int(n_pulses)})


def envelope(t, cfg: CombConfig):
    return cfg.peak_field * np.exp(-((np.asarray(t) / cfg.pulse_duration) ** 2))


def envelope_fourier(omega, cfg: CombConfig):
    tau = cfg.pulse_duration
    return cfg.peak_field * tau * np.sqrt(np.pi) * np.exp(-((np.asarray(omega) * tau) ** 2) / 4.0)


def single_pulse_spectrum(omega, cfg: CombConfig):
    """Spectrum of one real pulse centred at t = 0 (both carrier sidebands)."""
    omega = np.asarray(omega, dtype=float)
    phase = np.exp(1j * cfg.carrier_envelope_phase)
    return phase * envelope_fourier(omega - cfg.omega_c, cfg) + np.conj(phase) * envelope_fourier(
        omega + cfg.omega_c, cfg
    )


def arrival_times(x, cfg: CombConfig):
    x = np.asarray(x, dtype=float)
    return cfg.delay_1 + x / C, cfg.delay_2 - x / C


def comb_spectra(omega, x, cfg: CombConfig):
    """Per-comb spectra of the k-th pulse pair, seen by an ion at x."""
    omega = np.asarray(omega, dtype=float)
    spectrum = single_pulse_spectrum(omega, cfg)
    t1, t2 = arrival_times(x, cfg)
    return spectrum * np.exp(1j * omega * t1), spectrum * np.exp(1j * omega * t2)


def pair_field_fourier(omega, x, cfg: CombConfig):
    s1, s2 = comb_spectra(omega, x, cfg)
    return s1 + s2


def comb_fields_time(s, x, cfg: CombConfig):
    """Real scalar field of each comb at pair-local time s and position x."""
    s = np.asarray(s, dtype=float)
    t1, t2 = arrival_times(x, cfg)
    fields = []
    for arrival in (t1, t2):
        lag = s - arrival
        fields.append(
            2.0 * envelope(lag, cfg) * np.cos(cfg.omega_c * lag - cfg.carrier_envelope_phase)
        )
    return fields[0], fields[1]


def pair_field_time(t, x, k: int, cfg: CombConfig):
    """Real field vector(s), shape (..., 3); zero outside the k-th window."""
    s = np.asarray(t, dtype=float) - k * cfg.period
    f1, f2 = comb_fields_time(s, x, cfg)
    inside = np.abs(s) < cfg.period / 2.0
    f1, f2 = np.where(inside, f1, 0.0), np.where(inside, f2, 0.0)
    u1, u2 = (np.asarray(u, dtype=float) for u in cfg.polarizations)
    return np.asarray(f1)[..., None] * u1 + np.asarray(f2)[..., None] * u2
