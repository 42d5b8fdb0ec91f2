"""CODATA constants and unit conversions.

Internally energies are angular frequencies (rad/s, hbar = 1), dipoles are in
e*a0 and field amplitudes are stored as the Rabi-like rate e*a0*E/hbar in rad/s.
"""
from pydantic import BaseModel, ConfigDict
from scipy import constants as sc

C = sc.c
HBAR = sc.hbar
EPS0 = sc.epsilon_0
E_CHARGE = sc.e
A0 = sc.physical_constants["Bohr radius"][0]
AMU = sc.physical_constants["atomic mass constant"][0]

EA0 = E_CHARGE * A0  # C*m


class PhysicalConstants(BaseModel):
    model_config = ConfigDict(frozen=True)

    c: float = C
    hbar: float = HBAR
    eps0: float = EPS0
    e: float = E_CHARGE
    a0: float = A0
    mass: float

    @classmethod
    def for_mass_amu(cls, mass_amu: float) -> "PhysicalConstants":
        return cls(mass=mass_amu * AMU)


def field_rate_to_si(rate: float) -> float:
    """e*a0*E/hbar [rad/s] -> E [V/m]."""
    return rate * HBAR / EA0


def thz_to_rad(nu_thz: float) -> float:
    return 2.0 * sc.pi * nu_thz * 1e12


def wavenumber_to_rad(sigma_cm: float) -> float:
    return 2.0 * sc.pi * C * 100.0 * sigma_cm
