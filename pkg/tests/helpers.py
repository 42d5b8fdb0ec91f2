"""Fixtures shared by the test modules: a small level scheme and an analytic phase profile."""
import numpy as np

from combgate.atomic import parse_level_scheme
from combgate.chain import ChainGeometry
from combgate.comb import CombConfig
from combgate.constants import C
from combgate.magnus import PhaseProfile

QUBIT = ("S1/2(-1/2)", "D5/2(-1/2)")

# one stable excited manifold and one short-lived manifold decaying to both
TOY_SCHEME = """
SPECIES   Toy
MASS_AMU  40.0
ZEEMAN_MHZ 0.0

LEVELS
S1/2   0.0     THz  1/2  0
D3/2   100.0   THz  3/2  0
P1/2   650.0   THz  1/2  4.0e7

LINES
P1/2   S1/2   3.5e7
P1/2   D3/2   5.0e6
"""


def toy_scheme(zeeman_mhz=None):
    return parse_level_scheme(TOY_SCHEME, zeeman_mhz=zeeman_mhz, source="toy")


def single_ion(eta=0.0, axial_frequency=2.0 * np.pi * 600e3):
    return ChainGeometry.from_positions([0.0], axial_frequency, eta)


class GaussianRipple:
    """
    Closed-form stand-in for the Stark integrals: the phase doubles at the overlap
    point and relaxes to ``far`` with a Gaussian envelope in the arrival lag.
    """

    def __init__(self, far=(2.0e-3, 4.0e-3), cfg=None):
        self.cfg = cfg or CombConfig()
        self.far_phases = np.asarray(far, dtype=float)

    def far(self):
        return self.far_phases.copy()

    def evaluate(self, offsets):
        offsets = np.atleast_1d(np.asarray(offsets, dtype=float))
        lag = 2.0 * offsets / C
        gauss = np.exp(-((lag / self.cfg.pulse_duration) ** 2) / 2.0)
        ripple = np.exp(2j * self.cfg.wavevector * offsets)
        first = 0.5 * self.far_phases[:, None] * gauss[None, :] * ripple[None, :]
        second = 0.5 * self.far_phases[:, None] * gauss[None, :] * ripple.conj()[None, :]
        theta = self.far_phases[:, None] + (first + second).real
        return theta, first, second


def analytic_profile(far=(2.0e-3, 4.0e-3), x_target=0.0, cfg=None, half_width=3e-6, points=61):
    cfg = cfg or CombConfig()
    integral = GaussianRipple(far, cfg)
    x = x_target + np.linspace(-half_width, half_width, points)
    theta, first, second = integral.evaluate(x - x_target)
    return PhaseProfile(
        levels=QUBIT,
        x=x,
        theta=theta,
        far=integral.far(),
        x_target=x_target,
        wavevector=cfg.wavevector,
        period=cfg.period,
        integral=integral,
    )


class FixedProfile:
    """Only answers the per-pair differential phase."""

    def __init__(self, per_pulse):
        self.per_pulse = per_pulse

    def differential_at(self, x):
        return self.per_pulse
