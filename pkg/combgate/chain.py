"""
Ion-chain geometry: equilibrium positions along the trap axis, normal-mode
frequencies and Lamb-Dicke parameters, plus the delay <-> target-position map
of the comb pair.
"""
import logging
from typing import Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator
from scipy.optimize import root

from .constants import C, E_CHARGE, EPS0, HBAR, PhysicalConstants
from .errors import ConfigError, NumericsError

logger = logging.getLogger(__name__)

NEWTON_TOLERANCE = 1e-12
NEWTON_MAX_STEPS = 200


def lamb_dicke(omega_ax: float, mass: float, wavevector: float) -> float:
    """eta = k_c sqrt(hbar / (2 m omega_ax)); mass in kg."""
    if omega_ax <= 0 or mass <= 0 or wavevector <= 0:
        raise ConfigError(
            f"Lamb-Dicke parameter needs positive inputs (omega_ax={omega_ax}, mass={mass}, k={wavevector})"
        )
    return float(wavevector * np.sqrt(HBAR / (2.0 * mass * omega_ax)))


def delay_for_target(x_target: float) -> float:
    """t2 - t1 placing the comb overlap at x_target."""
    return 2.0 * x_target / C


def target_from_delay(delay: float) -> float:
    return C * delay / 2.0


def coulomb_length(omega_ax: float, mass: float) -> float:
    return float((E_CHARGE**2 / (4.0 * np.pi * EPS0 * mass * omega_ax**2)) ** (1.0 / 3.0))


def _force_balance(u: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    diff = u[:, None] - u[None, :]
    np.fill_diagonal(diff, np.inf)
    force = u - np.sum(np.sign(diff) / diff**2, axis=1)
    coupling = 2.0 / np.abs(diff) ** 3
    jacobian = -coupling
    np.fill_diagonal(jacobian, 1.0 + coupling.sum(axis=1))
    return force, jacobian


def equilibrium_positions(n_ions: int, omega_ax: float, mass: float) -> np.ndarray:
    """
    Equilibrium of N ions in a harmonic axial well with Coulomb repulsion.

    In units of l = (e^2 / (4 pi eps0 m omega^2))^(1/3) the force balance reads
    u_m - sum_{n<m} 1/(u_m - u_n)^2 + sum_{n>m} 1/(u_m - u_n)^2 = 0; it is solved
    with Newton steps on the analytic Jacobian (MINPACK hybrid method) from a
    uniform guess.
    """
    if n_ions < 1:
        raise ConfigError(f"need at least one ion, got {n_ions}")
    if omega_ax <= 0 or mass <= 0:
        raise ConfigError("axial frequency and mass must be positive")
    if n_ions == 1:
        return np.zeros(1)

    spacing = 2.018 / n_ions**0.559
    guess = spacing * (np.arange(n_ions) - (n_ions - 1) / 2.0)
    solution = root(
        _force_balance, guess, jac=True, method="hybr",
        options={"xtol": NEWTON_TOLERANCE, "maxfev": NEWTON_MAX_STEPS},
    )
    if not solution.success:
        raise NumericsError(f"equilibrium positions of {n_ions} ions did not converge: {solution.message}")
    logger.debug("equilibrium of %d ions after %d evaluations", n_ions, solution.nfev)

    u = np.sort(solution.x)
    return u * coulomb_length(omega_ax, mass)


class ChainGeometry(BaseModel):
    """
    Ion positions (m), mode angular frequencies (rad/s) and the Lamb-Dicke
    matrix eta[i][s] for ion i and mode s.
    """

    model_config = ConfigDict(frozen=True)

    positions: Tuple[float, ...]
    mode_frequencies: Tuple[float, ...]
    lamb_dicke: Tuple[Tuple[float, ...], ...]

    @model_validator(mode="after")
    def _check_geometry(self):
        positions = np.asarray(self.positions)
        if positions.size == 0:
            raise ValueError("chain has no ions")
        if np.any(np.diff(positions) <= 0):
            raise ValueError("ion positions must be strictly increasing")
        if any(w <= 0 for w in self.mode_frequencies):
            raise ValueError("mode frequencies must be positive")
        if len(self.lamb_dicke) != positions.size:
            raise ValueError("one row of Lamb-Dicke parameters per ion required")
        for row in self.lamb_dicke:
            if len(row) != len(self.mode_frequencies) or not np.all(np.isfinite(row)):
                raise ValueError("Lamb-Dicke rows must be finite with one entry per mode")
        return self

    @property
    def n_ions(self) -> int:
        return len(self.positions)

    @property
    def n_modes(self) -> int:
        return len(self.mode_frequencies)

    def eta(self, ion: int) -> np.ndarray:
        return np.asarray(self.lamb_dicke[self.check_ion(ion)], dtype=float)

    def check_ion(self, ion: int) -> int:
        if not 0 <= ion < self.n_ions:
            raise ConfigError(f"ion index {ion} outside chain of {self.n_ions}")
        return ion

    def neighbours(self, ion: int) -> Sequence[int]:
        return [i for i in range(self.n_ions) if i != ion]

    @classmethod
    def from_positions(cls, positions: Sequence[float], axial_frequency: float, eta: float) -> "ChainGeometry":
        """One axial mode seen with the same Lamb-Dicke parameter by every ion."""
        return cls(
            positions=tuple(float(p) for p in positions),
            mode_frequencies=(float(axial_frequency),),
            lamb_dicke=tuple((float(eta),) for _ in positions),
        )

    @classmethod
    def harmonic(
        cls,
        n_ions: int,
        axial_frequency: float,
        mass_amu: float,
        wavevector: float,
        eta: Optional[float] = None,
    ) -> "ChainGeometry":
        """Equilibrium chain with its centre-of-mass mode (eta / sqrt(N) per ion)."""
        mass = PhysicalConstants.for_mass_amu(mass_amu).mass
        positions = equilibrium_positions(n_ions, axial_frequency, mass)
        single = eta if eta is not None else lamb_dicke(axial_frequency, mass, wavevector)
        per_ion = single / np.sqrt(n_ions)
        return cls(
            positions=tuple(float(p) for p in positions),
            mode_frequencies=(float(axial_frequency),),
            lamb_dicke=tuple((float(per_ion),) for _ in range(n_ions)),
        )
