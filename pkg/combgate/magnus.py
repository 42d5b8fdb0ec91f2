"""
Pulse-pair evolution operators from the second-order Magnus expansion.

For the k-th pair the interaction-picture propagator is U_k = exp(X_k + Y_k):

    X_ab = +i E(e_a - e_b) (u.d)_ab

    Y_ab = (i / 2 pi) integral dw  sum_g  V_ag(D/2 - w) V_gb(D/2 + w)
                                         / (e_g - i G_g/2 - (e_a + e_b)/2 - w)

with D = e_a - e_b and V(w) = sum_j s_j(w) (u_j.d) the pair spectrum weighted by
each comb's polarization. The diagonal of Y reduces to the AC Stark phase per
pair, evaluated here along the trap axis as a PhaseProfile.
"""
import logging
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy.linalg import expm, polar

from .atomic import LevelScheme
from .comb import CombConfig, comb_spectra, envelope_fourier
from .constants import C
from .errors import ConfigError
from .quadrature import integrate

logger = logging.getLogger(__name__)

# |E_env(w - w_c)|^2 has dropped below 1e-30 of its peak beyond this many 1/tau
SPECTRAL_HALF_WIDTH = 12.0
# comb arrival-time mismatch (in tau) beyond which the interference term is < 1e-30
FAR_FIELD_LAG = 12.0
# width given to zero-linewidth intermediate levels, in 1/tau
POLE_FLOOR = 1e-6

LevelRef = Union[int, str]


def _index(scheme: LevelScheme, level: LevelRef) -> int:
    return scheme.index(level) if isinstance(level, str) else int(level)


def _couplings(scheme: LevelScheme, cfg: CombConfig) -> Tuple[np.ndarray, np.ndarray]:
    u1, u2 = cfg.polarizations
    return scheme.coupling_matrix(u1), scheme.coupling_matrix(u2)


def _pole_halfwidths(scheme: LevelScheme, cfg: CombConfig) -> np.ndarray:
    return np.maximum(scheme.linewidths() / 2.0, POLE_FLOOR / cfg.pulse_duration)


# ------------------ First order ------------------

def magnus_first_order(scheme: LevelScheme, cfg: CombConfig, x: float) -> np.ndarray:
    """X for the pair seen at position x; exactly anti-Hermitian by construction."""
    eps = scheme.energies()
    detuning = eps[:, None] - eps[None, :]
    ud1, ud2 = _couplings(scheme, cfg)
    s1, s2 = comb_spectra(detuning, x, cfg)
    upper = np.triu(1j * (s1 * ud1 + s2 * ud2), k=1)
    return upper - upper.conj().T


# ------------------ Second order ------------------

def _merge(windows: List[Tuple[float, float]]) -> List[Tuple[float, float]]:
    merged: List[Tuple[float, float]] = []
    for lo, hi in sorted(windows):
        if merged and lo <= merged[-1][1]:
            merged[-1] = (merged[-1][0], max(merged[-1][1], hi))
        else:
            merged.append((lo, hi))
    return merged


def spectral_windows(detuning: float, cfg: CombConfig) -> List[Tuple[float, float]]:
    """w-intervals where both s(D/2 - w) and s(D/2 + w) are non-negligible."""
    half = SPECTRAL_HALF_WIDTH / cfg.pulse_duration
    windows = []
    for sign_1 in (1.0, -1.0):
        for sign_2 in (1.0, -1.0):
            centre_1 = detuning / 2.0 - sign_1 * cfg.omega_c
            centre_2 = sign_2 * cfg.omega_c - detuning / 2.0
            lo, hi = max(centre_1, centre_2) - half, min(centre_1, centre_2) + half
            if lo < hi:
                windows.append((lo, hi))
    return _merge(windows)


class SecondOrderKernel:
    """Frequency integrals of the second Magnus term at one position."""

    def __init__(self, scheme: LevelScheme, cfg: CombConfig, x: float):
        self.cfg = cfg
        self.x = x
        self.eps = scheme.energies()
        self.halfwidths = _pole_halfwidths(scheme, cfg)
        self.ud1, self.ud2 = _couplings(scheme, cfg)
        strength = np.abs(self.ud1) + np.abs(self.ud2)
        self.connected = (strength @ strength) > 0

    def entry(self, a: int, b: int, rtol: float = 1e-9) -> complex:
        ud1, ud2 = self.ud1, self.ud2
        via = np.nonzero((np.abs(ud1[a]) + np.abs(ud2[a])) * (np.abs(ud1[:, b]) + np.abs(ud2[:, b])) > 0)[0]
        if via.size == 0 or self.cfg.peak_field == 0.0:
            return 0j

        detuning = self.eps[a] - self.eps[b]
        poles = self.eps[via] - (self.eps[a] + self.eps[b]) / 2.0
        halfwidths = self.halfwidths[via]
        resolvent = poles - 1j * halfwidths
        row_1, row_2 = ud1[a, via], ud2[a, via]
        col_1, col_2 = ud1[via, b], ud2[via, b]
        cfg, x = self.cfg, self.x

        def integrand(omega):
            s11, s21 = comb_spectra(detuning / 2.0 - omega, x, cfg)
            s12, s22 = comb_spectra(detuning / 2.0 + omega, x, cfg)
            value = np.sum((s11 * row_1 + s21 * row_2) * (s12 * col_1 + s22 * col_2) / (resolvent - omega))
            value = value * 1j / (2.0 * np.pi)
            return np.array([value.real, value.imag])

        total = np.zeros(2)
        for lo, hi in spectral_windows(detuning, cfg):
            total += integrate(
                integrand, lo, hi,
                poles=poles, widths=halfwidths, rtol=rtol, label=f"Y[{a},{b}]",
            )
        return complex(total[0], total[1])

    def matrix(self, rtol: float = 1e-9) -> np.ndarray:
        n = self.eps.size
        Y = np.zeros((n, n), dtype=complex)
        for a, b in zip(*np.nonzero(self.connected)):
            Y[a, b] = self.entry(int(a), int(b), rtol)
        return Y


def magnus_second_order(
    scheme: LevelScheme, cfg: CombConfig, x: float, alpha: LevelRef, beta: LevelRef, *, rtol: float = 1e-9
) -> complex:
    """One entry Y_ab; poles regularized by the intermediate linewidths."""
    return SecondOrderKernel(scheme, cfg, x).entry(_index(scheme, alpha), _index(scheme, beta), rtol)


def second_order_matrix(scheme: LevelScheme, cfg: CombConfig, x: float, *, rtol: float = 1e-9) -> np.ndarray:
    return SecondOrderKernel(scheme, cfg, x).matrix(rtol)


# ------------------ Pulse-pair operator ------------------

@dataclass(frozen=True)
class PulsePairOperator:
    levels: Tuple[str, ...]
    X: np.ndarray
    Y: np.ndarray
    raw: np.ndarray
    U: np.ndarray
    # 1 - |raw e_a|^2: population leaving level a through the non-unitary part
    loss: np.ndarray

    @property
    def unitarity_error(self) -> float:
        return float(np.linalg.norm(self.U.conj().T @ self.U - np.eye(self.U.shape[0]), ord=2))

    def element(self, final: str, initial: str) -> complex:
        return complex(self.U[self.levels.index(final), self.levels.index(initial)])


def pulse_pair_operator(
    scheme: LevelScheme, cfg: CombConfig, x: Optional[float] = None, *, rtol: float = 1e-9
) -> PulsePairOperator:
    x = cfg.overlap_center if x is None else x
    X = magnus_first_order(scheme, cfg, x)
    Y = second_order_matrix(scheme, cfg, x, rtol=rtol)
    raw = expm(X + Y)
    U, _ = polar(raw)
    loss = 1.0 - np.real(np.einsum("ij,ij->j", raw.conj(), raw))
    logger.debug(
        "pair operator at x=%.3e m: |X|=%.3e |Y|=%.3e max loss %.3e",
        x, np.linalg.norm(X), np.linalg.norm(Y), loss.max(),
    )
    return PulsePairOperator(levels=scheme.labels, X=X, Y=Y, raw=raw, U=U, loss=loss)


def train_propagator(
    scheme: LevelScheme,
    cfg: CombConfig,
    x: Optional[float] = None,
    *,
    operator: Optional[PulsePairOperator] = None,
    rtol: float = 1e-9,
) -> np.ndarray:
    """
    U_total = U_{N-1} ... U_1 U_0 with U_k = F^k U F^-k and F = diag(exp(i e_a T)),
    evaluated as F^N (F^-1 U)^N.
    """
    n_pulses = cfg.n_pulses
    if n_pulses < 1:
        raise ConfigError(f"a pulse train needs at least one pair, got n_pulses={n_pulses}")
    operator = operator or pulse_pair_operator(scheme, cfg, x, rtol=rtol)

    step = np.mod(scheme.energies() * cfg.period, 2.0 * np.pi)
    backwards = np.exp(-1j * step)[:, None] * operator.U
    forwards = np.exp(1j * np.mod(n_pulses * step, 2.0 * np.pi))
    return forwards[:, None] * np.linalg.matrix_power(backwards, n_pulses)


# ------------------ AC Stark profile ------------------

class StarkShiftIntegral:
    """
    Diagonal of Y restricted to the qubit levels, as a function of the offset
    o = x - x_overlap. With a_g = (u1.d)_ag, b_g = (u2.d)_ag, D_g = e_g - e_a - i G_g/2
    and lag = 2 o / c:

        dtheta_a(o) = Re int_0^inf dw/2pi |E_env(w - w_c)|^2
                      [ K(w) + B1(w) e^{i w lag} + B2(w) e^{-i w lag} ]

        K  = sum_g (|a|^2 + |b|^2) (p + q)
        B1 = sum_g p a*b + q a b*,   B2 = sum_g p a b* + q a*b,   p = 1/(D - w), q = 1/(D + w)

    For equal polarizations this is 2 |d|^2 (1 + cos(w lag)) 2D/(D^2 - w^2).
    """

    def __init__(self, scheme: LevelScheme, cfg: CombConfig, levels: Sequence[str], rtol: float = 1e-9):
        self.cfg = cfg
        self.rtol = rtol
        self.levels = tuple(levels)
        eps = scheme.energies()
        halfwidths = _pole_halfwidths(scheme, cfg)
        ud1, ud2 = _couplings(scheme, cfg)

        self.delta, self.intensity, self.mixed = [], [], []
        poles, widths = [], []
        for label in self.levels:
            a = scheme.index(label)
            via = np.nonzero((np.abs(ud1[a]) + np.abs(ud2[a])) > 0)[0]
            first, second = ud1[a, via], ud2[a, via]
            self.delta.append(eps[via] - eps[a] - 1j * halfwidths[via])
            self.intensity.append(np.abs(first) ** 2 + np.abs(second) ** 2)
            self.mixed.append(first.conj() * second)
            poles.extend(np.abs(eps[via] - eps[a]))
            widths.extend(halfwidths[via])
        self.poles, self.widths = poles, widths

        half = SPECTRAL_HALF_WIDTH / cfg.pulse_duration
        self.lo, self.hi = max(0.0, cfg.omega_c - half), cfg.omega_c + half
        self._far: Optional[np.ndarray] = None

    def _density(self, w: float) -> float:
        return np.abs(envelope_fourier(w - self.cfg.omega_c, self.cfg)) ** 2 / (2.0 * np.pi)

    def _weights(self, w: float):
        K, B1, B2 = [], [], []
        for delta, intensity, mixed in zip(self.delta, self.intensity, self.mixed):
            p, q = 1.0 / (delta - w), 1.0 / (delta + w)
            K.append(np.sum(intensity * (p + q)))
            B1.append(np.sum(p * mixed + q * mixed.conj()))
            B2.append(np.sum(p * mixed.conj() + q * mixed))
        return np.array(K), np.array(B1), np.array(B2)

    def _integrate(self, integrand, label: str) -> np.ndarray:
        return integrate(
            integrand, self.lo, self.hi,
            poles=self.poles, widths=self.widths, rtol=self.rtol, label=label,
        )

    def far(self) -> np.ndarray:
        if self._far is None:
            def integrand(w):
                K, _, _ = self._weights(w)
                return self._density(w) * K.real

            self._far = self._integrate(integrand, "far-field Stark shift")
        return self._far.copy()

    def evaluate(self, offsets) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Phases (L, m) plus the two complex interference integrals (L, m) each."""
        offsets = np.atleast_1d(np.asarray(offsets, dtype=float))
        n_levels, m = len(self.levels), offsets.size
        far = self.far()
        theta = np.repeat(far[:, None], m, axis=1)
        first = np.zeros((n_levels, m), dtype=complex)
        second = np.zeros((n_levels, m), dtype=complex)

        lag = 2.0 * offsets / C
        near = np.nonzero(np.abs(lag) <= FAR_FIELD_LAG * self.cfg.pulse_duration)[0]
        if near.size == 0 or self.cfg.peak_field == 0.0:
            return theta, first, second
        lag_near = lag[near]
        block = n_levels * near.size

        def integrand(w):
            dens = self._density(w)
            _, B1, B2 = self._weights(w)
            e = np.exp(1j * w * lag_near)
            t1 = dens * B1[:, None] * e[None, :]
            t2 = dens * B2[:, None] * e.conj()[None, :]
            return np.concatenate([t1.real.ravel(), t1.imag.ravel(), t2.real.ravel(), t2.imag.ravel()])

        parts = self._integrate(integrand, "Stark shift profile").reshape(4, block)
        shape = (n_levels, near.size)
        first[:, near] = (parts[0] + 1j * parts[1]).reshape(shape)
        second[:, near] = (parts[2] + 1j * parts[3]).reshape(shape)
        theta[:, near] += (first[:, near] + second[:, near]).real
        return theta, first, second


@dataclass(frozen=True)
class PhaseProfile:
    """
    Per-pair AC Stark phases of the two qubit levels sampled on a position grid.

    ``x_target`` is the overlap point of the comb delays the profile belongs to.
    Off-grid queries go back to the underlying integrals, which depend only on the
    offset from that point; ``retarget`` therefore only moves the frame.
    """

    levels: Tuple[str, str]
    x: np.ndarray
    theta: np.ndarray
    far: np.ndarray
    x_target: float
    wavevector: float
    period: float
    integral: StarkShiftIntegral = field(repr=False, compare=False)

    @property
    def differential(self) -> np.ndarray:
        return (self.theta[1] - self.theta[0]) / 2.0

    @property
    def far_differential(self) -> float:
        return float((self.far[1] - self.far[0]) / 2.0)

    def _query(self, x):
        theta, first, second = self.integral.evaluate(np.asarray(x, dtype=float) - self.x_target)
        return theta, first, second

    def at(self, x) -> np.ndarray:
        """(2,) phases at a scalar x, (2, m) for an array."""
        theta, _, _ = self._query(x)
        return theta[:, 0] if np.ndim(x) == 0 else theta

    def differential_at(self, x):
        theta = self.at(x)
        return (theta[1] - theta[0]) / 2.0

    def interference_envelope(self, x):
        """
        Amplitude of the ripple of the differential phase around its far-field
        value: bounds |dtheta(x') - dtheta(far)| for x' within a ripple period
        of x. The compiler squares it (times the train weight) as the
        worst-case crosstalk of an ion whose position is only known to that
        precision.
        """
        _, first, second = self._query(x)
        env = (np.abs(first[1] - first[0]) + np.abs(second[1] - second[0])) / 2.0
        return float(env[0]) if np.ndim(x) == 0 else env

    def derivative(self, x: float, step: Optional[float] = None) -> np.ndarray:
        """d(dtheta_a)/dx by central difference, h = lambda_c / 2000."""
        step = step or (2.0 * np.pi / self.wavevector) / 2000.0
        offset = float(x) - self.x_target
        theta, _, _ = self.integral.evaluate(np.array([offset - step, offset + step]))
        return (theta[:, 1] - theta[:, 0]) / (2.0 * step)

    def motional_average(self, x: float, spread: float, nodes: int = 24) -> np.ndarray:
        """<dtheta_a(x + xi)> for xi Gaussian with standard deviation ``spread``."""
        if spread <= 0:
            return self.at(float(x))
        points, weights = np.polynomial.hermite_e.hermegauss(nodes)
        theta = self.at(float(x) + spread * points)
        return theta @ weights / np.sqrt(2.0 * np.pi)

    def retarget(self, x_target: float) -> "PhaseProfile":
        return replace(self, x=self.x + (x_target - self.x_target), x_target=float(x_target))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "x_m": self.x,
                "dtheta0_rad": self.theta[0],
                "dtheta1_rad": self.theta[1],
                "differential_rad": self.differential,
            }
        )


def profile_grid(cfg: CombConfig, half_width: float = 3e-6, points: int = 2001) -> np.ndarray:
    return cfg.overlap_center + np.linspace(-half_width, half_width, points)


def phase_shift_profile(
    scheme: LevelScheme,
    cfg: CombConfig,
    qubit_levels: Sequence[str],
    x_grid: Optional[Sequence[float]] = None,
    *,
    rtol: float = 1e-9,
) -> PhaseProfile:
    if len(qubit_levels) != 2:
        raise ConfigError(f"expected two qubit levels, got {list(qubit_levels)}")
    for label in qubit_levels:
        scheme.index(label)

    x = profile_grid(cfg) if x_grid is None else np.asarray(x_grid, dtype=float)
    integral = StarkShiftIntegral(scheme, cfg, qubit_levels, rtol)
    theta, first, second = integral.evaluate(x - cfg.overlap_center)

    profile = PhaseProfile(
        levels=tuple(qubit_levels),
        x=x,
        theta=theta,
        far=integral.far(),
        x_target=cfg.overlap_center,
        wavevector=cfg.wavevector,
        period=cfg.period,
        integral=integral,
    )
    logger.info(
        "phase profile over %d points: far-field phases %s rad, differential at overlap %.6e rad",
        x.size, np.array2string(profile.far, precision=6), profile.differential_at(cfg.overlap_center),
    )
    return profile
