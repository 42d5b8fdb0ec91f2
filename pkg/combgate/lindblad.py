"""
Open-system check of a pulse train acting on one ion.

The state is a density matrix on (active electronic levels) x (Fock states of the
simulated modes), electronic index major, in the interaction picture of the free
ion and the free motion. The field only acts inside the pulse windows, a few tau
around each pair. Between windows there is no field and the dissipator is
applied as an exact map:

    rho_uu -> rho_uu exp(-G_u t)
    rho_ll -> rho_ll + sum_u (g_ul / G_u) (1 - exp(-G_u t)) rho_uu
    rho_ab -> rho_ab exp(-(G_a + G_b) t / 2)                           a != b

The position operator is x0 + sum_s (eta_s / k_c)(a_s + a_s^dag); the motion is
frozen for the length of one window. The k-th pair then acts as G^k U_0 G^-k with
G = exp(i H_0 T), so one pair propagator serves the whole train.
"""
import logging
from dataclasses import dataclass, replace
from functools import reduce
from multiprocessing import Pool
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, field_validator
from scipy.integrate import solve_ivp
from scipy.linalg import expm

from .atomic import LevelScheme
from .budget import phonon_excitation_probability, state_averaged
from .chain import ChainGeometry, delay_for_target
from .comb import CombConfig, arrival_times, comb_fields_time
from .compiler import GatePlan
from .constants import C
from .errors import ConfigError, NumericsError, PhysicsError
from .magnus import PhaseProfile
from .models import Axis, WindowMode

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * np.pi
HERMITICITY_TOLERANCE = 1e-10
TRACE_TOLERANCE = 1e-8
POSITIVITY_TOLERANCE = 1e-8
UNITARITY_TOLERANCE = 1e-8
COHERENCE_FLOOR = 1e-6


class SimOptions(BaseModel):
    model_config = ConfigDict(frozen=True)

    n_max: int = 5
    n_modes: int = 1
    window: WindowMode = WindowMode.propagator
    # window half-width around each arrival, in pulse durations
    window_half_width: float = 8.0
    rtol: float = 1e-10
    atol: float = 1e-12
    max_state_dim: int = 2048
    leak_tolerance: float = 1e-6
    checkpoints: int = 20

    @field_validator("n_max")
    @classmethod
    def _non_negative(cls, value):
        if value < 0:
            raise ValueError("Fock cutoff must be >= 0")
        return value

    @field_validator("n_modes", "checkpoints", "max_state_dim")
    @classmethod
    def _at_least_one(cls, value):
        if value < 1:
            raise ValueError("must be >= 1")
        return value

    @field_validator("window_half_width", "rtol", "atol")
    @classmethod
    def _positive(cls, value):
        if value <= 0:
            raise ValueError("must be positive")
        return value


# ------------------ State ------------------

@dataclass(frozen=True)
class TrajectoryPoint:
    pair: int
    time: float
    phase: float
    phonon_number: float
    nonqubit_population: float
    trace_deficit: float


@dataclass(frozen=True)
class SimState:
    rho: np.ndarray
    levels: Tuple[str, ...]
    n_max: int
    n_modes: int = 1
    time: float = 0.0
    pairs: int = 0
    history: Tuple[TrajectoryPoint, ...] = ()

    @property
    def motional_dim(self) -> int:
        return (self.n_max + 1) ** self.n_modes

    @property
    def dim(self) -> int:
        return len(self.levels) * self.motional_dim

    def index(self, label: str) -> int:
        if label not in self.levels:
            raise ConfigError(f"level {label} is not part of the simulated subspace")
        return self.levels.index(label)

    def tensor(self) -> np.ndarray:
        L, M = len(self.levels), self.motional_dim
        return self.rho.reshape(L, M, L, M)

    def populations(self) -> np.ndarray:
        """(L, n_max+1, ..., n_max+1) joint electronic / Fock populations."""
        diagonal = np.real(np.diagonal(self.rho))
        return diagonal.reshape((len(self.levels),) + (self.n_max + 1,) * self.n_modes)

    def electronic_populations(self) -> np.ndarray:
        pops = self.populations()
        return pops.reshape(len(self.levels), -1).sum(axis=1)

    def fock_distribution(self) -> np.ndarray:
        """Marginal phonon-number distribution per mode, shape (n_modes, n_max+1)."""
        pops = self.populations()
        marginals = []
        for mode in range(self.n_modes):
            axes = tuple(a for a in range(pops.ndim) if a != mode + 1)
            marginals.append(pops.sum(axis=axes))
        return np.array(marginals)

    def fock_leak(self) -> float:
        if self.n_max == 0:
            return 0.0
        return float(self.fock_distribution()[:, self.n_max].max())

    def check(self, leak_tolerance: float = 1e-6) -> None:
        hermiticity = float(np.max(np.abs(self.rho - self.rho.conj().T)))
        if hermiticity > HERMITICITY_TOLERANCE:
            raise NumericsError(f"density matrix lost Hermiticity ({hermiticity:.3e})")
        trace = float(np.real(np.trace(self.rho)))
        if abs(trace - 1.0) > TRACE_TOLERANCE:
            raise NumericsError(f"trace drifted to {trace:.12f}")
        smallest = float(np.linalg.eigvalsh((self.rho + self.rho.conj().T) / 2.0)[0])
        if smallest < -POSITIVITY_TOLERANCE:
            raise NumericsError(f"density matrix has eigenvalue {smallest:.3e}")
        leak = self.fock_leak()
        if leak > leak_tolerance:
            raise NumericsError(
                f"population {leak:.3e} reached the Fock cutoff n_max={self.n_max}; increase the cutoff"
            )


def initial_state(
    levels: Sequence[str],
    qubit_levels: Sequence[str],
    c0: complex = 1.0 / np.sqrt(2.0),
    c1: complex = 1.0 / np.sqrt(2.0),
    *,
    n_max: int = 5,
    n_modes: int = 1,
) -> SimState:
    """(c0 |q0> + c1 |q1>) x |0>_vib, normalized."""
    levels = tuple(levels)
    norm = np.sqrt(abs(c0) ** 2 + abs(c1) ** 2)
    if norm == 0:
        raise ConfigError("initial qubit amplitudes are both zero")
    M = (n_max + 1) ** n_modes
    psi = np.zeros(len(levels) * M, dtype=complex)
    for label, amplitude in zip(qubit_levels, (c0, c1)):
        if label not in levels:
            raise ConfigError(f"qubit level {label} is not part of the simulated subspace")
        psi[levels.index(label) * M] = amplitude / norm
    return SimState(rho=np.outer(psi, psi.conj()), levels=levels, n_max=n_max, n_modes=n_modes)


class DecayChannel(BaseModel):
    model_config = ConfigDict(frozen=True)

    upper: str
    lower: str
    rate: float

    @property
    def jump(self) -> str:
        return f"|{self.lower}><{self.upper}|"


def decay_channels(scheme: LevelScheme, levels: Sequence[str]) -> List[DecayChannel]:
    keep = set(levels)
    return [
        DecayChannel(upper=line.upper, lower=line.lower, rate=line.rate)
        for line in scheme.decay_channels()
        if line.upper in keep and line.lower in keep
    ]


# ------------------ Master equation ------------------

def _ladder(n_max: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, n_max + 1, dtype=float)), k=1)


def _embed_mode(op: np.ndarray, mode: int, n_modes: int) -> np.ndarray:
    eye = np.eye(op.shape[0])
    return reduce(np.kron, [op if m == mode else eye for m in range(n_modes)])


class MasterEquation:
    """Generator, pair propagator and decay map for one ion at x0."""

    def __init__(
        self,
        scheme: LevelScheme,
        cfg: CombConfig,
        geometry: ChainGeometry,
        levels: Sequence[str],
        *,
        ion: int = 0,
        x0: Optional[float] = None,
        options: Optional[SimOptions] = None,
    ):
        self.cfg = cfg
        self.options = options or SimOptions()
        self.levels = tuple(levels)
        geometry.check_ion(ion)
        if self.options.n_modes > geometry.n_modes:
            raise ConfigError(f"{self.options.n_modes} modes requested, chain has {geometry.n_modes}")

        L = len(self.levels)
        M = (self.options.n_max + 1) ** self.options.n_modes
        if L * M > self.options.max_state_dim:
            raise ConfigError(
                f"state dimension {L * M} exceeds the limit {self.options.max_state_dim} "
                f"(density matrix would take {(L * M) ** 2 * 16 / 2**20:.1f} MiB)"
            )
        self.n_levels, self.motional_dim, self.dim = L, M, L * M

        index = [scheme.index(label) for label in self.levels]
        self.eps = scheme.energies()[index]
        u1, u2 = cfg.polarizations
        self.ud1 = scheme.coupling_matrix(u1)[np.ix_(index, index)]
        self.ud2 = scheme.coupling_matrix(u2)[np.ix_(index, index)]
        self.rates = scheme.partial_decay_rates()[np.ix_(index, index)]
        self.gamma = self.rates.sum(axis=1)
        self.cascade = bool(np.any(self.rates[:, self.gamma > 0] > 0))

        driven = np.nonzero((np.abs(self.ud1) + np.abs(self.ud2)).sum(axis=1) > 0)[0]
        self.driven = driven
        self.driven_product = (driven[:, None] * M + np.arange(M)[None, :]).ravel()

        # motion
        self.x0 = geometry.positions[ion] if x0 is None else float(x0)
        n_modes, n_max = self.options.n_modes, self.options.n_max
        omega = np.asarray(geometry.mode_frequencies[:n_modes], dtype=float)
        eta = geometry.eta(ion)[:n_modes]
        a = _ladder(n_max)
        quadrature = sum(
            (eta[s] / cfg.wavevector) * _embed_mode(a + a.T, s, n_modes) for s in range(n_modes)
        )
        displacement, self.modes = np.linalg.eigh(np.atleast_2d(quadrature))
        self.positions = self.x0 + displacement
        number = sum(omega[s] * _embed_mode(np.diag(np.arange(n_max + 1.0)), s, n_modes).diagonal() for s in range(n_modes))
        self.energies = (self.eps[:, None] + np.atleast_1d(number)[None, :]).ravel()

        # pulse window around both arrivals, pair-local time
        t1, t2 = arrival_times(self.x0, cfg)
        margin = self.options.window_half_width * cfg.pulse_duration + np.max(np.abs(displacement)) / C
        self.window = (min(t1, t2) - margin, max(t1, t2) + margin)
        if self.window[1] - self.window[0] >= cfg.period:
            raise ConfigError("pulse windows overlap; reduce the window width or the delay")

        self._step = np.mod((self.energies[:, None] - self.energies[None, :]) * cfg.period, TWO_PI)
        self._transition = self.eps[:, None] - self.eps[None, :]
        self._propagator: Optional[np.ndarray] = None
        logger.debug(
            "master equation: %d levels (%d driven) x %d motional states at x0=%.3e m",
            L, driven.size, M, self.x0,
        )

    @property
    def window_length(self) -> float:
        return self.window[1] - self.window[0]

    def pair_phase(self, k: int) -> np.ndarray:
        """Elementwise factor turning pair-0 operators into pair-k operators."""
        return np.exp(1j * np.mod(k * self._step, TWO_PI))

    def _motional_fields(self, s: float) -> Tuple[np.ndarray, np.ndarray]:
        f1, f2 = comb_fields_time(s, self.positions, self.cfg)
        V = self.modes
        return (V * f1) @ V.conj().T, (V * f2) @ V.conj().T

    def hamiltonian(self, s: float, k: int = 0) -> np.ndarray:
        """H_I at pair-local time s of pair k, (dim, dim)."""
        mot1, mot2 = self._motional_fields(s)
        rotating = np.exp(1j * self._transition * s)
        H = -(np.kron(self.ud1 * rotating, mot1) + np.kron(self.ud2 * rotating, mot2))
        return H * self.pair_phase(k) if k else H

    def _driven_hamiltonian(self, s: float) -> np.ndarray:
        mot1, mot2 = self._motional_fields(s)
        d = self.driven
        rotating = np.exp(1j * self._transition[np.ix_(d, d)] * s)
        return -(
            np.kron(self.ud1[np.ix_(d, d)] * rotating, mot1) + np.kron(self.ud2[np.ix_(d, d)] * rotating, mot2)
        )

    def dissipator(self, rho: np.ndarray) -> np.ndarray:
        L, M = self.n_levels, self.motional_dim
        T4 = rho.reshape(L, M, L, M)
        out = -0.5 * (self.gamma[:, None] + self.gamma[None, :])[:, None, :, None] * T4
        blocks = np.einsum("imin->imn", T4)
        gain = np.einsum("ul,umn->lmn", self.rates, blocks)
        for l in np.nonzero(self.rates.sum(axis=0) > 0)[0]:
            out[l, :, l, :] += gain[l]
        return out.reshape(self.dim, self.dim)

    def generator(self, s: float, k: int = 0) -> Callable[[np.ndarray], np.ndarray]:
        """rho -> -i[H(s), rho] + sum_c g_c (S_c rho S_c^dag - {S_c^dag S_c, rho}/2)."""
        H = self.hamiltonian(s, k)

        def apply(rho: np.ndarray) -> np.ndarray:
            return -1j * (H @ rho - rho @ H) + self.dissipator(rho)

        return apply

    def pair_propagator(self) -> np.ndarray:
        """Coherent pair-0 propagator over the window, identity on undriven levels."""
        if self._propagator is not None:
            return self._propagator
        U = np.eye(self.dim, dtype=complex)
        if self.cfg.peak_field > 0 and self.driven.size:
            n = self.driven.size * self.motional_dim

            def rhs(s, y):
                return (-1j * self._driven_hamiltonian(s) @ y.reshape(n, n)).ravel()

            result = solve_ivp(
                rhs, self.window, np.eye(n, dtype=complex).ravel(),
                method="DOP853", rtol=self.options.rtol, atol=self.options.atol,
                max_step=self.cfg.pulse_duration / 8.0,
            )
            if not result.success:
                raise NumericsError(f"pair propagator integration failed: {result.message}")
            block = result.y[:, -1].reshape(n, n)
            error = float(np.linalg.norm(block.conj().T @ block - np.eye(n), ord=2))
            if error > UNITARITY_TOLERANCE:
                raise NumericsError(f"pair propagator is not unitary (error {error:.3e})")
            U[np.ix_(self.driven_product, self.driven_product)] = block
            logger.debug("pair propagator: %d steps, unitarity error %.3e", result.t.size, error)
        self._propagator = U
        return U

    def evolve_window(self, rho: np.ndarray, k: int) -> np.ndarray:
        """Full master equation across the k-th window."""
        n = self.dim
        phase = self.pair_phase(k)

        def rhs(s, y):
            H = self.hamiltonian(s) * phase
            r = y.reshape(n, n)
            return (-1j * (H @ r - r @ H) + self.dissipator(r)).ravel()

        result = solve_ivp(
            rhs, self.window, rho.ravel(),
            method="DOP853", rtol=self.options.rtol, atol=self.options.atol,
            max_step=self.cfg.pulse_duration / 8.0,
        )
        if not result.success:
            raise NumericsError(f"window {k} integration failed: {result.message}")
        return result.y[:, -1].reshape(n, n)

    def decay(self, rho: np.ndarray, duration: float) -> np.ndarray:
        """Exact field-free dissipation over ``duration``."""
        L, M = self.n_levels, self.motional_dim
        T4 = rho.reshape(L, M, L, M)
        blocks = np.einsum("imin->imn", T4).copy()
        damping = np.exp(-0.5 * (self.gamma[:, None] + self.gamma[None, :]) * duration)
        out = T4 * damping[:, None, :, None]

        if self.cascade:
            generator = self.rates.T - np.diag(self.gamma)
            transfer = expm(generator * duration)
            new_blocks = np.einsum("lu,umn->lmn", transfer, blocks)
            for l in range(L):
                out[l, :, l, :] = new_blocks[l]
        else:
            lost = -np.expm1(-self.gamma * duration)
            with np.errstate(invalid="ignore", divide="ignore"):
                branching = np.where(self.gamma[:, None] > 0, self.rates / self.gamma[:, None], 0.0)
            weights = branching * lost[:, None]
            gain = np.einsum("ul,umn->lmn", weights, blocks)
            for l in np.nonzero(weights.sum(axis=0) > 0)[0]:
                out[l, :, l, :] += gain[l]
        return out.reshape(self.dim, self.dim)


def build_generator(
    scheme: LevelScheme,
    cfg: CombConfig,
    geometry: ChainGeometry,
    t: float,
    *,
    levels: Sequence[str],
    ion: int = 0,
    x0: Optional[float] = None,
    options: Optional[SimOptions] = None,
) -> Callable[[np.ndarray], np.ndarray]:
    """Liouvillian action at absolute time t (pair k = round(t / T))."""
    k = int(np.floor(t / cfg.period + 0.5))
    equation = MasterEquation(scheme, cfg, geometry, levels, ion=ion, x0=x0, options=options)
    return equation.generator(t - k * cfg.period, k)


# ------------------ Train evolution ------------------

def train_plan(n_pulses: int, x_target: float, period: float, *, target: int = 0, field_scale: float = 1.0) -> GatePlan:
    """A bare train of n_pulses pairs aimed at x_target, no single-qubit rotations."""
    return GatePlan(
        target=target,
        target_position=x_target,
        axis=Axis.Z,
        theta=0.0,
        delay_difference=delay_for_target(x_target),
        n_pulses=n_pulses,
        period=period,
        field_scale=field_scale,
    )


def _trajectory_point(state: SimState, qubit_levels: Sequence[str]) -> TrajectoryPoint:
    report = diagnostics(state, qubit_levels)
    coherence = _qubit_coherence(state, qubit_levels)
    return TrajectoryPoint(
        pair=state.pairs,
        time=state.time,
        phase=float(np.angle(coherence)) if abs(coherence) > COHERENCE_FLOOR else float("nan"),
        phonon_number=report.phonon_number,
        nonqubit_population=report.nonqubit_population,
        trace_deficit=report.trace_deficit,
    )


def evolve_train(
    initial: SimState,
    plan: GatePlan,
    scheme: LevelScheme,
    cfg: CombConfig,
    geometry: ChainGeometry,
    *,
    qubit_levels: Sequence[str],
    ion: Optional[int] = None,
    x0: Optional[float] = None,
    options: Optional[SimOptions] = None,
    equation: Optional[MasterEquation] = None,
) -> SimState:
    """
    Apply the plan's pulse train. The plan's global single-qubit rotations are
    ideal operations and are not part of the simulated dynamics.
    """
    options = options or SimOptions(n_max=initial.n_max, n_modes=initial.n_modes)
    if plan.n_pulses == 0:
        return initial

    gate_cfg = cfg.targeting(plan.target_position).scaled(plan.field_scale)
    ion = plan.target if ion is None else ion
    if equation is None:
        equation = MasterEquation(scheme, gate_cfg, geometry, initial.levels, ion=ion, x0=x0, options=options)
    if equation.levels != initial.levels or equation.dim != initial.dim:
        raise ConfigError("initial state and master equation use different subspaces")

    period = gate_cfg.period
    every = max(1, plan.n_pulses // options.checkpoints)
    history = list(initial.history)
    rho = initial.rho.copy()
    state = initial
    U0 = equation.pair_propagator() if options.window is WindowMode.propagator else None

    for step in range(plan.n_pulses):
        k = initial.pairs + step
        if U0 is not None:
            Uk = U0 * equation.pair_phase(k)
            rho = Uk @ rho @ Uk.conj().T
            rho = equation.decay(rho, period)
        else:
            rho = equation.evolve_window(rho, k)
            rho = equation.decay(rho, period - equation.window_length)

        if (step + 1) % every == 0 or step + 1 == plan.n_pulses:
            state = replace(state, rho=rho, time=initial.time + (step + 1) * period, pairs=k + 1)
            state.check(options.leak_tolerance)
            history.append(_trajectory_point(state, qubit_levels))

    state = replace(state, history=tuple(history))
    last = state.history[-1]
    logger.info(
        "train of %d pairs at x0=%.3e m: phase %.6e rad, phonons %.3e, non-qubit population %.3e",
        plan.n_pulses, equation.x0, last.phase, last.phonon_number, last.nonqubit_population,
    )
    return state


# ------------------ Read-out ------------------

def _qubit_coherence(state: SimState, qubit_levels: Sequence[str]) -> complex:
    M = state.motional_dim
    q0, q1 = (state.index(label) for label in qubit_levels)
    return complex(state.rho[q1 * M, q0 * M])


def extract_phase(state: SimState, qubit_levels: Sequence[str]) -> float:
    """Arg <q1, 0| rho |q0, 0>: phase of |1> relative to |0> with the motion in its ground state."""
    coherence = _qubit_coherence(state, qubit_levels)
    if abs(coherence) < COHERENCE_FLOOR:
        raise PhysicsError(f"qubit coherence {abs(coherence):.3e} has vanished; the phase is undefined")
    return float(np.angle(coherence))


class Diagnostics(BaseModel):
    populations: Dict[str, float]
    qubit_population: float
    nonqubit_population: float
    phonon_number: float
    phonon_excitation: float
    fock_distribution: List[List[float]]
    trace_deficit: float
    min_eigenvalue: float


def diagnostics(
    state: SimState,
    qubit_levels: Sequence[str],
    all_levels: Optional[Sequence[str]] = None,
) -> Diagnostics:
    """Populations, phonon statistics and trace deficit; pruned levels report 0."""
    electronic = state.electronic_populations()
    populations = {label: 0.0 for label in (all_levels or ())}
    populations.update({label: float(p) for label, p in zip(state.levels, electronic)})
    qubit = float(sum(populations.get(label, 0.0) for label in qubit_levels))
    fock = state.fock_distribution()
    trace = float(np.real(np.trace(state.rho)))
    ground = float(state.populations().reshape(len(state.levels), -1)[:, 0].sum())
    return Diagnostics(
        populations=populations,
        qubit_population=qubit,
        nonqubit_population=float(electronic.sum() - qubit),
        phonon_number=float(np.sum(fock * np.arange(state.n_max + 1)[None, :])),
        phonon_excitation=max(trace - ground, 0.0),
        fock_distribution=fock.tolist(),
        trace_deficit=1.0 - trace,
        min_eigenvalue=float(np.linalg.eigvalsh((state.rho + state.rho.conj().T) / 2.0)[0]),
    )


def analytic_phase(
    profile: PhaseProfile,
    n_pulses: int,
    x0: float,
    geometry: ChainGeometry,
    ion: int = 0,
    *,
    phase_scale: float = 1.0,
) -> float:
    """N (dtheta_1 - dtheta_0) averaged over the motional ground-state spread."""
    spread = float(np.sqrt(np.sum(geometry.eta(ion) ** 2))) / profile.wavevector
    theta = profile.motional_average(x0, spread)
    return float(n_pulses * phase_scale * (theta[1] - theta[0]))


# ------------------ Sweeps ------------------

class SweepRow(BaseModel):
    x0_m: float
    phase_rad: float
    phase_analytic_rad: float
    phonon_prob: float
    phonon_prob_analytic: float
    nonqubit_pop: float
    trace_deficit: float


def _simulate_offset(job) -> Tuple[float, float, float, float]:
    scheme, cfg, geometry, plan, levels, qubit_levels, options, ion, x0, c0, c1 = job
    start = initial_state(levels, qubit_levels, c0, c1, n_max=options.n_max, n_modes=options.n_modes)
    final = evolve_train(
        start, plan, scheme, cfg, geometry,
        qubit_levels=qubit_levels, ion=ion, x0=x0, options=options,
    )
    report = diagnostics(final, qubit_levels)
    return extract_phase(final, qubit_levels), report.phonon_excitation, report.nonqubit_population, report.trace_deficit


def sweep(
    scheme: LevelScheme,
    cfg: CombConfig,
    geometry: ChainGeometry,
    plan: GatePlan,
    profile: PhaseProfile,
    offsets: Sequence[float],
    *,
    qubit_levels: Sequence[str],
    options: Optional[SimOptions] = None,
    workers: int = 1,
    c0: complex = 1.0 / np.sqrt(2.0),
    c1: complex = 1.0 / np.sqrt(2.0),
) -> List[SweepRow]:
    """Simulate the plan with the ion displaced by each offset from the target; rows keep offset order."""
    options = options or SimOptions()
    ion = plan.target
    gate_cfg = cfg.targeting(plan.target_position).scaled(plan.field_scale)
    levels = scheme.active_subspace(qubit_levels, gate_cfg.polarizations)
    positions = [plan.target_position + float(o) for o in offsets]
    jobs = [
        (scheme, cfg, geometry, plan, levels, tuple(qubit_levels), options, ion, x0, c0, c1)
        for x0 in positions
    ]

    if workers > 1 and len(jobs) > 1:
        with Pool(processes=workers) as pool:
            results = list(pool.imap(_simulate_offset, jobs))
    else:
        results = [_simulate_offset(job) for job in jobs]

    profile = profile.retarget(plan.target_position)
    weights = (abs(c0) ** 2, abs(c1) ** 2)
    norm = sum(weights)
    rows = []
    for x0, (phase, phonon, nonqubit, deficit) in zip(positions, results):
        expected = analytic_phase(profile, plan.n_pulses, x0, geometry, ion, phase_scale=plan.phase_scale)
        excitations = [
            phonon_excitation_probability(
                geometry, profile, ion, level, plan.gate_time, x=x0, phase_scale=plan.phase_scale
            )
            for level in qubit_levels
        ]
        rows.append(
            SweepRow(
                x0_m=x0,
                # branch of the simulated phase closest to the analytic value
                phase_rad=expected + float(np.angle(np.exp(1j * (phase - expected)))),
                phase_analytic_rad=expected,
                phonon_prob=phonon,
                phonon_prob_analytic=state_averaged(*excitations, np.sqrt(weights[0] / norm), np.sqrt(weights[1] / norm)),
                nonqubit_pop=nonqubit,
                trace_deficit=deficit,
            )
        )
    logger.info("sweep over %d positions finished", len(rows))
    return rows


def sweep_frame(rows: Sequence[SweepRow]) -> pd.DataFrame:
    columns = list(SweepRow.model_fields)
    return pd.DataFrame([row.model_dump() for row in rows], columns=columns)


def trajectory_frame(state: SimState) -> pd.DataFrame:
    return pd.DataFrame(
        [
            {
                "pair": p.pair,
                "time_s": p.time,
                "phase_rad": p.phase,
                "phonon_number": p.phonon_number,
                "nonqubit_pop": p.nonqubit_population,
                "trace_deficit": p.trace_deficit,
            }
            for p in state.history
        ],
        columns=["pair", "time_s", "phase_rad", "phonon_number", "nonqubit_pop", "trace_deficit"],
    )
