"""
Error channels of a compiled gate and their aggregation into a budget.

    crosstalk            residual rotations of the other ions (gate compiler)
    photon scattering    Kramers-Heisenberg cross section folded with the pulse spectrum
    leakage              off-resonant Raman amplitudes a0 per pair, summed over the
                         train as a geometric series
    phonon excitation    position dependence of the light shift acting as a force

All quantities are dimensionless probabilities. Budget rows take the worst case
over the two qubit levels.
"""
import logging
from multiprocessing.pool import ThreadPool
from typing import Dict, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, model_validator

from .atomic import LevelScheme, term_orbital
from .chain import ChainGeometry
from .comb import CombConfig
from .compiler import GatePlan, IonPhase
from .constants import C, EA0, EPS0, HBAR, field_rate_to_si
from .errors import ConfigError
from .magnus import SPECTRAL_HALF_WIDTH, PhaseProfile, PulsePairOperator, pulse_pair_operator
from .quadrature import integrate

logger = logging.getLogger(__name__)

RESONANCE_TOLERANCE = 1e-12


# ------------------ Photon scattering ------------------

def scattering_cross_section(
    omega,
    scheme: LevelScheme,
    polarization: Sequence[float] = (0.0, 0.0, 1.0),
    initial: Optional[str] = None,
):
    """
    Total (elastic + Raman) cross section in m^2, Kramers-Heisenberg form:

        sigma = w w'^3 / (6 pi eps0^2 c^4) sum_j |alpha_fi^j|^2

        alpha_fi^j = (1/hbar) sum_g [ d_j,fg (u.d)_gi / (w_gi - w - i G_g/2)
                                    + (u.d)_fg d_j,gi / (w_gf + w - i G_g/2) ]

    summed over non-decaying final levels with w' = w - (e_f - e_i) > 0.
    """
    omega = np.asarray(omega, dtype=float)
    scalar = omega.ndim == 0
    omega = np.atleast_1d(omega)[:, None]

    eps = scheme.energies()
    widths = scheme.linewidths()
    i = scheme.index(initial) if initial is not None else int(np.argmin(eps))
    d = scheme.dipole_matrices() * EA0
    ud = np.tensordot(np.asarray(polarization, dtype=float), d, axes=1)

    sigma = np.zeros(omega.shape[0])
    prefactor = 1.0 / (6.0 * np.pi * EPS0**2 * C**4 * HBAR**2)
    for f in np.nonzero(widths == 0)[0]:
        out = omega[:, 0] - (eps[f] - eps[i])
        absorb = (eps - eps[i])[None, :] - omega - 0.5j * widths[None, :]
        emit = (eps - eps[f])[None, :] + omega - 0.5j * widths[None, :]
        absorb = np.where(absorb == 0, np.inf, absorb)
        emit = np.where(emit == 0, np.inf, emit)
        first = d[:, f, :] * ud[:, i][None, :]
        second = ud[f, :][None, :] * d[:, :, i]
        alpha = (first[None] / absorb[:, None, :]).sum(-1) + (second[None] / emit[:, None, :]).sum(-1)
        strength = np.sum(np.abs(alpha) ** 2, axis=1)
        sigma += np.where(out > 0, prefactor * omega[:, 0] * np.clip(out, 0, None) ** 3 * strength, 0.0)
    return float(sigma[0]) if scalar else sigma


class ScatteringEstimate(BaseModel):
    initial: str
    per_pulse: float
    per_train_per_ion: float
    chain_total: float
    n_pulses: int
    n_ions: int


def _photons_per_pulse(scheme: LevelScheme, cfg: CombConfig, initial: str, polarization, rtol: float) -> float:
    """(eps0 c / hbar) int dw/pi sigma(w)/w |E(w)|^2 for one pulse of one comb."""
    if cfg.peak_field == 0.0:
        return 0.0
    tau = cfg.pulse_duration
    amplitude = field_rate_to_si(cfg.peak_field) * tau * np.sqrt(np.pi)
    half = SPECTRAL_HALF_WIDTH / tau
    lo, hi = max(cfg.omega_c - half, 1e-3 * cfg.omega_c), cfg.omega_c + half

    eps = scheme.energies()
    start = eps[scheme.index(initial)]
    widths = scheme.linewidths()
    decaying = np.nonzero(widths > 0)[0]

    def integrand(w):
        spectrum = (amplitude * np.exp(-((w - cfg.omega_c) * tau) ** 2 / 4.0)) ** 2
        sigma = scattering_cross_section(w, scheme, polarization, initial)
        return np.array([EPS0 * C / HBAR / np.pi * sigma / w * spectrum])

    result = integrate(
        integrand, lo, hi,
        poles=eps[decaying] - start, widths=widths[decaying] / 2.0,
        rtol=rtol, label=f"scattering from {initial}",
    )
    return float(result[0])


def scattering_probability(
    scheme: LevelScheme,
    cfg: CombConfig,
    initial: Optional[str] = None,
    *,
    n_pulses: Optional[int] = None,
    n_ions: int = 1,
    rtol: float = 1e-8,
) -> ScatteringEstimate:
    """Per-pulse probability, times 2N (both combs) per ion, times the ion count for the chain."""
    initial = initial or scheme.labels[int(np.argmin(scheme.energies()))]
    n_pulses = cfg.n_pulses if n_pulses is None else n_pulses
    u1, u2 = cfg.polarizations
    per_comb = [_photons_per_pulse(scheme, cfg, initial, u, rtol) for u in ((u1,) if u1 == u2 else (u1, u2))]
    per_pulse = float(np.mean(per_comb))
    per_train = 2.0 * n_pulses * per_pulse
    return ScatteringEstimate(
        initial=initial,
        per_pulse=per_pulse,
        per_train_per_ion=per_train,
        chain_total=per_train * n_ions,
        n_pulses=n_pulses,
        n_ions=n_ions,
    )


# ------------------ Leakage ------------------

class LeakageChannel(BaseModel):
    """Per-pair amplitude a0 from ``initial`` into ``final``; repeats with phase exp(i de T)."""

    model_config = ConfigDict(frozen=True)

    initial: str
    final: str
    a0: complex
    transition_frequency: float
    period: float
    kind: Literal["zeeman", "fine_structure", "other"] = "other"

    @property
    def cycles(self) -> float:
        return abs(self.transition_frequency) * self.period / (2.0 * np.pi)

    @property
    def k(self) -> int:
        return int(np.floor(self.cycles))

    @property
    def delta_k(self) -> float:
        return float(self.cycles - np.floor(self.cycles))

    @property
    def repetition_factor(self) -> complex:
        return complex(np.exp(1j * np.mod(self.transition_frequency * self.period, 2.0 * np.pi)))


class LeakageResult(BaseModel):
    channel: LeakageChannel
    n_pulses: int
    amplitude: float
    bound_amplitude: float
    probability: float
    bound: float
    resonant: bool = False


def leakage_probability(channel: LeakageChannel, n_pulses: int) -> LeakageResult:
    """
    |a_tot| = |a0 sin(N de T/2) / sin(de T/2)| <= |a0| / |sin(de T/2)|.
    Half-angles are reduced through the fractional cycle count to keep precision.
    """
    size = abs(channel.a0)
    if n_pulses <= 0:
        return LeakageResult(channel=channel, n_pulses=0, amplitude=0.0, bound_amplitude=0.0, probability=0.0, bound=0.0)

    denominator = abs(np.sin(np.pi * channel.delta_k))
    if denominator < RESONANCE_TOLERANCE:
        logger.warning(
            "%s -> %s is resonant with the repetition rate (k=%d); amplitudes add coherently",
            channel.initial, channel.final, channel.k,
        )
        amplitude = n_pulses * size
        return LeakageResult(
            channel=channel, n_pulses=n_pulses, amplitude=amplitude, bound_amplitude=np.inf,
            probability=amplitude**2, bound=np.inf, resonant=True,
        )

    numerator = abs(np.sin(np.pi * np.mod(n_pulses * channel.delta_k, 1.0)))
    amplitude = size * numerator / denominator
    bound_amplitude = size / denominator
    return LeakageResult(
        channel=channel, n_pulses=n_pulses, amplitude=amplitude, bound_amplitude=bound_amplitude,
        probability=amplitude**2, bound=bound_amplitude**2,
    )


def zeeman_leakage_estimate(n_pulses: int, zeeman_hz: float, repetition_rate: float) -> float:
    """(nu_rep / (2 pi N nu_z))^2, the sublevel-leakage estimate with a0 ~ 1/(2N)."""
    if n_pulses <= 0:
        return 0.0
    if zeeman_hz <= 0:
        logger.warning("zero Zeeman splitting: sublevel leakage is resonant")
        return float("inf")
    return (repetition_rate / (2.0 * np.pi * n_pulses * zeeman_hz)) ** 2


def _channel_kind(scheme: LevelScheme, initial: str, final: str) -> str:
    start, end = scheme.level(initial), scheme.level(final)
    if start.term == end.term:
        return "zeeman"
    if term_orbital(start.term) == term_orbital(end.term):
        return "fine_structure"
    return "other"


def leakage_channels(
    scheme: LevelScheme,
    operator: PulsePairOperator,
    qubit_levels: Sequence[str],
    period: float,
) -> List[LeakageChannel]:
    """Channels into every long-lived non-qubit level with a nonzero per-pair amplitude."""
    eps = scheme.energies()
    generator = operator.X + operator.Y
    channels = []
    for initial in qubit_levels:
        a = scheme.index(initial)
        for g, level in enumerate(scheme.levels):
            if level.label in qubit_levels or level.linewidth > 0:
                continue
            a0 = complex(generator[g, a])
            if a0 == 0:
                continue
            channels.append(
                LeakageChannel(
                    initial=initial,
                    final=level.label,
                    a0=a0,
                    transition_frequency=float(eps[g] - eps[a]),
                    period=period,
                    kind=_channel_kind(scheme, initial, level.label),
                )
            )
    return channels


# ------------------ Phonon excitation ------------------

class PhononExcitation(BaseModel):
    ion: int
    level: str
    position: float
    gate_time: float
    slope: float
    exact: float
    bound: float


def _mode_terms(slope: float, wavevector: float, period: float, eta: np.ndarray, omega: np.ndarray) -> np.ndarray:
    return (slope / wavevector) ** 2 * eta**2 / (omega * period) ** 2


def phonon_excitation_probability(
    geometry: ChainGeometry,
    profile: PhaseProfile,
    ion: int,
    level: Union[int, str],
    gate_time: float,
    *,
    x: Optional[float] = None,
    phase_scale: float = 1.0,
) -> PhononExcitation:
    """
    P = (1/k^2) (d dtheta/dx)^2 sum_s eta_is^2 |exp(i w_s t_g) - 1|^2 / (w_s T)^2,
    bounded by replacing |exp(i w_s t_g) - 1|^2 with 4.
    """
    index = profile.levels.index(level) if isinstance(level, str) else int(level)
    x = geometry.positions[geometry.check_ion(ion)] if x is None else float(x)
    slope = float(profile.derivative(x)[index]) * phase_scale

    omega = np.asarray(geometry.mode_frequencies, dtype=float)
    terms = _mode_terms(slope, profile.wavevector, profile.period, geometry.eta(ion), omega)
    cycles = omega * gate_time / (2.0 * np.pi)
    kick = 4.0 * np.sin(np.pi * (cycles - np.round(cycles))) ** 2
    return PhononExcitation(
        ion=ion,
        level=profile.levels[index],
        position=x,
        gate_time=gate_time,
        slope=slope,
        exact=float(np.sum(terms * kick)),
        bound=float(np.sum(4.0 * terms)),
    )


def state_averaged(p0: PhononExcitation, p1: PhononExcitation, c0: complex, c1: complex) -> float:
    return abs(c0) ** 2 * p0.exact + abs(c1) ** 2 * p1.exact


class EffectiveHamiltonian(BaseModel):
    """
    H = sum_a |a><a| [ rates_a + sum_s couplings_as (a_s + a_s^dag) ] + sum_s w_s a_s^dag a_s
    for one ion, with the light shift spread uniformly over the period.
    """

    levels: Tuple[str, str]
    rates: Tuple[float, float]
    couplings: Tuple[Tuple[float, ...], Tuple[float, ...]]
    mode_frequencies: Tuple[float, ...]

    def excitation_probability(self, level: int, time: float) -> float:
        """First-order transition probability out of the motional ground state."""
        g = np.asarray(self.couplings[level])
        omega = np.asarray(self.mode_frequencies)
        return float(np.sum(g**2 * np.abs(np.exp(1j * omega * time) - 1.0) ** 2 / omega**2))


def effective_qubit_phonon_hamiltonian(
    profile: PhaseProfile,
    geometry: ChainGeometry,
    ion: int,
    *,
    x: Optional[float] = None,
    phase_scale: float = 1.0,
) -> EffectiveHamiltonian:
    x = geometry.positions[geometry.check_ion(ion)] if x is None else float(x)
    theta = profile.at(x) * phase_scale
    slope = profile.derivative(x) * phase_scale
    eta = geometry.eta(ion)
    factor = 1.0 / (profile.wavevector * profile.period)
    return EffectiveHamiltonian(
        levels=profile.levels,
        rates=tuple(float(t) / profile.period for t in theta),
        couplings=tuple(tuple(float(v) for v in factor * s * eta) for s in slope),
        mode_frequencies=geometry.mode_frequencies,
    )


# ------------------ Budget ------------------

class ErrorBudget(BaseModel):
    crosstalk: float = 0.0
    photon_scattering: float = 0.0
    zeeman_leakage: float = 0.0
    fine_structure_leakage: float = 0.0
    phonon_excitation: float = 0.0
    total: float = 0.0
    # N times the worst per-pair qubit loss of the pulse-pair exponential; not part of total
    pulse_loss: float = 0.0
    notes: Tuple[str, ...] = ()

    @model_validator(mode="after")
    def _check_entries(self):
        entries = [value for _, value in self.rows()]
        if any(value < 0 for value in entries) or self.pulse_loss < 0:
            raise ValueError("budget entries must be >= 0")
        if not np.isclose(self.total, sum(entries), rtol=1e-12, atol=0.0) and np.isfinite(self.total):
            raise ValueError("total must equal the sum of the entries")
        return self

    def rows(self) -> List[Tuple[str, float]]:
        return [
            ("crosstalk", self.crosstalk),
            ("photon_scattering", self.photon_scattering),
            ("zeeman_leakage", self.zeeman_leakage),
            ("fine_structure_leakage", self.fine_structure_leakage),
            ("phonon_excitation", self.phonon_excitation),
        ]


def assemble_budget(
    *,
    chain: Sequence[IonPhase] = (),
    scattering: Sequence[ScatteringEstimate] = (),
    leakage: Sequence[LeakageResult] = (),
    zeeman_estimate: float = 0.0,
    phonon: Sequence[PhononExcitation] = (),
    pulse_loss: float = 0.0,
    notes: Sequence[str] = (),
) -> ErrorBudget:
    crosstalk = float(sum(ion.crosstalk_bound for ion in chain))
    photon = max((s.chain_total for s in scattering), default=0.0)

    fine: Dict[str, float] = {}
    for result in leakage:
        if result.channel.kind != "zeeman":
            fine[result.channel.initial] = fine.get(result.channel.initial, 0.0) + result.bound
    fine_structure = max(fine.values(), default=0.0)

    worst: Dict[int, float] = {}
    for p in phonon:
        worst[p.ion] = max(worst.get(p.ion, 0.0), p.bound)
    phonon_total = float(sum(worst.values()))

    entries = dict(
        crosstalk=crosstalk,
        photon_scattering=photon,
        zeeman_leakage=float(zeeman_estimate),
        fine_structure_leakage=fine_structure,
        phonon_excitation=phonon_total,
    )
    return ErrorBudget(
        total=float(sum(entries.values())), pulse_loss=float(pulse_loss), notes=tuple(notes), **entries
    )


def evaluate_budget(
    scheme: LevelScheme,
    cfg: CombConfig,
    geometry: ChainGeometry,
    plan: GatePlan,
    profile: PhaseProfile,
    *,
    qubit_levels: Sequence[str],
    position_error: float = 30e-9,
    workers: int = 1,
    rtol: float = 1e-9,
) -> ErrorBudget:
    """Evaluate every channel for the plan (concurrently) and reduce them to a budget."""
    if len(qubit_levels) != 2:
        raise ConfigError("two qubit levels required")
    if plan.is_identity:
        return assemble_budget(notes=("empty plan: no pulses are applied",))

    gate_cfg = cfg.targeting(plan.target_position).scaled(plan.field_scale).with_pulses(plan.n_pulses)
    profile = profile.retarget(plan.target_position)

    def operator_job():
        return pulse_pair_operator(scheme, gate_cfg, plan.target_position, rtol=rtol)

    def scattering_job(level):
        return scattering_probability(scheme, gate_cfg, level, n_pulses=plan.n_pulses, n_ions=geometry.n_ions)

    def phonon_job(ion, offset):
        return [
            phonon_excitation_probability(
                geometry, profile, ion, level, plan.gate_time,
                x=geometry.positions[ion] + offset, phase_scale=plan.phase_scale,
            )
            for level in qubit_levels
        ]

    with ThreadPool(max(1, workers)) as pool:
        operator_async = pool.apply_async(operator_job)
        scattering_async = [pool.apply_async(scattering_job, (level,)) for level in qubit_levels]
        phonon_async = [
            pool.apply_async(phonon_job, (ion, offset))
            for ion in range(geometry.n_ions)
            for offset in (-position_error, position_error)
        ]
        operator = operator_async.get()
        scattering = [job.get() for job in scattering_async]
        phonon = [p for job in phonon_async for p in job.get()]

    channels = leakage_channels(scheme, operator, qubit_levels, gate_cfg.period)
    leakage = [leakage_probability(channel, plan.n_pulses) for channel in channels]

    zeeman = 0.0
    if gate_cfg.peak_field > 0:
        zeeman = zeeman_leakage_estimate(plan.n_pulses, scheme.zeeman_hz, gate_cfg.repetition_rate)

    notes = [
        f"zeeman_leakage uses the sublevel estimate (nu_rep / 2 pi N nu_z)^2 = {zeeman:.3e} "
        f"(N={plan.n_pulses}, nu_z={scheme.zeeman_hz / 1e6:g} MHz); the often-quoted 1e-6 for this "
        "row is two orders below the estimate and is not used",
    ]
    driven_zeeman = [r for r in leakage if r.channel.kind == "zeeman"]
    if driven_zeeman:
        worst = max(driven_zeeman, key=lambda r: r.bound)
        notes.append(
            f"largest driven Zeeman channel {worst.channel.initial} -> {worst.channel.final}: "
            f"exact {worst.probability:.3e}, bound {worst.bound:.3e}"
        )
    else:
        notes.append("no Zeeman Raman channel is driven by the configured polarization")
    for result in leakage:
        if result.channel.kind == "fine_structure":
            notes.append(
                f"{result.channel.initial} -> {result.channel.final}: k={result.channel.k}, "
                f"dk={result.channel.delta_k:.2f}, |a0|={abs(result.channel.a0):.3e} "
                f"(estimate theta/N={plan.theta / plan.n_pulses:.3e}), exact {result.probability:.3e}, "
                f"bound {result.bound:.3e}"
            )
        if result.resonant:
            notes.append(f"RESONANT: {result.channel.initial} -> {result.channel.final}")
    per_pair = max(0.0, max(float(operator.loss[scheme.index(level)]) for level in qubit_levels))
    pulse_loss = plan.n_pulses * per_pair
    notes.append(
        f"non-unitary loss of the pulse-pair exponential: {per_pair:.3e} per pair, "
        f"{pulse_loss:.3e} over the train (cross-check of photon_scattering)"
    )
    if position_error > 0:
        notes.append(f"phonon_excitation is the bound at a {position_error * 1e9:g} nm placement error")

    budget = assemble_budget(
        chain=plan.ions, scattering=scattering, leakage=leakage,
        zeeman_estimate=zeeman, phonon=phonon, pulse_loss=pulse_loss, notes=notes,
    )
    logger.info("error budget: total %.3e", budget.total)
    for name, value in budget.rows():
        logger.info("  %-24s %.3e", name, value)
    return budget


def budget_frame(budget: ErrorBudget) -> pd.DataFrame:
    rows = budget.rows() + [("total", budget.total), ("pulse_loss_check", budget.pulse_loss)]
    return pd.DataFrame({"channel": [name for name, _ in rows], "probability": [value for _, value in rows]})


def budget_table(budget: ErrorBudget) -> str:
    width = max(len(name) for name, _ in budget.rows())
    lines = [f"{'channel':<{width}}  probability", "-" * (width + 13)]
    lines += [f"{name:<{width}}  {value:.3e}" for name, value in budget.rows()]
    lines += ["-" * (width + 13), f"{'total':<{width}}  {budget.total:.3e}"]
    lines += [f"{'pulse_loss_check':<{width}}  {budget.pulse_loss:.3e}"]
    if budget.notes:
        lines += ["", "notes:"] + [f"  - {note}" for note in budget.notes]
    return "\n".join(lines) + "\n"
