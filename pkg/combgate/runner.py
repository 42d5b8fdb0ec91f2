"""
Orchestration layer shared by the CLI verbs and the HTTP routes.

It turns a validated ExperimentConfig into domain objects (level scheme, comb
parameters, chain geometry), runs the requested stage and hands the results to
the artifact writers.
"""
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import ValidationError

from . import __version__
from .artifacts import write_frame, write_json, write_manifest, write_text
from .atomic import LevelScheme, load_level_scheme
from .budget import ErrorBudget, budget_frame, budget_table, evaluate_budget
from .chain import ChainGeometry, lamb_dicke
from .comb import CombConfig
from .compiler import GatePlan, compile_rotation, plan_to_text
from .constants import PhysicalConstants
from .errors import ConfigError
from .lindblad import (
    SimOptions,
    analytic_phase,
    diagnostics,
    evolve_train,
    extract_phase,
    initial_state,
    sweep,
    sweep_frame,
    train_plan,
    trajectory_frame,
)
from .magnus import PhaseProfile, phase_shift_profile, profile_grid
from .models import RunMode
from .schemas import ExperimentConfig, ProfileSummary, config_hash
from .settings import Settings, get_settings

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Experiment:
    config: ExperimentConfig
    scheme: LevelScheme
    comb: CombConfig
    geometry: ChainGeometry
    qubit_levels: Tuple[str, str]

    @classmethod
    def from_config(cls, config: ExperimentConfig) -> "Experiment":
        """
        Builds the domain objects from a validated config. The level file is read
        here and both qubit labels are looked up, so an unknown level fails before
        any integral is evaluated.
        """
        scheme = load_level_scheme(config.scheme.path, zeeman_mhz=config.scheme.zeeman_mhz)
        for label in config.scheme.qubit_levels:
            scheme.index(label)
        comb = comb_config(config)
        return cls(
            config=config,
            scheme=scheme,
            comb=comb,
            geometry=chain_geometry(config, scheme, comb),
            qubit_levels=tuple(config.scheme.qubit_levels),
        )

    @property
    def target_position(self) -> float:
        return self.geometry.positions[self.geometry.check_ion(self.config.gate.target)]

    def targeted(self) -> CombConfig:
        return self.comb.targeting(self.target_position)


def comb_config(config: ExperimentConfig) -> CombConfig:
    section = config.comb
    try:
        return CombConfig(
            carrier_wavelength=section.carrier_wavelength_nm * 1e-9,
            pulse_duration=section.pulse_duration_fs * 1e-15,
            repetition_rate=section.repetition_rate_mhz * 1e6,
            delay_1=section.delay_1_fs * 1e-15,
            delay_2=section.delay_2_fs * 1e-15,
            polarization=section.polarization,
            polarization_2=section.polarization_2,
            peak_field=section.peak_rabi_rate_thz * 1e12,
            carrier_envelope_phase=section.carrier_envelope_phase_rad,
        )
    except ValidationError as exc:
        raise ConfigError(f"invalid comb section: {exc.errors()[0]['msg']}") from exc


def chain_geometry(config: ExperimentConfig, scheme: LevelScheme, comb: CombConfig) -> ChainGeometry:
    trap = config.trap
    omega = 2.0 * np.pi * trap.axial_frequency_khz * 1e3
    mass_amu = trap.mass_amu or scheme.mass_amu
    if trap.positions_um is not None:
        eta = trap.lamb_dicke
        if eta is None:
            eta = lamb_dicke(omega, PhysicalConstants.for_mass_amu(mass_amu).mass, comb.wavevector)
        try:
            return ChainGeometry.from_positions([p * 1e-6 for p in trap.positions_um], omega, eta)
        except ValidationError as exc:
            raise ConfigError(f"invalid trap positions: {exc.errors()[0]['msg']}") from exc
    return ChainGeometry.harmonic(trap.n_ions, omega, mass_amu, comb.wavevector, eta=trap.lamb_dicke)


def sim_options(config: ExperimentConfig, settings: Settings) -> SimOptions:
    try:
        return SimOptions(
            n_max=config.run.n_max,
            n_modes=config.run.n_modes,
            window=config.run.window,
            max_state_dim=settings.max_state_dim,
        )
    except ValidationError as exc:
        raise ConfigError(f"invalid simulation options: {exc.errors()[0]['msg']}") from exc


# ------------------ Stages ------------------

def compute_profile(exp: Experiment, cfg: Optional[CombConfig] = None, grid=None) -> PhaseProfile:
    cfg = cfg or exp.comb
    if grid is None:
        grid = profile_grid(cfg, exp.config.run.profile_half_width_um * 1e-6, exp.config.run.profile_points)
    return phase_shift_profile(exp.scheme, cfg, exp.qubit_levels, grid, rtol=exp.config.run.rtol)


def compile_plan(exp: Experiment) -> Tuple[GatePlan, PhaseProfile]:
    profile = compute_profile(exp, exp.targeted(), grid=np.asarray(exp.geometry.positions))
    gate = exp.config.gate
    plan = compile_rotation(
        gate.axis, gate.angle_rad, gate.target, profile, exp.geometry, calibrate_field=gate.calibrate_field
    )
    return plan, profile


def compute_budget(exp: Experiment, settings: Settings) -> Tuple[ErrorBudget, GatePlan]:
    """
    Compiles the configured gate and evaluates its error budget. The plan is
    returned as well because the budget run also writes it out as plan.yaml.
    ``settings.workers`` sets how many channels are evaluated at the same time.
    """
    plan, profile = compile_plan(exp)
    budget = evaluate_budget(
        exp.scheme, exp.comb, exp.geometry, plan, profile,
        qubit_levels=exp.qubit_levels,
        position_error=exp.config.run.position_error_nm * 1e-9,
        workers=settings.workers,
        rtol=exp.config.run.rtol,
    )
    return budget, plan


def simulation_plan(exp: Experiment, plan: GatePlan) -> GatePlan:
    """The bare train that simulate and sweep runs use."""
    pulses = exp.config.run.sim_pulses
    if pulses is None:
        return plan
    return train_plan(
        pulses, plan.target_position, plan.period, target=plan.target, field_scale=plan.field_scale
    )


def summarize_profile(profile: PhaseProfile) -> ProfileSummary:
    overlap = profile.at(profile.x_target)
    return ProfileSummary(
        levels=profile.levels,
        target_position_um=profile.x_target * 1e6,
        far_field_phase_rad=tuple(float(v) for v in profile.far),
        overlap_phase_rad=tuple(float(v) for v in overlap),
        overlap_ratio=tuple(float(v) for v in overlap / profile.far),
        differential_at_target_rad=float(profile.differential_at(profile.x_target)),
        x_um=[float(v) for v in profile.x * 1e6],
        differential_rad=[float(v) for v in profile.differential],
    )


# ------------------ Modes ------------------

@dataclass
class RunResult:
    mode: RunMode
    output_dir: Path
    artifacts: List[str] = field(default_factory=list)
    summary: Dict[str, object] = field(default_factory=dict)
    manifest: Dict[str, object] = field(default_factory=dict)


def _run_profile(exp: Experiment, out: Path, settings: Settings) -> Tuple[List[str], Dict[str, object]]:
    profile = compute_profile(exp)
    write_frame(profile.to_frame(), out / "profile.csv")
    summary = summarize_profile(profile)
    return ["profile.csv"], {
        "far_field_phase_rad": summary.far_field_phase_rad,
        "overlap_ratio": summary.overlap_ratio,
        "differential_at_overlap_rad": summary.differential_at_target_rad,
    }


def _run_compile(exp: Experiment, out: Path, settings: Settings) -> Tuple[List[str], Dict[str, object]]:
    plan, _ = compile_plan(exp)
    write_text(plan_to_text(plan), out / "plan.yaml")
    write_frame(chain_frame(plan), out / "chain.csv")
    return ["plan.yaml", "chain.csv"], {"n_pulses": plan.n_pulses, "gate_time_s": plan.gate_time}


def _run_budget(exp: Experiment, out: Path, settings: Settings) -> Tuple[List[str], Dict[str, object]]:
    budget, plan = compute_budget(exp, settings)
    write_text(budget_table(budget), out / "budget.txt")
    write_frame(budget_frame(budget), out / "budget.csv")
    write_text(plan_to_text(plan), out / "plan.yaml")
    return ["budget.txt", "budget.csv", "plan.yaml"], {"total": budget.total, "n_pulses": plan.n_pulses}


def _run_simulate(exp: Experiment, out: Path, settings: Settings) -> Tuple[List[str], Dict[str, object]]:
    plan, profile = compile_plan(exp)
    plan = simulation_plan(exp, plan)
    options = sim_options(exp.config, settings)
    cfg = exp.targeted().scaled(plan.field_scale)
    levels = exp.scheme.active_subspace(exp.qubit_levels, cfg.polarizations)
    start = initial_state(levels, exp.qubit_levels, n_max=options.n_max, n_modes=options.n_modes)
    final = evolve_train(
        start, plan, exp.scheme, exp.comb, exp.geometry, qubit_levels=exp.qubit_levels, options=options
    )
    report = diagnostics(final, exp.qubit_levels, all_levels=exp.scheme.labels)
    phase = extract_phase(final, exp.qubit_levels)
    expected = analytic_phase(
        profile, plan.n_pulses, plan.target_position, exp.geometry, plan.target, phase_scale=plan.phase_scale
    )
    result = {
        "n_pulses": plan.n_pulses,
        "phase_rad": phase,
        "phase_analytic_rad": expected,
        "relative_discrepancy": abs(phase - expected) / abs(expected) if expected else None,
        "diagnostics": report.model_dump(),
    }
    write_frame(trajectory_frame(final), out / "trajectory.csv")
    write_json(result, out / "diagnostics.json")
    return ["trajectory.csv", "diagnostics.json"], {
        key: result[key] for key in ("n_pulses", "phase_rad", "phase_analytic_rad", "relative_discrepancy")
    }


def _run_sweep(exp: Experiment, out: Path, settings: Settings) -> Tuple[List[str], Dict[str, object]]:
    plan, profile = compile_plan(exp)
    plan = simulation_plan(exp, plan)
    half = exp.config.run.sweep_half_width_nm * 1e-9
    offsets = np.linspace(-half, half, exp.config.run.sweep_points)
    rows = sweep(
        exp.scheme, exp.comb, exp.geometry, plan, profile, offsets,
        qubit_levels=exp.qubit_levels, options=sim_options(exp.config, settings), workers=settings.workers,
    )
    write_frame(sweep_frame(rows), out / "sweep.csv")
    return ["sweep.csv"], {"points": len(rows), "n_pulses": plan.n_pulses}


_MODES = {
    RunMode.profile: _run_profile,
    RunMode.compile: _run_compile,
    RunMode.budget: _run_budget,
    RunMode.simulate: _run_simulate,
    RunMode.sweep: _run_sweep,
}


def chain_frame(plan: GatePlan) -> pd.DataFrame:
    return pd.DataFrame([ion.model_dump() for ion in plan.ions])


def run(
    config: ExperimentConfig,
    *,
    out_dir: Union[str, Path, None] = None,
    settings: Optional[Settings] = None,
) -> RunResult:
    """
    Runs the stage selected by ``config.run.mode`` and writes everything it produces.

    This is what both the CLI verbs and the tests call. The output directory is
    picked in this order: the ``out_dir`` argument, ``run.output_dir`` from the
    config file, and finally ``COMBGATE_OUTPUT_DIR`` from the process settings.
    It is created when missing and existing files in it are overwritten.

    Every run ends with a manifest.json holding the config hash, the package
    version, the wall time and the list of files written, so two runs can be
    compared without opening the CSVs. The returned RunResult carries the same
    manifest plus a small summary dict that the CLI prints to stdout.

    Errors are raised as ConfigError / PhysicsError / NumericsError and left to
    the caller to translate into exit codes or HTTP statuses.
    """
    settings = settings or get_settings()
    mode = config.run.mode
    out = Path(out_dir or config.run.output_dir or settings.output_dir)
    out.mkdir(parents=True, exist_ok=True)

    started = time.perf_counter()
    exp = Experiment.from_config(config)
    logger.info("%s run: %s, %d ion(s), output in %s", mode.value, exp.scheme.species, exp.geometry.n_ions, out)
    artifacts, summary = _MODES[mode](exp, out, settings)
    wall_time = time.perf_counter() - started

    manifest = write_manifest(
        out / "manifest.json",
        config_sha256=config_hash(config),
        version=__version__,
        mode=mode.value,
        wall_time_s=wall_time,
        artifacts=artifacts,
    )
    logger.info("%s run finished in %.1f s", mode.value, wall_time)
    return RunResult(mode=mode, output_dir=out, artifacts=artifacts, summary=summary, manifest=manifest)
