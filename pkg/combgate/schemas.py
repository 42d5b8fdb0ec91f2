"""
Pydantic schemas for experiment configuration files and HTTP payloads.

A configuration file is a YAML mapping with the sections below. Every key
carries its unit in its name; omitted keys take the reference parameter set
(1000 nm carrier, 20 fs pulses, 100 MHz repetition, pi polarization,
e*a0*E/hbar = 4.405e12 rad/s, 600 kHz axial trap).

    scheme:  path, zeeman_mhz, qubit_levels
    comb:    carrier_wavelength_nm, pulse_duration_fs, repetition_rate_mhz,
             delay_1_fs, delay_2_fs, polarization, polarization_2,
             peak_rabi_rate_thz, carrier_envelope_phase_rad
    trap:    axial_frequency_khz, n_ions, lamb_dicke, positions_um, mass_amu
    gate:    axis, angle_rad, target, calibrate_field
    run:     mode, output_dir, profile_half_width_um, profile_points, rtol,
             position_error_nm, n_max, n_modes, window, sim_pulses,
             sweep_half_width_nm, sweep_points
"""
import hashlib
import json
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, ValidationError, field_validator, model_validator

from .errors import ConfigError
from .models import Axis, RunMode, WindowMode


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


# ------------------ Config sections ------------------

class SchemeSection(_Section):
    # None selects the bundled 40Ca+ data
    path: Optional[str] = None
    zeeman_mhz: Optional[float] = None
    qubit_levels: Tuple[str, str] = ("S1/2(-1/2)", "D5/2(-1/2)")

    @field_validator("path")
    @classmethod
    def _exists(cls, value):
        if value is not None and not Path(value).is_file():
            raise ValueError(f"level scheme file {value!r} does not exist")
        return value


class CombSection(_Section):
    carrier_wavelength_nm: float = 1000.0
    pulse_duration_fs: float = 20.0
    repetition_rate_mhz: float = 100.0
    delay_1_fs: float = 0.0
    delay_2_fs: float = 0.0
    polarization: Tuple[float, float, float] = (0.0, 0.0, 1.0)
    polarization_2: Optional[Tuple[float, float, float]] = None
    # e * a0 * E_peak / hbar in 1e12 rad/s
    peak_rabi_rate_thz: float = 4.405
    carrier_envelope_phase_rad: float = 0.0

    @field_validator("carrier_wavelength_nm", "pulse_duration_fs", "repetition_rate_mhz")
    @classmethod
    def _positive(cls, value):
        if value <= 0:
            raise ValueError("must be positive")
        return value

    @field_validator("peak_rabi_rate_thz")
    @classmethod
    def _non_negative(cls, value):
        if value < 0:
            raise ValueError("must be >= 0")
        return value


class TrapSection(_Section):
    axial_frequency_khz: float = 600.0
    n_ions: int = 1
    # None: computed from the trap frequency and the carrier wavevector
    lamb_dicke: Optional[float] = None
    # explicit positions replace the harmonic-well equilibrium
    positions_um: Optional[List[float]] = None
    mass_amu: Optional[float] = None

    @model_validator(mode="after")
    def _check(self):
        if self.axial_frequency_khz <= 0:
            raise ValueError("axial_frequency_khz must be positive")
        if self.n_ions < 1:
            raise ValueError("n_ions must be >= 1")
        if self.lamb_dicke is not None and self.lamb_dicke < 0:
            raise ValueError("lamb_dicke must be >= 0")
        if self.mass_amu is not None and self.mass_amu <= 0:
            raise ValueError("mass_amu must be positive")
        if self.positions_um is not None and len(self.positions_um) != self.n_ions:
            raise ValueError(f"{len(self.positions_um)} positions given for {self.n_ions} ions")
        return self


class GateSection(_Section):
    axis: Axis = Axis.Z
    angle_rad: float = float(np.pi / 2.0)
    target: int = 0
    calibrate_field: bool = False


class RunSection(_Section):
    mode: RunMode = RunMode.profile
    output_dir: Optional[str] = None
    profile_half_width_um: float = 3.0
    profile_points: int = 2001
    rtol: float = 1e-9
    position_error_nm: float = 30.0
    n_max: int = 5
    n_modes: int = 1
    window: WindowMode = WindowMode.propagator
    # pairs in simulate / sweep runs; None runs the compiled plan
    sim_pulses: Optional[int] = 200
    sweep_half_width_nm: float = 100.0
    sweep_points: int = 21

    @model_validator(mode="after")
    def _check(self):
        if self.profile_points < 2 or self.sweep_points < 1:
            raise ValueError("profile_points must be >= 2 and sweep_points >= 1")
        if not 0 < self.rtol < 1:
            raise ValueError("rtol must lie in (0, 1)")
        if self.sim_pulses is not None and self.sim_pulses < 0:
            raise ValueError("sim_pulses must be >= 0")
        if self.n_max < 0 or self.n_modes < 1:
            raise ValueError("n_max must be >= 0 and n_modes >= 1")
        if self.position_error_nm < 0 or self.sweep_half_width_nm < 0 or self.profile_half_width_um <= 0:
            raise ValueError("widths must be positive")
        return self


class ExperimentConfig(_Section):
    scheme: SchemeSection = SchemeSection()
    comb: CombSection = CombSection()
    trap: TrapSection = TrapSection()
    gate: GateSection = GateSection()
    run: RunSection = RunSection()


# ------------------ Loading ------------------

def _parse_value(text: str) -> Any:
    try:
        return yaml.safe_load(text)
    except yaml.YAMLError:
        return text


def apply_overrides(data: Dict[str, Any], overrides: Sequence[str]) -> Dict[str, Any]:
    """Apply ``section.key=value`` assignments; values are read as YAML scalars."""
    data = {section: dict(values or {}) for section, values in (data or {}).items()}
    for item in overrides:
        key, sep, value = item.partition("=")
        section, dot, name = key.strip().partition(".")
        if not sep or not dot or not section or not name:
            raise ConfigError(f"override {item!r} is not of the form section.key=value")
        data.setdefault(section, {})[name] = _parse_value(value)
    return data


def config_from_mapping(data: Optional[Dict[str, Any]]) -> ExperimentConfig:
    try:
        return ExperimentConfig.model_validate(data or {})
    except ValidationError as exc:
        errors = "; ".join(f"{'.'.join(str(p) for p in e['loc'])}: {e['msg']}" for e in exc.errors())
        raise ConfigError(f"invalid configuration: {errors}") from exc


def parse_config(text: str, overrides: Sequence[str] = ()) -> ExperimentConfig:
    try:
        data = yaml.safe_load(text) if text.strip() else {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"configuration is not valid YAML: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a mapping of sections")
    return config_from_mapping(apply_overrides(data, overrides))


def load_config(path: Union[str, Path, None] = None, overrides: Sequence[str] = ()) -> ExperimentConfig:
    if path is None:
        return parse_config("", overrides)
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read configuration {path}: {exc}") from exc
    return parse_config(text, overrides)


def dump_config(config: ExperimentConfig) -> str:
    return yaml.safe_dump(config.model_dump(mode="json"), sort_keys=False)


def config_hash(config: ExperimentConfig) -> str:
    canonical = json.dumps(config.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


# ------------------ HTTP payloads ------------------

class LambDickeResponse(BaseModel):
    axial_frequency_khz: float
    mass_amu: float
    carrier_wavelength_nm: float
    eta: float


class ProfileSummary(BaseModel):
    levels: Tuple[str, str]
    target_position_um: float
    far_field_phase_rad: Tuple[float, float]
    overlap_phase_rad: Tuple[float, float]
    overlap_ratio: Tuple[float, float]
    differential_at_target_rad: float
    x_um: List[float]
    differential_rad: List[float]


class HealthResponse(BaseModel):
    status: str
    version: str
