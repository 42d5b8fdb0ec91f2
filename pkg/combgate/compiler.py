"""
Compile a local rotation on one ion of the chain into a pulse-train schedule.

The train alone gives every ion i the rotation Rz(2 N dtheta(x_i)): twice the
far-field phase far from the overlap point, four times it on the target. A
global Rz(-theta_c), with theta_c the far-field train phase, removes the common
part, so the target keeps Rz(theta) and distant ions are left untouched. X and
Y rotations are obtained by conjugating that with global pi/2 rotations.
"""
import logging
from typing import List, Literal, Optional, Sequence, Tuple

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, ValidationError, model_validator

from .chain import ChainGeometry, delay_for_target
from .errors import ConfigError, PhysicsError
from .magnus import PhaseProfile
from .models import Axis

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * np.pi


# ------------------ Schemas ------------------

class PulseCount(BaseModel):
    n_pulses: int
    per_pulse: float
    residual: float


class GateOperation(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: Literal["train", "rotation"]
    axis: Optional[Axis] = None
    angle: float = 0.0
    n_pulses: Optional[int] = None


class IonPhase(BaseModel):
    model_config = ConfigDict(frozen=True)

    index: int
    position: float
    train_phase: float
    net_phase: float
    residual: float
    crosstalk_infidelity: float
    crosstalk_bound: float


class GatePlan(BaseModel):
    model_config = ConfigDict(frozen=True)

    target: int
    target_position: float
    axis: Axis
    theta: float
    delay_difference: float
    n_pulses: int
    period: float
    per_pulse_phase: float = 0.0
    far_field_phase: float = 0.0
    compensation: float = 0.0
    field_scale: float = 1.0
    residual_angle: float = 0.0
    operations: Tuple[GateOperation, ...] = ()
    ions: Tuple[IonPhase, ...] = ()

    @model_validator(mode="after")
    def _check_delay(self):
        expected = delay_for_target(self.target_position)
        if abs(self.delay_difference - expected) > 1e-12 * max(abs(expected), 1e-15):
            raise ValueError(
                f"delay difference {self.delay_difference:.6e} s does not address x={self.target_position:.6e} m"
            )
        if self.n_pulses < 0 or self.field_scale <= 0:
            raise ValueError("n_pulses must be >= 0 and field_scale > 0")
        return self

    @property
    def gate_time(self) -> float:
        return self.n_pulses * self.period

    @property
    def phase_scale(self) -> float:
        return self.field_scale**2

    @property
    def is_identity(self) -> bool:
        return self.n_pulses == 0


# ------------------ Rotations ------------------

def rotation(axis: Axis, angle: float) -> np.ndarray:
    """exp(-i angle sigma_axis / 2)."""
    c, s = np.cos(angle / 2.0), np.sin(angle / 2.0)
    axis = Axis(axis)
    if axis is Axis.X:
        return np.array([[c, -1j * s], [-1j * s, c]])
    if axis is Axis.Y:
        return np.array([[c, -s], [s, c]], dtype=complex)
    return np.diag([np.exp(-0.5j * angle), np.exp(0.5j * angle)])


def rz(angle: float) -> np.ndarray:
    return rotation(Axis.Z, angle)


def rx(angle: float) -> np.ndarray:
    return rotation(Axis.X, angle)


def ry(angle: float) -> np.ndarray:
    return rotation(Axis.Y, angle)


def plan_unitary(plan: GatePlan, train_phase: float) -> np.ndarray:
    """
    2x2 unitary of the plan on an ion whose train rotation is Rz(train_phase),
    composed in time order (first operation rightmost).
    """
    total = np.eye(2, dtype=complex)
    for op in plan.operations:
        step = rz(train_phase) if op.kind == "train" else rotation(op.axis, op.angle)
        total = step @ total
    return total


def _sequence(axis: Axis, n_pulses: int, compensation: float) -> Tuple[GateOperation, ...]:
    train = GateOperation(kind="train", n_pulses=n_pulses)
    undo = GateOperation(kind="rotation", axis=Axis.Z, angle=-compensation)
    if axis is Axis.Z:
        return (train, undo)
    if axis is Axis.X:
        before, after = (Axis.Y, -np.pi / 2.0), (Axis.Y, np.pi / 2.0)
    else:
        before, after = (Axis.X, np.pi / 2.0), (Axis.X, -np.pi / 2.0)
    return (
        GateOperation(kind="rotation", axis=before[0], angle=before[1]),
        train,
        undo,
        GateOperation(kind="rotation", axis=after[0], angle=after[1]),
    )


# ------------------ Compilation ------------------

def pulses_for_angle(theta: float, profile: PhaseProfile, x_target: float) -> PulseCount:
    """N = round(theta / dtheta(x_target)), at least one pulse pair."""
    if theta <= 0:
        raise ConfigError(f"rotation angle must be positive, got {theta}")
    per_pulse = float(profile.differential_at(x_target))
    if per_pulse <= 0:
        raise PhysicsError(
            f"differential phase per pulse is {per_pulse:.3e} rad at x={x_target:.3e} m; "
            "the qubit levels are not split in the required sense at this wavelength"
        )
    n_pulses = int(np.floor(theta / per_pulse + 0.5))
    if n_pulses == 0:
        logger.warning("angle %.3e rad is below half a pulse quantum %.3e rad; using one pair", theta, per_pulse)
        n_pulses = 1
    return PulseCount(n_pulses=n_pulses, per_pulse=per_pulse, residual=theta - n_pulses * per_pulse)


def compile_rotation(
    axis: Axis,
    theta: float,
    target: int,
    profile: PhaseProfile,
    geometry: ChainGeometry,
    *,
    calibrate_field: bool = False,
) -> GatePlan:
    axis = Axis(axis)
    geometry.check_ion(target)
    theta = float(np.mod(theta, TWO_PI))
    x_target = geometry.positions[target]
    profile = profile.retarget(x_target)

    base = dict(
        target=target,
        target_position=x_target,
        axis=axis,
        theta=theta,
        delay_difference=delay_for_target(x_target),
        period=profile.period,
    )
    if theta == 0.0:
        plan = GatePlan(n_pulses=0, **base)
        return plan.model_copy(update={"ions": chain_phase_report(plan, profile, geometry)})

    count = pulses_for_angle(theta, profile, x_target)
    field_scale = 1.0
    if calibrate_field:
        field_scale = float(np.sqrt(theta / (count.n_pulses * count.per_pulse)))
    phase_scale = field_scale**2
    compensation = 2.0 * count.n_pulses * phase_scale * profile.far_differential

    plan = GatePlan(
        n_pulses=count.n_pulses,
        per_pulse_phase=count.per_pulse * phase_scale,
        far_field_phase=profile.far_differential * phase_scale,
        compensation=compensation,
        field_scale=field_scale,
        residual_angle=theta - count.n_pulses * count.per_pulse * phase_scale,
        operations=_sequence(axis, count.n_pulses, compensation),
        **base,
    )
    plan = plan.model_copy(update={"ions": chain_phase_report(plan, profile, geometry)})
    logger.info(
        "compiled R%s(%.6f) on ion %d: %d pairs (%.3f us), delay %.3f fs, residual %.3e rad",
        axis.value, theta, target, plan.n_pulses, plan.gate_time * 1e6,
        plan.delay_difference * 1e15, plan.residual_angle,
    )
    return plan


def chain_phase_report(plan: GatePlan, profile: PhaseProfile, geometry: ChainGeometry) -> Tuple[IonPhase, ...]:
    """Net Rz phase left on every ion after the train and the global compensation."""
    if profile.x_target != plan.target_position:
        profile = profile.retarget(plan.target_position)

    positions = np.asarray(geometry.positions, dtype=float)
    if plan.n_pulses == 0:
        differential = np.zeros_like(positions)
        envelope = np.zeros_like(positions)
    else:
        differential = np.atleast_1d(profile.differential_at(positions))
        envelope = np.atleast_1d(profile.interference_envelope(positions))
    weight = 2.0 * plan.n_pulses * plan.phase_scale

    report: List[IonPhase] = []
    for i, x in enumerate(positions):
        train = weight * float(differential[i])
        net = train - plan.compensation
        is_target = i == plan.target
        residual = net - (plan.theta if is_target and plan.n_pulses else 0.0)
        report.append(
            IonPhase(
                index=i,
                position=float(x),
                train_phase=train,
                net_phase=net,
                residual=residual,
                crosstalk_infidelity=0.0 if is_target else residual**2,
                crosstalk_bound=0.0 if is_target else (weight * float(envelope[i])) ** 2,
            )
        )
    return tuple(report)


# ------------------ Text form ------------------

def plan_to_text(plan: GatePlan) -> str:
    doc = {
        "target": plan.target,
        "target_position_um": plan.target_position * 1e6,
        "axis": plan.axis.value,
        "angle_rad": plan.theta,
        "delay_1_fs": 0.0,
        "delay_2_fs": plan.delay_difference * 1e15,
        "n_pulses": plan.n_pulses,
        "period_ns": plan.period * 1e9,
        "gate_time_us": plan.gate_time * 1e6,
        "field_scale": plan.field_scale,
        "per_pulse_phase_rad": plan.per_pulse_phase,
        "far_field_phase_rad": plan.far_field_phase,
        "compensation_rad": plan.compensation,
        "residual_angle_rad": plan.residual_angle,
        "sequence": [
            {"train": op.n_pulses} if op.kind == "train" else {"rotate": op.axis.value, "angle_rad": op.angle}
            for op in plan.operations
        ],
        "ions": [
            {
                "index": ion.index,
                "position_um": ion.position * 1e6,
                "train_phase_rad": ion.train_phase,
                "net_phase_rad": ion.net_phase,
                "residual_rad": ion.residual,
                "crosstalk_infidelity": ion.crosstalk_infidelity,
                "crosstalk_bound": ion.crosstalk_bound,
            }
            for ion in plan.ions
        ],
    }
    return yaml.safe_dump(doc, sort_keys=False)


def plan_from_text(text: str) -> GatePlan:
    try:
        doc = yaml.safe_load(text)
        operations = []
        for step in doc.get("sequence", []):
            if "train" in step:
                operations.append(GateOperation(kind="train", n_pulses=step["train"]))
            else:
                operations.append(GateOperation(kind="rotation", axis=step["rotate"], angle=step["angle_rad"]))
        ions = [
            IonPhase(
                index=ion["index"],
                position=ion["position_um"] * 1e-6,
                train_phase=ion["train_phase_rad"],
                net_phase=ion["net_phase_rad"],
                residual=ion["residual_rad"],
                crosstalk_infidelity=ion["crosstalk_infidelity"],
                crosstalk_bound=ion["crosstalk_bound"],
            )
            for ion in doc.get("ions", [])
        ]
        target_position = doc["target_position_um"] * 1e-6
        return GatePlan(
            target=doc["target"],
            target_position=target_position,
            axis=doc["axis"],
            theta=doc["angle_rad"],
            delay_difference=delay_for_target(target_position),
            n_pulses=doc["n_pulses"],
            period=doc["period_ns"] * 1e-9,
            per_pulse_phase=doc["per_pulse_phase_rad"],
            far_field_phase=doc["far_field_phase_rad"],
            compensation=doc["compensation_rad"],
            field_scale=doc["field_scale"],
            residual_angle=doc["residual_angle_rad"],
            operations=tuple(operations),
            ions=tuple(ions),
        )
    except (yaml.YAMLError, KeyError, TypeError, AttributeError, ValidationError) as exc:
        raise ConfigError(f"cannot read gate plan: {exc}") from exc
