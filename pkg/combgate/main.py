"""
HTTP routes. Each route validates an ExperimentConfig body and calls the runner
stages; library errors are translated to HTTP status codes by category.
"""
import numpy as np
from fastapi import FastAPI, HTTPException, status

from . import __version__
from .budget import ErrorBudget
from .chain import lamb_dicke
from .compiler import GatePlan
from .constants import PhysicalConstants
from .errors import CombGateError
from .runner import Experiment, compile_plan, compute_budget, compute_profile, summarize_profile
from .schemas import ExperimentConfig, HealthResponse, LambDickeResponse, ProfileSummary
from .settings import get_settings

app = FastAPI(title="combgate", version=__version__)

_STATUS = {
    "config": 400,
    "physics": 422,
    "numerics": 500,
}


def _http_error(exc: CombGateError) -> HTTPException:
    # detail is the same {category, message} object the CLI prints on stderr
    return HTTPException(
        status_code=_STATUS.get(exc.category, status.HTTP_500_INTERNAL_SERVER_ERROR),
        detail=exc.to_dict()["error"],
    )


@app.get("/health", response_model=HealthResponse, tags=["Service"])
def health():
    return HealthResponse(status="ok", version=__version__)


@app.get("/lamb-dicke", response_model=LambDickeResponse, tags=["Trap"])
def read_lamb_dicke(axial_frequency_khz: float = 600.0, mass_amu: float = 39.962590863, carrier_wavelength_nm: float = 1000.0):
    """eta = k_c sqrt(hbar / (2 m omega_ax))."""
    try:
        eta = lamb_dicke(
            2.0 * np.pi * axial_frequency_khz * 1e3,
            PhysicalConstants.for_mass_amu(mass_amu).mass,
            2.0 * np.pi / (carrier_wavelength_nm * 1e-9),
        )
    except CombGateError as exc:
        raise _http_error(exc)
    return LambDickeResponse(
        axial_frequency_khz=axial_frequency_khz,
        mass_amu=mass_amu,
        carrier_wavelength_nm=carrier_wavelength_nm,
        eta=eta,
    )


@app.post("/profile", response_model=ProfileSummary, tags=["Gate"])
def create_profile(config: ExperimentConfig):
    """
    Stark phase profile of the two qubit levels around the comb overlap point.

    The body is the same experiment configuration as the YAML file, sent as JSON.
    Only the summary comes back (far-field and overlap phases, the factor-2 ratio
    and the differential phase on the grid); the CSV is written by the CLI only.
    """
    try:
        exp = Experiment.from_config(config)
        return summarize_profile(compute_profile(exp))
    except CombGateError as exc:
        raise _http_error(exc)


@app.post("/compile", response_model=GatePlan, tags=["Gate"])
def create_plan(config: ExperimentConfig):
    """
    Compiles gate.axis / gate.angle_rad on gate.target into a pulse schedule.
    Returns the full plan: pulse count, comb delays, the rotation sequence and what
    every other ion in the chain receives.
    A qubit that the comb cannot split in the right sense gives 422.
    """
    try:
        plan, _ = compile_plan(Experiment.from_config(config))
    except CombGateError as exc:
        raise _http_error(exc)
    return plan


@app.post("/budget", response_model=ErrorBudget, tags=["Gate"])
def create_budget(config: ExperimentConfig):
    """Error budget of the compiled gate. This one is slow (seconds to minutes)."""
    try:
        budget, _ = compute_budget(Experiment.from_config(config), get_settings())
    except CombGateError as exc:
        raise _http_error(exc)
    return budget
