"""
Command-line entry point.

    python -m combgate profile  --config table1.yaml --out results/
    python -m combgate budget   --override gate.angle_rad=3.14159
    python -m combgate serve    --port 8000

Exit codes: 0 success, 1 configuration error, 2 physics or numerics error. Errors
are reported on stderr as one JSON object.
"""
import json
import sys
from typing import Optional, Sequence

import click

from .errors import CombGateError
from .models import RunMode
from .settings import configure_logging, get_settings


def _fail(exc: CombGateError) -> None:
    click.echo(json.dumps(exc.to_dict()), err=True)
    sys.exit(exc.exit_code)


def _run_mode(mode: RunMode, config_path: Optional[str], out: Optional[str], overrides: Sequence[str], verbose: bool):
    from .runner import run
    from .schemas import load_config

    settings = get_settings()
    configure_logging(settings, verbose=verbose)
    try:
        config = load_config(config_path, overrides=[f"run.mode={mode.value}", *overrides])
        result = run(config, out_dir=out, settings=settings)
    except CombGateError as exc:
        _fail(exc)
        return
    click.echo(json.dumps({"mode": mode.value, "output_dir": str(result.output_dir), **result.summary}, default=str))


def _mode_command(mode: RunMode, help_text: str):
    @click.command(name=mode.value, help=help_text)
    @click.option("--config", "config_path", type=click.Path(dir_okay=False), default=None, help="YAML experiment file.")
    @click.option("--out", type=click.Path(file_okay=False), default=None, help="Output directory.")
    @click.option("--override", "overrides", multiple=True, metavar="SECTION.KEY=VALUE", help="Override one config value.")
    @click.option("-v", "--verbose", is_flag=True, help="Debug logging.")
    def command(config_path, out, overrides, verbose):
        _run_mode(mode, config_path, out, overrides, verbose)

    return command


@click.group()
def cli():
    """Frequency-comb single-ion gate toolkit."""


cli.add_command(_mode_command(RunMode.profile, "AC Stark phase profile along the trap axis."))
cli.add_command(_mode_command(RunMode.compile, "Compile the configured rotation into a pulse schedule."))
cli.add_command(_mode_command(RunMode.budget, "Error budget of the compiled gate."))
cli.add_command(_mode_command(RunMode.simulate, "Open-system simulation of the pulse train."))
cli.add_command(_mode_command(RunMode.sweep, "Simulated phase and phonon excitation versus ion position."))


@cli.command()
@click.option("--host", default="127.0.0.1")
@click.option("--port", default=8000, type=int)
def serve(host: str, port: int):
    """Serve the HTTP routes with uvicorn."""
    import uvicorn

    configure_logging(get_settings())
    uvicorn.run("combgate.main:app", host=host, port=port)
