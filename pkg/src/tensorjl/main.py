from pathlib import Path
from pydantic import ValidationError
from tensorjl.config import Experiment
from tensorjl.config import Family
from tensorjl.config import InputFormat
from tensorjl.config import Regime
from tensorjl.errors import TensorJLError
from tensorjl.experiments import load_config
from tensorjl.experiments import run
from tensorjl.utils import get_logger
from tensorjl.utils import set_log_level
from tensorjl.verify import BoundParams
from tensorjl.verify import k_bound_value
from tensorjl.verify import min_k_bound
from typing import Annotated
from typing import Any
from typing import Callable
from typing import List
from typing import Optional
import inspect
import typer


logger = get_logger(__name__)

EXIT_CONFIGURATION = 1
EXIT_VERIFICATION = 2

cli = typer.Typer(
    no_args_is_help=True,
    pretty_exceptions_enable=False,
    help="tjl runs tensorized Johnson-Lindenstrauss projection experiments.",
)


def ints(value: Optional[str]) -> Optional[List[int]]:
    if value is None:
        return None
    try:
        return [int(item) for item in value.split(",") if item.strip()]
    except ValueError as e:
        raise typer.BadParameter(
            f"Expected comma separated integers, got {value!r}"
        ) from e


def families(value: Optional[str]) -> Optional[List[Family]]:
    if value is None:
        return None
    try:
        return [Family(item.strip()) for item in value.split(",") if item.strip()]
    except ValueError as e:
        raise typer.BadParameter(
            f"Expected comma separated families ({', '.join(f.value for f in Family)})"
        ) from e


def execute(**options: Any) -> None:
    """Load the configuration, run the experiment and map failures to exit codes."""
    log_level = options.pop("log_level")
    set_log_level(log_level)
    config_path = options.pop("config")
    for name in ("tt_ranks", "cp_ranks", "k_grid", "n_grid"):
        options[name] = ints(options[name])
    options["families"] = families(options["families"])
    # flags left at False must not mask a config file value
    options["fixed_input"] = options["fixed_input"] or None
    try:
        config = load_config(config_path, **options)
        out, passed = run(config)
    except (TensorJLError, ValidationError) as e:
        logger.error("Configuration | %s", e)
        raise typer.Exit(code=EXIT_CONFIGURATION)
    logger.info("Results | %s", out)
    if not passed:
        logger.error("Verification | failed")
        raise typer.Exit(code=EXIT_VERIFICATION)


@cli.command(name="run")
def cli_run(
    experiment: Optional[Experiment] = None,
    regime: Optional[Regime] = None,
    d: Annotated[Optional[int], typer.Option("--d")] = None,
    N: Annotated[Optional[int], typer.Option("--N")] = None,
    input_format: Optional[InputFormat] = None,
    input_rank: Optional[int] = None,
    families: Annotated[
        Optional[str], typer.Option(help="Comma separated, e.g. tt,cp,gaussian")
    ] = None,
    tt_ranks: Annotated[Optional[str], typer.Option(help="Comma separated")] = None,
    cp_ranks: Annotated[Optional[str], typer.Option(help="Comma separated")] = None,
    k_grid: Annotated[Optional[str], typer.Option(help="Comma separated")] = None,
    n_grid: Annotated[
        Optional[str], typer.Option(help="Orders N for the timing study")
    ] = None,
    trials: Optional[int] = None,
    seed: Optional[int] = None,
    out: Optional[Path] = None,
    sparsity: Optional[float] = None,
    dataset: Optional[Path] = None,
    fixed_input: bool = False,
    oracle_cap: Optional[int] = None,
    config: Annotated[
        Optional[Path], typer.Option(help="Flat key = value TOML file")
    ] = None,
    max_jobs: Optional[int] = None,
    log_level: Annotated[str, typer.Option(envvar="LOG_LEVEL")] = "INFO",
) -> None:
    """Run the experiment named by --experiment (or the config file)."""
    execute(**locals())


def experiment_command(experiment: Experiment) -> Callable[..., None]:
    """A command for one experiment with every option of ``run`` but --experiment."""

    def command(**options: Any) -> None:
        execute(experiment=experiment, **options)

    signature = inspect.signature(cli_run)
    command.__signature__ = signature.replace(  # type: ignore[attr-defined]
        parameters=[
            p for name, p in signature.parameters.items() if name != "experiment"
        ]
    )
    command.__doc__ = f"Run the {experiment.value} experiment."
    return command


for experiment in Experiment:
    cli.command(name=experiment.value)(experiment_command(experiment))


@cli.command(name="bounds")
def cli_bounds(
    N: Annotated[int, typer.Option("--N")],
    rank: Annotated[int, typer.Option("--rank", "-R")],
    epsilon: float = 0.1,
    delta: float = 0.05,
    m: int = 1,
    c: float = 1.0,
    log_level: Annotated[str, typer.Option(envvar="LOG_LEVEL")] = "INFO",
) -> None:
    """Print the embedding-dimension lower bounds for TT and CP inputs."""
    set_log_level(log_level)
    try:
        params = BoundParams(N=N, R=rank, epsilon=epsilon, m=m, delta=delta, c=c)
    except ValidationError as e:
        logger.error("Configuration | %s", e)
        raise typer.Exit(code=EXIT_CONFIGURATION)
    for fmt in InputFormat:
        print(
            f"{fmt.value}: k >= {min_k_bound(params, fmt)} "
            f"({k_bound_value(params, fmt):.6g})"
        )


def main() -> None:
    cli()
