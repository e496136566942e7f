import logging
from pathlib import Path

import click
from rich.console import Console
from rich.logging import RichHandler

from tripletkd import __version__
from tripletkd.cli.commands.compare import compare
from tripletkd.cli.commands.count_params import count_params
from tripletkd.cli.commands.distill import distill
from tripletkd.cli.commands.evaluate import evaluate
from tripletkd.cli.commands.gradcheck import gradcheck
from tripletkd.cli.commands.train_teacher import train_teacher
from tripletkd.cli.context import CliState

LOG_LEVELS = {0: logging.WARNING, 1: logging.INFO}


def setup_logging(verbosity: int, console: Console) -> None:
    logging.basicConfig(
        level=LOG_LEVELS.get(verbosity, logging.DEBUG),
        format="%(message)s",
        handlers=[RichHandler(console=console, show_path=False)],
        force=True,
    )


@click.group()
@click.version_option(version=__version__)
@click.option(
    "--config",
    "config_path",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    help="Experiment file (TOML)",
)
@click.option("--seed", type=int, default=None, help="Run this seed only, overriding 'seeds'")
@click.option(
    "--out", type=click.Path(file_okay=False, path_type=Path), help="Override output_dir"
)
@click.option("-v", "--verbose", count=True, help="-v for progress logs, -vv for debug")
@click.pass_context
def cli(
    ctx: click.Context, config_path: Path | None, seed: int | None, out: Path | None, verbose: int
) -> None:
    """tripletkd: teacher-student knowledge distillation experiments."""
    console = Console()
    setup_logging(verbose, Console(stderr=True))
    ctx.obj = CliState(config_path=config_path, seed=seed, out=out, console=console)


cli.add_command(train_teacher)
cli.add_command(distill)
cli.add_command(evaluate)
cli.add_command(count_params)
cli.add_command(gradcheck)
cli.add_command(compare)
