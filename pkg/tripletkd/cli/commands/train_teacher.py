import click

from tripletkd.cli.context import CliState, exit_codes, load_config
from tripletkd.cli.display import Display
from tripletkd.orchestrator.experiment import Experiment


@click.command("train-teacher")
@click.pass_obj
@exit_codes
def train_teacher(state: CliState) -> None:
    """Train the teacher model with cross-entropy, once per seed."""
    display = Display(state.console)
    records = Experiment(load_config(state), display).train_teacher()
    display.show_status(f"[green]Trained {len(records)} teacher run(s).[/green]")
