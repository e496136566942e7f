import click

from tripletkd.cli.context import CliState, exit_codes, load_config
from tripletkd.cli.display import Display
from tripletkd.orchestrator.experiment import Experiment


@click.command()
@click.pass_obj
@exit_codes
def distill(state: CliState) -> None:
    """Train the student against the frozen teacher checkpoint."""
    config = load_config(state)
    display = Display(state.console)
    active = ", ".join(kind.value for kind in config.loss.active()) or "hard targets only"
    display.show_status(f"Soft terms: {active}")
    records = Experiment(config, display).distill()
    display.show_status(f"[green]Distilled {len(records)} student run(s).[/green]")
