import click
from rich.table import Table

from tripletkd.cli.context import CliState, exit_codes, load_config
from tripletkd.cli.display import Display
from tripletkd.orchestrator.experiment import Experiment


@click.command("eval")
@click.pass_obj
@exit_codes
def evaluate(state: CliState) -> None:
    """Test accuracy of the stored checkpoints of this run."""
    config = load_config(state)
    results = Experiment(config, Display(state.console)).evaluate()

    table = Table(title=f"{config.name}: test accuracy")
    table.add_column("Seed", justify="right")
    table.add_column("Role")
    table.add_column("Accuracy", justify="right")
    table.add_column("Checkpoint")
    for r in results:
        table.add_row(str(r.seed), r.role.value, f"{r.accuracy:.4f}", str(r.checkpoint))
    state.console.print(table)
