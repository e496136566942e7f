import click

from tripletkd.cli.context import CliState, exit_codes, load_config
from tripletkd.cli.display import Display
from tripletkd.orchestrator.experiment import Experiment


@click.command("count-params")
@click.pass_obj
@exit_codes
def count_params(state: CliState) -> None:
    """Print trainable parameter counts and the student/teacher ratio."""
    display = Display(state.console)
    counts = Experiment(load_config(state), display).count_params()
    display.show_param_counts(counts)
