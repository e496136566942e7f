from pathlib import Path

import click

from tripletkd.cli.context import EXIT_ACCEPTANCE, CliState, exit_codes, load_config
from tripletkd.cli.display import Display
from tripletkd.eval.compare import collect, write_comparison
from tripletkd.state.metrics_store import MetricsStore


@click.command()
@click.argument(
    "configs", nargs=-1, type=click.Path(exists=True, dir_okay=False, path_type=Path)
)
@click.pass_obj
@exit_codes
def compare(state: CliState, configs: tuple[Path, ...]) -> None:
    """Tabulate final test accuracy per method, mean ± std across seeds.

    With CONFIGS, exactly the runs they describe are expected; otherwise every run
    under the output directory is compared.
    """
    if configs:
        loaded = [load_config(state, path) for path in configs]
        out = state.out or Path(loaded[0].output_dir)
        expected = [(c.name, seed) for c in loaded for seed in c.seeds]
    else:
        out = state.out or (Path(load_config(state).output_dir) if state.config_path else None)
        if out is None:
            raise click.UsageError("give experiment files or --out (or --config) to compare")
        expected = None

    comparison = collect(MetricsStore(out), expected)
    if not comparison.rows and comparison.complete:
        state.console.print(f"[red]No completed runs under {out}.[/red]")
        raise SystemExit(EXIT_ACCEPTANCE)
    Display(state.console).show_comparison(comparison)
    path = out / "comparison.json"
    write_comparison(path, comparison)
    state.console.print(f"  wrote {path}")
    if not comparison.complete:
        raise SystemExit(EXIT_ACCEPTANCE)
