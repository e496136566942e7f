import click

from tripletkd.cli.context import EXIT_ACCEPTANCE, CliState, exit_codes
from tripletkd.cli.display import Display
from tripletkd.eval.gradient_suite import check_names, run_suite


@click.command()
@click.option("--seeds", default=20, type=int, help="Random seeds per check")
@click.option("--tol", default=1e-5, type=float, help="Max relative error")
@click.option("--eps", default=1e-5, type=float, help="Finite-difference step")
@click.option("--only", multiple=True, help="Run only these checks (repeatable)")
@click.option("--list", "list_only", is_flag=True, help="List check names and exit")
@click.pass_obj
@exit_codes
def gradcheck(
    state: CliState, seeds: int, tol: float, eps: float, only: tuple[str, ...], list_only: bool
) -> None:
    """Compare analytic gradients of every layer and loss against finite differences."""
    if list_only:
        for name in check_names():
            state.console.print(name)
        return
    try:
        results = run_suite(seeds=seeds, tol=tol, eps=eps, names=list(only) or None)
    except ValueError as e:
        raise click.BadParameter(str(e), param_hint="--only") from e
    Display(state.console).show_gradcheck(results)
    failed = [r.name for r in results if not r.passed]
    if failed:
        names = ", ".join(failed)
        state.console.print(f"[bold red]{len(failed)} check(s) failed:[/bold red] {names}")
        raise SystemExit(EXIT_ACCEPTANCE)
    state.console.print(f"[green]All {len(results)} checks passed.[/green]")
