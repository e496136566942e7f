from __future__ import annotations

from rich.console import Console
from rich.panel import Panel
from rich.table import Table

from tripletkd.eval.compare import Comparison
from tripletkd.eval.gradient_suite import CheckResult
from tripletkd.types.models import EpochMetrics, LossDiagnostics, Role, RunRecord

PASS_ICONS = {True: "[green]pass[/green]", False: "[red]FAIL[/red]"}


class Display:
    """Rich console output for training runs and reports."""

    def __init__(self, console: Console | None = None) -> None:
        self.console = console or Console()

    def show_run_start(self, run: str, role: Role, seed: int, param_count: int) -> None:
        self.console.rule(f"{run} ({role.value}), seed {seed}, {param_count:,} parameters")

    def show_epoch(self, metrics: EpochMetrics, epochs: int) -> None:
        terms = "  ".join(f"{kind.value}={value:.4f}" for kind, value in metrics.terms.items())
        self.console.print(
            f"  epoch {metrics.epoch + 1}/{epochs}  lr={metrics.lr:g}  "
            f"loss={metrics.total_loss:.4f}  hard={metrics.hard_loss:.4f}  {terms}  "
            f"[bold]acc={metrics.test_accuracy:.4f}[/bold]"
        )

    def show_run_done(self, record: RunRecord, diagnostics: LossDiagnostics) -> None:
        lines = [
            f"Parameters: {record.param_count:,}",
            f"Final test accuracy: {record.final_accuracy:.4f}"
            if record.final_accuracy is not None
            else "No epochs run",
        ]
        if diagnostics.empty_omega:
            lines.append(f"Batches with empty negative set: {diagnostics.empty_omega}")
        if diagnostics.skipped_angles:
            lines.append(f"Degenerate angle triplets skipped: {diagnostics.skipped_angles}")
        if diagnostics.skipped_terms:
            lines.append(f"Terms skipped on undersized batches: {diagnostics.skipped_terms}")
        self.console.print(
            Panel("\n".join(lines), title=f"{record.run} seed {record.seed}", border_style="green")
        )

    def show_param_counts(self, counts: dict[Role, int]) -> None:
        table = Table(show_header=True, header_style="bold")
        table.add_column("Model")
        table.add_column("Trainable parameters", justify="right")
        for role, count in counts.items():
            table.add_row(role.value, f"{count:,}")
        self.console.print(table)
        if Role.TEACHER in counts and Role.STUDENT in counts:
            self.console.print(
                f"  student/teacher ratio: [bold]{param_ratio(counts):.2%}[/bold]"
            )

    def show_gradcheck(self, results: list[CheckResult]) -> None:
        table = Table(title="Gradient check", show_header=True, header_style="bold")
        table.add_column("Check")
        table.add_column("Seeds", justify="right")
        table.add_column("Max rel. error", justify="right")
        table.add_column("Skipped", justify="right")
        table.add_column("Floored", justify="right")
        table.add_column("")
        for r in results:
            table.add_row(
                r.name,
                str(r.seeds),
                f"{r.max_rel_error:.2e}",
                str(r.skipped),
                str(r.floored),
                PASS_ICONS[r.passed],
            )
        self.console.print(table)

    def show_comparison(self, comparison: Comparison) -> None:
        table = Table(title="Test accuracy", show_header=True, header_style="bold")
        table.add_column("Method")
        table.add_column("Seeds", justify="right")
        table.add_column("Accuracy (%)", justify="right")
        table.add_column("Parameters", justify="right")
        for row in comparison.rows:
            table.add_row(
                row.method,
                str(len(row.seeds)),
                f"{100 * row.mean:.2f} ± {100 * row.std:.2f}",
                f"{row.param_count:,}",
            )
        self.console.print(table)
        for path in comparison.absent:
            self.console.print(f"  [yellow]absent:[/yellow] {path}")

    def show_status(self, message: str) -> None:
        self.console.print(f"  {message}")

    def show_error(self, message: str) -> None:
        self.console.print(f"[bold red]Error:[/bold red] {message}")


def param_ratio(counts: dict[Role, int]) -> float:
    return counts[Role.STUDENT] / counts[Role.TEACHER]
