from __future__ import annotations

import functools
import logging
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from collections.abc import Callable
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import click
from pydantic import ValidationError
from rich.console import Console

from tripletkd.cli.display import Display
from tripletkd.errors import ConfigError, TripletKDError
from tripletkd.types.config import ExperimentConfig, validation_problems

logger = logging.getLogger(__name__)

EXIT_VALIDATION = 1
EXIT_RUNTIME = 2
EXIT_ACCEPTANCE = 3


@dataclass
class CliState:
    """Global flags shared by every subcommand."""

    config_path: Path | None = None
    seed: int | None = None
    out: Path | None = None
    console: Console | None = None


def load_config(state: CliState, path: Path | None = None) -> ExperimentConfig:
    """Read the experiment file and apply the --seed and --out overrides."""
    path = path or state.config_path
    if path is None:
        raise ConfigError([("--config", "this command needs an experiment file")])
    try:
        config = ExperimentConfig.from_toml(path)
    except tomllib.TOMLDecodeError as e:
        raise ConfigError([(str(path), f"not valid TOML: {e}")]) from e
    except ValidationError as e:
        raise ConfigError(validation_problems(e)) from e
    updates: dict[str, Any] = {}
    if state.seed is not None:
        updates["seeds"] = [state.seed]
    if state.out is not None:
        updates["output_dir"] = str(state.out)
    return config.model_copy(update=updates)


def exit_codes(fn: Callable) -> Callable:
    """Report library errors on the console and turn them into exit codes."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        console = click.get_current_context().obj.console
        try:
            return fn(*args, **kwargs)
        except ConfigError as e:
            for field, message in e.problems:
                console.print(f"[red]invalid[/red] {field}: {message}")
            raise SystemExit(EXIT_VALIDATION) from e
        except (TripletKDError, RuntimeError, OSError) as e:
            logger.debug("command failed", exc_info=True)
            Display(console).show_error(str(e))
            raise SystemExit(EXIT_RUNTIME) from e

    return wrapper
