#!/usr/bin/env python3
"""
OAMSIM Command Line Interface
Subcommands for the one-atom maser simulator; every run writes its
outputs as JSON and CSV files into the configured output directory
"""

import asyncio
import json
import sys
from typing import Any, Dict, List, Optional, Sequence

import click
from rich.console import Console
from rich.table import Table

from . import __version__
from .core import (BASELINE_CONFIG, MaserCore, config_from_dict, load_config_file,
                   thread_count)
from .exceptions import ConfigValidationError
from .plugins import plugin_for_command
from .utils import merge_dictionaries
from .verification import CHECKS

console = Console()
err_console = Console(stderr=True)

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_ABORT = 2
EXIT_VERIFY_FAILED = 3


def _state_option(value: Optional[str]) -> Any:
    if value is None:
        return None
    value = value.strip()
    if value.startswith("{"):
        try:
            return json.loads(value)
        except json.JSONDecodeError as e:
            raise click.BadParameter(f"not valid JSON: {e}")
    return value


def _grid_option(value: Optional[str]) -> Optional[List[int]]:
    if value is None:
        return None
    try:
        return [int(t) for t in value.split(",") if t.strip()]
    except ValueError:
        raise click.BadParameter(f"expected comma-separated integers, got {value!r}")


def _overrides(**options) -> Dict[str, Any]:
    return {key: value for key, value in options.items() if value is not None}


def resolve_config(config_path: Optional[str], overrides: Dict[str, Any],
                   threads: Optional[int] = None):
    """Config file (the shipped baseline by default) with CLI flags applied on top"""
    base = load_config_file(config_path or BASELINE_CONFIG)
    # flags replace whole fields; a new initial state must not merge into the old one
    config = config_from_dict({**base.to_dict(), **overrides})
    config.max_workers = threads if threads is not None else thread_count(config.max_workers)
    return config


async def run_plugin_cli(core: MaserCore, plugin_name: str, data: Dict[str, Any]) -> Dict[str, Any]:
    """Initialize the core, run one plugin and shut down"""
    if not await core.initialize():
        raise click.ClickException("failed to initialize the OAMSIM core")
    try:
        if plugin_name not in core.plugin_manager.loaded_plugins:
            if not await core.plugin_manager.load_plugin(plugin_name, core):
                raise click.ClickException(f"plugin {plugin_name} could not be loaded")
        return await core.run_plugin(plugin_name, data)
    finally:
        await core.shutdown()


def _show_result(command: str, result: Dict[str, Any]) -> None:
    if command == "verify":
        table = Table(title="Verification")
        table.add_column("Check", style="cyan")
        table.add_column("Result")
        table.add_column("Value", justify="right")
        table.add_column("Threshold", justify="right")
        table.add_column("Seconds", justify="right")
        for check in result.get("checks", []):
            status = "[green]pass[/green]" if check["passed"] else "[red]FAIL[/red]"
            table.add_row(check["name"], status, f"{check['value']:.3e}",
                          f"{check['threshold']:.3e}", f"{check['seconds']:.1f}")
        console.print(table)
        return

    table = Table(title=command.capitalize())
    table.add_column("Result", style="cyan")
    table.add_column("Value", style="magenta")
    for key, value in result.items():
        if key in ("plugin", "status"):
            continue
        table.add_row(key, str(value))
    console.print(table)


def execute(ctx: click.Context, command: str, overrides: Dict[str, Any],
            data: Optional[Dict[str, Any]] = None) -> int:
    """Shared body of every subcommand; returns the process exit code"""
    options = ctx.obj or {}
    overrides = merge_dictionaries(options.get("overrides", {}), overrides)
    config = resolve_config(options.get("config"), overrides, options.get("threads"))

    core = MaserCore(config)
    plugin_name = plugin_for_command(command)
    result = asyncio.run(run_plugin_cli(core, plugin_name, data or {}))

    if result.get("status") != "completed":
        code = result.get("exit_code", EXIT_ABORT)
        record = result.get("error_record", {"error": result.get("error")})
        if code == EXIT_ABORT:
            path = core.write_error_record(record)
            console.print_json(json.dumps(record, sort_keys=True, default=str))
            err_console.print(f"[red]✗ {command} aborted, error record written to {path}[/red]")
        else:
            err_console.print(f"[red]✗ {command}: {result.get('error')}[/red]")
        return code

    _show_result(command, result)
    console.print(f"[green]✓ {command} completed[/green], outputs in {config.output_directory}")
    if command == "verify" and not result.get("passed", False):
        err_console.print(f"[red]✗ failed checks: {', '.join(result.get('failed', []))}[/red]")
        return EXIT_VERIFY_FAILED
    return EXIT_OK


def truncation_options(func):
    func = click.option('--initial-state', help='fock:K, thermal[:THETA] or a JSON state object')(func)
    func = click.option('--truncation', '-d', type=int, help='Truncation level d')(func)
    return func


@click.group()
@click.version_option(version=__version__)
@click.option('--config', 'config_path', type=click.Path(dir_okay=False),
              help='Configuration file (.json, .yaml); defaults to the shipped baseline')
@click.option('--output-dir', help='Output directory')
@click.option('--seed', type=int, help='Master seed')
@click.option('--threads', type=click.IntRange(min=1),
              help='Worker threads (otherwise OAMSIM_THREADS or the config value)')
@click.option('--log-level', type=click.Choice(["DEBUG", "INFO", "WARNING", "ERROR"]),
              help='Logging level')
@click.option('--log-file', help='Also log to this file')
@click.pass_context
def cli(ctx, config_path, output_dir, seed, threads, log_level, log_file):
    """OAMSIM - one-atom maser quantum trajectory simulator"""
    ctx.obj = {
        "config": config_path,
        "threads": threads,
        "overrides": _overrides(output_directory=output_dir, seed=seed,
                                log_level=log_level, log_file=log_file),
    }


@cli.command()
@click.option('--n-max', type=int, help='Highest level searched for resonances')
@click.option('--search-xi-den', type=int, help='Scan rational pairs with xi denominators up to this')
@click.option('--search-eta-num', type=int, default=10, show_default=True,
              help='Largest eta numerator of the scan')
@click.option('--search-xi-num', type=int, help='Largest xi numerator of the scan')
@click.option('--search-eta-den', type=int, default=1, show_default=True,
              help='Largest eta denominator of the scan')
@click.pass_context
def resonances(ctx, n_max, search_xi_den, search_eta_num, search_xi_num, search_eta_den):
    """Resonant levels, sectors and the degenerate set"""
    data: Dict[str, Any] = {}
    if search_xi_den:
        data["search"] = _overrides(xi_den_max=search_xi_den, eta_num_max=search_eta_num,
                                    xi_num_max=search_xi_num, eta_den_max=search_eta_den)
    return execute(ctx, "resonances", _overrides(n_max=n_max), data)


@cli.command()
@truncation_options
@click.option('--horizon', '-T', type=int, help='Number of steps')
@click.option('--trajectories', '-n', type=int, help='Ensemble size')
@click.option('--checkpoint-every', type=int, help='Diagnostic stride (0: only t=0 and T)')
@click.option('--leakage-budget', type=float, help='Tolerated truncation leakage')
@click.option('--guard', type=int, help='Guard band above the initial support')
@click.option('--classical', is_flag=True, help='Simulate the classical birth-death chain')
@click.pass_context
def simulate(ctx, truncation, initial_state, horizon, trajectories, checkpoint_every,
             leakage_budget, guard, classical):
    """Run a trajectory ensemble"""
    overrides = _overrides(truncation=truncation, initial_state=_state_option(initial_state),
                           horizon=horizon, n_trajectories=trajectories,
                           checkpoint_every=checkpoint_every, leakage_budget=leakage_budget,
                           guard=guard)
    return execute(ctx, "simulate", overrides, {"classical": classical})


@cli.command()
@truncation_options
@click.option('--tol', type=float, help='Trace-norm tolerance')
@click.option('--t-max', type=int, help='Maximum number of channel applications')
@click.option('--record-every', type=click.IntRange(min=1), help='Distance recording stride')
@click.pass_context
def channel(ctx, truncation, initial_state, tol, t_max, record_every):
    """Iterate the averaged channel to its limit"""
    overrides = _overrides(truncation=truncation, initial_state=_state_option(initial_state),
                           channel_tol=tol, channel_t_max=t_max)
    return execute(ctx, "channel", overrides, _overrides(record_every=record_every))


@cli.command()
@truncation_options
@click.option('--word-length', '-s', type=int, help='Length of the outcome words')
@click.option('--shift-grid', help='Comma-separated shifts t, e.g. 0,10,100,1000')
@click.pass_context
def outcomes(ctx, truncation, initial_state, word_length, shift_grid):
    """Exact outcome laws and their mixing"""
    overrides = _overrides(truncation=truncation, initial_state=_state_option(initial_state),
                           outcome_horizon=word_length, shift_grid=_grid_option(shift_grid))
    return execute(ctx, "outcomes", overrides)


@cli.command()
@truncation_options
@click.option('--horizon', '-T', type=int, help='Number of steps')
@click.option('--trajectories', '-n', type=int, help='Ensemble size')
@click.pass_context
def wasserstein(ctx, truncation, initial_state, horizon, trajectories):
    """W1 distance of the empirical state law to its invariant measure"""
    overrides = _overrides(truncation=truncation, initial_state=_state_option(initial_state),
                           horizon=horizon, n_trajectories=trajectories)
    return execute(ctx, "wasserstein", overrides)


@cli.command()
@click.option('--scale', type=click.Choice(["quick", "full"]), help='Verification scale')
@click.option('--check', 'checks', multiple=True, type=click.Choice(list(CHECKS)),
              help='Run only these checks (repeatable)')
@click.pass_context
def verify(ctx, scale, checks):
    """Run the property suite"""
    return execute(ctx, "verify", _overrides(verify_scale=scale), {"checks": list(checks)})


def run_command(argv: Sequence[str]) -> int:
    """Run the CLI and map every outcome to an exit code"""
    try:
        result = cli.main(args=list(argv), prog_name="oamsim", standalone_mode=False)
    except click.UsageError as e:
        e.show()
        return EXIT_INVALID
    except click.Abort:
        err_console.print("[yellow]Aborted[/yellow]")
        return EXIT_INVALID
    except click.ClickException as e:
        e.show()
        return EXIT_ABORT
    except ConfigValidationError as e:
        err_console.print("[red]✗ invalid configuration[/red]")
        for issue in e.issues:
            err_console.print(f"  {issue}")
        return EXIT_INVALID
    return result if isinstance(result, int) else EXIT_OK


def main():
    """Main entry point for CLI"""
    sys.exit(run_command(sys.argv[1:]))


if __name__ == '__main__':
    main()
