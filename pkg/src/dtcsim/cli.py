"""Command-line entry point: ``dtcsim run`` and ``dtcsim demo prefix``."""
from __future__ import annotations

import sys
from pathlib import Path

import click

from .experiments import (SCENARIOS, ScenarioSpec, default_out_dir, load_config, prefix_search_demo,
                          run_scenario)
from .hashspace import ContractViolation
from .prefixmap import EncodingError


@click.group()
def main() -> None:
    """Overlay broadcast and prefix-search simulator."""


@main.command("run")
@click.option("--scenario", type=click.Choice(SCENARIOS), help="Named scenario; may also come from the config.")
@click.option("--seed", type=int, help="Master seed (default 0).")
@click.option("--out", "out_dir", type=click.Path(file_okay=False, path_type=Path),
              help="Output directory (default $DTCSIM_OUT or ./results).")
@click.option("--config", "config_path", type=click.Path(dir_okay=False, path_type=Path),
              help="YAML file with scenario overrides.")
def run_cmd(scenario, seed, out_dir, config_path) -> None:
    """Run a scenario and write its CSV files."""
    try:
        overrides = load_config(config_path) if config_path else {}
        scenario = scenario or overrides.pop("scenario", None)
        overrides.pop("scenario", None)
        cfg_out = overrides.pop("out", None)
        if scenario is None:
            raise click.UsageError("no scenario given (use --scenario or a 'scenario' key in the config)")
        if seed is not None:
            overrides["seed"] = seed
        spec = ScenarioSpec(scenario, overrides)
    except ContractViolation as e:
        raise click.UsageError(str(e)) from None
    out_dir = out_dir or (Path(cfg_out) if cfg_out else default_out_dir())
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        click.echo(f"error: cannot create output directory {out_dir}: {e.strerror}", err=True)
        sys.exit(1)
    try:
        reports = run_scenario(spec)
    except ContractViolation as e:
        raise click.UsageError(str(e)) from None
    for rep in reports:
        try:
            path = rep.write(out_dir)
        except OSError as e:
            click.echo(f"error: cannot write {rep.name}.csv in {out_dir}: {e.strerror}", err=True)
            sys.exit(1)
        click.echo(f"== {path}")
        click.echo(rep.render().replace(",", "\t"), nl=False)


@main.group()
def demo() -> None:
    """Interactive demonstrations."""


@demo.command("prefix")
@click.option("--n", "n", type=int, required=True, help="Number of CAN nodes.")
@click.option("--keys", "keys_file", type=click.File("r", encoding="utf-8"), required=True,
              help="Newline-separated object names.")
@click.option("--prefix", "prefix", required=True, help="Query prefix.")
@click.option("--split-factor", type=click.Choice(["0.5", "1", "3"]), default="1", show_default=True)
@click.option("--d", "d", type=int, default=2, show_default=True, help="CAN dimensions.")
@click.option("--seed", type=int, default=0, show_default=True)
def demo_prefix(n, keys_file, prefix, split_factor, d, seed) -> None:
    """Store KEYS in an N-node CAN and search them by PREFIX."""
    keys = keys_file.read().splitlines()
    try:
        res = prefix_search_demo(n, keys, prefix, split_factor, d, seed)
    except EncodingError as e:
        raise click.UsageError(str(e)) from None
    except ContractViolation as e:
        raise click.UsageError(str(e)) from None
    for k in res.matches:
        click.echo(k)
    click.echo(f"# prefix={prefix!r} matches={len(res.matches)} nodes_in_area={res.nodes_in_area} "
               f"messages={res.messages} share={float(res.area.share):.6g} root={res.root}", err=True)


if __name__ == "__main__":
    main()
