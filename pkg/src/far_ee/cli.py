"""Command-line front end: physics constants, single runs, sweeps, figures."""

from __future__ import annotations

import json
import logging
import sys

import click
import yaml

from .geometry import ScenarioConfig, config_from_dict, load_config
from .harness import (
    SCHEMES, SweepSpec, all_cells_accounted, convergence_study, emit_figure,
    figure_presets, run_scenario, sweep,
)
from .propagation import MediumParams, propagation_constants

log = logging.getLogger("far_ee")


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Enable debug logging.")
def main(verbose: bool):
    """Energy-efficiency studies for relays embedded in lossy blockages."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )


@main.command()
@click.option("--conductivity", type=float, default=1e-14, show_default=True)
@click.option("--permittivity", type=float, default=4.0, show_default=True,
              help="Relative permittivity of the blockage.")
@click.option("--permeability", type=float, default=1.0, show_default=True,
              help="Relative permeability of the blockage.")
@click.option("--wavelength", type=float, default=0.3, show_default=True)
def physics(conductivity, permittivity, permeability, wavelength):
    """Print the plane-wave constants for a lossy medium."""
    consts = propagation_constants(MediumParams(
        conductivity=conductivity,
        relative_permittivity=permittivity,
        relative_permeability=permeability,
        carrier_wavelength=wavelength,
    ))
    click.echo(json.dumps({
        "angular_frequency_rad_s": consts.angular_frequency,
        "loss_angle_rad": consts.loss_angle,
        "c1_rad_m": consts.c1,
        "phase_rate_rad_m": consts.c1_hat,
        "attenuation_rate_1_m": consts.attenuation_rate,
    }, indent=2))


def _load(config_path) -> ScenarioConfig:
    return load_config(config_path) if config_path else ScenarioConfig()


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True),
              help="YAML scenario file; defaults to the built-in scenario.")
@click.option("--scheme", type=click.Choice(SCHEMES), default="far", show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
def optimize(config_path, scheme, seed):
    """Optimize one seeded scenario and print the resulting record."""
    record = run_scenario(_load(config_path), scheme, seed)
    click.echo(json.dumps(record.csv_row() | {"wall_time_s": round(record.wall_time, 2)},
                          indent=2))
    if not record.feasible:
        click.echo("scenario flagged infeasible", err=True)


@main.command(name="sweep")
@click.option("--spec", "spec_path", type=click.Path(exists=True), required=True,
              help="YAML file with axis, values, schemes, seeds, output and "
                   "an optional config mapping.")
def sweep_cmd(spec_path):
    """Run a sweep spec; exits non-zero if any cell crashed."""
    with open(spec_path) as fh:
        raw = yaml.safe_load(fh) or {}
    config = config_from_dict(raw.pop("config", {}) or {})
    spec = SweepSpec(
        axis=raw["axis"],
        values=tuple(float(v) for v in raw["values"]),
        schemes=tuple(raw.get("schemes", SCHEMES)),
        seeds=tuple(raw.get("seeds", range(20))),
        output=raw.get("output", "sweep.csv"),
        base_config=config,
    )
    rows = sweep(spec)
    click.echo(f"wrote {len(rows)} rows to {spec.output}")
    if not all_cells_accounted(rows):
        sys.exit(1)


@main.command()
@click.option("--preset", type=click.Choice(["fig3"] + sorted(figure_presets())),
              required=True)
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default=".",
              show_default=True)
@click.option("--seeds", type=str, default=None,
              help="Comma-separated seed list overriding the preset default.")
@click.option("--config", "config_path", type=click.Path(exists=True),
              help="YAML scenario overriding the preset's base scenario.")
def figures(preset, out_dir, seeds, config_path):
    """Run a figure preset end to end (sweep CSV plus SVG chart)."""
    import dataclasses
    import os

    os.makedirs(out_dir, exist_ok=True)
    seed_list = tuple(int(s) for s in seeds.split(",")) if seeds else None
    csv_path = os.path.join(out_dir, f"{preset}.csv")
    if preset == "fig3":
        convergence_study(_load(config_path), seed_list or (0, 1, 2), csv_path)
        rows_ok = True
    else:
        spec = figure_presets()[preset]
        spec = dataclasses.replace(
            spec,
            seeds=seed_list or spec.seeds,
            output=csv_path,
            base_config=_load(config_path) if config_path else spec.base_config,
        )
        rows_ok = all_cells_accounted(sweep(spec))
    svg_path = os.path.join(out_dir, f"{preset}.svg")
    emit_figure(csv_path, preset, svg_path)
    click.echo(f"wrote {csv_path} and {svg_path}")
    if not rows_ok:
        sys.exit(1)


if __name__ == "__main__":
    main()
