import csv
import os
from pathlib import Path

import numpy as np
import pytest
from click.testing import CliRunner

from far_ee.cli import main
from far_ee.geometry import ScenarioConfig, dbm_to_watt
from far_ee.harness import (
    SweepSpec, all_cells_accounted, apply_axis, convergence_study, emit_figure,
    figure_presets, run_scenario, sweep, worker_count,
)
from far_ee.metrics import CSV_COLUMNS

DATA = Path(__file__).parent / "data"
TINY = dict(num_users=1, num_far_antennas=1, num_bs_antennas=1, min_rate=1e5)


def test_apply_axis():
    cfg = ScenarioConfig()
    assert apply_axis(cfg, "R_min", 5e5).min_rate == 5e5
    assert apply_axis(cfg, "snr", 10.0).max_power == pytest.approx(10 * cfg.max_power)
    assert apply_axis(cfg, "bandwidth", 2e7).bandwidth == 2e7
    assert apply_axis(cfg, "user_distance", 80.0).user_region.center_y == 80.0
    noisy = apply_axis(cfg, "noise_bs", dbm_to_watt(-160.0))
    assert noisy.noise_bs_total == pytest.approx(dbm_to_watt(-160.0))
    assert apply_axis(cfg, "faru_count", 2).num_far_antennas == 2
    with pytest.raises(ValueError):
        apply_axis(cfg, "R_min", -1.0)
    with pytest.raises(ValueError):
        apply_axis(cfg, "faru_count", 2.5)
    with pytest.raises(ValueError):
        apply_axis(cfg, "temperature", 300.0)


def test_spec_validation():
    with pytest.raises(ValueError):
        SweepSpec(axis="R_min", values=())
    with pytest.raises(ValueError):
        SweepSpec(axis="R_min", values=(1e6,), schemes=("ris",))
    with pytest.raises(ValueError):
        SweepSpec(axis="bandwidth", values=(-1.0,))


def test_run_scenario_deterministic_rows():
    cfg = ScenarioConfig(**TINY)
    a = run_scenario(cfg, "far", 0, axis="R_min", axis_value=1e5)
    b = run_scenario(cfg, "far", 0, axis="R_min", axis_value=1e5)
    assert a.csv_row() == b.csv_row()  # byte-identical serialized cell
    assert a.feasible and a.ee > 0
    assert a.scenario_hash == cfg.scenario_hash()


def test_run_scenario_infeasible_flag():
    cfg = ScenarioConfig(**{**TINY, "min_rate": 1e9})
    rec = run_scenario(cfg, "far", 0)
    assert not rec.feasible
    assert rec.ee == 0.0
    assert rec.csv_row()["feasible"] == 0


def test_sweep_csv_layout(tmp_path):
    out = tmp_path / "s.csv"
    spec = SweepSpec(axis="R_min", values=(1e5,), schemes=("sris", "afr"),
                     seeds=(0, 1), output=str(out),
                     base_config=ScenarioConfig(**TINY))
    rows = sweep(spec)
    assert all_cells_accounted(rows)
    with open(out, newline="") as fh:
        reader = csv.DictReader(fh)
        assert tuple(reader.fieldnames) == CSV_COLUMNS
        written = list(reader)
    # per scheme: 2 seed rows + median + mean
    assert len(written) == 2 * 4
    seeds = [r["seed"] for r in written if r["scheme"] == "sris"]
    assert seeds == ["0", "1", "median", "mean"]
    med = [r for r in written if r["seed"] == "median" and r["scheme"] == "afr"][0]
    per_seed = [float(r["ee"]) for r in written
                if r["scheme"] == "afr" and r["seed"] in ("0", "1")]
    assert float(med["ee"]) == pytest.approx(np.median(per_seed))


def test_sweep_bytes_reproducible(tmp_path):
    cfg = ScenarioConfig(**TINY)
    blobs = []
    for name in ("a.csv", "b.csv"):
        out = tmp_path / name
        sweep(SweepSpec(axis="snr", values=(0.0, 10.0), schemes=("afr",),
                        seeds=(0,), output=str(out), base_config=cfg))
        blobs.append(out.read_bytes())
    assert blobs[0] == blobs[1]


def test_worker_count_env(monkeypatch):
    monkeypatch.setenv("FAR_EE_WORKERS", "3")
    assert worker_count() == 3
    monkeypatch.setenv("FAR_EE_WORKERS", "")
    assert worker_count() >= 1


def test_figure_presets_cover_axes():
    presets = figure_presets()
    assert set(presets) == {"fig4", "fig5", "fig6", "fig7", "fig8", "fig9"}
    assert presets["fig7"].base_config.user_region.kind == "rectangle"
    assert presets["fig4"].values == (0.3e6, 0.5e6, 0.8e6, 1.0e6)


def test_emit_figure_golden_bytes(tmp_path):
    out = tmp_path / "chart.svg"
    emit_figure(str(DATA / "sweep_fixture.csv"), "fig4", str(out))
    assert out.read_bytes() == (DATA / "sweep_fixture.svg").read_bytes()


def test_emit_figure_schema_errors(tmp_path):
    empty = tmp_path / "empty.csv"
    empty.write_text("scenario_hash,seed\n")
    with pytest.raises(ValueError):
        emit_figure(str(empty), "fig4", str(tmp_path / "x.svg"))
    assert not (tmp_path / "x.svg").exists()
    bad = tmp_path / "bad.csv"
    bad.write_text("foo,bar\n1,2\n")
    with pytest.raises(ValueError):
        emit_figure(str(bad), "fig4", str(tmp_path / "y.svg"))


def test_convergence_study(tmp_path):
    out = tmp_path / "conv.csv"
    rows = convergence_study(ScenarioConfig(**TINY), seeds=(0,), output=str(out))
    ees = [float(r["ee"]) for r in rows]
    assert len(ees) >= 2
    assert all(b >= a - 1e-9 for a, b in zip(ees, ees[1:]))
    emit_figure(str(out), "fig3", str(tmp_path / "conv.svg"))
    assert (tmp_path / "conv.svg").stat().st_size > 0


# ---------------------------------------------------------------------------
# CLI


def test_cli_physics():
    result = CliRunner().invoke(main, ["physics", "--conductivity", "0"])
    assert result.exit_code == 0
    assert '"attenuation_rate_1_m": 0.0' in result.output


def test_cli_optimize(tmp_path):
    cfg = tmp_path / "tiny.yaml"
    cfg.write_text(
        "num_users: 1\nnum_far_antennas: 1\nnum_bs_antennas: 1\nmin_rate: 1.0e5\n"
    )
    result = CliRunner().invoke(
        main, ["optimize", "--config", str(cfg), "--scheme", "afr", "--seed", "0"])
    assert result.exit_code == 0, result.output
    assert '"feasible": 1' in result.output


def test_cli_sweep_and_figures(tmp_path, monkeypatch):
    monkeypatch.setenv("FAR_EE_WORKERS", "1")
    spec = tmp_path / "spec.yaml"
    out = tmp_path / "out.csv"
    spec.write_text(
        "axis: R_min\nvalues: [1.0e5]\nschemes: [sris]\nseeds: [0]\n"
        f"output: {out}\n"
        "config: {num_users: 1, num_far_antennas: 1, num_bs_antennas: 1}\n"
    )
    result = CliRunner().invoke(main, ["sweep", "--spec", str(spec)])
    assert result.exit_code == 0, result.output
    assert out.exists()

    cfg = tmp_path / "tiny.yaml"
    cfg.write_text(
        "num_users: 1\nnum_far_antennas: 1\nnum_bs_antennas: 1\nmin_rate: 1.0e5\n"
    )
    figdir = tmp_path / "figs"
    result = CliRunner().invoke(main, ["figures", "--preset", "fig3",
                                       "--out", str(figdir), "--seeds", "0",
                                       "--config", str(cfg)])
    assert result.exit_code == 0, result.output
    assert (figdir / "fig3.svg").exists()
