"""Seeded Monte-Carlo execution, sweep orchestration and figure emission.

A sweep cell is one (axis value, scheme, seed) triple.  Cells are
independent, so they run on a bounded process pool (FAR_EE_WORKERS, see
worker_count) and are merged back in deterministic key order; the CSV
produced for a given spec is byte-identical across runs regardless of
scheduling.  All channel randomness comes from the seed alone, so the
three schemes inside one row share the same fading draw.
"""

from __future__ import annotations

import csv
import dataclasses
import logging
import os
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .baselines import evaluate_afr, evaluate_sris
from .geometry import ScenarioConfig, UserRegion, dbm_to_watt
from .metrics import CSV_COLUMNS
from .optimizer import optimize_ee

log = logging.getLogger("far_ee")

AXES = ("R_min", "snr", "bandwidth", "user_distance", "noise_bs", "faru_count")
SCHEMES = ("far", "sris", "afr")
DEFAULT_SEEDS = tuple(range(20))


@dataclass(frozen=True)
class SweepSpec:
    axis: str
    values: tuple
    schemes: tuple = SCHEMES
    seeds: tuple = DEFAULT_SEEDS
    output: str = "sweep.csv"
    base_config: ScenarioConfig = field(default_factory=ScenarioConfig)

    def __post_init__(self):
        if self.axis not in AXES:
            raise ValueError(f"unknown sweep axis {self.axis!r}")
        if not self.values or not self.seeds:
            raise ValueError("sweep needs at least one value and one seed")
        unknown = set(self.schemes) - set(SCHEMES)
        if unknown:
            raise ValueError(f"unknown schemes {sorted(unknown)}")
        for v in self.values:
            apply_axis(self.base_config, self.axis, v)  # raises if out of range


@dataclass
class RunRecord:
    scenario_hash: str
    seed: int
    scheme: str
    axis: str
    axis_value: float
    ee: float
    sum_rate: float
    total_power: float
    min_rate_margin: float
    feasible: bool
    outer_iterations: int
    wall_time: float  # seconds; diagnostic only, kept out of the CSV

    def csv_row(self) -> dict:
        return {
            "scenario_hash": self.scenario_hash,
            "seed": self.seed,
            "scheme": self.scheme,
            "axis": self.axis,
            "axis_value": f"{self.axis_value:.10e}",
            "ee": f"{self.ee:.10e}",
            "sum_rate": f"{self.sum_rate:.10e}",
            "total_power": f"{self.total_power:.10e}",
            "min_rate_margin": f"{self.min_rate_margin:.10e}",
            "feasible": int(self.feasible),
            "outer_iterations": self.outer_iterations,
        }


def apply_axis(config: ScenarioConfig, axis: str, value) -> ScenarioConfig:
    """Return a copy of `config` with one sweep axis applied.

    The SNR axis scales the power budget (geometry and noise fixed, the
    average SNR is proportional to P_max); values are dB offsets against
    the budget in `config`.
    """
    if axis == "R_min":
        if value < 0:
            raise ValueError("R_min must be >= 0")
        return replace(config, min_rate=float(value))
    if axis == "snr":
        return replace(config, max_power=config.max_power * 10.0 ** (float(value) / 10.0))
    if axis == "bandwidth":
        if value <= 0:
            raise ValueError("bandwidth must be positive")
        return replace(config, bandwidth=float(value))
    if axis == "user_distance":
        if value <= 0:
            raise ValueError("user distance must be positive")
        region = replace(config.user_region, center_y=float(value))
        return replace(config, user_region=region)
    if axis == "noise_bs":
        # axis value is the TOTAL noise power at the BS combiner (W);
        # the config stores a per-Hz density, so divide by the bandwidth
        if value <= 0:
            raise ValueError("noise power must be positive")
        return replace(config, noise_bs=float(value) / config.bandwidth)
    if axis == "faru_count":
        count = int(value)
        if count != value or count < 1:
            raise ValueError("faru_count must be a positive integer")
        return replace(config, num_far_antennas=count)
    raise ValueError(f"unknown sweep axis {axis!r}")


def run_scenario(config: ScenarioConfig, scheme: str, seed: int,
                 axis: str = "none", axis_value: float = 0.0) -> RunRecord:
    """Execute one optimization cell and condense it into a record."""
    start = time.perf_counter()
    if scheme == "far":
        state = optimize_ee(config, seed)
        report = state.report()
        feasible = state.feasible and report.feasible
        outer = state.outer_iteration
    elif scheme == "sris":
        report = evaluate_sris(config, seed)
        feasible, outer = report.feasible, 1
    elif scheme == "afr":
        report = evaluate_afr(config, seed)
        feasible, outer = report.feasible, 1
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    elapsed = time.perf_counter() - start
    # an infeasible scenario is a valid outcome: the record carries the
    # flag and zeroed rate metrics so sweeps can skip it in aggregation
    return RunRecord(
        scenario_hash=config.scenario_hash(),
        seed=seed,
        scheme=scheme,
        axis=axis,
        axis_value=float(axis_value),
        ee=report.ee if feasible else 0.0,
        sum_rate=report.sum_rate if feasible else 0.0,
        total_power=report.total_power,
        min_rate_margin=float(np.min(report.rates)),
        feasible=feasible,
        outer_iterations=outer,
        wall_time=elapsed,
    )


def _run_cell(args) -> tuple:
    spec_config, axis, value, scheme, seed = args
    config = apply_axis(spec_config, axis, value)
    try:
        record = run_scenario(config, scheme, seed, axis=axis, axis_value=value)
        return (value, scheme, seed), record, None
    except Exception as exc:  # record the failure, keep the sweep alive
        return (value, scheme, seed), None, repr(exc)


def worker_count() -> int:
    raw = os.environ.get("FAR_EE_WORKERS", "")
    if raw.strip():
        return max(1, int(raw))
    return max(1, (os.cpu_count() or 1) // 2)


def _aggregate_rows(records: list[RunRecord], axis: str, value, scheme: str) -> list[dict]:
    rows = []
    usable = [r for r in records if r.feasible]
    for stat_name, fn in (("median", statistics.median), ("mean", statistics.fmean)):
        if usable:
            agg = RunRecord(
                scenario_hash=records[0].scenario_hash,
                seed=-1, scheme=scheme, axis=axis, axis_value=float(value),
                ee=fn(r.ee for r in usable),
                sum_rate=fn(r.sum_rate for r in usable),
                total_power=fn(r.total_power for r in usable),
                min_rate_margin=fn(r.min_rate_margin for r in usable),
                feasible=True, outer_iterations=0, wall_time=0.0,
            )
        else:
            agg = RunRecord(
                scenario_hash=records[0].scenario_hash if records else "",
                seed=-1, scheme=scheme, axis=axis, axis_value=float(value),
                ee=0.0, sum_rate=0.0, total_power=0.0, min_rate_margin=0.0,
                feasible=False, outer_iterations=0, wall_time=0.0,
            )
        row = agg.csv_row()
        row["seed"] = stat_name
        rows.append(row)
    return rows


def sweep(spec: SweepSpec) -> list[dict]:
    """Run every cell of the sweep and write the CSV table.

    Returns the written rows (per-cell rows in (value, scheme, seed)
    order, then median/mean aggregation rows per (value, scheme)).
    Failed cells appear with feasible = 0 and are excluded from the
    aggregates; their errors go to the log.
    """
    cells = [
        (spec.base_config, spec.axis, value, scheme, seed)
        for value in spec.values
        for scheme in spec.schemes
        for seed in spec.seeds
    ]
    results: dict[tuple, RunRecord] = {}
    failures: dict[tuple, str] = {}
    workers = worker_count()
    if workers > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for key, record, err in pool.map(_run_cell, cells):
                if record is not None:
                    results[key] = record
                else:
                    failures[key] = err
    else:
        for cell in cells:
            key, record, err = _run_cell(cell)
            if record is not None:
                results[key] = record
            else:
                failures[key] = err
    for key, err in sorted(failures.items(), key=str):
        log.error("sweep cell %s failed: %s", key, err)

    rows: list[dict] = []
    for value in spec.values:
        for scheme in spec.schemes:
            group = []
            for seed in spec.seeds:
                record = results.get((value, scheme, seed))
                if record is None:
                    hash_ = apply_axis(spec.base_config, spec.axis, value).scenario_hash()
                    record = RunRecord(hash_, seed, scheme, spec.axis, float(value),
                                       0.0, 0.0, 0.0, 0.0, False, 0, 0.0)
                group.append(record)
                rows.append(record.csv_row())
            rows.extend(_aggregate_rows(group, spec.axis, value, scheme))

    with open(spec.output, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
    return rows


def all_cells_accounted(rows: list[dict]) -> bool:
    """True when every per-seed row completed (feasible or flagged); a row
    is only missing if its cell crashed, which the caller turns into a
    non-zero exit code."""
    return all(row["feasible"] in (0, 1, "0", "1") for row in rows)


# ---------------------------------------------------------------------------
# figure presets (static line charts from sweep CSVs)

_AXIS_LABELS = {
    "R_min": "minimum required rate (bit/s)",
    "snr": "power budget offset (dB)",
    "bandwidth": "bandwidth (Hz)",
    "user_distance": "BS to user-region distance (m)",
    "noise_bs": "BS noise power (W)",
    "faru_count": "receive-side fluid antennas",
}

_FIG7_REGION = UserRegion(kind="rectangle", center_y=100.0, width=40.0, depth=20.0)


def figure_presets() -> dict:
    """Sweep specs behind the `figures` CLI command.

    fig3 is the convergence study (handled separately); the rest are EE
    line charts over one swept axis each.
    """
    base = ScenarioConfig()
    return {
        "fig4": SweepSpec(axis="R_min", values=(0.3e6, 0.5e6, 0.8e6, 1.0e6),
                          output="fig4.csv", base_config=base),
        "fig5": SweepSpec(axis="snr", values=(-20.0, -10.0, 0.0, 10.0, 20.0),
                          output="fig5.csv", base_config=base),
        "fig6": SweepSpec(axis="bandwidth", values=(5e6, 10e6, 20e6, 40e6),
                          output="fig6.csv", base_config=base),
        "fig7": SweepSpec(axis="user_distance", values=(80.0, 90.0, 100.0, 110.0, 120.0, 130.0),
                          output="fig7.csv",
                          base_config=replace(base, user_region=_FIG7_REGION)),
        "fig8": SweepSpec(axis="noise_bs", values=tuple(dbm_to_watt(v) for v in
                          (-170.0, -150.0, -130.0, -110.0, -90.0, -70.0)),
                          output="fig8.csv", base_config=base),
        "fig9": SweepSpec(axis="faru_count", values=(2, 4, 6, 8),
                          output="fig9.csv", base_config=base),
    }


def convergence_study(config: ScenarioConfig, seeds, output: str) -> list[dict]:
    """fig3: per-iteration EE traces of the movable-antenna scheme."""
    rows = []
    for seed in seeds:
        state = optimize_ee(config, seed)
        for it, ee in enumerate(state.ee_trace):
            rows.append({"seed": seed, "iteration": it, "ee": f"{ee:.10e}"})
    with open(output, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=("seed", "iteration", "ee"),
                                lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
    return rows


def _load_csv(path: str) -> list[dict]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValueError(f"empty CSV: {path}")
    return rows


def emit_figure(csv_path: str, preset: str, out_path: str) -> str:
    """Render a sweep (or convergence) CSV into a deterministic SVG chart."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "far-ee"
    rows = _load_csv(csv_path)
    fig, ax = plt.subplots(figsize=(6.0, 4.0))

    if preset == "fig3":
        if not {"seed", "iteration", "ee"} <= set(rows[0]):
            raise ValueError("CSV schema does not match the convergence preset")
        seeds = sorted({row["seed"] for row in rows}, key=int)
        for seed in seeds:
            pts = [(int(r["iteration"]), float(r["ee"])) for r in rows
                   if r["seed"] == seed]
            pts.sort()
            ax.plot(*zip(*pts), marker="o", label=f"seed {seed}")
        ax.set_xlabel("outer iteration")
    else:
        missing = set(CSV_COLUMNS) - set(rows[0])
        if missing:
            raise ValueError(f"CSV schema mismatch, missing columns {sorted(missing)}")
        medians = [r for r in rows if r["seed"] == "median"]
        if not medians:
            raise ValueError("CSV has no aggregation rows")
        axis = medians[0]["axis"]
        for scheme in SCHEMES:
            pts = [(float(r["axis_value"]), float(r["ee"])) for r in medians
                   if r["scheme"] == scheme]
            if pts:
                pts.sort()
                ax.plot(*zip(*pts), marker="o", label=scheme.upper())
        ax.set_xlabel(_AXIS_LABELS.get(axis, axis))

    ax.set_ylabel("energy efficiency (bit/J)")
    ax.grid(True, alpha=0.4)
    ax.legend()
    fig.tight_layout()
    fig.savefig(out_path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return out_path
