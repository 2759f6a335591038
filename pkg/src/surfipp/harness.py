"""Experiment orchestration: single missions, comparisons, prior ablations.

Multi-trial experiments pair the ground truth across variants (the field for
trial t is identical for every method) and derive all mission seeds from the
base seed, the variant name and the trial index, so results are reproducible
and trials can run in parallel without affecting the aggregate. Curves are
aggregated on a common time grid with normal-approximation 95% bands.
"""

import json
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import plotting
from .field import map_to_csv
from .planner import run_mission
from .scenario import COMPARE_METHODS, PRIOR_KINDS, ScenarioConfig, assemble_scenario
from .seeds import mix_seed

log = logging.getLogger(__name__)

_Z95 = 1.959963984540054


def mission_seed(base_seed: int, variant: str, trial: int) -> int:
    return mix_seed(base_seed, variant, trial)


def interpolate_curve(times, values, grid) -> np.ndarray:
    """Piecewise-linear resample holding the end values beyond the log."""
    return np.interp(grid, times, values)


def aggregate_bands(curves) -> tuple:
    """(mean, lo, hi) across trials; bands collapse for a single trial."""
    arr = np.asarray(curves)
    mean = arr.mean(axis=0)
    if arr.shape[0] < 2:
        return mean, mean.copy(), mean.copy()
    half = _Z95 * arr.std(axis=0, ddof=1) / np.sqrt(arr.shape[0])
    return mean, mean - half, mean + half


def write_band_csv(path, grid, bands: dict) -> None:
    """Band CSV: t column, then <variant>_mean/_lo/_hi columns."""
    names = list(bands)
    with open(path, "w", encoding="ascii") as fh:
        fh.write("t," + ",".join(f"{m}_{s}" for m in names for s in ("mean", "lo", "hi")))
        fh.write("\n")
        for i, t in enumerate(grid):
            row = [f"{t:.9g}"]
            for m in names:
                mean, lo, hi = bands[m]
                row += [f"{mean[i]:.9g}", f"{lo[i]:.9g}", f"{hi[i]:.9g}"]
            fh.write(",".join(row) + "\n")


def cmd_run(config: ScenarioConfig, out_dir=None, seed=None, kind: str = "ipp") -> dict:
    """One mission; writes metrics, trajectory and map-snapshot CSVs + summary."""
    out_dir = out_dir or config.output_dir
    os.makedirs(out_dir, exist_ok=True)
    base_seed = config.experiment.base_seed if seed is None else int(seed)

    t0 = time.perf_counter()
    scenario = assemble_scenario(config)
    truth = scenario.truth_for_trial(base_seed, 0)
    mlog = run_mission(scenario.with_truth(truth), kind,
                       mission_seed(base_seed, kind, 0))
    wall = time.perf_counter() - t0

    mlog.to_csv(os.path.join(out_dir, "metrics.csv"))
    mlog.path_to_csv(os.path.join(out_dir, "trajectory.csv"))
    map_to_csv(scenario.prior_map, os.path.join(out_dir, "map_initial.csv"))
    map_to_csv(mlog.final_map, os.path.join(out_dir, "map_final.csv"))
    summary = {
        "scenario": config.name,
        "planner": kind,
        "seed": base_seed,
        "budget_s": config.planner_cfg.budget,
        "events": len(mlog.events),
        "initial_trace": mlog.traces[0],
        "final_trace": mlog.traces[-1],
        "initial_rmse": mlog.rmses[0],
        "final_rmse": mlog.rmses[-1],
        "wall_time_s": wall,
    }
    with open(os.path.join(out_dir, "summary.json"), "w", encoding="ascii") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return summary


# module-level state for parallel workers (populated by the initializer)
_WORKER = {}


def _worker_init(config: ScenarioConfig, mode: str):
    _WORKER["config"] = config
    _WORKER["mode"] = mode
    _WORKER["scenarios"] = {}


def _variant_scenario(config, mode, variant, cache):
    """Scenario for a variant: prior swap for ablations, shared otherwise."""
    key = variant if mode == "ablate" else "base"
    if key not in cache:
        if mode == "ablate":
            import dataclasses
            cfg = dataclasses.replace(config, prior_kind=variant)
        else:
            cfg = config
        cache[key] = assemble_scenario(cfg)
    return cache[key]


def _run_trial(config, mode, variant, trial, base_seed, cache):
    scenario = _variant_scenario(config, mode, variant, cache)
    truth = scenario.truth_for_trial(base_seed, trial)
    kind = "ipp" if mode == "ablate" else variant
    mlog = run_mission(scenario.with_truth(truth), kind,
                       mission_seed(base_seed, variant, trial))
    return mlog.times, mlog.traces, mlog.rmses


def _run_trial_worker(args):
    variant, trial, base_seed = args
    return variant, trial, _run_trial(_WORKER["config"], _WORKER["mode"], variant,
                                      trial, base_seed, _WORKER["scenarios"])


def _run_experiment(config: ScenarioConfig, mode: str, variants, out_prefix,
                    out_dir=None, trials=None, seed=None, parallel: int = 1) -> dict:
    out_dir = out_dir or config.output_dir
    os.makedirs(out_dir, exist_ok=True)
    trials = trials or config.experiment.trials
    base_seed = config.experiment.base_seed if seed is None else int(seed)
    budget = config.planner_cfg.budget
    grid = np.linspace(0.0, budget, config.experiment.grid_points)

    t0 = time.perf_counter()
    jobs = [(v, t, base_seed) for v in variants for t in range(trials)]
    results = {}
    if parallel > 1:
        with ProcessPoolExecutor(max_workers=parallel, initializer=_worker_init,
                                 initargs=(config, mode)) as pool:
            for variant, trial, data in pool.map(_run_trial_worker, jobs):
                results[(variant, trial)] = data
    else:
        cache = {}
        for variant, trial, bs in jobs:
            results[(variant, trial)] = _run_trial(config, mode, variant, trial, bs, cache)
    wall = time.perf_counter() - t0

    bands_trace, bands_rmse, finals = {}, {}, {}
    for variant in variants:
        tr_curves, rm_curves = [], []
        for trial in range(trials):
            times, traces, rmses = results[(variant, trial)]
            tr_curves.append(interpolate_curve(times, traces, grid))
            rm_curves.append(interpolate_curve(times, rmses, grid))
        bands_trace[variant] = aggregate_bands(tr_curves)
        bands_rmse[variant] = aggregate_bands(rm_curves)
        finals[variant] = {
            "final_trace_mean": float(bands_trace[variant][0][-1]),
            "final_rmse_mean": float(bands_rmse[variant][0][-1]),
            "mid_trace_mean": float(np.interp(budget / 2, grid, bands_trace[variant][0])),
        }

    trace_csv = os.path.join(out_dir, f"{out_prefix}_trace.csv")
    rmse_csv = os.path.join(out_dir, f"{out_prefix}_rmse.csv")
    write_band_csv(trace_csv, grid, bands_trace)
    write_band_csv(rmse_csv, grid, bands_rmse)
    figures = plotting.render_results_dir(out_dir)

    summary = {
        "scenario": config.name,
        "mode": mode,
        "variants": list(variants),
        "trials": trials,
        "base_seed": base_seed,
        "budget_s": budget,
        "bands": "normal-approximation 95% confidence",
        "pairing": "ground-truth fields shared across variants per trial",
        "results": finals,
        "wall_time_s": wall,
        "figures": [os.path.basename(f) for f in figures],
    }
    with open(os.path.join(out_dir, f"{out_prefix}_summary.json"), "w",
              encoding="ascii") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    log.info("%s experiment done in %.1f s", mode, wall)
    return summary


def cmd_compare(config: ScenarioConfig, out_dir=None, trials=None, seed=None,
                parallel: int = 1) -> dict:
    """IPP vs coverage vs random, paired trials, banded curves + figures."""
    return _run_experiment(config, "compare", COMPARE_METHODS, "compare",
                           out_dir, trials, seed, parallel)


def cmd_ablate(config: ScenarioConfig, out_dir=None, trials=None, seed=None,
               parallel: int = 1) -> dict:
    """IPP with mgp/identity/random-SPD priors (trace-matched), banded curves."""
    return _run_experiment(config, "ablate", PRIOR_KINDS, "ablate",
                           out_dir, trials, seed, parallel)


def cmd_plot(results_dir, out_dir=None) -> list:
    """Re-render SVG figures from the band CSVs in a results directory."""
    if not os.path.isdir(results_dir):
        raise FileNotFoundError(f"results directory not found: {results_dir}")
    rendered = plotting.render_results_dir(results_dir, out_dir)
    if not rendered:
        raise FileNotFoundError(f"no band CSVs (*_trace.csv / *_rmse.csv) in {results_dir}")
    return rendered
