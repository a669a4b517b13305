"""Batch comparisons of the estimators on synthetic data.

Two scenarios are supported:

``random-scene``
    every trial draws a new random scene, samples noisy training pairs and
    an independent set of noise-free test pairs from the same regions;
``scarce-plane``
    the two-checkerboard scene with the second plane trained on a small
    square, one trial per square placement.

Every trial derives its seeds from ``(seed, trial)`` alone, so results do
not depend on the number of trials or on how trials are spread over
worker processes.
"""

import csv
import io
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import synth
from .errors import HomosetError
from .estimation import ESTIMATORS, estimate

CSV_VERSION = 1
CSV_COLUMNS = (
    "scenario", "trial", "method", "sigma", "status", "error",
    "train_rms", "test_rms", "test_rms_plane2", "psi",
    "constraint_residual_max", "iterations", "converged", "wall_time", "failures",
)
METRICS = ("train_rms", "test_rms", "test_rms_plane2", "psi",
           "constraint_residual_max", "iterations", "wall_time")
SCENARIOS = ("random-scene", "scarce-plane")


@dataclass
class ExperimentConfig:
    trials: int = 1000
    planes: int = 4
    points: int = 50
    sigma: float = 1.0
    seed: int = 0
    methods: tuple = ("dlt", "ba", "ba-implicit", "ba-explicit")
    scenario: str = "random-scene"
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        self.methods = tuple(self.methods)
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if self.sigma < 0:
            raise ValueError("sigma must be non-negative")
        if not self.methods:
            raise ValueError("at least one method is required")
        unknown = [m for m in self.methods if m not in ESTIMATORS]
        if unknown:
            raise ValueError(f"unknown methods {unknown}; choose from {sorted(ESTIMATORS)}")
        if self.scenario not in SCENARIOS:
            raise ValueError(f"unknown scenario {self.scenario!r}; choose from {SCENARIOS}")
        if self.scenario == "random-scene" and (self.planes < 2 or self.points < 4):
            raise ValueError("random scenes need at least 2 planes and 4 points per plane")


def trial_seeds(seed, trial, n=4):
    """``n`` 32-bit seeds derived from ``(seed, trial)``."""
    return [int(s) for s in np.random.SeedSequence([seed, trial]).generate_state(n)]


def worker_count(env=None):
    """Number of worker processes: CPU count capped by ``HOMOSET_THREADS``."""
    env = os.environ if env is None else env
    n = os.cpu_count() or 1
    cap = env.get("HOMOSET_THREADS")
    if cap not in (None, ""):
        try:
            cap = int(cap)
        except ValueError:
            raise ValueError(f"HOMOSET_THREADS must be a positive integer, got {cap!r}")
        if cap < 1:
            raise ValueError(f"HOMOSET_THREADS must be a positive integer, got {cap}")
        n = min(n, cap)
    return n


def random_scene_trial(config, trial):
    """Training and test data for one ``random-scene`` trial."""
    s_scene, s_train, s_test, s_noise = trial_seeds(config.seed, trial)
    scene = synth.random_scene(s_scene, n_planes=config.planes)
    clean = synth.sample_correspondences(scene, config.points, s_train)
    train = synth.add_noise(clean, config.sigma, s_noise)
    test = synth.sample_correspondences(scene, config.points, s_test)
    return train, test


def scarce_plane_trials(config):
    """Number of placements swept by the ``scarce-plane`` scenario."""
    scene = synth.checkerboard_scene(**config.extra)
    return min(config.trials, len(synth.square_placements(scene)))


def scarce_plane_trial(config, trial):
    scene = synth.checkerboard_scene(**config.extra)
    placement = synth.square_placements(scene)[trial]
    train, test = synth.scarce_plane_scenario(scene, placement)
    _, _, _, s_noise = trial_seeds(config.seed, trial)
    return synth.add_noise(train, config.sigma, s_noise), test


def _row(config, trial, method):
    return {
        "scenario": config.scenario, "trial": trial, "method": method,
        "sigma": config.sigma, "status": "ok", "error": "",
        **{k: "" for k in METRICS}, "converged": "", "failures": "",
    }


def run_trial(config, trial):
    """One row per method for ``trial``; failures are recorded, not raised."""
    make = random_scene_trial if config.scenario == "random-scene" else scarce_plane_trial
    rows = []
    try:
        train, test = make(config, trial)
    except HomosetError as exc:
        for method in config.methods:
            row = _row(config, trial, method)
            row.update(status="failed", error=type(exc).__name__)
            rows.append(row)
        return rows
    for method in config.methods:
        row = _row(config, trial, method)
        try:
            rep = estimate(train, method, test=test)
        except (HomosetError, np.linalg.LinAlgError) as exc:
            row.update(status="failed", error=type(exc).__name__)
            rows.append(row)
            continue
        row.update(
            train_rms=rep.rms.overall,
            test_rms=rep.rms_test.overall,
            test_rms_plane2=rep.rms_test.per_plane[1] if train.n_planes > 1 else "",
            psi=rep.psi,
            constraint_residual_max=rep.constraint_residual_max,
            iterations=rep.iterations,
            converged=rep.converged,
            wall_time=rep.wall_time,
        )
        rows.append(row)
    return rows


def _run_one(args):
    return run_trial(*args)


def run_experiment(config, workers=None):
    """Run all trials and return the per-(trial, method) rows in trial order."""
    if config.scenario == "scarce-plane":
        n_trials = scarce_plane_trials(config)
    else:
        n_trials = config.trials
    jobs = [(config, t) for t in range(n_trials)]
    workers = worker_count() if workers is None else workers
    if workers <= 1 or n_trials == 1:
        chunks = [_run_one(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=min(workers, n_trials)) as pool:
            chunks = list(pool.map(_run_one, jobs))
    return [row for chunk in chunks for row in chunk]


def summarize(rows, methods):
    """Mean of every metric over successful trials, one row per method."""
    out = []
    for method in methods:
        mine = [r for r in rows if r["method"] == method]
        ok = [r for r in mine if r["status"] == "ok"]
        row = {k: "" for k in CSV_COLUMNS}
        row.update(scenario=mine[0]["scenario"] if mine else "", trial="summary",
                   method=method, sigma=mine[0]["sigma"] if mine else "",
                   status="summary", failures=len(mine) - len(ok))
        for key in METRICS:
            vals = [float(r[key]) for r in ok if r[key] != ""]
            row[key] = float(np.mean(vals)) if vals else ""
        row["converged"] = sum(bool(r["converged"]) for r in ok)
        out.append(row)
    return out


def paired_bootstrap(a, b, n_boot=10000, seed=0, level=0.95):
    """Bootstrap interval for ``mean(a - b)`` over paired samples.

    Returns ``(mean_difference, lower, upper)`` for a two-sided interval at
    ``level``.
    """
    d = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    if d.ndim != 1 or len(d) < 2:
        raise ValueError("need at least two paired samples")
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, len(d), size=(n_boot, len(d)))
    means = d[idx].mean(axis=1)
    tail = 0.5 * (1.0 - level)
    lo, hi = np.quantile(means, [tail, 1.0 - tail])
    return float(d.mean()), float(lo), float(hi)


def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return "%.17g" % v
    return str(v)


def format_csv(rows, config=None):
    """CSV text with a versioned header comment; columns are ``CSV_COLUMNS``."""
    buf = io.StringIO()
    buf.write(f"# homoset experiment results, format version {CSV_VERSION}\n")
    if config is not None:
        buf.write(
            f"# scenario={config.scenario} trials={config.trials} planes={config.planes} "
            f"points={config.points} sigma={config.sigma} seed={config.seed} "
            f"methods={','.join(config.methods)}\n"
        )
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in rows:
        writer.writerow([_fmt(row[k]) for k in CSV_COLUMNS])
    return buf.getvalue()


def read_csv(path):
    """Rows of a results file as dicts of strings (comment lines skipped)."""
    with open(path, newline="", encoding="utf-8") as fh:
        lines = [line for line in fh if not line.startswith("#")]
    reader = csv.DictReader(lines)
    if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
        raise ValueError(f"{path}: unexpected columns {reader.fieldnames}")
    return list(reader)
