"""Seeded Monte Carlo experiment runner.

Four experiment families, all deterministic given their config:

* ``snr_sweep``       perfect-CSI nulling performance across receiver SNR
* ``perturb_sweep``   stale-solution signal level across perturbation size
* ``correction``      stale vs first-order-corrected vs re-solved arms
* ``drift``           true vs approximated solution-drift energies

Per-trial seeds are derived injectively from (base_seed, grid index,
trial index), never from execution order, so runs are reproducible and
trials can execute in parallel.  Solvers within a trial share the same
channel and perturbation draw, giving paired comparisons.  SNR follows
the unit-transmit-power convention snr_db = -10 log10(noise variance), and
the detector-side SNR is snr_db + 10 log10(S).
"""

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields

import numpy as np

from .channels import apply_perturbation, gen_channels, gen_perturbation, signal_level
from .config import ExperimentConfig
from .sensitivity import (
    MatvecCounter,
    apply_correction,
    build_correction_cache,
    delta_d,
    first_order_correct,
)
from .solvers import RankDeficientError, solve_channel

DB_FLOOR = -400.0
DB_FLOOR_LINEAR = 1e-40

_ARM_ORDER = {"": 0, "stale": 1, "corrected": 2, "resolved": 3}
_SOLVER_FAILURES = (RankDeficientError, np.linalg.LinAlgError, FloatingPointError)


@dataclass
class TrialRecord:
    experiment: str
    solver: str
    arm: str
    m: int
    n: int
    snr_db: float
    sigma_p: float
    trial_index: int
    seed: int
    signal_level_linear: float | None = None
    signal_level_db: float | None = None
    detector_snr_db: float | None = None
    true_drift_energy: float | None = None
    approx_drift_energy: float | None = None
    error_energy: float | None = None
    matvec_count: int | None = None
    inverse_count: int | None = None
    converged: bool = True
    error: str = ""


FIELD_NAMES = tuple(f.name for f in fields(TrialRecord))
_INT_FIELDS = {"m", "n", "trial_index", "seed", "matvec_count", "inverse_count"}
_FLOAT_FIELDS = {
    "snr_db", "sigma_p", "signal_level_linear", "signal_level_db",
    "detector_snr_db", "true_drift_energy", "approx_drift_energy", "error_energy",
}


def to_db(linear: float) -> float:
    """Signal level in dB, floored at DB_FLOOR for vanishing linear power."""
    if math.isnan(linear):
        return float("nan")
    if linear <= DB_FLOOR_LINEAR:
        return DB_FLOOR
    return 10.0 * math.log10(linear)


def derive_trial_seeds(base_seed: int, grid_index: int, trial_index: int) -> tuple[int, int]:
    """Two independent 64-bit seeds (channel, perturbation) for one trial,
    an injective function of the index tuple."""
    ss = np.random.SeedSequence(
        [int(base_seed) & ((1 << 64) - 1), int(grid_index), int(trial_index)]
    )
    words = ss.generate_state(4, np.uint32).astype(np.uint64)
    return int(words[0] << np.uint64(32) | words[1]), int(words[2] << np.uint64(32) | words[3])


def _signal_fields(rec: TrialRecord, s_linear: float):
    rec.signal_level_linear = float(s_linear)
    rec.signal_level_db = to_db(float(s_linear))
    rec.detector_snr_db = rec.snr_db + rec.signal_level_db


def _failed(rec: TrialRecord, exc: Exception) -> TrialRecord:
    rec.signal_level_linear = float("nan")
    rec.signal_level_db = float("nan")
    rec.detector_snr_db = float("nan")
    rec.converged = False
    rec.error = f"{type(exc).__name__}: {exc}"
    return rec


def _run_trials(cfg: ExperimentConfig, grid, trial_fn) -> list[TrialRecord]:
    """Run trial_fn(grid_index, grid_value, trial_index) over the grid,
    serially or in a thread pool, and sort the records deterministically."""
    tasks = [
        (gi, gv, ti)
        for gi, gv in enumerate(grid)
        for ti in range(cfg.trials)
    ]
    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            chunks = list(pool.map(lambda t: trial_fn(*t), tasks))
    else:
        chunks = [trial_fn(*t) for t in tasks]
    records = [rec for chunk in chunks for rec in chunk]
    return sort_records(records)


def sort_records(records: list[TrialRecord]) -> list[TrialRecord]:
    return sorted(
        records,
        key=lambda r: (
            r.experiment, r.solver, r.snr_db, r.sigma_p, r.trial_index,
            _ARM_ORDER.get(r.arm, 9),
        ),
    )


def run_snr_sweep(cfg: ExperimentConfig) -> list[TrialRecord]:
    """Perfect-CSI solve per (snr, solver, trial); the signal level itself is
    noise-free, so SNR enters only through the reported detector SNR."""
    if cfg.experiment != "snr_sweep":
        raise ValueError(f"config is for {cfg.experiment!r}, expected 'snr_sweep'")

    def one(gi, snr_db, ti):
        ch_seed, _ = derive_trial_seeds(cfg.base_seed, gi, ti)
        ch = gen_channels(cfg.m, cfg.n, ch_seed)
        out = []
        for spec in cfg.solvers:
            rec = TrialRecord("snr_sweep", spec.tag, "", cfg.m, cfg.n,
                              float(snr_db), 0.0, ti, ch_seed)
            try:
                res = solve_channel(spec, ch)
                _signal_fields(rec, signal_level(ch, res.d))
                rec.converged = res.converged
            except _SOLVER_FAILURES as exc:
                _failed(rec, exc)
            out.append(rec)
        return out

    return _run_trials(cfg, cfg.snr_db_grid, one)


def run_perturb_sweep(cfg: ExperimentConfig) -> list[TrialRecord]:
    """Solve on the nominal channels, evaluate on the perturbed ones (the
    stale-solution penalty of imperfect CSI)."""
    if cfg.experiment != "perturb_sweep":
        raise ValueError(f"config is for {cfg.experiment!r}, expected 'perturb_sweep'")
    snr_db = float(cfg.snr_db_grid[0])

    def one(gi, sigma_p, ti):
        ch_seed, p_seed = derive_trial_seeds(cfg.base_seed, gi, ti)
        ch = gen_channels(cfg.m, cfg.n, ch_seed)
        p = gen_perturbation(cfg.m, cfg.n, float(sigma_p), p_seed)
        truth = apply_perturbation(ch, p)
        out = []
        for spec in cfg.solvers:
            rec = TrialRecord("perturb_sweep", spec.tag, "", cfg.m, cfg.n,
                              snr_db, float(sigma_p), ti, ch_seed)
            try:
                res = solve_channel(spec, ch)
                _signal_fields(rec, signal_level(truth, res.d))
                rec.converged = res.converged
            except _SOLVER_FAILURES as exc:
                _failed(rec, exc)
            out.append(rec)
        return out

    return _run_trials(cfg, cfg.sigma_p_grid, one)


def run_correction_experiment(cfg: ExperimentConfig) -> list[TrialRecord]:
    """Three arms per trial on a shared channel/perturbation pair: the stale
    nominal solution, its first-order update (counted matrix-vector
    products), and a full re-solve (counted inversions)."""
    if cfg.experiment != "correction":
        raise ValueError(f"config is for {cfg.experiment!r}, expected 'correction'")
    snr_db = float(cfg.snr_db_grid[0])

    def one(gi, sigma_p, ti):
        ch_seed, p_seed = derive_trial_seeds(cfg.base_seed, gi, ti)
        ch = gen_channels(cfg.m, cfg.n, ch_seed)
        p = gen_perturbation(cfg.m, cfg.n, float(sigma_p), p_seed)
        truth = apply_perturbation(ch, p)
        out = []
        for spec in cfg.solvers:
            def rec_for(arm):
                return TrialRecord("correction", spec.tag, arm, cfg.m, cfg.n,
                                   snr_db, float(sigma_p), ti, ch_seed)

            try:
                cache = build_correction_cache(spec.method, ch, lam=spec.lam,
                                               rank_tol=spec.rank_tol)
            except _SOLVER_FAILURES as exc:
                out.extend(_failed(rec_for(arm), exc)
                           for arm in ("stale", "corrected", "resolved"))
                continue

            stale = rec_for("stale")
            _signal_fields(stale, signal_level(truth, cache.d))
            out.append(stale)

            corrected = rec_for("corrected")
            try:
                counter = MatvecCounter()
                dd = apply_correction(cache, p, counter)
                d_corr = first_order_correct(cache.d, dd, mode="active")
                _signal_fields(corrected, signal_level(truth, d_corr))
                corrected.matvec_count = counter.matvec_count
                corrected.inverse_count = counter.inverse_count
            except _SOLVER_FAILURES as exc:
                _failed(corrected, exc)
            out.append(corrected)

            resolved = rec_for("resolved")
            try:
                counter = MatvecCounter()
                fresh = build_correction_cache(spec.method, truth, lam=spec.lam,
                                               rank_tol=spec.rank_tol, counter=counter)
                _signal_fields(resolved, signal_level(truth, fresh.d))
                resolved.inverse_count = counter.inverse_count
            except _SOLVER_FAILURES as exc:
                _failed(resolved, exc)
            out.append(resolved)
        return out

    return _run_trials(cfg, cfg.sigma_p_grid, one)


def run_drift_experiment(cfg: ExperimentConfig) -> list[TrialRecord]:
    """True drift (re-solve) vs first-order drift per (sigma_p, solver,
    trial); records the three drift energies and the stale signal level."""
    if cfg.experiment != "drift":
        raise ValueError(f"config is for {cfg.experiment!r}, expected 'drift'")
    snr_db = float(cfg.snr_db_grid[0])

    def one(gi, sigma_p, ti):
        ch_seed, p_seed = derive_trial_seeds(cfg.base_seed, gi, ti)
        ch = gen_channels(cfg.m, cfg.n, ch_seed)
        p = gen_perturbation(cfg.m, cfg.n, float(sigma_p), p_seed)
        truth = apply_perturbation(ch, p)
        out = []
        for spec in cfg.solvers:
            rec = TrialRecord("drift", spec.tag, "", cfg.m, cfg.n,
                              snr_db, float(sigma_p), ti, ch_seed)
            try:
                d_nom = solve_channel(spec, ch).vector
                d_new = solve_channel(spec, truth).vector
                dd = delta_d(spec, ch, p, d_opt=d_nom)
                true = d_new - d_nom
                rec.true_drift_energy = float(np.real(np.vdot(true, true)))
                rec.approx_drift_energy = float(np.real(np.vdot(dd, dd)))
                err = true - dd
                rec.error_energy = float(np.real(np.vdot(err, err)))
                _signal_fields(rec, signal_level(truth, d_nom))
            except _SOLVER_FAILURES as exc:
                _failed(rec, exc)
            out.append(rec)
        return out

    return _run_trials(cfg, cfg.sigma_p_grid, one)


_RUNNERS = {
    "snr_sweep": run_snr_sweep,
    "perturb_sweep": run_perturb_sweep,
    "correction": run_correction_experiment,
    "drift": run_drift_experiment,
}


def run_experiment(cfg: ExperimentConfig) -> list[TrialRecord]:
    return _RUNNERS[cfg.experiment](cfg)


def failed_cells(records: list[TrialRecord]) -> list[tuple]:
    """Grid cells (experiment, solver, snr_db, sigma_p) in which every trial
    failed; a non-empty result signals a runtime numerical failure."""
    cells: dict[tuple, list[bool]] = {}
    for r in records:
        cells.setdefault((r.experiment, r.solver, r.snr_db, r.sigma_p), []).append(bool(r.error))
    return sorted(k for k, flags in cells.items() if all(flags))


def _format_value(name: str, value) -> str:
    if value is None:
        return ""
    if name == "converged":
        return "true" if value else "false"
    if name in _FLOAT_FIELDS:
        return f"{value:.12g}"
    return str(value)


def _parse_value(name: str, text: str):
    if name == "converged":
        return text == "true"
    if name == "error":
        return text
    if text == "":
        return None
    if name in _INT_FIELDS:
        return int(text)
    if name in _FLOAT_FIELDS:
        return float(text)
    return text


def write_csv(records: list[TrialRecord], path) -> None:
    """Write records (re-sorted for stability) with 12-significant-digit
    decimals; identical configs produce byte-identical files."""
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            _write_csv_stream(records, fh)
    except OSError as exc:
        raise OSError(f"cannot write CSV to {path}: {exc}") from None


def _write_csv_stream(records, fh) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(FIELD_NAMES)
    for rec in sort_records(records):
        writer.writerow([_format_value(n, getattr(rec, n)) for n in FIELD_NAMES])


def csv_text(records: list[TrialRecord]) -> str:
    buf = io.StringIO()
    _write_csv_stream(records, buf)
    return buf.getvalue()


def read_csv(path) -> list[TrialRecord]:
    """Parse a results file back into records (inverse of write_csv at the
    written precision)."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != FIELD_NAMES:
            raise ValueError(f"unexpected CSV header in {path}: {header}")
        out = []
        for row in reader:
            kwargs = {n: _parse_value(n, v) for n, v in zip(FIELD_NAMES, row)}
            out.append(TrialRecord(**kwargs))
    return out


_PLOT_HEADER = '''#!/usr/bin/env python3
"""Plot per-(solver, grid point) medians from {csv_name}."""
import csv
from collections import defaultdict
from statistics import median

import matplotlib.pyplot as plt

CSV_PATH = {csv_path!r}


def load_rows():
    with open(CSV_PATH, newline="") as fh:
        return [row for row in csv.DictReader(fh) if not row["error"]]


def series(rows, x_col, y_col, key_cols):
    groups = defaultdict(lambda: defaultdict(list))
    for row in rows:
        if row[y_col] == "" or row[y_col] == "nan":
            continue
        key = tuple(row[c] for c in key_cols)
        groups[key][float(row[x_col])].append(float(row[y_col]))
    out = {{}}
    for key, byx in groups.items():
        xs = sorted(byx)
        out[key] = (xs, [median(byx[x]) for x in xs])
    return out
'''

_PLOT_BODIES = {
    "snr_sweep": '''

rows = load_rows()
fig, ax = plt.subplots(figsize=(7, 5))
for (solver,), (xs, ys) in sorted(series(rows, "snr_db", "signal_level_db", ["solver"]).items()):
    ax.plot(xs, ys, marker="o", label=solver)
ax.set_xlabel("SNR (dB)")
ax.set_ylabel("received signal level (dB)")
ax.set_title("Received signal level vs. SNR (medians)")
ax.grid(True, alpha=0.3)
ax.legend()
fig.tight_layout()
fig.savefig(CSV_PATH + ".png", dpi=150)
print("wrote", CSV_PATH + ".png")
''',
    "perturb_sweep": '''

rows = load_rows()
fig, ax = plt.subplots(figsize=(7, 5))
for (solver,), (xs, ys) in sorted(series(rows, "sigma_p", "signal_level_db", ["solver"]).items()):
    ax.plot(xs, ys, marker="o", label=solver)
ax.set_xlabel("perturbation norm sigma_p")
ax.set_ylabel("received signal level (dB)")
ax.set_title("Stale-solution signal level vs. perturbation size (medians)")
ax.grid(True, alpha=0.3)
ax.legend()
fig.tight_layout()
fig.savefig(CSV_PATH + ".png", dpi=150)
print("wrote", CSV_PATH + ".png")
''',
    "correction": '''

rows = load_rows()
fig, ax = plt.subplots(figsize=(7, 5))
for (solver, arm), (xs, ys) in sorted(
        series(rows, "sigma_p", "signal_level_db", ["solver", "arm"]).items()):
    ax.plot(xs, ys, marker="o", label=f"{solver} / {arm}")
ax.set_xlabel("perturbation norm sigma_p")
ax.set_ylabel("received signal level (dB)")
ax.set_title("Stale vs corrected vs re-solved signal level (medians)")
ax.grid(True, alpha=0.3)
ax.legend()
fig.tight_layout()
fig.savefig(CSV_PATH + ".png", dpi=150)
print("wrote", CSV_PATH + ".png")
''',
    "drift": '''

rows = load_rows()
fig, ax = plt.subplots(figsize=(7, 5))
for y_col, style in (("true_drift_energy", "-o"),
                     ("approx_drift_energy", "--s"),
                     ("error_energy", ":^")):
    for (solver,), (xs, ys) in sorted(series(rows, "sigma_p", y_col, ["solver"]).items()):
        ax.plot(xs, ys, style, label=f"{solver} {y_col}")
ax.set_xlabel("perturbation norm sigma_p")
ax.set_ylabel("drift energy")
ax.set_yscale("log")
ax.set_title("True vs approximated drift energy (medians)")
ax.grid(True, alpha=0.3, which="both")
ax.legend(fontsize=8)
fig.tight_layout()
fig.savefig(CSV_PATH + ".png", dpi=150)
print("wrote", CSV_PATH + ".png")
''',
}


def emit_plot_script(csv_path, experiment: str) -> str:
    """A self-contained matplotlib script that aggregates the CSV into
    per-(solver, grid point) median curves with the axes of the experiment
    family (dB signal levels; log-scale drift energies)."""
    if experiment not in _PLOT_BODIES:
        raise ValueError(f"unknown experiment tag {experiment!r}")
    import os

    header = _PLOT_HEADER.format(csv_path=str(csv_path),
                                 csv_name=os.path.basename(str(csv_path)))
    return header + _PLOT_BODIES[experiment]
