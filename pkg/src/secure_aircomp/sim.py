"""Deterministic Monte Carlo sweep over receive SNR and precoder methods.

Seeding
-------
Trial ``i`` draws its channel from ``derive_seed(master, i)``: the same
channel is shared by every SNR point and every method (common random numbers),
which makes method comparisons paired. Empirical MMSE checks draw inputs and
noise from ``derive_seed(master, snr_index, method_id, i)``. Trials are
processed in fixed-size chunks and aggregated in trial order, so the output
does not depend on the number of workers.
"""

from __future__ import annotations

import csv
import io
import math
import os
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .channel import ChannelProtocol, sample_channel
from .errors import ConfigError, InfeasibleDesignError
from .model import ChannelRealization, SystemConfig, require_valid, sample_inputs
from .precoding import METHODS, build_precoder, noise_budget
from .rng import stream
from .scaling import c_sq_of_snr, db, from_db, max_snr
from .security import SchemeDesign, SecurityReport, empirical_mse, mse_legit, security_level

METHOD_IDS = {name: i for i, name in enumerate(METHODS)}

CSV_COLUMNS = (
    "snr_db", "method", "trials",
    "d_closed_mean", "d_closed_se", "s_closed_mean", "s_closed_se",
    "d_emp_mean", "d_emp_se", "s_emp_mean", "s_emp_se",
    "rejected_fraction",
)


def derive_seed(master_seed: int, *indices: int) -> int:
    seq = np.random.SeedSequence(entropy=int(master_seed) & (2**64 - 1), spawn_key=tuple(int(i) for i in indices))
    lo, hi = seq.generate_state(2, dtype=np.uint32)
    return int(lo) | (int(hi) << 32)


@dataclass(frozen=True)
class SweepSpec:
    snr_grid_db: tuple = tuple(float(x) for x in range(16))
    trials: int = 10_000
    master_seed: int = 0
    methods: tuple = METHODS
    empirical_check_fraction: float = 0.01
    empirical_draws: int = 200
    chunk_size: int = 250

    def __post_init__(self):
        object.__setattr__(self, "snr_grid_db", tuple(float(x) for x in self.snr_grid_db))
        object.__setattr__(self, "methods", tuple(self.methods))


def validate_spec(cfg: SystemConfig, proto: ChannelProtocol, spec: SweepSpec) -> None:
    grid = np.asarray(spec.snr_grid_db)
    if spec.trials < 1:
        raise ConfigError("trials must be positive")
    if grid.size and np.any(np.diff(grid) <= 0):
        raise ConfigError("snr_grid_db must be strictly ascending")
    unknown = [m for m in spec.methods if m not in METHOD_IDS]
    if unknown:
        raise ConfigError(f"unknown methods: {', '.join(unknown)}")
    if not 0.0 <= spec.empirical_check_fraction <= 1.0:
        raise ConfigError("empirical_check_fraction must lie in [0, 1]")
    if proto.mode == "fixed_weakest" and grid.size:
        limit = db(max_snr(cfg, proto.h1_fixed))
        if grid[-1] > limit + 1e-12:
            raise InfeasibleDesignError(
                f"SNR {grid[-1]:g} dB exceeds the achievable maximum {limit:.4f} dB for h_1={proto.h1_fixed:.6g}"
            )


def is_checked(trial_index: int, fraction: float) -> bool:
    """Evenly spaced selection of exactly ``floor(fraction * trials)`` trials."""
    return math.floor((trial_index + 1) * fraction) > math.floor(trial_index * fraction)


def evaluate_trial(
    cfg: SystemConfig,
    channel: ChannelRealization,
    c_sq: float,
    method: str,
    rng: Optional[np.random.Generator] = None,
    empirical_draws: int = 0,
    d_closed: Optional[float] = None,
) -> SecurityReport:
    """Closed-form levels for one channel, plus empirical MSEs if ``rng`` is given.

    ``d_closed`` may be passed in to reuse the legitimate MSE, which depends
    only on the config and ``c_sq``.
    """
    budget = noise_budget(cfg, channel.h, c_sq)
    precoder = build_precoder(method, channel.h, budget, g=channel.g)
    design = SchemeDesign(config=cfg, c_sq=c_sq, precoder=precoder, channel=channel)
    emp_d = emp_s = None
    if rng is not None and empirical_draws > 0:
        batch = sample_inputs(cfg, rng, size=empirical_draws)
        err_y, err_z = empirical_mse(design, batch, rng)
        emp_d, emp_s = float(np.mean(err_y)), float(np.mean(err_z))
    return SecurityReport(
        D_closed=mse_legit(cfg, c_sq) if d_closed is None else d_closed,
        S_closed=security_level(design),
        snr=c_sq * cfg.num_users / cfg.sigma_y_sq,
        empirical_D=emp_d,
        empirical_S=emp_s,
    )


def run_trial(
    cfg: SystemConfig,
    proto: ChannelProtocol,
    snr_db: float,
    method: str,
    trial_seed: int,
    channel_seed: Optional[int] = None,
    empirical_draws: int = 0,
) -> SecurityReport:
    """One Monte Carlo trial.

    Raises :class:`InfeasibleDesignError` when the sampled channel cannot
    support the requested SNR (possible only in ``free_rayleigh`` mode).
    """
    seed = trial_seed if channel_seed is None else channel_seed
    channel = sample_channel(cfg, proto, stream(seed, "channel"))
    c_sq = c_sq_of_snr(cfg, from_db(snr_db))
    rng = stream(trial_seed, "inputs") if empirical_draws > 0 else None
    return evaluate_trial(cfg, channel, c_sq, method, rng, empirical_draws)


@dataclass(frozen=True)
class SweepRow:
    snr_db: float
    method: str
    trials: int
    d_closed_mean: float
    d_closed_se: float
    s_closed_mean: float
    s_closed_se: float
    d_emp_mean: Optional[float]
    d_emp_se: Optional[float]
    s_emp_mean: Optional[float]
    s_emp_se: Optional[float]
    rejected_fraction: float


@dataclass
class SweepResult:
    spec: SweepSpec
    rows: list = field(default_factory=list)

    def row(self, snr_db: float, method: str) -> SweepRow:
        for r in self.rows:
            if r.method == method and r.snr_db == snr_db:
                return r
        raise KeyError((snr_db, method))

    def series(self, method: str, column: str) -> np.ndarray:
        return np.array([getattr(r, column) for r in self.rows if r.method == method], dtype=float)


def _run_chunk(args):
    cfg, proto, spec, start, stop = args
    n_snr, n_meth, n = len(spec.snr_grid_db), len(spec.methods), stop - start
    shape = (n_snr, n_meth, n)
    out = {key: np.full(shape, np.nan) for key in ("D", "S", "eD", "eS")}
    rejected = np.zeros(shape, dtype=bool)
    c_sq_grid = [c_sq_of_snr(cfg, from_db(x)) for x in spec.snr_grid_db]
    d_grid = [mse_legit(cfg, c_sq) for c_sq in c_sq_grid]
    for t, i in enumerate(range(start, stop)):
        channel = sample_channel(cfg, proto, stream(derive_seed(spec.master_seed, i), "channel"))
        checked = spec.empirical_draws > 0 and is_checked(i, spec.empirical_check_fraction)
        for si, c_sq in enumerate(c_sq_grid):
            for mi, method in enumerate(spec.methods):
                rng = None
                if checked:
                    seed = derive_seed(spec.master_seed, si, METHOD_IDS[method], i)
                    rng = stream(seed, "inputs")
                try:
                    rep = evaluate_trial(cfg, channel, c_sq, method, rng, spec.empirical_draws, d_grid[si])
                except InfeasibleDesignError:
                    rejected[si, mi, t] = True
                    continue
                out["D"][si, mi, t] = rep.D_closed
                out["S"][si, mi, t] = rep.S_closed
                if rep.empirical_D is not None:
                    out["eD"][si, mi, t] = rep.empirical_D
                    out["eS"][si, mi, t] = rep.empirical_S
    return out, rejected


def _mean_se(values: np.ndarray) -> tuple[Optional[float], Optional[float]]:
    values = values[~np.isnan(values)]
    if values.size == 0:
        return None, None
    mean = float(np.mean(values))
    se = float(np.std(values, ddof=1) / math.sqrt(values.size)) if values.size > 1 else math.nan
    return mean, se


def run_sweep(cfg: SystemConfig, proto: ChannelProtocol, spec: SweepSpec, workers: int = 1) -> SweepResult:
    require_valid(cfg)
    validate_spec(cfg, proto, spec)
    bounds = [(s, min(s + spec.chunk_size, spec.trials)) for s in range(0, spec.trials, spec.chunk_size)]
    tasks = [(cfg, proto, spec, s, e) for s, e in bounds]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_run_chunk, tasks))
    else:
        parts = [_run_chunk(t) for t in tasks]

    result = SweepResult(spec=spec)
    if not parts:
        return result
    merged = {key: np.concatenate([p[0][key] for p in parts], axis=-1) for key in parts[0][0]}
    rejected = np.concatenate([p[1] for p in parts], axis=-1)
    for si, snr_db in enumerate(spec.snr_grid_db):
        for mi, method in enumerate(spec.methods):
            d_mean, d_se = _mean_se(merged["D"][si, mi])
            s_mean, s_se = _mean_se(merged["S"][si, mi])
            ed_mean, ed_se = _mean_se(merged["eD"][si, mi])
            es_mean, es_se = _mean_se(merged["eS"][si, mi])
            n_rej = int(np.sum(rejected[si, mi]))
            result.rows.append(SweepRow(
                snr_db=snr_db, method=method, trials=spec.trials - n_rej,
                d_closed_mean=d_mean, d_closed_se=d_se, s_closed_mean=s_mean, s_closed_se=s_se,
                d_emp_mean=ed_mean, d_emp_se=ed_se, s_emp_mean=es_mean, s_emp_se=es_se,
                rejected_fraction=n_rej / spec.trials,
            ))
    return result


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return format(float(x), ".17g")


def to_csv(result: SweepResult) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in result.rows:
        writer.writerow([_fmt(getattr(r, col)) for col in CSV_COLUMNS])
    return buf.getvalue()


def parse_csv(text: str) -> list[SweepRow]:
    rows = []
    for rec in csv.DictReader(io.StringIO(text)):
        values = {}
        for col in CSV_COLUMNS:
            raw = rec[col]
            if col == "method":
                values[col] = raw
            elif col == "trials":
                values[col] = int(raw)
            else:
                values[col] = None if raw == "" else float(raw)
        rows.append(SweepRow(**values))
    return rows


def to_plot_data(result: SweepResult) -> str:
    """Wide table: ``snr_db, snr_linear`` then four columns per method.

    Each series is the ``snr_db`` column paired with one value column.
    """
    methods = result.spec.methods
    header = ["snr_db", "snr_linear"]
    for m in methods:
        header += [f"{m}_d_mean", f"{m}_d_se", f"{m}_s_mean", f"{m}_s_se"]
    lines = [" ".join(header)]
    for snr_db in result.spec.snr_grid_db if methods else ():
        cells = [_fmt(snr_db), _fmt(from_db(snr_db))]
        for m in methods:
            r = result.row(snr_db, m)
            cells += [_fmt(r.d_closed_mean), _fmt(r.d_closed_se), _fmt(r.s_closed_mean), _fmt(r.s_closed_se)]
        lines.append(" ".join("nan" if c == "" else c for c in cells))
    return "\n".join(lines) + "\n"


def summary_table(result: SweepResult) -> str:
    methods = result.spec.methods
    head = f"{'SNR [dB]':>9} {'D':>10} " + " ".join(f"{('S ' + m):>18}" for m in methods)
    lines = [head]
    for snr_db in result.spec.snr_grid_db if methods else ():
        d = result.row(snr_db, methods[0]).d_closed_mean
        cells = [f"{snr_db:9.2f}", f"{d if d is not None else math.nan:10.5f}"]
        for m in methods:
            s = result.row(snr_db, m).s_closed_mean
            cells.append(f"{s if s is not None else math.nan:18.5f}")
        lines.append(" ".join(cells))
    return "\n".join(lines)


def write_atomic(path, text: str) -> None:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except OSError as exc:
        raise OSError(f"could not write {path}: {exc}") from exc


def summarize(result: SweepResult, csv_path=None, plot_path=None) -> str:
    """Write the CSV and plot-data files (when paths are given) and return a text summary."""
    if csv_path is not None:
        write_atomic(csv_path, to_csv(result))
    if plot_path is not None:
        write_atomic(plot_path, to_plot_data(result))
    return summary_table(result)


def default_plot_path(csv_path) -> Path:
    p = Path(csv_path)
    return p.with_name(p.stem + ".plot.dat")


def reference_sweep_spec(trials: int = 10_000, master_seed: int = 0, methods: Sequence[str] = METHODS) -> SweepSpec:
    return SweepSpec(snr_grid_db=tuple(float(x) for x in range(16)), trials=trials, master_seed=master_seed, methods=tuple(methods))
