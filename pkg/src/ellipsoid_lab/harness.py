"""Monte Carlo sweeps over (d, n/d^2) cells and their persistence."""
import csv
import io
import json
import math
import multiprocessing
import os
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from .diagnostics import check_events
from .ellipsoid import FitStatus, fit_ellipsoid
from .exceptions import ConfigInvalid, NotConverged, UnknownDimension
from .sampling import derive_trial_seed, sample_cloud

CSV_COLUMNS = (
    "d", "n", "n_fraction", "trial_index", "seed", "status", "max_residual",
    "q_min_eig", "perturbation_norm", "m_min_eig", "eps_inf", "delta_inf", "wall_time_ms",
)
CONJECTURED_THRESHOLD = 0.25
MAX_N = 20_000
WORKERS_ENV = "ELLIPSOID_WORKERS"
THRESHOLD_NOTE = (
    "threshold = n/d^2 fraction where the cell success rate first crosses 1/2, "
    "linearly interpolated between scanned fractions; an artifact convention"
)


def cell_size(d, fraction):
    return int(math.floor(fraction * d * d + 0.5))


@dataclass
class SweepConfig:
    d_values: list
    n_fractions: list
    trials_per_cell: int
    master_seed: int = 0
    diagnostics_enabled: bool = False
    output_path: str = None
    worker_count: int = 1

    def __post_init__(self):
        self.validate()

    def validate(self):
        if not isinstance(self.d_values, (list, tuple)) or not self.d_values:
            raise ConfigInvalid("d_values", "must be a non-empty list of integers >= 5")
        for d in self.d_values:
            if not isinstance(d, (int, np.integer)) or isinstance(d, bool) or d < 5:
                raise ConfigInvalid("d_values", f"{d!r} is not an integer >= 5")
        if len(set(self.d_values)) != len(self.d_values):
            raise ConfigInvalid("d_values", "values must be distinct")
        if not isinstance(self.n_fractions, (list, tuple)) or not self.n_fractions:
            raise ConfigInvalid("n_fractions", "must be a non-empty list of reals in (0, 0.5]")
        for f in self.n_fractions:
            if not isinstance(f, (int, float)) or isinstance(f, bool) or not 0.0 < f <= 0.5:
                raise ConfigInvalid("n_fractions", f"{f!r} is not in (0, 0.5]")
        if len(set(self.n_fractions)) != len(self.n_fractions):
            raise ConfigInvalid("n_fractions", "values must be distinct")
        if not isinstance(self.trials_per_cell, int) or self.trials_per_cell < 1:
            raise ConfigInvalid("trials_per_cell", "must be an integer >= 1")
        if not isinstance(self.master_seed, int) or not 0 <= self.master_seed < 2**64:
            raise ConfigInvalid("master_seed", "must be an unsigned 64-bit integer")
        if not isinstance(self.worker_count, int) or self.worker_count < 1:
            raise ConfigInvalid("worker_count", "must be an integer >= 1")
        for d in self.d_values:
            for f in self.n_fractions:
                n = cell_size(d, f)
                if not 1 <= n <= MAX_N:
                    raise ConfigInvalid("n_fractions", f"d={d}, fraction={f} gives n={n} outside [1, {MAX_N}]")
                if n >= d * (d + 1) // 2:
                    raise ConfigInvalid(
                        "n_fractions", f"d={d}, fraction={f} gives n={n} >= d(d+1)/2 = {d * (d + 1) // 2}"
                    )

    def cells(self):
        return [(d, f) for d in self.d_values for f in self.n_fractions]

    def to_json(self):
        return asdict(self)

    @classmethod
    def from_json(cls, doc):
        if not isinstance(doc, dict):
            raise ConfigInvalid("<root>", "config must be a JSON object")
        known = {f for f in cls.__dataclass_fields__}
        for key in doc:
            if key not in known:
                raise ConfigInvalid(key, "unknown field")
        for key in ("d_values", "n_fractions", "trials_per_cell"):
            if key not in doc:
                raise ConfigInvalid(key, "missing required field")
        return cls(**doc)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigInvalid("<root>", f"not valid JSON ({exc})") from None
        return cls.from_json(doc)


@dataclass(frozen=True)
class TrialTask:
    d: int
    n: int
    n_fraction: float
    trial_index: int
    seed: int
    diagnostics: bool
    record_timing: bool


@dataclass(frozen=True)
class TrialRecord:
    d: int
    n: int
    n_fraction: float
    trial_index: int
    seed: int
    status: str
    max_residual: float
    q_min_eig: float
    perturbation_norm: float
    m_min_eig: float
    eps_inf: float
    delta_inf: float
    wall_time_ms: float
    events: dict = field(default=None, compare=False)

    @property
    def key(self):
        return (self.d, self.n, self.trial_index)

    @property
    def success(self):
        return self.status == FitStatus.SUCCESS.value

    def csv_row(self):
        def num(x):
            return format(float(x), ".17g")

        return [
            str(self.d), str(self.n), num(self.n_fraction), str(self.trial_index), str(self.seed),
            self.status, num(self.max_residual), num(self.q_min_eig), num(self.perturbation_norm),
            num(self.m_min_eig), num(self.eps_inf), num(self.delta_inf), num(self.wall_time_ms),
        ]


def make_tasks(config, record_timing=True):
    tasks = []
    ordinal = 0
    for d, f in config.cells():
        n = cell_size(d, f)
        for t in range(config.trials_per_cell):
            seed = derive_trial_seed(config.master_seed, ordinal)
            tasks.append(TrialTask(d, n, f, t, seed, config.diagnostics_enabled, record_timing))
            ordinal += 1
    return tasks


def run_trial(task):
    start = time.perf_counter()
    cloud = sample_cloud(task.d, task.n, task.seed)
    fit = fit_ellipsoid(cloud)
    events = None
    if task.diagnostics:
        try:
            rep = check_events(cloud, fit.gram, fit.deviations, fit.delta)
            events = {"e1": rep.e1_holds, "e2": rep.e2_holds, "e3": rep.e3_holds,
                      "m_dev_norm": rep.m_dev_norm}
        except NotConverged:
            events = None
    elapsed = (time.perf_counter() - start) * 1e3 if task.record_timing else 0.0
    return TrialRecord(
        d=task.d, n=task.n, n_fraction=task.n_fraction, trial_index=task.trial_index,
        seed=task.seed, status=str(fit.status), max_residual=fit.max_residual,
        q_min_eig=fit.q_min_eig, perturbation_norm=fit.perturbation_norm,
        m_min_eig=fit.m_min_eig, eps_inf=fit.eps_inf, delta_inf=fit.delta_inf,
        wall_time_ms=elapsed, events=events,
    )


@dataclass
class SweepResult:
    records: list
    cell_success_rate: dict
    threshold_estimate: dict
    wall_time_s: float = 0.0

    @classmethod
    def from_records(cls, records, wall_time_s=0.0):
        records = sorted(records, key=lambda r: r.key)
        counts = {}
        for r in records:
            tot, ok = counts.get((r.d, r.n_fraction), (0, 0))
            counts[(r.d, r.n_fraction)] = (tot + 1, ok + int(r.success))
        rates = {k: ok / tot for k, (tot, ok) in sorted(counts.items())}
        out = cls(records, rates, {}, wall_time_s)
        out.threshold_estimate = {d: estimate_threshold(out, d) for d in out.dimensions()}
        return out

    def dimensions(self):
        return sorted({d for d, _ in self.cell_success_rate})

    def curve(self, d):
        pts = sorted((f, r) for (dd, f), r in self.cell_success_rate.items() if dd == d)
        return np.array([p[0] for p in pts]), np.array([p[1] for p in pts])

    def cell_counts(self, d, fraction):
        rows = [r for r in self.records if r.d == d and r.n_fraction == fraction]
        return len(rows), sum(r.success for r in rows)

    def event_rates(self):
        out = {}
        for (d, f) in self.cell_success_rate:
            evs = [r.events for r in self.records
                   if r.d == d and r.n_fraction == f and r.events is not None]
            if evs:
                out[f"{d}:{f!r}"] = {
                    k: float(np.mean([e[k] for e in evs])) for k in ("e1", "e2", "e3")
                }
        return out

    def to_csv(self):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\r\n")
        writer.writerow(CSV_COLUMNS)
        for r in self.records:
            writer.writerow(r.csv_row())
        return buf.getvalue()


def estimate_threshold(result, d):
    """Fraction at which the success rate of dimension ``d`` first drops through 1/2.

    Returns None when the scanned curve never crosses 1/2.
    """
    if d not in result.dimensions():
        raise UnknownDimension(d)
    fr, rate = result.curve(d)
    for k in range(len(fr) - 1):
        if rate[k] >= 0.5 > rate[k + 1]:
            w = (rate[k] - 0.5) / (rate[k] - rate[k + 1])
            return float(fr[k] + w * (fr[k + 1] - fr[k]))
    return None


def resolve_workers(config):
    env = os.environ.get(WORKERS_ENV)
    if env:
        try:
            workers = int(env)
        except ValueError:
            raise ConfigInvalid(WORKERS_ENV, f"{env!r} is not an integer") from None
        if workers < 1:
            raise ConfigInvalid(WORKERS_ENV, "must be >= 1")
        return workers
    return config.worker_count


def _partial_path(path):
    return str(path) + ".partial"


def run_sweep(config, record_timing=True, progress=None):
    """Run every (d, fraction, trial) task of ``config``.

    Records are appended to ``<output_path>.partial`` as they finish; on
    completion the canonical key-sorted CSV and ``<output_path>.meta.json``
    are written and the partial file is removed. With ``record_timing=False``
    the ``wall_time_ms`` column is zero so the CSV is a pure function of the
    config.
    """
    config.validate()
    tasks = make_tasks(config, record_timing)
    workers = min(resolve_workers(config), max(len(tasks), 1))
    start = time.perf_counter()

    sink = None
    if config.output_path:
        sink = open(_partial_path(config.output_path), "w", newline="")
        writer = csv.writer(sink, lineterminator="\r\n")
        writer.writerow(CSV_COLUMNS)
        sink.flush()

    records = []
    try:
        if workers == 1:
            stream = map(run_trial, tasks)
            pool = None
        else:
            pool = multiprocessing.get_context().Pool(workers)
            stream = pool.imap_unordered(run_trial, tasks, chunksize=1)
        try:
            for rec in stream:
                records.append(rec)
                if sink is not None:
                    writer.writerow(rec.csv_row())
                    sink.flush()
                if progress is not None:
                    progress(len(records), len(tasks))
        finally:
            if pool is not None:
                pool.close()
                pool.join()
    finally:
        if sink is not None:
            sink.close()

    result = SweepResult.from_records(records, time.perf_counter() - start)
    if config.output_path:
        write_outputs(result, config)
        os.remove(_partial_path(config.output_path))
    return result


def meta_document(result, config):
    return {
        "version": __version__,
        "config": config.to_json(),
        "threshold_estimate": {str(d): t for d, t in result.threshold_estimate.items()},
        "threshold_definition": THRESHOLD_NOTE,
        "conjectured_threshold": CONJECTURED_THRESHOLD,
        "cell_success_rate": {
            f"{d}:{f!r}": r for (d, f), r in result.cell_success_rate.items()
        },
        "event_rates": result.event_rates(),
        "trial_count": len(result.records),
        "total_wall_time_s": result.wall_time_s,
    }


def write_outputs(result, config):
    with open(config.output_path, "w", newline="") as fh:
        fh.write(result.to_csv())
    with open(str(config.output_path) + ".meta.json", "w") as fh:
        json.dump(meta_document(result, config), fh, indent=2)


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
