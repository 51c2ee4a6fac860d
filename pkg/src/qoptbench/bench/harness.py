"""Multi-restart benchmark runs, trace files and summary tables."""
import csv
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError, QoptError
from ..model import ControlSequence
from ..optimize import run_scheme
from ..problems import build_problem, load_custom_problem
from .config import config_to_dict, tomllib

TRACE_COLUMNS = ("iteration", "elapsed_s", "fidelity", "one_minus_fidelity",
                 "n_eig_cum", "n_matmul_cum")


def resolve_problem(problem):
    if isinstance(problem, int):
        return build_problem(problem)
    try:
        with open(problem, "rb") as fh:
            data = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{problem}: {exc}") from None
    return load_custom_problem(data)


def initial_controls(config, instance, restart):
    """Restart ``restart`` draws its amplitudes from ``default_rng([seed, restart])``."""
    rng = np.random.default_rng([config.seed, restart])
    shape = (instance.n_slices, instance.system.n_controls)
    init = config.u_init
    if init.distribution == "gaussian":
        u = rng.normal(init.mean, init.std, shape)
    else:
        half = np.sqrt(3.0) * init.std
        u = rng.uniform(init.mean - half, init.mean + half, shape)
    bounds = None
    if config.constrained is not None:
        bounds = config.constrained
        u = np.clip(u, *bounds)
    return ControlSequence(u, instance.dt, bounds)


@dataclass
class RestartRecord:
    restart: int
    final_fidelity: float = None
    stop_reason: str = None
    iterations: int = None
    wall_time_s: float = None
    n_eig: int = None
    n_matmul: int = None
    handover_index: int = None
    error: str = None
    trace: list = field(default_factory=list, repr=False)
    final_controls: list = field(default_factory=list, repr=False)

    @property
    def ok(self):
        return self.error is None

    def to_json(self):
        return {k: v for k, v in self.__dict__.items() if k != "trace"}


def run_restart(config, restart, instance=None):
    """One optimisation; numeric failures are recorded rather than raised."""
    if instance is None:
        instance = resolve_problem(config.problem)
    before = instance.system.fingerprint()
    record = RestartRecord(restart)
    try:
        u0 = initial_controls(config, instance, restart)
        result = run_scheme(instance.system, instance.task, u0, config.build_scheme(),
                            config.stopping())
    except (QoptError, ArithmeticError, np.linalg.LinAlgError) as exc:
        if isinstance(exc, ConfigError):
            raise
        record.error = f"{type(exc).__name__}: {exc}"
        return record
    if instance.system.fingerprint() != before:
        raise RuntimeError("problem definition was modified during a restart")
    record.final_fidelity = result.final_fidelity
    record.stop_reason = result.stop_reason.value
    record.iterations = result.iterations
    record.wall_time_s = result.wall_time
    record.n_eig = result.counters["n_eig"]
    record.n_matmul = result.counters["n_matmul"]
    record.handover_index = result.handover_index
    record.trace = [tuple(p) for p in result.trace]
    record.final_controls = result.final_controls.u.tolist()
    return record


def _run_restart_job(args):
    return run_restart(*args)


@dataclass
class BenchSummary:
    problem: object
    scheme: str
    restarts: int
    completed: int
    metrics: dict
    errors: list = field(default_factory=list)

    @property
    def incomplete(self):
        return self.completed < self.restarts

    def to_dict(self):
        return {
            "problem": self.problem,
            "scheme": self.scheme,
            "restarts": self.restarts,
            "completed": self.completed,
            "incomplete": self.incomplete,
            "metrics": self.metrics,
            "errors": self.errors,
        }


def _stats(values):
    if not values:
        return {"mean": None, "min": None, "max": None}
    return {"mean": float(np.mean(values)), "min": float(min(values)), "max": float(max(values))}


def summarize(config, records):
    ok = [r for r in records if r.ok]
    metrics = {
        "final_fidelity": _stats([r.final_fidelity for r in ok]),
        "wall_time_s": _stats([r.wall_time_s for r in ok]),
        "n_eig_k": _stats([r.n_eig / 1000 for r in ok]),
        "n_matmul_k": _stats([r.n_matmul / 1000 for r in ok]),
    }
    errors = [{"restart": r.restart, "error": r.error} for r in records if not r.ok]
    return BenchSummary(config.problem, config.scheme, config.restarts, len(ok), metrics, errors)


def write_trace_csv(trace, stream):
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(TRACE_COLUMNS)
    for it, fid, n_eig, n_matmul, elapsed in trace:
        writer.writerow([it, repr(float(elapsed)), repr(float(fid)), repr(1.0 - fid),
                         n_eig, n_matmul])


def emit_trace(trace, path):
    """Write a convergence trace as CSV (one row per iteration)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        write_trace_csv(trace, fh)


def read_trace(path):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        return [{k: float(v) for k, v in row.items()} for row in reader]


def run_benchmark(config, out_dir=None, jobs=None):
    """Run every restart; write per-restart files and the summary when ``out_dir`` is set."""
    jobs = config.jobs if jobs is None else jobs
    instance = resolve_problem(config.problem)
    if jobs > 1 and config.restarts > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(_run_restart_job,
                                    [(config, i) for i in range(config.restarts)]))
    else:
        records = [run_restart(config, i, instance) for i in range(config.restarts)]
    summary = summarize(config, records)
    if out_dir is not None:
        write_outputs(config, records, summary, out_dir)
    return summary, records


def write_outputs(config, records, summary, out_dir):
    os.makedirs(out_dir, exist_ok=True)
    for rec in records:
        stem = os.path.join(out_dir, f"restart_{rec.restart:03d}")
        if rec.ok:
            emit_trace(rec.trace, stem + ".csv")
        with open(stem + ".json", "w", encoding="utf-8") as fh:
            json.dump(rec.to_json(), fh, indent=1)
    with open(os.path.join(out_dir, "summary.json"), "w", encoding="utf-8") as fh:
        json.dump({"config": config_to_dict(config), **summary.to_dict()}, fh, indent=1)
    with open(os.path.join(out_dir, "summary.txt"), "w", encoding="utf-8") as fh:
        fh.write(render_table([summary]))


def load_records(out_dir):
    records = []
    for name in sorted(os.listdir(out_dir)):
        if name.startswith("restart_") and name.endswith(".json"):
            with open(os.path.join(out_dir, name), encoding="utf-8") as fh:
                data = json.load(fh)
            records.append(RestartRecord(**data))
    return records


def _fmt(stats, digits):
    if stats["mean"] is None:
        return "n/a"
    return "/".join(f"{stats[k]:.{digits}f}" for k in ("mean", "min", "max"))


def render_table(summaries):
    """Aligned plain-text table, one row per summary, values as mean/min/max."""
    header = ("Problem", "Scheme", "Final fidelity", "Wall time [s]", "#Eig/1000",
              "#Mults/1000", "Done")
    rows = [header]
    for s in summaries:
        m = s.metrics
        rows.append((str(s.problem), s.scheme, _fmt(m["final_fidelity"], 4),
                     _fmt(m["wall_time_s"], 2), _fmt(m["n_eig_k"], 2),
                     _fmt(m["n_matmul_k"], 1), f"{s.completed}/{s.restarts}"))
    widths = [max(len(r[i]) for r in rows) for i in range(len(header))]
    lines = ["  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip() for row in rows]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def compare(configs, out_dir=None):
    """Run several configurations on one problem; return summaries and a table."""
    if len(configs) < 2:
        raise ConfigError("compare needs at least two configurations")
    problems = {c.problem for c in configs}
    if len(problems) != 1:
        raise ConfigError(f"compare needs a single problem, got {sorted(map(str, problems))}")
    summaries = []
    for i, config in enumerate(configs):
        sub = None if out_dir is None else os.path.join(out_dir, f"{i:02d}_{_slug(config.scheme)}")
        summary, _ = run_benchmark(config, sub)
        summaries.append(summary)
    table = render_table(summaries)
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "compare.json"), "w", encoding="utf-8") as fh:
            json.dump([s.to_dict() for s in summaries], fh, indent=1)
        with open(os.path.join(out_dir, "compare.txt"), "w", encoding="utf-8") as fh:
            fh.write(table)
    return summaries, table


def _slug(text):
    return "".join(c if c.isalnum() else "_" for c in text).strip("_")
