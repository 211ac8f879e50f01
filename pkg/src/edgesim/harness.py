"""Experiment campaigns: run trials, aggregate them, and write CSV outputs."""

from __future__ import annotations

import csv
import io
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

from .config import ConfigError, ExperimentConfig, load_config
from .engine import TrialResult, format_event_log, run_trial
from .mobility import MarkovMobility, Predicted
from .schedulers import policy_name

log = logging.getLogger(__name__)

TRIALS_VERSION_LINE = "# edgesim trials v1"
TRIAL_COLUMNS = ["trial", "seed", "policy", "n_workers", "completed", "failed_attempts",
                 "completion_s", "total_mAh", "master_mAh", "deadline_met"]
SUMMARY_COLUMNS = [
    "policy", "trials",
    "completion_mean", "completion_min", "completion_max",
    "total_mAh_mean", "total_mAh_min", "total_mAh_max",
    "master_mAh_mean", "master_mAh_min", "master_mAh_max",
    "failed_mean", "failed_min", "failed_max",
    "deadline_met_rate",
]
SWEEP_AXES = ("n_helpers", "deadline_s", "error_margin", "p_leave", "slot_s")


def _fmt(x: float) -> str:
    return f"{x:.6f}"


@dataclass(frozen=True)
class TrialRow:
    trial: int
    seed: int
    policy: str
    n_workers: int
    completed: int
    failed_attempts: int
    completion_s: float
    total_mAh: float
    master_mAh: float
    deadline_met: bool

    @classmethod
    def from_result(cls, trial: int, r: TrialResult) -> "TrialRow":
        # round through the CSV text so summaries match what trials.csv holds
        return cls(trial, r.seed, r.scheduler, r.n_workers, r.completed, r.failed_attempts,
                   float(_fmt(r.completion_time_s)), float(_fmt(r.total_energy_mAh)),
                   float(_fmt(r.master_energy_mAh)), r.deadline_met)

    def cells(self) -> list[str]:
        return [str(self.trial), str(self.seed), self.policy, str(self.n_workers),
                str(self.completed), str(self.failed_attempts), _fmt(self.completion_s),
                _fmt(self.total_mAh), _fmt(self.master_mAh), "1" if self.deadline_met else "0"]


@dataclass(frozen=True)
class Stat:
    mean: float
    min: float
    max: float

    @classmethod
    def of(cls, xs: Sequence[float]) -> "Stat":
        return cls(sum(xs) / len(xs), min(xs), max(xs))


@dataclass(frozen=True)
class CampaignSummary:
    policy: str
    trials: int
    completion_s: Stat
    total_mAh: Stat
    master_mAh: Stat
    failed_attempts: Stat
    deadline_met_rate: float

    def cells(self) -> list[str]:
        out = [self.policy, str(self.trials)]
        for s in (self.completion_s, self.total_mAh, self.master_mAh, self.failed_attempts):
            out += [_fmt(s.mean), _fmt(s.min), _fmt(s.max)]
        out.append(_fmt(self.deadline_met_rate))
        return out


def summarize(rows: Sequence[TrialRow]) -> list[CampaignSummary]:
    """One summary per policy, in first-seen order."""
    by_policy: dict[str, list[TrialRow]] = {}
    for r in rows:
        by_policy.setdefault(r.policy, []).append(r)
    out = []
    for pol, rs in by_policy.items():
        out.append(CampaignSummary(
            policy=pol, trials=len(rs),
            completion_s=Stat.of([r.completion_s for r in rs]),
            total_mAh=Stat.of([r.total_mAh for r in rs]),
            master_mAh=Stat.of([r.master_mAh for r in rs]),
            failed_attempts=Stat.of([float(r.failed_attempts) for r in rs]),
            deadline_met_rate=sum(1 for r in rs if r.deadline_met) / len(rs),
        ))
    return out


# --- running ----------------------------------------------------------------

def max_workers() -> int:
    env = os.environ.get("EDGESIM_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            log.warning("ignoring non-integer EDGESIM_THREADS=%r", env)
    return os.cpu_count() or 1


def _run_one(args) -> TrialResult:
    cfg, seed, with_log = args
    r = run_trial(cfg, seed, log_events=with_log)
    # the ledger is large and not needed across the process boundary
    return replace(r, ledger=None)


def run_trials(cfg: ExperimentConfig, seeds: Sequence[int], with_log: bool = False) -> list[TrialResult]:
    jobs = [(cfg, s, with_log) for s in seeds]
    workers = min(max_workers(), len(jobs))
    if workers <= 1 or len(jobs) < 4:
        return [_run_one(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_one, jobs))


def campaign_rows(cfg: ExperimentConfig, event_dir: Optional[Path] = None,
                  prefix: str = "") -> list[TrialRow]:
    seeds = [cfg.base_seed + i for i in range(cfg.trials)]
    rows = []
    for pol in cfg.policies:
        results = run_trials(cfg.with_policy(pol), seeds, with_log=event_dir is not None)
        for i, r in enumerate(results):
            rows.append(TrialRow.from_result(i, r))
            if event_dir is not None:
                name = f"events_{prefix}{policy_name(pol)}_{i}.csv"
                (event_dir / name).write_text(format_event_log(r.events), encoding="utf-8")
    return rows


def trials_csv(rows: Iterable[TrialRow]) -> str:
    buf = io.StringIO()
    buf.write(TRIALS_VERSION_LINE + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRIAL_COLUMNS)
    for r in rows:
        w.writerow(r.cells())
    return buf.getvalue()


def summary_csv(summaries: Iterable[CampaignSummary], lead: Sequence[str] = (),
                lead_values: Optional[Sequence[Sequence[str]]] = None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(list(lead) + SUMMARY_COLUMNS)
    for i, s in enumerate(summaries):
        w.writerow((list(lead_values[i]) if lead_values else []) + s.cells())
    return buf.getvalue()


def read_trials_csv(path: Union[str, Path]) -> list[TrialRow]:
    text = Path(path).read_text(encoding="utf-8")
    lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
    rows = []
    for d in csv.DictReader(lines):
        rows.append(TrialRow(int(d["trial"]), int(d["seed"]), d["policy"], int(d["n_workers"]),
                             int(d["completed"]), int(d["failed_attempts"]), float(d["completion_s"]),
                             float(d["total_mAh"]), float(d["master_mAh"]), d["deadline_met"] == "1"))
    return rows


def run_campaign(config: Union[str, Path, ExperimentConfig], out_dir: Optional[Union[str, Path]] = None,
                 ) -> list[CampaignSummary]:
    """Run every policy of the config for ``trials`` seeds and write the CSV outputs."""
    cfg = load_config(config) if not isinstance(config, ExperimentConfig) else config
    out = Path(out_dir if out_dir is not None else cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = campaign_rows(cfg, out if cfg.emit_event_log else None)
    summaries = summarize(rows)
    (out / "trials.csv").write_text(trials_csv(rows), encoding="utf-8")
    (out / "summary.csv").write_text(summary_csv(summaries), encoding="utf-8")
    return summaries


# --- sweeps -----------------------------------------------------------------

def _parse_value(axis: str, v):
    if axis == "slot_s" and str(v).strip().lower() == "none":
        return None
    if axis == "n_helpers":
        try:
            n = int(str(v))
        except ValueError:
            raise ConfigError("values", f"n_helpers needs integers, got {v!r}") from None
        if n < 1:
            raise ConfigError("values", "n_helpers must be >= 1")
        return n
    try:
        return float(v)
    except ValueError:
        raise ConfigError("values", f"{axis} needs numbers, got {v!r}") from None


def apply_axis(cfg: ExperimentConfig, axis: str, value) -> ExperimentConfig:
    """A copy of ``cfg`` with one knob changed."""
    if axis == "deadline_s":
        return replace(cfg, deadline_s=value)
    if axis == "n_helpers":
        n_now = cfg.n_workers
        if n_now == 0:
            raise ConfigError("devices", "n_helpers sweep needs at least one worker to clone")
        if value <= n_now:
            devices = cfg.devices[: value + 1]
            mobility = cfg.mobility[:value]
            predictor = cfg.predictor[:value]
        else:
            extra = value - n_now
            rest = cfg.mobility_rest if cfg.mobility_rest is not None else cfg.mobility[-1]
            devices = cfg.devices + tuple(replace(cfg.devices[-1], id=n_now + 1 + i) for i in range(extra))
            mobility = cfg.mobility + (rest,) * extra
            predictor = cfg.predictor + (cfg.predictor[-1],) * extra
        return replace(cfg, devices=devices, mobility=mobility, predictor=predictor)
    if axis == "error_margin":
        if not 0.0 <= value <= 1.0:
            raise ConfigError("values", "error_margin must be a probability")
        return replace(cfg, predictor=(Predicted(error_margin=value),) * cfg.n_workers)
    if axis == "p_leave":
        if not 0.0 <= value <= 1.0:
            raise ConfigError("values", "p_leave must be a probability")
        mob = tuple(replace(m, p_leave=value) if isinstance(m, MarkovMobility) else m for m in cfg.mobility)
        return replace(cfg, mobility=mob)
    if axis == "slot_s":
        if value is None:
            return replace(cfg, mobility=(None,) * cfg.n_workers)
        if value <= 0:
            raise ConfigError("values", "slot_s must be > 0")
        mob = tuple(replace(m, slot_s=value) if isinstance(m, MarkovMobility) else m for m in cfg.mobility)
        return replace(cfg, mobility=mob)
    raise ConfigError("axis", f"unknown sweep axis {axis!r}; choose from {', '.join(SWEEP_AXES)}")


def sweep(config: Union[str, Path, ExperimentConfig], axis: str, values: Sequence,
          out_dir: Optional[Union[str, Path]] = None) -> list[tuple[str, CampaignSummary]]:
    """Run the campaign at every value of ``axis``; writes ``sweep.csv`` and ``trials.csv``."""
    cfg = load_config(config) if not isinstance(config, ExperimentConfig) else config
    if axis not in SWEEP_AXES:
        raise ConfigError("axis", f"unknown sweep axis {axis!r}; choose from {', '.join(SWEEP_AXES)}")
    if not values:
        raise ConfigError("values", "at least one sweep value is required")
    parsed = [_parse_value(axis, v) for v in values]
    out = Path(out_dir if out_dir is not None else cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    points: list[tuple[str, CampaignSummary]] = []
    all_rows: list[tuple[str, TrialRow]] = []
    for raw, v in zip(values, parsed):
        label = "none" if v is None else str(raw).strip()
        point_cfg = apply_axis(cfg, axis, v)
        rows = campaign_rows(point_cfg, out if cfg.emit_event_log else None, prefix=f"{axis}{label}_")
        all_rows += [(label, r) for r in rows]
        points += [(label, s) for s in summarize(rows)]

    buf = io.StringIO()
    buf.write(TRIALS_VERSION_LINE + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([axis] + TRIAL_COLUMNS)
    for label, r in all_rows:
        w.writerow([label] + r.cells())
    (out / "trials.csv").write_text(buf.getvalue(), encoding="utf-8")
    (out / "sweep.csv").write_text(
        summary_csv([s for _, s in points], lead=("axis", "value"),
                    lead_values=[(axis, label) for label, _ in points]),
        encoding="utf-8")
    return points


# --- reporting --------------------------------------------------------------

_METRICS = (("completion", "completion time (s)"), ("total_mAh", "total energy (mAh)"),
            ("master_mAh", "master energy (mAh)"), ("failed", "failed attempts"))


def _table(header: Sequence[str], rows: Sequence[Sequence[str]]) -> str:
    widths = [max(len(str(x)) for x in col) for col in zip(header, *rows)]
    line = lambda cells: "  ".join(str(c).rjust(w) for c, w in zip(cells, widths))  # noqa: E731
    sep = "  ".join("-" * w for w in widths)
    return "\n".join([line(header), sep] + [line(r) for r in rows])


def report(results_dir: Union[str, Path]) -> str:
    """Render the results in ``results_dir`` as text tables and write plot data files."""
    d = Path(results_dir)
    sweep_path, summary_path = d / "sweep.csv", d / "summary.csv"
    if sweep_path.exists():
        with sweep_path.open(encoding="utf-8", newline="") as fh:
            recs = list(csv.DictReader(fh))
        if not recs:
            raise FileNotFoundError(f"{sweep_path} has no rows")
        axis = recs[0]["axis"]
        xs = list(dict.fromkeys(r["value"] for r in recs))
        pols = list(dict.fromkeys(r["policy"] for r in recs))
        parts = []
        for key, title in _METRICS:
            cell = {(r["value"], r["policy"]): r for r in recs}
            rows = [[x] + [f"{float(cell[(x, p)][key + '_mean']):.2f}" if (x, p) in cell else "-"
                           for p in pols] for x in xs]
            parts.append(f"{title} by {axis}\n" + _table([axis] + pols, rows))
            buf = io.StringIO()
            w = csv.writer(buf, lineterminator="\n")
            w.writerow(["x", "series", "mean", "min", "max"])
            for r in recs:
                w.writerow([r["value"], r["policy"], r[key + "_mean"], r[key + "_min"], r[key + "_max"]])
            (d / f"plotdata_{key}.csv").write_text(buf.getvalue(), encoding="utf-8")
        rate_rows = [[x] + [f"{float(cell[(x, p)]['deadline_met_rate']):.2f}" if (x, p) in cell else "-"
                            for p in pols] for x in xs]
        parts.append(f"deadline met rate by {axis}\n" + _table([axis] + pols, rate_rows))
        return "\n\n".join(parts) + "\n"
    if summary_path.exists():
        with summary_path.open(encoding="utf-8", newline="") as fh:
            recs = list(csv.DictReader(fh))
        if not recs:
            raise FileNotFoundError(f"{summary_path} has no rows")
        header = ["policy", "trials", "completion s", "min", "max", "total mAh", "min", "max",
                  "master mAh", "failed", "deadline met"]
        rows = [[r["policy"], r["trials"],
                 *(f"{float(r[k]):.2f}" for k in ("completion_mean", "completion_min", "completion_max",
                                                  "total_mAh_mean", "total_mAh_min", "total_mAh_max",
                                                  "master_mAh_mean", "failed_mean", "deadline_met_rate"))]
                for r in recs]
        return _table(header, rows) + "\n"
    raise FileNotFoundError(f"no summary.csv or sweep.csv in {d}")
