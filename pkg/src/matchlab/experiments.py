"""Monte Carlo experiments on random matching markets.

Every trial gets its own seed, ``splitmix64(master_seed ^ trial)``; a trial
that needs a second random stream (the lazy run in the balanced experiment)
uses ``splitmix64(trial_seed ^ LAZY_STREAM)``. Trials are independent, so
results do not depend on how many worker processes run them.
"""
from __future__ import annotations

import csv
import enum
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np

from .da import run_dpda, run_hpda
from .lazy import coupled_run, run_dpda_prime, run_dpda_prime_rejector
from .market import MASK64, Market, Side, generate_uniform_profile, side_ranks

LAZY_STREAM = 0x6C617A79  # "lazy"
HSTAR = 0


def splitmix64(x: int) -> int:
    """SplitMix64 finaliser (Steele, Lea & Flood); maps 64-bit ints to 64-bit ints."""
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def trial_seed(master_seed: int, trial: int) -> int:
    return splitmix64((master_seed & MASK64) ^ trial)


def harmonic_number(n: int) -> float:
    if n < 1:
        raise ValueError(f"harmonic number needs n >= 1, got {n}")
    return math.fsum(1.0 / i for i in range(1, n + 1))


class ExperimentKind(str, enum.Enum):
    BALANCED = "balanced"
    UNBALANCED = "unbalanced"
    REJECTOR_TAIL = "rejector-tail"
    COUPLING_CHECK = "coupling"


@dataclass(frozen=True)
class ExperimentConfig:
    market: Market
    trials: int
    master_seed: int
    kind: ExperimentKind
    target_hospital: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "kind", ExperimentKind(self.kind))
        if self.trials < 1:
            raise ValueError(f"trials must be >= 1, got {self.trials}")
        needs_target = self.kind is ExperimentKind.REJECTOR_TAIL
        if needs_target != (self.target_hospital is not None):
            raise ValueError("target_hospital is required for rejector-tail experiments and only for them")
        if self.target_hospital is not None and not 0 <= self.target_hospital < self.market.num_hospitals:
            raise ValueError(f"target hospital {self.target_hospital} out of range")
        if self.kind in (ExperimentKind.BALANCED, ExperimentKind.COUPLING_CHECK) and not self.market.is_balanced:
            raise ValueError(f"{self.kind.value} experiment needs m = n, got {self.market}")
        if self.kind in (ExperimentKind.UNBALANCED, ExperimentKind.REJECTOR_TAIL) and not self.market.is_unbalanced_by_one:
            raise ValueError(f"{self.kind.value} experiment needs m = n + 1, got {self.market}")

    @classmethod
    def for_kind(cls, kind, n: int, trials: int, master_seed: int) -> "ExperimentConfig":
        """Config with the market shape and target that ``kind`` requires."""
        kind = ExperimentKind(kind)
        m = n + 1 if kind in (ExperimentKind.UNBALANCED, ExperimentKind.REJECTOR_TAIL) else n
        target = HSTAR if kind is ExperimentKind.REJECTOR_TAIL else None
        return cls(Market(n, m), trials, master_seed, kind, target)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "num_doctors": self.market.num_doctors,
            "num_hospitals": self.market.num_hospitals,
            "trials": self.trials,
            "master_seed": self.master_seed,
            "target_hospital": self.target_hospital,
        }


@dataclass(frozen=True)
class TrialRecord:
    trial: int
    kind: str
    n: int
    m: int
    seed: int
    total_proposals: Optional[int] = None
    mean_doctor_rank: Optional[float] = None
    mean_hospital_rank: Optional[float] = None
    hstar_rank_hpda: Optional[int] = None
    hstar_rank_dpda: Optional[int] = None
    ybar: Optional[int] = None
    lazy_total_proposals: Optional[int] = None
    dpda_mean_doctor_rank: Optional[float] = None
    dpda_mean_hospital_rank: Optional[float] = None


CSV_COLUMNS = [f.name for f in fields(TrialRecord)]
INT_COLUMNS = {"trial", "n", "m", "seed", "total_proposals", "hstar_rank_hpda", "hstar_rank_dpda", "ybar", "lazy_total_proposals"}
METRICS = [
    "total_proposals",
    "mean_doctor_rank",
    "mean_hospital_rank",
    "hstar_rank_hpda",
    "hstar_rank_dpda",
    "ybar",
    "lazy_total_proposals",
    "dpda_mean_doctor_rank",
    "dpda_mean_hospital_rank",
]


@dataclass(frozen=True)
class Aggregate:
    count: int
    mean: float
    sd: float
    se: float
    min: float
    max: float


def aggregate(values) -> Aggregate:
    a = np.asarray(list(values), dtype=float)
    if a.size == 0:
        raise ValueError("no trials")
    sd = float(a.std(ddof=1)) if a.size > 1 else 0.0
    return Aggregate(int(a.size), float(a.mean()), sd, sd / math.sqrt(a.size), float(a.min()), float(a.max()))


def baselines(n: int) -> dict[str, dict]:
    """Reference values for the metrics, each tagged with its formula."""
    h = harmonic_number(n)
    ln = math.log(n)
    return {
        "harmonic": {"formula": "H_n = sum_{i=1..n} 1/i", "value": h},
        "n_harmonic": {"formula": "n * H_n", "value": n * h},
        "hospital_rank_floor": {"formula": "n / (1 + H_n)", "value": n / (1 + h)},
        "long_side_bound": {"formula": "n / (6 ln n)", "value": n / (6 * ln) if n > 1 else None},
        "tail_threshold": {"formula": "3 ln n", "value": 3 * ln},
    }


# which baseline each metric is read against, per experiment kind
_METRIC_BASELINE = {
    ExperimentKind.BALANCED: {
        "total_proposals": "n_harmonic",
        "lazy_total_proposals": "n_harmonic",
        "mean_doctor_rank": "harmonic",
        "mean_hospital_rank": "hospital_rank_floor",
    },
    ExperimentKind.UNBALANCED: {
        "hstar_rank_hpda": "long_side_bound",
        "mean_doctor_rank": "tail_threshold",
    },
    ExperimentKind.REJECTOR_TAIL: {"ybar": "harmonic", "total_proposals": "n_harmonic"},
    ExperimentKind.COUPLING_CHECK: {"lazy_total_proposals": "n_harmonic"},
}


@dataclass
class ExperimentReport:
    config: ExperimentConfig
    records: list[TrialRecord]
    aggregates: dict[str, Aggregate] = field(default_factory=dict)
    baselines: dict[str, dict] = field(default_factory=dict)
    extras: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if not self.aggregates:
            self.aggregates = compute_aggregates(self.records)
        if not self.baselines:
            self.baselines = baselines(self.config.market.num_doctors)
        if not self.extras:
            self.extras = compute_extras(self.config, self.records)

    def column(self, name: str) -> list:
        return [getattr(r, name) for r in self.records if getattr(r, name) is not None]

    def baseline(self, name: str) -> float:
        return self.baselines[name]["value"]

    def to_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "aggregates": {k: asdict(v) for k, v in self.aggregates.items()},
            "baselines": self.baselines,
            "extras": self.extras,
        }


def compute_aggregates(records) -> dict[str, Aggregate]:
    out = {}
    for name in METRICS:
        values = [getattr(r, name) for r in records if getattr(r, name) is not None]
        if values:
            out[name] = aggregate(values)
    return out


def compute_extras(config: ExperimentConfig, records) -> dict[str, float]:
    extras: dict[str, float] = {}
    n = config.market.num_doctors
    if config.kind is ExperimentKind.REJECTOR_TAIL:
        threshold = 3 * math.log(n)
        ys = [r.ybar for r in records]
        extras["p_ybar_le_3ln_n"] = sum(y <= threshold for y in ys) / len(ys)
        extras["p_ybar_le_2H_n"] = sum(y <= 2 * harmonic_number(n) for y in ys) / len(ys)
    if config.kind is ExperimentKind.UNBALANCED:
        extras["hstar_unmatched_hpda_rate"] = sum(r.hstar_rank_hpda == n + 1 for r in records) / len(records)
    return extras


def _mean_rank(ranks: np.ndarray, limit: Optional[int] = None) -> float:
    if limit is not None:
        ranks = ranks[ranks <= limit]
    return float(ranks.mean()) if ranks.size else float("nan")


def run_trial(kind: ExperimentKind, market: Market, target: Optional[int], trial: int, seed: int) -> TrialRecord:
    n, m = market.num_doctors, market.num_hospitals
    base = dict(trial=trial, kind=kind.value, n=n, m=m, seed=seed)

    if kind is ExperimentKind.BALANCED:
        profile = generate_uniform_profile(market, seed)
        trace = run_dpda(profile)
        d_ranks = side_ranks(profile, trace.matching, Side.DOCTOR)
        h_ranks = side_ranks(profile, trace.matching, Side.HOSPITAL)
        lazy = run_dpda_prime(market, splitmix64(seed ^ LAZY_STREAM))
        return TrialRecord(
            **base,
            total_proposals=trace.total_proposals,
            mean_doctor_rank=_mean_rank(d_ranks),
            mean_hospital_rank=_mean_rank(h_ranks, limit=n),
            hstar_rank_dpda=int(h_ranks[HSTAR]),
            lazy_total_proposals=lazy.total_proposals,
        )

    if kind is ExperimentKind.UNBALANCED:
        profile = generate_uniform_profile(market, seed)
        hpda = run_hpda(profile)
        dpda = run_dpda(profile)
        h_hpda = side_ranks(profile, hpda.matching, Side.HOSPITAL)
        h_dpda = side_ranks(profile, dpda.matching, Side.HOSPITAL)
        return TrialRecord(
            **base,
            total_proposals=hpda.total_proposals,
            mean_doctor_rank=_mean_rank(side_ranks(profile, hpda.matching, Side.DOCTOR)),
            mean_hospital_rank=_mean_rank(h_hpda, limit=n),
            hstar_rank_hpda=int(h_hpda[HSTAR]),
            hstar_rank_dpda=int(h_dpda[HSTAR]),
            dpda_mean_doctor_rank=_mean_rank(side_ranks(profile, dpda.matching, Side.DOCTOR)),
            dpda_mean_hospital_rank=_mean_rank(h_dpda, limit=n),
        )

    if kind is ExperimentKind.REJECTOR_TAIL:
        lazy = run_dpda_prime_rejector(market, target, seed)
        return TrialRecord(**base, total_proposals=lazy.total_proposals, ybar=lazy.proposals_to_target)

    if kind is ExperimentKind.COUPLING_CHECK:
        run = coupled_run(market, seed)
        return TrialRecord(**base, total_proposals=run.filtered_total, lazy_total_proposals=run.lazy_total)

    raise ValueError(f"unknown experiment kind {kind!r}")


def _run_trial_args(args):
    return run_trial(*args)


def run_experiment(config: ExperimentConfig, jobs: Optional[int] = 1) -> ExperimentReport:
    """Run every trial of ``config``; ``jobs`` > 1 fans trials out to processes."""
    tasks = [
        (config.kind, config.market, config.target_hospital, t, trial_seed(config.master_seed, t))
        for t in range(config.trials)
    ]
    jobs = jobs or os.cpu_count() or 1
    if jobs > 1 and config.trials > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(_run_trial_args, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))
    else:
        records = [run_trial(*t) for t in tasks]
    return ExperimentReport(config, records)


def _checked(config: ExperimentConfig, kind: ExperimentKind) -> ExperimentConfig:
    if config.kind is not kind:
        raise ValueError(f"expected a {kind.value} config, got {config.kind.value}")
    return config


def run_balanced_experiment(config: ExperimentConfig, jobs: Optional[int] = 1) -> ExperimentReport:
    """Doctor-proposing DA on fresh uniform profiles, plus one lazy run per trial."""
    return run_experiment(_checked(config, ExperimentKind.BALANCED), jobs)


def run_unbalanced_experiment(config: ExperimentConfig, jobs: Optional[int] = 1) -> ExperimentReport:
    """Both one-sided optimal matchings with one extra hospital; tracks hospital 0."""
    return run_experiment(_checked(config, ExperimentKind.UNBALANCED), jobs)


def run_rejector_tail_experiment(config: ExperimentConfig, jobs: Optional[int] = 1) -> ExperimentReport:
    return run_experiment(_checked(config, ExperimentKind.REJECTOR_TAIL), jobs)


def run_coupling_experiment(config: ExperimentConfig, jobs: Optional[int] = 1) -> ExperimentReport:
    return run_experiment(_checked(config, ExperimentKind.COUPLING_CHECK), jobs)


def summarize(report: ExperimentReport) -> list[dict]:
    """One row per recorded metric: count, mean, sd, se, min, max and its baseline."""
    if not report.records:
        raise ValueError("no trials")
    wanted = _METRIC_BASELINE.get(report.config.kind, {})
    rows = []
    for name, agg in compute_aggregates(report.records).items():
        row = {"metric": name, **asdict(agg), "baseline": "", "baseline_formula": "", "baseline_value": None}
        if name in wanted:
            b = report.baselines[wanted[name]]
            row.update(baseline=wanted[name], baseline_formula=b["formula"], baseline_value=b["value"])
        rows.append(row)
    return rows


def format_summary(report: ExperimentReport) -> str:
    lines = [f"# {report.config.kind.value}: n={report.config.market.num_doctors} "
             f"m={report.config.market.num_hospitals} trials={report.config.trials} "
             f"seed={report.config.master_seed}"]
    header = f"{'metric':<24}{'mean':>12}{'sd':>12}{'se':>10}{'min':>10}{'max':>10}  baseline"
    lines.append(header)
    for row in summarize(report):
        base = ""
        if row["baseline"]:
            base = f"{row['baseline_formula']} = {row['baseline_value']:.4f}"
        lines.append(
            f"{row['metric']:<24}{row['mean']:>12.4f}{row['sd']:>12.4f}{row['se']:>10.4f}"
            f"{row['min']:>10.4g}{row['max']:>10.4g}  {base}"
        )
    for key, value in report.extras.items():
        lines.append(f"{key:<24}{value:>12.4f}")
    return "\n".join(lines)


# -- persistence ---------------------------------------------------------------


def csv_text(report: ExperimentReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for rec in report.records:
        row = (getattr(rec, c) for c in CSV_COLUMNS)
        writer.writerow(["" if v is None else repr(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def write_csv(report: ExperimentReport, path) -> None:
    Path(path).write_text(csv_text(report), encoding="utf-8")


def write_json(report: ExperimentReport, path) -> None:
    Path(path).write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")


def read_csv(path) -> list[TrialRecord]:
    records = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            values = {}
            for col in CSV_COLUMNS:
                raw = row.get(col, "")
                if col == "kind":
                    values[col] = raw
                elif raw == "":
                    values[col] = None
                else:
                    values[col] = int(raw) if col in INT_COLUMNS else float(raw)
            records.append(TrialRecord(**values))
    return records


def load_report(csv_path, json_path, rel_tol: float = 1e-9) -> ExperimentReport:
    """Read a report back and check its aggregates against the per-trial rows."""
    data = json.loads(Path(json_path).read_text(encoding="utf-8"))
    c = data["config"]
    config = ExperimentConfig(
        Market(c["num_doctors"], c["num_hospitals"]), c["trials"], c["master_seed"], c["kind"], c["target_hospital"]
    )
    records = read_csv(csv_path)
    if len(records) != config.trials:
        raise ValueError(f"expected {config.trials} trial rows, found {len(records)}")
    stored = {k: Aggregate(**v) for k, v in data["aggregates"].items()}
    fresh = compute_aggregates(records)
    if stored.keys() != fresh.keys():
        raise ValueError(f"aggregate metrics differ: {sorted(stored)} vs {sorted(fresh)}")
    for name, agg in fresh.items():
        for attr in ("count", "mean", "sd", "se", "min", "max"):
            a, b = getattr(agg, attr), getattr(stored[name], attr)
            if not math.isclose(a, b, rel_tol=rel_tol, abs_tol=1e-12):
                raise ValueError(f"aggregate {name}.{attr} inconsistent: stored {b}, recomputed {a}")
    return ExperimentReport(config, records, stored, data["baselines"], data["extras"])
