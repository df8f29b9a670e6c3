"""Experiment harness: goal-subset sampling, repeated seeded runs over the
{transfer, warm-start} grid, and 95% confidence-interval aggregation."""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np

from .agent import DialogueRunner, EpochReport, TrainingConfig, train_run, warm_start
from .domain import DomainSchema, UnifiedSpace, build_unified_space, kb_path_for, load_goals, load_schema
from .errors import WarmStartError
from .kb import KnowledgeBase
from .neural import QWeights, ReplayBuffer, rand_init
from .tracker import state_dim
from .transfer import TransferSpec, initialize_weights

log = logging.getLogger(__name__)

# variant -> (use transfer, use warm start)
VARIANTS: dict[str, tuple[bool, bool]] = {
    "tl_ws": (True, True),
    "tl": (True, False),
    "ws": (False, True),
    "none": (False, False),
}

RUN_COLUMNS = ["run_id", "variant", "subset_size", "repeat", "seed",
               "final_train_sr", "final_test_sr", "failed"]
EPOCH_COLUMNS = ["run_id", "epoch", "train_sr", "test_sr", "loss",
                 "buffer_size", "flushed", "epsilon_sr"]
AGGREGATE_COLUMNS = ["variant", "x", "mean", "ci95", "n"]


@dataclass(frozen=True)
class ExperimentPlan:
    """Full description of one experiment grid."""

    source_schema: str
    target_schema: str
    source_goals: str
    source_test_goals: str
    target_goals: str
    target_test_goals: str
    out_dir: str
    sizes: tuple[int, ...] = (5, 10, 20, 30, 50, 120)
    repeats: int = 20
    variants: tuple[str, ...] = ("tl_ws", "tl", "ws", "none")
    config: TrainingConfig = TrainingConfig(n_epochs=30)
    master_seed: int = 0
    workers: int = 1

    def __post_init__(self) -> None:
        if self.repeats < 2:
            raise ValueError("repeats must be at least 2 for confidence intervals")
        unknown = set(self.variants) - set(VARIANTS)
        if unknown:
            raise ValueError(f"unknown variants {sorted(unknown)}")


@dataclass(frozen=True)
class AggregateResult:
    variant: str
    x: int
    mean: float
    ci95: float
    n: int


@dataclass
class RunRecord:
    run_id: str
    variant: str
    subset_size: int
    repeat: int
    seed: int
    final_train_sr: float
    final_test_sr: float
    failed: bool
    reports: list[EpochReport]


def mean_ci95(samples: list[float]) -> tuple[float, float]:
    """Sample mean and a normal-approximation 95% half-width (1.96 s / sqrt n)."""
    if len(samples) < 2:
        raise ValueError("need at least 2 samples for a confidence interval")
    arr = np.asarray(samples, dtype=float)
    mean = float(arr.mean())
    sd = float(arr.std(ddof=1))
    return mean, 1.96 * sd / math.sqrt(len(arr))


def derive_seed(master_seed: int, *parts) -> int:
    """Stable 63-bit seed from the master seed and a run's identifying parts,
    so adding variants or sizes never perturbs existing runs' streams."""
    token = ":".join(str(p) for p in (master_seed, *parts))
    digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big") >> 1


@lru_cache(maxsize=16)
def _load_domain(schema_path: str) -> tuple[DomainSchema, KnowledgeBase]:
    schema = load_schema(schema_path)
    kb = KnowledgeBase.from_file(kb_path_for(schema, schema_path), schema)
    return schema, kb


def _space_for(plan_source: str, plan_target: str) -> UnifiedSpace:
    source, _ = _load_domain(plan_source)
    target, _ = _load_domain(plan_target)
    return build_unified_space(source, target)


def train_source_model(plan: ExperimentPlan, repeat: int) -> QWeights:
    """Train one source-domain model for a repeat's seed, on the unified space."""
    space = _space_for(plan.source_schema, plan.target_schema)
    schema, kb = _load_domain(plan.source_schema)
    goals = load_goals(plan.source_goals, schema)
    goals_test = load_goals(plan.source_test_goals, schema)
    seed = derive_seed(plan.master_seed, "source", repeat)
    rng = np.random.default_rng(seed)
    config = dataclasses.replace(plan.config, seed=seed)
    runner = DialogueRunner(space, schema, kb, config.n_max_turns)
    weights = rand_init(state_dim(space), config.hidden_size, space.n_actions,
                        space.manifest_digest, seed)
    buffer = ReplayBuffer(config.buffer_capacity)
    warm_start(runner, goals, config, buffer, rng)
    reports, weights = train_run(runner, config, goals, goals_test, weights, buffer, rng)
    log.info("source model repeat %d: final train_sr=%.2f", repeat,
             reports[-1].train_success_rate)
    return weights


def run_cell(plan: ExperimentPlan, variant: str, size: int, repeat: int,
             source_weights: QWeights | None) -> RunRecord:
    """Execute one (variant, subset size, repeat) training run."""
    use_tl, use_ws = VARIANTS[variant]
    space = _space_for(plan.source_schema, plan.target_schema)
    schema, kb = _load_domain(plan.target_schema)
    goals_all = load_goals(plan.target_goals, schema)
    goals_test = load_goals(plan.target_test_goals, schema)
    seed = derive_seed(plan.master_seed, variant, size, repeat)
    rng = np.random.default_rng(seed)
    config = dataclasses.replace(plan.config, seed=seed)

    subset_idx = rng.choice(len(goals_all), size=size, replace=False)
    goals = [goals_all[i] for i in subset_idx]

    if use_tl:
        weights = initialize_weights(TransferSpec(source_weights, space, seed))
    else:
        weights = rand_init(state_dim(space), config.hidden_size, space.n_actions,
                            space.manifest_digest, seed)

    runner = DialogueRunner(space, schema, kb, config.n_max_turns)
    buffer = ReplayBuffer(config.buffer_capacity)
    run_id = f"{variant}-n{size}-r{repeat}"
    try:
        if use_ws:
            warm_start(runner, goals, config, buffer, rng)
    except WarmStartError as exc:
        log.warning("run %s failed warm start: %s", run_id, exc)
        return RunRecord(run_id, variant, size, repeat, seed, 0.0, 0.0, True, [])
    reports, _ = train_run(runner, config, goals, goals_test, weights, buffer, rng)
    return RunRecord(
        run_id, variant, size, repeat, seed,
        reports[-1].train_success_rate, reports[-1].test_success_rate, False, reports,
    )


def _run_cell_job(args: tuple) -> RunRecord:
    return run_cell(*args)


def run_plan(plan: ExperimentPlan) -> list[AggregateResult]:
    """Run every cell of the plan, write the CSV outputs, and return the
    by-size aggregates of final test success."""
    out_dir = Path(plan.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    needs_source = any(VARIANTS[v][0] for v in plan.variants)
    sources: dict[int, QWeights | None] = {r: None for r in range(plan.repeats)}
    if needs_source:
        log.info("training %d source models", plan.repeats)
        if plan.workers > 1:
            with ProcessPoolExecutor(max_workers=plan.workers) as pool:
                trained = pool.map(_train_source_job,
                                   [(plan, r) for r in range(plan.repeats)])
                sources = dict(zip(range(plan.repeats), trained))
        else:
            sources = {r: train_source_model(plan, r) for r in range(plan.repeats)}

    jobs = [
        (plan, variant, size, repeat, sources[repeat] if VARIANTS[variant][0] else None)
        for variant in plan.variants
        for size in plan.sizes
        for repeat in range(plan.repeats)
    ]
    log.info("running %d cells (%d workers)", len(jobs), plan.workers)
    if plan.workers > 1:
        with ProcessPoolExecutor(max_workers=plan.workers) as pool:
            records = list(pool.map(_run_cell_job, jobs, chunksize=1))
    else:
        records = [_run_cell_job(job) for job in jobs]
    records.sort(key=lambda r: (r.variant, r.subset_size, r.repeat))

    n_failed = sum(r.failed for r in records)
    if n_failed:
        log.warning("%d/%d runs failed warm start and are excluded from aggregates",
                    n_failed, len(records))

    _write_runs_csv(out_dir / "runs.csv", records)
    _write_epochs_csv(out_dir / "epochs.csv", records)
    aggregates = _write_aggregates(out_dir, plan, records)
    return aggregates


def _train_source_job(args: tuple) -> QWeights:
    return train_source_model(*args)


# -- CSV emission -----------------------------------------------------------

def _fmt(x) -> str:
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _write_runs_csv(path: Path, records: list[RunRecord]) -> None:
    rows = [[r.run_id, r.variant, r.subset_size, r.repeat, r.seed,
             r.final_train_sr, r.final_test_sr, r.failed] for r in records]
    _write_csv(path, RUN_COLUMNS, rows)


def _write_epochs_csv(path: Path, records: list[RunRecord]) -> None:
    rows = []
    for r in records:
        for rep in r.reports:
            rows.append([r.run_id, rep.epoch, rep.train_success_rate,
                         rep.test_success_rate, rep.mean_td_loss, rep.buffer_size,
                         rep.flushed, rep.epsilon_success_rate])
    _write_csv(path, EPOCH_COLUMNS, rows)


def _aggregate(groups: dict[tuple[str, int], list[float]]) -> list[AggregateResult]:
    out = []
    for (variant, x), values in sorted(groups.items()):
        if len(values) < 2:
            continue
        mean, ci = mean_ci95(values)
        out.append(AggregateResult(variant, x, mean, ci, len(values)))
    return out


def _write_aggregates(out_dir: Path, plan: ExperimentPlan,
                      records: list[RunRecord]) -> list[AggregateResult]:
    ok = [r for r in records if not r.failed]

    by_size_test: dict[tuple[str, int], list[float]] = {}
    by_size_train: dict[tuple[str, int], list[float]] = {}
    for r in ok:
        by_size_test.setdefault((r.variant, r.subset_size), []).append(r.final_test_sr)
        by_size_train.setdefault((r.variant, r.subset_size), []).append(r.final_train_sr)

    # learning curves are aggregated at the largest subset size in the plan
    curve_size = max(plan.sizes)
    by_epoch_test: dict[tuple[str, int], list[float]] = {}
    by_epoch_train: dict[tuple[str, int], list[float]] = {}
    for r in ok:
        if r.subset_size != curve_size:
            continue
        for rep in r.reports:
            by_epoch_test.setdefault((r.variant, rep.epoch), []).append(rep.test_success_rate)
            by_epoch_train.setdefault((r.variant, rep.epoch), []).append(rep.train_success_rate)

    results = {
        "aggregate_test_by_size.csv": _aggregate(by_size_test),
        "aggregate_train_by_size.csv": _aggregate(by_size_train),
        "aggregate_test_by_epoch.csv": _aggregate(by_epoch_test),
        "aggregate_train_by_epoch.csv": _aggregate(by_epoch_train),
    }
    for name, aggs in results.items():
        _write_csv(out_dir / name, AGGREGATE_COLUMNS,
                   [[a.variant, a.x, a.mean, a.ci95, a.n] for a in aggs])
    return results["aggregate_test_by_size.csv"]


def read_aggregate_csv(path: str | Path) -> list[AggregateResult]:
    """Load an aggregate CSV back into memory (used by plotting and tests)."""
    out = []
    with Path(path).open(newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            out.append(AggregateResult(
                variant=row["variant"], x=int(row["x"]), mean=float(row["mean"]),
                ci95=float(row["ci95"]), n=int(row["n"]),
            ))
    return out
