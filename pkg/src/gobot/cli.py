"""Command-line entry point: training, transfer, experiments, evaluation,
data validation, plotting, and an interactive semantic-frame chat mode."""

from __future__ import annotations

import argparse
import dataclasses
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .agent import (
    DialogueRunner,
    TrainingConfig,
    evaluate,
    train_run,
    warm_start,
)
from .domain import (
    ActionKind,
    DomainSchema,
    UnifiedSpace,
    build_unified_space,
    decode_action,
    kb_path_for,
    load_goals,
    load_schema,
    space_for_schema,
)
from .errors import DataError, GoBotError
from .harness import (
    EPOCH_COLUMNS,
    ExperimentPlan,
    read_aggregate_csv,
    run_plan,
)
from .kb import KnowledgeBase
from .neural import ReplayBuffer, load_weights, q_forward, rand_init, save_weights
from .simulator import USER, DialogueAct
from .tracker import DialogueTracker, state_dim
from .transfer import TransferSpec, initialize_weights

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_RUNTIME = 3


class _Parser(argparse.ArgumentParser):
    """argparse variant that exits 1 (not 2) on usage errors."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _setup_logging() -> None:
    level = os.environ.get("GOBOT_LOG", "info").lower()
    levels = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}
    logging.basicConfig(
        level=levels.get(level, logging.INFO),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


def _load_domain_args(args) -> tuple[DomainSchema, KnowledgeBase, UnifiedSpace]:
    """Load the active domain and its state/action space. The active schema
    unifies as the target of --source-schema, or as the source of
    --target-schema; slot ordering (and hence the manifest) depends on the
    roles, so they must match across train/transfer/eval invocations."""
    schema = load_schema(args.schema)
    kb_path = Path(args.kb) if getattr(args, "kb", None) else kb_path_for(schema, args.schema)
    kb = KnowledgeBase.from_file(kb_path, schema)
    source = getattr(args, "source_schema", None)
    target = getattr(args, "target_schema", None)
    if source and target:
        raise DataError("give at most one of --source-schema / --target-schema")
    if source:
        space = build_unified_space(load_schema(source), schema)
    elif target:
        space = build_unified_space(schema, load_schema(target))
    else:
        space = space_for_schema(schema)
    return schema, kb, space


def _load_config(args) -> TrainingConfig:
    overrides = {}
    if getattr(args, "epochs", None) is not None:
        overrides["n_epochs"] = args.epochs
    if getattr(args, "eval_epsilon", None) is not None:
        overrides["eval_epsilon"] = args.eval_epsilon
    overrides["seed"] = args.seed
    if getattr(args, "config", None):
        return TrainingConfig.from_file(args.config, **overrides)
    return TrainingConfig(**overrides)


def _write_epoch_csv(path: Path, reports, run_id: str, warm_started: bool) -> None:
    import csv

    with path.open("w", newline="", encoding="utf-8") as fh:
        fh.write(f"# warm_start={'yes' if warm_started else 'no'}\n")
        writer = csv.writer(fh)
        writer.writerow(EPOCH_COLUMNS)
        for rep in reports:
            writer.writerow([
                run_id, rep.epoch, repr(rep.train_success_rate),
                repr(rep.test_success_rate), repr(rep.mean_td_loss),
                rep.buffer_size, "1" if rep.flushed else "0",
                repr(rep.epsilon_success_rate),
            ])


# -- subcommands --------------------------------------------------------------

def cmd_train(args) -> int:
    schema, kb, space = _load_domain_args(args)
    goals = load_goals(args.goals, schema)
    goals_test = load_goals(args.test_goals, schema)
    config = _load_config(args)
    rng = np.random.default_rng(config.seed)
    runner = DialogueRunner(space, schema, kb, config.n_max_turns)

    if args.init_weights:
        weights = load_weights(args.init_weights)
        if weights.manifest_digest != space.manifest_digest:
            raise DataError("initial weights manifest does not match the schema-derived space")
    else:
        weights = rand_init(state_dim(space), config.hidden_size, space.n_actions,
                            space.manifest_digest, config.seed)

    buffer = ReplayBuffer(config.buffer_capacity)
    warm_started = not args.no_warm_start
    if warm_started:
        warm_start(runner, goals, config, buffer, rng)
    reports, weights = train_run(runner, config, goals, goals_test, weights, buffer, rng)

    out = Path(args.out)
    save_weights(weights, out)
    csv_path = Path(args.epoch_csv) if args.epoch_csv else out.with_suffix(".epochs.csv")
    _write_epoch_csv(csv_path, reports, run_id=out.stem, warm_started=warm_started)
    print(f"final train success rate: {reports[-1].train_success_rate:.3f}")
    print(f"final test success rate:  {reports[-1].test_success_rate:.3f}")
    print(f"weights written to {out}")
    return EXIT_OK


def cmd_eval(args) -> int:
    schema, kb, space = _load_domain_args(args)
    goals = load_goals(args.goals, schema)
    weights = load_weights(args.weights)
    if weights.manifest_digest != space.manifest_digest:
        raise DataError("weights manifest does not match the schema-derived space")
    runner = DialogueRunner(space, schema, kb, args.max_turns)
    rng = np.random.default_rng(args.seed) if args.eval_epsilon > 0 else None
    rate = evaluate(runner, weights, goals, args.n_per_goal, args.eval_epsilon, rng)
    print(f"success rate: {rate:.4f}")
    return EXIT_OK


def cmd_transfer(args) -> int:
    source_schema = load_schema(args.source_schema)
    target_schema = load_schema(args.target_schema)
    space = build_unified_space(source_schema, target_schema)
    source = load_weights(args.source)
    weights = initialize_weights(TransferSpec(source, space, args.seed))
    save_weights(weights, args.out)
    n_common = len(space.common_slot_indices)
    print(f"transferred {n_common}/{len(space.slots)} slots, "
          f"{len(space.common_action_indices)}/{space.n_actions} actions -> {args.out}")
    return EXIT_OK


def cmd_experiment(args) -> int:
    sizes = tuple(int(s) for s in args.sizes.split(","))
    variants = tuple(args.variants.split(","))
    epochs = args.epochs if args.epochs is not None else 30
    repeats = args.repeats
    if args.paper_scale:
        sizes, repeats, epochs = (5, 10, 20, 30, 50, 120), 100, 50
    config = (TrainingConfig.from_file(args.config, n_epochs=epochs) if args.config
              else TrainingConfig(n_epochs=epochs))
    plan = ExperimentPlan(
        source_schema=args.source_schema,
        target_schema=args.target_schema,
        source_goals=args.source_goals,
        source_test_goals=args.source_test_goals,
        target_goals=args.goals,
        target_test_goals=args.test_goals,
        out_dir=args.out_dir,
        sizes=sizes,
        repeats=repeats,
        variants=variants,
        config=config,
        master_seed=args.seed,
        workers=args.workers,
    )
    aggregates = run_plan(plan)
    for agg in aggregates:
        print(f"{agg.variant:>6} n={agg.x:<4} test_sr={agg.mean:.3f} ±{agg.ci95:.3f} ({agg.n} runs)")
    print(f"outputs in {args.out_dir}")
    return EXIT_OK


def cmd_validate_data(args) -> int:
    schema = load_schema(args.schema)
    kb_path = Path(args.kb) if args.kb else kb_path_for(schema, args.schema)
    kb = KnowledgeBase.from_file(kb_path, schema)
    goals = load_goals(args.goals, schema)
    unsatisfiable = []
    for i, goal in enumerate(goals):
        if kb.query(goal.inform_slots).match_count == 0:
            unsatisfiable.append(i)
    print(f"schema {schema.name}: {len(schema.slots)} slots")
    print(f"kb: {len(kb.records)} records")
    print(f"goals: {len(goals)} loaded, {len(unsatisfiable)} unsatisfiable")
    for i in unsatisfiable:
        print(f"  goal {i} has no KB record matching its constraints: "
              f"{goals[i].inform_slots}")
    return EXIT_OK


def cmd_chat(args) -> int:
    schema, kb, space = _load_domain_args(args)
    weights = load_weights(args.weights)
    if weights.manifest_digest != space.manifest_digest:
        raise DataError("weights manifest does not match the schema-derived space")
    tracker = DialogueTracker(space, schema, kb, args.max_turns)
    runner = DialogueRunner(space, schema, kb, args.max_turns)

    requested: set[str] = set()
    fulfilled: dict[str, str] = {}
    pending_action = None  # last agent action, folded in with the next user act
    print(f"chatting with {schema.name} agent at the semantic-frame level")
    print("commands: inform <slot>=<value> | request <slot> | close")
    closed = False
    for line in sys.stdin:
        line = line.strip()
        if not line:
            continue
        act, err = _parse_chat_line(line, schema)
        if err:
            print(err)
            continue
        if act.intent == "close":
            closed = True
            break
        tracker.update(act, pending_action)
        idx = int(np.argmax(q_forward(weights, tracker.embed())))
        action = runner.resolve(decode_action(space, idx), tracker.constraints)
        requested |= set(act.request_slots)
        if action.kind is ActionKind.INFORM and action.slot in requested:
            fulfilled[action.slot] = action.value
        print(f"agent: {action}")
        pending_action = action
        if action.kind is ActionKind.CLOSE:
            closed = True
            break
    if not closed:
        print("dialogue left open")
        return EXIT_OK
    answered = bool(requested) and requested <= set(fulfilled)
    consistent = kb.query({**tracker.constraints, **fulfilled}).match_count >= 1
    verdict = "SUCCESS" if (answered and consistent) else "FAILURE"
    print(f"dialogue ended: {verdict}")
    return EXIT_OK


def _parse_chat_line(line: str, schema: DomainSchema):
    """Parse one user chat line into a DialogueAct, or return a usage hint."""
    parts = line.split(None, 1)
    cmd = parts[0].lower()
    if cmd == "close":
        return DialogueAct(USER, "close"), None
    if cmd == "inform":
        if len(parts) < 2 or "=" not in parts[1]:
            return None, "usage: inform <slot>=<value>"
        slot, _, value = parts[1].partition("=")
        slot, value = slot.strip(), value.strip()
        if slot not in schema.slot_set:
            return None, f"warning: unknown slot {slot!r} (known: {', '.join(schema.slots)})"
        return DialogueAct(USER, "inform", inform_slots={slot: value}), None
    if cmd == "request":
        if len(parts) < 2:
            return None, "usage: request <slot>"
        slot = parts[1].strip()
        if slot not in schema.slot_set:
            return None, f"warning: unknown slot {slot!r} (known: {', '.join(schema.slots)})"
        return DialogueAct(USER, "request", request_slots=frozenset({slot})), None
    return None, "usage: inform <slot>=<value> | request <slot> | close"


def cmd_plot(args) -> int:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    aggs = read_aggregate_csv(args.input)
    if not aggs:
        raise DataError(f"no rows in {args.input}")
    fig, ax = plt.subplots(figsize=(6, 4))
    for variant in sorted({a.variant for a in aggs}):
        rows = sorted((a for a in aggs if a.variant == variant), key=lambda a: a.x)
        xs = [a.x for a in rows]
        means = [a.mean for a in rows]
        los = [a.mean - a.ci95 for a in rows]
        his = [a.mean + a.ci95 for a in rows]
        ax.plot(xs, means, marker="o", label=variant)
        ax.fill_between(xs, los, his, alpha=0.2)
    ax.set_xlabel(args.xlabel)
    ax.set_ylabel("success rate")
    ax.set_ylim(-0.02, 1.02)
    ax.legend()
    if args.title:
        ax.set_title(args.title)
    fig.tight_layout()
    fig.savefig(args.out, metadata={"Date": None} if str(args.out).endswith(".svg") else None)
    print(f"plot written to {args.out}")
    return EXIT_OK


# -- argument wiring ----------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="gobot", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a dialogue policy on one domain")
    p.add_argument("--schema", required=True)
    p.add_argument("--goals", required=True)
    p.add_argument("--test-goals", required=True, dest="test_goals")
    p.add_argument("--kb", help="override the schema's kb reference")
    p.add_argument("--source-schema", dest="source_schema",
                   help="unify with this domain as the source (active schema is the target)")
    p.add_argument("--target-schema", dest="target_schema",
                   help="unify with this domain as the target (active schema is the source)")
    p.add_argument("--config", help="TrainingConfig JSON file")
    p.add_argument("--init-weights", dest="init_weights",
                   help="start from these weights (e.g. transfer output)")
    p.add_argument("--out", required=True, help="weight file to write")
    p.add_argument("--epoch-csv", dest="epoch_csv")
    p.add_argument("--no-warm-start", dest="no_warm_start", action="store_true")
    p.add_argument("--epochs", type=int)
    p.add_argument("--eval-epsilon", dest="eval_epsilon", type=float)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="measure a policy's success rate")
    p.add_argument("--schema", required=True)
    p.add_argument("--goals", required=True)
    p.add_argument("--weights", required=True)
    p.add_argument("--kb")
    p.add_argument("--source-schema", dest="source_schema")
    p.add_argument("--target-schema", dest="target_schema")
    p.add_argument("--n-per-goal", dest="n_per_goal", type=int, default=3)
    p.add_argument("--max-turns", dest="max_turns", type=int, default=20)
    p.add_argument("--eval-epsilon", dest="eval_epsilon", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("transfer", help="initialize target weights from a source model")
    p.add_argument("--source", required=True, help="source weight file")
    p.add_argument("--source-schema", required=True, dest="source_schema")
    p.add_argument("--target-schema", required=True, dest="target_schema")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_transfer)

    p = sub.add_parser("experiment", help="run a repeated-training experiment grid")
    p.add_argument("--source-schema", required=True, dest="source_schema")
    p.add_argument("--target-schema", required=True, dest="target_schema")
    p.add_argument("--source-goals", required=True, dest="source_goals")
    p.add_argument("--source-test-goals", required=True, dest="source_test_goals")
    p.add_argument("--goals", required=True, help="target-domain training goals")
    p.add_argument("--test-goals", required=True, dest="test_goals")
    p.add_argument("--out-dir", required=True, dest="out_dir")
    p.add_argument("--sizes", default="5,10,20,30,50")
    p.add_argument("--repeats", type=int, default=20)
    p.add_argument("--epochs", type=int)
    p.add_argument("--variants", default="tl_ws,ws")
    p.add_argument("--config")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--paper-scale", dest="paper_scale", action="store_true",
                   help="120-goal sizes, 100 repeats, 50 epochs")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("chat", help="talk to a trained agent with semantic frames")
    p.add_argument("--schema", required=True)
    p.add_argument("--weights", required=True)
    p.add_argument("--kb")
    p.add_argument("--source-schema", dest="source_schema")
    p.add_argument("--target-schema", dest="target_schema")
    p.add_argument("--max-turns", dest="max_turns", type=int, default=20)
    p.set_defaults(func=cmd_chat)

    p = sub.add_parser("plot", help="line plot of an aggregate CSV")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--title", default="")
    p.add_argument("--xlabel", default="training goals")
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("validate-data", help="check goals against a schema and KB")
    p.add_argument("--schema", required=True)
    p.add_argument("--goals", required=True)
    p.add_argument("--kb")
    p.set_defaults(func=cmd_validate_data)

    return parser


def main(argv: list[str] | None = None) -> int:
    _setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        return args.func(args)
    except DataError as exc:
        log.error("%s", exc)
        return EXIT_DATA
    except GoBotError as exc:
        log.error("%s", exc)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
