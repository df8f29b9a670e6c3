"""Policy learning: the epsilon-greedy DQN agent, the rule-based benchmark
agent, warm starting, and the epoch training loop with its one-time buffer
flush."""

from __future__ import annotations

import dataclasses
import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .domain import (
    CLOSE,
    ActionKind,
    AgentAction,
    DomainSchema,
    UnifiedSpace,
    UserGoal,
    action_index,
    decode_action,
)
from .errors import DataError, WarmStartError
from .kb import NO_MATCH, KnowledgeBase
from .neural import Experience, QWeights, ReplayBuffer, q_forward, train_batch
from .simulator import UserSimulator
from .tracker import DialogueTracker

log = logging.getLogger(__name__)

Policy = Callable[[DialogueTracker, np.ndarray], int]


@dataclass(frozen=True)
class TrainingConfig:
    """Hyperparameters of one training run. Reward constants derive from
    n_max_turns: -1 per ongoing turn, -n_max_turns on failure, +2*n_max_turns
    on success."""

    n_epochs: int = 50
    n_dialogues: int = 100
    n_max_turns: int = 20
    epsilon: float = 0.05
    s_rule_based: float = 0.3
    warm_start_positive_fraction: float = 0.3
    warm_start_episode_cap: int = 5000
    gamma: float = 0.9
    learning_rate: float = 0.001
    batch_size: int = 16
    buffer_capacity: int = 10_000
    hidden_size: int = 80
    n_eval_train: int = 2
    n_eval_test: int = 3
    eval_epsilon: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError("epsilon must be in [0, 1]")
        if not 0.0 < self.warm_start_positive_fraction < 1.0:
            raise ValueError("warm_start_positive_fraction must be in (0, 1)")
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError("gamma must be in [0, 1)")
        for name in ("n_epochs", "n_dialogues", "n_max_turns", "batch_size",
                     "buffer_capacity", "hidden_size", "warm_start_episode_cap"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")

    @property
    def r_ongoing(self) -> float:
        return -1.0

    @property
    def r_negative(self) -> float:
        return -float(self.n_max_turns)

    @property
    def r_positive(self) -> float:
        return 2.0 * self.n_max_turns

    @classmethod
    def from_file(cls, path: str | Path, **overrides) -> "TrainingConfig":
        try:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise DataError(f"cannot read config {path}: {exc}") from exc
        unknown = set(raw) - {f.name for f in dataclasses.fields(cls)}
        if unknown:
            raise DataError(f"config {path} has unknown fields {sorted(unknown)}")
        raw.update(overrides)
        return cls(**raw)


@dataclass(frozen=True)
class EpochReport:
    """Success rates and training statistics for one epoch. ``flushed`` marks
    the epoch whose simulated dialogues triggered the one-time buffer flush;
    ``epsilon_success_rate`` is the rate over those epsilon-greedy dialogues,
    while train/test rates come from separate greedy evaluations."""

    epoch: int
    train_success_rate: float
    test_success_rate: float
    mean_td_loss: float
    buffer_size: int
    flushed: bool
    epsilon_success_rate: float


def select_action(weights: QWeights, s: np.ndarray, epsilon: float,
                  rng: np.random.Generator | None = None) -> int:
    """Epsilon-greedy over Q(s, .); greedy ties break to the lowest index."""
    if epsilon > 0.0:
        if rng is None:
            raise ValueError("epsilon > 0 requires an rng")
        if rng.random() < epsilon:
            return int(rng.integers(weights.n_actions))
    return int(np.argmax(q_forward(weights, s)))


def rule_policy_action(tracker: DialogueTracker) -> AgentAction:
    """Scripted benchmark policy. Gather constraints by requesting every
    domain slot not yet constrained or requested (canonical order), then
    answer the user's observed requests, then close."""
    schema = tracker.schema
    for slot in tracker.space.slots:
        if (slot in schema.slot_set and slot not in tracker.constraints
                and slot not in tracker.agent_requested):
            return AgentAction(ActionKind.REQUEST, slot)
    for slot in tracker.space.slots:
        if slot in tracker.user_requested and slot not in tracker.agent_informed:
            return AgentAction(ActionKind.INFORM, slot)
    return CLOSE


class DialogueRunner:
    """Drives complete semantic-frame dialogues between a policy and the
    simulator, producing replay experiences."""

    def __init__(self, space: UnifiedSpace, schema: DomainSchema,
                 kb: KnowledgeBase, n_max_turns: int = 20):
        self.space = space
        self.schema = schema
        self.kb = kb
        self.sim = UserSimulator(schema, kb, n_max_turns)
        self.tracker = DialogueTracker(space, schema, kb, n_max_turns)

    def resolve(self, action: AgentAction, constraints: dict[str, str]) -> AgentAction:
        """Attach a KB value to inform actions; slots outside the active domain
        get the no-match sentinel."""
        if action.kind is not ActionKind.INFORM:
            return action
        value = None
        if action.slot in self.schema.slot_set:
            value = self.kb.suggest(constraints, action.slot)
        return AgentAction(ActionKind.INFORM, action.slot, value if value is not None else NO_MATCH)

    def run(self, goal: UserGoal, policy: Policy) -> tuple[list[Experience], bool]:
        """Run one dialogue to completion; returns its experiences and outcome."""
        tracker = self.tracker
        tracker.reset()
        sim_state, user_act = self.sim.reset(goal)
        tracker.update(user_act)
        s = tracker.embed()
        experiences: list[Experience] = []
        while True:
            idx = policy(tracker, s)
            action = self.resolve(decode_action(self.space, idx), tracker.constraints)
            outcome = self.sim.step(sim_state, action)
            tracker.update(outcome.user_act, action)
            s_next = tracker.embed()
            experiences.append(Experience(s, idx, outcome.reward, s_next, outcome.done))
            s = s_next
            if outcome.done:
                return experiences, outcome.success

    def rule_policy(self) -> Policy:
        return lambda tracker, s: action_index(self.space, rule_policy_action(tracker))

    def dqn_policy(self, weights: QWeights, epsilon: float,
                   rng: np.random.Generator | None) -> Policy:
        return lambda tracker, s: select_action(weights, s, epsilon, rng)


def warm_start(runner: DialogueRunner, goals: list[UserGoal],
               config: TrainingConfig, buffer: ReplayBuffer,
               rng: np.random.Generator) -> float:
    """Fill the buffer with experiences from successful rule-policy dialogues
    until they cover ``warm_start_positive_fraction`` of its capacity (or the
    episode cap is hit). Returns the achieved fraction."""
    target = int(config.warm_start_positive_fraction * buffer.capacity)
    policy = runner.rule_policy()
    successes = 0
    for _ in range(config.warm_start_episode_cap):
        if len(buffer) >= target:
            break
        goal = goals[rng.integers(len(goals))]
        experiences, success = runner.run(goal, policy)
        if success:
            successes += 1
            for e in experiences:
                buffer.push(e)
    if successes == 0:
        raise WarmStartError(
            f"no successful rule-policy dialogue in {config.warm_start_episode_cap} episodes"
        )
    achieved = len(buffer) / buffer.capacity
    log.info("warm start: %d successes, buffer %d/%d (%.1f%%)",
             successes, len(buffer), buffer.capacity, 100 * achieved)
    return achieved


def evaluate(runner: DialogueRunner, weights: QWeights, goals: list[UserGoal],
             n_per_goal: int, epsilon: float = 0.0,
             rng: np.random.Generator | None = None) -> float:
    """Success rate of the policy over ``n_per_goal`` dialogues per goal."""
    if not goals:
        raise DataError("cannot evaluate on an empty goal list")
    policy = runner.dqn_policy(weights, epsilon, rng)
    successes = 0
    if epsilon == 0.0:
        # greedy dialogues are fully deterministic, so one run per goal decides all repeats
        for goal in goals:
            _, success = runner.run(goal, policy)
            successes += n_per_goal * int(success)
    else:
        for goal in goals:
            for _ in range(n_per_goal):
                _, success = runner.run(goal, policy)
                successes += int(success)
    return successes / (len(goals) * n_per_goal)


def train_run(runner: DialogueRunner, config: TrainingConfig,
              goals_train: list[UserGoal], goals_test: list[UserGoal],
              init_weights: QWeights, buffer: ReplayBuffer | None = None,
              rng: np.random.Generator | None = None,
              ) -> tuple[list[EpochReport], QWeights]:
    """Epoch loop: simulate epsilon-greedy dialogues, flush the buffer the
    first time their success rate reaches the rule-based benchmark, then take
    one pass of uniformly sampled mini-batches and evaluate greedily."""
    if rng is None:
        rng = np.random.default_rng(config.seed)
    if buffer is None:
        buffer = ReplayBuffer(config.buffer_capacity)
    weights = init_weights.copy()
    flushed_ever = False
    reports: list[EpochReport] = []

    for epoch in range(config.n_epochs):
        target_weights = weights.copy()
        policy = runner.dqn_policy(weights, config.epsilon, rng)
        successes = 0
        for _ in range(config.n_dialogues):
            goal = goals_train[rng.integers(len(goals_train))]
            experiences, success = runner.run(goal, policy)
            successes += int(success)
            for e in experiences:
                buffer.push(e)
        epsilon_rate = successes / config.n_dialogues

        flushed_now = False
        if not flushed_ever and epsilon_rate >= config.s_rule_based:
            buffer.flush()
            flushed_ever = True
            flushed_now = True

        losses = []
        if len(buffer) > 0:
            n_batches = math.ceil(len(buffer) / config.batch_size)
            for _ in range(n_batches):
                batch = buffer.sample(min(config.batch_size, len(buffer)), rng)
                weights, loss = train_batch(weights, target_weights, batch,
                                            config.learning_rate, config.gamma)
                losses.append(loss)

        train_sr = evaluate(runner, weights, goals_train, config.n_eval_train,
                            config.eval_epsilon, rng)
        test_sr = evaluate(runner, weights, goals_test, config.n_eval_test,
                           config.eval_epsilon, rng)
        reports.append(EpochReport(
            epoch=epoch,
            train_success_rate=train_sr,
            test_success_rate=test_sr,
            mean_td_loss=float(np.mean(losses)) if losses else 0.0,
            buffer_size=len(buffer),
            flushed=flushed_now,
            epsilon_success_rate=epsilon_rate,
        ))
        log.debug("epoch %d: eps_sr=%.2f train=%.2f test=%.2f loss=%.4f buffer=%d%s",
                  epoch, epsilon_rate, train_sr, test_sr, reports[-1].mean_td_loss,
                  len(buffer), " FLUSH" if flushed_now else "")
    return reports, weights
