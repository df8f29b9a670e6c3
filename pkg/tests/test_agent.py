import dataclasses
import json

import numpy as np
import pytest

from gobot.agent import (
    DialogueRunner,
    TrainingConfig,
    evaluate,
    rule_policy_action,
    select_action,
    train_run,
    warm_start,
)
from gobot.domain import (
    ActionKind,
    AgentAction,
    UserGoal,
    action_index,
    space_for_schema,
)
from gobot.errors import DataError, WarmStartError
from gobot.kb import NO_MATCH, KnowledgeBase
from gobot.neural import QWeights, ReplayBuffer, rand_init
from gobot.tracker import state_dim

from conftest import schema_of


def small_config(**overrides):
    base = dict(n_epochs=3, n_dialogues=6, buffer_capacity=200, hidden_size=12,
                n_eval_train=1, n_eval_test=1, warm_start_episode_cap=500)
    base.update(overrides)
    return TrainingConfig(**base)


@pytest.fixture()
def toy_runner(toy_space, toy_schema, toy_kb):
    return DialogueRunner(toy_space, toy_schema, toy_kb, n_max_turns=20)


def toy_goals():
    return [
        UserGoal(inform_slots={"date": "friday"}, request_slots=frozenset({"theater"})),
        UserGoal(inform_slots={"city": "springfield"},
                 request_slots=frozenset({"theater", "date"})),
        UserGoal(inform_slots={"city": "shelbyville", "date": "sunday"},
                 request_slots=frozenset({"theater"})),
    ]


def fixed_q_weights(space, q_values):
    """Zero net whose output biases pin the Q-values."""
    d = state_dim(space)
    return QWeights(np.zeros((d, 2)), np.zeros(2), np.zeros((2, space.n_actions)),
                    np.array(q_values, dtype=float), "test", 0)


# -- select_action -------------------------------------------------------------


def test_greedy_argmax_and_ties():
    w = QWeights(np.zeros((1, 1)), np.zeros(1), np.zeros((1, 3)),
                 np.array([1.0, 2.0, 0.5]), "t", 0)
    assert select_action(w, np.zeros(1), 0.0) == 1
    w_tie = QWeights(np.zeros((1, 1)), np.zeros(1), np.zeros((1, 3)),
                     np.array([2.0, 2.0, 0.5]), "t", 0)
    assert select_action(w_tie, np.zeros(1), 0.0) == 0  # ties break low


def test_epsilon_one_uniform():
    w = QWeights(np.zeros((1, 1)), np.zeros(1), np.zeros((1, 4)),
                 np.array([9.0, 0.0, 0.0, 0.0]), "t", 0)
    rng = np.random.default_rng(11)
    counts = np.bincount(
        [select_action(w, np.zeros(1), 1.0, rng) for _ in range(10_000)], minlength=4)
    freqs = counts / 10_000
    assert np.abs(freqs - 0.25).max() < 0.02


def test_epsilon_mixture_rate():
    # argmax frequency should be (1 - eps) + eps/3 = 0.95 + 0.0167 within +-0.02
    w = QWeights(np.zeros((1, 1)), np.zeros(1), np.zeros((1, 3)),
                 np.array([0.0, 5.0, 0.0]), "t", 0)
    rng = np.random.default_rng(7)
    hits = sum(select_action(w, np.zeros(1), 0.05, rng) == 1 for _ in range(10_000))
    assert abs(hits / 10_000 - (0.95 + 0.05 / 3)) < 0.02


def test_epsilon_without_rng_rejected():
    w = QWeights(np.zeros((1, 1)), np.zeros(1), np.zeros((1, 2)), np.zeros(2), "t", 0)
    with pytest.raises(ValueError):
        select_action(w, np.zeros(1), 0.5, None)


# -- rule policy ----------------------------------------------------------------


def test_rule_policy_requests_first(toy_runner):
    tracker = toy_runner.tracker
    tracker.reset()
    from gobot.simulator import USER, DialogueAct

    tracker.update(DialogueAct(USER, "request", request_slots=frozenset({"theater"})))
    action = rule_policy_action(tracker)
    assert action == AgentAction(ActionKind.REQUEST, "city")  # first domain slot


def test_rule_policy_answers_then_closes(toy_runner, toy_kb):
    from gobot.simulator import USER, DialogueAct

    tracker = toy_runner.tracker
    tracker.reset()
    tracker.update(DialogueAct(USER, "request",
                               inform_slots={"date": "friday"},
                               request_slots=frozenset({"theater"})))
    # pretend the constraint-gathering phase already ran
    tracker.constraints.update({"city": "springfield", "theater": "dontcare"})
    tracker.agent_requested.update({"city", "date", "theater"})
    action = rule_policy_action(tracker)
    assert action == AgentAction(ActionKind.INFORM, "theater")
    resolved = toy_runner.resolve(action, tracker.constraints)
    assert resolved.value == "alpha"  # kb_suggest under the tracked constraints
    tracker.agent_informed.add("theater")
    assert rule_policy_action(tracker) == AgentAction(ActionKind.CLOSE)


def test_rule_policy_full_dialogues_succeed(toy_runner):
    policy = toy_runner.rule_policy()
    for goal in toy_goals():
        experiences, success = toy_runner.run(goal, policy)
        assert success
        assert experiences[-1].done and experiences[-1].r == 40.0
        assert all(e.r == -1.0 and not e.done for e in experiences[:-1])


def test_rule_policy_stays_in_domain():
    # unified space has an out-of-domain slot; the rule agent must skip it
    src = schema_of("city", "date", "theater", name="shows")
    tgt = schema_of("city", "date", "theater", "extra", name="bigger")
    from gobot.domain import build_unified_space

    space = build_unified_space(src, tgt)
    kb = KnowledgeBase(src, [{"city": "a", "date": "b", "theater": "c"}])
    runner = DialogueRunner(space, src, kb, n_max_turns=20)
    goal = UserGoal(inform_slots={"date": "b"}, request_slots=frozenset({"theater"}))
    experiences, success = runner.run(goal, runner.rule_policy())
    assert success
    requested = {space.actions[e.a].slot for e in experiences
                 if space.actions[e.a].kind is ActionKind.REQUEST}
    assert "extra" not in requested


# -- dialogue runner -----------------------------------------------------------


def test_scripted_replay_succeeds(toy_runner, toy_space):
    # known-good sequence for the minimal goal: answer the request, then close
    script = [
        action_index(toy_space, AgentAction(ActionKind.INFORM, "theater")),
        action_index(toy_space, AgentAction(ActionKind.CLOSE)),
    ]
    replay = iter(script)
    goal = toy_goals()[0]
    experiences, success = toy_runner.run(goal, lambda tracker, s: next(replay))
    assert success
    assert [e.a for e in experiences] == script
    assert experiences[-1].r == 40.0


def test_out_of_domain_inform_resolves_to_no_match():
    src = schema_of("a", name="left")
    tgt = schema_of("a", "b", name="right")
    from gobot.domain import build_unified_space

    space = build_unified_space(src, tgt)
    kb = KnowledgeBase(src, [{"a": "x"}])
    runner = DialogueRunner(space, src, kb, n_max_turns=20)
    resolved = runner.resolve(AgentAction(ActionKind.INFORM, "b"), {})
    assert resolved.value == NO_MATCH


def test_every_dialogue_has_one_terminal_experience(toy_runner):
    rng = np.random.default_rng(3)
    w = rand_init(state_dim(toy_runner.space), 8, toy_runner.space.n_actions, "t", 1)
    policy = toy_runner.dqn_policy(w, 1.0, rng)
    for goal in toy_goals() * 10:
        experiences, _ = toy_runner.run(goal, policy)
        terminals = [e for e in experiences if e.done]
        assert len(terminals) == 1 and terminals[0] is experiences[-1]
        assert terminals[0].r in (-20.0, 40.0)
        assert all(e.r == -1.0 for e in experiences[:-1])


# -- warm start ------------------------------------------------------------------


def test_warm_start_fills_to_fraction(toy_runner):
    config = small_config(buffer_capacity=100, warm_start_positive_fraction=0.3)
    buffer = ReplayBuffer(config.buffer_capacity)
    achieved = warm_start(toy_runner, toy_goals(), config, buffer,
                          np.random.default_rng(0))
    assert len(buffer) >= 30
    assert achieved == len(buffer) / 100
    # only successful dialogues were stored: every episode ends in +40
    rewards = [e.r for e in buffer.entries()]
    assert all(r in (-1.0, 40.0) for r in rewards)
    assert buffer.positive_count == sum(1 for r in rewards if r == 40.0)
    assert buffer.positive_count >= 1


def test_warm_start_failure(toy_schema, toy_space):
    # a KB that satisfies no goal: every rule dialogue fails
    kb = KnowledgeBase(toy_schema, [{"city": "elsewhere", "date": "never"}])
    runner = DialogueRunner(toy_space, toy_schema, kb, n_max_turns=20)
    config = small_config(warm_start_episode_cap=50)
    goal = UserGoal(inform_slots={"date": "friday"}, request_slots=frozenset({"theater"}))
    with pytest.raises(WarmStartError):
        warm_start(runner, [goal], config, ReplayBuffer(100), np.random.default_rng(0))


# -- evaluate --------------------------------------------------------------------


def test_evaluate_always_close_is_zero(toy_runner, toy_space):
    weights = fixed_q_weights(toy_space, [0.0, 9.0] + [0.0] * (toy_space.n_actions - 2))
    assert evaluate(toy_runner, weights, toy_goals(), 2) == 0.0


def test_evaluate_counts_rule_like_behaviour(toy_runner, toy_space):
    with pytest.raises(DataError):
        evaluate(toy_runner, fixed_q_weights(toy_space, [0.0] * toy_space.n_actions), [], 1)


def test_evaluate_epsilon_zero_deterministic(toy_runner, toy_space):
    w = rand_init(state_dim(toy_space), 8, toy_space.n_actions, "t", 5)
    r1 = evaluate(toy_runner, w, toy_goals(), 2)
    r2 = evaluate(toy_runner, w, toy_goals(), 2)
    assert r1 == r2


# -- train_run -------------------------------------------------------------------


def run_small(toy_runner, toy_space, seed=0, **cfg):
    config = small_config(**cfg)
    rng = np.random.default_rng(seed)
    init = rand_init(state_dim(toy_space), config.hidden_size,
                     toy_space.n_actions, toy_space.manifest_digest, seed)
    return train_run(toy_runner, config, toy_goals(), toy_goals()[:1], init, rng=rng)


def test_train_run_report_shape(toy_runner, toy_space):
    reports, weights = run_small(toy_runner, toy_space)
    assert len(reports) == 3
    assert [r.epoch for r in reports] == [0, 1, 2]
    for r in reports:
        assert 0.0 <= r.train_success_rate <= 1.0
        assert 0.0 <= r.test_success_rate <= 1.0
        assert 0.0 <= r.epsilon_success_rate <= 1.0
    assert weights.manifest_digest == toy_space.manifest_digest


def test_train_run_deterministic(toy_runner, toy_space):
    reports1, w1 = run_small(toy_runner, toy_space, seed=4)
    reports2, w2 = run_small(toy_runner, toy_space, seed=4)
    assert reports1 == reports2
    assert np.array_equal(w1.W1, w2.W1) and np.array_equal(w1.b2, w2.b2)


def test_flush_at_most_once_and_at_threshold(toy_runner, toy_space):
    # warm-started run on an easy domain crosses the 0.3 threshold quickly
    config = small_config(n_epochs=6, learning_rate=0.01)
    rng = np.random.default_rng(1)
    buffer = ReplayBuffer(config.buffer_capacity)
    warm_start(toy_runner, toy_goals(), config, buffer, rng)
    init = rand_init(state_dim(toy_space), config.hidden_size,
                     toy_space.n_actions, toy_space.manifest_digest, 1)
    reports, _ = train_run(toy_runner, config, toy_goals(), toy_goals()[:1],
                           init, buffer, rng)
    flushes = [r for r in reports if r.flushed]
    assert len(flushes) <= 1
    crossed = [r for r in reports if r.epsilon_success_rate >= config.s_rule_based]
    if crossed:
        assert flushes and flushes[0].epoch == crossed[0].epoch


def test_config_round_trip(tmp_path):
    config = TrainingConfig(n_epochs=7, learning_rate=0.01)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(dataclasses.asdict(config)))
    loaded = TrainingConfig.from_file(path)
    assert loaded == config
    loaded = TrainingConfig.from_file(path, n_epochs=9)
    assert loaded.n_epochs == 9
    path.write_text(json.dumps({"bogus_field": 1}))
    with pytest.raises(DataError):
        TrainingConfig.from_file(path)


def test_config_validation():
    with pytest.raises(ValueError):
        TrainingConfig(epsilon=1.5)
    with pytest.raises(ValueError):
        TrainingConfig(warm_start_positive_fraction=0.0)
    with pytest.raises(ValueError):
        TrainingConfig(n_epochs=0)
    config = TrainingConfig(n_max_turns=20)
    assert config.r_negative == -20.0 and config.r_positive == 40.0 and config.r_ongoing == -1.0
