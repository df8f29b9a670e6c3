"""Agenda-based user simulator: given a sampled goal it answers system actions
at the semantic-frame level, tracks its own progress, and adjudicates success
and rewards."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .domain import DONTCARE, ActionKind, AgentAction, DomainSchema, UserGoal
from .errors import DialogueProtocolError
from .kb import KnowledgeBase

USER = "user"
AGENT = "agent"


@dataclass(frozen=True)
class DialogueAct:
    """One semantic frame: intent plus inform pairs and request slots."""

    speaker: str
    intent: str
    inform_slots: dict[str, str] = field(default_factory=dict)
    request_slots: frozenset[str] = frozenset()


@dataclass
class SimulatorState:
    """Internal user state for one dialogue: goal, agenda, and progress."""

    goal: UserGoal
    agenda: list[DialogueAct]              # stack; top is the end
    informed: set[str]                     # constraint slots already conveyed
    fulfilled: dict[str, str]              # request slot -> value received
    turn: int = 0
    done: bool = False


@dataclass(frozen=True)
class StepOutcome:
    user_act: DialogueAct
    reward: float
    done: bool
    success: bool


def _inform_act(slot: str, value: str, intent: str = "inform") -> DialogueAct:
    return DialogueAct(USER, intent, inform_slots={slot: value})

def _request_act(slot: str) -> DialogueAct:
    return DialogueAct(USER, "request", request_slots=frozenset({slot}))


class UserSimulator:
    """Rule engine driving user behaviour; dialogue state is passed explicitly,
    so one simulator instance can serve many (sequential) dialogues."""

    def __init__(self, schema: DomainSchema, kb: KnowledgeBase, n_max_turns: int = 20):
        self.schema = schema
        self.kb = kb
        self.n_max_turns = n_max_turns
        self.r_ongoing = -1.0
        self.r_negative = -float(n_max_turns)
        self.r_positive = 2.0 * n_max_turns

    # -- episode control ----------------------------------------------------

    def reset(self, goal: UserGoal) -> tuple[SimulatorState, DialogueAct]:
        """Start a dialogue: emit the opening user act and stack the rest.

        The opening act requests the first goal request slot (canonical slot
        order) and informs the first ceil(|C|/2) constraint slots. Remaining
        goal items go on the agenda, requests below informs, so informs pop
        first.
        """
        req_order = [s for s in self.schema.slots if s in goal.request_slots]
        inf_order = [s for s in self.schema.slots if s in goal.inform_slots]
        n_init = math.ceil(len(inf_order) / 2)
        init_informs = inf_order[:n_init]

        agenda: list[DialogueAct] = []
        for slot in reversed(req_order[1:]):
            agenda.append(_request_act(slot))
        for slot in reversed(inf_order[n_init:]):
            agenda.append(_inform_act(slot, goal.inform_slots[slot]))

        first_act = DialogueAct(
            USER, "request",
            inform_slots={s: goal.inform_slots[s] for s in init_informs},
            request_slots=frozenset({req_order[0]}),
        )
        state = SimulatorState(
            goal=goal, agenda=agenda, informed=set(init_informs), fulfilled={},
        )
        return state, first_act

    def step(self, state: SimulatorState, agent_action: AgentAction) -> StepOutcome:
        """Advance the dialogue by one agent action and the user's response."""
        if state.done:
            raise DialogueProtocolError("step() called on a finished dialogue")
        state.turn += 1

        if agent_action.kind is ActionKind.CLOSE:
            state.done = True
            success = self.judge_success(state)
            reward = self.r_positive if success else self.r_negative
            return StepOutcome(DialogueAct(USER, "close"), reward, True, success)

        if agent_action.kind is ActionKind.REQUEST:
            user_act = self._respond_to_request(state, agent_action.slot)
        elif agent_action.kind is ActionKind.INFORM:
            user_act = self._respond_to_inform(state, agent_action.slot, agent_action.value)
        else:  # greet: repeat whatever is pending
            user_act = state.agenda[-1] if state.agenda else self._fallback_request(state)

        if state.turn >= self.n_max_turns:
            state.done = True
            return StepOutcome(user_act, self.r_negative, True, False)
        return StepOutcome(user_act, self.r_ongoing, False, False)

    def judge_success(self, state: SimulatorState) -> bool:
        """All requests answered and the combined assignment matches the KB."""
        goal = state.goal
        if not goal.request_slots <= set(state.fulfilled):
            return False
        combined = dict(goal.inform_slots)
        combined.update(state.fulfilled)
        return self.kb.query(combined).match_count >= 1

    # -- response rules -----------------------------------------------------

    def _respond_to_request(self, state: SimulatorState, slot: str) -> DialogueAct:
        constraints = state.goal.inform_slots
        if slot in constraints:
            state.informed.add(slot)
            return _inform_act(slot, constraints[slot])
        # never reveals request-slot answers; anything outside C is dontcare
        return _inform_act(slot, DONTCARE)

    def _respond_to_inform(self, state: SimulatorState, slot: str, value: str | None) -> DialogueAct:
        if value is None:
            raise DialogueProtocolError(f"agent informed {slot!r} without a value")
        goal = state.goal
        if slot in goal.request_slots:
            state.fulfilled[slot] = value
        if slot in goal.inform_slots and value != goal.inform_slots[slot]:
            state.informed.add(slot)
            return _inform_act(slot, goal.inform_slots[slot], intent="deny")
        return self._next_agenda_act(state)

    def _next_agenda_act(self, state: SimulatorState) -> DialogueAct:
        # skip items the dialogue already covered by other means
        while state.agenda:
            act = state.agenda.pop()
            if act.inform_slots:
                slot = next(iter(act.inform_slots))
                if slot in state.informed:
                    continue
                state.informed.add(slot)
                return act
            slot = next(iter(act.request_slots))
            if slot in state.fulfilled:
                continue
            return act
        return self._fallback_request(state)

    def _fallback_request(self, state: SimulatorState) -> DialogueAct:
        req_order = [s for s in self.schema.slots if s in state.goal.request_slots]
        for slot in req_order:
            if slot not in state.fulfilled:
                return _request_act(slot)
        # everything answered: keep the floor until the agent closes
        return _request_act(req_order[0])
