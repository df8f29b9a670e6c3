"""Rule-based dialogue state tracker: accumulates the dialogue history and
produces the fixed-length state vector consumed by the Q-network."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .domain import ActionKind, AgentAction, DomainSchema, UnifiedSpace, action_index
from .kb import KnowledgeBase
from .simulator import DialogueAct

KB_COUNT_CLIP = 100  # match counts are clipped here, then scaled to [0,1]


@dataclass(frozen=True)
class FeatureLayout:
    """Block offsets of the state vector. Blocks, in order:

    user_intent        one-hot last user intent            |intents|
    last_inform        slots informed in last user act     |slots|
    last_request       slots requested in last user act    |slots|
    constrained        slots constrained so far            |slots|
    agent_requested    slots the agent requested so far    |slots|
    agent_action       one-hot last agent action           |actions|
    kb_available       per-slot availability under current constraints  |slots|
    kb_scalars         scaled match count, no-match flag   2
    turn               turn / n_max_turns                  1
    """

    n_intents: int
    n_slots: int
    n_actions: int
    user_intent: int
    last_inform: int
    last_request: int
    constrained: int
    agent_requested: int
    agent_action: int
    kb_available: int
    kb_scalars: int
    turn: int
    dim: int

    @classmethod
    def for_space(cls, space: UnifiedSpace) -> "FeatureLayout":
        i, s, a = len(space.intents), len(space.slots), len(space.actions)
        offsets = {}
        pos = 0
        for name, width in (
            ("user_intent", i),
            ("last_inform", s),
            ("last_request", s),
            ("constrained", s),
            ("agent_requested", s),
            ("agent_action", a),
            ("kb_available", s),
            ("kb_scalars", 2),
            ("turn", 1),
        ):
            offsets[name] = pos
            pos += width
        return cls(n_intents=i, n_slots=s, n_actions=a, dim=pos, **offsets)

    def slot_columns(self, slot_idx: int) -> tuple[int, ...]:
        """State-vector positions belonging to one slot's feature blocks."""
        return (
            self.last_inform + slot_idx,
            self.last_request + slot_idx,
            self.constrained + slot_idx,
            self.agent_requested + slot_idx,
            self.kb_available + slot_idx,
        )

    def shared_columns(self, common_action_indices: frozenset[int]) -> tuple[int, ...]:
        """Positions of non-slot blocks: intents, common agent actions, KB scalars, turn."""
        cols = list(range(self.user_intent, self.user_intent + self.n_intents))
        cols.extend(self.agent_action + a for a in sorted(common_action_indices))
        cols.extend((self.kb_scalars, self.kb_scalars + 1, self.turn))
        return tuple(cols)


def state_dim(space: UnifiedSpace) -> int:
    """Dimension of the embedded state vector for ``space``."""
    return FeatureLayout.for_space(space).dim


class DialogueTracker:
    """Per-dialogue history accumulator. ``embed()`` is a pure function of the
    tracked state; reuse across dialogues via ``reset()``."""

    def __init__(self, space: UnifiedSpace, schema: DomainSchema,
                 kb: KnowledgeBase, n_max_turns: int = 20):
        self.space = space
        self.schema = schema
        self.kb = kb
        self.n_max_turns = n_max_turns
        self.layout = FeatureLayout.for_space(space)
        self.reset()

    def reset(self) -> None:
        self.last_user_act: DialogueAct | None = None
        self.last_agent_action: AgentAction | None = None
        self.constraints: dict[str, str] = {}
        self.agent_requested: set[str] = set()
        self.agent_informed: set[str] = set()
        self.user_requested: set[str] = set()
        self.turn = 0
        self.kb_snapshot = self.kb.query({})

    def update(self, user_act: DialogueAct, agent_action: AgentAction | None = None) -> None:
        """Fold one exchange into the state: the agent action (if any) and the
        user act it elicited. Later informs overwrite earlier ones."""
        if agent_action is not None:
            self.last_agent_action = agent_action
            if agent_action.kind is ActionKind.REQUEST:
                self.agent_requested.add(agent_action.slot)
            elif agent_action.kind is ActionKind.INFORM:
                self.agent_informed.add(agent_action.slot)
            self.turn += 1
        self.last_user_act = user_act
        if user_act.inform_slots:
            self.constraints.update(user_act.inform_slots)
            self.kb_snapshot = self.kb.query(self.constraints)
        self.user_requested |= user_act.request_slots

    def embed(self) -> np.ndarray:
        """Fixed-length feature vector of the current dialogue state, all
        entries in [0, 1]."""
        lay = self.layout
        space = self.space
        v = np.zeros(lay.dim)
        if self.last_user_act is not None:
            v[lay.user_intent + space.intent_pos[self.last_user_act.intent]] = 1.0
            for slot in self.last_user_act.inform_slots:
                v[lay.last_inform + space.slot_pos[slot]] = 1.0
            for slot in self.last_user_act.request_slots:
                v[lay.last_request + space.slot_pos[slot]] = 1.0
        for slot in self.constraints:
            v[lay.constrained + space.slot_pos[slot]] = 1.0
        for slot in self.agent_requested:
            v[lay.agent_requested + space.slot_pos[slot]] = 1.0
        if self.last_agent_action is not None:
            v[lay.agent_action + action_index(space, self.last_agent_action)] = 1.0
        snapshot = self.kb_snapshot
        for slot, available in snapshot.per_slot_available.items():
            if available:
                v[lay.kb_available + space.slot_pos[slot]] = 1.0
        v[lay.kb_scalars] = min(snapshot.match_count, KB_COUNT_CLIP) / KB_COUNT_CLIP
        v[lay.kb_scalars + 1] = 1.0 if snapshot.match_count == 0 else 0.0
        v[lay.turn] = min(self.turn, self.n_max_turns) / self.n_max_turns
        return v
