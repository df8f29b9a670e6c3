"""Domain schemas, user goals, the agent action catalog, and the unified
cross-domain state/action space with deterministic index assignment."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from .errors import DataError, OutOfSpaceError, SchemaConflictError

# Every schema must declare at least these user intents.
REQUIRED_INTENTS = ("inform", "request", "thanks", "deny", "close")

# Reserved value a user gives when asked about a slot outside their constraints.
DONTCARE = "dontcare"


class ActionKind(Enum):
    GREET = "greet"
    CLOSE = "close"
    REQUEST = "request"
    INFORM = "inform"


@dataclass(frozen=True)
class AgentAction:
    """A system action: slot-independent (greet/close) or slot-bound (request/inform).

    ``value`` is attached to inform actions when the dialogue manager resolves
    them against the knowledge base; it never participates in action indexing.
    """

    kind: ActionKind
    slot: str | None = None
    value: str | None = None

    def __post_init__(self) -> None:
        if self.kind in (ActionKind.GREET, ActionKind.CLOSE):
            if self.slot is not None:
                raise ValueError(f"{self.kind.value} action carries no slot")
        elif self.slot is None:
            raise ValueError(f"{self.kind.value} action requires a slot")

    def __str__(self) -> str:
        if self.kind is ActionKind.REQUEST:
            return f"request({self.slot})"
        if self.kind is ActionKind.INFORM:
            return f"inform({self.slot}={self.value})" if self.value else f"inform({self.slot})"
        return self.kind.value


GREET = AgentAction(ActionKind.GREET)
CLOSE = AgentAction(ActionKind.CLOSE)


@dataclass(frozen=True)
class DomainSchema:
    """Slot and intent inventory of one dialogue domain."""

    name: str
    slots: tuple[str, ...]
    user_intents: tuple[str, ...]
    kb_ref: str = ""
    slot_set: frozenset[str] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if not self.name or any(c.isspace() for c in self.name):
            raise DataError(f"invalid domain name: {self.name!r}")
        if not self.slots:
            raise DataError(f"domain {self.name}: slot list is empty")
        if len(set(self.slots)) != len(self.slots):
            raise DataError(f"domain {self.name}: duplicate slot names")
        missing = set(REQUIRED_INTENTS) - set(self.user_intents)
        if missing:
            raise DataError(f"domain {self.name}: missing required intents {sorted(missing)}")
        object.__setattr__(self, "slot_set", frozenset(self.slots))


@dataclass(frozen=True)
class UserGoal:
    """Hidden objective of one simulated user: constraints plus requests."""

    inform_slots: dict[str, str]
    request_slots: frozenset[str]

    def __post_init__(self) -> None:
        if not self.request_slots:
            raise DataError("goal has no request slots")
        overlap = set(self.inform_slots) & self.request_slots
        if overlap:
            raise DataError(f"slots both informed and requested: {sorted(overlap)}")


@dataclass(frozen=True)
class UnifiedSpace:
    """Merged slot/intent/action inventory shared by a source and target domain.

    Index assignment is deterministic: slots are ordered (sorted common, sorted
    source-only, sorted target-only); the action catalog is [greet, close]
    followed by [request(slot), inform(slot)] per slot in order.
    """

    slots: tuple[str, ...]
    intents: tuple[str, ...]
    actions: tuple[AgentAction, ...]
    common_slot_indices: frozenset[int]
    common_action_indices: frozenset[int]
    manifest_digest: str
    slot_pos: dict[str, int] = field(init=False, repr=False, compare=False)
    intent_pos: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "slot_pos", {s: i for i, s in enumerate(self.slots)})
        object.__setattr__(self, "intent_pos", {s: i for i, s in enumerate(self.intents)})

    @property
    def n_actions(self) -> int:
        return len(self.actions)


def _action_token(action: AgentAction) -> str:
    return action.kind.value if action.slot is None else f"{action.kind.value}:{action.slot}"


def manifest_digest(slots: tuple[str, ...], intents: tuple[str, ...],
                    actions: tuple[AgentAction, ...]) -> str:
    """Stable 64-bit checksum of the ordered inventories, as 16 hex chars."""
    payload = json.dumps(
        {"slots": list(slots), "intents": list(intents),
         "actions": [_action_token(a) for a in actions]},
        separators=(",", ":"),
    )
    return hashlib.blake2b(payload.encode("utf-8"), digest_size=8).hexdigest()


def _action_catalog(slots: tuple[str, ...]) -> tuple[AgentAction, ...]:
    actions: list[AgentAction] = [GREET, CLOSE]
    for slot in slots:
        actions.append(AgentAction(ActionKind.REQUEST, slot))
        actions.append(AgentAction(ActionKind.INFORM, slot))
    return tuple(actions)


def build_unified_space(source: DomainSchema, target: DomainSchema) -> UnifiedSpace:
    """Merge two schemas into one state/action space with stable indices."""
    common = source.slot_set & target.slot_set
    if common and set(source.user_intents) != set(target.user_intents):
        raise SchemaConflictError(
            f"domains {source.name} and {target.name} share slots {sorted(common)} "
            "but declare different user intents"
        )
    source_only = sorted(source.slot_set - common)
    target_only = sorted(target.slot_set - source.slot_set)
    slots = tuple(sorted(common)) + tuple(source_only) + tuple(target_only)
    intents = tuple(sorted(set(source.user_intents) | set(target.user_intents)))
    actions = _action_catalog(slots)
    common_slots = frozenset(i for i, s in enumerate(slots) if s in common)
    common_actions = frozenset({0, 1}) | frozenset(
        idx for k in common_slots for idx in (2 + 2 * k, 3 + 2 * k)
    )
    return UnifiedSpace(
        slots=slots,
        intents=intents,
        actions=actions,
        common_slot_indices=common_slots,
        common_action_indices=common_actions,
        manifest_digest=manifest_digest(slots, intents, actions),
    )


def space_for_schema(schema: DomainSchema) -> UnifiedSpace:
    """Single-domain space: the unified space of a schema with itself."""
    return build_unified_space(schema, schema)


def action_index(space: UnifiedSpace, action: AgentAction) -> int:
    """Position of ``action`` in the catalog; inverse of :func:`decode_action`."""
    if action.kind is ActionKind.GREET:
        return 0
    if action.kind is ActionKind.CLOSE:
        return 1
    k = space.slot_pos.get(action.slot)
    if k is None:
        raise OutOfSpaceError(f"slot {action.slot!r} not in unified space")
    return 2 + 2 * k + (1 if action.kind is ActionKind.INFORM else 0)


def decode_action(space: UnifiedSpace, index: int) -> AgentAction:
    """Catalog action at ``index``; inverse of :func:`action_index`."""
    if not 0 <= index < len(space.actions):
        raise OutOfSpaceError(f"action index {index} out of range [0, {len(space.actions)})")
    return space.actions[index]


def load_schema(path: str | Path) -> DomainSchema:
    """Read a domain schema file (JSON: name, slots, user_intents, kb)."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read schema {path}: {exc}") from exc
    try:
        return DomainSchema(
            name=raw["name"],
            slots=tuple(raw["slots"]),
            user_intents=tuple(raw["user_intents"]),
            kb_ref=raw.get("kb", ""),
        )
    except (KeyError, TypeError) as exc:
        raise DataError(f"malformed schema {path}: {exc}") from exc


def kb_path_for(schema: DomainSchema, schema_path: str | Path) -> Path:
    """Resolve a schema's kb reference relative to the schema file location."""
    ref = Path(schema.kb_ref)
    return ref if ref.is_absolute() else Path(schema_path).parent / ref


def validate_goal(goal: UserGoal, schema: DomainSchema) -> None:
    """Check a goal's slots against its owning schema."""
    unknown = (set(goal.inform_slots) | goal.request_slots) - schema.slot_set
    if unknown:
        raise DataError(f"goal names unknown slots {sorted(unknown)}")


def load_goals(path: str | Path, schema: DomainSchema) -> list[UserGoal]:
    """Read a user-goal file (JSON list), validating each record against ``schema``."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read goals {path}: {exc}") from exc
    if not isinstance(raw, list):
        raise DataError(f"goal file {path} must contain a JSON list")
    goals: list[UserGoal] = []
    for i, rec in enumerate(raw):
        try:
            goal = UserGoal(
                inform_slots=dict(rec["inform_slots"]),
                request_slots=frozenset(rec["request_slots"]),
            )
            validate_goal(goal, schema)
        except (DataError, KeyError, TypeError) as exc:
            raise DataError(f"goal record {i} in {path}: {exc}") from exc
        goals.append(goal)
    return goals
