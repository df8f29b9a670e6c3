"""Knowledge base: immutable record store answering constraint queries and
supplying values the agent can suggest for user requests."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .domain import DONTCARE, DomainSchema
from .errors import DataError

# Value an agent informs when the KB cannot supply one for a requested slot.
NO_MATCH = "no_match_available"


@dataclass(frozen=True)
class KbQueryResult:
    matching_records: tuple[dict[str, str], ...]
    match_count: int
    per_slot_available: dict[str, bool]


class KnowledgeBase:
    """Record store for one domain. Immutable after load; queries are memoized."""

    def __init__(self, schema: DomainSchema, records: list[dict[str, str]]):
        for i, rec in enumerate(records):
            unknown = set(rec) - schema.slot_set
            if unknown:
                raise DataError(f"kb record {i} names unknown slots {sorted(unknown)}")
            for slot, value in rec.items():
                if not isinstance(value, str) or not value:
                    raise DataError(f"kb record {i} slot {slot!r} has non-text or empty value")
        self.schema = schema
        self.records: tuple[dict[str, str], ...] = tuple(dict(r) for r in records)
        self._cache: dict[tuple[tuple[str, str], ...], KbQueryResult] = {}

    @classmethod
    def from_file(cls, path: str | Path, schema: DomainSchema) -> "KnowledgeBase":
        path = Path(path)
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise DataError(f"cannot read kb {path}: {exc}") from exc
        if not isinstance(raw, list):
            raise DataError(f"kb file {path} must contain a JSON list of records")
        return cls(schema, raw)

    def query(self, constraints: dict[str, str]) -> KbQueryResult:
        """Records matching every non-dontcare constraint by exact value equality.

        A record missing a constrained slot fails that constraint. ``dontcare``
        values are dropped before slot names are validated, so tracked dontcare
        answers for out-of-domain slots never reach the schema check.
        """
        effective = {s: v for s, v in constraints.items() if v != DONTCARE}
        unknown = set(effective) - self.schema.slot_set
        if unknown:
            raise DataError(f"query constrains unknown slots {sorted(unknown)}")
        key = tuple(sorted(effective.items()))
        cached = self._cache.get(key)
        if cached is not None:
            return cached
        items = list(effective.items())
        matching = tuple(
            rec for rec in self.records
            if all(rec.get(s) == v for s, v in items)
        )
        result = KbQueryResult(
            matching_records=matching,
            match_count=len(matching),
            per_slot_available={
                s: any(s in rec for rec in matching) for s in self.schema.slots
            },
        )
        if len(self._cache) < 100_000:
            self._cache[key] = result
        return result

    def suggest(self, constraints: dict[str, str], slot: str) -> str | None:
        """Value of ``slot`` from the first matching record that supplies it."""
        if slot not in self.schema.slot_set:
            raise DataError(f"cannot suggest unknown slot {slot!r}")
        for rec in self.query(constraints).matching_records:
            if slot in rec:
                return rec[slot]
        return None
