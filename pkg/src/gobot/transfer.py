"""Cross-domain weight transfer: initialize a target-domain Q-network by
copying source weights at the indices of shared slots and actions and
randomizing everything else."""

from __future__ import annotations

from dataclasses import dataclass

from .domain import DomainSchema, UnifiedSpace
from .errors import TransferError
from .neural import QWeights, rand_init
from .tracker import FeatureLayout, state_dim


@dataclass(frozen=True)
class TransferSpec:
    source_weights: QWeights
    space: UnifiedSpace
    fresh_seed: int


def common_indices(source_schema: DomainSchema, target_schema: DomainSchema,
                   space: UnifiedSpace) -> tuple[frozenset[int], frozenset[int]]:
    """Slot indices present in both schemas, and the action indices they own
    plus the slot-independent actions {greet, close}."""
    shared = source_schema.slot_set & target_schema.slot_set
    slot_idx = frozenset(i for i, s in enumerate(space.slots) if s in shared)
    action_idx = frozenset({0, 1}) | frozenset(
        i for k in slot_idx for i in (2 + 2 * k, 3 + 2 * k)
    )
    return slot_idx, action_idx


def transferable_feature_positions(space: UnifiedSpace) -> tuple[int, ...]:
    """State-vector positions whose input weights transfer from the source:
    the feature blocks of every common slot plus the shared non-slot blocks
    (intents, common agent actions, KB scalars, turn)."""
    layout = FeatureLayout.for_space(space)
    cols = set(layout.shared_columns(space.common_action_indices))
    for k in space.common_slot_indices:
        cols.update(layout.slot_columns(k))
    return tuple(sorted(cols))


def initialize_weights(spec: TransferSpec) -> QWeights:
    """Fresh random weights with source entries copied in at common positions.

    Copies, bit-identically: W1 rows for every transferable input feature,
    the per-action W2 column and b2 entry for every common action, and b1 in
    full (hidden units are not slot-addressable). Everything else keeps its
    seeded random value.
    """
    source = spec.source_weights
    space = spec.space
    if source.manifest_digest != space.manifest_digest:
        raise TransferError(
            f"source weights manifest {source.manifest_digest} does not match "
            f"unified space manifest {space.manifest_digest}"
        )
    d = state_dim(space)
    if source.d != d or source.n_actions != space.n_actions:
        raise TransferError(
            f"source weights shaped ({source.d}, {source.n_actions}) but space "
            f"requires ({d}, {space.n_actions})"
        )
    target = rand_init(d, source.h, space.n_actions, space.manifest_digest, spec.fresh_seed)
    cols = list(transferable_feature_positions(space))
    target.W1[cols, :] = source.W1[cols, :]
    target.b1[:] = source.b1
    for a in sorted(space.common_action_indices):
        target.W2[:, a] = source.W2[:, a]
        target.b2[a] = source.b2[a]
    return target
