import numpy as np
import pytest

from gobot.domain import build_unified_space
from gobot.errors import TransferError
from gobot.neural import QWeights, rand_init
from gobot.tracker import FeatureLayout, state_dim
from gobot.transfer import (
    TransferSpec,
    common_indices,
    initialize_weights,
    transferable_feature_positions,
)

from conftest import schema_of


def constant_weights(space, h=6, fill=7.0):
    """Source net filled with a recognizable constant everywhere."""
    d = state_dim(space)
    return QWeights(
        W1=np.full((d, h), fill),
        b1=np.full(h, fill),
        W2=np.full((h, space.n_actions), fill),
        b2=np.full(space.n_actions, fill),
        manifest_digest=space.manifest_digest,
        seed=0,
    )


def test_common_indices_disjoint():
    src, tgt = schema_of("a", "b", name="s"), schema_of("c", "d", name="t")
    space = build_unified_space(src, tgt)
    slots, actions = common_indices(src, tgt, space)
    assert slots == frozenset()
    assert actions == frozenset({0, 1})


def test_common_indices_identical():
    schema = schema_of("a", "b")
    space = build_unified_space(schema, schema)
    slots, actions = common_indices(schema, schema, space)
    assert slots == frozenset(range(2))
    assert actions == frozenset(range(space.n_actions))


def test_common_indices_fixture_extension(restaurant_schema, tourist_schema,
                                          extension_space):
    slots, actions = common_indices(restaurant_schema, tourist_schema, extension_space)
    names = {extension_space.slots[i] for i in slots}
    assert names == set(restaurant_schema.slots)
    assert slots == extension_space.common_slot_indices
    assert actions == extension_space.common_action_indices


def test_full_copy_when_identical():
    schema = schema_of("a", "b", "c")
    space = build_unified_space(schema, schema)
    source = constant_weights(space)
    result = initialize_weights(TransferSpec(source, space, fresh_seed=99))
    for name in ("W1", "b1", "W2", "b2"):
        assert np.array_equal(getattr(result, name), getattr(source, name)), name


def test_no_common_slots_copies_only_shared_blocks():
    src, tgt = schema_of("a", "b", name="s"), schema_of("c", "d", name="t")
    space = build_unified_space(src, tgt)
    source = constant_weights(space)
    result = initialize_weights(TransferSpec(source, space, fresh_seed=1))
    layout = FeatureLayout.for_space(space)

    assert np.array_equal(result.b1, source.b1)
    copied = set(transferable_feature_positions(space))
    for k in range(layout.n_slots):
        for col in layout.slot_columns(k):
            assert col not in copied
            assert not np.array_equal(result.W1[col], source.W1[col])
    for col in copied:
        assert np.array_equal(result.W1[col], source.W1[col])
    # only greet/close transfer on the output side
    for a in range(space.n_actions):
        same = np.array_equal(result.W2[:, a], source.W2[:, a])
        assert same == (a in (0, 1))


def test_partial_overlap_copies_exactly_the_mapped_entries():
    # 2-slot source, 3-slot unified space, single common slot
    src = schema_of("shared", "only_src", name="s")
    tgt = schema_of("shared", "only_tgt_a", "only_tgt_b", name="t")
    space = build_unified_space(src, tgt)
    source = constant_weights(space)
    result = initialize_weights(TransferSpec(source, space, fresh_seed=5))
    layout = FeatureLayout.for_space(space)

    common_k = next(iter(space.common_slot_indices))
    assert space.slots[common_k] == "shared"
    expected_cols = set(layout.shared_columns(space.common_action_indices))
    expected_cols.update(layout.slot_columns(common_k))

    for col in range(layout.dim):
        same = np.array_equal(result.W1[col], source.W1[col])
        assert same == (col in expected_cols), f"feature column {col}"
    for a in range(space.n_actions):
        same_w = np.array_equal(result.W2[:, a], source.W2[:, a])
        same_b = result.b2[a] == source.b2[a]
        expected = a in space.common_action_indices
        assert same_w == expected and same_b == expected, f"action {a}"
    assert np.array_equal(result.b1, source.b1)
    assert result.manifest_digest == space.manifest_digest


def test_idempotent():
    src = schema_of("a", "b", name="s")
    tgt = schema_of("b", "c", name="t")
    space = build_unified_space(src, tgt)
    source = rand_init(state_dim(space), 6, space.n_actions, space.manifest_digest, 3)
    spec = TransferSpec(source, space, fresh_seed=12)
    one = initialize_weights(spec)
    two = initialize_weights(spec)
    for name in ("W1", "b1", "W2", "b2"):
        assert np.array_equal(getattr(one, name), getattr(two, name))


def test_manifest_mismatch_rejected():
    space = build_unified_space(schema_of("a", name="s"), schema_of("b", name="t"))
    bad = rand_init(state_dim(space), 4, space.n_actions, "0" * 16, seed=0)
    with pytest.raises(TransferError):
        initialize_weights(TransferSpec(bad, space, fresh_seed=0))


def test_shape_mismatch_rejected():
    space = build_unified_space(schema_of("a", name="s"), schema_of("b", name="t"))
    bad = rand_init(3, 4, space.n_actions, space.manifest_digest, seed=0)
    with pytest.raises(TransferError):
        initialize_weights(TransferSpec(bad, space, fresh_seed=0))


def test_functional_consequence_on_common_features():
    # a state supported only on transferable features must produce identical
    # hidden pre-activations through the copied input weights
    src = schema_of("shared", "only_src", name="s")
    tgt = schema_of("shared", "only_tgt", name="t")
    space = build_unified_space(src, tgt)
    source = rand_init(state_dim(space), 6, space.n_actions, space.manifest_digest, 8)
    result = initialize_weights(TransferSpec(source, space, fresh_seed=21))

    s = np.zeros(state_dim(space))
    for col in transferable_feature_positions(space):
        s[col] = 0.5
    assert np.allclose(s @ result.W1 + result.b1, s @ source.W1 + source.b1)
