"""Goal-oriented dialogue policies: DQN training against an agenda-based user
simulator, with cross-domain weight transfer between overlapping or extending
domains."""

from .agent import (
    DialogueRunner,
    EpochReport,
    TrainingConfig,
    evaluate,
    rule_policy_action,
    select_action,
    train_run,
    warm_start,
)
from .domain import (
    DONTCARE,
    ActionKind,
    AgentAction,
    DomainSchema,
    UnifiedSpace,
    UserGoal,
    action_index,
    build_unified_space,
    decode_action,
    load_goals,
    load_schema,
    space_for_schema,
)
from .kb import NO_MATCH, KbQueryResult, KnowledgeBase
from .neural import (
    Experience,
    QWeights,
    ReplayBuffer,
    bellman_target,
    load_weights,
    q_forward,
    rand_init,
    save_weights,
    train_batch,
)
from .simulator import DialogueAct, SimulatorState, StepOutcome, UserSimulator
from .tracker import DialogueTracker, FeatureLayout, state_dim
from .transfer import TransferSpec, common_indices, initialize_weights

__version__ = "0.1.0"
