"""Feature schemas, actions, the linear-SCM cost model, and classifiers."""

from .actions import (
    Action,
    ActionCatalog,
    ActionFunction,
    Intervention,
    Precondition,
    PreconditionError,
    apply_intervention,
    feasible_actions,
    is_applicable,
    parse_precondition,
    replay_states,
)
from .classifier import (
    Classifier,
    DegenerateDataError,
    LogisticClassifier,
    RuleClassifier,
    StateEncoder,
    achieves_recourse,
    classifier_from_dict,
    train_logistic_classifier,
)
from .schema import (
    CategoricalFeature,
    DomainError,
    FeatureSchema,
    NumericFeature,
    State,
)
from .scm import (
    CausalGraph,
    ScmWeights,
    action_cost,
    action_cost_features,
    costs_over_particles,
    intervention_cost,
    intervention_cost_features,
)

__all__ = [
    "Action", "ActionCatalog", "ActionFunction", "Intervention", "Precondition",
    "PreconditionError", "apply_intervention", "feasible_actions", "is_applicable",
    "parse_precondition", "replay_states",
    "Classifier", "DegenerateDataError", "LogisticClassifier", "RuleClassifier",
    "StateEncoder", "achieves_recourse", "classifier_from_dict",
    "train_logistic_classifier",
    "CategoricalFeature", "DomainError", "FeatureSchema", "NumericFeature", "State",
    "CausalGraph", "ScmWeights", "action_cost", "action_cost_features",
    "costs_over_particles", "intervention_cost", "intervention_cost_features",
]
