"""Interactive algorithmic recourse with Bayesian preference elicitation.

Generates counterfactual interventions personalized to a user's unknown
action costs: a linear structural-causal cost model prices actions, choice
queries refine a posterior over the cost weights, and cost-aware
generators (MCTS-based or a distilled rule automaton) plan the recourse.
"""

__version__ = "0.1.0"
