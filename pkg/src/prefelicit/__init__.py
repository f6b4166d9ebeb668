"""Interactive Bayesian preference elicitation with an MCTS questioning policy."""

__version__ = "0.1.0"
