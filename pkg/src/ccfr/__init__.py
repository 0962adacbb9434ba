"""Constrained counterfactual regret minimization for zero-sum extensive-form games."""
