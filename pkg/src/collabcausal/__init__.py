"""Collaborative causal discovery over maximal ancestral graphs with atomic interventions."""
