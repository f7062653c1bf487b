"""Counterfactual inference for ground probabilistic logic programs."""
