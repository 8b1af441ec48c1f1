"""Synthetic benchmark harness: cluster generation, naive oracles and
scripted experiments with JSON reports."""
