"""CLI, configuration, randomized instance generation, and the property
suites backing the selftest command."""
