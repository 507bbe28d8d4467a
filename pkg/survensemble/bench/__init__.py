"""Benchmark protocol: ingestion, splits, hyperparameter search, report emitters and the ``bench`` CLI."""
