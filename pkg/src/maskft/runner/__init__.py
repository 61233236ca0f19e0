"""Experiment plumbing: configs, checkpoints, training pipelines, reports and the CLI."""
