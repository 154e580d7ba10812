"""Attention-training game sessions as a service.

A validated domain model for patients, doctors, games, and treatment
programs; a deterministic session state machine with an append-only
event log and replay; the per-session performance-measure engine; a
synthetic-patient simulator; durable storage; an HTTP API; and a batch
CLI that renders delimited reports with figures.
"""

__version__ = "0.1.0"
