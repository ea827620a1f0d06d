# shared/__init__.py
"""Shared plumbing for the Cheeger toolkit: payload types, logging, record files."""
from .types import GraphRecordDict, RunLogRowDict, ChartManifestDict
from .logging import configure_logging, append_jsonl, log_run
from .record_store import load_jsonl, save_jsonl
