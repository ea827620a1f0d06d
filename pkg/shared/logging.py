from typing import Dict, Any, Optional
import json
import logging
from datetime import datetime, timezone
from pathlib import Path

from shared.types import RunLogRowDict

logger = logging.getLogger(__name__)


class ConsoleFilter(logging.Filter):
    """Filter to suppress specific messages from console output"""
    SUPPRESS_PATTERNS = ["numba", "findfont"]

    def filter(self, record):
        if record.name.startswith(("numba", "matplotlib")):
            return False
        message = record.getMessage()
        return not any(pattern in message for pattern in self.SUPPRESS_PATTERNS)


def configure_logging(log_file: Optional[Path] = None, level: int = logging.INFO) -> None:
    """
    Install the root handlers: console (filtered) plus an optional log file.
    Safe to call more than once; later calls replace earlier handlers.
    """
    console_handler = logging.StreamHandler()
    console_handler.addFilter(ConsoleFilter())
    handlers: list[logging.Handler] = [console_handler]

    if log_file is not None:
        log_file.parent.mkdir(parents=True, exist_ok=True)
        handlers.append(logging.FileHandler(log_file))

    logging.basicConfig(
        level=level,
        format='%(asctime)s - %(levelname)s - %(name)s - %(message)s',
        handlers=handlers,
        force=True,
    )


def append_jsonl(path: Path, row: Dict[str, Any]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("a", encoding="utf-8") as f:
        f.write(json.dumps(row, ensure_ascii=True) + "\n")


def log_run(
    run_log: Path,
    command: str,
    config: Dict[str, Any],
    outputs: Optional[list[str]] = None,
    summary: Optional[Dict[str, Any]] = None,
    error: Optional[str] = None,
) -> None:
    """
    Append one workflow run to runs.jsonl.

    Args:
        run_log: Path to the JSON-lines run log
        command: CLI command name, e.g. "generate", "train"
        config: Flags/config the run was started with
        outputs: Files written by the run
        summary: Small dict of headline numbers
        error: Error message if the run failed
    """
    row: RunLogRowDict = {
        "ts_utc": datetime.now(timezone.utc).isoformat(),
        "command": command,
        "status": "error" if error else "ok",
        "config": config,
        "outputs": outputs or [],
        "summary": summary or {},
    }
    if error:
        row["error"] = error

    try:
        append_jsonl(run_log, dict(row))
    except OSError as e:
        logger.error(f"Error appending run log {run_log}: {e}")
