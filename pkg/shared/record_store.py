from typing import Any, Dict, Iterable, List
import json
import os
import logging
from pathlib import Path

logger = logging.getLogger(__name__)


def load_jsonl(path: Path) -> List[Dict[str, Any]]:
    """
    Load one JSON object per line.

    Args:
        path: JSON-lines file; a missing file reads as empty

    Returns:
        List of row dicts in file order

    Raises:
        ValueError: If a line is not a JSON object
    """
    if not path.exists():
        logger.info(f"No record file at {path}, starting empty")
        return []

    rows: List[Dict[str, Any]] = []
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as e:
                raise ValueError(f"{path}:{lineno}: invalid JSON ({e})") from e
            if not isinstance(row, dict):
                raise ValueError(f"{path}:{lineno}: expected a JSON object")
            rows.append(row)
    return rows


def save_jsonl(rows: Iterable[Dict[str, Any]], path: Path) -> None:
    """
    Write rows as JSON lines with retry + atomic write.
    Key order follows each dict's insertion order.
    """
    payload = "".join(json.dumps(row, ensure_ascii=True) + "\n" for row in rows)
    path.parent.mkdir(parents=True, exist_ok=True)

    max_retries = 3
    for attempt in range(max_retries):
        try:
            # Atomic save: write to temp, then rename
            temp_file = path.with_suffix(path.suffix + ".tmp")
            with open(temp_file, "w", encoding="utf-8", newline="\n") as f:
                f.write(payload)
            os.replace(temp_file, path)

            logger.info(f"Saved {payload.count(chr(10))} records to {path}")
            return
        except OSError as e:
            logger.error(f"Save failed (attempt {attempt + 1}/{max_retries}): {e}")
            if attempt == max_retries - 1:
                logger.critical(f"CRITICAL: Failed to save {path} after all retries!")
                raise
