#!/usr/bin/env python3
"""
OAMSIM Utility Functions
File output and logging helpers shared by the core, the plugins and the CLI
"""

import json
import logging
import os
import tempfile
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1


def ensure_directory(directory_path: Path) -> bool:
    """Ensure directory exists, create if necessary"""
    try:
        Path(directory_path).mkdir(parents=True, exist_ok=True)
        return True
    except Exception as e:
        logger.error(f"Error creating directory {directory_path}: {e}")
        return False


def atomic_write_text(file_path: Path, text: str) -> None:
    """Write through a temporary file in the target directory, then rename over the target"""
    file_path = Path(file_path)
    ensure_directory(file_path.parent)
    fd, tmp = tempfile.mkstemp(dir=file_path.parent, prefix=f".{file_path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        os.replace(tmp, file_path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _json_default(value: Any) -> Any:
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (complex, np.complexfloating)):
        return [value.real, value.imag]
    return str(value)


def to_json_text(data: Dict[str, Any]) -> str:
    return json.dumps(data, indent=2, sort_keys=True, ensure_ascii=False,
                      default=_json_default) + "\n"


def save_json_file(data: Dict[str, Any], file_path: Path) -> bool:
    """Save data to JSON file atomically with sorted keys"""
    try:
        atomic_write_text(file_path, to_json_text(data))
        return True
    except Exception as e:
        logger.error(f"Error saving JSON file {file_path}: {e}")
        return False


def write_csv(rows: Sequence[Dict[str, Any]], file_path: Path,
              columns: Optional[List[str]] = None) -> bool:
    """Write rows as CSV with a header row, atomically"""
    try:
        frame = pd.DataFrame(list(rows), columns=columns)
        atomic_write_text(file_path, frame.to_csv(index=False, float_format="%.17g"))
        return True
    except Exception as e:
        logger.error(f"Error writing CSV file {file_path}: {e}")
        return False


def summary_document(kind: str, config: Dict[str, Any], payload: Dict[str, Any]) -> Dict[str, Any]:
    """Envelope shared by every JSON summary: format version, resolved config, results"""
    return {
        "format_version": FORMAT_VERSION,
        "kind": kind,
        "config": config,
        "results": payload,
    }


def setup_logging(log_level: str = "INFO",
                  log_file: Optional[str] = None) -> logging.Logger:
    """Setup logging configuration"""
    handlers: List[logging.Handler] = [logging.StreamHandler()]

    if log_file:
        handlers.append(logging.FileHandler(log_file))

    logging.basicConfig(
        level=getattr(logging, log_level.upper()),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        handlers=handlers,
        force=True,
    )

    return logging.getLogger("oamsim")


def merge_dictionaries(dict1: Dict[str, Any],
                       dict2: Dict[str, Any]) -> Dict[str, Any]:
    """Merge two dictionaries recursively"""
    result = dict1.copy()

    for key, value in dict2.items():
        if key in result and isinstance(
                result[key], dict) and isinstance(value, dict):
            result[key] = merge_dictionaries(result[key], value)
        else:
            result[key] = value

    return result
