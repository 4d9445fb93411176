"""CSV and JSON artifact files.

CSV files open with ``# ``-prefixed provenance lines (``# key: json-value``)
followed by an ordinary header row. Writes go to a temporary sibling file
that is renamed into place, so a crashed run never leaves a truncated file.
"""

import json
import math
import os
import tempfile
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Tuple

import numpy as np
import pandas as pd
from loguru import logger

from ..core.exceptions import ArtifactError

PROVENANCE_PREFIX = "# "

_log = logger.bind(component="artifacts")


def _json_default(value: Any):
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, Path):
        return str(value)
    if hasattr(value, "model_dump"):
        return value.model_dump(mode="json")
    raise TypeError(f"{type(value).__name__} is not JSON serializable")


def _plain(value: Any) -> Any:
    """Nested payload with numpy values unpacked and NaN/inf written as None."""
    if isinstance(value, Mapping):
        return {key: _plain(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(item) for item in value]
    if isinstance(value, (np.ndarray, np.generic, Path)) or hasattr(value, "model_dump"):
        return _plain(_json_default(value))
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def to_json_text(payload: Any) -> str:
    """Strict JSON; non-finite floats become null."""
    return json.dumps(_plain(payload), indent=2, default=_json_default, allow_nan=False)


def _atomic_write(path: Path, text: str) -> None:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except OSError as e:
        raise ArtifactError(f"Failed to write {path}: {e}", {"path": str(path)})
    _log.debug(f"Wrote {path}")


def write_csv(frame: pd.DataFrame, path, provenance: Optional[Mapping[str, Any]] = None) -> Path:
    """Write ``frame`` with one provenance line per key, then the table."""
    lines = [
        f"{PROVENANCE_PREFIX}{key}: {json.dumps(_plain(value), default=_json_default, allow_nan=False, separators=(',', ':'))}\n"
        for key, value in (provenance or {}).items()
    ]
    body = frame.to_csv(index=False, float_format="%.12g", lineterminator="\n")
    _atomic_write(Path(path), "".join(lines) + body)
    return Path(path)


def read_csv(path) -> Tuple[pd.DataFrame, Dict[str, Any]]:
    """Table plus the decoded provenance lines of a file from write_csv."""
    path = Path(path)
    provenance: Dict[str, Any] = {}
    try:
        with path.open("r", encoding="utf-8") as handle:
            skip = 0
            for line in handle:
                if not line.startswith(PROVENANCE_PREFIX.rstrip()):
                    break
                skip += 1
                key, _, value = line[len(PROVENANCE_PREFIX):].partition(":")
                try:
                    provenance[key.strip()] = json.loads(value)
                except json.JSONDecodeError:
                    provenance[key.strip()] = value.strip()
        frame = pd.read_csv(path, skiprows=skip)
    except FileNotFoundError:
        raise ArtifactError(f"Artifact not found: {path}", {"path": str(path)})
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise ArtifactError(f"Failed to read {path}: {e}", {"path": str(path)})
    return frame, provenance


def write_json(payload: Mapping[str, Any], path) -> Path:
    _atomic_write(Path(path), to_json_text(payload) + "\n")
    return Path(path)


def read_json(path) -> Dict[str, Any]:
    path = Path(path)
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ArtifactError(f"Artifact not found: {path}", {"path": str(path)})
    except (OSError, json.JSONDecodeError) as e:
        raise ArtifactError(f"Failed to read {path}: {e}", {"path": str(path)})
