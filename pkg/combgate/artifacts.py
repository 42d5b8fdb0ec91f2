"""Writers for run outputs. Each output file has exactly one writer call per run."""
import json
import logging
from pathlib import Path
from typing import Any, Dict, Sequence

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

# 17 significant digits round-trip every double
FLOAT_FORMAT = "%.17g"


def _plain(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return _plain(value.tolist())
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, float) and not np.isfinite(value):
        return str(value)
    return value


def write_frame(frame: pd.DataFrame, path: Path) -> Path:
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    logger.debug("wrote %s (%d rows)", path, len(frame))
    return path


def write_text(text: str, path: Path) -> Path:
    path.write_text(text)
    logger.debug("wrote %s", path)
    return path


def write_json(data: Dict[str, Any], path: Path) -> Path:
    path.write_text(json.dumps(_plain(data), indent=2, sort_keys=True) + "\n")
    logger.debug("wrote %s", path)
    return path


def write_manifest(
    path: Path,
    *,
    config_sha256: str,
    version: str,
    mode: str,
    wall_time_s: float,
    artifacts: Sequence[str],
) -> Dict[str, Any]:
    manifest = {
        "config_sha256": config_sha256,
        "version": version,
        "mode": mode,
        "wall_time_s": wall_time_s,
        "artifacts": list(artifacts),
    }
    write_json(manifest, path)
    return manifest
