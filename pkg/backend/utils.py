import csv
import hashlib
import json
import logging
import os
from typing import Iterable, List, Sequence

import numpy as np

logger = logging.getLogger(__name__)


def canonical_json(data) -> str:
    return json.dumps(data, sort_keys=True, separators=(",", ":"), ensure_ascii=True)


def content_digest(data) -> str:
    """sha256 over canonical JSON, stable across machines and key order."""
    return hashlib.sha256(canonical_json(data).encode("utf-8")).hexdigest()


def parse_float_grid(text: str) -> List[float]:
    """'0.1,0.5,1' -> [0.1, 0.5, 1.0]; 'start:stop:count' -> evenly spaced points."""
    text = text.strip()
    if ":" in text:
        start, stop, count = text.split(":")
        return [float(x) for x in np.linspace(float(start), float(stop), int(count))]
    return [float(x) for x in text.split(",") if x.strip()]


def parse_int_grid(text: str) -> List[int]:
    """'2,4,8' or 'start:stop' (inclusive)."""
    text = text.strip()
    if ":" in text:
        start, stop = text.split(":")
        return list(range(int(start), int(stop) + 1))
    return [int(x) for x in text.split(",") if x.strip()]


def _cell(value):
    # repr keeps every float bit, so identical runs give identical bytes
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (np.integer,)):
        return str(int(value))
    return value


def write_csv(path: str, header: Sequence[str], rows: Iterable[Sequence]) -> str:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(v) for v in row])
    logger.info(f"Wrote {path}")
    return path


def to_jsonable(value):
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return value if np.isfinite(value) else None
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.bool_):
        return bool(value)
    return value


def write_json(path: str, data) -> str:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w") as f:
        json.dump(to_jsonable(data), f, indent=2, sort_keys=True)
        f.write("\n")
    logger.info(f"Wrote {path}")
    return path
