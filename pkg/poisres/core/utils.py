import hashlib
import json
import math
from datetime import datetime, timezone
from typing import Any, Dict, Mapping, Optional


def utc_now_iso() -> str:
    """ISO-8601 UTC timestamp."""
    return datetime.now(timezone.utc).isoformat()


def stable_hash(obj) -> str:
    """
    Deterministic SHA-256 hash.

    - Sorts keys
    - Uses compact separators
    - Critical for report reproducibility
    """
    payload = json.dumps(obj, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return hashlib.sha256(payload).hexdigest()


def json_float(x: Optional[float], digits: int = 15) -> Optional[Any]:
    """
    Float suitable for a JSON report.

    NaN and infinities are not valid JSON; they are rendered as strings.
    Finite values are rounded to a fixed number of significant digits so
    that reports stay byte-identical across platforms with the same libm.
    """
    if x is None:
        return None
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return float(f"{x:.{digits}g}")


def json_point(point: Optional[Mapping[str, float]]) -> Optional[Dict[str, Any]]:
    if point is None:
        return None
    return {k: json_float(v) for k, v in point.items()}
