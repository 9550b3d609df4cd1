"""
Graph and label file formats.

Edge list: an optional ``# n=<n>`` header, then one undirected edge per
line as ``"u v"`` with 0 <= u <= v < n, sorted by (u, v); a self-loop is
``"u u"``. Blank lines and other ``#`` lines are ignored on read.

Labels: one non-negative integer per line, line i holding vertex i's label.
"""

import json
import logging
import re
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, Optional, Union

import numpy as np

from spectral_sbm.config import FORMAT_VERSION
from spectral_sbm.errors import GraphFormatError, ParameterError
from spectral_sbm.linalg import as_symmetric

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]
_HEADER = re.compile(r"^#\s*n\s*=\s*(\d+)\s*$", re.ASCII)
_EDGE = re.compile(r"(\d+)\s+(\d+)", re.ASCII)
_LABEL = re.compile(r"\d+", re.ASCII)


def _read_text(path: str, what: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise GraphFormatError(path, None, f"cannot read {what}: {exc}") from exc


def write_edge_list(path: PathLike, a) -> None:
    a = as_symmetric(a, "A")
    rows, cols = np.nonzero(np.triu(a))
    lines = [f"# n={a.shape[0]}"] + [f"{u} {v}" for u, v in zip(rows.tolist(), cols.tolist())]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_edge_list(path: PathLike, n: Optional[int] = None) -> np.ndarray:
    """
    Load an edge list as a dense 0/1 adjacency matrix.

    ``n`` comes from the argument, else the header, else max index + 1.

    Raises:
        GraphFormatError: on unreadable files or malformed lines (1-based line number).
    """
    path = str(path)
    text = _read_text(path, "edge list")

    header_n = None
    edges = []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            match = _HEADER.match(line)
            if match:
                header_n = int(match.group(1))
            continue
        match = _EDGE.fullmatch(line)
        if not match:
            raise GraphFormatError(path, line_no, f"expected two non-negative integers, got '{line}'")
        edges.append((int(match.group(1)), int(match.group(2)), line_no))

    if n is None:
        n = header_n
    if n is None:
        n = max((max(u, v) for u, v, _ in edges), default=-1) + 1
    if n < 1:
        raise GraphFormatError(path, None, "graph has no vertices")

    a = np.zeros((n, n))
    for u, v, line_no in edges:
        if u >= n or v >= n:
            raise GraphFormatError(path, line_no, f"vertex index out of range for n={n}")
        a[u, v] = a[v, u] = 1.0
    logger.debug("read %d edges on %d vertices from %s", len(edges), n, path)
    return a


def write_labels(path: PathLike, labels) -> None:
    values = np.asarray(labels, dtype=np.int64)
    Path(path).write_text("".join(f"{int(v)}\n" for v in values), encoding="utf-8")


def read_labels(path: PathLike) -> np.ndarray:
    path = str(path)
    text = _read_text(path, "labels")
    values = []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not _LABEL.fullmatch(line):
            raise GraphFormatError(path, line_no, f"expected a non-negative integer, got '{line}'")
        values.append(int(line))
    if not values:
        raise GraphFormatError(path, None, "labels file is empty")
    return np.array(values, dtype=np.int64)


def write_metadata(path: PathLike, payload: Dict[str, Any]) -> None:
    """Metadata JSON; ``created_utc`` is the only field that changes between reruns."""
    record = dict(payload, format_version=FORMAT_VERSION,
                  created_utc=datetime.now(timezone.utc).isoformat(timespec="seconds"))
    Path(path).write_text(json.dumps(record, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def read_metadata(path: PathLike) -> Dict[str, Any]:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise ParameterError(f"cannot read metadata {path}: {exc}") from exc
