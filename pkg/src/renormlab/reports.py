"""Deterministic JSON/CSV report serialisation with atomic file output."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import sys
import tempfile
from dataclasses import dataclass, field

import numpy as np

from . import __version__


def plain(value):
    """Convert numpy scalars/arrays and non-finite floats into JSON-safe values."""
    if isinstance(value, dict):
        return {str(k): plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return [plain(v) for v in value.tolist()]
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    return value


@dataclass
class Report:
    """One table plus the metadata needed to reproduce it."""

    command: str
    config_echo: dict
    columns: tuple[str, ...]
    rows: list[dict]
    metadata: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    def to_json(self) -> str:
        doc = {
            "tool_version": __version__,
            "command": self.command,
            "config_echo": self.config_echo,
            "metadata": self.metadata,
            "columns": list(self.columns),
            "rows": self.rows,
        }
        doc.update(self.extra)
        return json.dumps(plain(doc), sort_keys=True, indent=2, allow_nan=False) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# tool_version={__version__}\n# command={self.command}\n")
        for key, val in sorted(plain(self.metadata).items()):
            buf.write(f"# {key}={json.dumps(val, sort_keys=True)}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for row in self.rows:
            w.writerow([_cell(row.get(c)) for c in self.columns])
        return buf.getvalue()

    def render(self, fmt: str) -> str:
        return self.to_csv() if fmt == "csv" else self.to_json()


def _cell(v) -> str:
    v = plain(v)
    if v is None:
        return ""
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_atomic(path: str, text: str) -> None:
    """Write via a temporary file in the target directory, then rename over ``path``."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".renormlab-", dir=directory)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def emit(report: Report, fmt: str, out: str | None) -> None:
    text = report.render(fmt)
    if out is None:
        sys.stdout.write(text)
    else:
        write_atomic(out, text)
