"""Flat-file formats: headed CSV tables, JSON records, run manifests.

A CSV file starts with a block of ``# key=value`` lines echoing the run
configuration, then one column-name row, then data. Everything in the
header is deterministic; wall-clock timestamps go to a sidecar
``<file>.manifest.json`` so identical runs give byte-identical outputs.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .calibration import ScanRecord
from .estimation import CoincidenceCounts

SCAN_COLUMNS = ("tau_as", "n1", "n2", "p2_model", "fisher_per_pair")


class FormatError(ValueError):
    """Malformed input file; ``line`` is 1-based when known."""

    def __init__(self, path, line, message):
        where = f"{path}:{line}" if line else str(path)
        super().__init__(f"{where}: {message}")
        self.path = path
        self.line = line


@dataclass
class RunManifest:
    command: str
    config: dict
    seed: int | None
    artifact_version: str = __version__
    started_utc: str | None = None
    finished_utc: str | None = None
    outputs: list = field(default_factory=list)

    def header_items(self):
        items = [("command", self.command), ("artifact_version", self.artifact_version),
                 ("seed", self.seed)]
        items += sorted(self.config.items())
        return items

    def start(self):
        self.started_utc = _now()

    def finish(self):
        self.finished_utc = _now()

    def to_dict(self):
        return {
            "command": self.command,
            "artifact_version": self.artifact_version,
            "seed": self.seed,
            "config": self.config,
            "started_utc": self.started_utc,
            "finished_utc": self.finished_utc,
            "outputs": self.outputs,
        }

    def deterministic_dict(self):
        d = self.to_dict()
        for key in ("started_utc", "finished_utc", "outputs"):
            d.pop(key)
        return d


def _now():
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def format_value(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return ""
        return repr(v)
    return str(v)


def atomic_write_text(path, text):
    """Write ``text`` to ``path`` via a temporary file and rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def render_csv(columns, rows, header_items=()):
    buf = io.StringIO()
    for key, value in header_items:
        buf.write(f"# {key}={format_value(value)}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([format_value(v) for v in row])
    return buf.getvalue()


def write_csv(path, columns, rows, manifest: RunManifest | None = None):
    header = manifest.header_items() if manifest else ()
    atomic_write_text(path, render_csv(columns, rows, header))


def write_json(path, payload):
    atomic_write_text(path, json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n")


def write_manifest_sidecar(path, manifest: RunManifest):
    write_json(f"{path}.manifest.json", manifest.to_dict())


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return None if not math.isfinite(v) else v
    if hasattr(obj, "value") and isinstance(getattr(obj, "value"), str):
        return obj.value
    return obj


def read_csv(path):
    """Return (header dict, column names, list of (line number, row dict))."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise FormatError(path, None, f"cannot read file: {exc}") from exc
    header, columns, rows = {}, None, []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if "=" in body:
                k, v = body.split("=", 1)
                header[k.strip()] = v.strip()
            continue
        fields = next(csv.reader([line]))
        if columns is None:
            columns = [f.strip() for f in fields]
            continue
        if len(fields) != len(columns):
            raise FormatError(path, lineno, f"expected {len(columns)} fields, found {len(fields)}")
        rows.append((lineno, dict(zip(columns, fields))))
    if columns is None:
        raise FormatError(path, None, "no column-name row found (empty file?)")
    return header, columns, rows


def _number(path, lineno, row, key, integer=False):
    raw = row.get(key, "")
    try:
        v = float(raw)
    except ValueError:
        raise FormatError(path, lineno, f"column {key!r}: not a number: {raw!r}") from None
    if not math.isfinite(v):
        raise FormatError(path, lineno, f"column {key!r}: non-finite value")
    if integer and v != int(v):
        raise FormatError(path, lineno, f"column {key!r}: expected an integer count, got {raw!r}")
    return v


def scan_rows(scan, params, n_pairs):
    """Rows of the scan CSV for a list of ScanRecord."""
    from .fisher import _fisher_s
    from .model import outcome_probabilities

    rows = []
    for rec in scan:
        s = rec.tau_ground_truth_as / params.sigma_as
        f = float(_fisher_s(s, params.alpha, params.gamma)) / params.sigma_ps ** 2
        rows.append((rec.tau_ground_truth_as, rec.counts.n1, rec.counts.n2,
                     outcome_probabilities(s, params).p2, f))
    return rows


def read_scan_csv(path):
    """Parse a scan CSV into a list of :class:`ScanRecord`.

    Only ``tau_as``, ``n1`` and ``n2`` are required; counts must be
    non-negative and may be integer or real (expected counts).
    """
    _, columns, rows = read_csv(path)
    missing = [c for c in ("tau_as", "n1", "n2") if c not in columns]
    if missing:
        raise FormatError(path, None, f"missing required column(s): {', '.join(missing)}")
    if not rows:
        raise FormatError(path, None, "no data rows")
    out = []
    for lineno, row in rows:
        tau = _number(path, lineno, row, "tau_as")
        n1 = _number(path, lineno, row, "n1")
        n2 = _number(path, lineno, row, "n2")
        if n1 < 0 or n2 < 0:
            raise FormatError(path, lineno, "counts must be non-negative")
        if n1 == int(n1) and n2 == int(n2):
            n1, n2 = int(n1), int(n2)
        out.append(ScanRecord(tau, CoincidenceCounts(n1, n2)))
    return out


def parse_key_value_config(path):
    """Read a ``key=value`` config file (``#`` comments and blank lines allowed).

    The manifest header of any CSV this package writes is accepted as well:
    ``# key=value`` lines are read, and bookkeeping keys are dropped.
    """
    text = Path(path).read_text()
    out = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.strip()
        if body.startswith("#"):
            body = body[1:].strip()
            if "=" not in body:
                continue
        if not body:
            continue
        if "=" not in body:
            if "," in body:  # column row of a CSV: header block is over
                break
            raise FormatError(path, lineno, f"expected key=value, got {line!r}")
        k, v = body.split("=", 1)
        out[k.strip().replace("-", "_")] = v.strip()
    for key in ("command", "artifact_version"):
        out.pop(key, None)
    return out
