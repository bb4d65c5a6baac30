"""Tabular persistence of sweep results.

One sweep is stored as a small CSV with a commented header carrying the
axis name, the master seed, the full config snapshot, and a digest of the
data block.  The format round-trips byte-identically (floats are written
with 12 significant digits and re-read values reproduce the same text), so
files double as regression artifacts, and the digest lets any consumer
reject a truncated or hand-edited file before plotting it.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

__all__ = ["SweepRow", "SweepTable", "SweepFormatError",
           "render_sweep", "save_sweep", "load_sweep"]

_MAGIC = "# pgi-sweep-table v1"
_COLUMNS = ("axis_value", "scheme", "mean_sum_rate", "ci95", "trials", "failed_trials")


class SweepFormatError(ValueError):
    """A sweep file does not satisfy the format contract."""


@dataclass
class SweepRow:
    """One (axis value, scheme) cell of a sweep."""

    axis_value: float
    scheme: str
    mean_sum_rate: float
    ci95: float
    trials: int
    failed_trials: int

    def __post_init__(self) -> None:
        if any(ch in self.scheme for ch in ",\n\r") or not self.scheme:
            raise ValueError(f"scheme name {self.scheme!r} must be nonempty, no commas")
        if self.ci95 < 0:
            raise ValueError("ci95 must be >= 0")
        if self.trials < 0 or self.failed_trials < 0:
            raise ValueError("trial counts must be >= 0")


@dataclass
class SweepTable:
    """A persisted sweep: metadata plus one row per (axis value, scheme)."""

    axis: str
    master_seed: int
    config: dict
    rows: list[SweepRow]

    @property
    def schemes(self) -> tuple[str, ...]:
        seen: list[str] = []
        for row in self.rows:
            if row.scheme not in seen:
                seen.append(row.scheme)
        return tuple(seen)

    @property
    def axis_values(self) -> tuple[float, ...]:
        seen: list[float] = []
        for row in self.rows:
            if row.axis_value not in seen:
                seen.append(row.axis_value)
        return tuple(seen)

    def series(self, scheme: str) -> tuple[list[float], list[float], list[float]]:
        """(axis values, means, CI halfwidths) of one scheme, file order."""
        picked = [r for r in self.rows if r.scheme == scheme]
        if not picked:
            raise KeyError(f"scheme {scheme!r} not in table (has {self.schemes})")
        return ([r.axis_value for r in picked],
                [r.mean_sum_rate for r in picked],
                [r.ci95 for r in picked])


def _fmt(value: float) -> str:
    return "%.12g" % value


def _data_block(table: SweepTable) -> str:
    lines = [",".join(_COLUMNS)]
    for row in table.rows:
        lines.append(",".join([
            _fmt(row.axis_value), row.scheme, _fmt(row.mean_sum_rate),
            _fmt(row.ci95), str(row.trials), str(row.failed_trials)]))
    return "\n".join(lines) + "\n"


def render_sweep(table: SweepTable) -> str:
    """The exact file text for a table (exposed for digest checks)."""
    data = _data_block(table)
    digest = hashlib.sha256(data.encode()).hexdigest()
    header = "\n".join([
        _MAGIC,
        f"# axis: {table.axis}",
        f"# master_seed: {table.master_seed}",
        f"# config: {json.dumps(table.config, sort_keys=True)}",
        f"# digest: {digest}",
    ])
    return header + "\n" + data


def save_sweep(table: SweepTable, path: str | Path) -> Path:
    """Write a sweep table; returns the path written."""
    path = Path(path)
    path.write_text(render_sweep(table))
    return path


def _header_value(lines: list[str], index: int, key: str) -> str:
    prefix = f"# {key}: "
    if index >= len(lines) or not lines[index].startswith(prefix):
        raise SweepFormatError(f"line {index + 1} must start with {prefix!r}")
    return lines[index][len(prefix):]


def load_sweep(path: str | Path) -> SweepTable:
    """Read and verify a sweep table file.

    Raises :class:`SweepFormatError` on version, schema, or digest
    mismatches, so truncation or edits never flow silently into plots.
    """
    text = Path(path).read_text()
    lines = text.split("\n")
    if not lines or lines[0] != _MAGIC:
        raise SweepFormatError(f"{path}: missing magic line {_MAGIC!r}")
    axis = _header_value(lines, 1, "axis")
    master_seed = int(_header_value(lines, 2, "master_seed"))
    config = json.loads(_header_value(lines, 3, "config"))
    digest = _header_value(lines, 4, "digest")
    data = "\n".join(lines[5:])
    actual = hashlib.sha256(data.encode()).hexdigest()
    if actual != digest:
        raise SweepFormatError(f"{path}: digest mismatch; file truncated or edited")
    body = [ln for ln in lines[5:] if ln]
    if not body or tuple(body[0].split(",")) != _COLUMNS:
        raise SweepFormatError(
            f"{path}: expected columns {','.join(_COLUMNS)!r}, "
            f"got {body[0] if body else '<empty>'!r}")
    rows = []
    for ln in body[1:]:
        parts = ln.split(",")
        if len(parts) != len(_COLUMNS):
            raise SweepFormatError(f"{path}: malformed row {ln!r}")
        rows.append(SweepRow(
            axis_value=float(parts[0]), scheme=parts[1],
            mean_sum_rate=float(parts[2]), ci95=float(parts[3]),
            trials=int(parts[4]), failed_trials=int(parts[5])))
    return SweepTable(axis=axis, master_seed=master_seed, config=config, rows=rows)
