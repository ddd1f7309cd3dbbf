"""Series ingestion, config files and output writers."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from os import PathLike
from typing import Literal, Sequence

import numpy as np

SeriesFormat = Literal["auto", "single", "time-value"]


class IngestError(ValueError):
    """Input problem carrying a machine-readable ``code``."""

    def __init__(self, code: str, message: str) -> None:
        super().__init__(message)
        self.code = code


@dataclass
class SampleSeries:
    values: np.ndarray
    times: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.values)


def _parse_float(text: str, lineno: int) -> float:
    try:
        v = float(text)
    except ValueError:
        raise IngestError("E_PARSE", f"line {lineno}: cannot parse {text.strip()!r} as a number") from None
    if not math.isfinite(v):
        raise IngestError("E_NONFINITE", f"line {lineno}: non-finite value {text.strip()!r}")
    return v


def _is_number(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def read_series(path: str | PathLike, format: SeriesFormat = "auto") -> SampleSeries:
    """Read a single-column or ``time,value`` CSV.

    Blank lines and ``#`` comments are skipped. A non-numeric first row is
    taken as a header.
    """
    if format not in ("auto", "single", "time-value"):
        raise ValueError(f"unknown series format {format!r}")
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise IngestError("E_IO", f"cannot open {path}: {exc.strerror}") from None
    values: list[float] = []
    times: list[float] = []
    width: int | None = None
    with fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            fields = [f.strip() for f in row]
            if not fields or all(not f for f in fields) or fields[0].startswith("#"):
                continue
            if lineno == 1 and not any(_is_number(f) for f in fields):
                continue
            if width is None:
                width = len(fields) if format == "auto" else (1 if format == "single" else 2)
                if width not in (1, 2):
                    raise IngestError("E_PARSE", f"line {lineno}: expected 1 or 2 columns, got {len(fields)}")
            if len(fields) != width:
                raise IngestError("E_PARSE", f"line {lineno}: expected {width} column(s), got {len(fields)}")
            if width == 1:
                values.append(_parse_float(fields[0], lineno))
            else:
                t = _parse_float(fields[0], lineno)
                if times and t < times[-1]:
                    raise IngestError("E_ORDER", f"line {lineno}: time {t!r} decreases (previous {times[-1]!r})")
                times.append(t)
                values.append(_parse_float(fields[1], lineno))
    if not values:
        raise IngestError("E_EMPTY", f"{path}: no samples")
    return SampleSeries(np.array(values), np.array(times) if width == 2 else None)


def write_series(path: str | PathLike, values: Sequence[float]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for v in values:
            fh.write(f"{float(v)!r}\n")


def write_text(path: str | PathLike, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def read_config(path: str | PathLike) -> dict[str, str]:
    """``key = value`` lines; ``#`` starts a comment. Dashes in keys become underscores."""
    out: dict[str, str] = {}
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise IngestError("E_IO", f"cannot open config {path}: {exc.strerror}") from None
    with fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise IngestError("E_CONFIG", f"{path}: line {lineno}: expected key=value")
            key, value = (p.strip() for p in line.split("=", 1))
            if not key:
                raise IngestError("E_CONFIG", f"{path}: line {lineno}: empty key")
            out[key.replace("-", "_")] = value
    return out


def read_segments(path: str | PathLike) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]
