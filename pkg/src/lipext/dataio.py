"""CSV ingestion, atomic output writing and the bundled sample data.

Dataset CSV contract: a header row; column 1 is a string ``id``; columns
2..m+1 are numeric features; the final column is ``index`` where an empty
cell marks an unknown value.  UTF-8, comma separated, decimal point.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import tempfile
from importlib import resources
from pathlib import Path

import numpy as np

from .pipeline import Dataset


class CsvParseError(ValueError):
    """Malformed dataset CSV; the message carries the offending line number."""


def table1_path() -> Path:
    """Path of the bundled six-city sample file."""
    return Path(str(resources.files("lipext.data").joinpath("cities_table1.csv")))


def read_dataset(path: str | os.PathLike) -> Dataset:
    """Parse a dataset CSV, reporting the line number of any bad cell."""
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CsvParseError(f"{path}:1: empty file") from None
        if len(header) < 3:
            raise CsvParseError(
                f"{path}:1: need at least id, one feature and an index column"
            )
        feature_names = [h.strip() for h in header[1:-1]]
        ids: list[str] = []
        features: list[list[float]] = []
        index: list[float] = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(cell.strip() == "" for cell in row):
                continue
            if len(row) != len(header):
                raise CsvParseError(
                    f"{path}:{lineno}: expected {len(header)} columns, found {len(row)}"
                )
            ids.append(row[0].strip())
            try:
                features.append([float(cell) for cell in row[1:-1]])
            except ValueError as exc:
                raise CsvParseError(f"{path}:{lineno}: non-numeric feature: {exc}") from None
            last = row[-1].strip()
            if last == "":
                index.append(float("nan"))
            else:
                try:
                    index.append(float(last))
                except ValueError:
                    raise CsvParseError(
                        f"{path}:{lineno}: non-numeric index value {last!r}"
                    ) from None
        if not ids:
            raise CsvParseError(f"{path}:2: no data rows")
    return Dataset(ids, np.array(features), np.array(index), feature_names)


def dataset_hash(ds: Dataset) -> str:
    """Stable digest of ids, features and index values."""
    h = hashlib.sha256()
    h.update("\x1f".join(ds.ids).encode("utf-8"))
    h.update(np.ascontiguousarray(ds.features, dtype=float).tobytes())
    h.update(np.ascontiguousarray(ds.index, dtype=float).tobytes())
    return h.hexdigest()


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(path: str | os.PathLike, payload: dict) -> None:
    _atomic_write(Path(path), json.dumps(payload, indent=2, sort_keys=True) + "\n")


def write_csv(path: str | os.PathLike, header: list[str], rows: list) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_format_cell(c) for c in row])
    _atomic_write(Path(path), buf.getvalue())


def _format_cell(cell) -> str:
    # repr round-trips float64 exactly, so files are deterministic.
    if isinstance(cell, float):
        return repr(cell)
    return str(cell)
