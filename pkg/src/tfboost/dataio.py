"""CSV datasets and atomic file output.

A dataset file holds one curve per row.  The header names the columns::

    id,y,s:<name>...,t:<time>...

``id`` and ``y`` come first (``y`` may be blank on every row of a
prediction-only file), ``s:`` columns are scalar covariates and ``t:``
columns carry the curve values at the numeric grid times, which must be
strictly increasing.
"""

from __future__ import annotations

import csv
import io
import math
import os
import tempfile
from typing import List, Optional

import numpy as np

from .errors import DataError, DomainError
from .fda import FunctionalSample, Grid


def _where(path: str, line: int) -> str:
    return f"{path}:{line}"


def parse_header(header: List[str], path: str = "<data>"):
    """Return scalar names and grid times from a header row."""
    if len(header) < 2 or header[0].strip() != "id" or header[1].strip() != "y":
        raise DataError(f"{_where(path, 1)}: header must start with 'id,y'")
    names, times = [], []
    seen_t = False
    for col in header[2:]:
        col = col.strip()
        if col.startswith("s:"):
            if seen_t:
                raise DataError(f"{_where(path, 1)}: scalar column {col!r} after grid columns")
            if not col[2:]:
                raise DataError(f"{_where(path, 1)}: empty scalar column name")
            names.append(col[2:])
        elif col.startswith("t:"):
            seen_t = True
            try:
                times.append(float(col[2:]))
            except ValueError:
                raise DataError(f"{_where(path, 1)}: grid column {col!r} has no numeric time") from None
        else:
            raise DataError(f"{_where(path, 1)}: column {col!r} needs an 's:' or 't:' prefix")
    if len(times) < 2:
        raise DataError(f"{_where(path, 1)}: need at least two 't:' grid columns")
    t = np.asarray(times)
    if not np.all(np.isfinite(t)) or np.any(np.diff(t) <= 0):
        raise DomainError(f"{_where(path, 1)}: grid times must be finite and strictly increasing")
    return names, t


def read_dataset(path: str, require_response: bool = False) -> FunctionalSample:
    try:
        with open(path, newline="") as fh:
            text = fh.read()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror or exc}") from None
    return parse_dataset(text, path, require_response)


def parse_dataset(text: str, path: str = "<data>", require_response: bool = False) -> FunctionalSample:
    rows = list(csv.reader(io.StringIO(text)))
    rows = [(i + 1, r) for i, r in enumerate(rows) if r and any(c.strip() for c in r)]
    if not rows:
        raise DataError(f"{path}: file is empty")
    _, header = rows[0]
    names, times = parse_header(header, path)
    width = len(header)
    q = len(names)
    ids, ys, scal, vals = [], [], [], []
    for line, r in rows[1:]:
        if len(r) != width:
            raise DataError(f"{_where(path, line)}: expected {width} columns, got {len(r)}")
        ids.append(r[0].strip())
        cell = r[1].strip()
        try:
            ys.append(float(cell) if cell else math.nan)
            nums = [float(c) for c in r[2:]]
        except ValueError as exc:
            raise DataError(f"{_where(path, line)}: {exc}") from None
        if not all(math.isfinite(v) for v in nums):
            raise DataError(f"{_where(path, line)}: non-finite value")
        scal.append(nums[:q])
        vals.append(nums[q:])
        if cell and not math.isfinite(ys[-1]):
            raise DataError(f"{_where(path, line)}: non-finite response")
    if not ids:
        raise DataError(f"{path}: no data rows")
    y = np.asarray(ys)
    missing = np.isnan(y)
    if missing.any() and not missing.all():
        first = rows[1 + int(np.argmax(missing != missing[0]))][0]
        raise DataError(f"{_where(path, first)}: response column is blank on some rows but not others")
    if missing.all():
        if require_response:
            raise DataError(f"{path}: responses are required but column y is blank")
        y = None
    if len(set(ids)) != len(ids):
        raise DataError(f"{path}: duplicate ids")
    return FunctionalSample(
        Grid(times),
        np.asarray(vals),
        np.asarray(scal) if q else None,
        y,
        tuple(ids),
    )


def format_dataset(sample: FunctionalSample, scalar_names: Optional[List[str]] = None) -> str:
    q = sample.q
    names = scalar_names or [f"v{j + 1}" for j in range(q)]
    if len(names) != q:
        raise DataError(f"{len(names)} names for {q} scalar covariates")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["id", "y"] + [f"s:{n}" for n in names] + [f"t:{float(t)!r}" for t in sample.grid.points])
    ids = sample.ids or tuple(str(i + 1) for i in range(sample.n))
    for i in range(sample.n):
        y = "" if sample.response is None else repr(float(sample.response[i]))
        sc = [] if q == 0 else [repr(float(v)) for v in sample.scalars[i]]
        w.writerow([ids[i], y] + sc + [repr(float(v)) for v in sample.values[i]])
    return buf.getvalue()


def atomic_write(path: str, text: str) -> None:
    """Write ``text`` to ``path`` through a temporary file and an atomic rename."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=directory)
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        umask = os.umask(0)
        os.umask(umask)
        os.chmod(tmp, 0o666 & ~umask)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def write_dataset(path: str, sample: FunctionalSample, scalar_names=None) -> None:
    atomic_write(path, format_dataset(sample, scalar_names))
