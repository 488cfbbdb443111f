"""Right-censored survival data, subject weights and CSV ingestion."""

from __future__ import annotations

import csv
import hashlib
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import (
    EmptyDataset,
    LengthMismatch,
    MissingColumn,
    NonFiniteValue,
    NonPositiveTime,
    ParseError,
    ShapeMismatch,
)

WEIGHT_KINDS = ("uniform", "ipcw", "custom")


def _frozen(a, dtype) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class SurvivalDataset:
    """Per-subject event indicator, observed time and covariate matrix.

    Arrays are copied and made read-only on construction. Construction does
    not check invariants; call :func:`validate` for that.
    """

    event: np.ndarray
    time: np.ndarray
    covariates: np.ndarray
    covariate_names: tuple[str, ...] = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "event", _frozen(np.ravel(self.event), bool))
        object.__setattr__(self, "time", _frozen(np.ravel(self.time), np.float64))
        x = np.asarray(self.covariates, dtype=np.float64)
        if x.ndim == 1:
            x = x.reshape(-1, 1)
        object.__setattr__(self, "covariates", _frozen(x, np.float64))
        names = tuple(self.covariate_names) or tuple(
            f"x{j + 1}" for j in range(self.covariates.shape[1])
        )
        object.__setattr__(self, "covariate_names", names)

    @property
    def n(self) -> int:
        return len(self.time)

    @property
    def p(self) -> int:
        return self.covariates.shape[1]

    def subset(self, idx) -> "SurvivalDataset":
        idx = np.asarray(idx)
        return SurvivalDataset(
            self.event[idx], self.time[idx], self.covariates[idx], self.covariate_names
        )

    def fingerprint(self) -> dict:
        h = hashlib.sha256()
        for a in (self.event.astype(np.uint8), self.time, self.covariates):
            h.update(np.ascontiguousarray(a).tobytes())
        return {"n": self.n, "events": event_count(self), "sha256": h.hexdigest()}


@dataclass(frozen=True, eq=False)
class SubjectWeights:
    weights: np.ndarray
    kind: str = "custom"

    def __post_init__(self):
        if self.kind not in WEIGHT_KINDS:
            raise ValueError(f"unknown weight kind {self.kind!r}")
        w = _frozen(np.ravel(self.weights), np.float64)
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise NonFiniteValue("weights must be finite and non-negative")
        object.__setattr__(self, "weights", w)

    @classmethod
    def uniform(cls, n: int) -> "SubjectWeights":
        return cls(np.ones(n), "uniform")


def validate(dataset: SurvivalDataset) -> SurvivalDataset:
    """Return ``dataset`` unchanged if it satisfies every invariant.

    Raises the first failing rule (EmptyDataset, LengthMismatch,
    NonFiniteValue, NonPositiveTime) with the offending row when applicable.
    """
    n_time, n_event, n_rows = len(dataset.time), len(dataset.event), dataset.covariates.shape[0]
    if max(n_time, n_event, n_rows) == 0:
        raise EmptyDataset("dataset has no subjects")
    if not (n_time == n_event == n_rows):
        raise LengthMismatch(
            f"event has {n_event} entries, time {n_time}, covariates {n_rows} rows"
        )
    bad = ~np.isfinite(dataset.time)
    if bad.any():
        row = int(np.argmax(bad))
        raise NonFiniteValue(f"time is not finite at row {row}", row=row)
    bad_x = ~np.isfinite(dataset.covariates).all(axis=1)
    if bad_x.any():
        row = int(np.argmax(bad_x))
        raise NonFiniteValue(f"covariate is not finite at row {row}", row=row)
    bad = dataset.time <= 0
    if bad.any():
        row = int(np.argmax(bad))
        raise NonPositiveTime(
            f"time must be > 0, got {dataset.time[row]!r} at row {row}", row=row
        )
    return dataset


def event_count(dataset: SurvivalDataset) -> int:
    return int(np.count_nonzero(dataset.event))


def read_csv(
    path,
    time_col: str = "time",
    event_col: str = "event",
    covariates: Sequence[str] | None = None,
) -> SurvivalDataset:
    """Load a dataset from a UTF-8 CSV file with a header row.

    ``covariates`` defaults to every column other than the time and event
    columns, in file order. Event cells must be exactly ``0`` or ``1``.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise EmptyDataset(f"{path}: file is empty") from None
        for col in (time_col, event_col):
            if col not in header:
                raise MissingColumn(col, column=col)
        if covariates is None:
            covariates = [h for h in header if h not in (time_col, event_col)]
        for col in covariates:
            if col not in header:
                raise MissingColumn(col, column=col)
        ti, ei = header.index(time_col), header.index(event_col)
        xi = [header.index(c) for c in covariates]

        times, events, rows = [], [], []
        for r, record in enumerate(reader):
            if not record:
                continue
            if len(record) != len(header):
                raise ParseError(
                    f"row {r}: expected {len(header)} fields, got {len(record)}", row=r
                )
            times.append(_parse_real(record[ti], r, time_col))
            cell = record[ei].strip()
            if cell not in ("0", "1"):
                raise ParseError(
                    f"row {r}, column {event_col!r}: event must be 0 or 1, got {cell!r}",
                    row=r,
                    column=event_col,
                )
            events.append(cell == "1")
            rows.append([_parse_real(record[j], r, header[j]) for j in xi])

    if not times:
        raise EmptyDataset(f"{path}: no data rows")
    x = np.array(rows, dtype=np.float64).reshape(len(times), len(xi))
    return validate(SurvivalDataset(events, times, x, tuple(covariates)))


def _parse_real(cell: str, row: int, column: str) -> float:
    cell = cell.strip()
    try:
        value = float(cell)
    except ValueError:
        raise ParseError(
            f"row {row}, column {column!r}: cannot parse {cell!r} as a real",
            row=row,
            column=column,
        ) from None
    if not math.isfinite(value):
        raise ParseError(
            f"row {row}, column {column!r}: non-finite value {cell!r}", row=row, column=column
        )
    return value


def write_csv(dataset: SurvivalDataset, path) -> None:
    """Write ``dataset`` so that :func:`read_csv` recovers it bit-exactly."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["time", "event", *dataset.covariate_names])
        for t, e, x in zip(dataset.time, dataset.event, dataset.covariates):
            w.writerow([repr(float(t)), int(e), *(repr(float(v)) for v in x)])


def check_risk_scores(scores, n: int, n_times: int | None = None) -> np.ndarray:
    """Coerce risk scores to float64; time-dependent scores are n x T."""
    s = np.asarray(scores, dtype=np.float64)
    if s.ndim == 2 and s.shape[1] == 1:
        s = s[:, 0]
    if s.ndim not in (1, 2) or s.shape[0] != n:
        raise ShapeMismatch(f"risk scores of shape {s.shape} do not match {n} subjects")
    if s.ndim == 2 and n_times is not None and s.shape[1] != n_times:
        raise ShapeMismatch(
            f"time-dependent scores have {s.shape[1]} columns for {n_times} evaluation times"
        )
    if not np.all(np.isfinite(s)):
        raise NonFiniteValue("risk scores must be finite")
    return s


def check_survival_probabilities(surv, n: int, n_times: int) -> np.ndarray:
    s = np.asarray(surv, dtype=np.float64)
    if s.ndim == 1 and n_times == 1:
        s = s.reshape(-1, 1)
    if s.shape != (n, n_times):
        raise ShapeMismatch(f"survival probabilities of shape {s.shape}, expected {(n, n_times)}")
    if not np.all(np.isfinite(s)) or np.any(s < 0) or np.any(s > 1):
        raise NonFiniteValue("survival probabilities must lie in [0, 1]")
    return s


def as_arrays(event, time) -> tuple[np.ndarray, np.ndarray]:
    e = np.asarray(event).ravel().astype(bool)
    t = np.asarray(time, dtype=np.float64).ravel()
    if e.shape != t.shape:
        raise LengthMismatch(f"event has {e.size} entries, time has {t.size}")
    return e, t
