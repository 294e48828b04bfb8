"""Snapshot matrices, shifted pairs, decimation and CSV ingestion."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    InsufficientDataError,
    InvalidDataError,
    InvalidInputError,
    NonUniformSamplingError,
)

JITTER_TOLERANCE = 1e-6


@dataclass(frozen=True)
class SnapshotMatrix:
    """Uniformly sampled multichannel record, one column per time instant."""

    data: np.ndarray
    dt: float
    channel_labels: tuple = ()
    origin_time: float = 0.0

    def __post_init__(self):
        data = np.array(self.data, dtype=float, copy=True)
        if data.ndim == 1:
            data = data[None, :]
        if data.ndim != 2:
            raise InvalidInputError(f"snapshot data must be 2-D, got shape {data.shape}")
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise InvalidInputError(f"dt must be positive, got {self.dt}")
        if data.shape[1] < 2:
            raise InsufficientDataError(f"need at least 2 samples, got {data.shape[1]}")
        if not np.all(np.isfinite(data)):
            raise InvalidDataError("snapshot data contains non-finite entries")
        labels = tuple(self.channel_labels) or tuple(f"ch{i + 1}" for i in range(data.shape[0]))
        if len(labels) != data.shape[0]:
            raise InvalidInputError(
                f"{len(labels)} channel labels for {data.shape[0]} channels"
            )
        data.setflags(write=False)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "dt", float(self.dt))
        object.__setattr__(self, "channel_labels", labels)

    @property
    def n_channels(self) -> int:
        return self.data.shape[0]

    @property
    def n_samples(self) -> int:
        return self.data.shape[1]

    @property
    def sampling_frequency(self) -> float:
        return 1.0 / self.dt

    @property
    def times(self) -> np.ndarray:
        return self.origin_time + self.dt * np.arange(self.n_samples)

    def replace(self, **changes) -> "SnapshotMatrix":
        kwargs = dict(data=self.data, dt=self.dt, channel_labels=self.channel_labels,
                      origin_time=self.origin_time)
        kwargs.update(changes)
        return SnapshotMatrix(**kwargs)


@dataclass(frozen=True)
class SnapshotPair:
    x: np.ndarray
    y: np.ndarray
    dt: float
    augmented: bool = False
    n_channels: int = field(default=0)

    def __post_init__(self):
        if self.x.shape != self.y.shape:
            raise InvalidInputError(f"X {self.x.shape} and Y {self.y.shape} differ in shape")
        if not self.n_channels:
            rows = self.x.shape[0] // 2 if self.augmented else self.x.shape[0]
            object.__setattr__(self, "n_channels", rows)


def build_pair(snap: SnapshotMatrix, augment: bool = False) -> SnapshotPair:
    """Split a record into the one-step-shifted pair (X, Y).

    With ``augment`` each column is stacked with its successor, which lets
    real oscillatory data produce complex-conjugate eigenpairs.
    """
    d = snap.data
    n = snap.n_samples
    if augment:
        if n < 4:
            raise InsufficientDataError(f"augmented pair needs at least 4 samples, got {n}")
        x = np.vstack([d[:, : n - 2], d[:, 1 : n - 1]])
        y = np.vstack([d[:, 1 : n - 1], d[:, 2:]])
    else:
        if n < 3:
            raise InsufficientDataError(f"pair needs at least 3 samples, got {n}")
        x = d[:, : n - 1].copy()
        y = d[:, 1:].copy()
    return SnapshotPair(x=x, y=y, dt=snap.dt, augmented=augment, n_channels=snap.n_channels)


def decimate(snap: SnapshotMatrix, factor: int) -> SnapshotMatrix:
    """Keep every ``factor``-th column starting with the first."""
    if int(factor) != factor or factor < 1:
        raise InvalidInputError(f"decimation factor must be a positive integer, got {factor}")
    factor = int(factor)
    if factor == 1:
        return snap
    data = snap.data[:, ::factor]
    if data.shape[1] < 4:
        raise InsufficientDataError(
            f"decimating {snap.n_samples} samples by {factor} leaves {data.shape[1]} (< 4)"
        )
    return snap.replace(data=data, dt=snap.dt * factor)


def remove_mean(snap: SnapshotMatrix) -> SnapshotMatrix:
    """Subtract each channel's time average."""
    return snap.replace(data=snap.data - snap.data.mean(axis=1, keepdims=True))


def window(snap: SnapshotMatrix, start: int = 0, length: int | None = None) -> SnapshotMatrix:
    """Sub-record of ``length`` samples beginning at sample ``start``."""
    stop = snap.n_samples if length is None else start + length
    if start < 0 or stop > snap.n_samples or stop - start < 2:
        raise InsufficientDataError(
            f"window [{start}, {stop}) invalid for {snap.n_samples} samples"
        )
    return snap.replace(data=snap.data[:, start:stop], origin_time=snap.origin_time + start * snap.dt)


@dataclass(frozen=True)
class CsvSchema:
    """Either name the time column (default ``t``) or declare a fixed sampling interval."""

    time_column: str | None = None
    dt: float | None = None

    def __post_init__(self):
        if self.time_column is None and self.dt is None:
            object.__setattr__(self, "time_column", "t")
        elif self.time_column is not None and self.dt is not None:
            raise InvalidInputError("schema needs exactly one of time_column or dt")
        if self.dt is not None and not self.dt > 0:
            raise InvalidInputError(f"dt must be positive, got {self.dt}")


def ingest_csv(path, schema: CsvSchema = CsvSchema()) -> SnapshotMatrix:
    """Read a wide CSV (optional time column plus one column per channel).

    Lines starting with ``#`` are comments and are skipped.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        numbered = [(k + 1, line) for k, line in enumerate(fh) if not line.startswith("#")]
    parsed = list(csv.reader(line for _, line in numbered))
    if not parsed:
        raise InvalidDataError(f"{path}: empty file")
    header = [h.strip() for h in parsed[0]]
    rows = parsed[1:]
    line_no = [k for k, _ in numbered[1:]]

    if schema.time_column is not None and schema.time_column not in header:
        raise InvalidDataError(f"{path}: no time column {schema.time_column!r} in header")

    values = np.empty((len(rows), len(header)))
    for i, row in enumerate(rows):
        if len(row) != len(header):
            raise InvalidDataError(
                f"{path}:{line_no[i]}: expected {len(header)} fields, got {len(row)}"
            )
        for j, cell in enumerate(row):
            try:
                values[i, j] = float(cell) if cell.strip() else np.nan
            except ValueError:
                raise InvalidDataError(
                    f"{path}:{line_no[i]}: column {header[j]!r} is not a number: {cell!r}"
                ) from None
    bad = np.argwhere(~np.isfinite(values))
    if bad.size:
        i, j = bad[0]
        raise InvalidDataError(f"{path}:{line_no[i]}: column {header[j]!r} is NaN or missing")

    if schema.time_column is not None:
        tcol = header.index(schema.time_column)
        t = values[:, tcol]
        channels = [j for j in range(len(header)) if j != tcol]
        if t.size < 2:
            raise InsufficientDataError(f"{path}: need at least 2 rows")
        steps = np.diff(t)
        dt = float(steps.mean())
        if dt <= 0 or np.max(np.abs(steps - dt)) > JITTER_TOLERANCE * dt:
            raise NonUniformSamplingError(
                f"{path}: time column deviates from uniform spacing by "
                f"{np.max(np.abs(steps - dt)) / abs(dt):.3g} (relative)"
            )
        origin = float(t[0])
    else:
        channels = list(range(len(header)))
        dt, origin = schema.dt, 0.0

    return SnapshotMatrix(
        data=values[:, channels].T,
        dt=dt,
        channel_labels=tuple(header[j] for j in channels),
        origin_time=origin,
    )


def write_csv(snap: SnapshotMatrix, path, time_column: str = "t", preamble=()) -> None:
    """Write ``snap`` in the wide layout read by :func:`ingest_csv`.

    :param preamble: lines written first as ``#`` comments
    """
    table = np.column_stack([snap.times, snap.data.T])
    header = "".join(f"# {line}\n" for line in preamble) + ",".join([time_column, *snap.channel_labels])
    np.savetxt(path, table, delimiter=",", header=header, comments="", fmt="%.17g")
