"""Loading, writing and synthesizing hourly heat-pump time-series tables.

The canonical on-disk layout is a flat delimited file: the first column is
``utc_timestamp`` (ISO 8601 with explicit offset) and every other column is
numeric and named ``<COUNTRY>_<variable>``, e.g. ``DE_heat_demand``.
"""

from __future__ import annotations

import csv
import logging
import math
import os
import re
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

logger = logging.getLogger(__name__)

HOUR = np.timedelta64(3600, "s")

UNITS = ("MW", "dimensionless", "kelvin", "celsius")

# variable suffix -> unit tag
_UNIT_BY_VARIABLE = {
    "heat_demand": "MW",
    "power_input": "MW",
    "heat_output": "MW",
    "t_sink": "kelvin",
    "t_source": "kelvin",
    "cop": "dimensionless",
}

_COUNTRY_RE = re.compile(r"^([A-Z]{2,3})_(.+)$")

_MISSING_TOKENS = {"", "nan", "na", "n/a", "null", "none"}

# Country tags handed out by the synthetic generator, in order.
SYNTHETIC_COUNTRIES = (
    "AT", "BE", "BG", "CH", "CZ", "DE", "DK", "EE", "ES", "FI", "FR", "GB", "GR",
    "HR", "HU", "IE", "IT", "LT", "LU", "LV", "NL", "NO", "PL", "PT", "RO", "SE",
    "SI", "SK",
)


class TableError(ValueError):
    """Raised when a table cannot be loaded or fails validation."""


def infer_unit(name: str) -> str:
    variable = split_country(name)[1]
    if variable.endswith("_celsius"):
        return "celsius"
    for suffix, unit in _UNIT_BY_VARIABLE.items():
        if variable == suffix or variable.endswith("_" + suffix):
            return unit
    return "dimensionless"


def split_country(name: str) -> tuple[str | None, str]:
    """Split ``DE_heat_demand`` into ``("DE", "heat_demand")``."""
    m = _COUNTRY_RE.match(name)
    if m is None:
        return None, name
    return m.group(1), m.group(2)


@dataclass(frozen=True)
class TimeSeriesTable:
    """Immutable hourly table of numeric columns.

    ``data`` has shape (rows, columns). ``timestamps`` is ``datetime64[s]``
    in UTC. ``has_gaps`` is True only when the loader was told gaps are
    acceptable, or when rows were dropped for missing values.
    """

    timestamps: np.ndarray
    names: tuple[str, ...]
    data: np.ndarray
    units: tuple[str, ...]
    countries: tuple[str | None, ...]
    has_gaps: bool = False

    def __post_init__(self):
        ts = np.asarray(self.timestamps, dtype="datetime64[s]")
        data = np.array(self.data, dtype=np.float64, copy=True)
        if data.ndim == 1:
            data = data.reshape(-1, 1)
        if data.shape != (ts.size, len(self.names)):
            raise TableError(
                f"data shape {data.shape} does not match "
                f"{ts.size} timestamps x {len(self.names)} columns"
            )
        if len(set(self.names)) != len(self.names):
            raise TableError("duplicate column names")
        if len(self.units) != len(self.names) or len(self.countries) != len(self.names):
            raise TableError("units/countries must have one entry per column")
        for u in self.units:
            if u not in UNITS:
                raise TableError(f"unknown unit tag {u!r}")
        if not np.all(np.isfinite(data)):
            raise TableError("table contains NaN or inf")
        if ts.size > 1:
            steps = np.diff(ts)
            if np.any(steps <= np.timedelta64(0, "s")):
                if np.any(steps == np.timedelta64(0, "s")):
                    raise TableError("duplicate timestamps")
                raise TableError("non-monotone timestamps")
            if not self.has_gaps and np.any(steps != HOUR):
                raise TableError("timestamps are not uniformly spaced at 1 hour")
        ts.flags.writeable = False
        data.flags.writeable = False
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "names", tuple(self.names))
        object.__setattr__(self, "units", tuple(self.units))
        object.__setattr__(self, "countries", tuple(self.countries))

    @classmethod
    def from_columns(cls, timestamps, columns: dict[str, np.ndarray], has_gaps=False):
        """Build a table whose units and country tags are inferred from names."""
        names = tuple(columns)
        data = np.column_stack([np.asarray(columns[n], dtype=float) for n in names]) \
            if names else np.empty((len(timestamps), 0))
        return cls(
            timestamps=timestamps,
            names=names,
            data=data,
            units=tuple(infer_unit(n) for n in names),
            countries=tuple(split_country(n)[0] for n in names),
            has_gaps=has_gaps,
        )

    @property
    def n_rows(self) -> int:
        return int(self.timestamps.size)

    def __len__(self):
        return self.n_rows

    def __contains__(self, name):
        return name in self.names

    def column(self, name: str) -> np.ndarray:
        try:
            return self.data[:, self.names.index(name)]
        except ValueError:
            raise KeyError(name) from None

    __getitem__ = column

    def country_tags(self) -> list[str]:
        """Distinct country tags in column order."""
        seen = []
        for c in self.countries:
            if c is not None and c not in seen:
                seen.append(c)
        return seen

    def years(self) -> np.ndarray:
        return self.timestamps.astype("datetime64[Y]").astype(int) + 1970

    def equals(self, other: "TimeSeriesTable") -> bool:
        return (
            self.names == other.names
            and self.units == other.units
            and self.countries == other.countries
            and np.array_equal(self.timestamps, other.timestamps)
            and np.array_equal(self.data, other.data)
        )


@dataclass
class LoadReport:
    rows_read: int = 0
    rows_dropped: int = 0
    columns_retained: list[str] = field(default_factory=list)
    missing_cells: int = 0
    gaps: int = 0

    def to_dict(self):
        return {
            "rows_read": self.rows_read,
            "rows_dropped": self.rows_dropped,
            "columns_retained": list(self.columns_retained),
            "missing_cells": self.missing_cells,
            "gaps": self.gaps,
        }


def parse_timestamp(text: str) -> np.datetime64:
    text = text.strip()
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    try:
        dt = datetime.fromisoformat(text)
    except ValueError:
        raise TableError(f"cannot parse timestamp {text!r}") from None
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    dt = dt.astimezone(timezone.utc).replace(tzinfo=None)
    return np.datetime64(dt, "s")


def _parse_cell(text: str) -> float:
    t = text.strip()
    if t.lower() in _MISSING_TOKENS:
        return math.nan
    try:
        v = float(t)
    except ValueError:
        return math.nan
    return v if math.isfinite(v) else math.nan


def load_table(
    path,
    delimiter: str = ";",
    timestamp_column: str = "utc_timestamp",
    missing: str = "drop-row",
    allow_gaps: bool = False,
) -> tuple[TimeSeriesTable, LoadReport]:
    """Read a flat delimited file into a validated table.

    Args:
        path: file to read.
        delimiter: field separator.
        timestamp_column: name of the ISO 8601 timestamp column.
        missing: ``"drop-row"`` drops any row with an empty or unparsable
            cell; ``"reject"`` raises instead.
        allow_gaps: accept non-hourly spacing already present in the file.

    Returns:
        The table and a :class:`LoadReport`.
    """
    if missing not in ("drop-row", "reject"):
        raise ValueError(f"unknown missing-value policy {missing!r}")
    path = Path(path)
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh, delimiter=delimiter))
    except OSError as exc:
        raise TableError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise TableError(f"{path}: missing header row")
    header = [h.strip() for h in rows[0]]
    body = [r for r in rows[1:] if any(cell.strip() for cell in r)]
    if timestamp_column not in header:
        raise TableError(f"{path}: no timestamp column {timestamp_column!r}")
    ts_pos = header.index(timestamp_column)
    value_names = [h for i, h in enumerate(header) if i != ts_pos]
    value_pos = [i for i in range(len(header)) if i != ts_pos]

    report = LoadReport(rows_read=len(body))
    stamps = []
    values = np.full((len(body), len(value_names)), np.nan)
    for r, row in enumerate(body):
        if len(row) != len(header):
            raise TableError(f"{path}: row {r + 2} has {len(row)} fields, expected {len(header)}")
        stamps.append(parse_timestamp(row[ts_pos]))
        for j, pos in enumerate(value_pos):
            values[r, j] = _parse_cell(row[pos])
    stamps = np.array(stamps, dtype="datetime64[s]")

    for j, name in enumerate(value_names):
        if body and np.all(np.isnan(values[:, j])):
            raise TableError(f"{path}: column {name!r} is entirely non-numeric")

    bad = np.isnan(values)
    report.missing_cells = int(bad.sum())
    bad_rows = bad.any(axis=1)
    if bad_rows.any() and missing == "reject":
        first = int(np.argmax(bad_rows))
        raise TableError(f"{path}: missing value in row {first + 2}")

    # validate ordering on the full file before dropping anything
    if stamps.size > 1:
        steps = np.diff(stamps)
        if np.any(steps == np.timedelta64(0, "s")):
            raise TableError(f"{path}: duplicate timestamps")
        if np.any(steps < np.timedelta64(0, "s")):
            raise TableError(f"{path}: non-monotone timestamps")
        if not allow_gaps and np.any(steps != HOUR):
            raise TableError(f"{path}: timestamps are not uniformly spaced at 1 hour")

    keep = ~bad_rows
    report.rows_dropped = int(bad_rows.sum())
    stamps = stamps[keep]
    values = values[keep]
    report.gaps = int(np.sum(np.diff(stamps) != HOUR)) if stamps.size > 1 else 0
    report.columns_retained = list(value_names)
    if report.rows_dropped:
        logger.info("%s: dropped %d rows with missing values", path, report.rows_dropped)

    table = TimeSeriesTable(
        timestamps=stamps,
        names=tuple(value_names),
        data=values.reshape(len(stamps), len(value_names)),
        units=tuple(infer_unit(n) for n in value_names),
        countries=tuple(split_country(n)[0] for n in value_names),
        has_gaps=allow_gaps or report.gaps > 0,
    )
    return table, report


def format_timestamp(ts: np.datetime64) -> str:
    return str(np.datetime_as_string(ts, unit="s")) + "+00:00"


def write_table(table: TimeSeriesTable, path, delimiter: str = ";") -> Path:
    """Write the canonical CSV (shortest round-trip float repr, '.' decimals)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        w.writerow(["utc_timestamp", *table.names])
        stamps = np.datetime_as_string(table.timestamps, unit="s")
        for i in range(table.n_rows):
            w.writerow([stamps[i] + "+00:00", *(repr(float(v)) for v in table.data[i])])
    os.replace(tmp, path)
    return path


@dataclass(frozen=True)
class SyntheticConfig:
    start_year: int = 2008
    end_year: int = 2012
    countries: int = 3
    base_demand: float = 50.0
    seasonal_amplitude: float = 30.0
    diurnal_amplitude: float = 10.0
    noise_std: float = 8.0
    t_sink: float = 318.15
    t_source_mean: float = 283.15
    t_source_amplitude: float = 10.0
    seed: int = 0

    def __post_init__(self):
        if self.end_year < self.start_year:
            raise ValueError("end_year must be >= start_year")
        if self.countries < 1:
            raise ValueError("need at least one country")
        for name in ("base_demand", "seasonal_amplitude", "diurnal_amplitude",
                     "noise_std", "t_source_amplitude"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.t_source_mean - self.t_source_amplitude <= 0:
            raise ValueError("source temperature must stay above 0 K")
        if self.t_sink <= self.t_source_mean + self.t_source_amplitude:
            raise ValueError("t_sink must exceed the maximum source temperature")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")


def hourly_range(start_year: int, end_year: int) -> np.ndarray:
    start = np.datetime64(f"{start_year:04d}-01-01T00:00:00", "s")
    stop = np.datetime64(f"{end_year + 1:04d}-01-01T00:00:00", "s")
    return np.arange(start, stop, HOUR)


def day_of_year(timestamps: np.ndarray) -> np.ndarray:
    """1-based day of year as a float."""
    days = timestamps.astype("datetime64[D]")
    jan1 = timestamps.astype("datetime64[Y]").astype("datetime64[D]")
    return (days - jan1).astype(int).astype(float) + 1.0


def hour_of_day(timestamps: np.ndarray) -> np.ndarray:
    secs = (timestamps - timestamps.astype("datetime64[D]")).astype("timedelta64[s]").astype(int)
    return (secs // 3600).astype(float)


def generate_synthetic(config: SyntheticConfig) -> TimeSeriesTable:
    """Generate a physically consistent multi-country table.

    Per country: heat demand is a seasonal plus diurnal cosine with Gaussian
    noise clipped at zero, the source temperature follows the seasonal
    cosine, the sink temperature is constant, COP is a per-country fraction
    (uniform in [0.3, 0.8]) of the Carnot COP, and power input is
    heat demand divided by COP.
    """
    rng = np.random.Generator(np.random.Philox(config.seed))
    ts = hourly_range(config.start_year, config.end_year)
    seasonal = np.cos(2 * np.pi * day_of_year(ts) / 365.25)
    diurnal = np.cos(2 * np.pi * hour_of_day(ts) / 24.0)
    t_source = config.t_source_mean + config.t_source_amplitude * seasonal
    t_sink = np.full(ts.size, config.t_sink)
    carnot = t_sink / (t_sink - t_source)

    tags = list(SYNTHETIC_COUNTRIES[: config.countries])
    tags += [f"X{i:02d}" for i in range(len(tags), config.countries)]
    columns = {}
    for tag in tags:
        factor = rng.uniform(0.3, 0.8)
        noise = rng.standard_normal(ts.size) * config.noise_std
        demand = config.base_demand + config.seasonal_amplitude * seasonal \
            + config.diurnal_amplitude * diurnal + noise
        demand = np.maximum(demand, 0.0)
        cop = factor * carnot
        columns[f"{tag}_heat_demand"] = demand
        columns[f"{tag}_t_source"] = t_source
        columns[f"{tag}_t_sink"] = t_sink
        columns[f"{tag}_cop"] = cop
        columns[f"{tag}_power_input"] = demand / cop
    return TimeSeriesTable.from_columns(ts, columns)
