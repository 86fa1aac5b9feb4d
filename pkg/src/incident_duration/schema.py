"""Incident data schema: record type, duration bands, feature sets, encoding.

The record layout mirrors what a traffic management center captures for a
freeway incident: lane/location/severity details known at report time, the
responder mix, and linear-reference keys (route id + measure) used to join
roadway attributes. Durations are total minutes from incident start until
the roadway is clear.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from datetime import datetime
from enum import IntEnum
from typing import Iterable, Optional, Sequence

import numpy as np

DIRECTIONS = ("N", "S", "W", "E")
COUNTY_REGIONS = ("NE", "NW", "Central", "SE", "SW")
EVENT_TYPES = ("crash1", "crash2", "crash3", "debris")
DETECTION_METHODS = ("police", "highway_helper", "automated", "dot", "cameras", "other")
RESPONDER_TYPES = ("police", "tow", "dot", "dps", "ems", "hh")
TERRAINS = ("flat", "rolly", "hilly")
COUNT_BINS = ("0", "1", "2", "3+")
TIMES_OF_DAY = ("Morning", "EarlyAfternoon", "Afternoon", "EveningRush", "Evening", "Night")
AADT_BINS = (1, 2, 3, 4, 5)

SHORT_MAX_MINUTES = 30.0
MEDIUM_MAX_MINUTES = 120.0


class SchemaError(ValueError):
    """Invalid record content or invalid encoding request."""


class EncodingError(SchemaError):
    """A value could not be encoded under the active schema."""


class RecordValidationError(SchemaError):
    """Raised when building a record from loose fields; lists offending fields."""

    def __init__(self, problems: dict[str, str]):
        self.problems = dict(problems)
        detail = "; ".join(f"{k}: {v}" for k, v in sorted(self.problems.items()))
        super().__init__(f"invalid incident fields: {detail}")


class DurationBand(IntEnum):
    """Short (< 30 min), medium (30 min to 2 h inclusive), long (> 2 h)."""

    SHORT = 0
    MEDIUM = 1
    LONG = 2

    @property
    def label(self) -> str:
        return ("S", "M", "L")[int(self)]


BAND_LABELS = ("S", "M", "L")


def band_of(duration_minutes: float) -> DurationBand:
    """Map a positive duration in minutes to its band.

    Boundaries: [0, 30) short, [30, 120] medium, (120, inf) long, so every
    duration lands in exactly one band.
    """
    d = float(duration_minutes)
    if not math.isfinite(d) or d <= 0:
        raise SchemaError(f"duration must be a positive number of minutes, got {duration_minutes!r}")
    if d < SHORT_MAX_MINUTES:
        return DurationBand.SHORT
    if d <= MEDIUM_MAX_MINUTES:
        return DurationBand.MEDIUM
    return DurationBand.LONG


@dataclass(frozen=True)
class TemporalFeatures:
    tod: str
    dow: int
    season: int
    year: int


def derive_temporal(start_time: datetime) -> TemporalFeatures:
    """Derive time-of-day bin, day-of-week, season, and year from a timestamp.

    Time-of-day bins (by hour): Morning 7-9, EarlyAfternoon 10-12,
    Afternoon 13-15, EveningRush 16-18, Evening 19-21, Night 22-6.
    Day of week is 0=Monday..6=Sunday. Seasons are meteorological:
    1=Winter (Dec-Feb), 2=Spring, 3=Summer, 4=Autumn.
    """
    h = start_time.hour
    if 7 <= h <= 9:
        tod = "Morning"
    elif 10 <= h <= 12:
        tod = "EarlyAfternoon"
    elif 13 <= h <= 15:
        tod = "Afternoon"
    elif 16 <= h <= 18:
        tod = "EveningRush"
    elif 19 <= h <= 21:
        tod = "Evening"
    else:
        tod = "Night"
    month = start_time.month
    if month in (12, 1, 2):
        season = 1
    elif month <= 5:
        season = 2
    elif month <= 8:
        season = 3
    else:
        season = 4
    return TemporalFeatures(tod=tod, dow=start_time.weekday(), season=season, year=start_time.year)


@dataclass(frozen=True)
class IncidentRecord:
    """One incident as reported, plus the observed duration when known.

    ``aadt_bin``, ``hourly_volume``, ``surface_width``, ``surface_type`` and
    ``terrain`` are roadway attributes joined from asset data and may be
    absent on a live report; ``duration_minutes`` is absent at prediction
    time. ``responders`` holds the subset of RESPONDER_TYPES on scene.
    """

    id: str
    start_time: datetime
    direction: str
    county_region: str
    city_number: int
    event_type: str
    lanes: int
    only_shoulders_closed: bool
    vehicles: str
    trucks: str
    injuries: bool
    fatalities: bool
    detection_method: str
    responders: frozenset = frozenset()
    route_id: str = ""
    measure: float = 0.0
    aadt_bin: Optional[int] = None
    hourly_volume: Optional[int] = None
    surface_width: Optional[float] = None
    surface_type: Optional[int] = None
    terrain: Optional[str] = None
    duration_minutes: Optional[float] = None

    def __post_init__(self):
        if self.duration_minutes is not None and not self.duration_minutes > 0:
            raise SchemaError(f"record {self.id}: duration_minutes must be > 0, got {self.duration_minutes}")
        if self.aadt_bin is not None and self.aadt_bin not in AADT_BINS:
            raise SchemaError(f"record {self.id}: aadt_bin must be in 1..5, got {self.aadt_bin}")
        if self.measure < 0:
            raise SchemaError(f"record {self.id}: measure must be non-negative")
        if self.lanes < 1:
            raise SchemaError(f"record {self.id}: lanes must be a positive integer")
        object.__setattr__(self, "responders", frozenset(self.responders))

    @property
    def band(self) -> Optional[DurationBand]:
        if self.duration_minutes is None:
            return None
        return band_of(self.duration_minutes)


# Fields usable as model inputs, in canonical order. FS1 is the information
# available from the initial report; FS2 adds responder presence and the
# roadway attributes joined through route/measure.
FS1_FIELDS = (
    "tod",
    "dow",
    "season",
    "year",
    "direction",
    "county_region",
    "city_number",
    "event_type",
    "lanes",
    "only_shoulders_closed",
    "vehicles",
    "trucks",
    "injuries",
    "fatalities",
    "detection_method",
)
FS2_FIELDS = FS1_FIELDS + (
    "responders",
    "aadt_bin",
    "hourly_volume",
    "surface_width",
    "surface_type",
    "terrain",
    "measure",
)

_ONEHOT_FIELDS = {
    "tod",
    "direction",
    "county_region",
    "city_number",
    "event_type",
    "vehicles",
    "trucks",
    "detection_method",
    "surface_type",
    "terrain",
}
_ORDINAL_FIELDS = {"dow", "season", "year", "aadt_bin"}
_NUMERIC_FIELDS = {"lanes", "hourly_volume", "surface_width", "measure"}
_BINARY_FIELDS = {"only_shoulders_closed", "injuries", "fatalities"}

# Closed category sets, in canonical column order. Open categorical fields
# (city_number, surface_type) take their levels from the fitted data.
_CLOSED_LEVELS = {
    "tod": TIMES_OF_DAY,
    "direction": DIRECTIONS,
    "county_region": COUNTY_REGIONS,
    "event_type": EVENT_TYPES,
    "vehicles": COUNT_BINS,
    "trucks": COUNT_BINS,
    "detection_method": DETECTION_METHODS,
    "terrain": TERRAINS,
}

UNKNOWN_LEVEL = "__unknown__"


@dataclass(frozen=True)
class FeatureSet:
    """Named selection of record fields used as model inputs."""

    kind: str
    columns: tuple

    def __post_init__(self):
        if self.kind not in ("FS1_Basic", "FS2_Full"):
            raise SchemaError(f"unknown feature set kind {self.kind!r}")


def feature_set(kind: str) -> FeatureSet:
    """Build the FS1 (basic) or FS2 (full) feature set."""
    k = kind.lower()
    if k in ("fs1", "fs1_basic", "basic"):
        return FeatureSet("FS1_Basic", FS1_FIELDS)
    if k in ("fs2", "fs2_full", "full", "all"):
        return FeatureSet("FS2_Full", FS2_FIELDS)
    raise SchemaError(f"unknown feature set {kind!r} (expected fs1 or fs2)")


@dataclass(frozen=True)
class FeatureColumn:
    name: str
    kind: str  # numeric | onehot | binary | ordinal
    source: str


@dataclass
class FeatureMatrix:
    """Encoded design matrix with column metadata and an optional target."""

    columns: tuple
    rows: np.ndarray
    target: Optional[np.ndarray] = None

    def __post_init__(self):
        self.rows = np.asarray(self.rows, dtype=np.float64)
        if self.rows.ndim != 2 or self.rows.shape[1] != len(self.columns):
            raise SchemaError(
                f"matrix shape {self.rows.shape} does not match {len(self.columns)} columns"
            )
        if self.target is not None:
            self.target = np.asarray(self.target, dtype=np.float64)
            if self.target.shape[0] != self.rows.shape[0]:
                raise SchemaError("target length does not match row count")

    @property
    def n_rows(self) -> int:
        return self.rows.shape[0]

    @property
    def n_cols(self) -> int:
        return self.rows.shape[1]

    @property
    def names(self) -> tuple:
        return tuple(c.name for c in self.columns)

    def column_index(self, name: str) -> int:
        return self.names.index(name)

    def drop_columns(self, names: Iterable[str]) -> "FeatureMatrix":
        drop = set(names)
        keep = [i for i, c in enumerate(self.columns) if c.name not in drop]
        return FeatureMatrix(
            tuple(self.columns[i] for i in keep), self.rows[:, keep], self.target
        )

    def take_rows(self, idx) -> "FeatureMatrix":
        idx = np.asarray(idx)
        t = None if self.target is None else self.target[idx]
        return FeatureMatrix(self.columns, self.rows[idx], t)

    def with_target(self, target) -> "FeatureMatrix":
        return FeatureMatrix(self.columns, self.rows, np.asarray(target, dtype=np.float64))


def concat_matrices(a: FeatureMatrix, b: FeatureMatrix) -> FeatureMatrix:
    if a.names != b.names:
        raise SchemaError("cannot concatenate matrices with different schemas")
    target = None
    if a.target is not None and b.target is not None:
        target = np.concatenate([a.target, b.target])
    return FeatureMatrix(a.columns, np.vstack([a.rows, b.rows]), target)


def _field_value(record: IncidentRecord, fname: str, temporal: TemporalFeatures):
    if fname in ("tod", "dow", "season", "year"):
        return getattr(temporal, fname)
    return getattr(record, fname)


class Encoder:
    """Column encoder for incident records.

    Unordered categoricals are one-hot over the levels observed at fit time;
    the responder set expands to one presence bit per responder type; ordinal
    categories (aadt bin, season, day of week, year) stay integer-coded.
    With ``add_unknown=True`` every one-hot group gains an explicit
    ``__unknown__`` column so that records carrying categories never seen in
    training still encode (used by the serving path).
    """

    def __init__(self, fset: FeatureSet, add_unknown: bool = False):
        self.feature_set = fset
        self.add_unknown = add_unknown
        self.levels_: dict = {}
        self.columns_: Optional[tuple] = None

    def fit(self, records: Sequence[IncidentRecord]) -> "Encoder":
        if not records:
            raise EncodingError("cannot fit an encoder on an empty record list")
        if not self.feature_set.columns:
            raise EncodingError("feature set has no columns")
        temporals = [derive_temporal(r.start_time) for r in records]
        cols: list[FeatureColumn] = []
        for fname in self.feature_set.columns:
            if fname == "responders":
                cols.extend(FeatureColumn(f"resp_{t}", "binary", "responders") for t in RESPONDER_TYPES)
                continue
            if fname in _NUMERIC_FIELDS:
                cols.append(FeatureColumn(fname, "numeric", fname))
            elif fname in _ORDINAL_FIELDS:
                cols.append(FeatureColumn(fname, "ordinal", fname))
            elif fname in _BINARY_FIELDS:
                cols.append(FeatureColumn(fname, "binary", fname))
            elif fname in _ONEHOT_FIELDS:
                levels = self._observed_levels(fname, records, temporals)
                self.levels_[fname] = levels
                cols.extend(FeatureColumn(f"{fname}={lv}", "onehot", fname) for lv in levels)
                if self.add_unknown:
                    cols.append(FeatureColumn(f"{fname}={UNKNOWN_LEVEL}", "onehot", fname))
            else:
                raise EncodingError(f"feature set names unknown field {fname!r}")
        self.columns_ = tuple(cols)
        return self

    def _observed_levels(self, fname, records, temporals):
        closed = _CLOSED_LEVELS.get(fname)
        seen = set()
        for i, r in enumerate(records):
            v = _field_value(r, fname, temporals[i])
            if v is None:
                continue
            if closed is not None and v not in closed:
                raise EncodingError(f"unknown value {v!r} for field '{fname}' at row {i}")
            seen.add(v)
        if closed is not None:
            return tuple(lv for lv in closed if lv in seen)
        return tuple(sorted(seen))

    def transform(self, records: Sequence[IncidentRecord], strict: Optional[bool] = None) -> FeatureMatrix:
        """Encode records against the fitted schema.

        ``strict`` controls how categories outside the fitted levels are
        handled: error (the default when no unknown column exists) or route
        to the group's ``__unknown__`` column.
        """
        if self.columns_ is None:
            raise EncodingError("encoder has not been fitted")
        if not records:
            raise EncodingError("cannot encode an empty record list")
        if strict is None:
            strict = not self.add_unknown
        temporals = [derive_temporal(r.start_time) for r in records]
        n = len(records)
        out = np.zeros((n, len(self.columns_)), dtype=np.float64)
        j = 0
        for fname in self.feature_set.columns:
            if fname == "responders":
                for t in RESPONDER_TYPES:
                    for i, r in enumerate(records):
                        out[i, j] = 1.0 if t in r.responders else 0.0
                    j += 1
                continue
            if fname in _NUMERIC_FIELDS or fname in _ORDINAL_FIELDS:
                for i, r in enumerate(records):
                    v = _field_value(r, fname, temporals[i])
                    out[i, j] = np.nan if v is None else float(v)
                j += 1
            elif fname in _BINARY_FIELDS:
                for i, r in enumerate(records):
                    out[i, j] = 1.0 if getattr(r, fname) else 0.0
                j += 1
            else:
                levels = self.levels_[fname]
                index = {lv: pos for pos, lv in enumerate(levels)}
                width = len(levels) + (1 if self.add_unknown else 0)
                for i, r in enumerate(records):
                    v = _field_value(r, fname, temporals[i])
                    if v is None:
                        out[i, j : j + width] = np.nan
                        continue
                    pos = index.get(v)
                    if pos is None:
                        closed = _CLOSED_LEVELS.get(fname)
                        if strict or not self.add_unknown:
                            raise EncodingError(
                                f"unknown value {v!r} for field '{fname}' at row {i}"
                            )
                        if closed is not None and v not in closed:
                            raise EncodingError(
                                f"unknown value {v!r} for field '{fname}' at row {i}"
                            )
                        pos = width - 1
                    out[i, j + pos] = 1.0
                j += width
        return FeatureMatrix(self.columns_, out)

    def fit_transform(self, records: Sequence[IncidentRecord]) -> FeatureMatrix:
        return self.fit(records).transform(records)

    def to_state(self) -> dict:
        return {
            "feature_set": self.feature_set.kind,
            "add_unknown": self.add_unknown,
            "levels": {k: list(v) for k, v in self.levels_.items()},
            "columns": [[c.name, c.kind, c.source] for c in (self.columns_ or ())],
        }

    @classmethod
    def from_state(cls, state: dict) -> "Encoder":
        enc = cls(feature_set("fs1" if state["feature_set"] == "FS1_Basic" else "fs2"), state["add_unknown"])
        enc.levels_ = {k: tuple(v) for k, v in state["levels"].items()}
        enc.columns_ = tuple(FeatureColumn(n, k, s) for n, k, s in state["columns"])
        return enc


def encode(records: Sequence[IncidentRecord], fset: FeatureSet) -> FeatureMatrix:
    """One-shot fit-and-encode of a record batch (training-time convenience)."""
    return Encoder(fset).fit_transform(records)


def decode_onehot(matrix: FeatureMatrix) -> list:
    """Recover the category value of each one-hot group per row (None when the
    group is missing). Used to verify the encode round trip."""
    groups: dict[str, list[int]] = {}
    for i, c in enumerate(matrix.columns):
        if c.kind == "onehot":
            groups.setdefault(c.source, []).append(i)
    decoded = []
    for row in matrix.rows:
        rec = {}
        for src, idxs in groups.items():
            vals = row[idxs]
            if np.isnan(vals).any():
                rec[src] = None
                continue
            hot = [i for i in idxs if row[i] == 1.0]
            if len(hot) != 1:
                raise SchemaError(f"one-hot group {src} does not sum to 1")
            name = matrix.columns[hot[0]].name
            rec[src] = name.split("=", 1)[1]
        decoded.append(rec)
    return decoded


# --- loose-field record construction (CSV ingestion and the serving path) ---

_BOOL_TRUE = {"1", "true", "yes", "y"}
_BOOL_FALSE = {"0", "false", "no", "n", ""}

REQUIRED_REQUEST_FIELDS = (
    "start_time",
    "direction",
    "county_region",
    "city_number",
    "event_type",
    "lanes",
    "only_shoulders_closed",
    "vehicles",
    "trucks",
    "injuries",
    "fatalities",
    "detection_method",
    "route_id",
    "measure",
)
OPTIONAL_REQUEST_FIELDS = (
    "id",
    "responders",
    "aadt_bin",
    "hourly_volume",
    "surface_width",
    "surface_type",
    "terrain",
    "duration_minutes",
)
FS2_ONLY_FIELDS = ("responders", "aadt_bin", "hourly_volume", "surface_width", "surface_type", "terrain")


def _parse_bool(v) -> bool:
    if isinstance(v, bool):
        return v
    s = str(v).strip().lower()
    if s in _BOOL_TRUE:
        return True
    if s in _BOOL_FALSE:
        return False
    raise ValueError(f"not a boolean: {v!r}")


def _parse_count_bin(v) -> str:
    s = str(v).strip()
    if s in COUNT_BINS:
        return s
    n = int(s)
    if n < 0:
        raise ValueError(f"negative count: {v!r}")
    return "3+" if n >= 3 else str(n)


def _parse_responders(v) -> frozenset:
    if isinstance(v, (list, tuple, set, frozenset)):
        items = [str(x).strip() for x in v]
    else:
        s = str(v).strip()
        items = [p for p in s.split("|") if p] if s else []
    bad = [x for x in items if x not in RESPONDER_TYPES]
    if bad:
        raise ValueError(f"unknown responder types: {bad}")
    return frozenset(items)


def record_from_fields(fields: dict, default_id: str = "") -> IncidentRecord:
    """Build a validated IncidentRecord from loosely-typed field values.

    Collects every problem rather than stopping at the first, so callers can
    report all offending fields at once.
    """
    problems: dict[str, str] = {}
    vals: dict = {}
    known = set(REQUIRED_REQUEST_FIELDS) | set(OPTIONAL_REQUEST_FIELDS)
    for k in fields:
        if k not in known:
            problems[k] = "unknown field"
    for k in REQUIRED_REQUEST_FIELDS:
        if k not in fields or fields[k] in (None, ""):
            problems.setdefault(k, "missing required field")
    if problems:
        raise RecordValidationError(problems)

    def grab(name, parse, required=True):
        raw = fields.get(name)
        if raw in (None, ""):
            if required:
                problems[name] = "missing required field"
            else:
                vals[name] = None
            return
        try:
            vals[name] = parse(raw)
        except (ValueError, TypeError) as exc:
            problems[name] = str(exc)

    grab("start_time", lambda v: v if isinstance(v, datetime) else datetime.fromisoformat(str(v)))
    grab("direction", lambda v: _require_level(v, DIRECTIONS, "direction"))
    grab("county_region", lambda v: _require_level(v, COUNTY_REGIONS, "county_region"))
    grab("city_number", lambda v: int(v))
    grab("event_type", lambda v: _require_level(v, EVENT_TYPES, "event_type"))
    grab("lanes", lambda v: int(v))
    grab("only_shoulders_closed", _parse_bool)
    grab("vehicles", _parse_count_bin)
    grab("trucks", _parse_count_bin)
    grab("injuries", _parse_bool)
    grab("fatalities", _parse_bool)
    grab("detection_method", lambda v: _require_level(v, DETECTION_METHODS, "detection_method"))
    grab("route_id", lambda v: str(v))
    grab("measure", lambda v: float(v))
    grab("responders", _parse_responders, required=False)
    grab("aadt_bin", lambda v: int(v), required=False)
    grab("hourly_volume", lambda v: int(float(v)), required=False)
    grab("surface_width", lambda v: float(v), required=False)
    grab("surface_type", lambda v: int(v), required=False)
    grab("terrain", lambda v: _require_level(v, TERRAINS, "terrain"), required=False)
    grab("duration_minutes", lambda v: float(v), required=False)
    if problems:
        raise RecordValidationError(problems)
    if vals.get("responders") is None:
        vals["responders"] = frozenset()
    rid = str(fields.get("id") or default_id)
    try:
        return IncidentRecord(id=rid, **vals)
    except SchemaError as exc:
        raise RecordValidationError({"record": str(exc)}) from exc


def _require_level(v, levels, name):
    s = str(v).strip()
    if s not in levels:
        raise ValueError(f"unknown {name} {v!r} (expected one of {list(levels)})")
    return s


# --- canonical CSV format -------------------------------------------------

CSV_FIELDS = (
    "id",
    "start_time",
    "direction",
    "county_region",
    "city_number",
    "event_type",
    "lanes",
    "only_shoulders_closed",
    "vehicles",
    "trucks",
    "injuries",
    "fatalities",
    "detection_method",
    "responders",
    "route_id",
    "measure",
    "aadt_bin",
    "hourly_volume",
    "surface_width",
    "surface_type",
    "terrain",
    "duration_minutes",
)


def write_incidents_csv(records: Sequence[IncidentRecord], path) -> None:
    """Write records in the canonical incident CSV format (empty cell = missing)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_FIELDS)
        for r in records:
            w.writerow(
                [
                    r.id,
                    r.start_time.isoformat(),
                    r.direction,
                    r.county_region,
                    r.city_number,
                    r.event_type,
                    r.lanes,
                    int(r.only_shoulders_closed),
                    r.vehicles,
                    r.trucks,
                    int(r.injuries),
                    int(r.fatalities),
                    r.detection_method,
                    "|".join(sorted(r.responders)),
                    r.route_id,
                    repr(r.measure),
                    "" if r.aadt_bin is None else r.aadt_bin,
                    "" if r.hourly_volume is None else r.hourly_volume,
                    "" if r.surface_width is None else repr(r.surface_width),
                    "" if r.surface_type is None else r.surface_type,
                    "" if r.terrain is None else r.terrain,
                    "" if r.duration_minutes is None else repr(r.duration_minutes),
                ]
            )


def read_incidents_csv(path) -> list:
    """Read the canonical incident CSV; raises RecordValidationError on bad rows."""
    records = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in REQUIRED_REQUEST_FIELDS if c not in (reader.fieldnames or ())]
        if missing:
            raise SchemaError(f"incident CSV is missing columns: {missing}")
        for i, row in enumerate(reader):
            fields = {k: v for k, v in row.items() if v is not None and v != ""}
            try:
                records.append(record_from_fields(fields, default_id=f"row{i}"))
            except RecordValidationError as exc:
                raise RecordValidationError({f"row {i} ({k})": v for k, v in exc.problems.items()}) from exc
    return records
