"""Roadway attribute enrichment keyed by route id and measure bucket.

Stands in for a linear-referencing join against asset data: an incident's
(route_id, measure) resolves to a bucket row holding traffic volume band,
surface width/type, terrain, and an hourly-volume profile by time of day.
Lookups are total: unknown keys fall back to a default row aggregated over
everything.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .schema import IncidentRecord, TIMES_OF_DAY, derive_temporal


@dataclass(frozen=True)
class EnrichmentRow:
    aadt_bin: int
    surface_width: float
    surface_type: int
    terrain: str
    hourly_volume_by_tod: dict

    def to_state(self) -> dict:
        return {
            "aadt_bin": self.aadt_bin,
            "surface_width": self.surface_width,
            "surface_type": self.surface_type,
            "terrain": self.terrain,
            "hourly_volume_by_tod": dict(self.hourly_volume_by_tod),
        }

    @classmethod
    def from_state(cls, s: dict) -> "EnrichmentRow":
        return cls(
            aadt_bin=int(s["aadt_bin"]),
            surface_width=float(s["surface_width"]),
            surface_type=int(s["surface_type"]),
            terrain=s["terrain"],
            hourly_volume_by_tod={k: float(v) for k, v in s["hourly_volume_by_tod"].items()},
        )


class EnrichmentTable:
    """(route_id, measure bucket) -> roadway attributes, with a default row."""

    def __init__(self, rows: dict, default: EnrichmentRow, bucket_size: float = 0.5):
        if bucket_size <= 0:
            raise ValueError("bucket_size must be positive")
        self.rows = rows
        self.default = default
        self.bucket_size = bucket_size

    def bucket(self, measure: float) -> int:
        return int(math.floor(measure / self.bucket_size))

    def lookup(self, route_id: str, measure: float) -> EnrichmentRow:
        return self.rows.get((route_id, self.bucket(measure)), self.default)

    def enrich(self, record: IncidentRecord) -> IncidentRecord:
        """Fill any missing roadway fields from the table; present values win."""
        needs = (
            record.aadt_bin is None
            or record.hourly_volume is None
            or record.surface_width is None
            or record.surface_type is None
            or record.terrain is None
        )
        if not needs:
            return record
        row = self.lookup(record.route_id, record.measure)
        tod = derive_temporal(record.start_time).tod
        updates = {}
        if record.aadt_bin is None:
            updates["aadt_bin"] = row.aadt_bin
        if record.hourly_volume is None:
            updates["hourly_volume"] = int(row.hourly_volume_by_tod.get(tod, next(iter(row.hourly_volume_by_tod.values()))))
        if record.surface_width is None:
            updates["surface_width"] = row.surface_width
        if record.surface_type is None:
            updates["surface_type"] = row.surface_type
        if record.terrain is None:
            updates["terrain"] = row.terrain
        return replace(record, **updates)

    @classmethod
    def build_from_records(cls, records: Sequence[IncidentRecord], bucket_size: float = 0.5) -> "EnrichmentTable":
        """Aggregate observed roadway attributes per (route, bucket).

        Numeric attributes average; categorical ones take the mode. The
        default row aggregates the whole input.
        """
        groups: dict = {}
        for r in records:
            key = (r.route_id, int(math.floor(r.measure / bucket_size)))
            groups.setdefault(key, []).append(r)
        rows = {key: _aggregate(members) for key, members in sorted(groups.items())}
        default = _aggregate(list(records))
        return cls(rows=rows, default=default, bucket_size=bucket_size)

    def to_state(self) -> dict:
        return {
            "bucket_size": self.bucket_size,
            "default": self.default.to_state(),
            "rows": [[route, bucket, row.to_state()] for (route, bucket), row in sorted(self.rows.items())],
        }

    @classmethod
    def from_state(cls, s: dict) -> "EnrichmentTable":
        rows = {(route, int(bucket)): EnrichmentRow.from_state(rs) for route, bucket, rs in s["rows"]}
        return cls(rows=rows, default=EnrichmentRow.from_state(s["default"]), bucket_size=float(s["bucket_size"]))

    # CSV sidecar: one line per (route, bucket) plus a __default__ line
    _CSV_HEADER = ["route_id", "bucket", "aadt_bin", "surface_width", "surface_type", "terrain"] + [
        f"volume_{tod}" for tod in TIMES_OF_DAY
    ]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self._CSV_HEADER)
            w.writerow(self._row_cells("__default__", -1, self.default))
            for (route, bucket), row in sorted(self.rows.items()):
                w.writerow(self._row_cells(route, bucket, row))

    @staticmethod
    def _row_cells(route, bucket, row: EnrichmentRow):
        return [route, bucket, row.aadt_bin, repr(row.surface_width), row.surface_type, row.terrain] + [
            repr(float(row.hourly_volume_by_tod.get(tod, 0.0))) for tod in TIMES_OF_DAY
        ]

    @classmethod
    def from_csv(cls, path, bucket_size: float = 0.5) -> "EnrichmentTable":
        rows = {}
        default = None
        with open(path, newline="") as fh:
            for rec in csv.DictReader(fh):
                row = EnrichmentRow(
                    aadt_bin=int(rec["aadt_bin"]),
                    surface_width=float(rec["surface_width"]),
                    surface_type=int(rec["surface_type"]),
                    terrain=rec["terrain"],
                    hourly_volume_by_tod={tod: float(rec[f"volume_{tod}"]) for tod in TIMES_OF_DAY},
                )
                if rec["route_id"] == "__default__":
                    default = row
                else:
                    rows[(rec["route_id"], int(rec["bucket"]))] = row
        if default is None:
            raise ValueError("enrichment CSV is missing the __default__ row")
        return cls(rows=rows, default=default, bucket_size=bucket_size)


def _aggregate(members: Sequence[IncidentRecord]) -> EnrichmentRow:
    aadt = [r.aadt_bin for r in members if r.aadt_bin is not None]
    widths = [r.surface_width for r in members if r.surface_width is not None]
    stypes = [r.surface_type for r in members if r.surface_type is not None]
    terrains = [r.terrain for r in members if r.terrain is not None]
    volumes: dict = {tod: [] for tod in TIMES_OF_DAY}
    for r in members:
        if r.hourly_volume is not None:
            volumes[derive_temporal(r.start_time).tod].append(r.hourly_volume)
    all_vols = [v for vs in volumes.values() for v in vs]
    overall = float(np.mean(all_vols)) if all_vols else 0.0
    profile = {tod: (float(np.mean(vs)) if vs else overall) for tod, vs in volumes.items()}
    return EnrichmentRow(
        aadt_bin=_mode_int(aadt, 3),
        surface_width=float(np.mean(widths)) if widths else 30.0,
        surface_type=_mode_int(stypes, 5),
        terrain=_mode_str(terrains, "flat"),
        hourly_volume_by_tod=profile,
    )


def _mode_int(values, fallback: int) -> int:
    if not values:
        return fallback
    uniq, counts = np.unique(np.asarray(values, dtype=np.int64), return_counts=True)
    return int(uniq[np.argmax(counts)])


def _mode_str(values, fallback: str) -> str:
    if not values:
        return fallback
    uniq, counts = np.unique(np.asarray(values, dtype=object), return_counts=True)
    return str(uniq[np.argmax(counts)])
