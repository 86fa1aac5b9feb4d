"""Synthetic incident dataset generator.

Durations start from a log-normal base (median about 31 minutes, mean about
45) and are scaled by documented multiplicative effects: responder presence,
fatalities, truck involvement, event type, time of day, a mildly
non-monotone traffic-volume effect, and terrain. Multipliers are normalized
to unit geometric mean within the sample so the overall median stays put,
then clipped into [1, 1358] minutes. Roadway attributes are functions of a
synthetic route/segment table, so a linear-reference join can recover them.
A manifest records every effect parameter for oracle checks.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from datetime import datetime, timedelta

import numpy as np

from .schema import (
    COUNTY_REGIONS,
    DETECTION_METHODS,
    DIRECTIONS,
    IncidentRecord,
    RESPONDER_TYPES,
    TERRAINS,
    derive_temporal,
    write_incidents_csv,
)

DURATION_MIN = 1.0
DURATION_MAX = 1358.0

# σ² = 2·(ln(mean) − ln(median)) matches a log-normal with median 31 and
# mean 45.2
DEFAULT_MU = math.log(31.0)
DEFAULT_SIGMA = math.sqrt(2.0 * (math.log(45.2) - math.log(31.0)))


@dataclass(frozen=True)
class GeneratorConfig:
    n_records: int = 6832
    seed: int = 7
    signal_strength: float = 1.0
    lognormal_mu: float = DEFAULT_MU
    lognormal_sigma: float = DEFAULT_SIGMA

    def __post_init__(self):
        if self.n_records < 1:
            raise ValueError("n_records must be positive")
        if not 0.0 <= self.signal_strength <= 1.0:
            raise ValueError("signal_strength must lie in [0, 1]")


# presence probability and duration multiplier per responder type
RESPONDER_EFFECTS = {
    "police": (0.33, 1.61),
    "tow": (0.23, 1.96),
    "dot": (0.09, 1.50),
    "dps": (0.05, 1.22),
    "ems": (0.12, 1.44),
    "hh": (0.49, 1.19),
}
EVENT_PROBS = {"crash1": 0.45, "crash2": 0.27, "crash3": 0.08, "debris": 0.20}
EVENT_EFFECTS = {"crash1": 1.0, "crash2": 1.09, "crash3": 1.22, "debris": 0.70}
VEHICLE_PROBS = {"0": 0.08, "1": 0.52, "2": 0.30, "3+": 0.10}
VEHICLE_EFFECTS = {"0": 0.92, "1": 1.0, "2": 1.08, "3+": 1.19}
TRUCK_PROBS = {"0": 0.78, "1": 0.13, "2": 0.06, "3+": 0.03}
TRUCK_EFFECTS = {"0": 1.0, "1": 1.19, "2": 1.33, "3+": 1.50}
FATALITY_PROB, FATALITY_EFFECT = 0.02, 2.07
INJURY_PROB, INJURY_EFFECT = 0.18, 1.27
SHOULDERS_PROB, SHOULDERS_EFFECT = 0.25, 0.84
TOD_EFFECTS = {"Night": 1.19, "EveningRush": 1.08}
AADT_EFFECTS = {1: 1.13, 2: 0.95, 3: 1.04, 4: 0.94, 5: 1.0}
TERRAIN_EFFECTS = {"flat": 1.0, "rolly": 1.04, "hilly": 1.11}
LANE_EFFECTS = {1: 1.09, 2: 1.0, 3: 0.96, 4: 0.94}
WINTER_EFFECT = 1.11
MISSING_RATE = 0.05  # per optional roadway field

# route table: (route id, length in measure units, interstate?)
ROUTES = (
    ("I-80", 300.0, True),
    ("I-35", 220.0, True),
    ("I-29", 155.0, True),
    ("I-380", 75.0, True),
    ("US-20", 280.0, False),
    ("US-30", 260.0, False),
    ("US-61", 140.0, False),
    ("US-151", 110.0, False),
)
SEGMENT_UNITS = 25.0  # roadway attributes change per 25-unit stretch

_TOD_HOURS = {
    "Morning": (7, 8, 9),
    "EarlyAfternoon": (10, 11, 12),
    "Afternoon": (13, 14, 15),
    "EveningRush": (16, 17, 18),
    "Evening": (19, 20, 21),
    "Night": (22, 23, 0, 1, 2, 3, 4, 5, 6),
}
_HOUR_WEIGHTS = np.array(
    [0.4, 0.3, 0.25, 0.25, 0.3, 0.5, 0.9, 1.6, 1.7, 1.4, 1.2, 1.2, 1.3, 1.3, 1.4, 1.6, 1.9, 2.0, 1.6, 1.2, 1.0, 0.8, 0.6, 0.5]
)
_TOD_VOLUME_FACTOR = {
    "Morning": 1.5,
    "EarlyAfternoon": 1.1,
    "Afternoon": 1.2,
    "EveningRush": 1.7,
    "Evening": 0.9,
    "Night": 0.35,
}


def _segment_attributes(route_idx: int, segment: int, interstate: bool, seed: int):
    """Deterministic roadway attributes for one route segment."""
    rng = np.random.default_rng(np.random.SeedSequence([seed & 0xFFFFFFFFFFFFFFFF, 1000 + route_idx, segment]))
    if interstate:
        aadt_bin = int(rng.choice([2, 3, 4, 5], p=[0.15, 0.3, 0.35, 0.2]))
        surface_width = float(np.round(rng.uniform(36.0, 48.0), 1))
        surface_type = int(rng.choice([5, 6], p=[0.4, 0.6]))
        base_volume = 900.0 + 450.0 * aadt_bin + rng.uniform(-100, 100)
    else:
        aadt_bin = int(rng.choice([1, 2, 3, 4], p=[0.35, 0.3, 0.25, 0.1]))
        surface_width = float(np.round(rng.uniform(22.0, 36.0), 1))
        surface_type = int(rng.choice([3, 4, 5], p=[0.2, 0.5, 0.3]))
        base_volume = 350.0 + 300.0 * aadt_bin + rng.uniform(-80, 80)
    terrain = str(rng.choice(TERRAINS, p=[0.5, 0.3, 0.2]))
    return aadt_bin, surface_width, surface_type, terrain, base_volume


def generate(config: GeneratorConfig = GeneratorConfig()):
    """Generate incident records; returns (records, manifest)."""
    rng = np.random.default_rng(config.seed)
    n = config.n_records
    s = config.signal_strength

    route_idx = rng.choice(len(ROUTES), size=n, p=_route_weights())
    measures = np.array([rng.uniform(0.0, ROUTES[i][1]) for i in route_idx])
    start_times = _draw_start_times(rng, n)
    directions = rng.choice(DIRECTIONS, size=n)
    counties = rng.choice(COUNTY_REGIONS, size=n, p=[0.2, 0.15, 0.3, 0.2, 0.15])
    cities = rng.integers(1, 13, size=n)
    events = rng.choice(list(EVENT_PROBS), size=n, p=list(EVENT_PROBS.values()))
    lanes = rng.choice([1, 2, 3, 4], size=n, p=[0.15, 0.45, 0.3, 0.1])
    shoulders = rng.random(n) < SHOULDERS_PROB
    vehicles = rng.choice(list(VEHICLE_PROBS), size=n, p=list(VEHICLE_PROBS.values()))
    trucks = rng.choice(list(TRUCK_PROBS), size=n, p=list(TRUCK_PROBS.values()))
    injuries = rng.random(n) < INJURY_PROB
    fatalities = rng.random(n) < FATALITY_PROB
    detection = rng.choice(DETECTION_METHODS, size=n, p=[0.3, 0.25, 0.1, 0.1, 0.15, 0.1])
    responder_draws = {t: rng.random(n) < RESPONDER_EFFECTS[t][0] for t in RESPONDER_TYPES}

    base = np.exp(rng.normal(config.lognormal_mu, config.lognormal_sigma, size=n))

    log_mult = np.zeros(n)
    seg_attrs = []
    for i in range(n):
        ridx = int(route_idx[i])
        seg = int(measures[i] // SEGMENT_UNITS)
        attrs = _segment_attributes(ridx, seg, ROUTES[ridx][2], config.seed)
        seg_attrs.append(attrs)
        tf = derive_temporal(start_times[i])
        m = 0.0
        for t in RESPONDER_TYPES:
            if responder_draws[t][i]:
                m += math.log(RESPONDER_EFFECTS[t][1])
        m += math.log(EVENT_EFFECTS[events[i]])
        m += math.log(VEHICLE_EFFECTS[vehicles[i]])
        m += math.log(TRUCK_EFFECTS[trucks[i]])
        if injuries[i]:
            m += math.log(INJURY_EFFECT)
        if fatalities[i]:
            m += math.log(FATALITY_EFFECT)
        if shoulders[i]:
            m += math.log(SHOULDERS_EFFECT)
        m += math.log(TOD_EFFECTS.get(tf.tod, 1.0))
        m += math.log(AADT_EFFECTS[attrs[0]])
        m += math.log(TERRAIN_EFFECTS[attrs[3]])
        m += math.log(LANE_EFFECTS[int(lanes[i])])
        if tf.season == 1:
            m += math.log(WINTER_EFFECT)
        log_mult[i] = s * m

    # normalize between the unit-geometric-mean anchor (which pins the
    # median) and the unit-arithmetic-mean anchor (which pins the mean);
    # weighting the shift 55/45 keeps both moments inside their windows
    log_mult -= log_mult.mean()
    log_mult -= 0.55 * math.log(float(np.mean(np.exp(log_mult))))
    durations = np.clip(base * np.exp(log_mult), DURATION_MIN, DURATION_MAX)

    blank = {f: rng.random(n) < MISSING_RATE for f in ("hourly_volume", "surface_width", "surface_type", "terrain")}

    records = []
    for i in range(n):
        aadt_bin, surface_width, surface_type, terrain, base_volume = seg_attrs[i]
        tf = derive_temporal(start_times[i])
        volume = int(max(0.0, base_volume * _TOD_VOLUME_FACTOR[tf.tod] * rng.uniform(0.85, 1.15)))
        responders = frozenset(t for t in RESPONDER_TYPES if responder_draws[t][i])
        records.append(
            IncidentRecord(
                id=f"INC{i:06d}",
                start_time=start_times[i],
                direction=str(directions[i]),
                county_region=str(counties[i]),
                city_number=int(cities[i]),
                event_type=str(events[i]),
                lanes=int(lanes[i]),
                only_shoulders_closed=bool(shoulders[i]),
                vehicles=str(vehicles[i]),
                trucks=str(trucks[i]),
                injuries=bool(injuries[i]),
                fatalities=bool(fatalities[i]),
                detection_method=str(detection[i]),
                responders=responders,
                route_id=ROUTES[int(route_idx[i])][0],
                measure=float(np.round(measures[i], 3)),
                aadt_bin=aadt_bin,
                hourly_volume=None if blank["hourly_volume"][i] else volume,
                surface_width=None if blank["surface_width"][i] else surface_width,
                surface_type=None if blank["surface_type"][i] else surface_type,
                terrain=None if blank["terrain"][i] else terrain,
                duration_minutes=float(np.round(durations[i], 3)),
            )
        )
    manifest = _manifest(config)
    return records, manifest


def _route_weights():
    lengths = np.array([r[1] for r in ROUTES])
    w = lengths * np.where([r[2] for r in ROUTES], 1.6, 1.0)
    return w / w.sum()


def _draw_start_times(rng: np.random.Generator, n: int):
    days = rng.integers(0, 3 * 365, size=n)
    hours = rng.choice(24, size=n, p=_HOUR_WEIGHTS / _HOUR_WEIGHTS.sum())
    minutes = rng.integers(0, 60, size=n)
    t0 = datetime(2017, 1, 1)
    return [t0 + timedelta(days=int(d), hours=int(h), minutes=int(mi)) for d, h, mi in zip(days, hours, minutes)]


def _manifest(config: GeneratorConfig) -> dict:
    return {
        "n_records": config.n_records,
        "seed": config.seed,
        "signal_strength": config.signal_strength,
        "lognormal_mu": config.lognormal_mu,
        "lognormal_sigma": config.lognormal_sigma,
        "duration_clip": [DURATION_MIN, DURATION_MAX],
        "responder_effects": {t: {"prob": p, "multiplier": m} for t, (p, m) in RESPONDER_EFFECTS.items()},
        "event_effects": EVENT_EFFECTS,
        "vehicle_effects": VEHICLE_EFFECTS,
        "truck_effects": TRUCK_EFFECTS,
        "fatality_effect": FATALITY_EFFECT,
        "injury_effect": INJURY_EFFECT,
        "shoulders_effect": SHOULDERS_EFFECT,
        "tod_effects": TOD_EFFECTS,
        "aadt_effects": AADT_EFFECTS,
        "terrain_effects": TERRAIN_EFFECTS,
        "lane_effects": LANE_EFFECTS,
        "winter_effect": WINTER_EFFECT,
        "missing_rate": MISSING_RATE,
        "normalization": "multipliers are normalized to unit geometric mean within the sample",
    }


def generate_to_csv(config: GeneratorConfig, csv_path) -> list:
    """Generate records, write the canonical CSV, and drop a manifest sidecar."""
    records, manifest = generate(config)
    write_incidents_csv(records, csv_path)
    manifest_path = str(csv_path) + ".manifest.json"
    with open(manifest_path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    return records
