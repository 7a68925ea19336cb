"""Deterministic synthetic test cities.

Generates a complete, internally consistent dataset bundle (zones, persons,
training shares, trips, visitation counts, emission factors, mode shift)
that passes every loader. The same seed always produces byte-identical
files. All numeric values are illustrative; in particular the emission
factors are an example table, not calibrated measurements.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigurationError
from .geo import AreaType, Mode, Purpose, Trip, TripTable, Zone, ZoneSet, haversine_km
from .choice import WorkLocationShares
from .ingest import (
    DatasetPaths,
    EmissionFactorTable,
    ModeShiftMatrix,
    PersonRecord,
    PoiCategory,
    PoiVisitRow,
    TrainingRecord,
    write_emission_factors,
    write_mode_shift,
    write_persons,
    write_poi_visits,
    write_training,
    write_trips,
    write_zones,
)

GRID_SPACING_DEG = 0.02
CITY_CENTER = (41.85, -87.65)

OCCUPATIONS = ["occ_admin", "occ_edu", "occ_health", "occ_mgmt", "occ_sales", "occ_tech"]
INDUSTRIES = ["ind_finance", "ind_food", "ind_health", "ind_info", "ind_manuf", "ind_retail"]
INCOME_CATS = ["inc_q1", "inc_q2", "inc_q3", "inc_q4", "inc_q5"]
SEXES = ["female", "male", "nonbinary"]
RACES = ["race_1", "race_2", "race_3", "race_4", "race_5"]
EDUCATIONS = ["edu_graduate", "edu_hs", "edu_some_college", "edu_bachelor"]

# Illustrative example factors (grams CO2 per km), not calibrated values.
EXAMPLE_EMISSION_FACTORS = {
    Mode.car: 192.0,
    Mode.transit: 89.0,
    Mode.walk: 0.0,
    Mode.bike: 0.0,
    Mode.other: 150.0,
}


@dataclass
class DatasetBundle:
    """In-memory form of one synthetic city."""

    zones: ZoneSet
    persons: list[PersonRecord]
    training: list[TrainingRecord]
    trips: TripTable
    poi_visits: list[PoiVisitRow]
    emission_factors: EmissionFactorTable
    mode_shift: ModeShiftMatrix


def _make_zones(zone_count: int) -> ZoneSet:
    side = math.ceil(math.sqrt(zone_count))
    zones = []
    half = (side - 1) / 2.0
    for i in range(zone_count):
        r, c = divmod(i, side)
        ring = max(abs(r - half), abs(c - half)) / max(half, 1.0)
        if ring <= 1.0 / 3.0:
            area = AreaType.urban
        elif ring <= 2.0 / 3.0:
            area = AreaType.suburban
        else:
            area = AreaType.rural
        zones.append(Zone(
            zone_id=f"Z{i:04d}",
            centroid_lat=round(CITY_CENTER[0] + GRID_SPACING_DEG * (r - half), 6),
            centroid_lon=round(CITY_CENTER[1] + GRID_SPACING_DEG * (c - half), 6),
            area_type=area,
        ))
    return ZoneSet(zones)


def _nearest_zone_indices(zones: list[Zone], k: int) -> list[list[int]]:
    """For each zone, indices of the k nearest zones (itself first)."""
    coords = [(z.centroid_lat, z.centroid_lon) for z in zones]
    out = []
    for i, a in enumerate(coords):
        dists = [(haversine_km(a, b), j) for j, b in enumerate(coords)]
        dists.sort()
        out.append([j for _, j in dists[:k]])
    return out


def _commute_mode(rng: np.random.Generator, distance_km: float) -> Mode:
    if distance_km < 2.0:
        probs = [0.35, 0.10, 0.35, 0.15, 0.05]
    elif distance_km < 8.0:
        probs = [0.60, 0.20, 0.05, 0.10, 0.05]
    else:
        probs = [0.70, 0.25, 0.01, 0.02, 0.02]
    return list(Mode)[rng.choice(5, p=probs)]


def _training_shares(
    rng: np.random.Generator, persons: list[PersonRecord]
) -> list[WorkLocationShares]:
    """Smooth, learnable share targets: softmax of feature-driven logits plus noise."""
    n = len(persons)
    log_density = np.log(np.array([p.home_density for p in persons]))
    z_density = (log_density - log_density.mean()) / max(log_density.std(), 1e-9)
    ages = np.array([p.age for p in persons])
    z_age = (ages - ages.mean()) / max(ages.std(), 1e-9)
    income_idx = np.array([INCOME_CATS.index(p.income_cat) for p in persons]) / 4.0
    info_industry = np.array([1.0 if p.industry == "ind_info" else 0.0 for p in persons])
    edu_idx = np.array([EDUCATIONS.index(p.education) for p in persons]) / 3.0

    logits = np.zeros((n, 5))
    logits[:, 0] = 1.1 + 0.25 * z_age - 0.2 * income_idx            # employer
    logits[:, 1] = 0.2 + 0.30 * z_density + 0.35 * income_idx       # home
    logits[:, 2] = -1.3 + 0.25 * z_density + 0.20 * edu_idx         # public space
    logits[:, 3] = -1.6 + 0.45 * info_industry + 0.15 * z_density   # co-working
    logits[:, 4] = -1.8 - 0.15 * z_age                              # friend home
    logits += rng.normal(0.0, 0.3, size=(n, 5))
    shifted = logits - logits.max(axis=1, keepdims=True)
    probs = np.exp(shifted)
    probs /= probs.sum(axis=1, keepdims=True)
    return [WorkLocationShares(*(float(v) for v in row)) for row in probs]


def generate_synthetic_city(zone_count: int, person_count: int, seed: int) -> DatasetBundle:
    """Build one deterministic synthetic city.

    Guarantees: every person has at least one commute trip; the bundle
    contains social-purpose trips; at least 80% of zones have visitation
    rows for each establishment category.
    """
    if zone_count < 1 or person_count < 1:
        raise ConfigurationError("zone_count and person_count must both be >= 1")
    rng = np.random.default_rng(seed)
    zone_set = _make_zones(zone_count)
    zones = list(zone_set)
    nz = len(zones)
    urban_idx = [i for i, z in enumerate(zones) if z.area_type is AreaType.urban] or list(range(nz))
    neighbors = _nearest_zone_indices(zones, min(nz, 10))

    density_base = {AreaType.urban: 4500.0, AreaType.suburban: 1400.0, AreaType.rural: 180.0}

    home_idx = rng.integers(0, nz, size=person_count)
    weights = np.clip(np.round(rng.lognormal(0.0, 0.35, size=person_count), 3), 0.2, 5.0)
    ages = np.round(rng.uniform(18.0, 80.0, size=person_count), 1)
    occ = rng.choice(len(OCCUPATIONS), size=person_count)
    ind = rng.choice(len(INDUSTRIES), size=person_count)
    inc = rng.choice(len(INCOME_CATS), size=person_count)
    sex = rng.choice(len(SEXES), size=person_count)
    race = rng.choice(len(RACES), size=person_count)
    edu = rng.choice(len(EDUCATIONS), size=person_count)
    density_jitter = rng.lognormal(0.0, 0.3, size=person_count)
    central_work = rng.random(size=person_count) < 0.65
    work_central = rng.choice(len(urban_idx), size=person_count)
    work_any = rng.integers(0, nz, size=person_count)
    commute_freqs = np.array([4.0, 5.0, 6.0])[rng.choice(3, size=person_count, p=[0.2, 0.6, 0.2])]

    persons: list[PersonRecord] = []
    trips: list[Trip] = []
    trip_no = 0

    def next_trip_id() -> str:
        nonlocal trip_no
        trip_no += 1
        return f"T{trip_no:07d}"

    for i in range(person_count):
        home = zones[int(home_idx[i])]
        density = round(density_base[home.area_type] * float(density_jitter[i]), 1)
        person = PersonRecord(
            person_id=f"P{i:06d}",
            weight=float(weights[i]),
            occupation=OCCUPATIONS[int(occ[i])],
            industry=INDUSTRIES[int(ind[i])],
            income_cat=INCOME_CATS[int(inc[i])],
            sex=SEXES[int(sex[i])],
            age=float(ages[i]),
            race=RACES[int(race[i])],
            education=EDUCATIONS[int(edu[i])],
            home_density=density,
            home_zone=home.zone_id,
        )
        persons.append(person)

        work = zones[urban_idx[int(work_central[i])]] if central_work[i] else zones[int(work_any[i])]
        commute_km = round(max(haversine_km(home.centroid, work.centroid), 0.3), 3)
        trips.append(Trip(
            trip_id=next_trip_id(), person_id=person.person_id,
            origin_zone=home.zone_id, dest_zone=work.zone_id,
            mode=_commute_mode(rng, commute_km), distance_km=commute_km,
            purpose=Purpose.commute, weekly_freq=float(commute_freqs[i]), weight=person.weight,
        ))

    # Social and other trips; force at least one social trip so friend-home
    # distance distributions can always be built.
    social_counts = rng.integers(0, 3, size=person_count)
    if int(social_counts.sum()) == 0:
        social_counts[0] = 1
    other_counts = rng.integers(0, 2, size=person_count)
    for i in range(person_count):
        person = persons[i]
        home = zone_set[person.home_zone]
        home_i = int(home_idx[i])
        for _ in range(int(social_counts[i])):
            dest = zones[neighbors[home_i][int(rng.integers(0, len(neighbors[home_i])))]]
            base_km = haversine_km(home.centroid, dest.centroid)
            trips.append(Trip(
                trip_id=next_trip_id(), person_id=person.person_id,
                origin_zone=home.zone_id, dest_zone=dest.zone_id,
                mode=Mode.walk if base_km < 1.5 else Mode.car,
                distance_km=round(base_km * float(rng.uniform(1.05, 1.35)) + 0.2, 3),
                purpose=Purpose.social_friends if rng.random() < 0.5 else Purpose.social_relatives,
                weekly_freq=float(rng.choice([0.5, 1.0, 1.5, 2.0])), weight=person.weight,
            ))
        for _ in range(int(other_counts[i])):
            dest = zones[int(rng.integers(0, nz))]
            base_km = haversine_km(home.centroid, dest.centroid)
            trips.append(Trip(
                trip_id=next_trip_id(), person_id=person.person_id,
                origin_zone=home.zone_id, dest_zone=dest.zone_id,
                mode=Mode.car, distance_km=round(base_km + 0.4, 3),
                purpose=Purpose.other,
                weekly_freq=float(rng.choice([1.0, 2.0, 3.0])), weight=person.weight,
            ))

    # Visitation rows: each category covers at least 90% of zones as homes.
    poi_visits: list[PoiVisitRow] = []
    covered_count = math.ceil(0.9 * nz)
    for category in (PoiCategory.public_space, PoiCategory.coworking):
        covered = sorted(rng.permutation(nz)[:covered_count].tolist())
        for home_i in covered:
            pool = neighbors[home_i]
            k = min(len(pool), int(rng.integers(3, 6)))
            dest_positions = sorted(rng.choice(len(pool), size=k, replace=False).tolist())
            for pos in dest_positions:
                poi_visits.append(PoiVisitRow(
                    home_zone=zones[home_i].zone_id,
                    poi_zone=zones[pool[pos]].zone_id,
                    category=category,
                    visit_count=float(rng.integers(5, 80)),
                ))

    training = [
        TrainingRecord(person=p, shares=s)
        for p, s in zip(persons, _training_shares(rng, persons))
    ]

    return DatasetBundle(
        zones=zone_set,
        persons=persons,
        training=training,
        trips=TripTable(trips, zone_set),
        poi_visits=poi_visits,
        emission_factors=EmissionFactorTable(EXAMPLE_EMISSION_FACTORS),
        mode_shift=ModeShiftMatrix.identity(),
    )


def write_bundle(bundle: DatasetBundle, outdir: str | Path, seed: int | None = None) -> DatasetPaths:
    """Write all bundle files plus a ready-to-run config.json."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    paths = DatasetPaths(
        zones=outdir / "zones.csv",
        persons=outdir / "persons.csv",
        training=outdir / "training.csv",
        trips=outdir / "trips.csv",
        poi_visits=outdir / "poi_visits.csv",
        emission_factors=outdir / "emission_factors.csv",
        mode_shift=outdir / "mode_shift.csv",
    )
    write_zones(bundle.zones, paths.zones)
    write_persons(bundle.persons, paths.persons)
    write_training(bundle.training, paths.training)
    write_trips(bundle.trips, paths.trips)
    write_poi_visits(bundle.poi_visits, paths.poi_visits)
    write_emission_factors(bundle.emission_factors, paths.emission_factors)
    write_mode_shift(bundle.mode_shift, paths.mode_shift)

    config = {
        "inputs": {
            "zones": "zones.csv",
            "persons": "persons.csv",
            "training": "training.csv",
            "trips": "trips.csv",
            "poi_visits": "poi_visits.csv",
            "emission_factors": "emission_factors.csv",
            "mode_shift": "mode_shift.csv",
        },
        "out_dir": "out",
        "seed": seed if seed is not None else 0,
        "fit": {"l2": 1e-4, "tolerance": 1e-8, "max_iters": 10000},
        "intra_zone_floor_km": 0.5,
        "scenarios": [
            {"name": "home_only", "kind": "home_only", "execution": "expectation"},
            {"name": "spectrum", "kind": "spectrum", "execution": "expectation"},
            {
                "name": "spectrum_mc",
                "kind": "spectrum",
                "execution": "monte_carlo",
                "seed": seed if seed is not None else 0,
            },
        ],
    }
    (outdir / "config.json").write_text(
        json.dumps(config, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return paths
