"""CSV ingestion: parse, validate, and cross-link every input file.

All files are UTF-8, comma-separated, RFC-4180 quoted, with an exact header
row. Loaders fail with a structured :class:`ValidationError` naming the
file, line, and column of the first offending cell; they never return
partially validated data.

File schemas
------------
zones.csv             zone_id,centroid_lat,centroid_lon,area_type
persons.csv           person_id,weight,occupation,industry,income_cat,sex,age,race,education,home_density,home_zone
training.csv          persons.csv columns + share_employer,share_home,share_public,share_coworking,share_friend
trips.csv             trip_id,person_id,origin_zone,dest_zone,mode,distance_km,purpose,weekly_freq,weight
poi_visits.csv        home_zone,poi_zone,category,visit_count
emission_factors.csv  mode,g_co2_per_km
mode_shift.csv        from_mode,to_mode,probability
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence

from .choice import WorkLocationShares
from .errors import ValidationError
from .geo import AreaType, Mode, Purpose, Trip, TripTable, Zone, ZoneSet

ZONES_HEADER = ["zone_id", "centroid_lat", "centroid_lon", "area_type"]
PERSONS_HEADER = [
    "person_id",
    "weight",
    "occupation",
    "industry",
    "income_cat",
    "sex",
    "age",
    "race",
    "education",
    "home_density",
    "home_zone",
]
TRAINING_HEADER = PERSONS_HEADER + [
    "share_employer",
    "share_home",
    "share_public",
    "share_coworking",
    "share_friend",
]
TRIPS_HEADER = [
    "trip_id",
    "person_id",
    "origin_zone",
    "dest_zone",
    "mode",
    "distance_km",
    "purpose",
    "weekly_freq",
    "weight",
]
POI_VISITS_HEADER = ["home_zone", "poi_zone", "category", "visit_count"]
EMISSION_FACTORS_HEADER = ["mode", "g_co2_per_km"]
MODE_SHIFT_HEADER = ["from_mode", "to_mode", "probability"]

ROW_SUM_TOL = 1e-9


class PoiCategory(str, Enum):
    """Establishment categories observable in visitation data."""

    public_space = "public_space"
    coworking = "coworking"


@dataclass(frozen=True)
class DatasetPaths:
    """The seven input files making up one dataset."""

    zones: Path
    persons: Path
    training: Path
    trips: Path
    poi_visits: Path
    emission_factors: Path
    mode_shift: Path | None = None  # identity matrix when absent


@dataclass(frozen=True, slots=True)
class PersonRecord:
    """One worker: demographics, survey weight, and home zone."""

    person_id: str
    weight: float
    occupation: str
    industry: str
    income_cat: str
    sex: str
    age: float
    race: str
    education: str
    home_density: float
    home_zone: str

    def __post_init__(self) -> None:
        if not self.person_id:
            raise ValidationError("person_id must be non-empty")
        if not (math.isfinite(self.weight) and self.weight > 0.0):
            raise ValidationError(f"person {self.person_id!r}: weight must be > 0")
        if not (math.isfinite(self.age) and 14.0 < self.age < 100.0):
            raise ValidationError(f"person {self.person_id!r}: age must be in (14, 100)")
        if not (math.isfinite(self.home_density) and self.home_density > 0.0):
            raise ValidationError(f"person {self.person_id!r}: home_density must be > 0")


@dataclass(frozen=True, slots=True)
class TrainingRecord:
    """A person plus their observed work-location shares."""

    person: PersonRecord
    shares: WorkLocationShares


@dataclass(frozen=True, slots=True)
class PoiVisitRow:
    """Aggregated visit volume from a home zone to an establishment zone."""

    home_zone: str
    poi_zone: str
    category: PoiCategory
    visit_count: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.visit_count) and self.visit_count > 0.0):
            raise ValidationError(
                f"visit row {self.home_zone!r}->{self.poi_zone!r}: visit_count must be > 0"
            )


class EmissionFactorTable:
    """Grams of CO2 emitted per km, per mode. Every mode must be present."""

    def __init__(self, grams_per_km: Mapping[Mode, float]) -> None:
        factors: dict[Mode, float] = {}
        for mode in Mode:
            if mode not in grams_per_km:
                raise ValidationError(f"emission factor missing for mode {mode.value!r}")
            value = float(grams_per_km[mode])
            if not (math.isfinite(value) and value >= 0.0):
                raise ValidationError(f"emission factor for {mode.value!r} must be finite and >= 0")
            factors[mode] = value
        self._factors = factors

    def grams_per_km(self, mode: Mode) -> float:
        return self._factors[mode]

    def items(self) -> list[tuple[Mode, float]]:
        return [(mode, self._factors[mode]) for mode in Mode]

    def scaled(self, factor: float) -> "EmissionFactorTable":
        return EmissionFactorTable({m: v * factor for m, v in self._factors.items()})

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, EmissionFactorTable):
            return NotImplemented
        return self._factors == other._factors

    __hash__ = None  # type: ignore[assignment]


class ModeShiftMatrix:
    """Row-stochastic matrix: probability a trip moves from one mode to another."""

    def __init__(self, probabilities: Mapping[tuple[Mode, Mode], float]) -> None:
        probs = {(f, t): 0.0 for f in Mode for t in Mode}
        for (from_mode, to_mode), value in probabilities.items():
            value = float(value)
            if not (math.isfinite(value) and 0.0 <= value <= 1.0):
                raise ValidationError(
                    f"mode shift {from_mode.value!r}->{to_mode.value!r} must be in [0, 1]"
                )
            probs[(from_mode, to_mode)] = value
        for from_mode in Mode:
            row_sum = sum(probs[(from_mode, to)] for to in Mode)
            if abs(row_sum - 1.0) > ROW_SUM_TOL:
                raise ValidationError(
                    f"mode shift row {from_mode.value!r} sums to {row_sum!r}, expected 1"
                )
        self._probs = probs

    @classmethod
    def identity(cls) -> "ModeShiftMatrix":
        return cls({(m, m): 1.0 for m in Mode})

    def probability(self, from_mode: Mode, to_mode: Mode) -> float:
        return self._probs[(from_mode, to_mode)]

    def row(self, from_mode: Mode) -> list[tuple[Mode, float]]:
        """Nonzero (to_mode, probability) entries in mode order."""
        return [(to, self._probs[(from_mode, to)]) for to in Mode if self._probs[(from_mode, to)] > 0.0]

    def is_identity(self) -> bool:
        return all(self._probs[(f, t)] == (1.0 if f is t else 0.0) for f in Mode for t in Mode)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ModeShiftMatrix):
            return NotImplemented
        return self._probs == other._probs

    __hash__ = None  # type: ignore[assignment]


# ---------------------------------------------------------------------------
# CSV plumbing


def _rows(path: str | Path, header: Sequence[str]) -> Iterator[tuple[int, list[str]]]:
    path = Path(path)
    if not path.exists():
        raise ValidationError("file does not exist", file=str(path))
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            got = next(reader)
        except StopIteration:
            raise ValidationError("file is empty, expected a header row", file=str(path)) from None
        if got != list(header):
            raise ValidationError(
                f"header mismatch: expected {list(header)!r}, got {got!r}", file=str(path), line=1
            )
        for line_no, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise ValidationError(
                    f"expected {len(header)} fields, got {len(row)}", file=str(path), line=line_no
                )
            yield line_no, row


def _float(value: str, *, file: str, line: int, column: str, minimum: float | None = None,
           exclusive_minimum: float | None = None, maximum: float | None = None) -> float:
    try:
        parsed = float(value)
    except ValueError:
        raise ValidationError(f"non-numeric value {value!r}", file=file, line=line, column=column) from None
    if not math.isfinite(parsed):
        raise ValidationError(f"non-finite value {value!r}", file=file, line=line, column=column)
    if minimum is not None and parsed < minimum:
        raise ValidationError(f"value {parsed!r} below minimum {minimum}", file=file, line=line, column=column)
    if exclusive_minimum is not None and parsed <= exclusive_minimum:
        raise ValidationError(
            f"value {parsed!r} must be > {exclusive_minimum}", file=file, line=line, column=column
        )
    if maximum is not None and parsed > maximum:
        raise ValidationError(f"value {parsed!r} above maximum {maximum}", file=file, line=line, column=column)
    return parsed


def _enum(enum_cls, value: str, *, file: str, line: int, column: str):
    try:
        return enum_cls(value)
    except ValueError:
        allowed = ", ".join(m.value for m in enum_cls)
        raise ValidationError(
            f"unknown {column} {value!r} (allowed: {allowed})", file=file, line=line, column=column
        ) from None


def _zone_ref(zone_id: str, zones: ZoneSet, *, file: str, line: int, column: str) -> str:
    if zone_id not in zones:
        raise ValidationError(f"unknown zone_id {zone_id!r}", file=file, line=line, column=column)
    return zone_id


def _wrap_row_error(exc: ValidationError, *, file: str, line: int) -> ValidationError:
    if exc.file is not None:
        return exc
    return ValidationError(str(exc), file=file, line=line)


# ---------------------------------------------------------------------------
# Loaders


def load_zones(path: str | Path) -> ZoneSet:
    """Load and validate zones.csv."""
    fname = str(path)
    zones = []
    seen: dict[str, int] = {}
    for line_no, row in _rows(path, ZONES_HEADER):
        zone_id, lat_s, lon_s, area_s = row
        if zone_id in seen:
            raise ValidationError(
                f"duplicate zone_id {zone_id!r} (first seen at line {seen[zone_id]})",
                file=fname, line=line_no, column="zone_id",
            )
        seen[zone_id] = line_no
        lat = _float(lat_s, file=fname, line=line_no, column="centroid_lat", minimum=-90.0, maximum=90.0)
        lon = _float(lon_s, file=fname, line=line_no, column="centroid_lon", minimum=-180.0, maximum=180.0)
        area = _enum(AreaType, area_s, file=fname, line=line_no, column="area_type")
        try:
            zones.append(Zone(zone_id=zone_id, centroid_lat=lat, centroid_lon=lon, area_type=area))
        except ValidationError as exc:
            raise _wrap_row_error(exc, file=fname, line=line_no) from None
    return ZoneSet(zones)


def _parse_person(
    row: list[str], zones: ZoneSet, *, file: str, line: int
) -> PersonRecord:
    (person_id, weight_s, occupation, industry, income_cat, sex, age_s, race,
     education, density_s, home_zone) = row[: len(PERSONS_HEADER)]
    weight = _float(weight_s, file=file, line=line, column="weight", exclusive_minimum=0.0)
    age = _float(age_s, file=file, line=line, column="age")
    if not 14.0 < age < 100.0:
        raise ValidationError(f"age {age!r} outside (14, 100)", file=file, line=line, column="age")
    density = _float(density_s, file=file, line=line, column="home_density", exclusive_minimum=0.0)
    _zone_ref(home_zone, zones, file=file, line=line, column="home_zone")
    try:
        return PersonRecord(
            person_id=person_id, weight=weight, occupation=occupation, industry=industry,
            income_cat=income_cat, sex=sex, age=age, race=race, education=education,
            home_density=density, home_zone=home_zone,
        )
    except ValidationError as exc:
        raise _wrap_row_error(exc, file=file, line=line) from None


def load_persons(path: str | Path, zones: ZoneSet) -> list[PersonRecord]:
    """Load and validate persons.csv against the zone set."""
    fname = str(path)
    persons = []
    seen: set[str] = set()
    for line_no, row in _rows(path, PERSONS_HEADER):
        person = _parse_person(row, zones, file=fname, line=line_no)
        if person.person_id in seen:
            raise ValidationError(
                f"duplicate person_id {person.person_id!r}", file=fname, line=line_no, column="person_id"
            )
        seen.add(person.person_id)
        persons.append(person)
    return persons


def load_training(path: str | Path, zones: ZoneSet) -> list[TrainingRecord]:
    """Load and validate training.csv (persons plus observed shares)."""
    fname = str(path)
    records = []
    seen: set[str] = set()
    share_columns = TRAINING_HEADER[len(PERSONS_HEADER):]
    for line_no, row in _rows(path, TRAINING_HEADER):
        person = _parse_person(row, zones, file=fname, line=line_no)
        if person.person_id in seen:
            raise ValidationError(
                f"duplicate person_id {person.person_id!r}", file=fname, line=line_no, column="person_id"
            )
        seen.add(person.person_id)
        values = [
            _float(raw, file=fname, line=line_no, column=col, minimum=0.0, maximum=1.0)
            for col, raw in zip(share_columns, row[len(PERSONS_HEADER):])
        ]
        total = sum(values)
        if abs(total - 1.0) > ROW_SUM_TOL:
            raise ValidationError(
                f"shares sum to {total!r}, expected 1 within {ROW_SUM_TOL}",
                file=fname, line=line_no, column="share_employer",
            )
        try:
            shares = WorkLocationShares(*values)
        except ValidationError as exc:
            raise _wrap_row_error(exc, file=fname, line=line_no) from None
        records.append(TrainingRecord(person=person, shares=shares))
    return records


def load_trips(path: str | Path, zones: ZoneSet, persons: Sequence[PersonRecord]) -> TripTable:
    """Load trips.csv; an empty distance falls back to zone-centroid distance."""
    fname = str(path)
    person_ids = {p.person_id for p in persons}
    trips = []
    for line_no, row in _rows(path, TRIPS_HEADER):
        trip_id, person_id, origin, dest, mode_s, distance_s, purpose_s, freq_s, weight_s = row
        if person_id not in person_ids:
            raise ValidationError(
                f"unknown person_id {person_id!r}", file=fname, line=line_no, column="person_id"
            )
        _zone_ref(origin, zones, file=fname, line=line_no, column="origin_zone")
        _zone_ref(dest, zones, file=fname, line=line_no, column="dest_zone")
        mode = _enum(Mode, mode_s, file=fname, line=line_no, column="mode")
        purpose = _enum(Purpose, purpose_s, file=fname, line=line_no, column="purpose")
        if distance_s == "":
            distance = zones.centroid_distance_km(origin, dest)
        else:
            distance = _float(distance_s, file=fname, line=line_no, column="distance_km", minimum=0.0)
        freq = _float(freq_s, file=fname, line=line_no, column="weekly_freq", minimum=0.0)
        weight = _float(weight_s, file=fname, line=line_no, column="weight", exclusive_minimum=0.0)
        try:
            trips.append(Trip(
                trip_id=trip_id, person_id=person_id, origin_zone=origin, dest_zone=dest,
                mode=mode, distance_km=distance, purpose=purpose, weekly_freq=freq, weight=weight,
            ))
        except ValidationError as exc:
            raise _wrap_row_error(exc, file=fname, line=line_no) from None
    return TripTable(trips, zones)


def load_poi_visits(path: str | Path, zones: ZoneSet) -> list[PoiVisitRow]:
    """Load poi_visits.csv."""
    fname = str(path)
    visits = []
    for line_no, row in _rows(path, POI_VISITS_HEADER):
        home, poi, category_s, count_s = row
        _zone_ref(home, zones, file=fname, line=line_no, column="home_zone")
        _zone_ref(poi, zones, file=fname, line=line_no, column="poi_zone")
        category = _enum(PoiCategory, category_s, file=fname, line=line_no, column="category")
        count = _float(count_s, file=fname, line=line_no, column="visit_count", exclusive_minimum=0.0)
        visits.append(PoiVisitRow(home_zone=home, poi_zone=poi, category=category, visit_count=count))
    return visits


def load_emission_factors(path: str | Path) -> EmissionFactorTable:
    """Load emission_factors.csv; every mode must appear exactly once."""
    fname = str(path)
    factors: dict[Mode, float] = {}
    for line_no, row in _rows(path, EMISSION_FACTORS_HEADER):
        mode_s, value_s = row
        mode = _enum(Mode, mode_s, file=fname, line=line_no, column="mode")
        if mode in factors:
            raise ValidationError(f"duplicate mode {mode.value!r}", file=fname, line=line_no, column="mode")
        factors[mode] = _float(value_s, file=fname, line=line_no, column="g_co2_per_km", minimum=0.0)
    missing = [m.value for m in Mode if m not in factors]
    if missing:
        raise ValidationError(f"missing emission factors for modes: {', '.join(missing)}", file=fname)
    return EmissionFactorTable(factors)


def load_mode_shift(path: str | Path) -> ModeShiftMatrix:
    """Load mode_shift.csv; each from-mode row must sum to 1."""
    fname = str(path)
    probs: dict[tuple[Mode, Mode], float] = {}
    for line_no, row in _rows(path, MODE_SHIFT_HEADER):
        from_s, to_s, prob_s = row
        from_mode = _enum(Mode, from_s, file=fname, line=line_no, column="from_mode")
        to_mode = _enum(Mode, to_s, file=fname, line=line_no, column="to_mode")
        if (from_mode, to_mode) in probs:
            raise ValidationError(
                f"duplicate pair {from_mode.value!r}->{to_mode.value!r}",
                file=fname, line=line_no, column="from_mode",
            )
        probs[(from_mode, to_mode)] = _float(
            prob_s, file=fname, line=line_no, column="probability", minimum=0.0, maximum=1.0
        )
    try:
        return ModeShiftMatrix(probs)
    except ValidationError as exc:
        raise ValidationError(str(exc), file=fname) from None


# ---------------------------------------------------------------------------
# Writers (canonical form: sorted rows, full-precision floats, \n line ends)


def _fmt(value: float) -> str:
    return repr(float(value))


def _write_csv(path: str | Path, header: Sequence[str], rows: Iterable[Sequence[str]]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def write_zones(zones: ZoneSet, path: str | Path) -> None:
    _write_csv(path, ZONES_HEADER, (
        [z.zone_id, _fmt(z.centroid_lat), _fmt(z.centroid_lon), z.area_type.value] for z in zones
    ))


def _person_fields(p: PersonRecord) -> list[str]:
    return [
        p.person_id, _fmt(p.weight), p.occupation, p.industry, p.income_cat, p.sex,
        _fmt(p.age), p.race, p.education, _fmt(p.home_density), p.home_zone,
    ]


def write_persons(persons: Sequence[PersonRecord], path: str | Path) -> None:
    _write_csv(path, PERSONS_HEADER, (
        _person_fields(p) for p in sorted(persons, key=lambda p: p.person_id)
    ))


def write_training(records: Sequence[TrainingRecord], path: str | Path) -> None:
    _write_csv(path, TRAINING_HEADER, (
        _person_fields(rec.person) + [_fmt(v) for v in rec.shares.as_tuple()]
        for rec in sorted(records, key=lambda r: r.person.person_id)
    ))


def write_trips(table: TripTable, path: str | Path) -> None:
    _write_csv(path, TRIPS_HEADER, (
        [t.trip_id, t.person_id, t.origin_zone, t.dest_zone, t.mode.value,
         _fmt(t.distance_km), t.purpose.value, _fmt(t.weekly_freq), _fmt(t.weight)]
        for t in table
    ))


def write_poi_visits(visits: Sequence[PoiVisitRow], path: str | Path) -> None:
    ordered = sorted(visits, key=lambda v: (v.home_zone, v.category.value, v.poi_zone))
    _write_csv(path, POI_VISITS_HEADER, (
        [v.home_zone, v.poi_zone, v.category.value, _fmt(v.visit_count)] for v in ordered
    ))


def write_emission_factors(table: EmissionFactorTable, path: str | Path) -> None:
    _write_csv(path, EMISSION_FACTORS_HEADER, (
        [mode.value, _fmt(value)] for mode, value in table.items()
    ))


def write_mode_shift(matrix: ModeShiftMatrix, path: str | Path) -> None:
    _write_csv(path, MODE_SHIFT_HEADER, (
        [f.value, t.value, _fmt(matrix.probability(f, t))] for f in Mode for t in Mode
    ))
