"""Spatial primitives: zones, travel modes, trips, and the weighted trip table.

Everything here is immutable after construction, and every aggregation runs
in a deterministic sorted order so that identical inputs always produce
byte-identical downstream artifacts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Iterator

from .errors import ValidationError

EARTH_RADIUS_KM = 6371.0088  # IUGG mean Earth radius


class AreaType(str, Enum):
    """Coarse development intensity of a zone."""

    urban = "urban"
    suburban = "suburban"
    rural = "rural"


class Mode(str, Enum):
    """Travel modes; declaration order doubles as the deterministic tie-break order."""

    car = "car"
    transit = "transit"
    walk = "walk"
    bike = "bike"
    other = "other"


class Purpose(str, Enum):
    """Trip purposes the scenario engine distinguishes."""

    commute = "commute"
    social_friends = "social_friends"
    social_relatives = "social_relatives"
    other = "other"


MODE_ORDER: dict[Mode, int] = {mode: i for i, mode in enumerate(Mode)}


def _require_coords(lat: float, lon: float) -> None:
    if not (math.isfinite(lat) and -90.0 <= lat <= 90.0):
        raise ValidationError(f"latitude {lat!r} outside [-90, 90]")
    if not (math.isfinite(lon) and -180.0 <= lon <= 180.0):
        raise ValidationError(f"longitude {lon!r} outside [-180, 180]")


def haversine_km(a: tuple[float, float], b: tuple[float, float]) -> float:
    """Great-circle distance in km between two (lat, lon) pairs in degrees.

    Uses the half-angle sine form, which is well conditioned for nearby
    points. Absolute values of the deltas make the result bit-for-bit
    symmetric in its arguments.
    """
    lat1, lon1 = a
    lat2, lon2 = b
    _require_coords(lat1, lon1)
    _require_coords(lat2, lon2)
    phi1 = math.radians(lat1)
    phi2 = math.radians(lat2)
    sin_dphi = math.sin(math.radians(abs(lat2 - lat1)) * 0.5)
    sin_dlam = math.sin(math.radians(abs(lon2 - lon1)) * 0.5)
    s = sin_dphi * sin_dphi + math.cos(phi1) * math.cos(phi2) * sin_dlam * sin_dlam
    return 2.0 * EARTH_RADIUS_KM * math.atan2(math.sqrt(s), math.sqrt(max(0.0, 1.0 - s)))


@dataclass(frozen=True, slots=True)
class Zone:
    """A census-tract-like spatial unit with a centroid."""

    zone_id: str
    centroid_lat: float
    centroid_lon: float
    area_type: AreaType

    def __post_init__(self) -> None:
        if not self.zone_id:
            raise ValidationError("zone_id must be non-empty")
        _require_coords(self.centroid_lat, self.centroid_lon)

    @property
    def centroid(self) -> tuple[float, float]:
        return (self.centroid_lat, self.centroid_lon)


class ZoneSet:
    """Immutable collection of zones keyed by zone_id, iterated in id order."""

    def __init__(self, zones: Iterable[Zone]) -> None:
        by_id: dict[str, Zone] = {}
        for zone in zones:
            if zone.zone_id in by_id:
                raise ValidationError(f"duplicate zone_id {zone.zone_id!r}")
            by_id[zone.zone_id] = zone
        self._zones = dict(sorted(by_id.items()))

    def __contains__(self, zone_id: str) -> bool:
        return zone_id in self._zones

    def __len__(self) -> int:
        return len(self._zones)

    def __iter__(self) -> Iterator[Zone]:
        return iter(self._zones.values())

    def __getitem__(self, zone_id: str) -> Zone:
        try:
            return self._zones[zone_id]
        except KeyError:
            raise ValidationError(f"unknown zone_id {zone_id!r}") from None

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ZoneSet):
            return NotImplemented
        return self._zones == other._zones

    __hash__ = None  # type: ignore[assignment]

    def ids(self) -> list[str]:
        return list(self._zones)

    def centroid_distance_km(self, zone_a: str, zone_b: str) -> float:
        """Great-circle distance between two zone centroids."""
        return haversine_km(self[zone_a].centroid, self[zone_b].centroid)


@dataclass(frozen=True, slots=True)
class Trip:
    """One weighted weekly trip record between two zones."""

    trip_id: str
    person_id: str
    origin_zone: str
    dest_zone: str
    mode: Mode
    distance_km: float
    purpose: Purpose
    weekly_freq: float
    weight: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.distance_km) and self.distance_km >= 0.0):
            raise ValidationError(f"trip {self.trip_id!r}: distance_km must be finite and >= 0")
        if not (math.isfinite(self.weekly_freq) and self.weekly_freq >= 0.0):
            raise ValidationError(f"trip {self.trip_id!r}: weekly_freq must be finite and >= 0")
        if not (math.isfinite(self.weight) and self.weight > 0.0):
            raise ValidationError(f"trip {self.trip_id!r}: weight must be finite and > 0")

    def weekly_weighted_trips(self) -> float:
        return self.weekly_freq * self.weight

    def weekly_weighted_km(self) -> float:
        return self.distance_km * self.weekly_freq * self.weight


def _trip_sort_key(trip: Trip) -> tuple:
    # Total order over row content: trip_id alone is the primary key, but
    # scenario rewriting can emit several rows per id (mode splits), so the
    # remaining fields break ties deterministically.
    return (
        trip.trip_id,
        trip.purpose.value,
        trip.origin_zone,
        trip.dest_zone,
        trip.mode.value,
        trip.distance_km,
        trip.weekly_freq,
        trip.weight,
        trip.person_id,
    )


class TripTable:
    """Ordered, weighted collection of trips tied to a zone set.

    Rows are stored sorted by trip_id (full-content tie-break) so that every
    aggregation and export is byte-reproducible.
    """

    def __init__(self, trips: Iterable[Trip], zone_set: ZoneSet) -> None:
        rows = sorted(trips, key=_trip_sort_key)
        for trip in rows:
            if trip.origin_zone not in zone_set:
                raise ValidationError(
                    f"trip {trip.trip_id!r}: origin zone {trip.origin_zone!r} not in zone set"
                )
            if trip.dest_zone not in zone_set:
                raise ValidationError(
                    f"trip {trip.trip_id!r}: destination zone {trip.dest_zone!r} not in zone set"
                )
        self._trips: tuple[Trip, ...] = tuple(rows)
        self.zone_set = zone_set

    @property
    def trips(self) -> tuple[Trip, ...]:
        return self._trips

    def __len__(self) -> int:
        return len(self._trips)

    def __iter__(self) -> Iterator[Trip]:
        return iter(self._trips)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TripTable):
            return NotImplemented
        return self._trips == other._trips and self.zone_set == other.zone_set

    __hash__ = None  # type: ignore[assignment]

    def total_weighted_distance_km(self) -> float:
        return sum(t.weekly_weighted_km() for t in self._trips)

    def total_weighted_trips(self, purpose: Purpose | None = None) -> float:
        return sum(
            t.weekly_weighted_trips()
            for t in self._trips
            if purpose is None or t.purpose is purpose
        )

    def weighted_distance_km(self, purpose: Purpose) -> float:
        return sum(t.weekly_weighted_km() for t in self._trips if t.purpose is purpose)


def total_distance_by_mode(table: TripTable) -> dict[Mode, float]:
    """Weekly weighted km per mode; modes absent from the table map to 0."""
    totals = {mode: 0.0 for mode in Mode}
    for trip in table:
        totals[trip.mode] += trip.weekly_weighted_km()
    return totals


def od_flow_matrix(table: TripTable) -> dict[tuple[str, str], float]:
    """Weekly weighted trip count per (origin, destination) zone pair.

    Keys appear in (origin, dest) id order.
    """
    flows: dict[tuple[str, str], float] = {}
    for trip in table:
        key = (trip.origin_zone, trip.dest_zone)
        flows[key] = flows.get(key, 0.0) + trip.weekly_weighted_trips()
    return dict(sorted(flows.items()))
