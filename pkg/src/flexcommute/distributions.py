"""Per-home-zone destination and distance distributions for third places.

Public-space and co-working distributions come from observed visitation
volumes (probability proportional to visit count, distance between zone
centroids). Friend/family-home distributions come from social-purpose trips
in the travel survey (probability proportional to weighted weekly
frequency, distances straight off the trip rows).

Home zones with no observations of their own receive a shared global
fallback: visit weights pooled over all home zones, with each destination's
distance set to the pooled weighted mean, renormalized to a probability
distribution.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from enum import Enum
from random import Random
from typing import Iterable, NamedTuple, Sequence

from .errors import ConfigurationError, ValidationError
from .geo import Purpose, TripTable, ZoneSet
from .ingest import PoiCategory, PoiVisitRow

PROB_SUM_TOL = 1e-9
DEFAULT_INTRA_ZONE_FLOOR_KM = 0.5

SOCIAL_PURPOSES = (Purpose.social_friends, Purpose.social_relatives)


class ThirdPlaceCategory(str, Enum):
    """The three kinds of remote-work location that still generate a trip."""

    public_space = "public_space"
    coworking = "coworking"
    friend_home = "friend_home"


CATEGORY_ORDER: tuple[ThirdPlaceCategory, ...] = (
    ThirdPlaceCategory.public_space,
    ThirdPlaceCategory.coworking,
    ThirdPlaceCategory.friend_home,
)


class DistributionSource(str, Enum):
    zone_level = "zone_level"
    global_fallback = "global_fallback"


class SupportPoint(NamedTuple):
    dest_zone: str
    probability: float
    distance_km: float


@dataclass(frozen=True)
class DistanceDistribution:
    """Discrete destination distribution for one home zone and category."""

    home_zone: str
    category: ThirdPlaceCategory
    support: tuple[SupportPoint, ...]
    expected_distance_km: float
    source: DistributionSource

    def __post_init__(self) -> None:
        if not self.support:
            raise ValidationError(f"empty support for home zone {self.home_zone!r}")
        total = 0.0
        expected = 0.0
        prev = None
        for point in self.support:
            if not (0.0 < point.probability <= 1.0):
                raise ValidationError(
                    f"support probability {point.probability!r} outside (0, 1]"
                )
            if not (math.isfinite(point.distance_km) and point.distance_km >= 0.0):
                raise ValidationError(f"support distance {point.distance_km!r} invalid")
            if prev is not None and point.dest_zone <= prev:
                raise ValidationError("support must be strictly ordered by dest_zone")
            prev = point.dest_zone
            total += point.probability
            expected += point.probability * point.distance_km
        if abs(total - 1.0) > PROB_SUM_TOL:
            raise ValidationError(f"support probabilities sum to {total!r}, expected 1")
        if abs(expected - self.expected_distance_km) > PROB_SUM_TOL:
            raise ValidationError(
                f"stored expectation {self.expected_distance_km!r} disagrees with support ({expected!r})"
            )

    def variance_km2(self) -> float:
        """Variance of the sampled distance, for Monte Carlo error budgets."""
        mean = self.expected_distance_km
        return sum(p.probability * (p.distance_km - mean) ** 2 for p in self.support)


def expected_distance(dist: DistanceDistribution) -> float:
    """Expected trip distance in km under the distribution."""
    return dist.expected_distance_km


def sample_destination(dist: DistanceDistribution, rng: Random) -> tuple[str, float]:
    """Inverse-CDF draw over the ordered support."""
    u = rng.random()
    cum = 0.0
    for point in dist.support:
        cum += point.probability
        if u < cum:
            return point.dest_zone, point.distance_km
    last = dist.support[-1]
    return last.dest_zone, last.distance_km


def substream(master_seed: int, key: str) -> Random:
    """Independent deterministic RNG stream for (seed, key).

    Streams are derived by a stable hash, so per-person sampling does not
    depend on the order in which people are processed.
    """
    digest = hashlib.sha256(f"{master_seed}:{key}".encode("utf-8")).digest()
    return Random(int.from_bytes(digest[:8], "big"))


def _apply_floor(distance: float, floor_km: float) -> float:
    # Identical centroids make intra-zone distances exactly zero; replace
    # exact zeros with an explicit, tunable floor.
    return floor_km if distance == 0.0 else distance


def _build_distributions(
    pair_weights: dict[str, dict[str, float]],
    pair_distance_sums: dict[str, dict[str, float]],
    zones: ZoneSet,
    category: ThirdPlaceCategory,
) -> dict[str, DistanceDistribution]:
    """Assemble per-zone distributions plus the pooled fallback.

    ``pair_weights[home][dest]`` is the total observation weight and
    ``pair_distance_sums[home][dest]`` the weight * distance sum, so each
    (home, dest) distance is the weighted mean of its observations.
    """
    global_weights: dict[str, float] = {}
    global_distance_sums: dict[str, float] = {}
    for home in sorted(pair_weights):
        for dest, w in pair_weights[home].items():
            global_weights[dest] = global_weights.get(dest, 0.0) + w
            global_distance_sums[dest] = global_distance_sums.get(dest, 0.0) + pair_distance_sums[home][dest]

    def make(home: str, weights: dict[str, float], distance_sums: dict[str, float],
             source: DistributionSource) -> DistanceDistribution:
        total = sum(weights[d] for d in sorted(weights))
        support = []
        expected = 0.0
        for dest in sorted(weights):
            prob = weights[dest] / total
            distance = distance_sums[dest] / weights[dest]
            support.append(SupportPoint(dest, prob, distance))
            expected += prob * distance
        return DistanceDistribution(
            home_zone=home, category=category, support=tuple(support),
            expected_distance_km=expected, source=source,
        )

    result: dict[str, DistanceDistribution] = {}
    for zone_id in zones.ids():
        if zone_id in pair_weights:
            result[zone_id] = make(
                zone_id, pair_weights[zone_id], pair_distance_sums[zone_id], DistributionSource.zone_level
            )
        else:
            result[zone_id] = make(
                zone_id, global_weights, global_distance_sums, DistributionSource.global_fallback
            )
    return result


def build_poi_distributions(
    visits: Sequence[PoiVisitRow],
    zones: ZoneSet,
    category: PoiCategory | ThirdPlaceCategory,
    intra_zone_floor_km: float = DEFAULT_INTRA_ZONE_FLOOR_KM,
) -> dict[str, DistanceDistribution]:
    """Destination distributions for one establishment category.

    Probability of a destination is proportional to its visit count;
    distances are centroid-to-centroid with the intra-zone floor applied.
    """
    target = ThirdPlaceCategory(category.value)
    pair_weights: dict[str, dict[str, float]] = {}
    pair_distance_sums: dict[str, dict[str, float]] = {}
    for visit in visits:
        if visit.category.value != target.value:
            continue
        distance = _apply_floor(
            zones.centroid_distance_km(visit.home_zone, visit.poi_zone), intra_zone_floor_km
        )
        home_w = pair_weights.setdefault(visit.home_zone, {})
        home_d = pair_distance_sums.setdefault(visit.home_zone, {})
        home_w[visit.poi_zone] = home_w.get(visit.poi_zone, 0.0) + visit.visit_count
        home_d[visit.poi_zone] = home_d.get(visit.poi_zone, 0.0) + visit.visit_count * distance
    if not pair_weights:
        raise ConfigurationError(
            f"no visit rows for category {target.value!r}: cannot build distributions"
        )
    return _build_distributions(pair_weights, pair_distance_sums, zones, target)


def build_social_distributions(
    trips: TripTable,
    zones: ZoneSet,
    intra_zone_floor_km: float = DEFAULT_INTRA_ZONE_FLOOR_KM,
) -> dict[str, DistanceDistribution]:
    """Friend/family-home distributions from social-purpose trips.

    The trip's origin is taken as the home zone; observation weight is
    weekly_freq * weight and the distance comes from the trip row.
    """
    pair_weights: dict[str, dict[str, float]] = {}
    pair_distance_sums: dict[str, dict[str, float]] = {}
    for trip in trips:
        if trip.purpose not in SOCIAL_PURPOSES:
            continue
        w = trip.weekly_weighted_trips()
        if w <= 0.0:
            continue
        distance = _apply_floor(trip.distance_km, intra_zone_floor_km)
        home_w = pair_weights.setdefault(trip.origin_zone, {})
        home_d = pair_distance_sums.setdefault(trip.origin_zone, {})
        home_w[trip.dest_zone] = home_w.get(trip.dest_zone, 0.0) + w
        home_d[trip.dest_zone] = home_d.get(trip.dest_zone, 0.0) + w * distance
    if not pair_weights:
        raise ConfigurationError("no social-purpose trips: cannot build friend-home distributions")
    return _build_distributions(pair_weights, pair_distance_sums, zones, ThirdPlaceCategory.friend_home)


def build_all_distributions(
    visits: Sequence[PoiVisitRow],
    trips: TripTable,
    zones: ZoneSet,
    intra_zone_floor_km: float = DEFAULT_INTRA_ZONE_FLOOR_KM,
) -> dict[ThirdPlaceCategory, dict[str, DistanceDistribution]]:
    """All three category maps, keyed by category."""
    return {
        ThirdPlaceCategory.public_space: build_poi_distributions(
            visits, zones, PoiCategory.public_space, intra_zone_floor_km
        ),
        ThirdPlaceCategory.coworking: build_poi_distributions(
            visits, zones, PoiCategory.coworking, intra_zone_floor_km
        ),
        ThirdPlaceCategory.friend_home: build_social_distributions(trips, zones, intra_zone_floor_km),
    }


def distribution_rows(
    distributions: dict[ThirdPlaceCategory, dict[str, DistanceDistribution]]
) -> Iterable[list[str]]:
    """Diagnostic export rows: home_zone,category,dest_zone,probability,distance_km,source."""
    for category in CATEGORY_ORDER:
        per_zone = distributions.get(category, {})
        for home_zone in sorted(per_zone):
            dist = per_zone[home_zone]
            for point in dist.support:
                yield [
                    home_zone, category.value, point.dest_zone,
                    repr(point.probability), repr(point.distance_km), dist.source.value,
                ]
