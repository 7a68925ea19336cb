"""Rewrite a baseline commute trip table under counterfactual work-location scenarios.

Two counterfactuals are supported:

* ``home_only`` — every remote hour is assumed to happen at home, so each
  commute trip's weekly frequency is scaled down to the employer-site share
  and the entire remote share disappears from the network.
* ``spectrum`` — the remote share splits between home (trips eliminated)
  and three kinds of third place (trips redirected): each commute trip
  keeps its employer-share frequency, and for every third-place category a
  synthetic home-anchored trip is added with frequency equal to the
  original frequency times that category's share.

Synthetic destinations come from per-home-zone distance distributions,
either expanded over the full support as fractional-frequency rows
(``expectation`` execution, exact linear aggregates) or drawn once per
person and category (``monte_carlo`` execution). Synthetic trips inherit
the person's dominant baseline commute mode; a row-stochastic mode-shift
matrix is then applied to surviving and synthetic commute rows alike.
Non-commute trips always pass through untouched.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from random import Random
from typing import Mapping, Sequence

from .choice import WorkLocationShares
from .distributions import (
    CATEGORY_ORDER,
    DistanceDistribution,
    ThirdPlaceCategory,
    sample_destination,
    substream,
)
from .errors import ConfigurationError
from .geo import Mode, Purpose, Trip, TripTable, od_flow_matrix, total_distance_by_mode
from .ingest import ModeShiftMatrix, PersonRecord


class ScenarioKind(str, Enum):
    baseline = "baseline"
    home_only = "home_only"
    spectrum = "spectrum"


class ExecutionMode(str, Enum):
    expectation = "expectation"
    monte_carlo = "monte_carlo"


@dataclass(frozen=True)
class ScenarioSpec:
    """Everything needed to run one scenario reproducibly."""

    name: str
    kind: ScenarioKind
    execution: ExecutionMode = ExecutionMode.expectation
    seed: int | None = None
    mode_shift: ModeShiftMatrix = field(default_factory=ModeShiftMatrix.identity)
    share_override: WorkLocationShares | None = None

    def __post_init__(self) -> None:
        if self.execution is ExecutionMode.monte_carlo and self.seed is None:
            raise ConfigurationError(f"scenario {self.name!r}: monte_carlo execution requires a seed")

    def describe(self) -> dict:
        return {
            "name": self.name,
            "kind": self.kind.value,
            "execution": self.execution.value,
            "seed": self.seed,
            "share_override": list(self.share_override.as_tuple()) if self.share_override else None,
            "identity_mode_shift": self.mode_shift.is_identity(),
        }


@dataclass(frozen=True)
class CommuteStats:
    """Weighted weekly commute-trip accounting for one scenario run."""

    baseline_weekly_trips: float
    surviving_weekly_trips: float
    synthetic_weekly_trips: float
    baseline_weekly_km: float
    scenario_weekly_km: float

    @property
    def remote_fraction(self) -> float:
        """Fraction of baseline commute trips removed or redirected."""
        if self.baseline_weekly_trips == 0.0:
            return 0.0
        return (self.baseline_weekly_trips - self.surviving_weekly_trips) / self.baseline_weekly_trips


@dataclass(frozen=True)
class ScenarioResult:
    spec: ScenarioSpec
    trip_table: TripTable
    distance_by_mode: dict[Mode, float]
    od_delta: dict[tuple[str, str], float]
    commute_stats: CommuteStats
    provenance: dict[str, str]


DistributionsByCategory = Mapping[ThirdPlaceCategory, Mapping[str, DistanceDistribution]]


def _dominant_commute_mode(commute_trips: Sequence[Trip]) -> Mode:
    totals: dict[Mode, float] = {}
    for trip in commute_trips:
        totals[trip.mode] = totals.get(trip.mode, 0.0) + trip.weekly_weighted_trips()
    best_mode = None
    best_total = -1.0
    for mode in Mode:  # enum order breaks ties
        total = totals.get(mode, 0.0)
        if mode in totals and total > best_total:
            best_mode = mode
            best_total = total
    assert best_mode is not None
    return best_mode


def _sample_mode(row: Sequence[tuple[Mode, float]], rng: Random) -> Mode:
    u = rng.random()
    cum = 0.0
    for mode, prob in row:
        cum += prob
        if u < cum:
            return mode
    return row[-1][0]


# Row tuple emitted by _rewrite_person, merged into Trip objects afterwards:
# (trip_id, person_id, origin, dest, mode, distance_km, weight) + freq.
_RowKey = tuple[str, str, str, str, Mode, float, float]


def _rewrite_person(
    person: PersonRecord,
    commute_trips: Sequence[Trip],
    shares: WorkLocationShares,
    distributions: DistributionsByCategory | None,
    spec: ScenarioSpec,
) -> list[tuple[_RowKey, float]]:
    """Scenario commute rows replacing one person's baseline commute trips.

    Pure and independent across persons: Monte Carlo draws come from a
    per-person substream, so results do not depend on processing order.
    Draw order within a person is fixed: one destination draw per
    third-place category with positive share, then one mode draw per
    emitted row in row order.
    """
    monte_carlo = spec.execution is ExecutionMode.monte_carlo
    rng = substream(spec.seed, person.person_id) if monte_carlo else None
    identity_shift = spec.mode_shift.is_identity()

    active: list[tuple[ThirdPlaceCategory, float, DistanceDistribution]] = []
    sampled: dict[ThirdPlaceCategory, tuple[str, float]] = {}
    if spec.kind is ScenarioKind.spectrum:
        for category in CATEGORY_ORDER:
            share = shares.third_place(category.value)
            if share <= 0.0:
                continue
            dist = _distribution_for(distributions, category, person)
            active.append((category, share, dist))
            if monte_carlo:
                sampled[category] = sample_destination(dist, rng)
    dominant = _dominant_commute_mode(commute_trips) if active else None

    out: list[tuple[_RowKey, float]] = []

    def emit(trip_id: str, origin: str, dest: str, from_mode: Mode, distance: float,
             freq: float, weight: float) -> None:
        if identity_shift:
            choices: list[tuple[Mode, float]] = [(from_mode, 1.0)]
        else:
            choices = spec.mode_shift.row(from_mode)
        if monte_carlo:
            mode = _sample_mode(choices, rng)
            choices = [(mode, 1.0)]
        for to_mode, prob in choices:
            out.append((
                (trip_id, person.person_id, origin, dest, to_mode, distance, weight),
                freq * prob,
            ))

    for trip in commute_trips:
        surviving = trip.weekly_freq * shares.employer
        if surviving > 0.0:
            emit(trip.trip_id, trip.origin_zone, trip.dest_zone, trip.mode,
                 trip.distance_km, surviving, trip.weight)
        for category, share, dist in active:
            synthetic = trip.weekly_freq * share
            if synthetic <= 0.0:
                continue
            if monte_carlo:
                dest, distance = sampled[category]
                emit(f"{person.person_id}:{category.value}:{dest}", person.home_zone,
                     dest, dominant, distance, synthetic, trip.weight)
            else:
                for point in dist.support:
                    emit(f"{person.person_id}:{category.value}:{point.dest_zone}",
                         person.home_zone, point.dest_zone, dominant,
                         point.distance_km, synthetic * point.probability, trip.weight)
    return out


def _distribution_for(
    distributions: DistributionsByCategory | None,
    category: ThirdPlaceCategory,
    person: PersonRecord,
) -> DistanceDistribution:
    if distributions is None or category not in distributions:
        raise ConfigurationError(
            f"no distance distributions for category {category.value!r}"
        )
    dist = distributions[category].get(person.home_zone)
    if dist is None:
        raise ConfigurationError(
            f"no {category.value!r} distribution for home zone {person.home_zone!r}"
        )
    return dist


def _merge_rows(per_person: Sequence[Sequence[tuple[_RowKey, float]]]) -> list[Trip]:
    # Expansion can emit several rows with identical content apart from
    # frequency (one per originating commute trip); merge them so the output
    # table is canonical. Accumulation runs in person order, so it is
    # deterministic regardless of how the per-person work was scheduled.
    merged: dict[_RowKey, float] = {}
    for rows in per_person:
        for key, freq in rows:
            merged[key] = merged.get(key, 0.0) + freq
    return [
        Trip(trip_id=k[0], person_id=k[1], origin_zone=k[2], dest_zone=k[3], mode=k[4],
             distance_km=k[5], purpose=Purpose.commute, weekly_freq=freq, weight=k[6])
        for k, freq in merged.items()
    ]


def apply_scenario(
    baseline: TripTable,
    persons: Sequence[PersonRecord],
    shares_by_person: Mapping[str, WorkLocationShares] | None,
    distributions: DistributionsByCategory | None,
    spec: ScenarioSpec,
    provenance: Mapping[str, str] | None = None,
    threads: int = 1,
) -> ScenarioResult:
    """Run one scenario against the baseline table.

    ``shares_by_person`` maps person_id to predicted shares; it may be None
    only when ``spec.share_override`` is set. ``threads`` splits the
    per-person rewriting across a thread pool; results are merged in person
    order, so the output is identical for any worker count.
    """
    baseline_commute_trips = baseline.total_weighted_trips(Purpose.commute)
    baseline_commute_km = baseline.weighted_distance_km(Purpose.commute)
    provenance = dict(provenance or {})

    if spec.kind is ScenarioKind.baseline:
        stats = CommuteStats(
            baseline_weekly_trips=baseline_commute_trips,
            surviving_weekly_trips=baseline_commute_trips,
            synthetic_weekly_trips=0.0,
            baseline_weekly_km=baseline_commute_km,
            scenario_weekly_km=baseline_commute_km,
        )
        return ScenarioResult(
            spec=spec, trip_table=baseline,
            distance_by_mode=total_distance_by_mode(baseline),
            od_delta={}, commute_stats=stats, provenance=provenance,
        )

    persons_by_id = {p.person_id: p for p in persons}
    passthrough: list[Trip] = []
    commute_by_person: dict[str, list[Trip]] = {}
    for trip in baseline:
        if trip.purpose is Purpose.commute:
            commute_by_person.setdefault(trip.person_id, []).append(trip)
        else:
            passthrough.append(trip)

    person_ids = sorted(commute_by_person)
    jobs: list[tuple[PersonRecord, list[Trip], WorkLocationShares]] = []
    surviving_total = 0.0
    synthetic_total = 0.0
    for pid in person_ids:
        person = persons_by_id.get(pid)
        if person is None:
            raise ConfigurationError(f"commute trips reference unknown person {pid!r}")
        if spec.share_override is not None:
            shares = spec.share_override
        elif shares_by_person is not None and pid in shares_by_person:
            shares = shares_by_person[pid]
        else:
            raise ConfigurationError(f"person {pid!r} has commute trips but no predicted shares")
        trips = commute_by_person[pid]
        weighted = sum(t.weekly_weighted_trips() for t in trips)
        surviving_total += weighted * shares.employer
        if spec.kind is ScenarioKind.spectrum:
            synthetic_total += weighted * shares.redirected
        jobs.append((person, trips, shares))

    def run(job: tuple[PersonRecord, list[Trip], WorkLocationShares]) -> list[tuple[_RowKey, float]]:
        person, trips, shares = job
        return _rewrite_person(person, trips, shares, distributions, spec)

    if threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            per_person = list(pool.map(run, jobs, chunksize=256))
    else:
        per_person = [run(job) for job in jobs]

    table = TripTable(passthrough + _merge_rows(per_person), baseline.zone_set)

    stats = CommuteStats(
        baseline_weekly_trips=baseline_commute_trips,
        surviving_weekly_trips=surviving_total,
        synthetic_weekly_trips=synthetic_total,
        baseline_weekly_km=baseline_commute_km,
        scenario_weekly_km=table.weighted_distance_km(Purpose.commute),
    )
    return ScenarioResult(
        spec=spec, trip_table=table,
        distance_by_mode=total_distance_by_mode(table),
        od_delta=od_delta(baseline, table),
        commute_stats=stats, provenance=provenance,
    )


def od_delta(baseline: TripTable, scenario: TripTable) -> dict[tuple[str, str], float]:
    """Scenario minus baseline weighted weekly flows, omitting exact zeros."""
    if baseline.zone_set != scenario.zone_set:
        raise ConfigurationError("cannot diff trip tables over different zone sets")
    base = od_flow_matrix(baseline)
    scen = od_flow_matrix(scenario)
    delta: dict[tuple[str, str], float] = {}
    for key in sorted(set(base) | set(scen)):
        change = scen.get(key, 0.0) - base.get(key, 0.0)
        if change != 0.0:
            delta[key] = change
    return delta


def scenario_summary(result: ScenarioResult) -> dict:
    """JSON-ready summary of one scenario run."""
    stats = result.commute_stats
    return {
        "scenario": result.spec.describe(),
        "distance_km_by_mode": {mode.value: result.distance_by_mode[mode] for mode in Mode},
        "total_distance_km": sum(result.distance_by_mode[mode] for mode in Mode),
        "commute": {
            "baseline_weekly_trips": stats.baseline_weekly_trips,
            "surviving_weekly_trips": stats.surviving_weekly_trips,
            "synthetic_weekly_trips": stats.synthetic_weekly_trips,
            "removed_or_redirected_fraction": stats.remote_fraction,
            "baseline_weekly_km": stats.baseline_weekly_km,
            "scenario_weekly_km": stats.scenario_weekly_km,
        },
        "od_delta_entries": len(result.od_delta),
        "provenance": dict(sorted(result.provenance.items())),
    }


def od_delta_csv_rows(result: ScenarioResult) -> list[list[str]]:
    return [
        [origin, dest, repr(change)]
        for (origin, dest), change in sorted(result.od_delta.items())
    ]


def od_delta_geojson(result: ScenarioResult) -> dict:
    """FeatureCollection of centroid-to-centroid lines carrying the flow change."""
    zones = result.trip_table.zone_set
    features = []
    for (origin, dest), change in sorted(result.od_delta.items()):
        o = zones[origin]
        d = zones[dest]
        features.append({
            "type": "Feature",
            "geometry": {
                "type": "LineString",
                "coordinates": [
                    [o.centroid_lon, o.centroid_lat],
                    [d.centroid_lon, d.centroid_lat],
                ],
            },
            "properties": {
                "origin_zone": origin,
                "dest_zone": dest,
                "delta_weekly_trips": change,
            },
        })
    return {"type": "FeatureCollection", "features": features}
