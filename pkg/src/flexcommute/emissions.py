"""Convert weekly distance-by-mode into CO2 totals and comparative reports.

Factors are grams per km; results are kilograms per week, so emissions are
exactly linear in both distances and factors.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .errors import ConfigurationError
from .geo import Mode
from .ingest import EmissionFactorTable


@dataclass(frozen=True)
class EmissionsResult:
    total_kg_co2_per_week: float
    by_mode: dict[Mode, float]
    vs_baseline: float | None = None


@dataclass(frozen=True)
class ScenarioDistances:
    """Distance-by-mode input to the report, with display metadata."""

    name: str
    kind: str
    distance_km_by_mode: Mapping[Mode, float]
    metadata: Mapping[str, object] = field(default_factory=dict)

    def total_km(self) -> float:
        return sum(self.distance_km_by_mode.get(mode, 0.0) for mode in Mode)


def compute_emissions(
    distance_by_mode: Mapping[Mode, float], factors: EmissionFactorTable
) -> EmissionsResult:
    """Weekly kg CO2 per mode: km * g/km / 1000."""
    by_mode: dict[Mode, float] = {}
    total = 0.0
    for mode in Mode:
        km = distance_by_mode.get(mode, 0.0)
        try:
            grams = factors.grams_per_km(mode)
        except KeyError:
            raise ConfigurationError(f"no emission factor for mode {mode.value!r}") from None
        kg = km * grams / 1000.0
        by_mode[mode] = kg
        total += kg
    return EmissionsResult(total_kg_co2_per_week=total, by_mode=by_mode)


def compare(baseline: EmissionsResult, scenario: EmissionsResult) -> float:
    """Relative emissions change (scenario - baseline) / baseline."""
    if baseline.total_kg_co2_per_week <= 0.0:
        raise ConfigurationError("baseline emissions are zero: relative change is undefined")
    return (
        scenario.total_kg_co2_per_week - baseline.total_kg_co2_per_week
    ) / baseline.total_kg_co2_per_week


def _mode_relative_change(base_km: float, scen_km: float) -> float | None:
    if base_km == 0.0:
        return 0.0 if scen_km == 0.0 else None
    return (scen_km - base_km) / base_km


def render_report(
    baseline: ScenarioDistances,
    scenarios: Sequence[ScenarioDistances],
    factors: EmissionFactorTable,
    provenance: Mapping[str, str] | None = None,
) -> dict:
    """Comparative report across scenarios, JSON-ready with stable key order."""
    base_emissions = compute_emissions(baseline.distance_km_by_mode, factors)

    def block(entry: ScenarioDistances, emissions: EmissionsResult) -> dict:
        return {
            "name": entry.name,
            "kind": entry.kind,
            "distance_km_by_mode": {m.value: entry.distance_km_by_mode.get(m, 0.0) for m in Mode},
            "total_distance_km": entry.total_km(),
            "kg_co2_by_mode": {m.value: emissions.by_mode[m] for m in Mode},
            "total_kg_co2": emissions.total_kg_co2_per_week,
            "metadata": dict(entry.metadata),
        }

    report: dict = {"baseline": block(baseline, base_emissions), "scenarios": []}
    base_total_km = baseline.total_km()
    for entry in scenarios:
        emissions = compute_emissions(entry.distance_km_by_mode, factors)
        item = block(entry, emissions)
        item["distance_change_by_mode"] = {
            m.value: _mode_relative_change(
                baseline.distance_km_by_mode.get(m, 0.0), entry.distance_km_by_mode.get(m, 0.0)
            )
            for m in Mode
        }
        item["total_distance_change"] = (
            None if base_total_km == 0.0 else (entry.total_km() - base_total_km) / base_total_km
        )
        item["total_emissions_change"] = (
            None if base_emissions.total_kg_co2_per_week == 0.0
            else compare(base_emissions, emissions)
        )
        report["scenarios"].append(item)
    report["emission_factors_g_per_km"] = {m.value: factors.grams_per_km(m) for m in Mode}
    report["provenance"] = dict(sorted((provenance or {}).items()))
    return report


def report_csv_rows(report: dict) -> list[list[str]]:
    """Plot-ready rows: scenario,mode,weekly_km,weekly_kg_co2,relative_change."""
    rows: list[list[str]] = []

    def emit(entry: dict, changes: dict | None) -> None:
        for mode in Mode:
            change = 0.0 if changes is None else changes.get(mode.value)
            rows.append([
                entry["name"],
                mode.value,
                repr(entry["distance_km_by_mode"][mode.value]),
                repr(entry["kg_co2_by_mode"][mode.value]),
                "" if change is None else repr(change),
            ])

    emit(report["baseline"], None)
    for entry in report["scenarios"]:
        emit(entry, entry["distance_change_by_mode"])
    return rows
