"""Bundled desk-scale fixtures.

``feeder12``: radial MV feeder, 12 buses, diurnal 24-step load series.
The series peaks at hour 19 and the feeder is tuned so the base case is
secure but adding a constant 2 MW at bus 11 trips the voltage limit at
hour 19 only.

``grid9g``: meshed 9-bus transmission fixture with 4 generators, three
monitored N-1 lines (the chords, ids 9-11) and a 56-day load horizon.
The bundled calendar has generator 0 on maintenance over days 27-45;
taking its neighbour (generator 1) out at the same time violates the
N-1 limits.
"""

from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

from ..model import MaintenanceCalendar, Network, load_calendar_csv, load_network

GRID9G_CONTINGENCIES = (9, 10, 11)
FEEDER12_WEAK_BUS = 11


def fixture_path(name: str) -> Path:
    return Path(str(resources.files(__package__) / name))


def feeder12() -> Network:
    return load_network(fixture_path("feeder12.json"))


def grid9g() -> Network:
    return load_network(fixture_path("grid9g.json"))


def grid9g_calendar() -> MaintenanceCalendar:
    return load_calendar_csv(fixture_path("calendar_grid9g.csv"), 4)


def _profile(name: str) -> list[float]:
    doc = json.loads(fixture_path(name).read_text())
    return [float(v) for v in doc["values"]]


def duck_curve() -> list[float]:
    """Neighbourhood base load in kWh per hour, 24 values."""
    return _profile("duck_curve.json")


def household_template() -> list[float]:
    """Single-household base consumption template in kWh per hour."""
    return _profile("household_template.json")


def ev_preferences_eps05() -> dict[int, tuple[int, int]]:
    """Recorded preference draw at heterogeneity 0.5 admitting exactly 7 EVs."""
    doc = json.loads(fixture_path("preferences_eps05.json").read_text())
    return {int(k): (int(v[0]), int(v[1])) for k, v in doc.items()}
