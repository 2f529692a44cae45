"""Experiment matrix: fault cases, training splits, zone labels, subsampling.

Cases are the Cartesian product of five source-impedance rows with the
compensation, fault resistance, inception angle, load angle, fault type and
location lists, ranked lexicographically in that order. The rank is the case id.
"""
from __future__ import annotations

import csv
from dataclasses import asdict, dataclass
from itertools import product
from pathlib import Path

import numpy as np

from .emtsim import FAULT_TYPES
from .errors import ConfigError

IMPEDANCE_ROWS = ((100, 100), (100, 75), (100, 125), (75, 100), (125, 100))
XC_PCT = (25, 50, 75)
RF_OHM = (0, 5, 25, 50)
FIA_DEG = (0, 45, 81, 117)
DELTA_DEG = (10, 20, 30)
LOCATIONS_KM = {1: (50, 150, 250, 325), 2: (100, 250, 325)}
TCSC_POSITION_KM = {1: 125.0, 2: 187.5}

# zone reaches along the 250 / 100 / 50 km corridor
ZONE_REACH_KM = (0.8 * 250, 250 + 0.5 * 100, 350 + 0.25 * 50)

BASE_SPLIT = {"xc": {50}, "rf": {0, 5, 50}, "fia": {0, 45, 117}, "delta": {10, 30}}
AUGMENT_SPLIT = {
    1: {"xc": {25, 50}, "rf": {50}, "fia": {81, 117}, "delta": {20}},
    2: {"xc": {25, 50}, "rf": {0, 50}, "fia": {81}, "delta": {20}},
}
FIELDS = ("case_id", "scenario", "zg1_pct", "zg2_pct", "xc_pct", "rf", "fia", "delta",
          "fault_type", "location_km", "zone")


@dataclass(frozen=True)
class FaultCase:
    case_id: int
    scenario: int
    zg1_pct: int
    zg2_pct: int
    xc_pct: int
    rf: float
    fia: float
    delta: float
    fault_type: int  # 1..10, index into FAULT_TYPES
    location_km: float

    @property
    def fault_name(self) -> str:
        return FAULT_TYPES[self.fault_type - 1]

    @property
    def zone(self) -> int:
        return zone_label(self.location_km)

    @property
    def network_key(self) -> tuple:
        """Parameters that fix the network; faults sharing it simulate together."""
        return (self.scenario, self.zg1_pct, self.zg2_pct, self.xc_pct, self.delta)


def _axes(scenario):
    if scenario not in LOCATIONS_KM:
        raise ConfigError(f"scenario must be 1 or 2, got {scenario}")
    return (IMPEDANCE_ROWS, XC_PCT, RF_OHM, FIA_DEG, DELTA_DEG,
            tuple(range(1, len(FAULT_TYPES) + 1)), LOCATIONS_KM[scenario])


def matrix_size(scenario) -> int:
    return int(np.prod([len(a) for a in _axes(scenario)]))


def decode(scenario, case_id) -> FaultCase:
    axes = _axes(scenario)
    if not 0 <= case_id < matrix_size(scenario):
        raise ConfigError(f"case id {case_id} out of range for scenario {scenario}")
    idx = []
    rem = int(case_id)
    for ax in reversed(axes):
        rem, k = divmod(rem, len(ax))
        idx.append(k)
    idx.reverse()
    (zg1, zg2), xc, rf, fia, delta, ft, loc = (ax[k] for ax, k in zip(axes, idx))
    return FaultCase(int(case_id), scenario, zg1, zg2, xc, rf, fia, delta, ft, loc)


def encode(case: FaultCase) -> int:
    axes = _axes(case.scenario)
    values = ((case.zg1_pct, case.zg2_pct), case.xc_pct, case.rf, case.fia, case.delta,
              case.fault_type, case.location_km)
    cid = 0
    for ax, val in zip(axes, values):
        try:
            k = ax.index(val)
        except ValueError:
            raise ConfigError(f"value {val!r} is not on the case grid") from None
        cid = cid * len(ax) + k
    return cid


def full_matrix(scenario) -> list[FaultCase]:
    out = []
    for cid, ((zg1, zg2), xc, rf, fia, delta, ft, loc) in enumerate(product(*_axes(scenario))):
        out.append(FaultCase(cid, scenario, zg1, zg2, xc, rf, fia, delta, ft, loc))
    return out


def _select(scenario, rule) -> set[int]:
    return {
        c.case_id for c in full_matrix(scenario)
        if c.xc_pct in rule["xc"] and c.rf in rule["rf"]
        and c.fia in rule["fia"] and c.delta in rule["delta"]
    }


def base_training_ids(scenario) -> set[int]:
    return _select(scenario, BASE_SPLIT)


def augment_ids(scenario) -> set[int]:
    return _select(scenario, AUGMENT_SPLIT[scenario])


def split_ids(scenario, name) -> set[int]:
    if name == "base":
        return base_training_ids(scenario)
    if name == "augmented":
        return base_training_ids(scenario) | augment_ids(scenario)
    raise ConfigError(f"unknown split {name!r}")


def zone_label(location_km) -> int:
    """Protection zone of a fault location; reaches are inclusive."""
    if not 0 < location_km:
        raise ConfigError("location must be positive")
    for zone, reach in enumerate(ZONE_REACH_KM, start=1):
        if location_km <= reach:
            return zone
    raise ConfigError(f"location {location_km} km lies beyond zone 3")


def subsample(ids, fraction, seed, scenario) -> set[int]:
    """Seeded sample of ids keeping each zone's share (rounded per zone)."""
    if not 0 < fraction <= 1:
        raise ConfigError("fraction must lie in (0, 1]")
    ids = sorted(ids)
    if fraction == 1:
        return set(ids)
    rng = np.random.default_rng(seed)
    by_zone = {}
    for cid in ids:
        by_zone.setdefault(decode(scenario, cid).zone, []).append(cid)
    out = set()
    for zone in sorted(by_zone):
        members = np.array(by_zone[zone])
        k = int(round(fraction * len(members)))
        out.update(int(v) for v in rng.choice(members, size=k, replace=False))
    return out


def write_manifest(cases, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(FIELDS)
        for c in sorted(cases, key=lambda c: c.case_id):
            d = asdict(c)
            w.writerow([d[k] for k in FIELDS[:-1]] + [c.zone])


def write_ids(ids, path) -> None:
    Path(path).write_text("".join(f"{i}\n" for i in sorted(ids)))


def read_ids(path) -> set[int]:
    return {int(line) for line in Path(path).read_text().split() if line.strip()}
