"""Overhead line constants: tower geometry to per-km phase-domain matrices.

Series impedance uses the complex-depth earth-return image, shunt capacitance
uses Maxwell potential coefficients over a perfectly conducting earth. Ground
wires are taken as continuously grounded and Kron-reduced out of both.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, NumericalError

MU0 = 4e-7 * np.pi
EPS0 = 8.854187817e-12
# GMR of a solid round conductor relative to its radius
SOLID_GMR_RATIO = np.exp(-0.25)


@dataclass(frozen=True)
class Conductor:
    x: float
    y: float  # attachment height, m
    gmr: float
    radius: float
    r_dc: float  # ohm/km


@dataclass(frozen=True)
class GroundWire:
    x: float
    y: float
    radius: float
    r_dc: float

    @property
    def gmr(self) -> float:
        return self.radius * SOLID_GMR_RATIO


@dataclass(frozen=True)
class TowerGeometry:
    conductors: tuple[Conductor, ...]
    bundle_n: int = 1
    bundle_spacing: float = 0.0
    ground_wires: tuple[GroundWire, ...] = ()
    sag: float = 0.0
    ground_wire_sag: float | None = None
    earth_resistivity: float = 100.0

    def __post_init__(self):
        if len(self.conductors) != 3:
            raise ConfigError("exactly three phase conductors are required")
        if self.bundle_n < 1:
            raise ConfigError("bundle count must be >= 1")
        if self.bundle_n > 1 and self.bundle_spacing <= 0:
            raise ConfigError("bundle spacing must be positive for bundled phases")
        for c in self.conductors:
            if c.y <= 0:
                raise ConfigError("conductor heights must be positive")
            if not 0 < c.gmr <= c.radius:
                raise ConfigError("conductor GMR must satisfy 0 < gmr <= radius")
        for w in self.ground_wires:
            if w.y <= 0 or w.radius <= 0:
                raise ConfigError("ground wire height and radius must be positive")
        if self.earth_resistivity < 0:
            raise ConfigError("earth resistivity must be non-negative")

    @property
    def n_wires(self) -> int:
        return 3 + len(self.ground_wires)

    def wires(self):
        """Equivalent wires as (x, y_effective, gmr, radius, r_dc), phases first."""
        gw_sag = self.sag if self.ground_wire_sag is None else self.ground_wire_sag
        out = []
        for c in self.conductors:
            gmr, radius = bundle_reduce(c.gmr, c.radius, self.bundle_spacing, self.bundle_n)
            out.append((c.x, effective_height(c.y, self.sag), gmr, radius, c.r_dc / self.bundle_n))
        for w in self.ground_wires:
            out.append((w.x, effective_height(w.y, gw_sag), w.gmr, w.radius, w.r_dc))
        return out


@dataclass
class LineParameters:
    z_series: np.ndarray  # 3x3 complex, ohm/km
    c_shunt: np.ndarray  # 3x3 real, F/km
    z1: complex
    z0: complex
    frequency: float

    @property
    def r_matrix(self) -> np.ndarray:
        return self.z_series.real.copy()

    @property
    def l_matrix(self) -> np.ndarray:
        """Series inductance, H/km."""
        return self.z_series.imag / (2 * np.pi * self.frequency)

    def to_dict(self) -> dict:
        def cplx(z):
            return {"re": float(np.real(z)), "im": float(np.imag(z))}

        return {
            "frequency_hz": self.frequency,
            "units": {"z_series": "ohm/km", "c_shunt": "F/km", "z1": "ohm/km", "z0": "ohm/km"},
            "z_series": [[cplx(v) for v in row] for row in self.z_series],
            "c_shunt": [[float(v) for v in row] for row in self.c_shunt],
            "z1": cplx(self.z1),
            "z0": cplx(self.z0),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "LineParameters":
        try:
            z = np.array([[v["re"] + 1j * v["im"] for v in row] for row in doc["z_series"]])
            c = np.array(doc["c_shunt"], dtype=float)
            return cls(
                z_series=z,
                c_shunt=c,
                z1=doc["z1"]["re"] + 1j * doc["z1"]["im"],
                z0=doc["z0"]["re"] + 1j * doc["z0"]["im"],
                frequency=float(doc["frequency_hz"]),
            )
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"malformed line parameter document: {exc}") from exc


def effective_height(attachment_height, sag):
    """Average height over a span: attachment height minus two thirds of the sag."""
    h = attachment_height - 2.0 * sag / 3.0
    if h <= 0:
        raise ConfigError(f"non-positive effective height {h:.4g} m")
    return h


def bundle_reduce(gmr, radius, spacing, n):
    """Equivalent (gmr, radius) of a symmetric bundle of n subconductors."""
    if n == 1:
        return gmr, radius
    if n == 2:
        return np.sqrt(gmr * spacing), np.sqrt(radius * spacing)
    if n == 3:
        return np.cbrt(gmr * spacing**2), np.cbrt(radius * spacing**2)
    if n == 4:
        k = np.sqrt(2.0) * spacing**3
        return (gmr * k) ** 0.25, (radius * k) ** 0.25
    raise ConfigError(f"unsupported bundle count {n}")


def complex_depth(resistivity, f):
    """Complex penetration depth p = sqrt(rho / (j w mu0)), m."""
    return np.sqrt(resistivity / (1j * 2 * np.pi * f * MU0))


def series_impedance_matrix(geometry: TowerGeometry, f: float) -> np.ndarray:
    """Primitive series impedance matrix (phases then ground wires), ohm/km."""
    if f <= 0:
        raise ConfigError("frequency must be positive")
    wires = geometry.wires()
    n = len(wires)
    w = 2 * np.pi * f
    p = complex_depth(geometry.earth_resistivity, f)
    k = 1j * w * MU0 / (2 * np.pi) * 1e3  # per km
    z = np.zeros((n, n), dtype=complex)
    for i, (xi, yi, gi, _, ri) in enumerate(wires):
        z[i, i] = ri + k * np.log(2 * (yi + p) / gi)
        for j in range(i):
            xj, yj = wires[j][0], wires[j][1]
            d = np.hypot(xi - xj, yi - yj)
            if d == 0:
                raise ConfigError(f"wires {i} and {j} are coincident")
            d_img = np.sqrt((xi - xj) ** 2 + (yi + yj + 2 * p) ** 2)
            z[i, j] = z[j, i] = k * np.log(d_img / d)
    return z


def potential_coefficients(geometry: TowerGeometry) -> np.ndarray:
    """Maxwell potential coefficient matrix, m/F."""
    wires = geometry.wires()
    n = len(wires)
    pm = np.zeros((n, n))
    for i, (xi, yi, _, ri, _) in enumerate(wires):
        pm[i, i] = np.log(2 * yi / ri)
        for j in range(i):
            xj, yj = wires[j][0], wires[j][1]
            d = np.hypot(xi - xj, yi - yj)
            if d == 0:
                raise ConfigError(f"wires {i} and {j} are coincident")
            pm[i, j] = pm[j, i] = np.log(np.hypot(xi - xj, yi + yj) / d)
    return pm / (2 * np.pi * EPS0)


def shunt_capacitance_matrix(geometry: TowerGeometry) -> np.ndarray:
    """Capacitance matrix P^-1 over all wires, F/km."""
    pm = potential_coefficients(geometry)
    if np.linalg.cond(pm) > 1e12:
        raise NumericalError("potential coefficient matrix is singular")
    c = np.linalg.inv(pm) * 1e3
    return 0.5 * (c + c.T)


def kron_reduce(m, eliminate):
    """Eliminate the given indices (zero-voltage conductors) from m."""
    m = np.asarray(m)
    elim = sorted(set(int(i) for i in eliminate))
    if not elim:
        return m.copy()
    keep = [i for i in range(m.shape[0]) if i not in elim]
    maa = m[np.ix_(keep, keep)]
    mab = m[np.ix_(keep, elim)]
    mba = m[np.ix_(elim, keep)]
    mbb = m[np.ix_(elim, elim)]
    if np.linalg.cond(mbb) > 1e14:
        raise NumericalError("eliminated sub-block is singular")
    return maa - mab @ np.linalg.solve(mbb, mba)


def sequence_components(z):
    """(z1, z0) of a 3x3 matrix assuming full transposition."""
    z = np.asarray(z)
    zs = np.trace(z) / 3
    zm = (z.sum() - np.trace(z)) / 6
    return zs - zm, zs + 2 * zm


def balanced_matrix(z1, z0):
    """Transposed-line 3x3 matrix with the given sequence impedances."""
    zs = (z0 + 2 * z1) / 3
    zm = (z0 - z1) / 3
    return zm * np.ones((3, 3)) + (zs - zm) * np.eye(3)


def line_parameters(geometry: TowerGeometry, f: float = 50.0) -> LineParameters:
    ground = range(3, geometry.n_wires)
    z = kron_reduce(series_impedance_matrix(geometry, f), ground)
    # grounded wires: phase charges see the phase block of P^-1
    c = shunt_capacitance_matrix(geometry)[:3, :3]
    z = 0.5 * (z + z.T)
    z1, z0 = sequence_components(z)
    return LineParameters(z_series=z, c_shunt=c, z1=z1, z0=z0, frequency=f)


# Geometry documents -------------------------------------------------------

TABLE_FIELDS = {
    "arrangement": "horizontal",
    "phase_spacing_m": 15.45,
    "conductor_height_m": 41.46,
    "sag_m": 14.0,
    "bundle_count": 2,
    "bundle_spacing_m": 0.45,
    "conductor_dc_resistance_ohm_per_km": 0.0553,
    "conductor_gmr_m": 0.012161,
    "conductor_radius_m": None,
    "ground_wire_count": 2,
    "ground_wire_height_above_lowest_conductor_m": 9.36,
    "ground_wire_dc_resistance_ohm_per_km": 1.463,
    "ground_wire_radius_m": 0.002445,
    "ground_wire_spacing_m": 18.70,
    "ground_wire_sag_m": None,
    "earth_resistivity_ohm_m": 100.0,
}


def geometry_from_table(doc: dict | None = None) -> TowerGeometry:
    """Build a TowerGeometry from a tabulated tower description.

    Missing keys fall back to the 400 kV twin-bundle tower in TABLE_FIELDS.
    "phase_spacing_m" is the centre-to-centre distance of adjacent phases; a
    missing conductor radius is derived from the GMR of a solid conductor.
    """
    d = dict(TABLE_FIELDS)
    if doc:
        unknown = set(doc) - set(d) - {"line_length_km", "comment"}
        if unknown:
            raise ConfigError(f"unknown geometry fields: {sorted(unknown)}")
        d.update(doc)
    try:
        s = float(d["phase_spacing_m"])
        h = float(d["conductor_height_m"])
        gmr = float(d["conductor_gmr_m"])
        radius = d["conductor_radius_m"]
        radius = gmr / SOLID_GMR_RATIO if radius is None else float(radius)
        r_dc = float(d["conductor_dc_resistance_ohm_per_km"])
        if d["arrangement"] == "horizontal":
            pos = [(-s, h), (0.0, h), (s, h)]
        elif d["arrangement"] == "vertical":
            pos = [(0.0, h + 2 * s), (0.0, h + s), (0.0, h)]
        else:
            raise ConfigError(f"unknown arrangement {d['arrangement']!r}")
        lowest = min(y for _, y in pos)
        ng = int(d["ground_wire_count"])
        gw_y = lowest + float(d["ground_wire_height_above_lowest_conductor_m"])
        half = float(d["ground_wire_spacing_m"]) / 2
        gw_x = {0: [], 1: [0.0], 2: [-half, half]}.get(ng)
        if gw_x is None:
            raise ConfigError("ground_wire_count must be 0, 1 or 2")
        wires = tuple(
            GroundWire(x, gw_y, float(d["ground_wire_radius_m"]),
                       float(d["ground_wire_dc_resistance_ohm_per_km"]))
            for x in gw_x
        )
        return TowerGeometry(
            conductors=tuple(Conductor(x, y, gmr, radius, r_dc) for x, y in pos),
            bundle_n=int(d["bundle_count"]),
            bundle_spacing=float(d["bundle_spacing_m"]),
            ground_wires=wires,
            sag=float(d["sag_m"]),
            ground_wire_sag=None if d["ground_wire_sag_m"] is None else float(d["ground_wire_sag_m"]),
            earth_resistivity=float(d["earth_resistivity_ohm_m"]),
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"bad geometry value: {exc}") from exc


def load_geometry(path) -> TowerGeometry:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return geometry_from_table(doc)


def save_line_parameters(params: LineParameters, path) -> None:
    Path(path).write_text(json.dumps(params.to_dict(), indent=2) + "\n")


def load_line_parameters(path) -> LineParameters:
    return LineParameters.from_dict(json.loads(Path(path).read_text()))


def line_reactance(geometry: TowerGeometry, length_km: float, f: float) -> float:
    """Positive-sequence series reactance of a line section, ohm."""
    return float(line_parameters(geometry, f).z1.imag * length_km)
