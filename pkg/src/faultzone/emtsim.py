"""Electromagnetic transient simulation of the two-source 400 kV corridor.

The corridor is three line segments in cascade, each discretised into coupled
three-phase pi-sections, with an optional series capacitor (the TCSC at a fixed
compensation level) inside the first segment. Every inductive or capacitive
branch is replaced by its trapezoidal companion model

    j[n+1] = G u[n+1] + h[n+1],    h[n+1] = P u[n] + Q j[n]

so one time step is a sparse back-substitution with a nodal matrix factorised
once per network. Faults are shunt resistor networks switched in at inception;
they are applied by compensation against the no-fault factorisation, which lets
many fault cases of one network advance together as columns of one solve.
"""
from __future__ import annotations

import hashlib
import json
import math
import struct
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy import signal

from .errors import ConfigError, DataError, NumericalError
from .lineparam import LineParameters, balanced_matrix

FAULT_TYPES = ("AG", "BG", "CG", "AB", "BC", "CA", "ABG", "BCG", "CAG", "ABC")
RF_FLOOR = 1e-4  # ohm, stands in for bolted faults
PHASE_SHIFT = np.array([0.0, -2 * np.pi / 3, 2 * np.pi / 3])


@dataclass(frozen=True)
class SourceSpec:
    v_ll: float = 400e3
    freq: float = 50.0
    z1: complex = 1.31 + 15j
    z0: complex = 2.33 + 26.6j
    impedance_scale: float = 100.0  # percent
    angle: float = 0.0  # deg

    def __post_init__(self):
        if self.impedance_scale <= 0:
            raise ConfigError("impedance_scale must be positive")

    def impedance_matrix(self) -> np.ndarray:
        k = self.impedance_scale / 100.0
        return balanced_matrix(k * self.z1, k * self.z0)

    def phasors(self) -> np.ndarray:
        """Peak phase-voltage phasors, v(t) = Re(V exp(jwt)) = Vm sin(wt + angle)."""
        vm = self.v_ll * math.sqrt(2.0 / 3.0)
        theta = math.radians(self.angle) - math.pi / 2
        return vm * np.exp(1j * (theta + PHASE_SHIFT))


@dataclass(frozen=True)
class TcscSpec:
    position_km: float
    compensation_pct: float
    reference_reactance: float  # ohm, line reactance the percentage refers to

    def __post_init__(self):
        if not 0 < self.compensation_pct < 100:
            raise ConfigError("compensation_pct must lie in (0, 100)")
        if self.reference_reactance <= 0:
            raise ConfigError("reference_reactance must be positive")


@dataclass(frozen=True)
class NetworkConfig:
    line: LineParameters
    source1: SourceSpec = SourceSpec()
    source2: SourceSpec | None = SourceSpec()  # None leaves the far bus open
    delta: float = 20.0  # deg, source 1 leads source 2
    segments_km: tuple = (250.0, 100.0, 50.0)
    tcsc: TcscSpec | None = None
    max_section_km: float = 5.0
    breakpoints_km: tuple = (50.0, 100.0, 150.0, 250.0, 325.0)

    def __post_init__(self):
        if self.max_section_km <= 0:
            raise ConfigError("max_section_km must be positive")
        if self.tcsc is not None and not 0 < self.tcsc.position_km < self.segments_km[0]:
            raise ConfigError("TCSC must sit strictly inside the first segment")

    @property
    def frequency(self) -> float:
        return self.source1.freq

    @property
    def total_km(self) -> float:
        return float(sum(self.segments_km))

    def sources(self):
        """(source1, source2) with the load angle applied to source 1."""
        s1 = replace(self.source1, angle=self.source1.angle + self.delta)
        return s1, self.source2

    def to_dict(self) -> dict:
        d = {
            "source1": _source_dict(self.source1),
            "source2": None if self.source2 is None else _source_dict(self.source2),
            "delta": self.delta,
            "segments_km": list(self.segments_km),
            "tcsc": None if self.tcsc is None else asdict(self.tcsc),
            "max_section_km": self.max_section_km,
            "breakpoints_km": list(self.breakpoints_km),
            "line": self.line.to_dict(),
        }
        return d

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def _source_dict(s: SourceSpec) -> dict:
    d = asdict(s)
    for k in ("z1", "z0"):
        d[k] = {"re": s.__dict__[k].real, "im": s.__dict__[k].imag}
    return d


@dataclass(frozen=True)
class FaultSpec:
    fault_type: str
    location_km: float
    rf: float = 0.0
    fia: float = 0.0

    def __post_init__(self):
        if self.fault_type not in FAULT_TYPES:
            raise ConfigError(f"unknown fault type {self.fault_type!r}")
        if self.rf < 0:
            raise ConfigError("fault resistance must be non-negative")


@dataclass(frozen=True)
class SimParams:
    dt_internal: float = 25e-6
    record_rate: float = 4000.0
    settle_time: float = 0.2
    post_fault_time: float = 0.04
    pre_fault_time: float = 0.02

    @property
    def decimation(self) -> int:
        ratio = 1.0 / (self.dt_internal * self.record_rate)
        n = int(round(ratio))
        if n < 1 or abs(ratio - n) > 1e-9:
            raise ConfigError("record_rate must divide the internal step rate")
        return n

    @property
    def pre_steps(self) -> int:
        return self.decimation * int(round(self.pre_fault_time * self.record_rate))

    @property
    def post_steps(self) -> int:
        return self.decimation * int(round(self.post_fault_time * self.record_rate))


@dataclass
class WaveformRecord:
    ia: np.ndarray
    ib: np.ndarray
    ic: np.ndarray
    inception_index: int
    t0: float = 0.0
    rate: float = 4000.0
    case_id: int | None = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        n = len(self.ia)
        if len(self.ib) != n or len(self.ic) != n:
            raise DataError("phase arrays differ in length")
        if not (np.all(np.isfinite(self.ia)) and np.all(np.isfinite(self.ib))
                and np.all(np.isfinite(self.ic))):
            raise NumericalError(f"non-finite samples in record {self.case_id}")

    @property
    def currents(self) -> np.ndarray:
        return np.vstack([self.ia, self.ib, self.ic])

    @property
    def t(self) -> np.ndarray:
        return self.t0 + np.arange(len(self.ia)) / self.rate


# TCSC sizing ----------------------------------------------------------------

def tcsc_capacitance(compensation_pct, x_line_total, f=50.0):
    """Series capacitance whose reactance is compensation_pct of x_line_total."""
    if not 0 < compensation_pct < 100:
        raise ConfigError("compensation percentage must lie in (0, 100)")
    return 1.0 / (2 * np.pi * f * (compensation_pct / 100.0) * x_line_total)


# Fault networks -------------------------------------------------------------

def fault_conductance(fault_type: str, rf: float) -> np.ndarray:
    """3x3 nodal conductance of the fault network at the faulted bus."""
    g = 1.0 / max(rf, RF_FLOOR)
    idx = {"A": 0, "B": 1, "C": 2}
    gm = np.zeros((3, 3))
    if fault_type == "ABC":
        # ungrounded star of three equal branches
        return g * (np.eye(3) - np.ones((3, 3)) / 3.0)
    phases = [idx[c] for c in fault_type.rstrip("G")]
    if fault_type.endswith("G"):
        for p in phases:
            gm[p, p] += g
    else:
        a, b = phases
        gm[a, a] += g
        gm[b, b] += g
        gm[a, b] -= g
        gm[b, a] -= g
    return gm


# Topology -------------------------------------------------------------------

@dataclass
class Mesh:
    positions: list  # km of each bus along the corridor
    sections: list  # (bus_from, bus_to, length_km)
    tcsc_buses: tuple | None  # (left, right)

    @property
    def n_buses(self) -> int:
        return len(self.positions)

    def snap(self, location_km: float) -> int:
        pos = np.asarray(self.positions)
        i = int(np.argmin(np.abs(pos - location_km)))
        longest = max(s[2] for s in self.sections)
        if abs(pos[i] - location_km) > longest / 2 + 1e-9:
            raise ConfigError(f"location {location_km} km is off the line")
        return i


def build_mesh(cfg: NetworkConfig) -> Mesh:
    total = cfg.total_km
    cuts = {0.0, total}
    acc = 0.0
    for seg in cfg.segments_km:
        acc += seg
        cuts.add(acc)
    cuts.update(b for b in cfg.breakpoints_km if 0 < b < total)
    tcsc_pos = None if cfg.tcsc is None else float(cfg.tcsc.position_km)
    if tcsc_pos is not None:
        cuts.add(tcsc_pos)
    cuts = sorted(cuts)

    positions = [0.0]
    sections = []
    tcsc_buses = None
    for a, b in zip(cuts[:-1], cuts[1:]):
        if tcsc_pos is not None and a == tcsc_pos:
            positions.append(a)
            tcsc_buses = (len(positions) - 2, len(positions) - 1)
        n = max(1, math.ceil((b - a) / cfg.max_section_km - 1e-9))
        step = (b - a) / n
        for k in range(n):
            positions.append(a + (k + 1) * step if k < n - 1 else b)
            sections.append((len(positions) - 2, len(positions) - 1, step))
    return Mesh(positions, sections, tcsc_buses)


# Discrete engine ------------------------------------------------------------

@dataclass
class _Block:
    """A coupled three-port branch with its trapezoidal companion matrices."""
    from_nodes: tuple  # node index or -1 (ground / external source)
    to_nodes: tuple
    g: np.ndarray
    p: np.ndarray
    q: np.ndarray
    source: int | None = None  # index of the external source on the 'from' side


def _rl_block(frm, to, r, ell, dt, source=None):
    g = np.linalg.inv(r + 2.0 * ell / dt)
    return _Block(frm, to, g, g.copy(), g @ (2.0 * ell / dt - r), source)


def _c_block(frm, to, c, dt):
    g = 2.0 * c / dt
    return _Block(frm, to, g, -g, -np.eye(len(frm)))


class SimEngine:
    """Factorised companion network of one NetworkConfig at one time step.

    Not thread-safe: run_cases keeps its working arrays local, but engines are
    cheap enough that each worker should build its own.
    """

    def __init__(self, cfg: NetworkConfig, dt: float = 25e-6):
        self.cfg = cfg
        self.dt = dt
        self.omega = 2 * np.pi * cfg.frequency
        self.mesh = build_mesh(cfg)
        self.n_nodes = 3 * self.mesh.n_buses
        self.blocks = self._assemble_blocks()
        self._assemble_matrices()
        self._steady = None
        self._thevenin = {}

    # assembly
    def _nodes(self, bus):
        return tuple(3 * bus + k for k in range(3))

    def _assemble_blocks(self):
        cfg, dt, mesh = self.cfg, self.dt, self.mesh
        r_km = cfg.line.r_matrix
        l_km = cfg.line.l_matrix
        c_km = cfg.line.c_shunt
        w = self.omega
        ext = (-1, -1, -1)
        s1, s2 = cfg.sources()
        blocks = []
        zs = s1.impedance_matrix()
        blocks.append(_rl_block(ext, self._nodes(0), zs.real, zs.imag / w, dt, source=0))
        if s2 is not None:
            zs = s2.impedance_matrix()
            last = mesh.n_buses - 1
            blocks.append(_rl_block(ext, self._nodes(last), zs.real, zs.imag / w, dt, source=1))
        shunt = np.zeros((mesh.n_buses, 3, 3))
        for a, b, length in mesh.sections:
            blocks.append(_rl_block(self._nodes(a), self._nodes(b), r_km * length, l_km * length, dt))
            shunt[a] += c_km * length / 2
            shunt[b] += c_km * length / 2
        for bus in range(mesh.n_buses):
            if np.any(shunt[bus]):
                blocks.append(_c_block(self._nodes(bus), ext, shunt[bus], dt))
        if mesh.tcsc_buses is not None:
            c = tcsc_capacitance(cfg.tcsc.compensation_pct, cfg.tcsc.reference_reactance, cfg.frequency)
            left, right = mesh.tcsc_buses
            blocks.append(_c_block(self._nodes(left), self._nodes(right), c * np.eye(3), dt))
        return blocks

    def _assemble_matrices(self):
        n_ports = 3 * len(self.blocks)
        rows, cols, vals = [], [], []
        s_rows, s_cols = [], []
        g_blocks, p_blocks, q_blocks = [], [], []
        for b, blk in enumerate(self.blocks):
            for k in range(3):
                port = 3 * b + k
                if blk.from_nodes[k] >= 0:
                    rows.append(blk.from_nodes[k]); cols.append(port); vals.append(1.0)
                if blk.to_nodes[k] >= 0:
                    rows.append(blk.to_nodes[k]); cols.append(port); vals.append(-1.0)
                if blk.source is not None:
                    s_rows.append(port); s_cols.append(3 * blk.source + k)
            g_blocks.append(blk.g)
            p_blocks.append(blk.p)
            q_blocks.append(blk.q)
        self.n_ports = n_ports
        self.A = sp.csr_matrix((vals, (rows, cols)), shape=(self.n_nodes, n_ports))
        self.AT = self.A.T.tocsr()
        self.S = sp.csr_matrix((np.ones(len(s_rows)), (s_rows, s_cols)), shape=(n_ports, 6))
        self.G = sp.block_diag(g_blocks, format="csr")
        self.P = sp.block_diag(p_blocks, format="csr")
        self.Q = sp.block_diag(q_blocks, format="csr")
        self.Y = (self.A @ self.G @ self.AT).tocsc()
        self.W = -(self.A @ self.G @ self.S).toarray()  # source injection, n_nodes x 6
        try:
            self.lu = spla.splu(self.Y)
        except RuntimeError as exc:
            raise NumericalError(f"singular nodal matrix: {exc}") from exc
        self.relay_ports = np.arange(3)

    # helpers
    def source_phasors(self) -> np.ndarray:
        s1, s2 = self.cfg.sources()
        v = np.zeros(6, dtype=complex)
        v[:3] = s1.phasors()
        if s2 is not None:
            v[3:] = s2.phasors()
        return v

    def steady_state(self):
        """Exact periodic solution of the discrete recurrence at t = 0.

        Returns complex port-voltage and port-current phasors (U, J); for a
        sinusoid sampled at z = exp(jw dt) the companion recurrence maps U to
        J = (zI - Q)^-1 (G z + P) U block by block.
        """
        if self._steady is None:
            z = np.exp(1j * self.omega * self.dt)
            yp = []
            for blk in self.blocks:
                yp.append(np.linalg.solve(z * np.eye(3) - blk.q, blk.g * z + blk.p))
            yp = sp.block_diag(yp, format="csr")
            yn = (self.A @ yp @ self.AT).tocsc()
            vs = self.source_phasors()
            rhs = -(self.A @ (yp @ (self.S @ vs)))
            v = spla.spsolve(yn, rhs)
            u = self.AT @ v + self.S @ vs
            j = yp @ u
            self._steady = (u, j, v)
        return self._steady

    def thevenin(self, bus: int):
        """(Y^-1 columns at the bus nodes, 3x3 Thevenin block) of the no-fault network."""
        if bus not in self._thevenin:
            e = np.zeros((self.n_nodes, 3))
            nodes = list(self._nodes(bus))
            e[nodes, [0, 1, 2]] = 1.0
            zc = self.lu.solve(e)
            self._thevenin[bus] = (zc, zc[nodes, :])
        return self._thevenin[bus]

    def inception_time(self, fia: float, settle: float) -> float:
        return schedule_fault(self, fia, settle)

    def run_cases(self, faults, sim: SimParams, apply_fault=True, case_ids=None):
        """Simulate several faults on this network together; one record per fault.

        Each column advances on its own time axis, aligned on its own
        inception step, so pre-fault stepping is shared structure only.
        """
        faults = list(faults)
        if not faults:
            return []
        if sim.dt_internal != self.dt:
            raise ConfigError("engine time step differs from SimParams.dt_internal")
        if np.isscalar(apply_fault) or isinstance(apply_fault, bool):
            apply_fault = [bool(apply_fault)] * len(faults)
        nb = len(faults)
        dec = sim.decimation
        pre, post = sim.pre_steps, sim.post_steps
        n_steps = pre + post
        t_fault = np.array([schedule_fault(self, f.fia, sim.settle_time) for f in faults])
        t0 = t_fault - pre * self.dt

        # fault compensation groups: bus -> (columns, per-column 3x3 operator)
        groups = {}
        for c, (f, on) in enumerate(zip(faults, apply_fault)):
            if not on:
                continue
            bus = self.mesh.snap(f.location_km)
            zc, zkk = self.thevenin(bus)
            gf = fault_conductance(f.fault_type, f.rf)
            m = np.linalg.solve(np.eye(3) + gf @ zkk, gf)
            groups.setdefault(bus, ([], []))
            groups[bus][0].append(c)
            groups[bus][1].append(m)
        groups = {
            bus: (np.array(cols), np.array(ms), self.thevenin(bus)[0], list(self._nodes(bus)))
            for bus, (cols, ms) in sorted(groups.items())
        }

        u_ss, j_ss, _ = self.steady_state()
        rot = np.exp(1j * self.omega * t0)  # (nb,)
        u = np.real(np.outer(u_ss, rot))
        j = np.real(np.outer(j_ss, rot))
        vs_rot = np.outer(self.source_phasors(), rot)  # (6, nb)

        relay = np.empty((n_steps + 1, 3, nb))
        relay[0] = j[self.relay_ports]
        A, AT, G, P, Q, S, W = self.A, self.AT, self.G, self.P, self.Q, self.S, self.W
        for k in range(1, n_steps + 1):
            ph = np.exp(1j * self.omega * k * self.dt)
            vs = np.real(vs_rot * ph)
            h = P @ u + Q @ j
            rhs = W @ vs - A @ h
            v = self.lu.solve(rhs)
            if k >= pre:
                for cols, ms, zc, nodes in groups.values():
                    vf = v[np.ix_(nodes, cols)]
                    i_f = np.einsum("cab,bc->ac", ms, vf)
                    v[:, cols] -= zc @ i_f
            u = AT @ v + S @ vs
            j = G @ u + h
            relay[k] = j[self.relay_ports]
        if not np.all(np.isfinite(relay)):
            bad = [case_ids[c] if case_ids else c for c in range(nb)
                   if not np.all(np.isfinite(relay[:, :, c]))]
            raise NumericalError(f"non-finite state in cases {bad}")

        # warm the anti-alias filter on the analytic pre-start steady state
        n_warm = int(round(4 / self.cfg.frequency / self.dt))
        kk = np.arange(-n_warm, 0)
        warm = np.real(
            j_ss[self.relay_ports][None, :, None]
            * rot[None, None, :]
            * np.exp(1j * self.omega * kk * self.dt)[:, None, None]
        )
        full = np.concatenate([warm, relay[:-1]], axis=0)
        sos = anti_alias_filter(sim)
        filt = signal.sosfilt(sos, full, axis=0)[n_warm:]
        rec = filt[::dec]  # (n_rec, 3, nb)
        inception = pre // dec
        out = []
        for c, f in enumerate(faults):
            meta = {
                "fault": asdict(f),
                "fault_applied": apply_fault[c],
                "t_fault": float(t_fault[c]),
                "network_digest": self.cfg.digest(),
                "dt_internal": self.dt,
            }
            out.append(WaveformRecord(
                ia=rec[:, 0, c].copy(), ib=rec[:, 1, c].copy(), ic=rec[:, 2, c].copy(),
                inception_index=inception, t0=float(t0[c]), rate=sim.record_rate,
                case_id=None if case_ids is None else int(case_ids[c]), metadata=meta,
            ))
        return out


def anti_alias_filter(sim: SimParams):
    """4th-order Butterworth low-pass just under the recording Nyquist rate."""
    fs = 1.0 / sim.dt_internal
    cutoff = 0.4875 * sim.record_rate  # 1.95 kHz at 4 kHz
    return signal.butter(4, cutoff, fs=fs, output="sos")


def build_network(cfg: NetworkConfig, dt: float = 25e-6) -> SimEngine:
    return SimEngine(cfg, dt)


def schedule_fault(engine: SimEngine, fia: float, settle: float) -> float:
    """First internal time step >= settle where source-1 phase A sits at angle fia.

    Angle zero is the positive-going zero crossing of the phase-A voltage.
    """
    period = 1.0 / engine.cfg.frequency
    s1, _ = engine.cfg.sources()
    phase0 = s1.angle % 360.0
    t = ((fia - phase0) % 360.0) / 360.0 * period
    t += math.ceil((settle - t) / period - 1e-12) * period
    n = math.ceil(t / engine.dt - 1e-6)
    return n * engine.dt


def run_case(engine: SimEngine, fault: FaultSpec, sim: SimParams, apply_fault=True,
             case_id=None) -> WaveformRecord:
    ids = None if case_id is None else [case_id]
    return engine.run_cases([fault], sim, apply_fault=apply_fault, case_ids=ids)[0]


def series_rlc_step(r, ell, c, v, dt, n_steps):
    """Current of a series RLC switched onto a dc voltage v at rest.

    Stepped with the same trapezoidal companion models as the network engine;
    returns samples at t = 0, dt, ..., n_steps * dt.
    """
    rl = _rl_block((-1,), (0,), np.array([[r]]), np.array([[ell]]), dt, source=0)
    cap = _c_block((0,), (-1,), np.array([[c]]), dt)
    g_rl, p_rl, q_rl = rl.g[0, 0], rl.p[0, 0], rl.q[0, 0]
    g_c, p_c, q_c = cap.g[0, 0], cap.p[0, 0], cap.q[0, 0]
    # at t = 0+ the inductor holds the full source voltage
    u_rl, j_rl, u_c, j_c = float(v), 0.0, 0.0, 0.0
    out = np.zeros(n_steps + 1)
    for k in range(1, n_steps + 1):
        h_rl = p_rl * u_rl + q_rl * j_rl
        h_c = p_c * u_c + q_c * j_c
        # KCL at the middle node: g_rl (v - v0) + h_rl = g_c v0 + h_c
        v0 = (g_rl * v + h_rl - h_c) / (g_rl + g_c)
        u_rl, u_c = v - v0, v0
        j_rl = g_rl * u_rl + h_rl
        j_c = g_c * u_c + h_c
        out[k] = j_rl
    return out


def fundamental_phasor(x, rate, f0=50.0, sim: SimParams | None = None):
    """One-cycle DFT phasor of the last full cycle in x (peak, Re(X exp(jwt)) at x[0]).

    With sim given, the phase and gain of the anti-alias filter at f0 are
    divided out.
    """
    x = np.asarray(x, dtype=float)
    n = int(round(rate / f0))
    if len(x) < n:
        raise DataError("need at least one full cycle")
    seg = x[-n:]
    k = np.arange(len(x) - n, len(x))
    ph = 2.0 / n * np.sum(seg * np.exp(-2j * np.pi * f0 * k / rate))
    if sim is not None:
        _, h = signal.sosfreqz(anti_alias_filter(sim), worN=[f0], fs=1.0 / sim.dt_internal)
        ph = ph / h[0]
    return ph


# Frequency-domain oracle ------------------------------------------------------

def phasor_solve(cfg: NetworkConfig, fault: FaultSpec | None = None, f: float | None = None):
    """Relay current phasors of the same lumped network solved directly at f.

    Peak phasors with i(t) = Re(I exp(jwt)), current flowing from source 1 into
    the line. Independent of the time-domain companion machinery.
    """
    f = cfg.frequency if f is None else f
    w = 2 * np.pi * f
    mesh = build_mesh(cfg)
    n = 3 * mesh.n_buses
    y = np.zeros((n, n), dtype=complex)
    inj = np.zeros(n, dtype=complex)
    z_km = cfg.line.r_matrix + 1j * w * cfg.line.l_matrix
    yc_km = 1j * w * cfg.line.c_shunt

    def add(bus_a, bus_b, ym):
        ia = slice(3 * bus_a, 3 * bus_a + 3)
        y[ia, ia] += ym
        if bus_b is not None:
            ib = slice(3 * bus_b, 3 * bus_b + 3)
            y[ib, ib] += ym
            y[ia, ib] -= ym
            y[ib, ia] -= ym

    for a, b, length in mesh.sections:
        add(a, b, np.linalg.inv(z_km * length))
        add(a, None, yc_km * length / 2)
        add(b, None, yc_km * length / 2)
    if mesh.tcsc_buses is not None:
        c = tcsc_capacitance(cfg.tcsc.compensation_pct, cfg.tcsc.reference_reactance, cfg.frequency)
        add(*mesh.tcsc_buses, 1j * w * c * np.eye(3))

    s1, s2 = cfg.sources()

    def source_admittance(s):
        zm = s.impedance_matrix()
        return np.linalg.inv(zm.real + 1j * w * zm.imag / (2 * np.pi * s.freq))

    ys1 = source_admittance(s1)
    add(0, None, ys1)
    inj[0:3] += ys1 @ s1.phasors()
    if s2 is not None:
        ys2 = source_admittance(s2)
        last = mesh.n_buses - 1
        add(last, None, ys2)
        inj[3 * last:3 * last + 3] += ys2 @ s2.phasors()
    if fault is not None:
        add(mesh.snap(fault.location_km), None, fault_conductance(fault.fault_type, fault.rf))
    try:
        v = np.linalg.solve(y, inj)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"singular phasor system: {exc}") from exc
    return ys1 @ (s1.phasors() - v[0:3])


# Persistence ------------------------------------------------------------------

def record_filename(case_id: int, binary=False) -> str:
    return f"{case_id:06d}" + (".bin" if binary else ".csv")


def _header(rec: WaveformRecord) -> dict:
    return {
        "case_id": rec.case_id,
        "inception_index": rec.inception_index,
        "rate": rec.rate,
        "t0": rec.t0,
        "n_samples": len(rec.ia),
        "metadata": rec.metadata,
    }


def write_record(rec: WaveformRecord, out_dir, binary=False) -> Path:
    out_dir = Path(out_dir)
    path = out_dir / record_filename(rec.case_id if rec.case_id is not None else 0, binary)
    head = json.dumps(_header(rec), sort_keys=True)
    data = np.column_stack([rec.t, rec.ia, rec.ib, rec.ic])
    if binary:
        with open(path, "wb") as fh:
            fh.write(head.encode() + b"\n")
            fh.write(data.astype("<f8").tobytes())
    else:
        lines = ["# " + head, "t,ia,ib,ic"]
        lines += [",".join(repr(float(v)) for v in row) for row in data]
        path.write_text("\n".join(lines) + "\n")
    return path


def read_record(path) -> WaveformRecord:
    path = Path(path)
    try:
        if path.suffix == ".bin":
            raw = path.read_bytes()
            cut = raw.index(b"\n")
            head = json.loads(raw[:cut])
            data = np.frombuffer(raw[cut + 1:], dtype="<f8").reshape(-1, 4)
        else:
            with open(path) as fh:
                first = fh.readline()
                if not first.startswith("# "):
                    raise DataError(f"{path}: missing header line")
                head = json.loads(first[2:])
                if fh.readline().strip() != "t,ia,ib,ic":
                    raise DataError(f"{path}: unexpected column header")
                data = np.loadtxt(fh, delimiter=",", ndmin=2)
    except (ValueError, json.JSONDecodeError, struct.error) as exc:
        if isinstance(exc, DataError):
            raise
        raise DataError(f"{path}: {exc}") from exc
    if data.shape[0] != head["n_samples"]:
        raise DataError(f"{path}: expected {head['n_samples']} samples, found {data.shape[0]}")
    return WaveformRecord(
        ia=data[:, 1].copy(), ib=data[:, 2].copy(), ic=data[:, 3].copy(),
        inception_index=int(head["inception_index"]), t0=float(head["t0"]),
        rate=float(head["rate"]), case_id=head["case_id"], metadata=head["metadata"],
    )
