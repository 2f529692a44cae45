"""End-to-end workbench: configuration, batched simulation, features, model
selection, evaluation and confusion reports.

Every step is a plain function so the command line, the demos and the tests
share one code path. Outputs are ordered by case id whatever the worker
completion order, so a fixed manifest gives byte-identical files.
"""
from __future__ import annotations

import copy
import csv
import hashlib
import io
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .casegen import TCSC_POSITION_KM, FaultCase, decode, matrix_size, split_ids, subsample, zone_label
from .emtsim import (FaultSpec, NetworkConfig, SimParams, SourceSpec, TcscSpec, WaveformRecord,
                     build_network, phasor_solve)
from .errors import ConfigError, DataError
from .lineparam import LineParameters, geometry_from_table, line_parameters, line_reactance
from .svmcore import ZONES, GridResult, ZoneClassifier, grid_search, train_multiclass
from .wavefeat import FeatureVector, extract_features

STRATEGIES = (("oaa", None), ("oao", "V"), ("oao", "VI"), ("oao", "IX"))


# configuration ----------------------------------------------------------------

def _data_text(name) -> str:
    return resources.files("faultzone").joinpath("data", name).read_text()


def config_schema() -> dict:
    return json.loads(_data_text("config.schema.json"))


def default_config() -> dict:
    return json.loads(_data_text("default_config.json"))


def _merge(base, over):
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict) and k != "geometry":
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def validate_config(cfg) -> dict:
    try:
        jsonschema.validate(cfg, config_schema())
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config {where}: {exc.message}") from None
    return cfg


def load_config(path=None, overrides=None) -> dict:
    """Defaults, then the document at path, then overrides; validated."""
    cfg = default_config()
    if path is not None:
        try:
            doc = json.loads(Path(path).read_text())
        except FileNotFoundError:
            raise ConfigError(f"config file {path} not found") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
        validate_config(doc)
        cfg = _merge(cfg, doc)
    if overrides:
        cfg = _merge(cfg, overrides)
    return validate_config(cfg)


def config_digest(cfg) -> str:
    return hashlib.sha256(json.dumps(cfg, sort_keys=True).encode()).hexdigest()[:16]


def sim_params(cfg) -> SimParams:
    return SimParams(**cfg["sim"])


@dataclass(frozen=True)
class LineSetup:
    """Line constants for simulation plus the reactance TCSC percentages refer to."""
    params: LineParameters
    reference_reactance: float


def line_setup(cfg) -> LineSetup:
    net = cfg["network"]
    geom = geometry_from_table(net["geometry"])
    params = line_parameters(geom, net["line_frequency_hz"])
    xref = line_reactance(geom, net["segments_km"][0], net["tcsc_sizing_frequency_hz"])
    return LineSetup(params, xref)


def _source(cfg, scale) -> SourceSpec:
    s = cfg["network"]["source"]
    return SourceSpec(v_ll=s["v_ll"], freq=s["freq"], z1=complex(*s["z1"]), z0=complex(*s["z0"]),
                      impedance_scale=scale)


def network_for(key, cfg, line: LineSetup) -> NetworkConfig:
    """Network of a case group; key is FaultCase.network_key."""
    scenario, zg1, zg2, xc, delta = key
    net = cfg["network"]
    return NetworkConfig(
        line=line.params,
        source1=_source(cfg, zg1),
        source2=_source(cfg, zg2),
        delta=delta,
        segments_km=tuple(float(v) for v in net["segments_km"]),
        tcsc=TcscSpec(TCSC_POSITION_KM[scenario], xc, line.reference_reactance),
        max_section_km=net["max_section_km"],
    )


def base_current(cfg, line: LineSetup | None = None) -> float:
    """Feature scale: peak steady-state relay current of the nominal uncompensated network."""
    if cfg["features"]["i_base"] is not None:
        return float(cfg["features"]["i_base"])
    line = line or line_setup(cfg)
    net = cfg["network"]
    nominal = NetworkConfig(line=line.params, source1=_source(cfg, 100), source2=_source(cfg, 100),
                            delta=cfg["features"]["i_base_delta"],
                            segments_km=tuple(float(v) for v in net["segments_km"]),
                            max_section_km=net["max_section_km"])
    return float(np.abs(phasor_solve(nominal)).max())


# simulation -------------------------------------------------------------------

def fault_spec(case: FaultCase) -> FaultSpec:
    return FaultSpec(case.fault_name, case.location_km, case.rf, case.fia)


def _simulate_group(args):
    key, cases, cfg, line = args
    engine = build_network(network_for(key, cfg, line), cfg["sim"]["dt_internal"])
    recs = engine.run_cases([fault_spec(c) for c in cases], sim_params(cfg),
                            case_ids=[c.case_id for c in cases])
    for rec, c in zip(recs, cases):
        rec.metadata["case"] = asdict(c)
        rec.metadata["zone"] = c.zone
    return recs


def _pool_map(fn, items, jobs):
    if jobs <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def simulate_cases(cases, cfg, jobs=1, line: LineSetup | None = None) -> list[WaveformRecord]:
    """Simulate cases, one network build per (scenario, sources, compensation, angle)."""
    line = line or line_setup(cfg)
    groups = {}
    for c in sorted(cases, key=lambda c: c.case_id):
        groups.setdefault(c.network_key, []).append(c)
    work = [(key, groups[key], cfg, line) for key in sorted(groups)]
    recs = [r for batch in _pool_map(_simulate_group, work, jobs) for r in batch]
    return sorted(recs, key=lambda r: r.case_id)


def record_zone(rec: WaveformRecord) -> int:
    meta = rec.metadata
    if "zone" in meta:
        return int(meta["zone"])
    try:
        return zone_label(meta["fault"]["location_km"])
    except KeyError:
        raise DataError(f"record {rec.case_id} carries no fault location") from None


def features_from_records(records, i_base) -> list[FeatureVector]:
    return [extract_features(r, record_zone(r), i_base)
            for r in sorted(records, key=lambda r: r.case_id)]


# splits and selection ---------------------------------------------------------

def training_mask(ids, scenario, split) -> np.ndarray:
    return np.isin(np.asarray(ids), sorted(split_ids(scenario, split)))


def validation_mask(zones, train, fraction, seed) -> np.ndarray:
    """Seeded per-zone slice of the training rows held out for model selection."""
    rng = np.random.default_rng(seed)
    rows = np.flatnonzero(train)
    out = np.zeros(len(zones), bool)
    for z in ZONES:
        members = rows[np.asarray(zones)[rows] == z]
        k = int(round(fraction * len(members)))
        if k:
            out[rng.choice(members, size=k, replace=False)] = True
    return out


def holdout_mask(ids, train, fraction=1.0, seed=0) -> np.ndarray:
    """Every non-training row, or a seeded fraction of them."""
    rest = ~np.asarray(train)
    if fraction >= 1.0:
        return rest
    rng = np.random.default_rng(seed)
    rows = np.flatnonzero(rest)
    k = int(round(fraction * len(rows)))
    out = np.zeros(len(rest), bool)
    out[rng.choice(rows, size=k, replace=False)] = True
    return out


@dataclass
class Selection:
    model: ZoneClassifier
    grid: GridResult


def select_model(X, zones, ids, scenario, split, strategy, table, cfg, seed, paper_mode=None) -> Selection:
    """Grid search on the training split, then retrain the winner on all of it.

    Candidates are scored on a held-out slice of the training split, or on the
    training rows themselves in paper mode.
    """
    grid = cfg["grid"]
    paper_mode = grid["paper_mode"] if paper_mode is None else paper_mode
    zones = np.asarray(zones)
    train = training_mask(ids, scenario, split)
    if not train.any():
        raise DataError(f"no rows of the {split} training split are present")
    if paper_mode:
        fit, score = train, train
    else:
        score = validation_mask(zones, train, grid["validation_fraction"], seed)
        fit = train & ~score
    res = grid_search(X[fit], zones[fit], X[score], zones[score], grid["C"], grid["g"],
                      strategy, table or "V", grid["tol"])
    c, g = res.best
    model = train_multiclass(X[train], zones[train], c, g, strategy, table, grid["tol"])
    model.meta = {
        "scenario": scenario,
        "split": split,
        "training_ids": [int(i) for i in np.asarray(ids)[train]],
        "selection": "training" if paper_mode else "held-out",
        "seed": seed,
    }
    return Selection(model, res)


def fit_model(X, zones, ids, scenario, split, strategy, table, c, g, tol=1e-3) -> ZoneClassifier:
    train = training_mask(ids, scenario, split)
    if not train.any():
        raise DataError(f"no rows of the {split} training split are present")
    model = train_multiclass(X[train], np.asarray(zones)[train], c, g, strategy, table, tol)
    model.meta = {"scenario": scenario, "split": split,
                  "training_ids": [int(i) for i in np.asarray(ids)[train]]}
    return model


def write_grid_table(res: GridResult, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["c", "g", "accuracy"])
        for row in res.table:
            w.writerow([repr(float(row["c"])), repr(float(row["g"])), repr(row["accuracy"])])


# reports ----------------------------------------------------------------------

@dataclass
class ConfusionReport:
    """Counts with rows = predicted zone and columns = real zone."""
    matrix: np.ndarray
    undecided: np.ndarray  # per real zone
    title: str = ""

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=int)
        self.undecided = np.asarray(self.undecided, dtype=int)
        if self.matrix.shape != (3, 3) or self.undecided.shape != (3,):
            raise DataError("confusion report needs a 3x3 matrix and 3 undecided counts")
        if (self.matrix < 0).any() or (self.undecided < 0).any():
            raise DataError("counts must be non-negative")

    @classmethod
    def from_predictions(cls, pred, truth, title="") -> "ConfusionReport":
        pred = np.asarray(pred, dtype=int)
        truth = np.asarray(truth, dtype=int)
        m = np.zeros((3, 3), int)
        und = np.zeros(3, int)
        for p, t in zip(pred, truth):
            if p == 0:
                und[t - 1] += 1
            else:
                m[p - 1, t - 1] += 1
        return cls(m, und, title)

    @property
    def wrong_totals(self) -> np.ndarray:
        """Wrong predictions per predicted zone (row sums off the diagonal)."""
        return self.matrix.sum(1) - np.diag(self.matrix)

    @property
    def wrong_by_real(self) -> np.ndarray:
        return self.matrix.sum(0) - np.diag(self.matrix) + self.undecided

    @property
    def correct(self) -> int:
        return int(np.trace(self.matrix))

    @property
    def total(self) -> int:
        return int(self.matrix.sum() + self.undecided.sum())

    @property
    def success_rate(self) -> float:
        """Percent correct; undecided cases count as wrong."""
        return 100.0 * self.correct / self.total if self.total else float("nan")

    def to_text(self) -> str:
        lines = []
        if self.title:
            lines.append(self.title)
        corner = "predicted / real"
        lines.append(f"{corner:<18}{'zone 1':>9}{'zone 2':>9}{'zone 3':>9}{'wrong':>9}")
        for p in range(3):
            cells = ["-" if p == r else str(self.matrix[p, r]) for r in range(3)]
            lines.append(f"{'zone ' + str(p + 1):<18}" + "".join(f"{c:>9}" for c in cells)
                         + f"{self.wrong_totals[p]:>9}")
        lines.append(f"{'undecided':<18}" + "".join(f"{u:>9}" for u in self.undecided)
                     + f"{self.undecided.sum():>9}")
        lines.append(f"correct {self.correct} of {self.total}, success rate {self.success_rate:.4f} %")
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["predicted_zone", "real_zone_1", "real_zone_2", "real_zone_3", "wrong_total"])
        for p in range(3):
            w.writerow([p + 1, *self.matrix[p].tolist(), int(self.wrong_totals[p])])
        w.writerow(["undecided", *self.undecided.tolist(), int(self.undecided.sum())])
        return buf.getvalue()

    def summary_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["metric", "value"])
        w.writerow(["correct", self.correct])
        w.writerow(["total", self.total])
        w.writerow(["success_rate", repr(self.success_rate)])
        return buf.getvalue()

    def write(self, out_dir, stem="report") -> None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / f"{stem}.txt").write_text(self.to_text())
        (out_dir / f"{stem}.csv").write_text(self.to_csv())
        (out_dir / f"{stem}_summary.csv").write_text(self.summary_csv())


def read_report_csv(text) -> ConfusionReport:
    rows = list(csv.reader(io.StringIO(text)))
    if rows[0] != ["predicted_zone", "real_zone_1", "real_zone_2", "real_zone_3", "wrong_total"]:
        raise DataError("unexpected report header")
    m = [[int(v) for v in r[1:4]] for r in rows[1:4]]
    und = [int(v) for v in rows[4][1:4]]
    return ConfusionReport(np.array(m), np.array(und))


def evaluate(model: ZoneClassifier, ids, X, zones, test_fraction=1.0, seed=0, title="") -> ConfusionReport:
    """Classify every row not used for training and tabulate the outcome."""
    ids = np.asarray(ids)
    X = np.asarray(X, dtype=float)
    sv_dim = next(iter(model.models.values())).support_vectors.shape[1]
    if X.shape[1] != sv_dim:
        raise DataError(f"model expects {sv_dim} features, file has {X.shape[1]}")
    trained = set(model.meta.get("training_ids", []))
    train = np.isin(ids, sorted(trained))
    test = holdout_mask(ids, train, test_fraction, seed)
    if np.isin(ids[test], sorted(trained)).any():
        raise DataError("test rows overlap the training split")
    if not test.any():
        raise DataError("no test rows left after removing the training split")
    pred = model.classify(X[test])
    return ConfusionReport.from_predictions(pred, np.asarray(zones)[test], title)


# run manifest -----------------------------------------------------------------

@dataclass
class RunManifest:
    scenario: int
    seed: int
    subsample: float
    sim_digest: str
    split: str
    grid: dict
    config_digest: str
    tool_version: str = __version__
    case_ids: list = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=1, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text) -> "RunManifest":
        try:
            return cls(**json.loads(text))
        except (json.JSONDecodeError, TypeError) as exc:
            raise DataError(f"bad run manifest: {exc}") from None


def make_manifest(cfg, scenario, subsample_fraction, seed) -> RunManifest:
    ids = sorted(subsample(range(matrix_size(scenario)), subsample_fraction, seed, scenario))
    return RunManifest(
        scenario=scenario,
        seed=seed,
        subsample=subsample_fraction,
        sim_digest=hashlib.sha256(json.dumps(cfg["sim"], sort_keys=True).encode()).hexdigest()[:16],
        split=cfg["split"]["name"],
        grid=cfg["grid"],
        config_digest=config_digest(cfg),
        case_ids=ids,
    )


def manifest_cases(manifest: RunManifest) -> list[FaultCase]:
    return [decode(manifest.scenario, i) for i in manifest.case_ids]


@dataclass
class ScenarioResult:
    features: list
    selections: dict  # (split, strategy, table) -> Selection
    reports: dict  # same keys -> ConfusionReport


def scenario_features(manifest: RunManifest, cfg, jobs=1, records_out=None):
    line = line_setup(cfg)
    recs = simulate_cases(manifest_cases(manifest), cfg, jobs, line)
    if records_out is not None:
        records_out.extend(recs)
    return features_from_records(recs, base_current(cfg, line))


def run_scenario(manifest: RunManifest, cfg, splits=None, strategies=STRATEGIES, jobs=1,
                 features=None, paper_mode=None) -> ScenarioResult:
    """Simulate (unless features are given), select, train and evaluate every model."""
    if features is None:
        features = scenario_features(manifest, cfg, jobs)
    ids = np.array([f.case_id for f in features])
    X = np.array([f.values for f in features])
    zones = np.array([f.zone for f in features])
    splits = splits or (manifest.split,)
    selections, reports = {}, {}
    for split in splits:
        for strategy, table in strategies:
            key = (split, strategy, table)
            sel = select_model(X, zones, ids, manifest.scenario, split, strategy, table, cfg,
                               manifest.seed, paper_mode)
            title = (f"scenario {manifest.scenario}, {split} training, {strategy}"
                     + (f" table {table}" if table else "")
                     + f", C={sel.grid.best[0]:g}, g={sel.grid.best[1]:g}")
            selections[key] = sel
            reports[key] = evaluate(sel.model, ids, X, zones, cfg["split"]["test_fraction"],
                                    manifest.seed, title)
    return ScenarioResult(features, selections, reports)


def artifact_stem(split, strategy, table) -> str:
    return f"{split}_{strategy}" + (f"_{table}" if table else "")
