"""Command line for the workbench: ``python3 -m faultzone <command> ...``.

Exit codes: 0 ok, 2 configuration, 3 data, 4 numerical failure, 5 SMO
non-convergence.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import pipeline as pl
from .casegen import write_ids, write_manifest
from .emtsim import read_record, write_record
from .errors import ConfigError, DataError, FaultZoneError
from .lineparam import line_parameters, load_geometry, save_line_parameters
from .svmcore import VOTING_TABLES, load_model, save_model
from .wavefeat import read_features, write_features


def _global_flags(parser, defaults):
    kw = {} if defaults else {"default": argparse.SUPPRESS}
    parser.add_argument("--seed", type=int, **({"default": 1} if defaults else kw),
                        help="seed for subsampling and validation slices")
    parser.add_argument("--jobs", type=int, **({"default": 1} if defaults else kw),
                        help="worker processes for simulation")
    parser.add_argument("--binary", action="store_true", **({} if defaults else kw),
                        help="write waveforms as packed little-endian floats")
    parser.add_argument("--paper-mode", action="store_true", **({} if defaults else kw),
                        help="select (C, g) by accuracy on the training rows")
    parser.add_argument("--config", type=Path, **({"default": None} if defaults else kw),
                        help="JSON configuration document")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    _global_flags(common, defaults=False)
    p = argparse.ArgumentParser(prog="faultzone", description=__doc__.splitlines()[0])
    _global_flags(p, defaults=True)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("params", parents=[common], help="line constants from tower geometry")
    s.add_argument("--geometry", type=Path, required=True)
    s.add_argument("--frequency", type=float, default=50.0)
    s.add_argument("--out", type=Path, required=True)

    s = sub.add_parser("simulate", parents=[common], help="simulate a (sub)sample of a scenario")
    s.add_argument("--scenario", type=int, choices=(1, 2), required=True)
    s.add_argument("--subsample", type=float, default=1.0)
    s.add_argument("--out-dir", type=Path, required=True)

    s = sub.add_parser("features", parents=[common], help="db2 features of a waveform directory")
    s.add_argument("--waveform-dir", type=Path, required=True)
    s.add_argument("--out", type=Path, required=True)

    for name, text in (("train", "train one model at fixed C and g"),
                       ("grid-search", "select C and g, then train")):
        s = sub.add_parser(name, parents=[common], help=text)
        s.add_argument("--features", type=Path, required=True)
        s.add_argument("--scenario", type=int, choices=(1, 2), required=True)
        s.add_argument("--split", choices=("base", "augmented"), default="augmented")
        s.add_argument("--strategy", choices=("oaa", "oao"), default="oaa")
        s.add_argument("--table", choices=sorted(VOTING_TABLES), default="V")
        if name == "train":
            s.add_argument("-C", "--C", dest="c", type=float, required=True)
            s.add_argument("-g", "--g", dest="g", type=float, required=True)
            s.add_argument("--out", type=Path, required=True)
        else:
            s.add_argument("--out-dir", type=Path, required=True)

    s = sub.add_parser("evaluate", parents=[common], help="confusion report on non-training rows")
    s.add_argument("--model", type=Path, required=True)
    s.add_argument("--features", type=Path, required=True)
    s.add_argument("--test-fraction", type=float, default=None,
                   help="evaluate a seeded fraction of the non-training rows")
    s.add_argument("--out-dir", type=Path, required=True)

    s = sub.add_parser("run-scenario", parents=[common], help="simulate, select, train and report")
    s.add_argument("--scenario", type=int, choices=(1, 2), required=True)
    s.add_argument("--subsample", type=float, default=0.1)
    s.add_argument("--manifest", type=Path, default=None,
                   help="reuse a manifest.json from an earlier run")
    s.add_argument("--splits", nargs="+", choices=("base", "augmented"), default=None)
    s.add_argument("--keep-waveforms", action="store_true")
    s.add_argument("--out-dir", type=Path, required=True)
    return p


def _config(args) -> dict:
    overrides = {"grid": {"paper_mode": True}} if args.paper_mode else None
    return pl.load_config(args.config, overrides)


def _load_features(path):
    if not Path(path).exists():
        raise DataError(f"feature file {path} not found")
    return read_features(path)


def cmd_params(args) -> int:
    params = line_parameters(load_geometry(args.geometry), args.frequency)
    save_line_parameters(params, args.out)
    print(f"z1 = {params.z1:.5f} ohm/km, z0 = {params.z0:.5f} ohm/km -> {args.out}")
    return 0


def _write_waveforms(records, out_dir, binary):
    wdir = Path(out_dir) / "waveforms"
    wdir.mkdir(parents=True, exist_ok=True)
    for rec in records:
        write_record(rec, wdir, binary)


def cmd_simulate(args) -> int:
    cfg = _config(args)
    manifest = pl.make_manifest(cfg, args.scenario, args.subsample, args.seed)
    out = args.out_dir
    out.mkdir(parents=True, exist_ok=True)
    records = pl.simulate_cases(pl.manifest_cases(manifest), cfg, args.jobs)
    _write_waveforms(records, out, args.binary)
    (out / "manifest.json").write_text(manifest.to_json())
    (out / "config.json").write_text(json.dumps(cfg, indent=1, sort_keys=True) + "\n")
    write_manifest(pl.manifest_cases(manifest), out / "cases.csv")
    print(f"{len(records)} waveforms -> {out / 'waveforms'}")
    return 0


def cmd_features(args) -> int:
    cfg = _config(args)
    wdir = args.waveform_dir
    files = sorted(wdir.glob("*.csv")) + sorted(wdir.glob("*.bin"))
    if not files:
        raise DataError(f"no waveform files in {wdir}")
    records = [read_record(f) for f in files]
    feats = pl.features_from_records(records, pl.base_current(cfg))
    write_features(feats, args.out)
    print(f"{len(feats)} feature rows -> {args.out}")
    return 0


def _table(args):
    return args.table if args.strategy == "oao" else None


def cmd_train(args) -> int:
    cfg = _config(args)
    ids, zones, X = _load_features(args.features)
    model = pl.fit_model(X, zones, ids, args.scenario, args.split, args.strategy, _table(args),
                         args.c, args.g, cfg["grid"]["tol"])
    save_model(model, args.out)
    print(f"model -> {args.out}")
    return 0


def cmd_grid_search(args) -> int:
    cfg = _config(args)
    ids, zones, X = _load_features(args.features)
    sel = pl.select_model(X, zones, ids, args.scenario, args.split, args.strategy, _table(args),
                          cfg, args.seed)
    out = args.out_dir
    out.mkdir(parents=True, exist_ok=True)
    pl.write_grid_table(sel.grid, out / "grid.csv")
    save_model(sel.model, out / "model.json")
    c, g = sel.grid.best
    print(f"best C={c:g} g={g:g} selection accuracy {sel.grid.best_accuracy:.4f}")
    return 0


def cmd_evaluate(args) -> int:
    cfg = _config(args)
    if not args.model.exists():
        raise DataError(f"model file {args.model} not found")
    model = load_model(args.model)
    ids, zones, X = _load_features(args.features)
    fraction = cfg["split"]["test_fraction"] if args.test_fraction is None else args.test_fraction
    if not 0 < fraction <= 1:
        raise ConfigError("--test-fraction must lie in (0, 1]")
    report = pl.evaluate(model, ids, X, zones, fraction, args.seed, title=f"model {args.model.name}")
    report.write(args.out_dir)
    sys.stdout.write(report.to_text())
    return 0


def cmd_run_scenario(args) -> int:
    cfg = _config(args)
    out = args.out_dir
    out.mkdir(parents=True, exist_ok=True)
    if args.manifest is not None:
        if not args.manifest.exists():
            raise DataError(f"manifest {args.manifest} not found")
        manifest = pl.RunManifest.from_json(args.manifest.read_text())
        if manifest.scenario != args.scenario:
            raise ConfigError("manifest scenario differs from --scenario")
    else:
        manifest = pl.make_manifest(cfg, args.scenario, args.subsample, args.seed)
    (out / "manifest.json").write_text(manifest.to_json())
    write_manifest(pl.manifest_cases(manifest), out / "cases.csv")

    records = [] if args.keep_waveforms else None
    feats = pl.scenario_features(manifest, cfg, args.jobs, records)
    if records:
        _write_waveforms(records, out, args.binary)
    write_features(feats, out / "features.csv")
    result = pl.run_scenario(manifest, cfg, args.splits or ("base", "augmented"),
                             features=feats, paper_mode=args.paper_mode or None)
    lines = ["split,strategy,table,c,g,selection_accuracy,success_rate"]
    for (split, strategy, table), sel in result.selections.items():
        stem = pl.artifact_stem(split, strategy, table)
        save_model(sel.model, out / f"{stem}_model.json")
        pl.write_grid_table(sel.grid, out / f"{stem}_grid.csv")
        write_ids(sel.model.meta["training_ids"], out / f"{split}_training_ids.txt")
        report = result.reports[(split, strategy, table)]
        report.write(out, f"{stem}_report")
        c, g = sel.grid.best
        lines.append(f"{split},{strategy},{table or ''},{c!r},{g!r},"
                     f"{sel.grid.best_accuracy!r},{report.success_rate!r}")
        print(f"{stem:<22} C={c:<9g} g={g:<7g} success {report.success_rate:6.2f} %")
    (out / "summary.csv").write_text("\n".join(lines) + "\n")
    return 0


COMMANDS = {
    "params": cmd_params,
    "simulate": cmd_simulate,
    "features": cmd_features,
    "train": cmd_train,
    "grid-search": cmd_grid_search,
    "evaluate": cmd_evaluate,
    "run-scenario": cmd_run_scenario,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except FaultZoneError as exc:
        print(f"faultzone {args.command}: {exc}", file=sys.stderr)
        return exc.exit_code
    except FileNotFoundError as exc:
        print(f"faultzone {args.command}: {exc}", file=sys.stderr)
        return DataError.exit_code
