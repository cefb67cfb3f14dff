"""``wdmtwin`` command line: probe, train, predict, optimize, evaluate, repro-paper.

Exit codes: 0 success, 1 usage, 2 schema/validation, 3 numerical failure
(a ``<out>.diagnostics.json`` file is written next to the main output).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from . import io as wio
from .edfa import EdfaTwinModel
from .errors import InvalidArgument, NumericalFailure, WdmTwinError
from .field_sim import NetworkSim, default_trx_truth
from .grid import flat_profile
from .link import Toggles, predict
from .optimize import optimize
from .scenario import default_topology
from .topology import load_topology
from .train import generate_probes, train_twin, validate_twin
from .trx import fit_trx, read_trx_csv

log = logging.getLogger("wdmtwin")

VARIANTS = ("full", "no-nl", "no-nl-no-trx")
LINKS = ("short", "long")
LONG_WL_FRACTION = 0.25  # long-wavelength margin: min over the reddest quarter of the band


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def max_workers(jobs: int) -> int:
    cap = os.environ.get("WDMTWIN_THREADS")
    n = int(cap) if cap else (os.cpu_count() or 1)
    return max(1, min(n, jobs))


def _model_hash(model: EdfaTwinModel) -> str:
    return wio.digest(model.dumps())


def _setup(args):
    topo = load_topology(args.topology)
    train_cfg, opt_cfg, _ = wio.load_config(getattr(args, "config", None), getattr(args, "seed", None))
    chash = wio.digest(wio.config_dict(train_cfg, opt_cfg))
    return topo, train_cfg, opt_cfg, chash


def _load_model(path, grid) -> EdfaTwinModel:
    model = EdfaTwinModel.load(path)
    if model.grid.fingerprint != grid.fingerprint:
        raise InvalidArgument(f"{path}: model grid does not match the topology grid")
    return model


def _profile(spec, grid, total_dbm):
    return flat_profile(grid, total_dbm) if spec == "flat" else wio.read_profile(spec, grid)


# subcommands

def cmd_scenario(args):
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    doc = default_topology(device_variation=args.device_variation)
    (out / "topology.json").write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")
    grid = load_topology(out / "topology.json").grid
    wio.write_trx(out / doc["trx_truth_csv"], default_trx_truth(grid))
    return 0


def cmd_b2b(args):
    topo, *_ = _setup(args)
    sim = NetworkSim(topo)
    wio.write_trx(args.out, sim.b2b_samples(args.count))
    return 0


def cmd_probe(args):
    topo, train_cfg, _, chash = _setup(args)
    sim = NetworkSim(topo)
    probes = generate_probes(sim, args.path or topo.training_path, train_cfg, args.count)
    wio.write_probes(args.out, probes, chash)
    return 0


def cmd_train(args):
    topo, train_cfg, _, chash = _setup(args)
    sim = NetworkSim(topo)
    path_id = args.path or topo.training_path
    probes = wio.read_probes(args.probes, topo.grid)
    link = sim.link(path_id)
    model, curve = train_twin(probes, topo.grid, link, train_cfg)
    model.metadata["config_hash"] = chash
    model.save(args.out)
    mhash = _model_hash(model)
    if args.curve:
        wio.write_curve(args.curve, curve, chash, mhash)
    held_out = probes[train_cfg.n_train:]
    if args.validation and held_out:
        wio.write_validation(args.validation, validate_twin(model, held_out, link.with_device(model)),
                             chash, mhash)
    return 0


def cmd_predict(args):
    topo, _, opt_cfg, chash = _setup(args)
    model = _load_model(args.model, topo.grid)
    path = NetworkSim(topo).twin_link(args.path, model)
    trx = read_trx_csv(args.trx)
    launch = _profile(args.profile, topo.grid, opt_cfg.total_dbm)
    rep = predict(path, launch, trx, Toggles.from_variant(args.toggles), topo.threshold_db)
    wio.write_report(args.out, rep, chash, _model_hash(model))
    return 0


def cmd_optimize(args):
    topo, _, opt_cfg, chash = _setup(args)
    if args.variant:
        opt_cfg = replace(opt_cfg, variant=args.variant)
    model = _load_model(args.model, topo.grid)
    path = NetworkSim(topo).twin_link(args.path, model)
    res = optimize(path, read_trx_csv(args.trx), opt_cfg)
    mhash = _model_hash(model)
    wio.write_profile(args.out, res.profile, chash, mhash, variant=opt_cfg.variant,
                      twin_min_snr_db=wio.fmt(res.hard_min_snr_db))
    if args.trace:
        wio.write_trace(args.trace, res.trace, chash, mhash)
    return 0


def cmd_evaluate(args):
    topo, _, opt_cfg, chash = _setup(args)
    sim = NetworkSim(topo)
    launch = _profile(args.profile, topo.grid, opt_cfg.total_dbm)
    wio.write_report(args.out, sim.ground_truth_snr(args.path, launch), chash)
    return 0


def _opt_job(job):
    path, trx, cfg = job
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return optimize(path, trx, cfg)


def long_wl_margin(report) -> float:
    k = max(1, int(round(LONG_WL_FRACTION * len(report.lambda_nm))))
    idx = np.argsort(report.lambda_nm)[-k:]
    return float(np.min(report.margin_db[idx]))


def cmd_repro(args):
    wd = Path(args.workdir)
    wd.mkdir(parents=True, exist_ok=True)
    if args.topology:
        topo_path = Path(args.topology)
    else:
        cmd_scenario(argparse.Namespace(out_dir=wd, device_variation=False))
        topo_path = wd / "topology.json"
    args.topology = topo_path
    topo, train_cfg, opt_cfg, chash = _setup(args)
    (wd / "config.json").write_text(
        json.dumps(wio.config_dict(train_cfg, opt_cfg), indent=1, sort_keys=True) + "\n")

    sim = NetworkSim(topo)
    b2b = sim.b2b_samples(8)
    wio.write_trx(wd / "trx.csv", b2b, config_hash=chash)
    trx = fit_trx(b2b)

    log.info("probing %s", topo.training_path)
    probes = generate_probes(sim, topo.training_path, train_cfg)
    wio.write_probes(wd / "probes.csv", probes, chash)
    link = sim.link(topo.training_path)
    model, curve = train_twin(probes, topo.grid, link, train_cfg)
    model.metadata["config_hash"] = chash
    model.save(wd / "model.json")
    mhash = _model_hash(model)
    wio.write_curve(wd / "curve.csv", curve, chash, mhash)
    val = probes[train_cfg.n_train:]
    if val:
        wio.write_validation(wd / "validation.csv",
                             validate_twin(model, val, link.with_device(model)), chash, mhash)

    jobs, keys = [], []
    for li, link_id in enumerate(LINKS):
        for vi, variant in enumerate(VARIANTS):
            cfg = replace(opt_cfg, variant=variant, seed=opt_cfg.seed + 10 * li + vi)
            jobs.append((sim.twin_link(link_id, model), trx, cfg))
            keys.append((link_id, variant))
    workers = max_workers(len(jobs))
    log.info("optimising %d profiles on %d workers", len(jobs), workers)
    if workers > 1:
        with ProcessPoolExecutor(workers) as ex:
            results = dict(zip(keys, ex.map(_opt_job, jobs)))
    else:
        results = dict(zip(keys, map(_opt_job, jobs)))

    rows = ["link,profile,min_margin_db,delta_min_margin_db,long_wl_margin_db,twin_min_snr_db"]
    flat = flat_profile(topo.grid, opt_cfg.total_dbm)
    for link_id in LINKS:
        twin_flat = predict(sim.twin_link(link_id, model), flat, trx, Toggles(True, True))
        base = sim.ground_truth_snr(link_id, flat)
        wio.write_report(wd / f"truth_{link_id}_flat.csv", base, chash, mhash)
        rows.append(",".join([link_id, "flat", wio.fmt(base.min_margin), wio.fmt(0.0),
                              wio.fmt(long_wl_margin(base)), wio.fmt(np.min(twin_flat.snr_db))]))
        for variant in VARIANTS:
            res = results[(link_id, variant)]
            tag = f"{link_id}_{variant}"
            wio.write_profile(wd / f"profile_{tag}.csv", res.profile, chash, mhash, variant=variant)
            wio.write_trace(wd / f"trace_{tag}.csv", res.trace, chash, mhash)
            rep = sim.ground_truth_snr(link_id, res.profile)
            wio.write_report(wd / f"truth_{tag}.csv", rep, chash, mhash)
            rows.append(",".join([link_id, variant, wio.fmt(rep.min_margin),
                                  wio.fmt(rep.min_margin - base.min_margin),
                                  wio.fmt(long_wl_margin(rep)), wio.fmt(res.hard_min_snr_db)]))
    header = [f"# wdmtwin {__version__}", f"# config_hash {chash}", f"# model_hash {mhash}"]
    wio.write_lines(wd / "summary.csv", header + rows)
    if not args.quiet:
        print("\n".join(rows))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="wdmtwin", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"wdmtwin {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, path_required=True, config=True):
        sp.add_argument("--topology", required=True)
        sp.add_argument("--path", required=path_required)
        if config:
            sp.add_argument("--config")
            sp.add_argument("--seed", type=int)

    sp = sub.add_parser("scenario", help="write the default topology and TRX truth curve")
    sp.add_argument("--out-dir", required=True)
    sp.add_argument("--device-variation", action="store_true")
    sp.set_defaults(func=cmd_scenario)

    sp = sub.add_parser("b2b", help="measure back-to-back TRX SNR samples")
    common(sp, path_required=False, config=False)
    sp.add_argument("--count", type=int, default=8)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_b2b)

    sp = sub.add_parser("probe", help="measure random probes through a path")
    common(sp, path_required=False)
    sp.add_argument("--count", type=int)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_probe)

    sp = sub.add_parser("train", help="fit the EDFA twin on probe measurements")
    common(sp, path_required=False)
    sp.add_argument("--probes", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--curve")
    sp.add_argument("--validation")
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("predict", help="twin SNR report for a launch profile")
    common(sp)
    sp.add_argument("--model", required=True)
    sp.add_argument("--trx", required=True)
    sp.add_argument("--profile", default="flat")
    sp.add_argument("--toggles", choices=VARIANTS, default="full")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_predict)

    sp = sub.add_parser("optimize", help="optimise the launch profile on the twin")
    common(sp)
    sp.add_argument("--model", required=True)
    sp.add_argument("--trx", required=True)
    sp.add_argument("--variant", choices=VARIANTS)
    sp.add_argument("--out", required=True)
    sp.add_argument("--trace")
    sp.set_defaults(func=cmd_optimize)

    sp = sub.add_parser("evaluate", help="ground-truth SNR report for a launch profile")
    common(sp)
    sp.add_argument("--profile", default="flat")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_evaluate)

    sp = sub.add_parser("repro-paper", help="run the short/long link scenario end to end")
    sp.add_argument("--workdir", required=True)
    sp.add_argument("--topology")
    sp.add_argument("--config")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--quiet", action="store_true")
    sp.set_defaults(func=cmd_repro)
    return p


def _diagnostics_path(args) -> Path:
    for attr in ("out", "workdir", "out_dir"):
        target = getattr(args, attr, None)
        if target:
            p = Path(target)
            return p / "diagnostics.json" if p.is_dir() else p.with_name(p.name + ".diagnostics.json")
    return Path("wdmtwin.diagnostics.json")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except NumericalFailure as exc:
        diag = _diagnostics_path(args)
        diag.write_text(json.dumps({"error": str(exc), "diagnostics": exc.diagnostics},
                                   indent=1, sort_keys=True, default=str) + "\n")
        print(f"wdmtwin: numerical failure: {exc} (see {diag})", file=sys.stderr)
        return 3
    except (WdmTwinError, jsonschema.ValidationError, OSError, ValueError) as exc:
        print(f"wdmtwin: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
