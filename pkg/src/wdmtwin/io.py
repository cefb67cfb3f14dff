"""CSV/JSON file formats shared by the command-line tools.

CSV files use '.' decimals, '\\n' line endings and six decimals; every file
starts with ``#`` comment lines carrying tool version and hashes.
"""

from __future__ import annotations

import hashlib
import json
from collections import defaultdict
from dataclasses import asdict

import numpy as np

from . import __version__
from .errors import InvalidArgument, SchemaError
from .grid import ChannelGrid, PowerProfile
from .optimize import OptConfig
from .train import ProbeRecord, TrainConfig, probe_from_rows

REPORT_COLUMNS = "ch,f_thz,lambda_nm,p_dbm,ase_dbm,nli_dbm,osnr_db,snr_db,margin_db"
PROBE_COLUMNS = "probe_id,path_id,ch,f_thz,p_in_dbm,p_out_dbm,p_ase_dbm"


def digest(obj) -> str:
    if isinstance(obj, (bytes, str)):
        data = obj.encode() if isinstance(obj, str) else obj
    else:
        data = json.dumps(obj, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(data).hexdigest()[:12]


def fmt(x) -> str:
    return f"{float(x):.6f}"


def _header(config_hash="none", model_hash="none", **extra):
    lines = [f"# wdmtwin {__version__}", f"# config_hash {config_hash}", f"# model_hash {model_hash}"]
    lines += [f"# {k} {v}" for k, v in extra.items()]
    return lines


def write_lines(path, lines):
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_rows(path):
    """Data rows of a commented CSV as lists of strings (header excluded)."""
    rows, header = [], None
    with open(path) as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            if header is None:
                header = line.split(",")
                continue
            rows.append(line.split(","))
    if header is None:
        raise SchemaError(f"{path}: missing header line")
    return header, rows


# configs

def load_config(path=None, seed=None):
    doc = {}
    if path:
        with open(path) as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"{path}: line {exc.lineno}: {exc.msg}") from exc
    try:
        train = TrainConfig(**doc.get("train", {}))
        opt = OptConfig(**doc.get("opt", {}))
    except TypeError as exc:
        raise SchemaError(f"config: {exc}") from exc
    if seed is not None:
        train.seed = seed
        opt.seed = seed
    return train, opt, doc


def config_dict(train: TrainConfig, opt: OptConfig) -> dict:
    return {"train": asdict(train), "opt": asdict(opt)}


# probes

def write_probes(path, probes, config_hash="none"):
    lines = _header(config_hash) + [PROBE_COLUMNS]
    for pr in probes:
        for ch in range(len(pr.f_thz)):
            lines.append(",".join([str(pr.probe_id), pr.path_id, str(ch), fmt(pr.f_thz[ch]),
                                   fmt(pr.p_in_dbm[ch]), fmt(pr.p_out_dbm[ch]), fmt(pr.p_ase_dbm[ch])]))
    write_lines(path, lines)


def read_probes(path, grid: ChannelGrid) -> list[ProbeRecord]:
    header, rows = read_rows(path)
    if ",".join(header) != PROBE_COLUMNS:
        raise SchemaError(f"{path}: expected header {PROBE_COLUMNS}")
    groups = defaultdict(list)
    paths = {}
    for k, r in enumerate(rows):
        try:
            pid = int(r[0])
            groups[pid].append((int(r[2]), float(r[3]), float(r[4]), float(r[5]), float(r[6])))
            paths[pid] = r[1]
        except (ValueError, IndexError) as exc:
            raise SchemaError(f"{path}: data row {k + 1}: {exc}") from exc
    return [probe_from_rows(pid, paths[pid], groups[pid], grid) for pid in sorted(groups)]


# training curve / validation

def write_curve(path, curve, config_hash="none", model_hash="none"):
    lines = _header(config_hash, model_hash) + ["epoch,train_mse,val_mse"]
    lines += [f"{e},{fmt(a)},{fmt(b)}" for e, a, b in curve]
    write_lines(path, lines)


def write_validation(path, report, config_hash="none", model_hash="none"):
    lines = _header(config_hash, model_hash,
                    gain_rms_db=fmt(report.gain_rms_db), gain_max_db=fmt(report.gain_max_db),
                    ase_rms_db=fmt(report.ase_rms_db), ase_max_db=fmt(report.ase_max_db))
    lines.append("ch,f_thz,gain_rms_db,ase_rms_db")
    lines += [f"{i},{fmt(f)},{fmt(g)},{fmt(a)}" for i, f, g, a in report.rows()]
    write_lines(path, lines)


# SNR reports

def write_report(path, report, config_hash="none", model_hash="none"):
    lines = _header(config_hash, model_hash, path_id=report.path_id,
                    toggles=report.toggles.name, threshold_db=fmt(report.threshold_db))
    lines += [f"# flag {f}" for f in report.flags]
    lines.append(REPORT_COLUMNS)
    m = report.margin_db
    for i in range(len(report.f_thz)):
        lines.append(",".join([str(i)] + [fmt(v) for v in (
            report.f_thz[i], report.lambda_nm[i], report.signal_dbm[i], report.ase_dbm[i],
            report.nli_dbm[i], report.osnr_db[i], report.snr_db[i], m[i])]))
    write_lines(path, lines)


# launch profiles, traces, TRX samples

def write_profile(path, profile: PowerProfile, config_hash="none", model_hash="none", **extra):
    lines = _header(config_hash, model_hash, **extra) + ["ch,f_thz,p_dbm"]
    pd = profile.p_dbm
    lines += [f"{i},{fmt(f)},{fmt(p)}" for i, (f, p) in enumerate(zip(profile.grid.f, pd))]
    write_lines(path, lines)


def read_profile(path, grid: ChannelGrid) -> PowerProfile:
    header, rows = read_rows(path)
    if header[:3] != ["ch", "f_thz", "p_dbm"]:
        raise SchemaError(f"{path}: expected header ch,f_thz,p_dbm")
    p = np.full(grid.n_ch, np.nan)
    for k, r in enumerate(rows):
        try:
            ch, f, v = int(r[0]), float(r[1]), float(r[2])
        except (ValueError, IndexError) as exc:
            raise SchemaError(f"{path}: data row {k + 1}: {exc}") from exc
        if not 0 <= ch < grid.n_ch or abs(f - grid.f[ch]) > 1e-6:
            raise InvalidArgument(f"{path}: row {k + 1} does not match the channel grid")
        p[ch] = v
    if np.isnan(p).any():
        raise InvalidArgument(f"{path}: profile does not cover every channel")
    return PowerProfile.from_dbm(grid, p)


def write_trace(path, trace, config_hash="none", model_hash="none"):
    lines = _header(config_hash, model_hash) + ["iter,tau,cost_db"]
    lines += [f"{i},{fmt(t)},{fmt(c)}" for i, t, c in trace]
    write_lines(path, lines)


def write_trx(path, samples, **extra):
    lines = _header(**extra) + ["lambda_nm,snr_db"]
    lines += [f"{fmt(a)},{fmt(b)}" for a, b in samples]
    write_lines(path, lines)
