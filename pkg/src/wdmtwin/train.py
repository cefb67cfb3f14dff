"""Remote twin training: random probes through the access link, MSE fit."""

from __future__ import annotations

import logging
import warnings
from dataclasses import asdict, dataclass

import numpy as np

from . import autodiff as ad
from .edfa import EdfaTwinModel, init_model
from .errors import InvalidArgument, NumericalFailure
from .field_sim import NetworkSim, ProbeRecord
from .grid import ChannelGrid, PowerProfile, dbm_to_mw
from .link import LinkPath, run_cascade
from .optim import make_optimizer

log = logging.getLogger(__name__)

__all__ = ["ProbeRecord", "TrainConfig", "generate_probes", "train_twin", "validate_twin"]


@dataclass
class TrainConfig:
    n_train: int = 200
    n_val: int = 50
    total_range_dbm: tuple = (12.0, 21.0)
    offset_db: float = 9.0
    optimizer: str = "adam"
    lr: float = 1e-3
    betas: tuple = (0.9, 0.999)
    eps: float = 1e-8
    epochs: int = 500
    batch_size: int = 16
    seed: int = 0

    def __post_init__(self):
        self.total_range_dbm = tuple(self.total_range_dbm)
        self.betas = tuple(self.betas)
        if self.n_train <= 0 or self.n_val < 0 or self.epochs <= 0 or self.batch_size <= 0:
            raise InvalidArgument("probe counts, epochs and batch size must be positive")
        lo, hi = self.total_range_dbm
        if hi < lo or self.offset_db < 0:
            raise InvalidArgument("probe power ranges are inverted")

    def to_dict(self):
        return asdict(self)


def probe_profiles(grid: ChannelGrid, cfg: TrainConfig, count: int | None = None) -> np.ndarray:
    """Random probe launch profiles (mW), shape (count, n_ch).

    Per-channel offsets are uniform in +-offset_db; totals are stratified
    uniform over the configured range so the whole range is covered.
    """
    n = cfg.n_train + cfg.n_val if count is None else count
    rng = np.random.default_rng(cfg.seed)
    lo, hi = cfg.total_range_dbm
    strata = (rng.permutation(n) + rng.uniform(size=n)) / n
    totals = lo + (hi - lo) * strata
    offsets = rng.uniform(-cfg.offset_db, cfg.offset_db, size=(n, grid.n_ch))
    shape = 10.0 ** (offsets / 10.0)
    return shape * (dbm_to_mw(totals) / shape.sum(axis=1))[:, None]


def generate_probes(sim: NetworkSim, path_id: str, cfg: TrainConfig, count: int | None = None):
    grid = sim.grid
    return [sim.measure_probe(path_id, PowerProfile(grid, p), probe_index=k)
            for k, p in enumerate(probe_profiles(grid, cfg, count))]


def _check_grid(probes, grid):
    for pr in probes:
        if pr.grid_fingerprint != grid.fingerprint:
            raise InvalidArgument(f"probe {pr.probe_id} was taken on a different channel grid")


def _arrays(probes):
    x = dbm_to_mw(np.array([p.p_in_dbm for p in probes]))
    y_out = np.array([p.p_out_dbm for p in probes])
    y_ase = np.array([p.p_ase_dbm for p in probes])
    return x, y_out, y_ase


def _predict_db(link: LinkPath, model, x):
    state = run_cascade(link.with_device(model), x)
    return 10.0 * ad.log10(state.signal), 10.0 * ad.log10(state.ase)


def _mse(link, model, x, y_out, y_ase):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        out, ase = _predict_db(link, model, x)
    return float(np.mean((out - y_out) ** 2 + (ase - y_ase) ** 2))


def train_twin(probes, grid: ChannelGrid, link: LinkPath, cfg: TrainConfig = TrainConfig(),
               model: EdfaTwinModel | None = None):
    """Fit the EDFA twin on the first ``cfg.n_train`` probes.

    The remaining probes (up to ``cfg.n_val``) are only used to report the
    validation MSE. Returns ``(model, curve)`` with curve rows
    ``(epoch, train_mse, val_mse)``.
    """
    if link.grid.fingerprint != grid.fingerprint:
        raise InvalidArgument("link and training grid differ")
    _check_grid(probes, grid)
    train = probes[: cfg.n_train]
    val = probes[cfg.n_train: cfg.n_train + cfg.n_val]
    if not train:
        raise InvalidArgument("no training probes")
    x, y_out, y_ase = _arrays(train)
    xv, yv_out, yv_ase = _arrays(val) if val else (None, None, None)

    model = model or init_model(grid, cfg.seed)
    opt = make_optimizer(cfg.optimizer, model.params(), cfg.lr, cfg.betas, cfg.eps)
    rng = np.random.default_rng([cfg.seed, 1])
    curve = []
    n = len(train)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        for epoch in range(1, cfg.epochs + 1):
            order = rng.permutation(n)
            for start in range(0, n, cfg.batch_size):
                idx = np.sort(order[start: start + cfg.batch_size])
                tape = ad.Tape()
                leaves = {k: tape.var(v) for k, v in opt.params.items()}
                out, ase = _predict_db(link, model.with_params(leaves), x[idx])
                d1 = out - y_out[idx]
                d2 = ase - y_ase[idx]
                loss = ad.mean(d1 * d1 + d2 * d2)
                if not np.isfinite(loss.value):
                    raise NumericalFailure("twin training diverged (NaN loss)",
                                           {"epoch": epoch, "batch_start": start})
                grads = tape.backward(loss)
                opt.step({k: grads[v] for k, v in leaves.items()})
            model = model.with_params(opt.params)
            tr = _mse(link, model, x, y_out, y_ase)
            va = _mse(link, model, xv, yv_out, yv_ase) if val else float("nan")
            if not np.isfinite(tr):
                raise NumericalFailure("twin training diverged (NaN loss)", {"epoch": epoch})
            curve.append((epoch, tr, va))
            if epoch % 50 == 0 or epoch == 1:
                log.info("epoch %d train_mse %.5f val_mse %.5f", epoch, tr, va)

    model.metadata = {
        "trained": True,
        "seed": cfg.seed,
        "probe_count": len(train),
        "val_probe_count": len(val),
        "epochs": cfg.epochs,
        "final_train_mse": curve[-1][1],
        "final_val_mse": curve[-1][2],
        "path_id": link.path_id,
    }
    return model, curve


@dataclass
class ErrorReport:
    gain_rms_db: float
    gain_max_db: float
    ase_rms_db: float
    ase_max_db: float
    gain_rms_per_ch: np.ndarray
    ase_rms_per_ch: np.ndarray
    f_thz: np.ndarray

    def rows(self):
        return [(i, float(f), float(g), float(a)) for i, (f, g, a) in
                enumerate(zip(self.f_thz, self.gain_rms_per_ch, self.ase_rms_per_ch))]


def validate_twin(model: EdfaTwinModel, probes, link: LinkPath) -> ErrorReport:
    """Prediction errors of the twin cascade on held-out probes.

    Gain error is the error of the predicted output power (the input is
    known exactly); ASE error is the error of the predicted ASE power.
    """
    if not probes:
        raise InvalidArgument("no probes to validate on")
    _check_grid(probes, model.grid)
    x, y_out, y_ase = _arrays(probes)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        out, ase = _predict_db(link, model, x)
    eg = out - y_out
    ea = ase - y_ase
    return ErrorReport(
        float(np.sqrt(np.mean(eg**2))), float(np.max(np.abs(eg))),
        float(np.sqrt(np.mean(ea**2))), float(np.max(np.abs(ea))),
        np.sqrt(np.mean(eg**2, axis=0)), np.sqrt(np.mean(ea**2, axis=0)),
        np.asarray(probes[0].f_thz, dtype=float),
    )


def probe_from_rows(probe_id, path_id, rows, grid):
    """Rebuild a ProbeRecord from CSV rows (ch, f, p_in, p_out, p_ase)."""
    rows = sorted(rows, key=lambda r: r[0])
    f = np.array([r[1] for r in rows])
    if f.size != grid.n_ch or np.max(np.abs(f - grid.f)) > 1e-6:
        raise InvalidArgument(f"probe {probe_id}: channel frequencies do not match the grid")
    return ProbeRecord(probe_id, path_id, grid.f.copy(), np.array([r[2] for r in rows]),
                       np.array([r[3] for r in rows]), np.array([r[4] for r in rows]),
                       grid.fingerprint)

