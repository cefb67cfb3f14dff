"""Launch power profile optimisation at fixed total power.

The cost is the negative smooth minimum of the per-channel SNR (dB)
predicted by the twin; the smoothing temperature is annealed over stages.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .errors import InvalidArgument, NumericalFailure
from .grid import DB, PowerProfile, dbm_to_mw
from .link import LinkPath, Toggles, predict, snr_db_graph
from .optim import Adam


@dataclass
class OptConfig:
    total_dbm: float = 18.0
    variant: str = "full"
    taus: tuple = (1.0, 4.0, 16.0)
    iterations: int = 700
    lr: float = 0.01
    max_range_db: float = 15.0
    seed: int = 0

    def __post_init__(self):
        self.taus = tuple(float(t) for t in self.taus)
        if any(b <= a for a, b in zip(self.taus, self.taus[1:])) or min(self.taus) <= 0:
            raise InvalidArgument("taus must be positive and ascending")
        if self.iterations <= 0 or self.max_range_db <= 0:
            raise InvalidArgument("iterations and max_range_db must be positive")
        Toggles.from_variant(self.variant)


def parameterize(theta, p_tot_dbm: float):
    """Softmax weights times total power: p_i = P e^theta_i / sum_j e^theta_j (mW)."""
    tv = ad.value(theta)
    shift = float(np.max(tv)) if tv.size else 0.0
    e = ad.exp(theta - shift)
    return e * (dbm_to_mw(p_tot_dbm) / ad.sum_(e, axis=-1, keepdims=True))


def smooth_min(snr_db, tau: float):
    """-(1/tau) ln sum exp(-tau x), evaluated with a constant shift for range."""
    if tau <= 0:
        raise InvalidArgument("tau must be > 0")
    m = float(np.min(ad.value(snr_db)))
    return m - ad.log(ad.sum_(ad.exp((snr_db - m) * -tau))) / tau


def project(theta: np.ndarray, max_range_db: float) -> np.ndarray:
    """Recentre theta and cap the profile's dB dynamic range."""
    r = max_range_db / DB
    theta = np.maximum(theta, theta.max() - r)
    return theta - theta.mean()


@dataclass
class OptResult:
    profile: PowerProfile
    theta: np.ndarray
    trace: list = field(default_factory=list)  # (iter, tau, cost_db)
    hard_min_snr_db: float = float("nan")  # under the full twin
    variant: str = "full"


def optimize(path: LinkPath, trx, cfg: OptConfig = OptConfig(), theta0=None) -> OptResult:
    grid = path.grid
    toggles = Toggles.from_variant(cfg.variant)
    for amp in path.amps:
        meta = getattr(amp.device, "metadata", None)
        if meta is not None and not meta.get("trained", False):
            warnings.warn("optimising against an untrained EDFA twin", RuntimeWarning, stacklevel=2)
            break
    theta = np.zeros(grid.n_ch) if theta0 is None else np.array(theta0, dtype=float)
    theta = project(theta, cfg.max_range_db)

    trace = []
    it = 0
    for tau in cfg.taus:
        opt = Adam({"theta": theta}, lr=cfg.lr)
        best_cost, best_theta = np.inf, theta
        for _ in range(cfg.iterations):
            tape = ad.Tape()
            th = tape.var(theta)
            snr = snr_db_graph(path, parameterize(th, cfg.total_dbm), trx, toggles)
            cost = -smooth_min(snr, tau)
            c = float(cost.value)
            if not np.isfinite(c):
                raise NumericalFailure("profile optimisation diverged",
                                       {"iteration": it, "tau": tau, "theta": theta.tolist()})
            trace.append((it, tau, c))
            if c < best_cost:
                best_cost, best_theta = c, theta
            g = tape.backward(cost)[th]
            theta = project(opt.step({"theta": g})["theta"], cfg.max_range_db)
            opt.params["theta"] = theta
            it += 1
        theta = best_theta

    profile = PowerProfile(grid, ad.value(parameterize(theta, cfg.total_dbm)))
    full = predict(path, profile, trx, Toggles(True, True))
    return OptResult(profile, theta, trace, float(np.min(full.snr_db)), cfg.variant)
