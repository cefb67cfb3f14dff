"""Ground-truth network standing in for the deployed hardware.

The fiber physics is shared with the twin; the amplifiers and the
transceiver curve are hidden "truth" models the twin never sees directly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .errors import NotFound
from .grid import ChannelGrid, PowerProfile, mw_to_dbm
from .link import Amp, LinkPath, Span, Toggles, report_from_state, run_cascade
from .topology import AmpRef, Topology
from .trx import TrxPenaltyModel, fit_trx, read_trx_csv

ASE_FLOOR_DBM = -200.0
MAKE_SEED = 644  # shared by every device of the same make


@dataclass(frozen=True)
class ProbeRecord:
    probe_id: int
    path_id: str
    f_thz: np.ndarray
    p_in_dbm: np.ndarray
    p_out_dbm: np.ndarray
    p_ase_dbm: np.ndarray
    grid_fingerprint: str = ""


@dataclass(frozen=True)
class GroundTruthEdfa:
    """Hidden amplifier: input-power dependent tilt + fixed ripple + NF curve.

    The tilt basis is +1 at the low-frequency edge and -1 at the high one.
    NF rises quadratically towards the high-frequency (short-wavelength)
    edge and with low input power.
    """

    grid: ChannelGrid
    kappa_t: float = -0.15
    p_ref_dbm: float = 0.0
    ripple_amp_db: tuple = (0.3, 0.2, 0.1)
    ripple_cycles: tuple = (0.7, 1.9, 3.3)
    ripple_phase: tuple = (0.0, 0.0, 0.0)
    nf_base_db: float = 4.5
    nf_span_db: float = 1.5
    nf_low_input_slope: float = 0.05
    b_ref: float = 12.5

    @classmethod
    def make(cls, grid, seed=MAKE_SEED, **kw):
        phases = tuple(np.random.default_rng(seed).uniform(0, 2 * np.pi, 3))
        return cls(grid, ripple_phase=phases, b_ref=grid.b_ref, **kw)

    @property
    def _x(self):
        f = self.grid.f
        span = f[-1] - f[0]
        return (f - f[0]) / span if span > 0 else np.zeros_like(f)

    def tilt_basis(self):
        return 1.0 - 2.0 * self._x

    def ripple_db(self):
        x = self._x
        return sum(a * np.sin(2 * np.pi * c * x + p)
                   for a, c, p in zip(self.ripple_amp_db, self.ripple_cycles, self.ripple_phase))

    def gain_shape_and_nf(self, p_in_dbm, p_out_dbm):
        shape = self.kappa_t * (p_in_dbm - self.p_ref_dbm) * self.tilt_basis() + self.ripple_db()
        x = self._x
        low = ad.maximum(-5.0 - p_in_dbm, 0.0) * self.nf_low_input_slope
        nf = self.nf_base_db + self.nf_span_db * x * x + low
        return shape, nf


def default_trx_truth(grid: ChannelGrid, peak_db=20.0, edge_drop_db=3.0, n=None):
    """Dense back-to-back SNR curve: a dome that droops towards the band edges."""
    lam = np.sort(grid.wavelength_nm)
    lo, hi = lam[0] - 0.4, lam[-1] + 0.4
    xs = np.linspace(lo, hi, n or 2 * grid.n_ch + 1)
    u = (xs - (lo + hi) / 2) / ((hi - lo) / 2)
    snr = peak_db - edge_drop_db * (0.8 * u**2 + 0.2 * u**4) + 0.4 * u
    return [(float(a), float(b)) for a, b in zip(xs, snr)]


class NetworkSim:
    """Simulated deployed network for one topology."""

    def __init__(self, topology: Topology, trx_truth: TrxPenaltyModel | None = None,
                 osa_sigma_db: float | None = None, device_variation: bool | None = None,
                 truth_kwargs: dict | None = None):
        self.topology = topology
        self.grid = topology.grid
        self.osa_sigma_db = topology.osa_sigma_db if osa_sigma_db is None else osa_sigma_db
        self.device_variation = (topology.device_variation if device_variation is None
                                 else device_variation)
        self.master_seed = topology.master_seed
        if trx_truth is None:
            csv = topology.trx_truth_path()
            trx_truth = read_trx_csv(csv) if csv else fit_trx(default_trx_truth(self.grid))
        self.trx_truth = trx_truth
        self._truth_kwargs = truth_kwargs or {}
        self.devices = {}
        for refs in topology.paths.values():
            for r in refs:
                if isinstance(r, AmpRef) and r.device_id not in self.devices:
                    seed = r.device_seed if self.device_variation else MAKE_SEED
                    self.devices[r.device_id] = GroundTruthEdfa.make(self.grid, seed, **self._truth_kwargs)

    @property
    def path_ids(self):
        return list(self.topology.paths)

    def _refs(self, path_id):
        try:
            return self.topology.paths[path_id]
        except KeyError:
            raise NotFound(f"unknown path {path_id!r}") from None

    def link(self, path_id, device=None) -> LinkPath:
        """Path with truth amplifiers, or with ``device`` at every amplifier."""
        els = []
        for r in self._refs(path_id):
            if isinstance(r, AmpRef):
                els.append(Amp(r.setpoint_dbm, device or self.devices[r.device_id], r.device_id))
            else:
                els.append(Span(r.span, f"{r.src}>{r.dst}/{r.fiber}"))
        return LinkPath(path_id, self.grid, tuple(els))

    def twin_link(self, path_id, model) -> LinkPath:
        return self.link(path_id, device=model)

    def measure_probe(self, path_id, input_profile: PowerProfile, probe_index: int = 0) -> ProbeRecord:
        """OSA measurement of signal and ASE after the path.

        Measurement noise is Gaussian in dB and seeded by
        (master_seed, probe_index), so probes can be taken in any order.
        """
        link = self.link(path_id)
        input_profile.check_grid(self.grid)
        state = run_cascade(link, input_profile.p)
        rng = np.random.default_rng([self.master_seed, probe_index])
        noise = rng.normal(0.0, 1.0, size=(2, self.grid.n_ch)) * self.osa_sigma_db
        with np.errstate(divide="ignore"):
            out = mw_to_dbm(state.signal)
            ase = np.maximum(mw_to_dbm(state.ase), ASE_FLOOR_DBM)
        return ProbeRecord(probe_index, path_id, self.grid.f.copy(), input_profile.p_dbm,
                           out + noise[0], ase + noise[1], self.grid.fingerprint)

    def ground_truth_snr(self, path_id, input_profile: PowerProfile):
        input_profile.check_grid(self.grid)
        state = run_cascade(self.link(path_id), input_profile.p)
        return report_from_state(path_id, self.grid, state, self.trx_truth, Toggles(True, True),
                                 self.topology.threshold_db)

    def b2b_samples(self, n: int = 8):
        """Back-to-back TRX SNR measured at ``n`` wavelengths across the band."""
        lam = np.sort(self.grid.wavelength_nm)
        pts = np.linspace(lam[0], lam[-1], n)
        return [(float(x), float(y)) for x, y in zip(pts, self.trx_truth.snr_db_at(pts))]
