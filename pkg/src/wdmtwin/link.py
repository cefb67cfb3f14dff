"""Cascade assembly and per-channel SNR/OSNR/margin prediction."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import autodiff as ad
from .edfa import amplify
from .errors import InvalidArgument
from .fiber import FiberSpan, SpanState, propagate_span
from .grid import ChannelGrid, PowerProfile, mw_to_dbm
from .trx import TrxPenaltyModel, snr_trx

SNR_CAP_DB = 60.0


@dataclass(frozen=True)
class Span:
    fiber: FiberSpan
    label: str = ""


@dataclass(frozen=True)
class Amp:
    setpoint_dbm: float
    device: object
    label: str = ""


@dataclass(frozen=True)
class Toggles:
    nl: bool = True
    trx: bool = True

    @classmethod
    def from_variant(cls, name: str) -> "Toggles":
        try:
            return {"full": cls(True, True), "no-nl": cls(False, True),
                    "no-nl-no-trx": cls(False, False)}[name]
        except KeyError:
            raise InvalidArgument(f"unknown variant {name!r}") from None

    @property
    def name(self) -> str:
        if self.nl and self.trx:
            return "full"
        if self.trx:
            return "no-nl"
        return "no-nl-no-trx" if not self.nl else "no-trx"


@dataclass(frozen=True)
class LinkPath:
    path_id: str
    grid: ChannelGrid
    elements: tuple

    def __post_init__(self):
        if not self.elements:
            raise InvalidArgument(f"path {self.path_id!r} has no elements")

    @property
    def amps(self):
        return [e for e in self.elements if isinstance(e, Amp)]

    @property
    def length_km(self) -> float:
        return sum(e.fiber.length for e in self.elements if isinstance(e, Span))

    def with_device(self, device) -> "LinkPath":
        """Copy with every amplifier replaced by ``device``."""
        els = tuple(replace(e, device=device) if isinstance(e, Amp) else e for e in self.elements)
        return replace(self, elements=els)


def run_cascade(path: LinkPath, launch, nl: bool = True) -> SpanState:
    """Fold a launch profile (mW array or Var, shape (..., n_ch)) through the path."""
    state = SpanState.launch(launch)
    for el in path.elements:
        if isinstance(el, Span):
            span = el.fiber if nl else el.fiber.linear()
            state = propagate_span(span, state, path.grid)
        else:
            state = amplify(el.device, state, el.setpoint_dbm, path.grid)
    return state


def snr_linear(state: SpanState, grid: ChannelGrid, trx: TrxPenaltyModel | None, use_trx: bool):
    """Per-channel SNR (linear) including NLI and optionally the TRX floor."""
    ase_in_bch = state.ase * (grid.b_ch / grid.b_ref)
    inv = (ase_in_bch + state.nli) / state.signal
    if use_trx and trx is not None:
        inv = inv + 1.0 / snr_trx(trx, grid.wavelength_nm)
    return 1.0 / inv


def snr_db_graph(path: LinkPath, launch, trx, toggles: Toggles):
    """Differentiable per-channel SNR in dB for a launch array/Var."""
    state = run_cascade(path, launch, nl=toggles.nl)
    return 10.0 * ad.log10(snr_linear(state, path.grid, trx, toggles.trx))


@dataclass
class SnrReport:
    path_id: str
    f_thz: np.ndarray
    lambda_nm: np.ndarray
    signal_dbm: np.ndarray
    ase_dbm: np.ndarray
    nli_dbm: np.ndarray
    osnr_db: np.ndarray
    snr_db: np.ndarray
    threshold_db: float = 12.5
    toggles: Toggles = Toggles()
    flags: tuple = field(default_factory=tuple)

    @property
    def margin_db(self) -> np.ndarray:
        return self.snr_db - self.threshold_db

    @property
    def min_margin(self) -> float:
        return float(np.min(self.margin_db))


def _cap(x_db):
    x_db = np.asarray(x_db, dtype=float)
    capped = ~(x_db <= SNR_CAP_DB)
    return np.where(capped, SNR_CAP_DB, x_db), bool(np.any(capped))


def report_from_state(path_id, grid, state, trx, toggles, threshold_db=12.5):
    s = ad.value(state.signal)
    a = ad.value(state.ase)
    n = ad.value(state.nli)
    flags = tuple(state.flags)
    with np.errstate(divide="ignore", invalid="ignore"):
        osnr = 10 * np.log10(s / a)
        inv = (a * grid.b_ch / grid.b_ref + n) / s
        if toggles.trx and trx is not None:
            inv = inv + 1.0 / snr_trx(trx, grid.wavelength_nm)
        snr = -10 * np.log10(inv)
    osnr, c1 = _cap(osnr)
    snr, c2 = _cap(snr)
    if c1 or c2:
        flags += (f"snr-capped-at-{SNR_CAP_DB:g}dB",)
    return SnrReport(path_id, grid.f.copy(), grid.wavelength_nm, mw_to_dbm(s), mw_to_dbm(a),
                     mw_to_dbm(n), osnr, snr, threshold_db, toggles, flags)


def predict(path: LinkPath, launch: PowerProfile, trx: TrxPenaltyModel | None,
            toggles: Toggles = Toggles(), threshold_db: float = 12.5) -> SnrReport:
    if not isinstance(launch, PowerProfile):
        raise InvalidArgument("predict expects a PowerProfile launch")
    launch.check_grid(path.grid)
    state = run_cascade(path, launch.p, nl=toggles.nl)
    return report_from_state(path.path_id, path.grid, state, trx, toggles, threshold_db)
