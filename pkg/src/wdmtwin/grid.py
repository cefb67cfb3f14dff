"""Channel grid, unit conversions and per-channel power profiles."""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgument

C_LIGHT = 299792458.0  # m/s
PLANCK = 6.62607015e-34  # J*s
DB = 10.0 / math.log(10.0)  # dB per neper of power, ~4.3429


def dbm_to_mw(x_dbm):
    """Convert dBm to mW. Accepts scalars or arrays."""
    x = np.asarray(x_dbm, dtype=float)
    if not np.all(np.isfinite(x)):
        raise InvalidArgument("dbm_to_mw: non-finite input")
    out = 10.0 ** (x / 10.0)
    return float(out) if out.ndim == 0 else out


def mw_to_dbm(x_mw):
    """Convert mW to dBm; zero maps to -inf."""
    x = np.asarray(x_mw, dtype=float)
    if np.any(x < 0) or np.any(np.isnan(x)):
        raise InvalidArgument("mw_to_dbm: negative or NaN power")
    with np.errstate(divide="ignore"):
        out = 10.0 * np.log10(x)
    return float(out) if out.ndim == 0 else out


def thz_to_nm(f_thz):
    return C_LIGHT / (np.asarray(f_thz, dtype=float) * 1e12) * 1e9


@dataclass(frozen=True, eq=False)
class ChannelGrid:
    """Fixed WDM channel plan.

    ``f`` holds centre frequencies in THz, ``b_ch`` per-channel signal
    bandwidths in GHz. Instances are immutable; two grids are considered the
    same grid when their fingerprints match.
    """

    f: np.ndarray
    spacing: float = 100.0
    b_ch: np.ndarray | None = None
    b_ref: float = 12.5
    fingerprint: str = field(init=False)

    def __post_init__(self):
        f = np.array(self.f, dtype=float).ravel()
        n = f.size
        if n < 1:
            raise InvalidArgument("grid needs at least one channel")
        b_ch = np.full(n, 12.5) if self.b_ch is None else np.array(self.b_ch, dtype=float).ravel()
        if b_ch.size != n:
            raise InvalidArgument("b_ch length must equal channel count")
        if n > 1:
            df = np.diff(f) * 1e3
            if np.any(df <= 0):
                raise InvalidArgument("grid frequencies must be strictly increasing")
            if np.any(np.abs(df - self.spacing) > 1e-6):
                raise InvalidArgument("non-uniform grids are not supported")
        if np.any(b_ch <= 0) or np.any(b_ch > self.spacing):
            raise InvalidArgument("channel bandwidths must lie in (0, spacing]")
        if not self.b_ref > 0:
            raise InvalidArgument("b_ref must be positive")
        f.setflags(write=False)
        b_ch.setflags(write=False)
        object.__setattr__(self, "f", f)
        object.__setattr__(self, "b_ch", b_ch)
        object.__setattr__(self, "spacing", float(self.spacing))
        object.__setattr__(self, "b_ref", float(self.b_ref))
        h = hashlib.sha256()
        for arr in (f, b_ch, np.array([self.spacing, self.b_ref])):
            h.update(np.ascontiguousarray(arr, dtype="<f8").tobytes())
        object.__setattr__(self, "fingerprint", h.hexdigest()[:16])

    @classmethod
    def uniform(cls, n_ch=48, f0_thz=191.35, step_thz=0.1, b_ch_ghz=12.5, b_ref_ghz=12.5):
        f = f0_thz + step_thz * np.arange(n_ch)
        return cls(f=f, spacing=step_thz * 1e3, b_ch=np.full(n_ch, float(b_ch_ghz)), b_ref=b_ref_ghz)

    @property
    def n_ch(self) -> int:
        return self.f.size

    @property
    def wavelength_nm(self) -> np.ndarray:
        return thz_to_nm(self.f)

    def to_dict(self) -> dict:
        b = self.b_ch
        return {
            "n_ch": self.n_ch,
            "f0_thz": float(self.f[0]),
            "step_thz": self.spacing / 1e3,
            "b_ch_ghz": float(b[0]) if np.all(b == b[0]) else b.tolist(),
            "b_ref_ghz": self.b_ref,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ChannelGrid":
        n = int(d.get("n_ch", 48))
        b = d.get("b_ch_ghz", 12.5)
        f = d.get("f0_thz", 191.35) + d.get("step_thz", 0.1) * np.arange(n)
        return cls(f=f, spacing=d.get("step_thz", 0.1) * 1e3,
                   b_ch=np.broadcast_to(np.asarray(b, dtype=float), (n,)),
                   b_ref=d.get("b_ref_ghz", 12.5))

    def __eq__(self, other):
        return isinstance(other, ChannelGrid) and other.fingerprint == self.fingerprint

    def __hash__(self):
        return hash(self.fingerprint)


@dataclass(frozen=True, eq=False)
class PowerProfile:
    """Per-channel linear powers (mW) bound to a grid."""

    grid: ChannelGrid
    p: np.ndarray

    def __post_init__(self):
        p = np.array(self.p, dtype=float).ravel()
        if p.size != self.grid.n_ch:
            raise InvalidArgument(f"profile has {p.size} channels, grid has {self.grid.n_ch}")
        if not np.all(np.isfinite(p)) or np.any(p < 0):
            raise InvalidArgument("profile powers must be finite and non-negative")
        p.setflags(write=False)
        object.__setattr__(self, "p", p)

    @property
    def grid_fingerprint(self) -> str:
        return self.grid.fingerprint

    @property
    def p_dbm(self) -> np.ndarray:
        return mw_to_dbm(self.p)

    @classmethod
    def from_dbm(cls, grid, p_dbm):
        return cls(grid, dbm_to_mw(np.asarray(p_dbm, dtype=float)))

    def check_grid(self, grid: ChannelGrid):
        if grid.fingerprint != self.grid.fingerprint:
            raise InvalidArgument("power profile belongs to a different channel grid")


def flat_profile(grid: ChannelGrid, p_tot_dbm: float) -> PowerProfile:
    p_tot = dbm_to_mw(p_tot_dbm)
    return PowerProfile(grid, np.full(grid.n_ch, p_tot / grid.n_ch))


def total_power(profile) -> float:
    """Total power in dBm; ``-inf`` for an all-zero profile."""
    p = profile.p if isinstance(profile, PowerProfile) else np.asarray(profile, dtype=float)
    return mw_to_dbm(float(np.sum(p)))
