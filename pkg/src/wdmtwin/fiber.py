"""Analytical single-span fiber model: loss, SRS tilt and GN-model NLI.

Powers are linear mW throughout. Functions take either a
:class:`~wdmtwin.grid.PowerProfile` or a raw per-channel array (or tape
``Var``) of shape ``(..., n_ch)`` together with the grid, so the same code
serves the ground-truth simulator and the differentiable twin.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

from . import autodiff as ad
from .errors import InvalidArgument, UnsupportedConfiguration
from .grid import DB, ChannelGrid, PowerProfile


@dataclass(frozen=True)
class FiberSpan:
    """Standard single-mode fiber span.

    Units: length km, alpha_db dB/km, beta2 ps^2/km, gamma 1/(W km),
    cr 1/(W km THz), lumped_loss_db dB.
    """

    length: float
    alpha_db: float = 0.2
    beta2: float = -21.3
    gamma: float = 1.3
    cr: float = 0.028
    lumped_loss_db: float = 0.0

    def __post_init__(self):
        # zero length is allowed and acts as an identity element
        if not self.length >= 0:
            raise InvalidArgument("span length must be >= 0")
        if not self.alpha_db > 0:
            raise InvalidArgument("alpha_db must be > 0")
        if self.gamma < 0 or self.cr < 0:
            raise InvalidArgument("gamma and cr must be >= 0")

    @property
    def alpha_p(self) -> float:
        """Power attenuation coefficient in 1/km."""
        return self.alpha_db / DB

    @property
    def loss_db(self) -> float:
        return self.alpha_db * self.length + self.lumped_loss_db

    def linear(self) -> "FiberSpan":
        """Same span with SRS and Kerr nonlinearity switched off."""
        return replace(self, gamma=0.0, cr=0.0)


@dataclass
class SpanState:
    """Signal, accumulated ASE (in b_ref) and NLI (in b_ch) per channel."""

    signal: object
    ase: object
    nli: object
    flags: tuple = field(default_factory=tuple)

    @classmethod
    def launch(cls, p):
        p = p.p if isinstance(p, PowerProfile) else p
        z = np.zeros(ad.value(p).shape)
        return cls(p, z, z.copy())

    def map(self, fn):
        return SpanState(fn(self.signal), fn(self.ase), fn(self.nli), self.flags)

    def total(self):
        return ad.sum_(self.signal + self.ase + self.nli, axis=-1)


def effective_lengths(span: FiberSpan) -> tuple[float, float]:
    """(L_eff, L_eff_a) in km."""
    a = span.alpha_p
    aL = a * span.length
    if aL < 1e-6:
        l_eff = span.length * (1.0 - aL / 2.0 + aL * aL / 6.0)
    else:
        l_eff = -math.expm1(-aL) / a
    return l_eff, 1.0 / a


def _unpack(launch, grid):
    if isinstance(launch, PowerProfile):
        if grid is not None:
            launch.check_grid(grid)
        return launch.p, launch.grid
    if grid is None:
        raise InvalidArgument("grid is required when passing a raw power array")
    return launch, grid


def srs_tilt(span: FiberSpan, launch, grid: ChannelGrid | None = None):
    """Linear per-channel SRS gain factors for one span.

    First-order triangular model, renormalised so that launched power is
    conserved exactly (loss is applied separately).
    """
    p, grid = _unpack(launch, grid)
    shape = ad.value(p).shape
    p_tot = ad.sum_(p, axis=-1, keepdims=True)
    if span.cr == 0 or grid.n_ch == 1 or np.all(ad.value(p_tot) == 0):
        return np.ones(shape)
    if np.any(ad.value(p_tot) == 0):
        raise InvalidArgument("srs_tilt: zero total power in part of a batch")
    f = grid.f
    l_eff, _ = effective_lengths(span)
    f_mean = ad.sum_(p * f, axis=-1, keepdims=True) / p_tot
    tilt_db = (DB * 1e-3 * span.cr * l_eff) * p_tot * (f_mean - f)
    g = ad.pow10(tilt_db / 10.0)
    return g * (p_tot / ad.sum_(p * g, axis=-1, keepdims=True))


# Global correction on the 32/27 XCI prefactor, certified against
# gnrf_oracle: the ln() form over 2*pi already spans both mirror islands.
XCI_CALIBRATION = 0.5


@functools.lru_cache(maxsize=256)
def _nli_matrix(span: FiberSpan, grid: ChannelGrid) -> np.ndarray:
    if span.gamma == 0 or span.length == 0:
        return np.zeros((grid.n_ch, grid.n_ch))
    if span.beta2 == 0:
        raise UnsupportedConfiguration("nli: beta2 = 0 makes the closed form singular")
    l_eff, l_eff_a = effective_lengths(span)
    b2 = abs(span.beta2) * 1e-24  # s^2/km
    bw = grid.b_ch * 1e9  # Hz
    f = grid.f * 1e12
    pref = span.gamma**2 * l_eff**2
    denom = 2 * math.pi * b2 * l_eff_a * bw**2  # per channel, indexed by the interferer

    eta = np.zeros((grid.n_ch, grid.n_ch))
    df = np.abs(f[:, None] - f[None, :])
    off = ~np.eye(grid.n_ch, dtype=bool)
    half = bw[None, :] / 2
    ratio = np.where(off, (df + half) / np.where(off, df - half, 1.0), 1.0)
    eta[off] = (XCI_CALIBRATION * 32.0 / 27.0 * pref * np.log(ratio) / denom[None, :])[off]
    sci = 16.0 / 27.0 * pref * np.arcsinh(math.pi**2 / 2 * b2 * l_eff_a * bw**2) / denom
    eta[np.diag_indices(grid.n_ch)] = sci
    eta.setflags(write=False)
    return eta


def nli_coefficients(span: FiberSpan, grid: ChannelGrid) -> np.ndarray:
    """Matrix eta (1/W^2) with nli_i = sum_j eta_ij p_i p_j^2.

    Diagonal holds the SCI coefficients, off-diagonal the XCI ones.
    Cached per (span, grid fingerprint).
    """
    return _nli_matrix(span, grid)


def nli_span(span: FiberSpan, launch, grid: ChannelGrid | None = None):
    """NLI power (mW, in b_ch) generated in one span, incoherent GN model."""
    p, grid = _unpack(launch, grid)
    eta = nli_coefficients(span, grid)
    if not eta.any():
        return np.zeros(ad.value(p).shape)
    pw = p * 1e-3
    return (pw * ((pw * pw) @ eta.T)) * 1e3


def propagate_span(span: FiberSpan, state: SpanState, grid: ChannelGrid) -> SpanState:
    if span.length == 0 and span.lumped_loss_db == 0:
        return SpanState(state.signal, state.ase, state.nli, state.flags)
    generated = nli_span(span, state.signal, grid)
    factor = srs_tilt(span, state.signal, grid) * 10.0 ** (-span.loss_db / 10.0)
    return SpanState(state.signal * factor, state.ase * factor,
                     (state.nli + generated) * factor, state.flags)


class OracleResult(NamedTuple):
    nli_mw: float
    rel_change: float  # change when the integration step is doubled
    resolved: bool


_RIDGE_STEPS = np.logspace(-7, 0, 29)


def _gl_panels(lo, hi, n, ridge=None):
    """Composite Gauss-Legendre rule on [lo, hi], graded towards ``ridge``."""
    x, w = np.polynomial.legendre.leggauss(n)
    if ridge is not None and lo < ridge < hi:
        cuts = np.concatenate(([lo, ridge, hi], ridge - _RIDGE_STEPS, ridge + _RIDGE_STEPS))
        cuts = np.unique(cuts[(cuts >= lo) & (cuts <= hi)])
    else:
        cuts = np.linspace(lo, hi, 5)
    a, b = cuts[:-1, None], cuts[1:, None]
    nodes = (0.5 * (b - a) * x + 0.5 * (a + b)).ravel()
    weights = (0.5 * (b - a) * w).ravel()
    return nodes, weights


def _gn_integral(span, grid, p_mw, channel, order):
    """GN double integral, all band triples landing on ``channel``.

    Coordinates are normalised to the common channel bandwidth. The outer
    variable carries the kernel ridge (f1 = f or f2 = f) where present; the
    inner one is integrated over the exact interval for which the third
    frequency stays inside its band.
    """
    if np.ptp(grid.b_ch) != 0:
        raise InvalidArgument("gnrf_oracle needs equal channel bandwidths")
    a = span.alpha_p
    eal = math.exp(-a * span.length)
    L = span.length
    c = 4 * math.pi**2 * span.beta2 * 1e-24
    bw = float(grid.b_ch[0]) * 1e9
    fn = (grid.f - grid.f[channel]) * 1e12 / bw  # channel offsets in bandwidths
    psd = p_mw * 1e-3 / bw
    n = grid.n_ch
    i = channel

    def kernel(d1, d2):
        x = c * (d1 * bw) * (d2 * bw)
        return np.abs((1 - eal * np.exp(1j * x * L)) / (a - 1j * x)) ** 2

    t, tw = np.polynomial.legendre.leggauss(order)
    rx, rxw = np.polynomial.legendre.leggauss(order)
    rx, rxw = rx / 2, rxw / 2

    total = 0.0
    for d, dw in zip(rx, rxw):
        g_nli = 0.0
        for j in range(n):
            for k in range(n):
                m = j + k - i
                if not 0 <= m < n:
                    continue
                w3 = psd[j] * psd[k] * psd[m]
                if w3 == 0:
                    continue
                # outer variable x_o in band o, inner x_q in band q
                if k == i and j != i:
                    o, q = k, j
                else:
                    o, q = j, k
                ridge_o = d if o == i else None
                xo, wo = _gl_panels(-0.5, 0.5, order, ridge_o)
                fo = fn[o] + xo  # offset of outer frequency from channel centre
                # f_o + f_q - f_r must fall in band m:
                lo = np.maximum(-0.5, fn[m] - 0.5 - fo - fn[q] + d)
                hi = np.minimum(0.5, fn[m] + 0.5 - fo - fn[q] + d)
                ok = hi > lo
                if q == i:
                    acc = 0.0
                    for xo_, wo_, lo_, hi_ in zip(xo[ok], wo[ok], lo[ok], hi[ok]):
                        xq, wq = _gl_panels(lo_, hi_, order, d)
                        acc += wo_ * np.sum(wq * kernel(fn[o] + xo_ - d, fn[q] + xq - d))
                else:
                    xo, wo, lo, hi = xo[ok], wo[ok], lo[ok], hi[ok]
                    xq = 0.5 * (hi - lo)[:, None] * t + 0.5 * (hi + lo)[:, None]
                    wq = 0.5 * (hi - lo)[:, None] * tw
                    kern = kernel((fn[o] + xo - d)[:, None], fn[q] + xq - d)
                    acc = np.sum(wo[:, None] * wq * kern)
                g_nli += w3 * acc * bw * bw
        total += dw * g_nli * bw
    return 16.0 / 27.0 * span.gamma**2 * total * 1e3


def gnrf_oracle(span: FiberSpan, launch, channel: int, grid: ChannelGrid | None = None,
                order: int = 8) -> OracleResult:
    """Brute-force GN reference integral for one channel (test oracle).

    Integrates the triple product of the rectangular input PSD against the
    single-span link kernel over every (f1, f2) band pair whose mixing
    product lands inside the channel band, then over the receiver bandwidth.
    The coarse pass uses half the Gauss-Legendre order per panel. Slow; test
    use only.
    """
    p, grid = _unpack(launch, grid)
    p = np.asarray(ad.value(p), dtype=float)
    if span.gamma == 0 or span.length == 0:
        return OracleResult(0.0, 0.0, True)
    fine = _gn_integral(span, grid, p, channel, order)
    coarse = _gn_integral(span, grid, p, channel, max(order // 2, 2))
    rel = abs(fine - coarse) / abs(fine) if fine else 0.0
    return OracleResult(fine, rel, rel <= 0.05)
