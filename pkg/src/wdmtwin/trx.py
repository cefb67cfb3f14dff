"""Wavelength-dependent transceiver penalty as a back-to-back SNR curve."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgument, SchemaError


@dataclass(frozen=True)
class TrxPenaltyModel:
    """Monotone piecewise-cubic (Fritsch-Carlson) interpolant of B2B SNR.

    Outside the sampled range the end values are held.
    """

    wavelength_nm: np.ndarray
    snr_db: np.ndarray
    slopes: np.ndarray

    def snr_db_at(self, lam_nm):
        x = np.clip(np.asarray(lam_nm, dtype=float), self.wavelength_nm[0], self.wavelength_nm[-1])
        xs, ys, ms = self.wavelength_nm, self.snr_db, self.slopes
        k = np.clip(np.searchsorted(xs, x, side="right") - 1, 0, len(xs) - 2)
        h = xs[k + 1] - xs[k]
        t = (x - xs[k]) / h
        h10 = t * (1 - t) ** 2
        h01 = t * t * (3 - 2 * t)
        h11 = t * t * (t - 1)
        # incremental Hermite form (h00 = 1 - h01): exact on constant pieces
        y = ys[k] + (ys[k + 1] - ys[k]) * h01 + h * (h10 * ms[k] + h11 * ms[k + 1])
        return np.where(t == 1.0, ys[k + 1], y)

    def rows(self):
        return list(zip(self.wavelength_nm.tolist(), self.snr_db.tolist()))


def fit_trx(samples) -> TrxPenaltyModel:
    """Fit from ``[(lambda_nm, snr_db), ...]``; input is sorted by wavelength."""
    arr = np.asarray(samples, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2 or arr.shape[0] < 2:
        raise InvalidArgument("fit_trx needs at least two (lambda_nm, snr_db) samples")
    arr = arr[np.argsort(arr[:, 0], kind="stable")]
    x, y = arr[:, 0].copy(), arr[:, 1].copy()
    if np.any(np.diff(x) == 0):
        raise InvalidArgument("fit_trx: duplicate wavelengths")
    if not np.all(np.isfinite(arr)):
        raise InvalidArgument("fit_trx: non-finite sample")

    h = np.diff(x)
    delta = np.diff(y) / h
    m = np.empty_like(y)
    m[0], m[-1] = delta[0], delta[-1]
    m[1:-1] = np.where(delta[:-1] * delta[1:] > 0, (delta[:-1] + delta[1:]) / 2, 0.0)
    for k, d in enumerate(delta):
        if d == 0:
            m[k] = m[k + 1] = 0.0
            continue
        a, b = m[k] / d, m[k + 1] / d
        if a < 0:
            m[k], a = 0.0, 0.0
        if b < 0:
            m[k + 1], b = 0.0, 0.0
        r = a * a + b * b
        if r > 9:
            tau = 3 / np.sqrt(r)
            m[k], m[k + 1] = tau * a * d, tau * b * d
    for arr_ in (x, y, m):
        arr_.setflags(write=False)
    return TrxPenaltyModel(x, y, m)


def snr_trx(model: TrxPenaltyModel, lam_nm):
    """Back-to-back SNR, linear."""
    return 10.0 ** (model.snr_db_at(lam_nm) / 10.0)


def read_trx_csv(path) -> TrxPenaltyModel:
    rows = []
    with open(path) as fh:
        header = None
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if header is None:
                header = [c.strip() for c in line.split(",")]
                if header[:2] != ["lambda_nm", "snr_db"]:
                    raise SchemaError(f"{path}: expected header lambda_nm,snr_db")
                continue
            a, b = line.split(",")[:2]
            rows.append((float(a), float(b)))
    return fit_trx(rows)
