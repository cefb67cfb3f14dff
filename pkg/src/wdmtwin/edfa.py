"""Hybrid EDFA twin: physical gain/ASE skeleton plus two small MLPs.

The gain net predicts a per-channel gain deviation (dB) and the NF net a
per-channel noise figure squashed into ``nf_bounds``. Both nets see only the
operating point (total input and output power, dBm).
"""

from __future__ import annotations

import copy
import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .errors import InvalidArgument
from .fiber import SpanState
from .grid import PLANCK, ChannelGrid

ENVELOPE_DBM = (-30.0, 23.0)
# input normalisation spans the operating envelope so the nets stay in the
# near-linear tanh region over everything a network path can present
NORM_MEAN = (-3.5, 10.0)
NORM_SCALE = (26.5, 15.0)


@dataclass
class Mlp:
    """tanh MLP with identity output. ``weights[k]`` has shape (in, out)."""

    dims: tuple
    weights: list
    biases: list

    def __call__(self, x_in, x_out):
        """Forward on the two (already normalised) operating-point inputs.

        ``x_in`` may be batched with a trailing singleton axis; ``x_out`` is
        broadcast against it.
        """
        w0 = self.weights[0]
        h = x_in * ad.getitem(w0, 0) + x_out * ad.getitem(w0, 1) + self.biases[0]
        for k in range(1, len(self.weights)):
            h = ad.tanh(h)
            h = h @ self.weights[k] + self.biases[k]
        return h

    @classmethod
    def init(cls, dims, rng, zero_output=True):
        weights, biases = [], []
        for k, (a, b) in enumerate(zip(dims[:-1], dims[1:])):
            last = k == len(dims) - 2
            if last and zero_output:
                w = np.zeros((a, b))
            else:
                lim = np.sqrt(6.0 / (a + b))
                w = rng.uniform(-lim, lim, size=(a, b))
            weights.append(w)
            biases.append(np.zeros(b))
        return cls(tuple(dims), weights, biases)

    def params(self, prefix):
        out = {}
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            out[f"{prefix}.W{k}"] = w
            out[f"{prefix}.b{k}"] = b
        return out

    def with_params(self, params, prefix):
        n = len(self.weights)
        return Mlp(self.dims, [params[f"{prefix}.W{k}"] for k in range(n)],
                   [params[f"{prefix}.b{k}"] for k in range(n)])

    def to_dict(self):
        return {"weights": [np.asarray(w).tolist() for w in self.weights],
                "biases": [np.asarray(b).tolist() for b in self.biases]}

    @classmethod
    def from_dict(cls, dims, d):
        return cls(tuple(dims), [np.array(w, dtype=float).reshape(a, b) for w, a, b
                                 in zip(d["weights"], dims[:-1], dims[1:])],
                   [np.array(b, dtype=float) for b in d["biases"]])


@dataclass
class EdfaTwinModel:
    grid: ChannelGrid
    gain_net: Mlp
    nf_net: Mlp
    norm_mean: tuple = NORM_MEAN
    norm_scale: tuple = NORM_SCALE
    nf_bounds: tuple = (3.0, 12.0)
    b_ref: float = 12.5
    metadata: dict = field(default_factory=dict)

    @property
    def grid_fingerprint(self):
        return self.grid.fingerprint

    def params(self) -> dict:
        return {**self.gain_net.params("gain"), **self.nf_net.params("nf")}

    def with_params(self, params) -> "EdfaTwinModel":
        """Shallow copy whose weights are replaced (e.g. by tape Vars)."""
        m = copy.copy(self)
        m.gain_net = self.gain_net.with_params(params, "gain")
        m.nf_net = self.nf_net.with_params(params, "nf")
        return m

    def _inputs(self, p_in_dbm, p_out_dbm):
        x_in = (p_in_dbm - self.norm_mean[0]) / self.norm_scale[0]
        x_out = (np.asarray(p_out_dbm, dtype=float) - self.norm_mean[1]) / self.norm_scale[1]
        return x_in, x_out

    def gain_shape_and_nf(self, p_in_dbm, p_out_dbm):
        """Per-channel gain deviation (dB) and noise figure (dB)."""
        x_in, x_out = self._inputs(p_in_dbm, p_out_dbm)
        lo, hi = self.nf_bounds
        dg = self.gain_net(x_in, x_out)
        nf = lo + (hi - lo) * ad.sigmoid(self.nf_net(x_in, x_out))
        return dg, nf

    # serialisation

    def to_dict(self) -> dict:
        return {
            "grid_fingerprint": self.grid.fingerprint,
            "grid": self.grid.to_dict(),
            "layer_dims": list(self.gain_net.dims),
            "gain_net": self.gain_net.to_dict(),
            "nf_net": self.nf_net.to_dict(),
            "norm_constants": {"mean": list(self.norm_mean), "scale": list(self.norm_scale)},
            "nf_bounds": list(self.nf_bounds),
            "b_ref_ghz": self.b_ref,
            "metadata": self.metadata,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EdfaTwinModel":
        grid = ChannelGrid.from_dict(d["grid"])
        if grid.fingerprint != d["grid_fingerprint"]:
            raise InvalidArgument("model grid does not match its stored fingerprint")
        dims = tuple(d["layer_dims"])
        return cls(grid, Mlp.from_dict(dims, d["gain_net"]), Mlp.from_dict(dims, d["nf_net"]),
                   tuple(d["norm_constants"]["mean"]), tuple(d["norm_constants"]["scale"]),
                   tuple(d["nf_bounds"]), d["b_ref_ghz"], d.get("metadata", {}))

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)

    def save(self, path):
        with open(path, "w", newline="\n") as fh:
            fh.write(self.dumps())

    @classmethod
    def load(cls, path) -> "EdfaTwinModel":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def init_model(grid: ChannelGrid, seed: int = 0, hidden=(16, 16)) -> EdfaTwinModel:
    rng = np.random.default_rng(seed)
    dims = (2, *hidden, grid.n_ch)
    gain = Mlp.init(dims, rng)
    nf = Mlp.init(dims, rng)
    return EdfaTwinModel(grid, gain, nf, b_ref=grid.b_ref, metadata={"seed": seed, "trained": False})


def ase_quantum(grid: ChannelGrid, b_ref_ghz: float | None = None) -> np.ndarray:
    """h*nu*B_ref per channel, in mW."""
    b = grid.b_ref if b_ref_ghz is None else b_ref_ghz
    return PLANCK * grid.f * 1e12 * b * 1e9 * 1e3


def amplify(device, state: SpanState, setpoint_dbm: float, grid: ChannelGrid) -> SpanState:
    """Constant-output-power amplifier acting on a span state.

    ``device`` supplies ``gain_shape_and_nf(p_in_dbm, p_out_dbm)``; both the
    twin and the ground-truth amplifier go through this function.
    """
    total = ad.sum_(state.signal + state.ase + state.nli, axis=-1, keepdims=True)
    p_in_dbm = 10.0 * ad.log10(total)
    flags = state.flags
    pin = ad.value(p_in_dbm)
    lo, hi = ENVELOPE_DBM
    if np.any(pin < lo) or np.any(pin > hi):
        msg = f"out-of-envelope input {float(np.min(pin)):.2f}..{float(np.max(pin)):.2f} dBm"
        flags = flags + (msg,)
        warnings.warn(msg, RuntimeWarning, stacklevel=2)

    dg, nf_db = device.gain_shape_and_nf(p_in_dbm, setpoint_dbm)
    weights = (state.signal + state.ase + state.nli) / total
    dg = dg - ad.sum_(weights * dg, axis=-1, keepdims=True)
    g_lin = ad.pow10(((setpoint_dbm - p_in_dbm) + dg) / 10.0)
    b_ref = getattr(device, "b_ref", grid.b_ref)
    ase_new = ase_quantum(grid, b_ref) * ad.pow10(nf_db / 10.0) * ad.maximum(g_lin - 1.0, 0.0)

    sig = state.signal * g_lin
    ase = state.ase * g_lin + ase_new
    nli = state.nli * g_lin
    kappa = 10.0 ** (setpoint_dbm / 10.0) / ad.sum_(sig + ase + nli, axis=-1, keepdims=True)
    return SpanState(sig * kappa, ase * kappa, nli * kappa, flags)
