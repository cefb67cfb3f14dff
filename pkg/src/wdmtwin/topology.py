"""Topology JSON: schema, validation and parsing into spans/amplifier refs.

Path elements are strings:

* ``"A>B"`` or ``"A>B/k"``: span along the edge between nodes A and B,
  travelling from A to B, on fiber ``k`` of that edge (default 0).
* ``"amp:N/k"``: the k-th EDFA listed at node N.
"""

from __future__ import annotations

import json
import os
import re
from dataclasses import dataclass, field

import jsonschema

from .errors import SchemaError
from .fiber import FiberSpan
from .grid import ChannelGrid

SPAN_RE = re.compile(r"^([A-Za-z0-9_]+)>([A-Za-z0-9_]+)(?:/(\d+))?$")
AMP_RE = re.compile(r"^amp:([A-Za-z0-9_]+)(?:/(\d+))?$")

_num = {"type": "number"}
TOPOLOGY_SCHEMA = {
    "type": "object",
    "required": ["grid", "nodes", "edges", "edfas", "paths"],
    "properties": {
        "grid": {
            "type": "object",
            "required": ["n_ch", "f0_thz", "step_thz"],
            "properties": {
                "n_ch": {"type": "integer", "minimum": 1},
                "f0_thz": {"type": "number", "exclusiveMinimum": 0},
                "step_thz": {"type": "number", "exclusiveMinimum": 0},
                "b_ch_ghz": {"type": "number", "exclusiveMinimum": 0},
                "b_ref_ghz": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "nodes": {"type": "array", "items": {"type": "string"}, "minItems": 1},
        "edges": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["a", "b", "length_km"],
                "properties": {
                    "a": {"type": "string"},
                    "b": {"type": "string"},
                    "length_km": {"type": "number", "minimum": 0},
                    "alpha_db_km": {"type": "number", "exclusiveMinimum": 0},
                    "beta2_ps2_km": _num,
                    "gamma_1_wkm": {"type": "number", "minimum": 0},
                    "cr_1_wkmthz": {"type": "number", "minimum": 0},
                    "lumped_loss_db": {"type": "number", "minimum": 0},
                    "n_fibers": {"type": "integer", "minimum": 1},
                },
            },
        },
        "edfas": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["node", "setpoint_dbm"],
                "properties": {
                    "node": {"type": "string"},
                    "setpoint_dbm": _num,
                    "device_seed": {"type": "integer", "minimum": 0},
                },
            },
        },
        "paths": {
            "type": "object",
            "additionalProperties": {
                "type": "array",
                "minItems": 1,
                "items": {"type": "string"},
            },
        },
        "sim": {
            "type": "object",
            "properties": {
                "osa_sigma_db": {"type": "number", "minimum": 0},
                "master_seed": {"type": "integer", "minimum": 0},
                "device_variation": {"type": "boolean"},
                "training_path": {"type": "string"},
            },
        },
        "trx_truth_csv": {"type": "string"},
        "threshold_db": _num,
    },
}


@dataclass(frozen=True)
class SpanRef:
    src: str
    dst: str
    fiber: int
    span: FiberSpan


@dataclass(frozen=True)
class AmpRef:
    node: str
    index: int
    setpoint_dbm: float
    device_seed: int

    @property
    def device_id(self) -> str:
        return f"{self.node}/{self.index}"


@dataclass
class Topology:
    grid: ChannelGrid
    nodes: list
    paths: dict  # path_id -> list of SpanRef | AmpRef
    osa_sigma_db: float = 0.05
    master_seed: int = 0
    device_variation: bool = False
    training_path: str = "train"
    trx_truth_csv: str | None = None
    threshold_db: float = 12.5
    raw: dict = field(default_factory=dict)
    base_dir: str = "."

    def trx_truth_path(self):
        if self.trx_truth_csv is None:
            return None
        return os.path.join(self.base_dir, self.trx_truth_csv)


def _fail(where, msg):
    raise SchemaError(f"{where}: {msg}")


def parse_topology(doc: dict, base_dir=".") -> Topology:
    validator = jsonschema.Draft7Validator(TOPOLOGY_SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        loc = "/".join(str(p) for p in e.absolute_path) or "<root>"
        _fail(f"topology field {loc}", e.message)

    grid = ChannelGrid.from_dict(doc["grid"])
    nodes = list(doc["nodes"])
    edges = {}
    for k, e in enumerate(doc["edges"]):
        for end in (e["a"], e["b"]):
            if end not in nodes:
                _fail(f"edges/{k}", f"unknown node {end!r}")
        span = FiberSpan(
            length=e["length_km"],
            alpha_db=e.get("alpha_db_km", 0.2),
            beta2=e.get("beta2_ps2_km", -21.3),
            gamma=e.get("gamma_1_wkm", 1.3),
            cr=e.get("cr_1_wkmthz", 0.028),
            lumped_loss_db=e.get("lumped_loss_db", 0.0),
        )
        key = frozenset((e["a"], e["b"]))
        if key in edges:
            _fail(f"edges/{k}", "duplicate edge")
        edges[key] = (span, e.get("n_fibers", 4))

    amps_at: dict[str, list] = {}
    for k, a in enumerate(doc["edfas"]):
        if a["node"] not in nodes:
            _fail(f"edfas/{k}", f"unknown node {a['node']!r}")
        lst = amps_at.setdefault(a["node"], [])
        lst.append(AmpRef(a["node"], len(lst), float(a["setpoint_dbm"]), int(a.get("device_seed", k))))

    paths = {}
    for pid, refs in doc["paths"].items():
        out = []
        for k, ref in enumerate(refs):
            where = f"paths/{pid}/{k}"
            if m := SPAN_RE.match(ref):
                src, dst, fib = m.group(1), m.group(2), int(m.group(3) or 0)
                key = frozenset((src, dst))
                if key not in edges:
                    _fail(where, f"no edge between {src!r} and {dst!r}")
                span, n_fib = edges[key]
                if fib >= n_fib:
                    _fail(where, f"fiber index {fib} out of range (edge has {n_fib})")
                out.append(SpanRef(src, dst, fib, span))
            elif m := AMP_RE.match(ref):
                node, idx = m.group(1), int(m.group(2) or 0)
                lst = amps_at.get(node, [])
                if idx >= len(lst):
                    _fail(where, f"no EDFA #{idx} at node {node!r}")
                out.append(lst[idx])
            else:
                _fail(where, f"cannot parse element {ref!r}")
        paths[pid] = out

    sim = doc.get("sim", {})
    topo = Topology(
        grid=grid, nodes=nodes, paths=paths,
        osa_sigma_db=sim.get("osa_sigma_db", 0.05),
        master_seed=sim.get("master_seed", 0),
        device_variation=sim.get("device_variation", False),
        training_path=sim.get("training_path", "train"),
        trx_truth_csv=doc.get("trx_truth_csv"),
        threshold_db=doc.get("threshold_db", 12.5),
        raw=doc, base_dir=base_dir,
    )
    if topo.training_path not in paths and "training_path" in sim:
        _fail("sim/training_path", f"unknown path {topo.training_path!r}")
    return topo


def load_topology(path) -> Topology:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: line {exc.lineno}: {exc.msg}") from exc
    return parse_topology(doc, base_dir=os.path.dirname(os.path.abspath(path)))
