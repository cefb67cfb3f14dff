"""Default four-node network (STN, RDG, FRX, PGT) and its two test links."""

from __future__ import annotations

import copy

# Per-edge lengths reproduce the two link totals: 439.4 km and 592.4 km.
_EDGES = [("STN", "RDG", 73.0), ("RDG", "FRX", 70.2), ("RDG", "PGT", 76.5)]
LINE_SETPOINT_DBM = 18.0

DEFAULT_TOPOLOGY = {
    "grid": {"n_ch": 48, "f0_thz": 191.35, "step_thz": 0.1, "b_ch_ghz": 12.5, "b_ref_ghz": 12.5},
    "nodes": ["STN", "RDG", "FRX", "PGT"],
    "edges": [
        {"a": a, "b": b, "length_km": L, "alpha_db_km": 0.2, "beta2_ps2_km": -21.3,
         "gamma_1_wkm": 1.3, "cr_1_wkmthz": 0.028, "lumped_loss_db": 0.0, "n_fibers": 4}
        for a, b, L in _EDGES
    ],
    "edfas": [
        {"node": "RDG", "setpoint_dbm": LINE_SETPOINT_DBM, "device_seed": 11},
        {"node": "RDG", "setpoint_dbm": LINE_SETPOINT_DBM, "device_seed": 12},
        {"node": "RDG", "setpoint_dbm": LINE_SETPOINT_DBM, "device_seed": 13},
        {"node": "RDG", "setpoint_dbm": LINE_SETPOINT_DBM, "device_seed": 14},
        {"node": "PGT", "setpoint_dbm": LINE_SETPOINT_DBM, "device_seed": 21},
        {"node": "PGT", "setpoint_dbm": LINE_SETPOINT_DBM, "device_seed": 22},
    ],
    "paths": {
        # access link used for remote training, independent fibers each way
        "train": ["STN>RDG/0", "amp:RDG/0", "RDG>STN/1"],
        "short": ["STN>RDG/0", "amp:RDG/0", "RDG>PGT/0", "amp:PGT/0", "PGT>RDG/1", "amp:RDG/1",
                  "RDG>FRX/0", "FRX>RDG/1", "amp:RDG/2", "RDG>STN/1"],
        "long": ["STN>RDG/0", "amp:RDG/0", "RDG>PGT/0", "amp:PGT/0", "PGT>RDG/1", "amp:RDG/1",
                 "RDG>PGT/2", "amp:PGT/1", "PGT>RDG/3", "amp:RDG/2",
                 "RDG>FRX/0", "FRX>RDG/1", "amp:RDG/3", "RDG>STN/1"],
    },
    "sim": {"osa_sigma_db": 0.05, "master_seed": 2022, "device_variation": False,
            "training_path": "train"},
    "trx_truth_csv": "trx_truth.csv",
    "threshold_db": 12.5,
}


def default_topology(**sim_overrides) -> dict:
    doc = copy.deepcopy(DEFAULT_TOPOLOGY)
    doc["sim"].update(sim_overrides)
    return doc
