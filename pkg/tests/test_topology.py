import json

import pytest

from wdmtwin.errors import SchemaError
from wdmtwin.scenario import default_topology
from wdmtwin.topology import AmpRef, SpanRef, load_topology, parse_topology


def _lengths(topo, pid):
    return sum(r.span.length for r in topo.paths[pid] if isinstance(r, SpanRef))


def test_default_paths_match_link_lengths():
    topo = parse_topology(default_topology())
    assert _lengths(topo, "short") == pytest.approx(439.4, abs=1e-9)
    assert _lengths(topo, "long") == pytest.approx(592.4, abs=1e-9)
    amps = {pid: [r for r in refs if isinstance(r, AmpRef)] for pid, refs in topo.paths.items()}
    assert len(amps["short"]) == 4 and len(amps["long"]) == 6
    assert len({a.device_id for a in amps["long"]}) == 6
    assert [a.device_id for a in amps["train"]] == ["RDG/0"]
    train = topo.paths["train"]
    assert (train[0].fiber, train[2].fiber) == (0, 1)  # independent fibers each way


def test_schema_errors_name_the_field():
    doc = default_topology()
    doc["edges"][1]["length_km"] = "far"
    with pytest.raises(SchemaError, match="edges/1/length_km"):
        parse_topology(doc)
    doc = default_topology()
    del doc["grid"]
    with pytest.raises(SchemaError, match="grid"):
        parse_topology(doc)


@pytest.mark.parametrize("ref,msg", [
    ("STN>XYZ/0", "no edge"),
    ("amp:PGT/5", "no EDFA"),
    ("STN>RDG/9", "fiber index"),
    ("hello", "cannot parse"),
])
def test_bad_path_elements(ref, msg):
    doc = default_topology()
    doc["paths"]["short"][0] = ref
    with pytest.raises(SchemaError, match=msg):
        parse_topology(doc)


def test_unknown_node_in_edge():
    doc = default_topology()
    doc["edges"][0]["a"] = "MARS"
    with pytest.raises(SchemaError, match="unknown node"):
        parse_topology(doc)


def test_json_syntax_error_reports_line(tmp_path):
    p = tmp_path / "t.json"
    p.write_text('{\n "grid": {\n  "n_ch": 48,\n }\n}\n')
    with pytest.raises(SchemaError, match="line 4"):
        load_topology(p)


def test_load_resolves_trx_path_relative_to_file(tmp_path):
    p = tmp_path / "topo.json"
    p.write_text(json.dumps(default_topology()))
    topo = load_topology(p)
    assert topo.trx_truth_path() == str(tmp_path / "trx_truth.csv")
    assert topo.master_seed == 2022 and topo.threshold_db == 12.5
