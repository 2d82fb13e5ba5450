import hashlib
import json
import subprocess
import sys

import numpy as np
import pytest

from cpsdetect import io
from cpsdetect.cli import load_config, main
from cpsdetect.datalink import CyberSnapshot, IndexTable, PhysicalSnapshot
from cpsdetect.errors import CsvFormatError
from cpsdetect.scenario import ScenarioConfig, generate

SMALL = {
    "scenario": {"n_records": 400, "n_features": 20},
    "train": {"n_iterations": 5, "max_depth": 3},
}


@pytest.fixture
def small_cfg(tmp_path):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(SMALL))
    return p


# -- CSV round trips ------------------------------------------------------------------

def test_link_csv_round_trip_is_exact(tmp_path):
    link = generate(ScenarioConfig(n_records=100, n_features=15, seed=1))
    io.write_link(link, tmp_path / "l.csv")
    back = io.read_link(tmp_path / "l.csv")
    assert np.array_equal(back.features(), link.features())
    assert back.labels() == link.labels()
    X, y, w = io.read_labeled_matrix(tmp_path / "l.csv")
    assert np.array_equal(X, link.features()) and np.all(w == 1)


def test_raw_input_round_trip(tmp_path):
    phys = [PhysicalSnapshot("X1", 0.5, (1 / 3, 2e-17))]
    cyb = [CyberSnapshot("ip1", 0.5, 0.1, 0.2, 0.3)]
    idx = IndexTable.from_rows([("A", "L", "X1", "ip1")])
    io.write_physical(phys, tmp_path / "p.csv")
    io.write_cyber(cyb, tmp_path / "c.csv")
    io.write_index(idx, tmp_path / "i.csv")
    assert io.read_physical(tmp_path / "p.csv") == phys
    assert io.read_cyber(tmp_path / "c.csv") == cyb
    assert io.read_index(tmp_path / "i.csv") == idx


@pytest.mark.parametrize("text,row,col", [
    ("timestamp,device\n0,X1\n", 1, 2),
    ("timestamp,device_id,attr_1\n0,X1,abc\n", 2, 3),
    ("timestamp,device_id,attr_1\n0,X1,1.0\n1,X1\n", 3, None),
])
def test_csv_errors_carry_location(tmp_path, text, row, col):
    p = tmp_path / "bad.csv"
    p.write_text(text)
    with pytest.raises(CsvFormatError) as exc:
        io.read_physical(p)
    assert exc.value.row == row and exc.value.column == col


# -- config -----------------------------------------------------------------------------

def test_config_sections_and_seed_override(small_cfg):
    cfg = load_config(small_cfg, seed=9)
    assert cfg.scenario.seed == 9 and cfg.scenario.n_records == 400
    assert cfg.train.n_iterations == 5
    assert cfg.balance.seed != cfg.train.seed
    assert cfg.cost_model(("S1", "S2", "S3", "S4", "S5")).class_weights == (1, 3, 3, 3, 1)


# -- subcommands and exit codes ---------------------------------------------------------------

def test_subcommands_chain(tmp_path, small_cfg):
    out = tmp_path / "out"
    assert main(["generate", "--config", str(small_cfg), "--output", str(out)]) == 0
    assert main(["cluster", "--config", str(small_cfg), "--input", str(out / "scenario.csv"),
                 "--output", str(out)]) == 0
    assert (out / "cluster_model.json").exists() and (out / "clusters.csv").exists()
    assert main(["balance", "--config", str(small_cfg), "--input", str(out / "scenario.csv"),
                 "--output", str(out)]) == 0
    assert main(["train", "--config", str(small_cfg), "--input", str(out / "balanced.csv"),
                 "--output", str(out)]) == 0
    trace = (out / "loss_trace.csv").read_text().splitlines()
    assert trace[0] == "iteration,loss" and len(trace) == 7
    assert main(["evaluate", "--config", str(small_cfg), "--input", str(out / "model.json"),
                 str(out / "scenario.csv"), "--output", str(out / "ev"), "--format", "csv"]) == 0
    rep = json.loads((out / "ev" / "report.json").read_text())
    assert rep["schema_version"] == 1 and 0 <= rep["macro_auc"] <= 1
    assert (out / "ev" / "report.csv").exists()


def test_fuse_subcommand(tmp_path):
    phys = [PhysicalSnapshot("X1", t, (t,)) for t in (0.1, 1.1, 2.1)]
    cyb = [CyberSnapshot("ip1", t, 1, 2, 3) for t in (0.2, 1.2)]
    io.write_physical(phys, tmp_path / "p.csv")
    io.write_cyber(cyb, tmp_path / "c.csv")
    io.write_index(IndexTable.from_rows([("A", "L", "X1", "ip1")]), tmp_path / "i.csv")
    assert main(["fuse", "--input", str(tmp_path / "p.csv"), str(tmp_path / "c.csv"),
                 str(tmp_path / "i.csv"), "--output", str(tmp_path)]) == 0
    summary = json.loads((tmp_path / "fuse_summary.json").read_text())
    assert summary == {"fused": 2, "dropped": 1, "records_after_compression": 2}
    assert len(io.read_link(tmp_path / "fused.csv")) == 2


def test_evaluate_perfect_prediction_file(tmp_path):
    classes = ["S1", "S2", "S3"]
    labels = ["S1", "S2", "S3", "S3"]
    P = np.eye(3)[[0, 1, 2, 2]]
    io.write_predictions(labels, P, classes, tmp_path / "pred.csv")
    assert main(["evaluate", "--input", str(tmp_path / "pred.csv"),
                 "--output", str(tmp_path)]) == 0
    assert json.loads((tmp_path / "report.json").read_text())["accuracy"] == 1.0


def test_exit_codes(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["generate", "--config", str(bad), "--output", str(tmp_path)]) == 2
    unknown = tmp_path / "unknown.json"
    unknown.write_text(json.dumps({"scenario": {"colour": 1}}))
    assert main(["generate", "--config", str(unknown), "--output", str(tmp_path)]) == 2
    csv = tmp_path / "ragged.csv"
    csv.write_text("timestamp,area,line,component_id,ip,repeat_count,f_1\n0,A,L,X,ip\n")
    assert main(["cluster", "--input", str(csv), "--output", str(tmp_path)]) == 3
    assert main(["cluster", "--input", str(tmp_path / "nope.csv"),
                 "--output", str(tmp_path)]) == 4
    err = capsys.readouterr().err.strip().splitlines()
    assert len(err) == 4 and all(line.startswith("error: ") for line in err)
    assert "row 2" in err[2]


def test_pipeline_manifest_and_rerun(tmp_path, small_cfg):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["pipeline", "--config", str(small_cfg), "--seed", "3", "--output", str(a)]) == 0
    assert main(["pipeline", "--config", str(small_cfg), "--seed", "3", "--output", str(b)]) == 0
    ma = json.loads((a / "manifest.json").read_text())
    mb = json.loads((b / "manifest.json").read_text())
    assert ma["files"] == mb["files"]
    for name, digest in ma["files"].items():
        assert io_hash(a / name) == digest
    assert {"report.json", "model.json", "balanced.csv", "clusters.csv"} <= set(ma["files"])


def io_hash(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


def test_module_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "cpsdetect", "generate", "--output",
                        str(tmp_path), "--config", "/does/not/exist.json"],
                       capture_output=True, text=True)
    assert r.returncode == 4 and r.stderr.startswith("error: ")
