import json

import yaml

from cellfree_aging.cli import main


def write_spec(path, **extra):
    doc = {"name": "cli", "topology": {"type": "cell_free", "M": 25, "L": 2}, "K": 8,
           "tau_up": 4, "tau_dp": 4, "tau_dd": 100, "seed": 3, "realizations": 2,
           "sweep": {"parameter": "v_max", "values": [5, 85]}}
    doc.update(extra)
    path.write_text(yaml.safe_dump(doc))
    return path


def test_run(tmp_path, capsys):
    spec = write_spec(tmp_path / "s.yaml")
    assert main(["run", str(spec), "--out", str(tmp_path / "out")]) == 0
    assert (tmp_path / "out" / "cli_CF-DT.csv").exists()
    assert "90%-likely" in capsys.readouterr().out


def test_run_overrides(tmp_path):
    spec = write_spec(tmp_path / "s.yaml")
    out = tmp_path / "o"
    assert main(["run", str(spec), "--out", str(out), "--seed", "9", "--realizations", "3",
                 "--format", "json", "--threads", "2"]) == 0
    doc = json.loads((out / "cli_CF-sCSI.json").read_text())
    assert doc["metadata"]["seed"] == 9 and doc["metadata"]["realizations"] == 3


def test_run_bad_spec_reports_failure(tmp_path, capsys):
    spec = write_spec(tmp_path / "s.yaml", colour="red")
    assert main(["run", str(spec)]) == 1
    record = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert record["status"] == "fail" and "colour" in record["failures"][0]["message"]


def test_missing_spec_file(capsys):
    assert main(["run", "/nonexistent/spec.yaml"]) == 1
    assert json.loads(capsys.readouterr().err)["command"] == "run"


def test_figure(tmp_path):
    assert main(["figure", "F8", "--realizations", "2", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "F8_CF-DT.csv").exists()


def test_selftest(capsys):
    assert main(["selftest", "--deployments", "5"]) == 0
    assert "FAIL" not in capsys.readouterr().out


def test_oracle_exit_code_matches_table(tmp_path, capsys):
    spec = write_spec(tmp_path / "s.yaml", topology={"type": "cellular", "L_c": 2, "M_c": 30,
                                                     "K_c": 4}, sweep=None)
    rc = main(["oracle", "--spec", str(spec), "--draws", "10000", "--out", str(tmp_path)])
    out = capsys.readouterr().out
    rows = json.loads((tmp_path / "oracle.json").read_text())
    assert rows and (rc == 0) == all(r["passed"] for r in rows)
    assert out.count("PASS") + out.count("FAIL") == len(rows)
