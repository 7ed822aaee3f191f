import csv
import io
import json

import pytest

from combentropy import cli, serialization
from combentropy.bqc import build_D_client, minimal_instance


def report(argv):
    out = cli.run(argv)
    assert out.exit_code == 0, out.text
    return json.loads(out.text)


def test_bqc_builtin():
    doc = report(["bqc", "--builtin", "minimal-3vertex"])
    res = doc["results"]
    assert res["exact"] == pytest.approx(0.125, abs=1e-9)
    assert res["thm1_bound_hmin"] == pytest.approx(3.0)
    assert res["theorem_bounds"]["any_round_hmin"] == pytest.approx(2.0)
    assert res["instance"]["classical_values"] == 64 and res["instance"]["block_length"] == 512
    assert set(doc) == {"command", "scenario", "results", "environment"}


def test_bqc_two_rounds_brackets():
    res = report(["bqc", "--builtin", "minimal-3vertex-2rounds"])["results"]
    assert res["rounds"] == 2
    assert res["lower"] <= res["upper"]
    assert res["hmin_bounds"][1] >= res["theorem_bounds"]["any_round_hmin"] - 1e-9


def test_reports_are_deterministic_apart_from_timing():
    a = report(["bqc", "--builtin", "minimal-3vertex", "--seed", "7"])
    b = report(["bqc", "--builtin", "minimal-3vertex", "--seed", "7"])
    a["environment"].pop("wall_ms")
    b["environment"].pop("wall_ms")
    assert a == b


def test_config_file_and_environment(tmp_path, monkeypatch):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"angle_count": 8}))
    assert report(["bqc", "--config", str(cfg)])["results"]["instance"]["classical_values"] == 512
    monkeypatch.setenv(cli.CONFIG_ENV, str(cfg))
    assert report(["bqc"])["results"]["instance"]["classical_values"] == 512
    # explicit flags override the config
    assert report(["bqc", "--angle-count", "4"])["results"]["instance"]["classical_values"] == 64


def test_calibrate_csv():
    out = cli.run(["calibrate", "--min", "2", "--max", "3"])
    assert out.exit_code == 0
    rows = list(csv.DictReader(io.StringIO(out.text)))
    assert [int(r["angle_count"]) for r in rows] == [2, 3]
    assert float(rows[0]["p_guess"]) == pytest.approx(1.0, abs=1e-5)
    assert float(rows[1]["p_guess"]) == pytest.approx(0.991582, abs=1e-5)


def test_planes_and_xy_family():
    assert report(["planes"])["results"]["optimal"] == pytest.approx(1.0, abs=1e-6)
    res = report(["gflow", "--builtin", "xy-restricted", "--mesh", "16"])["results"]
    assert res["optimal"] == pytest.approx(0.25, abs=1e-6)
    assert res["observational"] <= res["optimal"] + 1e-6
    assert res["strategy"]["valid"]
    assert res["equivalence_deviation"]["XY"] < 1e-9


def test_validate_and_min_entropy_files(tmp_path):
    path = tmp_path / "client.json"
    serialization.save(build_D_client(minimal_instance(4)), path)
    doc = report(["validate", str(path)])
    assert doc["results"]["valid"]
    cert = tmp_path / "cert.json"
    res = report(["min-entropy", str(path), "--certificate", str(cert)])["results"]
    assert res["p_guess"] == pytest.approx(0.125, abs=1e-9)
    assert res["certificate"]["valid"]
    assert report(["validate", str(cert)])["results"]["valid"]


def test_invalid_comb_exits_one(tmp_path):
    doc = serialization.to_dict(build_D_client(minimal_instance(4)))
    doc["blocks"][0]["diagonal"][0] = 2.0
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(doc))
    out = cli.run(["validate", str(path)])
    assert out.exit_code == 1 and not json.loads(out.text)["results"]["valid"]


@pytest.mark.parametrize("argv, code", [
    (["bqc", "--builtin", "nope"], 1),
    (["calibrate", "--min", "1"], 1),
    (["validate", "/nonexistent.json"], 1),
    (["planes", "--dim-cap", "4"], 3),
])
def test_error_exit_codes(argv, code, capsys):
    assert cli.main(argv) == code
    err = json.loads(capsys.readouterr().err)
    assert err["exit_code"] == code and err["error"]["message"]


def test_out_file(tmp_path):
    target = tmp_path / "r.json"
    assert cli.main(["bqc", "--out", str(target)]) == 0
    assert json.loads(target.read_text())["command"] == "bqc"
